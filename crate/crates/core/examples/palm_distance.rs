//! City-block distance transform of a gesture mask; the maximum marks the
//! palm center.
//!
//! `cargo run --example palm_distance -- [disk|square|bar|cross|star|fork]`

use gesturekit::dataset::{prototype, Shape};
use gesturekit::imaging::{distance_transform, BinaryMask};

fn show(dt: &gesturekit::imaging::DistanceMap) {
    for row in dt.rows() {
        let line: Vec<String> = row.iter().map(|d| format!("{d:>2}")).collect();
        println!("{}", line.join(""));
    }
}

fn main() -> gesturekit::Result<()> {
    let block = BinaryMask::from_fn(11, 11, |r, c| (1..10).contains(&r) && (1..10).contains(&c));
    let dt = distance_transform(&block);
    println!("9x9 block in an 11x11 image, max {} at {:?}:", dt.max(), dt.argmax());
    show(&dt);

    let shape: Shape = std::env::args().nth(1).map_or(Ok(Shape::Fork), |s| s.parse())?;
    let mask = prototype(shape, 64);
    let dt = distance_transform(&mask);
    let (r, c) = dt.argmax();
    println!("\n{shape} prototype: palm center (row {r}, col {c}), radius {}", dt.max());
    for row in 0..mask.height() {
        let line: String = (0..mask.width())
            .map(|col| match (row == r && col == c, mask.get(row, col)) {
                (true, _) => '@',
                (false, true) => '#',
                (false, false) => '.',
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
