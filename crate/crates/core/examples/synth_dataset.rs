//! Write a synthetic mask dataset with its manifest, then read it back.
//!
//! `cargo run --release --example synth_dataset -- [out_dir] [classes] [per_class]`

use gesturekit::dataset::{load_manifest, synth_generate, SynthSpec, MANIFEST_FILE};

fn main() -> gesturekit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().map_or("synth_data", String::as_str);
    let classes = args.get(1).map_or(Ok(6), |s| s.parse()).expect("classes");
    let per_class = args.get(2).map_or(Ok(20), |s| s.parse()).expect("per_class");

    let spec = SynthSpec::new(classes, per_class, 7)?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    synth_generate(&spec, out, threads)?;
    let manifest = load_manifest(std::path::Path::new(out).join(MANIFEST_FILE))?;
    println!("{} masks, classes {:?}", manifest.len(), manifest.class_names);
    let mask = manifest.load_mask(0)?;
    for row in (0..mask.height()).step_by(2) {
        let line: String = (0..mask.width()).map(|c| if mask.get(row, c) { '#' } else { '.' }).collect();
        println!("{line}");
    }
    Ok(())
}
