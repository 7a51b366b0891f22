//! Confusion-matrix metrics and a one-sample t-test of per-fold accuracy.
//!
//! `cargo run --example eval_report`

use gesturekit::eval::{f_score, metrics, t_test, t_test_from_summary, ConfusionMatrix};

fn main() -> gesturekit::Result<()> {
    let cm = ConfusionMatrix::from_rows(&[vec![48, 1, 1, 0], vec![0, 50, 0, 0], vec![2, 0, 47, 1], vec![0, 0, 3, 47]])?;
    let names: Vec<String> = ["disk", "square", "bar", "cross"].map(String::from).to_vec();
    let m = metrics(&cm)?;
    print!("{}", m.to_table(&names));
    println!("F(99.28, 99.22) = {:.4}", f_score(99.28, 99.22));

    let folds = [99.5, 100.0, 99.4, 99.9, 100.0, 99.6, 100.0, 99.8, 100.0, 100.0];
    let r = t_test(&folds, 99.0)?;
    println!(
        "\nper-fold accuracy vs 99%: mean {:.3}, sd {:.4}, t {:.3}, df {}, p {:.2e}, 95% CI of difference ({:.3}, {:.3})",
        r.mean, r.sd, r.t, r.df, r.p_two, r.ci95.0, r.ci95.1
    );
    let s = t_test_from_summary(99.83, 0.29079, 10, 99.0)?;
    println!("from summary (99.83, 0.29079, k=10): se {:.4}, t {:.3}, p {:.2e}", s.se, s.t, s.p_two);
    Ok(())
}
