//! Time the per-frame pipeline on synthetic 640x480 footage.
//!
//! `cargo run --release --example throughput -- [frames] [repeats]`

use gesturekit::classifier::{Arch, Classifier, ClassifierConfig};
use gesturekit::commands::bench;
use gesturekit::config::RunConfig;

fn main() -> gesturekit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let frames = args.first().map_or(Ok(300), |s| s.parse()).expect("frames");
    let repeats = args.get(1).map_or(Ok(3), |s| s.parse()).expect("repeats");
    let mut config = RunConfig::default();
    config.video.frames = frames;
    let names = (0..4).map(|i| format!("class{i}")).collect();
    let model = Classifier::new(ClassifierConfig::new(Arch::TinyCnn, 4), names)?;
    print!("{}", bench(&config, &model, repeats, 1)?.to_text());
    Ok(())
}
