//! Train a classifier on synthetic gesture masks and report test accuracy.
//!
//! `cargo run --release --example train_synthetic -- [tiny_cnn|micro_vit] [per_class] [epochs]`

use std::time::Instant;

use gesturekit::classifier::{evaluate, train, Arch, ClassifierConfig, LabeledSet};
use gesturekit::dataset::{synth_masks, SynthSpec};
use gesturekit::eval::split_dataset;
use gesturekit::segmentation::{segment_mask, SegmentationConfig};

fn main() -> gesturekit::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arch: Arch = args.first().map_or("tiny_cnn", String::as_str).parse()?;
    let per_class = args.get(1).map_or(Ok(200), |s| s.parse()).expect("per_class");
    let epochs = args.get(2).map_or(Ok(30), |s| s.parse()).expect("epochs");

    let spec = SynthSpec::new(4, per_class, 7)?;
    let (masks, labels) = synth_masks(&spec)?;
    let seg = SegmentationConfig::default();
    let inputs = masks
        .iter()
        .map(|m| segment_mask(m, &seg).map(|o| o.expect("synthetic mask survives segmentation")))
        .collect::<gesturekit::Result<Vec<_>>>()?;
    let all = LabeledSet::from_masks(&inputs, &labels)?;
    let split = split_dataset(&labels, 7)?;
    let (tr, va, te) = (all.subset(&split.train), all.subset(&split.val), all.subset(&split.test));

    let config = ClassifierConfig {
        epochs,
        ..ClassifierConfig::new(arch, 4)
    };
    let names = spec.classes.iter().map(|c| c.name.clone()).collect();
    let start = Instant::now();
    let (mut model, history) = train(&tr, &va, &config, names, |r| {
        println!(
            "epoch {:>2}  loss {:.4}  acc {:.3}  val_loss {:.4}  val_acc {:.3}  ({:.1}s)",
            r.epoch,
            r.train_loss,
            r.train_acc,
            r.val_loss,
            r.val_acc,
            start.elapsed().as_secs_f64()
        )
    })?;
    let test = evaluate(&mut model, &te)?;
    println!(
        "{arch:?}: best epoch {}, test accuracy {:.4} on {} masks, {:.1}s",
        history.best_epoch,
        test.accuracy,
        te.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
