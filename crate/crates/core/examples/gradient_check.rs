//! Compare backpropagated gradients with central differences on small
//! instances of both classifier architectures.
//!
//! `cargo run --release --example gradient_check`

use gesturekit::classifier::{gradcheck, Arch, ClassifierConfig};

fn main() -> gesturekit::Result<()> {
    for arch in [Arch::TinyCnn, Arch::MicroVit] {
        let r = gradcheck(&ClassifierConfig::toy(arch), 3, 400, 1e-3, 1e-3)?;
        println!(
            "{arch:?}: {} params, {} checked, {} skipped at kinks, {} failures, max rel err {:.2e} at {}[{}]",
            r.param_count, r.checked, r.skipped, r.failures, r.max_rel_err, r.worst.0, r.worst.1
        );
    }
    Ok(())
}
