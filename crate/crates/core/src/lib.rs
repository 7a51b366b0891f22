//! Vision-based hand-gesture recognition and gesture-driven control.
//!
//! Frames flow through [`segmentation`] (motion and skin masks, hand
//! isolation), [`classifier`] (tiny CNN or micro vision transformer),
//! [`tracking`] (Kalman smoothing of the hand centroid) and [`hmi`]
//! (debounced dispatch to simulated applications). [`eval`] holds the
//! measurement math and [`dataset`] the mask datasets.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod hmi;
pub mod imaging;
pub mod classifier;
pub mod commands;
pub mod config;
pub mod segmentation;
pub mod tracking;

pub use error::{Error, ErrorKind, Result};

/// `gk --version` text: crate, config schema and weight-format versions.
pub const VERSION_LINE: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (config schema 1, weight format GKW1 version 1)"
);

#[cfg(test)]
mod tests {
    #[test]
    fn version_line_matches_constants() {
        let expect = format!(
            "config schema {}, weight format {} version {}",
            crate::config::CONFIG_SCHEMA_VERSION,
            std::str::from_utf8(crate::classifier::WEIGHT_MAGIC).unwrap(),
            crate::classifier::WEIGHT_VERSION
        );
        assert!(super::VERSION_LINE.contains(&expect), "{}", super::VERSION_LINE);
    }
}
