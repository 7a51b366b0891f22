use super::{BinaryMask, Frame};
use crate::error::{Error, Result};

/// Outcome of a global threshold: foreground is `pixel > threshold`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Threshold {
    pub threshold: u8,
    pub mask: BinaryMask,
    /// Set when the image is constant and no split exists.
    pub degenerate: bool,
}

fn require_gray(gray: &Frame) -> Result<()> {
    if gray.channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "threshold expects a 1-channel frame, got {} channels",
            gray.channels()
        )));
    }
    Ok(())
}

/// Foreground where `pixel > threshold`.
pub fn fixed_threshold(gray: &Frame, threshold: u8) -> Result<BinaryMask> {
    require_gray(gray)?;
    let data = gray
        .data()
        .iter()
        .map(|&v| if v > threshold { 255 } else { 0 })
        .collect();
    BinaryMask::new(gray.width(), gray.height(), data)
}

/// Otsu's method: pick the cutoff `t` maximizing the between-class variance of
/// `{v <= t}` vs `{v > t}`; ties go to the smallest `t`.
pub fn otsu_threshold(gray: &Frame) -> Result<Threshold> {
    require_gray(gray)?;
    let mut hist = [0u64; 256];
    for &v in gray.data() {
        hist[v as usize] += 1;
    }
    let total = gray.data().len() as f64;

    let first = hist.iter().position(|&h| h > 0).unwrap_or(0);
    if hist[first] as f64 == total {
        return Ok(Threshold {
            threshold: first as u8,
            mask: BinaryMask::empty(gray.width(), gray.height()),
            degenerate: true,
        });
    }

    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &h)| i as f64 * h as f64)
        .sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let mut best = (0u8, f64::NEG_INFINITY);
    for t in 0..256usize {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        // Strictly greater keeps the smallest maximizer; the relative slack
        // absorbs rounding between algebraically equal candidates.
        if between > best.1 * (1.0 + 1e-12) {
            best = (t as u8, between);
        }
    }
    let mask = fixed_threshold(gray, best.0)?;
    Ok(Threshold {
        threshold: best.0,
        mask,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive scan over every cutoff, computing the variance from scratch.
    fn brute_force(data: &[u8]) -> u8 {
        let mut best = (0u8, -1.0f64);
        for t in 0..=255u8 {
            let lo: Vec<f64> = data.iter().filter(|&&v| v <= t).map(|&v| v as f64).collect();
            let hi: Vec<f64> = data.iter().filter(|&&v| v > t).map(|&v| v as f64).collect();
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
            let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
            let v = lo.len() as f64 * hi.len() as f64 * (m0 - m1).powi(2);
            if v > best.1 * (1.0 + 1e-12) {
                best = (t, v);
            }
        }
        best.0
    }

    #[test]
    fn zeros_and_255s() {
        let mut data = vec![0u8; 10];
        data.extend(vec![255u8; 10]);
        let f = Frame::gray(20, 1, data.clone()).unwrap();
        let t = otsu_threshold(&f).unwrap();
        assert_eq!(t.threshold, brute_force(&data));
        assert_eq!(t.threshold, 0);
        assert!(!t.degenerate);
        assert_eq!(t.mask.data(), data.as_slice());
    }

    #[test]
    fn all_zero_is_degenerate() {
        let f = Frame::gray(4, 4, vec![0; 16]).unwrap();
        let t = otsu_threshold(&f).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.threshold, 0);
        assert!(t.mask.is_empty());
    }

    #[test]
    fn constant_image_threshold_is_value() {
        let f = Frame::gray(3, 3, vec![77; 9]).unwrap();
        let t = otsu_threshold(&f).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.threshold, 77);
    }

    #[test]
    fn bimodal_50_200() {
        let data: Vec<u8> = (0..64).map(|i| if i % 3 == 0 { 200 } else { 50 }).collect();
        let f = Frame::gray(8, 8, data.clone()).unwrap();
        let t = otsu_threshold(&f).unwrap();
        assert_eq!(t.threshold, brute_force(&data));
        for (i, &v) in data.iter().enumerate() {
            assert_eq!(t.mask.data()[i] == 255, v == 200);
        }
    }

    #[test]
    fn rejects_color() {
        let f = Frame::rgb(1, 1, vec![1, 2, 3]).unwrap();
        assert!(otsu_threshold(&f).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(data in prop::collection::vec(any::<u8>(), 2..64)) {
            let f = Frame::gray(data.len(), 1, data.clone()).unwrap();
            let t = otsu_threshold(&f).unwrap();
            if !t.degenerate {
                prop_assert_eq!(t.threshold, brute_force(&data));
            }
        }

        #[test]
        fn idempotent_on_binary_masks(bits in prop::collection::vec(any::<bool>(), 2..100)) {
            let data: Vec<u8> = bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
            let f = Frame::gray(data.len(), 1, data.clone()).unwrap();
            let t = otsu_threshold(&f).unwrap();
            if !t.degenerate {
                prop_assert_eq!(t.mask.data(), data.as_slice());
            }
        }
    }
}
