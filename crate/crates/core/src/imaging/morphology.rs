use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    Erode,
    Dilate,
    /// Erode, then dilate.
    Open,
    /// Dilate, then erode.
    Close,
}

impl FromStr for MorphOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erode" => Ok(Self::Erode),
            "dilate" => Ok(Self::Dilate),
            "open" => Ok(Self::Open),
            "close" => Ok(Self::Close),
            other => Err(Error::InvalidArgument(format!("unknown morph op `{other}`"))),
        }
    }
}

/// Binary morphology with a `kernel x kernel` square structuring element.
/// Pixels outside the image are background, so erosion eats the border.
pub fn morph(mask: &BinaryMask, op: MorphOp, kernel: usize) -> Result<BinaryMask> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "morph kernel must be odd and >= 1, got {kernel}"
        )));
    }
    let (w, h) = mask.dims();
    let bits: Vec<bool> = mask.data().iter().map(|&v| v != 0).collect();
    let r = kernel / 2;
    let out = match op {
        MorphOp::Erode => erode(&bits, w, h, r),
        MorphOp::Dilate => dilate(&bits, w, h, r),
        MorphOp::Open => dilate(&erode(&bits, w, h, r), w, h, r),
        MorphOp::Close => erode(&dilate(&bits, w, h, r), w, h, r),
    };
    Ok(BinaryMask::from_bools(w, h, &out))
}

fn erode(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    // Square min filter is separable; a window that pokes outside the image
    // can never be all foreground.
    let full = 2 * r + 1;
    let rows = window_count(bits, w, h, r, Axis::Row);
    let rows: Vec<bool> = rows.iter().map(|&c| c == full).collect();
    let cols = window_count(&rows, w, h, r, Axis::Col);
    cols.iter().map(|&c| c == full).collect()
}

fn dilate(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let rows = window_count(bits, w, h, r, Axis::Row);
    let rows: Vec<bool> = rows.iter().map(|&c| c > 0).collect();
    let cols = window_count(&rows, w, h, r, Axis::Col);
    cols.iter().map(|&c| c > 0).collect()
}

#[derive(Clone, Copy)]
enum Axis {
    Row,
    Col,
}

/// Count of set pixels in the centered 1-D window of radius `r` along `axis`,
/// with out-of-bounds positions counted as unset.
fn window_count(bits: &[bool], w: usize, h: usize, r: usize, axis: Axis) -> Vec<usize> {
    let (lines, len, stride_line, stride_pos) = match axis {
        Axis::Row => (h, w, w, 1),
        Axis::Col => (w, h, 1, w),
    };
    let mut out = vec![0usize; bits.len()];
    for line in 0..lines {
        let base = line * stride_line;
        let at = |i: usize| bits[base + i * stride_pos] as usize;
        let mut count: usize = (0..=r.min(len - 1)).map(at).sum();
        for i in 0..len {
            out[base + i * stride_pos] = count;
            if i + r + 1 < len {
                count += at(i + r + 1);
            }
            if i >= r {
                count -= at(i - r);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct per-pixel definition over the full square neighborhood.
    fn oracle(mask: &BinaryMask, op: MorphOp, k: usize) -> BinaryMask {
        let r = (k / 2) as isize;
        let (w, h) = mask.dims();
        let inside = |m: &BinaryMask, rr: isize, cc: isize| {
            rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w && m.get(rr as usize, cc as usize)
        };
        let ero = |m: &BinaryMask| {
            BinaryMask::from_fn(w, h, |y, x| {
                (-r..=r).all(|dy| (-r..=r).all(|dx| inside(m, y as isize + dy, x as isize + dx)))
            })
        };
        let dil = |m: &BinaryMask| {
            BinaryMask::from_fn(w, h, |y, x| {
                (-r..=r).any(|dy| (-r..=r).any(|dx| inside(m, y as isize + dy, x as isize + dx)))
            })
        };
        match op {
            MorphOp::Erode => ero(mask),
            MorphOp::Dilate => dil(mask),
            MorphOp::Open => dil(&ero(mask)),
            MorphOp::Close => ero(&dil(mask)),
        }
    }

    fn center_block() -> BinaryMask {
        BinaryMask::from_fn(5, 5, |r, c| (1..4).contains(&r) && (1..4).contains(&c))
    }

    #[test]
    fn erode_center_block_to_point() {
        let out = morph(&center_block(), MorphOp::Erode, 3).unwrap();
        assert_eq!(out.count(), 1);
        assert!(out.get(2, 2));
    }

    #[test]
    fn dilate_point_to_block() {
        let m = BinaryMask::from_fn(5, 5, |r, c| r == 2 && c == 2);
        assert_eq!(morph(&m, MorphOp::Dilate, 3).unwrap(), center_block());
    }

    #[test]
    fn open_close_removes_speckle() {
        // A solid block plus isolated single pixels.
        let m = BinaryMask::from_fn(20, 20, |r, c| {
            ((5..15).contains(&r) && (5..15).contains(&c)) || (r, c) == (1, 1) || (r, c) == (18, 2) || (r, c) == (2, 17)
        });
        let cleaned = morph(&morph(&m, MorphOp::Open, 3).unwrap(), MorphOp::Close, 3).unwrap();
        let expected = oracle(&oracle(&m, MorphOp::Open, 3), MorphOp::Close, 3);
        assert_eq!(cleaned, expected);
        assert!(!cleaned.get(1, 1) && !cleaned.get(18, 2) && !cleaned.get(2, 17));
        assert_eq!(cleaned.count(), 100);
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(morph(&center_block(), MorphOp::Erode, 2).is_err());
        assert!(morph(&center_block(), MorphOp::Erode, 0).is_err());
    }

    #[test]
    fn kernel_one_is_identity() {
        let m = center_block();
        for op in [MorphOp::Erode, MorphOp::Dilate, MorphOp::Open, MorphOp::Close] {
            assert_eq!(morph(&m, op, 1).unwrap(), m);
        }
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..14, 1usize..14).prop_flat_map(|(w, h)| {
            prop::collection::vec(any::<bool>(), w * h)
                .prop_map(move |bits| BinaryMask::from_bools(w, h, &bits))
        })
    }

    proptest! {
        #[test]
        fn matches_oracle(m in arb_mask(), k in prop::sample::select(vec![1usize, 3, 5, 7])) {
            for op in [MorphOp::Erode, MorphOp::Dilate, MorphOp::Open, MorphOp::Close] {
                prop_assert_eq!(morph(&m, op, k).unwrap(), oracle(&m, op, k));
            }
        }

        #[test]
        fn erode_subset_dilate_superset(m in arb_mask(), k in prop::sample::select(vec![3usize, 5])) {
            let e = morph(&m, MorphOp::Erode, k).unwrap();
            let d = morph(&m, MorphOp::Dilate, k).unwrap();
            for i in 0..m.data().len() {
                prop_assert!(e.data()[i] <= m.data()[i]);
                prop_assert!(m.data()[i] <= d.data()[i]);
            }
        }

        #[test]
        fn dilate_erode_duality_on_interior(m in arb_mask(), k in prop::sample::select(vec![3usize, 5])) {
            let r = k / 2;
            let d = morph(&m, MorphOp::Dilate, k).unwrap();
            let dual = morph(&m.complement(), MorphOp::Erode, k).unwrap().complement();
            let (w, h) = m.dims();
            for y in r..h.saturating_sub(r) {
                for x in r..w.saturating_sub(r) {
                    prop_assert_eq!(d.get(y, x), dual.get(y, x));
                }
            }
        }
    }
}
