//! Hand detection and extraction: background differencing, HSV skin masking,
//! largest-component selection, palm localization by distance transform,
//! wrist cut, and crop-and-resize into a classifier input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{
    distance_transform, label_components, morph, to_grayscale, BBox, BinaryMask, Contour, Frame,
    MorphOp,
};

/// Static background reference for frame differencing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackgroundModel {
    reference: Frame,
    diff_threshold: u8,
}

impl BackgroundModel {
    /// Captures `reference` (converted to grayscale).
    pub fn new(reference: &Frame, diff_threshold: u8) -> Result<Self> {
        if diff_threshold == 0 {
            return Err(Error::InvalidArgument("diff_threshold must be >= 1".into()));
        }
        Ok(Self {
            reference: to_grayscale(reference),
            diff_threshold,
        })
    }

    pub fn reference(&self) -> &Frame {
        &self.reference
    }

    pub fn diff_threshold(&self) -> u8 {
        self.diff_threshold
    }
}

/// Foreground where `|gray(frame) - reference| > diff_threshold`.
pub fn motion_mask(model: &BackgroundModel, frame: &Frame) -> Result<BinaryMask> {
    let gray = to_grayscale(frame);
    if gray.dims() != model.reference.dims() {
        return Err(Error::DimensionMismatch(format!(
            "frame {}x{} vs background {}x{}",
            gray.width(),
            gray.height(),
            model.reference.width(),
            model.reference.height()
        )));
    }
    let t = model.diff_threshold;
    let data = gray
        .data()
        .iter()
        .zip(model.reference.data())
        .map(|(&a, &b)| if a.abs_diff(b) > t { 255 } else { 0 })
        .collect();
    BinaryMask::new(gray.width(), gray.height(), data)
}

/// HSV box for skin pixels. Hue is in degrees; `hue_lo > hue_hi` wraps
/// through 0. Saturation and value are in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkinRange {
    pub hue_lo: f64,
    pub hue_hi: f64,
    pub sat_lo: f64,
    pub sat_hi: f64,
    pub val_lo: f64,
    pub val_hi: f64,
}

impl Default for SkinRange {
    fn default() -> Self {
        Self {
            hue_lo: 340.0,
            hue_hi: 35.0,
            sat_lo: 0.15,
            sat_hi: 1.0,
            val_lo: 0.2,
            val_hi: 1.0,
        }
    }
}

impl SkinRange {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = (0.0..=360.0).contains(&self.hue_lo)
            && (0.0..=360.0).contains(&self.hue_hi)
            && in_unit(self.sat_lo)
            && in_unit(self.sat_hi)
            && in_unit(self.val_lo)
            && in_unit(self.val_hi)
            && self.sat_lo <= self.sat_hi
            && self.val_lo <= self.val_hi;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid skin range {self:?}")))
        }
    }

    pub fn contains(&self, (h, s, v): (f64, f64, f64)) -> bool {
        let hue_ok = if self.hue_lo <= self.hue_hi {
            (self.hue_lo..=self.hue_hi).contains(&h)
        } else {
            h >= self.hue_lo || h <= self.hue_hi
        };
        hue_ok && (self.sat_lo..=self.sat_hi).contains(&s) && (self.val_lo..=self.val_hi).contains(&v)
    }
}

/// Hexcone RGB -> HSV. Hue in `[0, 360)`, saturation and value in `[0, 1]`.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (rf, gf, bf) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == rf {
        60.0 * ((gf - bf) / delta).rem_euclid(6.0)
    } else if max == gf {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    (h % 360.0, s, max)
}

pub fn skin_mask(frame: &Frame, range: &SkinRange) -> Result<BinaryMask> {
    if frame.channels() != 3 {
        return Err(Error::InvalidArgument("skin_mask needs a 3-channel frame".into()));
    }
    let data = frame
        .data()
        .chunks_exact(3)
        .map(|p| {
            if range.contains(rgb_to_hsv(p[0], p[1], p[2])) {
                255
            } else {
                0
            }
        })
        .collect();
    BinaryMask::new(frame.width(), frame.height(), data)
}

/// The extracted hand: its component, palm geometry and the wrist-cut crop.
#[derive(Debug, Clone, PartialEq)]
pub struct HandRegion {
    pub contour: Contour,
    pub palm_center: (usize, usize),
    pub palm_radius: u32,
    /// Mean (x, y) of the component's pixels.
    pub centroid: (f64, f64),
    pub roi: BinaryMask,
    pub source_dims: (usize, usize),
}

/// Select the largest component (if it reaches `min_area`), locate the palm
/// at the distance-transform maximum and cut the arm off below it.
pub fn detect_hand(mask: &BinaryMask, min_area: usize, cut_factor: f64) -> Result<Option<HandRegion>> {
    let comps = label_components(mask);
    let Some(contour) = comps.contours.first() else {
        return Ok(None);
    };
    if contour.area < min_area.max(1) {
        return Ok(None);
    }
    let bbox = contour.bbox;
    let (w, h) = (bbox.width(), bbox.height());
    let mut component = BinaryMask::empty(w, h);
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for r in bbox.top..=bbox.bottom {
        for c in bbox.left..=bbox.right {
            if comps.labels[r * comps.width + c] == contour.label {
                component.set(r - bbox.top, c - bbox.left, true);
                sx += c as f64;
                sy += r as f64;
            }
        }
    }
    // Nothing of this component lies outside its bbox, so the crop's
    // distance map equals the full-frame one.
    let dist = distance_transform(&component);
    let (pr, pc) = dist.argmax();
    let palm_radius = dist.max();
    let roi = wrist_cut(&component, (pr, pc), palm_radius, cut_factor)?;
    Ok(Some(HandRegion {
        contour: contour.clone(),
        palm_center: (pr + bbox.top, pc + bbox.left),
        palm_radius,
        centroid: (sx / contour.area as f64, sy / contour.area as f64),
        roi,
        source_dims: mask.dims(),
    }))
}

/// Clear every foreground pixel more than `cut_factor * radius` rows below
/// the palm center, then crop to the remaining foreground.
pub fn wrist_cut(mask: &BinaryMask, center: (usize, usize), radius: u32, cut_factor: f64) -> Result<BinaryMask> {
    if cut_factor.is_nan() || cut_factor <= 1.0 {
        return Err(Error::InvalidArgument(format!("cut_factor must be > 1, got {cut_factor}")));
    }
    let line = center.0 as f64 + cut_factor * radius as f64;
    let mut cut = mask.clone();
    for r in 0..mask.height() {
        if r as f64 > line {
            for c in 0..mask.width() {
                cut.set(r, c, false);
            }
        }
    }
    let bbox = cut
        .foreground_bbox()
        .ok_or_else(|| Error::Degenerate("wrist cut removed every hand pixel".into()))?;
    Ok(cut.crop(bbox))
}

/// Letterbox the roi to a square, nearest-neighbor resize to `side`, then
/// open and close with a 3x3 element.
pub fn extract_input(region: &HandRegion, side: usize) -> Result<BinaryMask> {
    extract_mask(&region.roi, side)
}

/// [`extract_input`] on a bare roi mask.
pub fn extract_mask(roi: &BinaryMask, side: usize) -> Result<BinaryMask> {
    if side < 4 {
        return Err(Error::InvalidArgument(format!("input side must be >= 4, got {side}")));
    }
    let (w, h) = roi.dims();
    let square = w.max(h);
    let (pad_left, pad_top) = ((square - w) / 2, (square - h) / 2);
    let mut out = BinaryMask::empty(side, side);
    for r in 0..side {
        let sr = ((2 * r + 1) * square) / (2 * side);
        for c in 0..side {
            let sc = ((2 * c + 1) * square) / (2 * side);
            let on = sr >= pad_top
                && sc >= pad_left
                && sr - pad_top < h
                && sc - pad_left < w
                && roi.get(sr - pad_top, sc - pad_left);
            if on {
                out.set(r, c, true);
            }
        }
    }
    let opened = morph(&out, MorphOp::Open, 3)?;
    close_padded(&opened, 3)
}

/// Closing on a canvas padded with background, so shapes touching the edge
/// are not eaten by the erosion half.
fn close_padded(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    let pad = kernel / 2;
    let (w, h) = mask.dims();
    let mut big = BinaryMask::empty(w + 2 * pad, h + 2 * pad);
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) {
                big.set(r + pad, c + pad, true);
            }
        }
    }
    let closed = morph(&big, MorphOp::Close, kernel)?;
    Ok(closed.crop(BBox {
        top: pad,
        left: pad,
        bottom: pad + h - 1,
        right: pad + w - 1,
    }))
}

/// Tunables of the frame segmentation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationConfig {
    pub skin_range: SkinRange,
    pub diff_threshold: u8,
    pub cut_factor: f64,
    /// Minimum hand area as a fraction of the frame's pixel count.
    pub min_area_frac: f64,
    pub input_side: usize,
    /// Square kernel of the opening applied to the combined mask.
    pub open_kernel: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            skin_range: SkinRange::default(),
            diff_threshold: 30,
            cut_factor: 1.6,
            min_area_frac: 0.01,
            input_side: 64,
            open_kernel: 3,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        self.skin_range.validate()?;
        if self.diff_threshold == 0 {
            return Err(Error::Config("segmentation.diff_threshold must be >= 1".into()));
        }
        if !(self.cut_factor > 1.0) {
            return Err(Error::Config("segmentation.cut_factor must be > 1".into()));
        }
        if !(0.0..1.0).contains(&self.min_area_frac) {
            return Err(Error::Config("segmentation.min_area_frac must be in [0, 1)".into()));
        }
        if !(8..=256).contains(&self.input_side) || self.input_side % 8 != 0 {
            return Err(Error::Config(
                "segmentation.input_side must be a multiple of 8 in [8, 256] (64 and 128 are the usual settings)".into(),
            ));
        }
        if self.open_kernel == 0 || self.open_kernel % 2 == 0 {
            return Err(Error::Config("segmentation.open_kernel must be odd".into()));
        }
        Ok(())
    }

    pub fn min_area(&self, dims: (usize, usize)) -> usize {
        ((dims.0 * dims.1) as f64 * self.min_area_frac).ceil().max(1.0) as usize
    }
}

/// Per-frame pipeline for camera frames: motion AND skin, cleanup, hand.
#[derive(Debug, Clone)]
pub struct Segmenter {
    background: BackgroundModel,
    config: SegmentationConfig,
}

impl Segmenter {
    pub fn new(background: &Frame, config: SegmentationConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            background: BackgroundModel::new(background, config.diff_threshold)?,
            config,
        })
    }

    pub fn config(&self) -> &SegmentationConfig {
        &self.config
    }

    /// Combined, cleaned foreground mask for `frame`.
    pub fn foreground(&self, frame: &Frame) -> Result<BinaryMask> {
        let combined = if frame.channels() == 3 {
            self.motion_and_skin(frame)?
        } else {
            motion_mask(&self.background, frame)?
        };
        morph(&combined, MorphOp::Open, self.config.open_kernel)
    }

    /// `motion_mask AND skin_mask` in one pass; hue is only computed where
    /// there is motion.
    fn motion_and_skin(&self, frame: &Frame) -> Result<BinaryMask> {
        let reference = self.background.reference();
        if frame.dims() != reference.dims() {
            return Err(Error::DimensionMismatch(format!(
                "frame {}x{} vs background {}x{}",
                frame.width(),
                frame.height(),
                reference.width(),
                reference.height()
            )));
        }
        let t = self.background.diff_threshold();
        let range = &self.config.skin_range;
        let data = frame
            .data()
            .chunks_exact(3)
            .zip(reference.data())
            .map(|(p, &bg)| {
                let gray = (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8;
                if gray.abs_diff(bg) > t && range.contains(rgb_to_hsv(p[0], p[1], p[2])) {
                    255
                } else {
                    0
                }
            })
            .collect();
        BinaryMask::new(frame.width(), frame.height(), data)
    }

    pub fn process(&self, frame: &Frame) -> Result<Option<HandRegion>> {
        let fg = self.foreground(frame)?;
        detect_hand(&fg, self.config.min_area(fg.dims()), self.config.cut_factor)
    }
}

/// Entry for already-segmented dataset images: skip motion and skin stages.
pub fn segment_mask(mask: &BinaryMask, config: &SegmentationConfig) -> Result<Option<BinaryMask>> {
    match detect_hand(mask, config.min_area(mask.dims()), config.cut_factor)? {
        Some(region) => extract_input(&region, config.input_side).map(Some),
        None => Ok(None),
    }
}
