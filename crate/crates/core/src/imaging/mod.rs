//! Raster primitives shared by the segmentation pipeline.
//!
//! Everything here is a pure function over immutable images. Conventions:
//! masks hold only 0 or 255, pixels outside the image count as background,
//! components are 8-connected and the distance transform is 4-connected
//! (city-block).

mod components;
mod distance;
mod gray;
mod morphology;
pub mod pnm;
mod threshold;

pub use components::{connected_components, label_components, BBox, Components, Contour};
pub use distance::{distance_transform, DistanceMap};
pub use gray::to_grayscale;
pub use morphology::{morph, MorphOp};
pub use threshold::{fixed_threshold, otsu_threshold, Threshold};

use crate::error::{Error, Result};

/// A grayscale (1 channel) or RGB (3 channel) raster, row-major, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame must be at least 1x1, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "frame channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "frame data has {} bytes, expected {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pixel at (row, col) as a channel slice.
    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Binary foreground/background raster. Every byte is 0 or 255.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub const FG: u8 = 255;
    pub const BG: u8 = 0;

    /// Build a mask from raw bytes, rejecting anything other than 0/255.
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "mask must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask data has {} bytes, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(pos) = data.iter().position(|&v| v != 0 && v != 255) {
            return Err(Error::InvalidArgument(format!(
                "mask byte {} has value {}, expected 0 or 255",
                pos, data[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask must be at least 1x1");
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask must be at least 1x1");
        Self {
            width,
            height,
            data: vec![255; width * height],
        }
    }

    /// Build from a boolean predicate over (row, col).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for r in 0..height {
            for c in 0..width {
                if f(r, c) {
                    m.data[r * width + c] = 255;
                }
            }
        }
        m
    }

    /// Build from 0/1 (or 0/nonzero) rows, e.g. a literal matrix.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != width) {
            return Err(Error::DimensionMismatch("ragged mask rows".into()));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().map(|&v| if v != 0 { 255 } else { 0 }))
            .collect();
        Self::new(width, height, data)
    }

    pub(crate) fn from_bools(width: usize, height: usize, bits: &[bool]) -> Self {
        debug_assert_eq!(bits.len(), width * height);
        Self {
            width,
            height,
            data: bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.data[row * self.width + col] = if on { 255 } else { 0 };
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 255 - v).collect(),
        }
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a | b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u8, u8) -> u8) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Intersection-over-union of the foreground sets. Two empty masks give 1.
    pub fn iou(&self, other: &Self) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch("iou of differently sized masks".into()));
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.data.iter().zip(&other.data) {
            let (a, b) = (a != 0, b != 0);
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        })
    }

    /// Tight bounding box of the foreground, `None` for an empty mask.
    pub fn foreground_bbox(&self) -> Option<BBox> {
        let mut bbox: Option<BBox> = None;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    match bbox.as_mut() {
                        Some(b) => b.include(r, c),
                        None => bbox = Some(BBox::point(r, c)),
                    }
                }
            }
        }
        bbox
    }

    /// Copy out the inclusive rectangle `bbox`.
    pub fn crop(&self, bbox: BBox) -> Self {
        let w = bbox.right - bbox.left + 1;
        let h = bbox.bottom - bbox.top + 1;
        let mut data = Vec::with_capacity(w * h);
        for r in bbox.top..=bbox.bottom {
            let start = r * self.width + bbox.left;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    /// View the mask as a single-channel frame.
    pub fn to_frame(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.clone(),
        }
    }
}
