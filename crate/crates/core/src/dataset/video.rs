use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Shape;
use crate::error::{Error, Result};
use crate::imaging::Frame;

/// Color of synthetic skin (hue 30 degrees, inside the default skin range).
pub const SKIN_RGB: [u8; 3] = [224, 172, 105];

/// Synthetic camera footage: a static textured background and a skin-colored
/// hand (gesture shape plus forearm) moving along a Lissajous path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Gesture shown in each segment, cycled.
    pub gestures: Vec<Shape>,
    pub segment_frames: usize,
    /// Hand size relative to the 64-pixel shape canvas.
    pub hand_scale: f64,
    /// Amplitude of per-frame sensor noise.
    pub noise: u8,
    pub seed: u64,
}

impl Default for VideoSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            frames: 1000,
            gestures: vec![Shape::Disk, Shape::Square, Shape::Bar, Shape::Cross],
            segment_frames: 50,
            hand_scale: 2.5,
            noise: 4,
            seed: 0,
        }
    }
}

impl VideoSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidArgument(format!(
                "video must be at least 64x64, got {}x{}",
                self.width, self.height
            )));
        }
        if self.gestures.is_empty() || self.segment_frames == 0 {
            return Err(Error::InvalidArgument("video needs gestures and segment_frames >= 1".into()));
        }
        if !(self.hand_scale > 0.0) {
            return Err(Error::InvalidArgument("hand_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Frame-by-frame renderer. Frames are produced on demand so long sequences
/// need no storage.
#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    spec: VideoSpec,
    background: Frame,
}

/// Ground truth for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTruth {
    pub gesture: Shape,
    /// Mean (x, y) of the drawn hand and arm pixels.
    pub centroid: (f64, f64),
    /// Palm anchor the shape is drawn around.
    pub anchor: (f64, f64),
}

impl SyntheticVideo {
    pub fn new(spec: VideoSpec) -> Result<Self> {
        spec.validate()?;
        let (w, h) = (spec.width, spec.height);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut grain = vec![0u8; w * h];
        rng.fill_bytes(&mut grain);
        let mut data = Vec::with_capacity(w * h * 3);
        for r in 0..h {
            for c in 0..w {
                // Dark blue-green texture, far from skin in hue and brightness.
                let wave = ((c as f64 / 23.0).sin() + (r as f64 / 17.0).cos()) * 10.0;
                let g = grain[r * w + c] as f64 / 255.0 * 12.0;
                data.push((25.0 + g) as u8);
                data.push((55.0 + wave + g) as u8);
                data.push((85.0 + wave + g) as u8);
            }
        }
        Ok(Self {
            background: Frame::rgb(w, h, data)?,
            spec,
        })
    }

    pub fn spec(&self) -> &VideoSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.frames
    }

    pub fn is_empty(&self) -> bool {
        self.spec.frames == 0
    }

    pub fn background(&self) -> &Frame {
        &self.background
    }

    pub fn gesture_index(&self, i: usize) -> usize {
        (i / self.spec.segment_frames) % self.spec.gestures.len()
    }

    fn anchor(&self, i: usize) -> (f64, f64) {
        let (w, h) = (self.spec.width as f64, self.spec.height as f64);
        let t = i as f64;
        let x = w / 2.0 + 0.3 * w * (std::f64::consts::TAU * t / 240.0).sin();
        let y = 0.45 * h + 0.12 * h * (std::f64::consts::TAU * t / 170.0).sin();
        (x, y)
    }

    fn covers(&self, shape: Shape, anchor: (f64, f64), x: f64, y: f64) -> bool {
        let s = self.spec.hand_scale;
        let (u, v) = ((x - anchor.0) / s, (y - anchor.1) / s);
        // Forearm: a strip from the palm down past the bottom edge.
        shape.contains(u, v) || (u.abs() <= 4.5 && v >= 0.0)
    }

    /// Render frame `i` and its ground truth.
    pub fn frame(&self, i: usize) -> (Frame, FrameTruth) {
        let (w, h) = (self.spec.width, self.spec.height);
        let gesture = self.spec.gestures[self.gesture_index(i)];
        let anchor = self.anchor(i);
        let mut data = self.background.data().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(i as u64 + 1);
        let mut noise = vec![0u8; w * h * 3];
        if self.spec.noise > 0 {
            rng.fill_bytes(&mut noise);
        }
        let amp = self.spec.noise as i16;
        let jitter = |b: u8| (b % (2 * amp as u8 + 1)) as i16 - amp;
        if amp > 0 {
            for (px, &n) in data.iter_mut().zip(&noise) {
                *px = (*px as i16 + jitter(n)).clamp(0, 255) as u8;
            }
        }
        let reach = 32.0 * self.spec.hand_scale;
        let c0 = (anchor.0 - reach).floor().max(0.0) as usize;
        let c1 = ((anchor.0 + reach).ceil() as usize).min(w - 1);
        let r0 = (anchor.1 - reach).floor().max(0.0) as usize;
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for r in r0..h {
            for c in c0..=c1 {
                if self.covers(gesture, anchor, c as f64 + 0.5, r as f64 + 0.5) {
                    let k = (r * w + c) * 3;
                    let d = if amp > 0 { jitter(noise[k]) } else { 0 };
                    for (ch, &v) in SKIN_RGB.iter().enumerate() {
                        data[k + ch] = (v as i16 + d).clamp(0, 255) as u8;
                    }
                    sx += c as f64;
                    sy += r as f64;
                    n += 1;
                }
            }
        }
        let centroid = if n > 0 { (sx / n as f64, sy / n as f64) } else { anchor };
        let frame = Frame::rgb(w, h, data).expect("dimensions fixed by VideoSpec");
        (
            frame,
            FrameTruth {
                gesture,
                centroid,
                anchor,
            },
        )
    }
}
