use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Manifest;
use crate::error::{Error, Result};
use crate::imaging::{pnm, BinaryMask};

/// Shape programs for synthetic hand masks. Coordinates are pixels on a
/// 64-pixel canvas centered at the origin, y pointing down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Disk,
    Square,
    Bar,
    Cross,
    /// Hub with five spokes, a spread hand.
    Star,
    /// Palm with two raised fingers.
    Fork,
}

impl Shape {
    pub const ALL: [Shape; 6] = [Shape::Disk, Shape::Square, Shape::Bar, Shape::Cross, Shape::Star, Shape::Fork];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Disk => "disk",
            Shape::Square => "square",
            Shape::Bar => "bar",
            Shape::Cross => "cross",
            Shape::Star => "star",
            Shape::Fork => "fork",
        }
    }

    /// Membership test in canvas coordinates.
    pub fn contains(self, x: f64, y: f64) -> bool {
        match self {
            Shape::Disk => x * x + y * y <= 13.0 * 13.0,
            Shape::Square => x.abs() <= 17.0 && y.abs() <= 17.0,
            Shape::Bar => x.abs() <= 26.0 && y.abs() <= 6.0,
            Shape::Cross => (x.abs() <= 22.0 && y.abs() <= 6.0) || (x.abs() <= 6.0 && y.abs() <= 22.0),
            Shape::Star => {
                if x * x + y * y <= 8.0 * 8.0 {
                    return true;
                }
                (0..5).any(|k| {
                    let a = (-90.0 + 72.0 * k as f64).to_radians();
                    let along = x * a.cos() + y * a.sin();
                    let across = -x * a.sin() + y * a.cos();
                    (0.0..=25.0).contains(&along) && across.abs() <= 3.5
                })
            }
            Shape::Fork => {
                let palm = x * x + (y - 9.0).powi(2) <= 12.0 * 12.0;
                let finger = |cx: f64| (x - cx).abs() <= 3.5 && (-24.0..=9.0).contains(&y);
                palm || finger(-6.5) || finger(6.5)
            }
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|sh| sh.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shape `{s}`")))
    }
}

/// Random pose perturbation applied per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Jitter {
    /// Maximum absolute rotation, degrees.
    pub rotation_deg: f64,
    pub scale: (f64, f64),
    /// Maximum absolute translation per axis, pixels at side 64.
    pub translation: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            rotation_deg: 15.0,
            scale: (0.85, 1.1),
            translation: 5.0,
        }
    }
}

impl Jitter {
    pub const NONE: Jitter = Jitter {
        rotation_deg: 0.0,
        scale: (1.0, 1.0),
        translation: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthClass {
    pub name: String,
    pub shape: Shape,
}

impl SynthClass {
    pub fn new(shape: Shape) -> Self {
        Self {
            name: shape.name().to_string(),
            shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    pub per_class: usize,
    /// Per-pixel flip probability.
    pub speckle: f64,
    pub jitter: Jitter,
    pub side: usize,
    pub seed: u64,
}

impl SynthSpec {
    /// The first `n_classes` shapes with default noise.
    pub fn new(n_classes: usize, per_class: usize, seed: u64) -> Result<Self> {
        if !(1..=Shape::ALL.len()).contains(&n_classes) {
            return Err(Error::InvalidArgument(format!(
                "class count must be in 1..={}, got {n_classes}",
                Shape::ALL.len()
            )));
        }
        Ok(Self {
            classes: Shape::ALL[..n_classes].iter().map(|&s| SynthClass::new(s)).collect(),
            per_class,
            speckle: 0.01,
            jitter: Jitter::default(),
            side: 64,
            seed,
        })
    }

    /// Rename classes in order, e.g. to gesture labels.
    pub fn with_names(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.classes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} classes",
                names.len(),
                self.classes.len()
            )));
        }
        for (c, n) in self.classes.iter_mut().zip(names) {
            c.name = n.to_string();
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.per_class == 0 {
            return Err(Error::InvalidArgument("synthesis needs at least one class and one sample".into()));
        }
        if !(0.0..1.0).contains(&self.speckle) {
            return Err(Error::InvalidArgument(format!("speckle must be in [0, 1), got {}", self.speckle)));
        }
        let (lo, hi) = self.jitter.scale;
        if !(lo > 0.0 && lo <= hi) || !(self.jitter.rotation_deg >= 0.0) || !(self.jitter.translation >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid jitter {:?}", self.jitter)));
        }
        if self.side < 16 {
            return Err(Error::InvalidArgument(format!("side must be >= 16, got {}", self.side)));
        }
        let mut names: Vec<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.classes.len() || names.iter().any(|n| n.is_empty() || n.contains(['/', ','])) {
            return Err(Error::InvalidArgument("class names must be unique, non-empty, without `/` or `,`".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.classes.len() * self.per_class
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Relative file path of sample `i` (class-major order).
    pub fn relative_path(&self, i: usize) -> String {
        let class = &self.classes[i / self.per_class].name;
        format!("{class}/{:04}.pgm", i % self.per_class)
    }

    /// Rasterize sample `i` with its own RNG stream.
    pub fn sample(&self, i: usize) -> BinaryMask {
        let shape = self.classes[i / self.per_class].shape;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64 + 1);
        let j = &self.jitter;
        let theta = uniform(&mut rng, -j.rotation_deg, j.rotation_deg).to_radians();
        let scale = uniform(&mut rng, j.scale.0, j.scale.1);
        let tx = uniform(&mut rng, -j.translation, j.translation);
        let ty = uniform(&mut rng, -j.translation, j.translation);
        let (sin, cos) = theta.sin_cos();
        let unit = self.side as f64 / 64.0;
        let c = self.side as f64 / 2.0;
        let mut mask = BinaryMask::from_fn(self.side, self.side, |r, col| {
            // Inverse pose: canvas -> shape frame.
            let x = (col as f64 + 0.5 - c) / unit - tx;
            let y = (r as f64 + 0.5 - c) / unit - ty;
            let (u, v) = (cos * x + sin * y, -sin * x + cos * y);
            shape.contains(u / scale, v / scale)
        });
        if self.speckle > 0.0 {
            for r in 0..self.side {
                for col in 0..self.side {
                    if rng.gen_bool(self.speckle) {
                        let on = mask.get(r, col);
                        mask.set(r, col, !on);
                    }
                }
            }
        }
        mask
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Noise-free shape on a `side` canvas.
pub fn prototype(shape: Shape, side: usize) -> BinaryMask {
    let spec = SynthSpec {
        classes: vec![SynthClass::new(shape)],
        per_class: 1,
        speckle: 0.0,
        jitter: Jitter::NONE,
        side,
        seed: 0,
    };
    spec.sample(0)
}

/// All samples in memory with their class indices, class-major.
pub fn synth_masks(spec: &SynthSpec) -> Result<(Vec<BinaryMask>, Vec<usize>)> {
    spec.validate()?;
    let masks = (0..spec.len()).map(|i| spec.sample(i)).collect();
    let labels = (0..spec.len()).map(|i| i / spec.per_class).collect();
    Ok((masks, labels))
}

/// Write `<out>/<class>/<id>.pgm` and `<out>/manifest.csv`. Files are
/// rendered by `threads` workers; each sample's RNG depends only on
/// `(seed, index)`, so output does not depend on the worker count.
pub fn synth_generate(spec: &SynthSpec, out: impl AsRef<Path>, threads: usize) -> Result<Manifest> {
    spec.validate()?;
    let out = out.as_ref();
    for c in &spec.classes {
        let dir = out.join(&c.name);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let n = spec.len();
    let threads = threads.clamp(1, n);
    let chunk = n.div_ceil(threads);
    std::thread::scope(|s| {
        let workers: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || -> Result<()> {
                    for i in t * chunk..((t + 1) * chunk).min(n) {
                        pnm::write_mask(out.join(spec.relative_path(i)), &spec.sample(i))?;
                    }
                    Ok(())
                })
            })
            .collect();
        workers
            .into_iter()
            .try_for_each(|w| w.join().expect("synth worker panicked"))
    })?;
    let entries = (0..n)
        .map(|i| (spec.relative_path(i).into(), spec.classes[i / spec.per_class].name.clone()))
        .collect();
    let manifest = Manifest::new(out, entries)?;
    manifest.save()?;
    Ok(manifest)
}
