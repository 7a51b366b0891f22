//! Kalman filtering of the hand centroid and its mapping to a screen cursor.
//!
//! The state-space model is
//!
//! ```text
//! x[t+1] = A x[t] + B u[t] + process noise   (cov Q)
//! z[t]   = H x[t] + measurement noise         (cov R)
//! ```
//!
//! with the default instance a 2-D constant-velocity model,
//! `x = [px, py, vx, vy]`, `z = [px, py]`, `u = 0`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UpdateForm {
    /// `P = (I - K H) P`
    Standard,
    /// `P = (I - K H) P (I - K H)^T + K R K^T`, which stays PSD under rounding.
    #[default]
    Joseph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub form: UpdateForm,
}

impl KalmanModel {
    /// Constant-velocity model with white-acceleration process noise
    /// `Q = q G G^T`, `G = [dt^2/2, dt^2/2, dt, dt]` per axis, and isotropic
    /// measurement noise `R = r I`.
    pub fn constant_velocity(dt: f64, q: f64, r: f64) -> Self {
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, dt, 0.0,
            0.0, 1.0, 0.0, dt,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        #[rustfmt::skip]
        let g = DMatrix::from_row_slice(4, 2, &[
            0.5 * dt * dt, 0.0,
            0.0, 0.5 * dt * dt,
            dt, 0.0,
            0.0, dt,
        ]);
        let q = &g * g.transpose() * q;
        let h = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        Self {
            a,
            b: DMatrix::zeros(4, 1),
            h,
            q,
            r: DMatrix::identity(2, 2) * r,
            form: UpdateForm::Joseph,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.measurement_dim();
        let dims_ok = self.a.shape() == (n, n)
            && self.b.nrows() == n
            && self.h.ncols() == n
            && self.q.shape() == (n, n)
            && self.r.shape() == (m, m);
        if !dims_ok {
            return Err(Error::DimensionMismatch("inconsistent Kalman model matrices".into()));
        }
        for (name, mat) in [("Q", &self.q), ("R", &self.r)] {
            if (mat - mat.transpose()).amax() > 1e-12 {
                return Err(Error::InvalidArgument(format!("{name} is not symmetric")));
            }
            let min_eig = mat.clone().symmetric_eigen().eigenvalues.min();
            if min_eig < -1e-12 {
                return Err(Error::InvalidArgument(format!("{name} is not positive semidefinite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
    /// Control input; zero in every shipped model.
    pub u: DVector<f64>,
    /// Frame index.
    pub t: usize,
}

impl KalmanState {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>, control_dim: usize, t: usize) -> Self {
        Self {
            x,
            p,
            u: DVector::zeros(control_dim),
            t,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x[0], self.x[1])
    }
}

fn check_dims(state: &KalmanState, model: &KalmanModel) -> Result<()> {
    let n = model.state_dim();
    if state.x.len() != n || state.p.shape() != (n, n) || state.u.len() != model.b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries / {:?} covariance, model expects {n}",
            state.x.len(),
            state.p.shape()
        )));
    }
    Ok(())
}

/// Time update: `x = A x + B u`, `P = A P A^T + Q`.
pub fn kf_predict(state: &KalmanState, model: &KalmanModel) -> Result<KalmanState> {
    check_dims(state, model)?;
    let x = &model.a * &state.x + &model.b * &state.u;
    let p = &model.a * &state.p * model.a.transpose() + &model.q;
    Ok(KalmanState {
        x,
        p: symmetrize(p),
        u: state.u.clone(),
        t: state.t + 1,
    })
}

/// Measurement update against `z`. Returns the posterior and the innovation
/// `z - H x`.
pub fn kf_update(
    state: &KalmanState,
    model: &KalmanModel,
    z: &DVector<f64>,
) -> Result<(KalmanState, DVector<f64>)> {
    check_dims(state, model)?;
    if z.len() != model.measurement_dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurement has {} entries, H has {} rows",
            z.len(),
            model.measurement_dim()
        )));
    }
    let h = &model.h;
    let innovation = z - h * &state.x;
    let s = h * &state.p * h.transpose() + &model.r;
    let s_inv = s
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("innovation covariance S is not invertible".into()))?;
    let k = &state.p * h.transpose() * s_inv;
    let x = &state.x + &k * &innovation;
    let i_kh = DMatrix::identity(model.state_dim(), model.state_dim()) - &k * h;
    let p = match model.form {
        UpdateForm::Standard => &i_kh * &state.p,
        UpdateForm::Joseph => &i_kh * &state.p * i_kh.transpose() + &k * &model.r * k.transpose(),
    };
    if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("Kalman update produced non-finite values".into()));
    }
    Ok((
        KalmanState {
            x,
            p: symmetrize(p),
            u: state.u.clone(),
            t: state.t,
        },
        innovation,
    ))
}

fn symmetrize(p: DMatrix<f64>) -> DMatrix<f64> {
    (&p + p.transpose()) * 0.5
}

/// Tracker tunables; `q` and `r` are the constant-velocity noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingConfig {
    pub dt: f64,
    /// White-acceleration intensity, px^2/frame^4.
    pub q: f64,
    /// Measurement variance per axis, px^2.
    pub r: f64,
    /// Initial velocity variance, (px/frame)^2.
    pub init_velocity_var: f64,
    /// Frames of predict-only coasting before the track is dropped.
    pub max_coast: usize,
    pub update_form: UpdateForm,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            q: 0.05,
            r: 4.0,
            init_velocity_var: 100.0,
            max_coast: 10,
            update_form: UpdateForm::Joseph,
        }
    }
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0 && self.q >= 0.0 && self.r > 0.0 && self.init_velocity_var > 0.0;
        if ok && self.dt.is_finite() && self.q.is_finite() && self.r.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid tracking config {self:?}")))
        }
    }

    pub fn model(&self) -> KalmanModel {
        let mut m = KalmanModel::constant_velocity(self.dt, self.q, self.r);
        m.form = self.update_form;
        m
    }
}

/// One tracker output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub state: KalmanState,
    pub innovation: Option<(f64, f64)>,
    /// True when no measurement was available for this frame.
    pub coasting: bool,
}

/// Stateful single-target tracker: predict every frame, update when a
/// centroid is present, drop the track after `max_coast` missing frames.
#[derive(Debug, Clone)]
pub struct Tracker {
    model: KalmanModel,
    config: TrackingConfig,
    state: Option<KalmanState>,
    missing: usize,
    frame: usize,
}

impl Tracker {
    pub fn new(config: TrackingConfig) -> Result<Self> {
        config.validate()?;
        let model = config.model();
        model.validate()?;
        Ok(Self {
            model,
            config,
            state: None,
            missing: 0,
            frame: 0,
        })
    }

    pub fn with_model(model: KalmanModel, config: TrackingConfig) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            model,
            config,
            state: None,
            missing: 0,
            frame: 0,
        })
    }

    pub fn model(&self) -> &KalmanModel {
        &self.model
    }

    pub fn state(&self) -> Option<&KalmanState> {
        self.state.as_ref()
    }

    /// Advance one frame. `None` while no track exists.
    pub fn step(&mut self, centroid: Option<(f64, f64)>) -> Result<Option<TrackOutput>> {
        let frame = self.frame;
        self.frame += 1;
        let out = match (self.state.take(), centroid) {
            (None, None) => None,
            (None, Some((x, y))) => {
                let n = self.model.state_dim();
                let mut x0 = DVector::zeros(n);
                x0[0] = x;
                x0[1] = y;
                let mut p0 = DMatrix::zeros(n, n);
                p0[(0, 0)] = self.config.r;
                p0[(1, 1)] = self.config.r;
                for i in 2..n {
                    p0[(i, i)] = self.config.init_velocity_var;
                }
                let state = KalmanState::new(x0, p0, self.model.b.ncols(), frame);
                self.missing = 0;
                Some(TrackOutput {
                    state,
                    innovation: Some((0.0, 0.0)),
                    coasting: false,
                })
            }
            (Some(prev), None) => {
                self.missing += 1;
                if self.missing > self.config.max_coast {
                    None
                } else {
                    Some(TrackOutput {
                        state: kf_predict(&prev, &self.model)?,
                        innovation: None,
                        coasting: true,
                    })
                }
            }
            (Some(prev), Some((x, y))) => {
                self.missing = 0;
                let predicted = kf_predict(&prev, &self.model)?;
                let (state, inn) = kf_update(&predicted, &self.model, &DVector::from_vec(vec![x, y]))?;
                Some(TrackOutput {
                    state,
                    innovation: Some((inn[0], inn[1])),
                    coasting: false,
                })
            }
        };
        if let Some(o) = &out {
            self.state = Some(o.state.clone());
        }
        Ok(out)
    }
}

/// Filter a centroid sequence; output starts at the first present centroid
/// and skips frames where the track had been dropped.
pub fn track_sequence(centroids: &[Option<(f64, f64)>], config: &TrackingConfig) -> Result<Vec<TrackOutput>> {
    if centroids.iter().all(Option::is_none) {
        return Err(Error::InvalidArgument("every centroid is missing".into()));
    }
    let mut tracker = Tracker::new(config.clone())?;
    let mut out = Vec::with_capacity(centroids.len());
    for &c in centroids {
        if let Some(o) = tracker.step(c)? {
            out.push(o);
        }
    }
    Ok(out)
}

/// A cursor position derived from a filtered hand position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CursorSample {
    /// Camera-space measurement, if one was available.
    pub raw: Option<(f64, f64)>,
    pub smoothed: (f64, f64),
    pub frame_index: usize,
    pub t_ms: f64,
}

/// Linear camera -> screen mapping with a horizontal mirror, clamped to the
/// screen when `clamp` is set.
pub fn map_to_screen(
    position: (f64, f64),
    cam_dims: (usize, usize),
    screen_dims: (usize, usize),
    clamp: bool,
) -> (f64, f64) {
    let span = |d: usize| (d.max(2) - 1) as f64;
    let (cw, ch) = (span(cam_dims.0), span(cam_dims.1));
    let (sw, sh) = (span(screen_dims.0), span(screen_dims.1));
    let mut x = (1.0 - position.0 / cw) * sw;
    let mut y = position.1 / ch * sh;
    if clamp {
        x = x.clamp(0.0, sw);
        y = y.clamp(0.0, sh);
    }
    (x, y)
}

pub fn cursor_sample(
    output: &TrackOutput,
    raw: Option<(f64, f64)>,
    cam_dims: (usize, usize),
    screen_dims: (usize, usize),
    t_ms: f64,
) -> CursorSample {
    CursorSample {
        raw,
        smoothed: map_to_screen(output.state.position(), cam_dims, screen_dims, true),
        frame_index: output.state.t,
        t_ms,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// RMS deviation of the per-frame displacement from its mean.
    pub rms_jitter: f64,
    pub max_jump: f64,
    pub path_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub raw: PathStats,
    pub smoothed: PathStats,
}

pub fn path_stats(points: &[(f64, f64)]) -> Result<PathStats> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("path statistics need at least 2 points".into()));
    }
    let steps: Vec<(f64, f64)> = points.windows(2).map(|w| (w[1].0 - w[0].0, w[1].1 - w[0].1)).collect();
    let n = steps.len() as f64;
    let mean = (
        steps.iter().map(|s| s.0).sum::<f64>() / n,
        steps.iter().map(|s| s.1).sum::<f64>() / n,
    );
    let rms_jitter = (steps
        .iter()
        .map(|s| (s.0 - mean.0).powi(2) + (s.1 - mean.1).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let lengths = steps.iter().map(|s| s.0.hypot(s.1));
    let (max_jump, path_length) = lengths.fold((0.0f64, 0.0f64), |(m, t), l| (m.max(l), t + l));
    Ok(PathStats {
        rms_jitter,
        max_jump,
        path_length,
    })
}

pub fn smoothness_report(raw: &[(f64, f64)], smoothed: &[(f64, f64)]) -> Result<SmoothnessReport> {
    if raw.len() != smoothed.len() {
        return Err(Error::DimensionMismatch(format!(
            "raw has {} points, smoothed has {}",
            raw.len(),
            smoothed.len()
        )));
    }
    Ok(SmoothnessReport {
        raw: path_stats(raw)?,
        smoothed: path_stats(smoothed)?,
    })
}

/// A seeded constant-velocity ground-truth track with Gaussian measurement
/// noise, used by tests, examples and benchmarks.
#[derive(Debug, Clone)]
pub struct SimulatedTrack {
    pub truth: Vec<(f64, f64)>,
    pub measurements: Vec<(f64, f64)>,
}

pub fn simulate_constant_velocity(seed: u64, frames: usize, sigma: f64) -> SimulatedTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Uniform::new(100.0, 500.0);
    let vel = Uniform::new(-5.0, 5.0);
    let (x0, y0) = (start.sample(&mut rng), start.sample(&mut rng));
    let (vx, vy) = (vel.sample(&mut rng), vel.sample(&mut rng));
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and >= 0");
    let truth: Vec<(f64, f64)> = (0..frames)
        .map(|t| (x0 + vx * t as f64, y0 + vy * t as f64))
        .collect();
    let measurements = truth
        .iter()
        .map(|&(x, y)| (x + noise.sample(&mut rng), y + noise.sample(&mut rng)))
        .collect();
    SimulatedTrack { truth, measurements }
}

pub fn rms_error(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let n = a.len().min(b.len()).max(1) as f64;
    (a.iter()
        .zip(b)
        .map(|(p, q)| (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn state(x: &[f64], p: DMatrix<f64>) -> KalmanState {
        KalmanState::new(DVector::from_row_slice(x), p, 1, 0)
    }

    #[test]
    fn identity_model_predict_is_noop() {
        let mut m = KalmanModel::constant_velocity(1.0, 0.0, 1.0);
        m.a = DMatrix::identity(4, 4);
        let s = state(&[3.0, 4.0, 1.0, -1.0], DMatrix::identity(4, 4) * 2.0);
        let p = kf_predict(&s, &m).unwrap();
        assert_eq!(p.x, s.x);
        assert_eq!(p.p, s.p);
    }

    #[test]
    fn constant_velocity_step() {
        let m = KalmanModel::constant_velocity(1.0, 0.05, 4.0);
        let s = state(&[0.0, 0.0, 1.0, 2.0], DMatrix::identity(4, 4));
        let p = kf_predict(&s, &m).unwrap();
        assert_eq!(p.x.as_slice(), &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(p.t, 1);
    }

    #[test]
    fn predict_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = KalmanModel::constant_velocity(0.5, 0.3, 2.0);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let l = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let p0 = &l * l.transpose();
            let s = state(&x, p0.clone());
            let out = kf_predict(&s, &m).unwrap();
            // Explicit index arithmetic.
            for i in 0..4 {
                let xi: f64 = (0..4).map(|j| m.a[(i, j)] * x[j]).sum();
                assert_abs_diff_eq!(out.x[i], xi, epsilon = 1e-12);
                for j in 0..4 {
                    let mut v = m.q[(i, j)];
                    for a in 0..4 {
                        for b in 0..4 {
                            v += m.a[(i, a)] * p0[(a, b)] * m.a[(j, b)];
                        }
                    }
                    assert_abs_diff_eq!(out.p[(i, j)], v, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn scalar_update_by_hand() {
        let m = KalmanModel {
            a: DMatrix::identity(1, 1),
            b: DMatrix::zeros(1, 1),
            h: DMatrix::identity(1, 1),
            q: DMatrix::zeros(1, 1),
            r: DMatrix::identity(1, 1),
            form: UpdateForm::Standard,
        };
        let s = KalmanState::new(DVector::from_element(1, 0.0), DMatrix::identity(1, 1), 1, 0);
        let (post, inn) = kf_update(&s, &m, &DVector::from_element(1, 2.0)).unwrap();
        assert_abs_diff_eq!(post.x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(post.p[(0, 0)], 0.5, epsilon = 1e-15);
        assert_eq!(inn[0], 2.0);
        let joseph = KalmanModel { form: UpdateForm::Joseph, ..m };
        let (post, _) = kf_update(&s, &joseph, &DVector::from_element(1, 2.0)).unwrap();
        assert_abs_diff_eq!(post.p[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn perfect_and_useless_measurements() {
        let s = state(&[5.0, 5.0, 0.0, 0.0], DMatrix::identity(4, 4) * 10.0);
        let z = DVector::from_vec(vec![9.0, -3.0]);
        let mut m = KalmanModel::constant_velocity(1.0, 0.05, 1e-12);
        let (post, _) = kf_update(&s, &m, &z).unwrap();
        assert_abs_diff_eq!(post.x[0], 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(post.x[1], -3.0, epsilon = 1e-9);
        m.r = DMatrix::identity(2, 2) * 1e12;
        let (post, _) = kf_update(&s, &m, &z).unwrap();
        assert_abs_diff_eq!(post.x[0], 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(post.x[1], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn singular_innovation_covariance() {
        let mut m = KalmanModel::constant_velocity(1.0, 0.0, 0.0);
        m.r = DMatrix::zeros(2, 2);
        let s = state(&[0.0; 4], DMatrix::zeros(4, 4));
        let err = kf_update(&s, &m, &DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
    }

    #[test]
    fn dimension_mismatch() {
        let m = KalmanModel::constant_velocity(1.0, 0.05, 4.0);
        let s = state(&[0.0; 3], DMatrix::identity(3, 3));
        assert!(kf_predict(&s, &m).is_err());
        let s = state(&[0.0; 4], DMatrix::identity(4, 4));
        assert!(kf_update(&s, &m, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn noiseless_track_converges() {
        let sim = simulate_constant_velocity(5, 30, 0.0);
        let zs: Vec<_> = sim.measurements.iter().map(|&p| Some(p)).collect();
        let out = track_sequence(&zs, &TrackingConfig::default()).unwrap();
        let end = out.last().unwrap().state.position();
        let truth = *sim.truth.last().unwrap();
        assert!((end.0 - truth.0).hypot(end.1 - truth.1) < 0.5);
    }

    #[test]
    fn coasting_extrapolates_linearly() {
        let mut zs: Vec<Option<(f64, f64)>> = (0..40).map(|t| Some((10.0 + 2.0 * t as f64, 50.0 - t as f64))).collect();
        for z in &mut zs[30..33] {
            *z = None;
        }
        let out = track_sequence(&zs, &TrackingConfig::default()).unwrap();
        let coast: Vec<_> = out.iter().filter(|o| o.coasting).collect();
        assert_eq!(coast.len(), 3);
        let before = &out[29].state;
        for (k, o) in coast.iter().enumerate() {
            let steps = (k + 1) as f64;
            let (x, y) = o.state.position();
            assert_abs_diff_eq!(x, before.x[0] + steps * before.x[2], epsilon = 1e-9);
            assert_abs_diff_eq!(y, before.x[1] + steps * before.x[3], epsilon = 1e-9);
            // And the extrapolation sits on the true line.
            let t = 30.0 + k as f64;
            assert!((x - (10.0 + 2.0 * t)).abs() < 0.05 && (y - (50.0 - t)).abs() < 0.05);
        }
    }

    #[test]
    fn track_drops_after_max_coast_and_reinitializes() {
        let mut zs: Vec<Option<(f64, f64)>> = vec![Some((0.0, 0.0)); 5];
        zs.extend(std::iter::repeat(None).take(15));
        zs.push(Some((100.0, 100.0)));
        let out = track_sequence(&zs, &TrackingConfig::default()).unwrap();
        assert_eq!(out.iter().filter(|o| o.coasting).count(), 10);
        let last = out.last().unwrap();
        assert_eq!(last.state.position(), (100.0, 100.0));
        assert_eq!(last.state.t, 20);
    }

    #[test]
    fn all_missing_is_error() {
        assert!(track_sequence(&[None, None], &TrackingConfig::default()).is_err());
    }

    #[test]
    fn screen_mapping() {
        let cam = (641, 481);
        let screen = (1921, 1081);
        assert_eq!(map_to_screen((320.0, 240.0), cam, screen, true), (960.0, 540.0));
        assert_eq!(map_to_screen((0.0, 0.0), cam, screen, true), (1920.0, 0.0));
        assert_eq!(map_to_screen((-50.0, 900.0), cam, screen, true), (1920.0, 1080.0));
    }

    #[test]
    fn smoothness_basics() {
        let pts = vec![(1.0, 1.0); 5];
        let r = smoothness_report(&pts, &pts).unwrap();
        assert_eq!(r.raw, r.smoothed);
        assert_eq!(r.raw, PathStats { rms_jitter: 0.0, max_jump: 0.0, path_length: 0.0 });
        assert!(smoothness_report(&pts[..1], &pts[..1]).is_err());
        assert!(smoothness_report(&pts, &pts[..3]).is_err());
        let line: Vec<_> = (0..4).map(|i| (3.0 * i as f64, 4.0 * i as f64)).collect();
        let s = path_stats(&line).unwrap();
        assert_abs_diff_eq!(s.rms_jitter, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.max_jump, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.path_length, 15.0, epsilon = 1e-12);
    }

    #[test]
    fn covariance_stays_psd_over_many_cycles() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let m = KalmanModel::constant_velocity(1.0, 0.05, 4.0);
        let mut s = state(&[0.0; 4], DMatrix::identity(4, 4) * 100.0);
        for _ in 0..10_000 {
            s = kf_predict(&s, &m).unwrap();
            if rng.gen_bool(0.8) {
                let z = DVector::from_vec(vec![rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0)]);
                s = kf_update(&s, &m, &z).unwrap().0;
            }
            assert!((&s.p - s.p.transpose()).amax() < 1e-9);
            let min_eig = s.p.clone().symmetric_eigen().eigenvalues.min();
            assert!(min_eig >= -1e-9, "min eigenvalue {min_eig}");
        }
    }
}
