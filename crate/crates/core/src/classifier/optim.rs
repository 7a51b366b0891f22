use super::layers::Param;
use super::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// One bias-corrected Adam update of `params` in place; `t` is the 1-based
/// step number.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], t: u64, lr: f64, cfg: AdamConfig) {
    assert!(t >= 1, "Adam steps are 1-based");
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let one = T::one();
    let c1 = T::lit(1.0 - cfg.beta1.powf(t as f64));
    let c2 = T::lit(1.0 - cfg.beta2.powf(t as f64));
    let (lr, eps) = (T::lit(lr), T::lit(cfg.eps));
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (one - b1) * g;
        v[i] = b2 * v[i] + (one - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Adam state for a fixed parameter list.
#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: Vec<&mut Param<T>>, lr: f64) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.value.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            let Param { value, grad, .. } = p;
            adam_step(value.data_mut(), grad.data(), m, v, self.t, lr, self.config);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: AdamConfig = AdamConfig {
        beta1: 0.9,
        beta2: 0.99,
        eps: 1e-8,
    };

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = [1.5f64, -2.0];
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        adam_step(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, 1e-3, CFG);
        assert_eq!(p, [1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = [0.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam_step(&mut p, &[1.0], &mut m, &mut v, 1, 1e-3, CFG);
        assert!((p[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn identical_problems_identical_trajectories() {
        let run = || {
            let mut p = [3.0f32];
            let (mut m, mut v) = ([0.0], [0.0]);
            let mut path = Vec::new();
            for t in 1..50 {
                let g = [2.0 * p[0]];
                adam_step(&mut p, &g, &mut m, &mut v, t, 0.05, CFG);
                path.push(p[0]);
            }
            path
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.last().unwrap().abs() < 3.0);
    }
}
