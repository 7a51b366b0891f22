//! One-sample Student t-test with p-values from the regularized incomplete
//! beta function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub k: usize,
    pub mean: f64,
    /// Sample standard deviation (k - 1 denominator).
    pub sd: f64,
    pub mu: f64,
    pub se: f64,
    pub t: f64,
    pub df: usize,
    pub p_one: f64,
    pub p_two: f64,
    /// 95% confidence interval of `mean - mu`.
    pub ci95: (f64, f64),
}

impl TTestResult {
    pub fn mean_difference(&self) -> f64 {
        self.mean - self.mu
    }
}

/// One-sample t-test of `samples` against the test value `mu`.
pub fn t_test(samples: &[f64], mu: f64) -> Result<TTestResult> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("t-test needs at least 2 samples, got {k}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("t-test samples must be finite".into()));
    }
    let mean = samples.iter().sum::<f64>() / k as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    t_test_from_summary(mean, var.sqrt(), k, mu)
}

/// The same test from summary statistics.
pub fn t_test_from_summary(mean: f64, sd: f64, k: usize, mu: f64) -> Result<TTestResult> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("t-test needs k >= 2, got {k}")));
    }
    if !(sd > 0.0) {
        return Err(Error::Degenerate("sample standard deviation is zero".into()));
    }
    let df = k - 1;
    let se = sd / (k as f64).sqrt();
    let t = (mean - mu) / se;
    let cdf = student_t_cdf(t.abs(), df as f64);
    let upper = 1.0 - cdf;
    let q = student_t_quantile(0.975, df as f64);
    let diff = mean - mu;
    Ok(TTestResult {
        k,
        mean,
        sd,
        mu,
        se,
        t,
        df,
        p_one: upper,
        p_two: (2.0 * upper).min(1.0),
        ci95: (diff - q * se, diff + q * se),
    })
}

/// CDF of Student's t distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let t2 = t * t;
    if t2 < df {
        // Near zero, 1 - df / (df + t^2) would cancel.
        let central = 0.5 * regularized_incomplete_beta(t2 / (df + t2), 0.5, df / 2.0);
        return 0.5 + central.copysign(t);
    }
    let tail = 0.5 * regularized_incomplete_beta(df / (df + t2), df / 2.0, 0.5);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of [`student_t_cdf`] by bisection.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability must be in (0, 1)");
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while student_t_cdf(lo, df) > p {
        lo *= 2.0;
    }
    while student_t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fastest below the mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(ln_gamma(5.0), 24f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1 - x)^b.
        for &x in &[0.1, 0.35, 0.8] {
            assert_abs_diff_eq!(regularized_incomplete_beta(x, 1.0, 1.0), x, epsilon = 1e-13);
            assert_abs_diff_eq!(regularized_incomplete_beta(x, 3.0, 1.0), x.powi(3), epsilon = 1e-13);
            assert_abs_diff_eq!(regularized_incomplete_beta(x, 1.0, 4.0), 1.0 - (1.0 - x).powi(4), epsilon = 1e-13);
        }
    }

    #[test]
    fn t_cdf_symmetry_and_closed_forms() {
        for df in [1.0, 2.0, 9.0, 30.0] {
            assert_abs_diff_eq!(student_t_cdf(0.0, df), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(student_t_cdf(1.3, df) + student_t_cdf(-1.3, df), 1.0, epsilon = 1e-13);
        }
        // df = 1 is Cauchy: F(t) = 1/2 + atan(t)/pi.
        for &t in &[-3.0, -0.4, 0.7, 12.0] {
            let cauchy = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert_abs_diff_eq!(student_t_cdf(t, 1.0), cauchy, epsilon = 1e-12);
        }
        // df = 2: F(t) = 1/2 + t / (2 sqrt(2 + t^2)).
        for &t in &[-2.0f64, 0.3, 5.0] {
            let closed = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
            assert_abs_diff_eq!(student_t_cdf(t, 2.0), closed, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for df in [1.0, 5.0, 9.0, 30.0] {
            for &p in &[0.025, 0.5, 0.9, 0.975, 0.999] {
                let q = student_t_quantile(p, df);
                assert_abs_diff_eq!(student_t_cdf(q, df), p, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(t_test(&[1.0], 0.0).is_err());
        assert!(matches!(t_test(&[2.0, 2.0, 2.0], 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn positive_shift_gives_large_t() {
        let samples: Vec<f64> = (0..10).map(|i| 5.0 + 1e-3 * (i as f64 - 4.5)).collect();
        let r = t_test(&samples, 4.0).unwrap();
        assert!(r.t > 1000.0);
        assert_eq!(r.df, 9);
        assert!(r.p_two < 1e-12);
        assert_abs_diff_eq!(r.t, (r.mean - r.mu) / r.se, epsilon = 1e-9);
    }
}
