use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square confusion matrix, rows = truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn from_counts(n: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "confusion matrix needs {} counts, got {}",
                n * n,
                counts.len()
            )));
        }
        Ok(Self { n, counts })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        Self::from_counts(n, rows.iter().flatten().copied().collect())
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut cm = Self::new(n);
        for (truth, pred) in pairs {
            cm.add(truth, pred)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.n || pred >= self.n {
            return Err(Error::InvalidArgument(format!(
                "class index ({truth}, {pred}) outside {} classes",
                self.n
            )));
        }
        self.counts[truth * self.n + pred] += 1;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn tp(&self, class: usize) -> u64 {
        self.get(class, class)
    }

    pub fn fp(&self, class: usize) -> u64 {
        (0..self.n).filter(|&t| t != class).map(|t| self.get(t, class)).sum()
    }

    pub fn fn_(&self, class: usize) -> u64 {
        (0..self.n).filter(|&p| p != class).map(|p| self.get(class, p)).sum()
    }

    pub fn tn(&self, class: usize) -> u64 {
        self.total() - self.tp(class) - self.fp(class) - self.fn_(class)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub support: u64,
    /// Precision had a zero denominator and was reported as 0.
    pub precision_undefined: bool,
    /// Recall had a zero denominator and was reported as 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Mean of the per-class F-scores.
    pub macro_f_score: f64,
    pub per_class: Vec<ClassMetrics>,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("confusion matrix is empty".into()));
    }
    let per_class: Vec<ClassMetrics> = (0..cm.n())
        .map(|c| {
            let tp = cm.tp(c);
            let (precision, precision_undefined) = ratio(tp, tp + cm.fp(c));
            let (recall, recall_undefined) = ratio(tp, tp + cm.fn_(c));
            ClassMetrics {
                precision,
                recall,
                f_score: f_score(precision, recall),
                support: tp + cm.fn_(c),
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let n = per_class.len().max(1) as f64;
    Ok(MetricsReport {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n,
        macro_f_score: per_class.iter().map(|m| m.f_score).sum::<f64>() / n,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn harmonic_mean_of_reported_scores() {
        assert_abs_diff_eq!(f_score(0.9928, 0.9922), 0.9925, epsilon = 5e-5);
    }

    #[test]
    fn perfect_diagonal() {
        let cm = ConfusionMatrix::from_rows(&[vec![5, 0, 0], vec![0, 3, 0], vec![0, 0, 7]]).unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f_score, 1.0);
        assert!(m.per_class.iter().all(|c| c.precision == 1.0 && c.recall == 1.0));
    }

    #[test]
    fn two_class_hand_count() {
        let cm = ConfusionMatrix::from_rows(&[vec![8, 2], vec![1, 9]]).unwrap();
        let m = metrics(&cm).unwrap();
        assert_abs_diff_eq!(m.accuracy, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(m.per_class[0].precision, 8.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.per_class[0].recall, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(m.per_class[1].precision, 9.0 / 11.0, epsilon = 1e-12);
        assert_eq!(cm.tn(0), 9);
    }

    #[test]
    fn zero_denominator_flagged() {
        // Class 1 never predicted and never true.
        let cm = ConfusionMatrix::from_rows(&[vec![4, 0], vec![0, 0]]).unwrap();
        let m = metrics(&cm).unwrap();
        assert!(m.per_class[1].precision_undefined && m.per_class[1].recall_undefined);
        assert_eq!(m.per_class[1].f_score, 0.0);
        assert!(m.macro_f_score.is_finite());
    }

    #[test]
    fn empty_matrix_is_error() {
        assert!(metrics(&ConfusionMatrix::new(3)).is_err());
    }

    #[test]
    fn per_class_counts_partition_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 5;
        let pairs: Vec<_> = (0..300).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        let cm = ConfusionMatrix::from_pairs(n, pairs).unwrap();
        for c in 0..n {
            assert_eq!(cm.tp(c) + cm.fp(c) + cm.fn_(c) + cm.tn(c), cm.total());
        }
        let m = metrics(&cm).unwrap();
        let fs: Vec<f64> = m.per_class.iter().map(|c| c.f_score).collect();
        let (lo, hi) = fs.iter().fold((f64::MAX, f64::MIN), |(a, b), &f| (a.min(f), b.max(f)));
        assert!(m.macro_f_score >= lo && m.macro_f_score <= hi);
    }
}
