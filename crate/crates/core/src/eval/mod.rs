//! Measurement math: splits, confusion-matrix metrics, detection rates,
//! response times and the one-sample t-test.

mod metrics;
mod split;
mod stats;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmi::ActionEvent;

pub use metrics::{f_score, metrics, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use split::{kfold, split_dataset, Split, Subset};
pub use stats::{
    ln_gamma, regularized_incomplete_beta, student_t_cdf, student_t_quantile, t_test, t_test_from_summary,
    TTestResult,
};

/// `hits / (hits + misses)`.
pub fn detection_rate(hits: u64, misses: u64) -> Result<f64> {
    let trials = hits + misses;
    if trials == 0 {
        return Err(Error::InvalidArgument("detection rate needs at least one trial".into()));
    }
    Ok(hits as f64 / trials as f64)
}

/// Tallies for one (context, action) control.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlStats {
    pub hits: u64,
    pub misses: u64,
    pub detection_rate: f64,
    pub response_ms: Vec<f64>,
    pub avg_response_ms: f64,
}

impl ControlStats {
    fn refresh(&mut self) {
        self.detection_rate = detection_rate(self.hits, self.misses).unwrap_or(0.0);
        self.avg_response_ms = if self.response_ms.is_empty() {
            0.0
        } else {
            self.response_ms.iter().sum::<f64>() / self.response_ms.len() as f64
        };
    }
}

/// Per-control hit/miss and response-time statistics, keyed by
/// `"<context>/<action>"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub controls: BTreeMap<String, ControlStats>,
}

impl RunStats {
    pub fn key(ctx: &str, action: &str) -> String {
        format!("{ctx}/{action}")
    }

    pub fn record_hit(&mut self, ctx: &str, action: &str, response_ms: Option<f64>) {
        let c = self.controls.entry(Self::key(ctx, action)).or_default();
        c.hits += 1;
        c.response_ms.extend(response_ms);
        c.refresh();
    }

    pub fn record_miss(&mut self, ctx: &str, action: &str) {
        let c = self.controls.entry(Self::key(ctx, action)).or_default();
        c.misses += 1;
        c.refresh();
    }

    /// Feed pre-tallied outcomes for one control.
    pub fn record_tally(&mut self, ctx: &str, action: &str, hits: u64, misses: u64) {
        let c = self.controls.entry(Self::key(ctx, action)).or_default();
        c.hits += hits;
        c.misses += misses;
        c.refresh();
    }

    pub fn get(&self, ctx: &str, action: &str) -> Option<&ControlStats> {
        self.controls.get(&Self::key(ctx, action))
    }

    /// Trials for one control.
    pub fn trials(&self, ctx: &str, action: &str) -> u64 {
        self.get(ctx, action).map_or(0, |c| c.hits + c.misses)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("control,hits,misses,detection_rate,avg_response_ms\n");
        for (key, c) in &self.controls {
            let _ = writeln!(
                out,
                "{key},{},{},{:.4},{:.4}",
                c.hits, c.misses, c.detection_rate, c.avg_response_ms
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let width = self.controls.keys().map(String::len).max().unwrap_or(7).max(7);
        let mut out = format!(
            "{:<width$}  {:>4}  {:>6}  {:>9}  {:>13}\n",
            "control", "hits", "misses", "detection", "avg resp (ms)"
        );
        for (key, c) in &self.controls {
            let _ = writeln!(
                out,
                "{key:<width$}  {:>4}  {:>6}  {:>8.0}%  {:>13.3}",
                c.hits,
                c.misses,
                100.0 * c.detection_rate,
                c.avg_response_ms
            );
        }
        out
    }
}

/// Total response time per `"<context>/<action>"` divided by `n`.
pub fn response_stats(events: &[ActionEvent], n: usize) -> Result<BTreeMap<String, f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("response statistics need N >= 1".into()));
    }
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for e in events {
        *totals.entry(RunStats::key(e.context.as_str(), e.action.as_str())).or_default() += e.response_ms;
    }
    Ok(totals.into_iter().map(|(k, total)| (k, total / n as f64)).collect())
}

impl MetricsReport {
    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("class,precision,recall,f_score,support\n");
        for (i, c) in self.per_class.iter().enumerate() {
            let name = class_names.get(i).map_or_else(|| i.to_string(), Clone::clone);
            let _ = writeln!(
                out,
                "{name},{:.6},{:.6},{:.6},{}",
                c.precision, c.recall, c.f_score, c.support
            );
        }
        let _ = writeln!(
            out,
            "macro,{:.6},{:.6},{:.6},{}",
            self.macro_precision,
            self.macro_recall,
            self.macro_f_score,
            self.per_class.iter().map(|c| c.support).sum::<u64>()
        );
        let _ = writeln!(out, "accuracy,,,{:.6},", self.accuracy);
        out
    }

    pub fn to_table(&self, class_names: &[String]) -> String {
        let names: Vec<String> = (0..self.per_class.len())
            .map(|i| class_names.get(i).cloned().unwrap_or_else(|| i.to_string()))
            .collect();
        let width = names.iter().map(String::len).max().unwrap_or(5).max(5);
        let mut out = format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}\n",
            "class", "precision", "recall", "f-score", "support"
        );
        for (name, c) in names.iter().zip(&self.per_class) {
            let flag = if c.precision_undefined || c.recall_undefined { " *" } else { "" };
            let _ = writeln!(
                out,
                "{name:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}{flag}",
                c.precision, c.recall, c.f_score, c.support
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}",
            "macro", self.macro_precision, self.macro_recall, self.macro_f_score
        );
        let _ = writeln!(out, "accuracy {:.4}", self.accuracy);
        if self.per_class.iter().any(|c| c.precision_undefined || c.recall_undefined) {
            out.push_str("* zero denominator reported as 0\n");
        }
        out
    }
}

impl TTestResult {
    pub fn to_table(&self) -> String {
        format!(
            "{:>3}  {:>9}  {:>9}  {:>9}\n{:>3}  {:>9.4}  {:>9.4}  {:>9.4}\n\n\
             test value = {}\n{:>8}  {:>3}  {:>10}  {:>10}  {:>17}\n{:>8.3}  {:>3}  {:>10.3e}  {:>10.4}  ({:.4}, {:.4})\n",
            "N", "mean", "sd", "se",
            self.k, self.mean, self.sd, self.se,
            self.mu,
            "t", "df", "p (2-sided)", "mean diff", "95% CI",
            self.t, self.df, self.p_two, self.mean_difference(), self.ci95.0, self.ci95.1
        )
    }
}
