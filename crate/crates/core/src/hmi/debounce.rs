use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DebounceConfig {
    /// Consecutive confident frames needed to commit.
    pub k: usize,
    /// Minimum top-class probability for a frame to count.
    pub conf_min: f64,
}

impl Default for DebounceConfig {
    fn default() -> Self {
        Self { k: 5, conf_min: 0.8 }
    }
}

impl DebounceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || !(0.0..=1.0).contains(&self.conf_min) {
            return Err(Error::Config(format!(
                "debounce needs k >= 1 and conf_min in [0, 1], got k={} conf_min={}",
                self.k, self.conf_min
            )));
        }
        Ok(())
    }
}

/// Edge-triggered debouncer: a label commits once when its run of confident
/// frames reaches `k`. With `k == 1` every confident frame commits.
#[derive(Debug, Clone)]
pub struct Debouncer {
    config: DebounceConfig,
    run_label: Option<String>,
    run_len: usize,
}

impl Debouncer {
    pub fn new(config: DebounceConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            run_label: None,
            run_len: 0,
        })
    }

    /// Feed one frame's prediction (`None` when nothing was detected).
    /// Returns the committed label, if any.
    pub fn push(&mut self, prediction: Option<(&str, f64)>) -> Option<String> {
        match prediction {
            Some((label, conf)) if conf >= self.config.conf_min => {
                if self.run_label.as_deref() == Some(label) {
                    self.run_len += 1;
                } else {
                    self.run_label = Some(label.to_string());
                    self.run_len = 1;
                }
                let commit = if self.config.k == 1 {
                    true
                } else {
                    self.run_len == self.config.k
                };
                commit.then(|| label.to_string())
            }
            _ => {
                self.run_label = None;
                self.run_len = 0;
                None
            }
        }
    }

    /// Label of the current confident run and its length.
    pub fn current_run(&self) -> Option<(&str, usize)> {
        self.run_label.as_deref().map(|l| (l, self.run_len))
    }
}

/// Run a whole stream; returns `(frame, label)` per commit.
pub fn debounce<'a>(
    stream: impl IntoIterator<Item = Option<(&'a str, f64)>>,
    config: DebounceConfig,
) -> Result<Vec<(usize, String)>> {
    let mut d = Debouncer::new(config)?;
    Ok(stream
        .into_iter()
        .enumerate()
        .filter_map(|(i, p)| d.push(p).map(|l| (i, l)))
        .collect())
}
