use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Thresholds and limits shared by every analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// OKS evaluation thresholds, strictly increasing in `(0, 1]`.
    pub oks_thresholds: Vec<f64>,
    /// Keypoints with `ks >= good_threshold` are Good.
    pub good_threshold: f64,
    /// Keypoints with `jitter_threshold <= ks < good_threshold` are Jitter; it
    /// is also the proximity bound for Inversion and Swap.
    pub jitter_threshold: f64,
    /// Minimum OKS for a detection to count as near a ground truth when
    /// looking for scoring errors and building score histograms.
    pub proximity_threshold: f64,
    pub max_detections_per_image: usize,
    /// Number of evenly spaced recall values used to average precision.
    pub recall_points: usize,
    /// Gaussian soft-NMS decay applied after optimal rescoring; `None`
    /// disables it.
    pub soft_nms_sigma: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            oks_thresholds: (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect(),
            good_threshold: 0.85,
            jitter_threshold: 0.5,
            proximity_threshold: 0.1,
            max_detections_per_image: 20,
            recall_points: 101,
            soft_nms_sigma: Some(0.5),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.oks_thresholds.is_empty() {
            return bad("no OKS thresholds".into());
        }
        if let Some(t) = self
            .oks_thresholds
            .iter()
            .find(|t| !(**t > 0.0 && **t <= 1.0))
        {
            return bad(format!("OKS threshold {t} outside (0, 1]"));
        }
        if self.oks_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return bad("OKS thresholds must be strictly increasing".into());
        }
        if !(0.0 < self.jitter_threshold
            && self.jitter_threshold < self.good_threshold
            && self.good_threshold <= 1.0)
        {
            return bad(format!(
                "need 0 < jitter ({}) < good ({}) <= 1",
                self.jitter_threshold, self.good_threshold
            ));
        }
        if !(0.0..1.0).contains(&self.proximity_threshold) {
            return bad(format!("proximity threshold {}", self.proximity_threshold));
        }
        if self.max_detections_per_image == 0 {
            return bad("max detections per image must be at least 1".into());
        }
        if self.recall_points < 2 {
            return bad("need at least two recall points".into());
        }
        if let Some(sigma) = self.soft_nms_sigma {
            if !(sigma.is_finite() && sigma > 0.0) {
                return bad(format!("soft-NMS sigma {sigma}"));
            }
        }
        Ok(())
    }

    /// Evenly spaced recall values `0, 1/(n-1), ..., 1`.
    pub fn recall_grid(&self) -> Vec<f64> {
        let last = (self.recall_points - 1) as f64;
        (0..self.recall_points).map(|i| i as f64 / last).collect()
    }

    /// Whether `t` is one of the configured thresholds.
    pub fn has_threshold(&self, t: f64) -> bool {
        self.oks_thresholds.iter().any(|x| (x - t).abs() < 1e-12)
    }
}
