//! Count-level stand-in for the camera detection stage.
//!
//! Each present vehicle is detected independently with probability `recall`
//! and a Poisson number of spurious detections is added on top.

use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, seeded_rng, TAG_DETECTOR};

/// Default recall, taken from the car-class detection precision of the
/// deployed model (0.95251) rounded to two places.
pub const DEFAULT_RECALL: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub recall: f64,
    /// Expected spurious detections per interval.
    pub false_positive_rate: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            recall: DEFAULT_RECALL,
            false_positive_rate: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn new(recall: f64, false_positive_rate: f64) -> Result<Self> {
        let model = Self {
            recall,
            false_positive_rate,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn perfect() -> Self {
        Self {
            recall: 1.0,
            false_positive_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.recall) {
            return Err(Error::Invariant(format!(
                "detector recall {} outside [0, 1]",
                self.recall
            )));
        }
        if !(self.false_positive_rate >= 0.0) || !self.false_positive_rate.is_finite() {
            return Err(Error::Invariant(format!(
                "detector false_positive_rate {} must be non-negative",
                self.false_positive_rate
            )));
        }
        Ok(())
    }

    /// Observed count for `true_count` present vehicles.
    pub fn observe(&self, true_count: u64, seed: u64) -> u64 {
        let mut rng = seeded_rng(seed);
        let detected = if self.recall >= 1.0 {
            true_count
        } else if self.recall <= 0.0 || true_count == 0 {
            0
        } else {
            Binomial::new(true_count, self.recall)
                .expect("recall validated")
                .sample(&mut rng)
        };
        let spurious = if self.false_positive_rate > 0.0 {
            Poisson::new(self.false_positive_rate)
                .expect("rate validated")
                .sample(&mut rng) as u64
        } else {
            0
        };
        detected + spurious
    }

    /// Element-wise [`observe`](Self::observe) with an independent sub-seed per index.
    pub fn observe_series(&self, counts: &[u64], seed: u64) -> Vec<u64> {
        counts
            .iter()
            .enumerate()
            .map(|(i, &n)| self.observe(n, derive_seed(seed, TAG_DETECTOR, i as u64)))
            .collect()
    }
}
