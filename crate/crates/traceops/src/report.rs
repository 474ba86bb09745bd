//! Shared report types: equivalence bands, Monte Carlo estimates, and check
//! statuses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of a quantitative check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The Monte Carlo budget was too small to decide at the tolerance.
    Inconclusive,
}

/// Two-sided equivalence band `ratio_min <= ratio_median <= ratio_max` with a
/// refinement-stability indicator.
///
/// `refinement_delta` is the largest relative change of the band edges when
/// the underlying grid or quadrature density is doubled; `pass` requires
/// finite edges and `refinement_delta` below the configured threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_median: f64,
    pub pass: bool,
    pub refinement_delta: f64,
}

impl EquivalenceReport {
    /// Build a report from ratio samples plus a refinement delta and its
    /// pass threshold.
    pub fn from_ratios(ratios: &[f64], refinement_delta: f64, delta_threshold: f64) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InsufficientData("no ratios collected".into()));
        }
        let mut sorted: Vec<f64> = ratios.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite ratio"));
        let min = sorted[0];
        let max = *sorted.last().unwrap();
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        let pass = min.is_finite()
            && max.is_finite()
            && min > 0.0
            && refinement_delta.is_finite()
            && refinement_delta < delta_threshold;
        Ok(Self {
            ratio_min: min,
            ratio_max: max,
            ratio_median: median,
            pass,
            refinement_delta,
        })
    }

    /// Band width `ratio_max / ratio_min`.
    pub fn band_width(&self) -> f64 {
        self.ratio_max / self.ratio_min
    }
}

/// A Monte Carlo estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub half_width_95: f64,
    pub n_samples: u64,
}

impl MCEstimate {
    /// Estimate a mean from samples: `half_width_95 = 1.96 s / sqrt(n)` with
    /// `s` the unbiased sample standard deviation.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::InsufficientData(
                "need at least 2 samples for a confidence interval".into(),
            ));
        }
        let nf = n as f64;
        let mut acc = crate::quad::KahanSum::new();
        for &x in samples {
            acc.add(x);
        }
        let mean = acc.value() / nf;
        let mut var_acc = crate::quad::KahanSum::new();
        for &x in samples {
            let d = x - mean;
            var_acc.add(d * d);
        }
        let std = (var_acc.value() / (nf - 1.0)).sqrt();
        Ok(Self {
            value: mean,
            half_width_95: 1.96 * std / nf.sqrt(),
            n_samples: n as u64,
        })
    }

    /// Exact (deterministic) value wrapped as an estimate with zero width.
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            half_width_95: 0.0,
            n_samples: 0,
        }
    }

    /// Whether `target` lies within `k` half-widths of the estimate.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.half_width_95
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn report_orders_band() {
        let r = EquivalenceReport::from_ratios(&[1.5, 0.5, 1.0], 0.001, 0.01).unwrap();
        assert_relative_eq!(r.ratio_min, 0.5);
        assert_relative_eq!(r.ratio_max, 1.5);
        assert_relative_eq!(r.ratio_median, 1.0);
        assert!(r.pass);
        assert_relative_eq!(r.band_width(), 3.0);
    }

    #[test]
    fn report_fails_on_unstable_refinement() {
        let r = EquivalenceReport::from_ratios(&[1.0, 1.1], 0.5, 0.01).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn mc_estimate_known_mean() {
        let samples: Vec<f64> = (0..1000).map(|i| (i % 2) as f64).collect();
        let e = MCEstimate::from_samples(&samples).unwrap();
        assert_relative_eq!(e.value, 0.5, epsilon = 1e-12);
        // std of a fair coin is 0.5 -> half width 1.96*0.5/sqrt(1000).
        assert_relative_eq!(e.half_width_95, 1.96 * 0.500_25 / 1000f64.sqrt(), max_relative = 1e-3);
        assert!(e.covers(0.5, 3.0));
    }
}
