//! Evaluation grids and sampled functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-spaced evaluation grid on `[t_min, t_max]`.
///
/// Suprema over `t > 0` are approximated as maxima over this grid; results
/// are therefore certified lower bounds of the true suprema, monotone under
/// refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_decade: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        Self {
            t_min: 1e-8,
            t_max: 1e8,
            points_per_decade: 64,
        }
    }
}

impl LogGrid {
    pub fn new(t_min: f64, t_max: f64, points_per_decade: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min) || points_per_decade == 0 {
            return Err(Error::Grid(format!(
                "invalid log grid: t_min={t_min}, t_max={t_max}, ppd={points_per_decade}"
            )));
        }
        Ok(Self {
            t_min,
            t_max,
            points_per_decade,
        })
    }

    /// Number of grid points (both endpoints included).
    pub fn len(&self) -> usize {
        let decades = (self.t_max / self.t_min).log10();
        (decades * self.points_per_decade as f64).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The i-th grid point, spaced uniformly in `log10 t`.
    pub fn point(&self, i: usize) -> f64 {
        let n = self.len() - 1;
        if i >= n {
            return self.t_max;
        }
        let frac = i as f64 / n as f64;
        let lg = self.t_min.log10() * (1.0 - frac) + self.t_max.log10() * frac;
        10f64.powf(lg)
    }

    /// All grid points, ascending.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// A grid with doubled density (same endpoints) for refinement checks.
    pub fn refined(&self) -> Self {
        Self {
            points_per_decade: self.points_per_decade * 2,
            ..*self
        }
    }
}

/// A function sampled on a strictly increasing time grid.
///
/// `values[i]` is the payload at `ts[i]`; payloads are small vectors so the
/// same type carries scalar signals (dimension 1) and couple elements
/// (sequence coefficients) alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub ts: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn new(ts: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if ts.len() != values.len() {
            return Err(Error::Grid(format!(
                "grid/value length mismatch: {} vs {}",
                ts.len(),
                values.len()
            )));
        }
        if ts.len() < 2 {
            return Err(Error::Grid("need at least 2 grid points".into()));
        }
        if !ts.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Grid("grid not strictly increasing".into()));
        }
        if values
            .iter()
            .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Grid("non-finite sample value".into()));
        }
        Ok(Self { ts, values })
    }

    /// Scalar-payload constructor.
    pub fn scalar(ts: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let values = ys.into_iter().map(|y| vec![y]).collect();
        Self::new(ts, values)
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Scalar sample at index i (first payload component).
    pub fn y(&self, i: usize) -> f64 {
        self.values[i][0]
    }

    /// Piecewise-linear scalar interpolation, zero outside the grid span.
    pub fn interp_zero_extended(&self, t: f64) -> f64 {
        let ts = &self.ts;
        if t < ts[0] || t > *ts.last().unwrap() {
            return 0.0;
        }
        let j = match ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(j) => return self.y(j),
            Err(j) => j,
        };
        let (t0, t1) = (ts[j - 1], ts[j]);
        let w = (t - t0) / (t1 - t0);
        self.y(j - 1) * (1.0 - w) + self.y(j) * w
    }

    /// Uniform grid `0 = t_0 < ... < t_M = horizon` with `m + 1` points.
    pub fn uniform_grid(horizon: f64, m: usize) -> Vec<f64> {
        (0..=m).map(|i| horizon * i as f64 / m as f64).collect()
    }

    /// Log-spaced grid with zero prepended: `0, t_min, ..., t_max`.
    pub fn log_grid_with_zero(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
        let mut ts = Vec::with_capacity(n + 1);
        ts.push(0.0);
        for i in 0..n {
            let frac = i as f64 / (n - 1) as f64;
            let lg = t_min.log10() * (1.0 - frac) + t_max.log10() * frac;
            ts.push(10f64.powf(lg));
        }
        ts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_grid_shape() {
        let g = LogGrid::default();
        assert_eq!(g.len(), 16 * 64 + 1);
        assert_relative_eq!(g.point(0), 1e-8);
        assert_relative_eq!(g.point(g.len() - 1), 1e8);
    }

    #[test]
    fn grid_is_increasing() {
        let g = LogGrid::new(1e-3, 1e3, 16).unwrap();
        let pts = g.points();
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(LogGrid::new(-1.0, 1.0, 8).is_err());
        assert!(LogGrid::new(1.0, 0.5, 8).is_err());
    }

    #[test]
    fn grid_function_interpolates() {
        let f = GridFunction::scalar(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_relative_eq!(f.interp_zero_extended(0.5), 1.0);
        assert_relative_eq!(f.interp_zero_extended(1.5), 1.0);
        assert_relative_eq!(f.interp_zero_extended(3.0), 0.0);
    }

    #[test]
    fn grid_function_rejects_decreasing() {
        assert!(GridFunction::scalar(vec![0.0, 2.0, 1.0], vec![0.0, 0.0, 0.0]).is_err());
    }
}
