//! Dilation-scaling calculus: the dilation function
//! `s_φ(λ) = sup_{t>0} φ(λt)/φ(t)`, empirical classification of φ into the
//! dilation classes `I(a,b)` / `I_o(a,b)`, class-preserving transforms, and
//! the integral-majorant check
//! `∫_0^∞ (1 ∧ x/t)^p φ(t) dt/t ≲ φ(x)`.
//!
//! Membership of φ in the open class `I_o(a,b)` means: there is an ε > 0 with
//! `λ^{a+ε} ≲ φ(λt)/φ(t) ≲ λ^{b−ε}` for all `t > 0`, `λ ≥ 1`. It is
//! estimated here by secant slopes of the sampled dilation envelope; the
//! upper exponent comes from `s_φ`, the lower one from the lower envelope
//! `inf_t φ(λt)/φ(t) = 1/s_φ(1/λ)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LogGrid;
use crate::quad::{integrate_half_line, QuadOpts};
use crate::report::EquivalenceReport;

mod expr;

pub use expr::parse_expression;

type EvalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A positive function on `(0, ∞)` with optional declared class bounds and a
/// log evaluation grid.
#[derive(Clone)]
pub struct ScalingFunction {
    eval: EvalFn,
    /// Human-readable construction label (used in reports).
    label: String,
    /// Declared class bounds `(a, b)`; transforms update them per the
    /// transformation calculus.
    pub class_bounds: Option<(f64, f64)>,
    pub grid: LogGrid,
}

impl fmt::Debug for ScalingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalingFunction")
            .field("label", &self.label)
            .field("class_bounds", &self.class_bounds)
            .field("grid", &self.grid)
            .finish()
    }
}

/// JSON descriptor for constructible scaling functions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalingDescriptor {
    /// `φ(t) = t^θ`.
    Power {
        theta: f64,
        #[serde(default)]
        bounds: Option<(f64, f64)>,
    },
    /// `φ(λ) = λ^α` with `α ∈ (0,1)`: the Laplace exponent of the classical
    /// fractional-derivative kernel.
    Caputo {
        alpha: f64,
        #[serde(default)]
        bounds: Option<(f64, f64)>,
    },
    /// Tabulated `(t, φ(t))` pairs, log-log interpolated, end-slope
    /// extrapolated.
    Table {
        ts: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        bounds: Option<(f64, f64)>,
    },
    /// Closed-form expression in the variable `t`.
    Expr {
        formula: String,
        #[serde(default)]
        bounds: Option<(f64, f64)>,
    },
}

impl ScalingDescriptor {
    /// Instantiate on the given grid.
    pub fn build(&self, grid: LogGrid) -> Result<ScalingFunction> {
        match self {
            ScalingDescriptor::Power { theta, bounds } => {
                Ok(ScalingFunction::power(*theta, grid).with_bounds(*bounds))
            }
            ScalingDescriptor::Caputo { alpha, bounds } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::Parameter(format!(
                        "caputo exponent must lie in (0,1), got {alpha}"
                    )));
                }
                let a = *alpha;
                Ok(ScalingFunction::new(
                    move |t| t.powf(a),
                    format!("caputo:{a}"),
                    grid,
                )
                .with_bounds(*bounds))
            }
            ScalingDescriptor::Table { ts, values, bounds } => {
                let interp = LogLogTable::new(ts.clone(), values.clone())?;
                Ok(ScalingFunction::new(
                    move |t| interp.eval(t),
                    "table".to_string(),
                    grid,
                )
                .with_bounds(*bounds))
            }
            ScalingDescriptor::Expr { formula, bounds } => {
                let parsed = parse_expression(formula)?;
                Ok(ScalingFunction::new(
                    move |t| parsed.eval(t),
                    format!("expr:{formula}"),
                    grid,
                )
                .with_bounds(*bounds))
            }
        }
    }
}

/// Log-log piecewise-linear table with end-slope extrapolation.
#[derive(Debug, Clone)]
pub struct LogLogTable {
    ln_ts: Vec<f64>,
    ln_vals: Vec<f64>,
}

impl LogLogTable {
    pub fn new(ts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if ts.len() != values.len() || ts.len() < 2 {
            return Err(Error::Descriptor(format!(
                "table needs >= 2 matched (t, value) pairs, got {} and {}",
                ts.len(),
                values.len()
            )));
        }
        if !ts.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Descriptor(
                "table abscissae must be strictly increasing".into(),
            ));
        }
        if ts[0] <= 0.0 || values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::Descriptor(
                "table entries must be positive and finite".into(),
            ));
        }
        Ok(Self {
            ln_ts: ts.iter().map(|t| t.ln()).collect(),
            ln_vals: values.iter().map(|v| v.ln()).collect(),
        })
    }

    /// Sample a function onto a log grid.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, grid: &LogGrid) -> Result<Self> {
        let ts = grid.points();
        let values: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
        for (&t, &v) in ts.iter().zip(&values) {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Eval {
                    t,
                    message: format!("non-positive or non-finite value {v} while tabulating"),
                });
            }
        }
        Self::new(ts, values)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let x = t.ln();
        let n = self.ln_ts.len();
        let j = match self
            .ln_ts
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(j) => return self.ln_vals[j].exp(),
            Err(0) => 1,
            Err(j) if j >= n => n - 1,
            Err(j) => j,
        };
        let (x0, x1) = (self.ln_ts[j - 1], self.ln_ts[j]);
        let (y0, y1) = (self.ln_vals[j - 1], self.ln_vals[j]);
        let w = (x - x0) / (x1 - x0);
        (y0 * (1.0 - w) + y1 * w).exp()
    }
}

/// Transforms of the class calculus. Each maps declared bounds `(a, b)` to
/// the bounds of the transformed function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// `t^α φ(t)`; bounds `(a+α, b+α)`.
    PowerWeight(f64),
    /// `φ(t^α)`; bounds `(αa, αb)` for `α ≥ 0`, `(αb, αa)` for `α < 0`.
    ArgumentPower(f64),
    /// `φ(t)^α`; same bound rule as `ArgumentPower`.
    ValuePower(f64),
    /// `φ^{-1}`; bounds `(1/b, 1/a)` when `0 < a ≤ b`.
    Inverse,
    /// `φ̃(t) = t φ(1/t)`; bounds `(1−b, 1−a)`.
    Reflect,
    /// `ψ(s) = s^{θ0} φ(s^{θ1−θ0})`.
    Stability { theta0: f64, theta1: f64 },
}

/// Sampled dilation function with fitted exponents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DilationReport {
    /// Sampled dilations `λ = 2^k`, ascending in `k`.
    pub lambdas: Vec<f64>,
    /// Grid suprema `s_hat(λ)`.
    pub s_hat: Vec<f64>,
    /// Fitted lower exponent (min secant of the lower envelope on `λ ≥ 1`).
    pub a_hat: f64,
    /// Fitted upper exponent (max secant of `s_hat` on `λ ≥ 1`).
    pub b_hat: f64,
    /// Smallest constant with `s_hat(λ) ≤ C λ^{b_hat}` for `λ ≥ 1` and
    /// `s_hat(λ) ≤ C λ^{a_hat}` for `λ ≤ 1` on the sample.
    pub envelope_constant: f64,
}

impl DilationReport {
    /// `s_hat` at `λ = 2^k`.
    pub fn s_at(&self, k: i32) -> Option<f64> {
        let k_max = (self.lambdas.len() as i32 - 1) / 2;
        let idx = k + k_max;
        if idx < 0 || idx as usize >= self.s_hat.len() {
            None
        } else {
            Some(self.s_hat[idx as usize])
        }
    }

    /// Check `s_hat(λτ) ≤ s_hat(λ) s_hat(τ) (1 + slack)` for every sampled
    /// pair whose product stays in the sampled range. Returns the worst
    /// relative excess (negative when the inequality is strict everywhere).
    pub fn submultiplicativity_excess(&self) -> f64 {
        let k_max = (self.lambdas.len() as i32 - 1) / 2;
        let mut worst = f64::NEG_INFINITY;
        for i in -k_max..=k_max {
            for j in -k_max..=k_max {
                if (i + j).abs() > k_max {
                    continue;
                }
                let (s_ij, s_i, s_j) = (
                    self.s_at(i + j).unwrap(),
                    self.s_at(i).unwrap(),
                    self.s_at(j).unwrap(),
                );
                worst = worst.max(s_ij / (s_i * s_j) - 1.0);
            }
        }
        worst
    }
}

/// Outcome of a class-membership fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipFit {
    pub report: DilationReport,
    /// `min(a_hat − a, b − b_hat)` when bounds `(a, b)` are declared.
    pub eps_hat: Option<f64>,
    /// Membership verdict for the declared bounds; `None` when no bounds are
    /// declared. Boundary fits (`eps_hat` within the fit tolerance of zero)
    /// report `false`: the class is open.
    pub member: Option<bool>,
}

/// Fit tolerance for membership verdicts and bound-movement checks.
pub const FIT_TOL: f64 = 1e-3;

impl ScalingFunction {
    pub fn new<F>(eval: F, label: String, grid: LogGrid) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(eval),
            label,
            class_bounds: None,
            grid,
        }
    }

    /// `φ(t) = t^θ` with bounds `(θ, θ)`.
    pub fn power(theta: f64, grid: LogGrid) -> Self {
        Self::new(move |t| t.powf(theta), format!("power:{theta}"), grid)
            .with_bounds(Some((theta, theta)))
    }

    pub fn with_bounds(mut self, bounds: Option<(f64, f64)>) -> Self {
        self.class_bounds = bounds;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluate φ, validating positivity and finiteness.
    pub fn eval_checked(&self, t: f64) -> Result<f64> {
        let v = (self.eval)(t);
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Eval {
                t,
                message: format!("scaling function '{}' returned {v}", self.label),
            });
        }
        Ok(v)
    }

    /// Evaluate φ without validation (hot paths; callers validated earlier).
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    /// Resample this function onto its grid as a log-log table (cheap
    /// evaluations afterwards); used before feeding expensive compositions
    /// into suprema or quadratures.
    pub fn tabulated(&self) -> Result<ScalingFunction> {
        let table = LogLogTable::from_fn(|t| (self.eval)(t), &self.grid)?;
        Ok(ScalingFunction::new(
            move |t| table.eval(t),
            format!("tab({})", self.label),
            self.grid,
        )
        .with_bounds(self.class_bounds))
    }

    /// `s_hat(λ)`: maximum of `φ(λt)/φ(t)` over the grid — a lower bound of
    /// the true supremum, monotone under grid refinement.
    pub fn eval_dilation_supremum(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Parameter(format!(
                "dilation requires λ > 0, got {lambda}"
            )));
        }
        if lambda == 1.0 {
            return Ok(1.0);
        }
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.grid.len() {
            let t = self.grid.point(i);
            let denom = self.eval_checked(t)?;
            let num = self.eval_checked(lambda * t)?;
            best = best.max(num / denom);
        }
        Ok(best)
    }

    /// Dilation report over `λ = 2^k`, `k ∈ [−k_max, k_max]`.
    pub fn dilation_report(&self, k_max: u32) -> Result<DilationReport> {
        if k_max < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least λ = 2^±2 for secant fits, got k_max = {k_max}"
            )));
        }
        let k_max = k_max as i32;
        let mut lambdas = Vec::new();
        let mut s_hat = Vec::new();
        for k in -k_max..=k_max {
            let lam = 2f64.powi(k);
            lambdas.push(lam);
            s_hat.push(self.eval_dilation_supremum(lam)?);
        }
        let (a_hat, b_hat) = fit_envelope_slopes(&s_hat, k_max);
        let mut envelope = 1.0f64;
        for (lam, sv) in lambdas.iter().zip(&s_hat) {
            let bound = if *lam >= 1.0 {
                lam.powf(b_hat)
            } else {
                lam.powf(a_hat)
            };
            envelope = envelope.max(sv / bound);
        }
        Ok(DilationReport {
            lambdas,
            s_hat,
            a_hat,
            b_hat,
            envelope_constant: envelope,
        })
    }

    /// Fit class membership against the declared bounds over `λ = 2^k`,
    /// `k ∈ [−20, 20]`.
    pub fn fit_membership(&self) -> Result<MembershipFit> {
        self.fit_membership_with(20)
    }

    /// Membership fit with an explicit `k_max`.
    pub fn fit_membership_with(&self, k_max: u32) -> Result<MembershipFit> {
        let report = self.dilation_report(k_max)?;
        let (eps_hat, member) = match self.class_bounds {
            Some((a, b)) => {
                let eps = (report.a_hat - a).min(b - report.b_hat);
                (Some(eps), Some(eps > FIT_TOL))
            }
            None => (None, None),
        };
        Ok(MembershipFit {
            report,
            eps_hat,
            member,
        })
    }

    /// Certify membership in `I_o(a, b)` for explicit bounds, regardless of
    /// the declared ones.
    pub fn certify_in(&self, a: f64, b: f64) -> Result<MembershipFit> {
        let probe = self.clone().with_bounds(Some((a, b)));
        let fit = probe.fit_membership()?;
        if fit.member == Some(true) {
            Ok(fit)
        } else {
            Err(Error::Precondition(format!(
                "'{}' not certified in I_o({a}, {b}): fitted exponents ({:.4}, {:.4})",
                self.label, fit.report.a_hat, fit.report.b_hat
            )))
        }
    }

    /// Apply a class transform.
    pub fn transform(&self, kind: Transform) -> Result<ScalingFunction> {
        let inner = self.eval.clone();
        let bounds = self.class_bounds;
        match kind {
            Transform::PowerWeight(alpha) => {
                let f = move |t: f64| t.powf(alpha) * inner(t);
                Ok(ScalingFunction::new(
                    f,
                    format!("t^{alpha}*({})", self.label),
                    self.grid,
                )
                .with_bounds(bounds.map(|(a, b)| (a + alpha, b + alpha))))
            }
            Transform::ArgumentPower(alpha) => {
                let f = move |t: f64| inner(t.powf(alpha));
                Ok(ScalingFunction::new(
                    f,
                    format!("({})∘t^{alpha}", self.label),
                    self.grid,
                )
                .with_bounds(bounds.map(|(a, b)| scale_bounds(a, b, alpha))))
            }
            Transform::ValuePower(alpha) => {
                let f = move |t: f64| inner(t).powf(alpha);
                Ok(ScalingFunction::new(
                    f,
                    format!("({})^{alpha}", self.label),
                    self.grid,
                )
                .with_bounds(bounds.map(|(a, b)| scale_bounds(a, b, alpha))))
            }
            Transform::Inverse => self.inverse(),
            Transform::Reflect => {
                let f = move |t: f64| t * inner(1.0 / t);
                Ok(ScalingFunction::new(
                    f,
                    format!("reflect({})", self.label),
                    self.grid,
                )
                .with_bounds(bounds.map(|(a, b)| (1.0 - b, 1.0 - a))))
            }
            Transform::Stability { theta0, theta1 } => {
                let d = theta1 - theta0;
                let f = move |s: f64| s.powf(theta0) * inner(s.powf(d));
                let new_bounds = bounds.map(|(a, b)| {
                    let (sa, sb) = scale_bounds(a, b, d);
                    (sa + theta0, sb + theta0)
                });
                Ok(ScalingFunction::new(
                    f,
                    format!("stab[{theta0},{theta1}]({})", self.label),
                    self.grid,
                )
                .with_bounds(new_bounds))
            }
        }
    }

    /// Monotone inverse by bisection to relative tolerance 1e−12.
    ///
    /// Requires φ strictly increasing on the grid; queries outside
    /// `[φ(t_min), φ(t_max)]` are domain errors.
    fn inverse(&self) -> Result<ScalingFunction> {
        let pts = self.grid.points();
        let mut vals = Vec::with_capacity(pts.len());
        for &t in &pts {
            vals.push(self.eval_checked(t)?);
        }
        if !vals.windows(2).all(|w| w[1] > w[0]) {
            let bad = vals
                .windows(2)
                .position(|w| w[1] <= w[0])
                .map(|i| pts[i + 1])
                .unwrap_or(pts[0]);
            return Err(Error::Monotonicity(format!(
                "'{}' is not strictly increasing on the grid near t = {bad:.6e}",
                self.label
            )));
        }
        let lo_val = vals[0];
        let hi_val = *vals.last().unwrap();
        let eval = self.eval.clone();
        let grid = self.grid;
        let label = self.label.clone();
        let inv = move |y: f64| -> f64 {
            // Outside the achievable range the inverse is extended by the
            // end power laws so downstream suprema remain evaluable; direct
            // queries go through `inverse_checked` which errors instead.
            let idx = match vals.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
                Ok(i) => return pts[i],
                Err(i) => i,
            };
            let (mut lo, mut hi) = if idx == 0 {
                // extrapolate below with the first-panel slope
                let slope = (vals[1].ln() - vals[0].ln()) / (pts[1].ln() - pts[0].ln());
                return (pts[0].ln() + (y.ln() - vals[0].ln()) / slope).exp();
            } else if idx >= pts.len() {
                let n = pts.len();
                let slope =
                    (vals[n - 1].ln() - vals[n - 2].ln()) / (pts[n - 1].ln() - pts[n - 2].ln());
                return (pts[n - 1].ln() + (y.ln() - vals[n - 1].ln()) / slope).exp();
            } else {
                (pts[idx - 1], pts[idx])
            };
            // Bisection in log t to relative tolerance 1e-12.
            for _ in 0..80 {
                if hi / lo - 1.0 < 1e-12 {
                    break;
                }
                let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
                if eval(mid) < y {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let bounds = self.class_bounds.and_then(|(a, b)| {
            if a > 0.0 && b >= a {
                Some((1.0 / b, 1.0 / a))
            } else {
                None
            }
        });
        Ok(ScalingFunction {
            eval: Arc::new(inv),
            label: format!("inverse({label})"),
            class_bounds: bounds,
            grid,
        }
        .with_range_check(lo_val, hi_val))
    }

    fn with_range_check(self, _lo: f64, _hi: f64) -> Self {
        // Range bookkeeping is kept by `inverse_checked` below via the grid;
        // the evaluator itself extrapolates smoothly.
        self
    }

    /// Inverse query with range validation (errors outside `[φ(t_min),
    /// φ(t_max)]` instead of extrapolating).
    pub fn inverse_checked(&self, y: f64) -> Result<f64> {
        let lo = self.eval_checked(self.grid.t_min)?;
        let hi = self.eval_checked(self.grid.t_max)?;
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        if y < lo || y > hi {
            return Err(Error::Domain {
                message: format!("inverse query {y:.6e} outside the achievable range"),
                lo,
                hi,
            });
        }
        let inv = self.transform(Transform::Inverse)?;
        Ok(inv.eval(y))
    }

    /// Integral-majorant check: computes, for every `x` in `x_grid`,
    ///
    /// upper side: `I(x) = ∫_0^∞ (1 ∧ x/t)^p φ(t) dt/t`,
    /// lower side: `I(x) = ∫_0^∞ (1 ∧ t/x)^p φ(t) dt/t`,
    ///
    /// and reports the band of `I(x)/φ(x)`. Divergent tails surface as
    /// divergence errors naming the offending end; the membership
    /// precondition (`I_o(0,p)` resp. `I_o(−p,0)`) is exactly what makes the
    /// integral converge, so violations are detected empirically.
    pub fn check_integral_majorant(
        &self,
        p: f64,
        side: MajorantSide,
        x_grid: &[f64],
    ) -> Result<EquivalenceReport> {
        if p < 0.0 {
            return Err(Error::Parameter(format!("p must be >= 0, got {p}")));
        }
        if x_grid.is_empty() {
            return Err(Error::InsufficientData("empty x grid".into()));
        }
        let opts = QuadOpts::default();
        let refined = opts.refined();
        let mut ratios = Vec::with_capacity(x_grid.len());
        let mut delta = 0.0f64;
        for &x in x_grid {
            if x <= 0.0 {
                return Err(Error::Parameter(format!("x must be positive, got {x}")));
            }
            let phix = self.eval_checked(x)?;
            let i0 = self.majorant_integral(p, side, x, &opts)?;
            let i1 = self.majorant_integral(p, side, x, &refined)?;
            delta = delta.max((i1 / i0 - 1.0).abs());
            ratios.push(i1 / phix);
        }
        EquivalenceReport::from_ratios(&ratios, delta, 0.01)
    }

    fn majorant_integral(
        &self,
        p: f64,
        side: MajorantSide,
        x: f64,
        opts: &QuadOpts,
    ) -> Result<f64> {
        let eval = self.eval.clone();
        let integrand = move |t: f64| {
            let cut = match side {
                MajorantSide::Upper => (x / t).min(1.0),
                MajorantSide::Lower => (t / x).min(1.0),
            };
            cut.powf(p) * eval(t) / t
        };
        Ok(integrate_half_line(&integrand, x, opts)?.value)
    }
}

/// Which side of the majorant lemma to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MajorantSide {
    Upper,
    Lower,
}

/// Fit the class exponents from dilation samples `s_hat(2^k)`,
/// `k ∈ [−k_max, k_max]` (array indexed by `k + k_max`).
///
/// The upper exponent `b_hat` is the least-squares slope of
/// `ln s_hat(2^k)` against `k ln 2` over the outer dyadic half
/// `k ∈ [⌈k_max/2⌉, k_max]`; the lower exponent `a_hat` is the analogous
/// slope of the lower envelope `ln inf_t φ(λt)/φ(t) = −ln s_hat(1/λ)`.
/// Restricting to the outer half measures the asymptotic rate — which is
/// the only falsifiable content of class membership, since the class
/// definition carries a free multiplicative constant that absorbs any
/// mid-range level shift (a one-step secant would misread such a shift as
/// slope). For exact power laws the fit is exact.
pub(crate) fn fit_envelope_slopes(s_hat: &[f64], k_max: i32) -> (f64, f64) {
    let ln2 = std::f64::consts::LN_2;
    let s = |k: i32| s_hat[(k + k_max) as usize];
    let k_half = (k_max + 1) / 2;
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for k in k_half..=k_max {
        upper.push((k as f64 * ln2, s(k).ln()));
        lower.push((k as f64 * ln2, -s(-k).ln()));
    }
    (ls_slope(&lower), ls_slope(&upper))
}

/// Ordinary least-squares slope of `(x, y)` pairs.
fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Bounds `(αa, αb)` for `α ≥ 0`, `(αb, αa)` for `α < 0`.
fn scale_bounds(a: f64, b: f64, alpha: f64) -> (f64, f64) {
    if alpha >= 0.0 {
        (alpha * a, alpha * b)
    } else {
        (alpha * b, alpha * a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> LogGrid {
        LogGrid::default()
    }

    #[test]
    fn power_dilation_is_exact() {
        let phi = ScalingFunction::power(0.5, grid());
        assert_relative_eq!(phi.eval_dilation_supremum(4.0).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(
            ScalingFunction::power(1.0, grid())
                .eval_dilation_supremum(1.0)
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn power_dilation_wide_lambda_range() {
        let phi = ScalingFunction::power(0.3, grid());
        for k in [-10i32, -3, 3, 10] {
            let lam = 2f64.powi(k);
            assert_relative_eq!(
                phi.eval_dilation_supremum(lam).unwrap(),
                lam.powf(0.3),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn membership_pure_power() {
        let phi = ScalingFunction::power(0.3, grid()).with_bounds(Some((0.0, 1.0)));
        let fit = phi.fit_membership().unwrap();
        assert_relative_eq!(fit.report.a_hat, 0.3, epsilon = 1e-6);
        assert_relative_eq!(fit.report.b_hat, 0.3, epsilon = 1e-6);
        assert_eq!(fit.member, Some(true));
    }

    #[test]
    fn membership_boundary_is_rejected() {
        let phi = ScalingFunction::power(1.0, grid()).with_bounds(Some((0.0, 1.0)));
        let fit = phi.fit_membership().unwrap();
        assert!(fit.eps_hat.unwrap().abs() < 1e-6);
        assert_eq!(fit.member, Some(false));
    }

    #[test]
    fn transform_bounds_move_correctly() {
        let phi = ScalingFunction::power(0.5, grid());
        let t1 = phi.transform(Transform::PowerWeight(1.0)).unwrap();
        assert_eq!(t1.class_bounds, Some((1.5, 1.5)));
        assert_relative_eq!(t1.eval(4.0), 8.0, max_relative = 1e-12);

        let t2 = phi.transform(Transform::ArgumentPower(2.0)).unwrap();
        assert_eq!(t2.class_bounds, Some((1.0, 1.0)));

        let t3 = phi.transform(Transform::ArgumentPower(-1.0)).unwrap();
        assert_eq!(t3.class_bounds, Some((-0.5, -0.5)));

        let t4 = phi.transform(Transform::Inverse).unwrap();
        assert_eq!(t4.class_bounds, Some((2.0, 2.0)));
    }

    #[test]
    fn inverse_of_square_is_sqrt() {
        let phi = ScalingFunction::power(2.0, grid());
        let inv = phi.transform(Transform::Inverse).unwrap();
        for &x in &[1e-4, 0.37, 1.0, 42.0, 1e4] {
            assert_relative_eq!(inv.eval(x), x.sqrt(), max_relative = 1e-10);
        }
    }

    #[test]
    fn inverse_rejects_non_monotone() {
        let phi = ScalingFunction::new(|t: f64| (t - 1.0) * (t - 1.0) + 0.1, "parabola".into(), grid());
        assert!(matches!(
            phi.transform(Transform::Inverse),
            Err(Error::Monotonicity(_))
        ));
    }

    #[test]
    fn inverse_checked_range_error() {
        let g = LogGrid::new(1e-2, 1e2, 32).unwrap();
        let phi = ScalingFunction::power(1.0, g);
        assert!(matches!(
            phi.inverse_checked(1e5),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn reflect_is_involution() {
        let phi = ScalingFunction::power(0.3, grid());
        let back = phi
            .transform(Transform::Reflect)
            .unwrap()
            .transform(Transform::Reflect)
            .unwrap();
        for &t in &[1e-3, 0.5, 1.0, 7.0, 1e3] {
            assert_relative_eq!(back.eval(t), phi.eval(t), max_relative = 1e-12);
        }
        // Bounds also return: (1-(1-a), 1-(1-b)) = (a, b), up to rounding.
        let (a, b) = back.class_bounds.unwrap();
        assert_relative_eq!(a, 0.3, epsilon = 1e-15);
        assert_relative_eq!(b, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn stability_theta0_zero_is_identity_on_phi() {
        let phi = ScalingFunction::power(1.0 / 3.0, grid());
        let psi = phi
            .transform(Transform::Stability {
                theta0: 0.0,
                theta1: 1.0,
            })
            .unwrap();
        for &s in &[0.1, 1.0, 8.0] {
            assert_relative_eq!(psi.eval(s), s.powf(1.0 / 3.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn majorant_upper_sqrt() {
        // φ = √t, p = 1, x = 1: ∫_0^1 t^{-1/2} dt + ∫_1^∞ t^{-3/2} dt = 4.
        let phi = ScalingFunction::power(0.5, grid());
        let rep = phi
            .check_integral_majorant(1.0, MajorantSide::Upper, &[1.0])
            .unwrap();
        assert_relative_eq!(rep.ratio_max, 4.0, max_relative = 1e-9);
        assert!(rep.pass);
    }

    #[test]
    fn majorant_lower_mirror() {
        let phi = ScalingFunction::power(-0.5, grid());
        let rep = phi
            .check_integral_majorant(1.0, MajorantSide::Lower, &[1.0])
            .unwrap();
        assert_relative_eq!(rep.ratio_max, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn majorant_detects_divergence() {
        let phi = ScalingFunction::power(1.0, grid());
        let err = phi.check_integral_majorant(1.0, MajorantSide::Upper, &[1.0]);
        match err {
            Err(Error::Divergence { end, .. }) => {
                assert_eq!(end, crate::error::IntegralEnd::Infinity);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn majorant_scale_invariant() {
        let phi = ScalingFunction::power(0.5, grid());
        let scaled = ScalingFunction::new(|t: f64| 37.0 * t.sqrt(), "37sqrt".into(), grid());
        let r1 = phi
            .check_integral_majorant(1.0, MajorantSide::Upper, &[0.5, 1.0, 2.0])
            .unwrap();
        let r2 = scaled
            .check_integral_majorant(1.0, MajorantSide::Upper, &[0.5, 1.0, 2.0])
            .unwrap();
        assert_relative_eq!(r1.ratio_max, r2.ratio_max, max_relative = 1e-6);
    }

    #[test]
    fn descriptor_json_round_trip() {
        let d: ScalingDescriptor =
            serde_json::from_str(r#"{"kind":"power","theta":0.5,"bounds":[0.0,1.0]}"#).unwrap();
        let phi = d.build(LogGrid::default()).unwrap();
        assert_relative_eq!(phi.eval(4.0), 2.0);
        assert!(serde_json::from_str::<ScalingDescriptor>(r#"{"kind":"power","theta":0.5,"junk":1}"#).is_err());
    }

    #[test]
    fn table_descriptor_interpolates() {
        let d = ScalingDescriptor::Table {
            ts: vec![0.1, 1.0, 10.0],
            values: vec![0.1f64.sqrt(), 1.0, 10f64.sqrt()],
            bounds: None,
        };
        let phi = d.build(LogGrid::new(1e-2, 1e2, 16).unwrap()).unwrap();
        // log-log linear interpolation reproduces the power law exactly.
        assert_relative_eq!(phi.eval(3.0), 3f64.sqrt(), max_relative = 1e-12);
        // extrapolation continues the end slopes.
        assert_relative_eq!(phi.eval(100.0), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn submultiplicativity_on_powers() {
        let phi = ScalingFunction::power(0.7, grid());
        let rep = phi.dilation_report(8).unwrap();
        assert!(rep.submultiplicativity_excess() < 1e-6);
    }

    #[test]
    fn kinked_example_dilation_value() {
        // φ(t) = √t (1 + min(t, 1)), λ = 2: the exact supremum is
        // √2·(1+2t)/(1+t) maximized at the kink t = 1/2, value 4√2/3.
        let phi = ScalingFunction::new(
            |t: f64| t.sqrt() * (1.0 + t.min(1.0)),
            "kinked".into(),
            grid(),
        );
        let s = phi.eval_dilation_supremum(2.0).unwrap();
        let exact = 4.0 * std::f64::consts::SQRT_2 / 3.0;
        assert!(s <= exact + 1e-12, "grid max cannot exceed the supremum");
        assert!(s > std::f64::consts::SQRT_2 && s < 2.0 * std::f64::consts::SQRT_2);
        // Dense grid pins the value.
        let dense = ScalingFunction::new(
            |t: f64| t.sqrt() * (1.0 + t.min(1.0)),
            "kinked".into(),
            LogGrid::new(1e-8, 1e8, 6250).unwrap(),
        );
        let s_dense = dense.eval_dilation_supremum(2.0).unwrap();
        assert_relative_eq!(s_dense, exact, max_relative = 1e-3);
    }
}
