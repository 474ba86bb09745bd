//! Completely monotone kernels `κ` and their Laplace exponents
//! `φ(λ) = λ ℒ[κ](λ)`.
//!
//! The module provides the kernel families (power/fractional, positive
//! combinations of powers, tabulated data, and opaque closures), validation,
//! the kernel ↔ exponent conversion with an analytic or quadrature backend,
//! generalized inverses `κ^{-1}(y) = inf{s : κ(s) ≤ y}`, the conjugate pair
//! `κ*(t) = κ^{-1}(1/t)` / `ψ(t) = 1/φ^{-1}(1/t)`, cumulative kernel
//! moments for product-integration solvers, and the scaling-based extension
//! of a kernel given only on a finite interval `(0, T)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BoundSide, Error, Result};
use crate::grid::LogGrid;
use crate::quad::{integrate_from_zero, laplace_transform, QuadOpts};
use crate::report::EquivalenceReport;
use crate::scaling::{LogLogTable, ScalingFunction, Transform, FIT_TOL};
use crate::special::gamma;

type EvalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Serializable kernel families.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelDescriptor {
    /// `κ(t) = t^{-α} / Γ(1-α)`, `α ∈ (0, 1)`: the kernel of the classical
    /// fractional derivative of order α.
    Caputo { alpha: f64 },
    /// `κ(t) = Σ_i c_i t^{-α_i} / Γ(1-α_i)` with `c_i > 0`, `α_i ∈ (0, 1)`;
    /// its exponent is `φ(λ) = Σ_i c_i λ^{α_i}`.
    SumOfPowers { terms: Vec<PowerTerm> },
    /// Tabulated `(t, κ(t))` samples, log-log interpolated with end-slope
    /// extrapolation.
    Table { ts: Vec<f64>, values: Vec<f64> },
}

/// One `c · t^{-α}/Γ(1-α)` summand.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub c: f64,
    pub alpha: f64,
}

/// A positive non-increasing kernel on `(0, ∞)`.
#[derive(Clone)]
pub struct Kernel {
    eval: EvalFn,
    descriptor: Option<KernelDescriptor>,
    label: String,
    pub grid: LogGrid,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("label", &self.label)
            .field("descriptor", &self.descriptor)
            .field("grid", &self.grid)
            .finish()
    }
}

/// Backend for `laplace_phi` and derived objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhiMethod {
    /// Analytic when the family provides it, quadrature otherwise.
    #[default]
    Auto,
    /// Always numerical: `φ(λ) = ∫_0^∞ e^{-u} κ(u/λ) du`.
    Quadrature,
    /// Closed form; errors for families without one.
    Analytic,
}

impl KernelDescriptor {
    fn validate(&self) -> Result<()> {
        match self {
            KernelDescriptor::Caputo { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::Parameter(format!(
                        "fractional order must lie in (0,1), got {alpha}"
                    )));
                }
            }
            KernelDescriptor::SumOfPowers { terms } => {
                if terms.is_empty() {
                    return Err(Error::Parameter("sum_of_powers needs >= 1 term".into()));
                }
                for t in terms {
                    if !(t.alpha > 0.0 && t.alpha < 1.0) {
                        return Err(Error::Parameter(format!(
                            "power term order must lie in (0,1), got {}",
                            t.alpha
                        )));
                    }
                    if !(t.c > 0.0 && t.c.is_finite()) {
                        return Err(Error::Parameter(format!(
                            "power term coefficient must be positive, got {}",
                            t.c
                        )));
                    }
                }
            }
            KernelDescriptor::Table { .. } => {} // validated by LogLogTable
        }
        Ok(())
    }

    pub fn build(&self, grid: LogGrid) -> Result<Kernel> {
        self.validate()?;
        let (eval, label): (EvalFn, String) = match self {
            KernelDescriptor::Caputo { alpha } => {
                let a = *alpha;
                let norm = 1.0 / gamma(1.0 - a);
                (
                    Arc::new(move |t: f64| norm * t.powf(-a)),
                    format!("caputo:{a}"),
                )
            }
            KernelDescriptor::SumOfPowers { terms } => {
                let terms: Vec<(f64, f64)> = terms
                    .iter()
                    .map(|t| (t.c / gamma(1.0 - t.alpha), t.alpha))
                    .collect();
                (
                    Arc::new(move |t: f64| {
                        terms.iter().map(|&(c, a)| c * t.powf(-a)).sum::<f64>()
                    }),
                    "sum_of_powers".to_string(),
                )
            }
            KernelDescriptor::Table { ts, values } => {
                let table = LogLogTable::new(ts.clone(), values.clone())?;
                (
                    Arc::new(move |t: f64| table.eval(t)),
                    "table".to_string(),
                )
            }
        };
        Ok(Kernel {
            eval,
            descriptor: Some(self.clone()),
            label,
            grid,
        })
    }
}

/// Positivity / monotonicity validation summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelValidation {
    pub positive: bool,
    pub non_increasing: bool,
    /// Worst relative increase between adjacent grid points (0 when
    /// perfectly non-increasing up to rounding).
    pub worst_increase: f64,
}

impl Kernel {
    pub fn caputo(alpha: f64, grid: LogGrid) -> Result<Self> {
        KernelDescriptor::Caputo { alpha }.build(grid)
    }

    pub fn sum_of_powers(terms: Vec<PowerTerm>, grid: LogGrid) -> Result<Self> {
        KernelDescriptor::SumOfPowers { terms }.build(grid)
    }

    pub fn table(ts: Vec<f64>, values: Vec<f64>, grid: LogGrid) -> Result<Self> {
        KernelDescriptor::Table { ts, values }.build(grid)
    }

    /// An opaque kernel (step kernels, extension outputs, …). Not
    /// serializable; analytic fast paths are unavailable.
    pub fn custom<F>(f: F, label: impl Into<String>, grid: LogGrid) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Kernel {
            eval: Arc::new(f),
            descriptor: None,
            label: label.into(),
            grid,
        }
    }

    pub fn descriptor(&self) -> Option<&KernelDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn eval_checked(&self, t: f64) -> Result<f64> {
        let v = (self.eval)(t);
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Eval {
                t,
                message: format!("kernel '{}' returned {v}", self.label),
            });
        }
        Ok(v)
    }

    /// Check positivity and monotone decrease on the grid.
    pub fn validate(&self) -> Result<KernelValidation> {
        let mut positive = true;
        let mut worst = 0.0f64;
        let mut prev = f64::INFINITY;
        for i in 0..self.grid.len() {
            let t = self.grid.point(i);
            let v = (self.eval)(t);
            if !v.is_finite() || v <= 0.0 {
                positive = false;
                break;
            }
            worst = worst.max(v / prev - 1.0);
            prev = v;
        }
        Ok(KernelValidation {
            positive,
            non_increasing: positive && worst <= 1e-12,
            worst_increase: worst.max(0.0),
        })
    }

    /// The Laplace exponent `φ(λ) = λ ℒ[κ](λ)` as a scaling function.
    ///
    /// The quadrature backend evaluates `∫_0^∞ e^{-u} κ(u/λ) du` adaptively
    /// per call; internal quadrature failures surface as evaluation errors
    /// (NaN) from the returned function.
    pub fn laplace_phi(&self, method: PhiMethod) -> Result<ScalingFunction> {
        let analytic: Option<EvalFn> = match &self.descriptor {
            Some(KernelDescriptor::Caputo { alpha }) => {
                let a = *alpha;
                Some(Arc::new(move |lam: f64| lam.powf(a)))
            }
            Some(KernelDescriptor::SumOfPowers { terms }) => {
                let terms: Vec<(f64, f64)> = terms.iter().map(|t| (t.c, t.alpha)).collect();
                Some(Arc::new(move |lam: f64| {
                    terms.iter().map(|&(c, a)| c * lam.powf(a)).sum()
                }))
            }
            _ => None,
        };
        let bounds = self.phi_bounds();
        let label = format!("phi({})", self.label);
        let eval: EvalFn = match method {
            PhiMethod::Analytic => analytic.ok_or_else(|| {
                Error::Unsupported(format!(
                    "kernel '{}' has no closed-form exponent",
                    self.label
                ))
            })?,
            PhiMethod::Auto => analytic.unwrap_or_else(|| self.quadrature_phi()),
            PhiMethod::Quadrature => self.quadrature_phi(),
        };
        Ok(
            ScalingFunction::new(move |lam| eval(lam), label, self.grid)
                .with_bounds(bounds),
        )
    }

    fn phi_bounds(&self) -> Option<(f64, f64)> {
        match &self.descriptor {
            Some(KernelDescriptor::Caputo { .. }) | Some(KernelDescriptor::SumOfPowers { .. }) => {
                Some((0.0, 1.0))
            }
            _ => None,
        }
    }

    fn quadrature_phi(&self) -> EvalFn {
        let kernel = self.eval.clone();
        let opts = QuadOpts::default();
        Arc::new(move |lam: f64| {
            match laplace_transform(&|t| kernel(t), lam, &opts) {
                Ok(v) => lam * v,
                Err(_) => f64::NAN,
            }
        })
    }

    /// Generalized inverse `κ^{-1}(y) = inf{s > 0 : κ(s) ≤ y}` to relative
    /// tolerance 1e-12.
    ///
    /// At a jump of `κ` across `y`, bisection of the predicate `κ(s) ≤ y`
    /// converges to the jump location, which is exactly the infimum, so step
    /// kernels need no special casing. Returns 0 when `κ(0+) ≤ y` already
    /// (bounded kernels), and a domain error when `y` is below every grid
    /// value of `κ`.
    pub fn generalized_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Parameter(format!(
                "inverse query must be positive and finite, got {y}"
            )));
        }
        if let Some(KernelDescriptor::Caputo { alpha }) = &self.descriptor {
            // κ(s) = s^{-α}/Γ(1-α) = y  ⇒  s = (Γ(1-α) y)^{-1/α}.
            return Ok((gamma(1.0 - alpha) * y).powf(-1.0 / alpha));
        }
        // Bracket on the grid (κ non-increasing).
        let t_min = self.grid.t_min;
        let t_max = self.grid.t_max;
        if (self.eval)(t_min) <= y {
            // already below the threshold at the left edge: extend the search
            // down to machine range before giving up on a genuine crossing.
            let mut hi = t_min;
            let mut lo = t_min;
            for _ in 0..60 {
                lo /= 4.0;
                if lo < 1e-300 || (self.eval)(lo) > y {
                    break;
                }
                hi = lo;
            }
            if (self.eval)(lo) <= y {
                return Ok(0.0);
            }
            return Ok(self.bisect_inverse(lo, hi, y));
        }
        if (self.eval)(t_max) > y {
            // extend upward similarly
            let mut lo = t_max;
            let mut hi = t_max;
            for _ in 0..60 {
                hi *= 4.0;
                if hi > 1e300 || (self.eval)(hi) <= y {
                    break;
                }
                lo = hi;
            }
            if (self.eval)(hi) > y {
                return Err(Error::Domain {
                    message: format!(
                        "kernel '{}' never falls to {y:.6e} within the searchable range",
                        self.label
                    ),
                    lo: (self.eval)(hi),
                    hi: (self.eval)(1e-300_f64.max(t_min / 1e30)),
                });
            }
            return Ok(self.bisect_inverse(lo, hi, y));
        }
        Ok(self.bisect_inverse(t_min, t_max, y))
    }

    fn bisect_inverse(&self, mut lo: f64, mut hi: f64, y: f64) -> f64 {
        // invariant: κ(lo) > y >= κ(hi)  (κ non-increasing)
        for _ in 0..200 {
            if hi / lo - 1.0 < 1e-12 {
                break;
            }
            let mid = (0.5 * (lo.ln() + hi.ln())).exp();
            if (self.eval)(mid) <= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// A fast evaluator for `y ↦ κ^{-1}(y)` for sampling hot loops:
    /// closed-form for the fractional family, otherwise a precomputed
    /// monotone table with log-log interpolation and end-slope extrapolation.
    pub fn inverse_sampler(&self) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        if let Some(KernelDescriptor::Caputo { alpha }) = &self.descriptor {
            let a = *alpha;
            let g = gamma(1.0 - a);
            return Ok(Arc::new(move |y: f64| (g * y).powf(-1.0 / a)));
        }
        // Tabulate κ on the grid; invert by binary search on the (reversed,
        // increasing) value array.
        let mut ts = Vec::with_capacity(self.grid.len());
        let mut vals = Vec::with_capacity(self.grid.len());
        for i in 0..self.grid.len() {
            let t = self.grid.point(i);
            let v = self.eval_checked(t)?;
            ts.push(t);
            vals.push(v);
        }
        // Strictly decreasing pass (drop flat spots for interpolation).
        let mut inv_y = Vec::new(); // increasing y
        let mut inv_t = Vec::new(); // decreasing t
        for i in (0..ts.len()).rev() {
            if inv_y.last().map_or(true, |&last| vals[i] > last) {
                inv_y.push(vals[i]);
                inv_t.push(ts[i]);
            }
        }
        if inv_y.len() < 2 {
            return Err(Error::Monotonicity(format!(
                "kernel '{}' is flat on the grid; inverse sampler unavailable",
                self.label
            )));
        }
        let ln_y: Vec<f64> = inv_y.iter().map(|v| v.ln()).collect();
        let ln_t: Vec<f64> = inv_t.iter().map(|v| v.ln()).collect();
        Ok(Arc::new(move |y: f64| {
            let x = y.ln();
            let n = ln_y.len();
            let j = match ln_y.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                Ok(j) => return ln_t[j].exp(),
                Err(0) => 1,
                Err(j) if j >= n => n - 1,
                Err(j) => j,
            };
            let w = (x - ln_y[j - 1]) / (ln_y[j] - ln_y[j - 1]);
            (ln_t[j - 1] * (1.0 - w) + ln_t[j] * w).exp()
        }))
    }

    /// The conjugate pair `κ*(t) = κ^{-1}(1/t)` and `ψ(t) = 1/φ^{-1}(1/t)`,
    /// with an equivalence report for `κ*/ψ` over the grid.
    ///
    /// For the fractional family both are exact power laws:
    /// `κ*(t) = Γ(1-α)^{-1/α} t^{1/α}` and `ψ(t) = t^{1/α}`, so the ratio is
    /// the constant `Γ(1-α)^{-1/α}`.
    pub fn kappa_star_psi(&self, method: PhiMethod) -> Result<ConjugatePair> {
        let kappa_star: ScalingFunction = match &self.descriptor {
            Some(KernelDescriptor::Caputo { alpha }) => {
                let a = *alpha;
                let c = gamma(1.0 - a).powf(-1.0 / a);
                ScalingFunction::new(
                    move |t: f64| c * t.powf(1.0 / a),
                    format!("kappa_star({})", self.label),
                    self.grid,
                )
                .with_bounds(Some((1.0 / a, 1.0 / a)))
            }
            _ => {
                let me = self.clone();
                ScalingFunction::new(
                    move |t: f64| me.generalized_inverse(1.0 / t).unwrap_or(f64::NAN),
                    format!("kappa_star({})", self.label),
                    self.grid,
                )
            }
        };
        let psi: ScalingFunction = match &self.descriptor {
            Some(KernelDescriptor::Caputo { alpha }) => {
                let a = *alpha;
                ScalingFunction::new(
                    move |t: f64| t.powf(1.0 / a),
                    format!("psi({})", self.label),
                    self.grid,
                )
                .with_bounds(Some((1.0 / a, 1.0 / a)))
            }
            _ => {
                // ψ = 1/φ^{-1}(1/t) via the tabulated inverse of φ.
                let phi = self.laplace_phi(method)?.tabulated()?;
                let phi_inv = phi.transform(Transform::Inverse)?;
                ScalingFunction::new(
                    move |t: f64| 1.0 / phi_inv.eval(1.0 / t),
                    format!("psi({})", self.label),
                    self.grid,
                )
            }
        };
        let mut ratios = Vec::with_capacity(self.grid.len());
        for i in 0..self.grid.len() {
            let t = self.grid.point(i);
            ratios.push(kappa_star.eval_checked(t)? / psi.eval_checked(t)?);
        }
        let report = EquivalenceReport::from_ratios(&ratios, 0.0, 1.0)?;
        Ok(ConjugatePair {
            kappa_star,
            psi,
            report,
        })
    }

    /// Exact-moment engine `M0(x) = ∫_0^x κ`, `M1(x) = ∫_0^x τ κ(τ) dτ`.
    pub fn moments(&self) -> KernelMoments {
        KernelMoments {
            kernel: self.clone(),
        }
    }

    /// Quantitative verification that `κ` and `φ` carry the same scaling
    /// information.
    pub fn check_kernel_phi_equivalence(
        &self,
        method: PhiMethod,
        lambdas: &[f64],
    ) -> Result<KernelPhiReport> {
        if lambdas.is_empty() {
            return Err(Error::InsufficientData("empty lambda grid".into()));
        }
        let phi = self.laplace_phi(method)?;
        // (a) φ(λ) ≍ κ(1/λ)
        let mut ratios = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            ratios.push(phi.eval_checked(lam)? / self.eval_checked(1.0 / lam)?);
        }
        let ratio_band = EquivalenceReport::from_ratios(&ratios, 0.0, 1.0)?;
        // (b) λ φ'(λ) ≤ φ(λ) ≤ N λ φ'(λ)
        let mut n_fit = f64::NEG_INFINITY;
        let mut lower_margin = f64::INFINITY;
        for &lam in lambdas {
            let d = self.phi_derivative(&phi, lam)?;
            let r = phi.eval_checked(lam)? / (lam * d);
            lower_margin = lower_margin.min(r);
            n_fit = n_fit.max(r);
        }
        // (c) φ in the open class I_o(0, 1)
        let membership = phi
            .clone()
            .with_bounds(Some((0.0, 1.0)))
            .fit_membership()?;
        Ok(KernelPhiReport {
            ratio_band,
            derivative_lower_margin: lower_margin,
            derivative_n_fit: n_fit,
            phi_in_class: membership.member.unwrap_or(false),
            phi_eps_hat: membership.eps_hat.unwrap_or(f64::NAN),
        })
    }

    /// `φ'`: analytic for power families, otherwise central differences with
    /// relative step 1e-6.
    fn phi_derivative(&self, phi: &ScalingFunction, lam: f64) -> Result<f64> {
        match &self.descriptor {
            Some(KernelDescriptor::Caputo { alpha }) => Ok(*alpha * lam.powf(*alpha - 1.0)),
            Some(KernelDescriptor::SumOfPowers { terms }) => Ok(terms
                .iter()
                .map(|t| t.c * t.alpha * lam.powf(t.alpha - 1.0))
                .sum()),
            _ => {
                let h = 1e-6 * lam;
                let hi = phi.eval_checked(lam + h)?;
                let lo = phi.eval_checked(lam - h)?;
                Ok((hi - lo) / (2.0 * h))
            }
        }
    }
}

/// Result of [`Kernel::kappa_star_psi`].
#[derive(Debug, Clone)]
pub struct ConjugatePair {
    pub kappa_star: ScalingFunction,
    pub psi: ScalingFunction,
    /// Band of `κ*(t)/ψ(t)` over the grid.
    pub report: EquivalenceReport,
}

/// Result of [`Kernel::check_kernel_phi_equivalence`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelPhiReport {
    /// Band of `φ(λ)/κ(1/λ)`.
    pub ratio_band: EquivalenceReport,
    /// Minimum of `φ(λ)/(λφ'(λ))` (must be ≥ 1 up to tolerance).
    pub derivative_lower_margin: f64,
    /// Fitted `N` with `φ(λ) ≤ N λ φ'(λ)`.
    pub derivative_n_fit: f64,
    /// Whether `φ` fit inside the open class with exponents (0, 1).
    pub phi_in_class: bool,
    pub phi_eps_hat: f64,
}

/// Cumulative kernel moments with analytic fast paths.
#[derive(Clone)]
pub struct KernelMoments {
    kernel: Kernel,
}

impl KernelMoments {
    /// `M0(x) = ∫_0^x κ(τ) dτ`.
    pub fn m0(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        match &self.kernel.descriptor {
            Some(KernelDescriptor::Caputo { alpha }) => {
                Ok(x.powf(1.0 - alpha) / ((1.0 - alpha) * gamma(1.0 - alpha)))
            }
            Some(KernelDescriptor::SumOfPowers { terms }) => Ok(terms
                .iter()
                .map(|t| t.c * x.powf(1.0 - t.alpha) / ((1.0 - t.alpha) * gamma(1.0 - t.alpha)))
                .sum()),
            _ => {
                let k = self.kernel.eval.clone();
                integrate_from_zero(&move |t| k(t), x, &QuadOpts::default())
            }
        }
    }

    /// `M1(x) = ∫_0^x τ κ(τ) dτ`.
    pub fn m1(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        match &self.kernel.descriptor {
            Some(KernelDescriptor::Caputo { alpha }) => {
                Ok(x.powf(2.0 - alpha) / ((2.0 - alpha) * gamma(1.0 - alpha)))
            }
            Some(KernelDescriptor::SumOfPowers { terms }) => Ok(terms
                .iter()
                .map(|t| t.c * x.powf(2.0 - t.alpha) / ((2.0 - t.alpha) * gamma(1.0 - t.alpha)))
                .sum()),
            _ => {
                let k = self.kernel.eval.clone();
                integrate_from_zero(&move |t| t * k(t), x, &QuadOpts::default())
            }
        }
    }

    /// Convolution `∫_0^{t} κ(t - s) f(s) ds` for piecewise-linear `f` given
    /// by nodes `(ss, fs)` with `ss[0] = 0`, evaluated at `t = ss[n]`.
    ///
    /// Exact in the kernel (uses `M0`/`M1` over each panel), linear in the
    /// data — the product-integration rule shared by the forward solver and
    /// the convolution identity checks.
    pub fn convolve_linear(&self, ss: &[f64], fs: &[f64], n: usize) -> Result<f64> {
        if ss.len() != fs.len() || n >= ss.len() {
            return Err(Error::InsufficientData(format!(
                "convolution nodes mismatch: {} abscissae, {} values, target {n}",
                ss.len(),
                fs.len()
            )));
        }
        let t = ss[n];
        let mut acc = crate::quad::KahanSum::new();
        for j in 0..n {
            let (s0, s1) = (ss[j], ss[j + 1]);
            let (f0, f1) = (fs[j], fs[j + 1]);
            let d = (f1 - f0) / (s1 - s0);
            // f(s) = [f0 + (t - s0) d] - d τ  with  τ = t - s ∈ [t-s1, t-s0]
            let (tau_lo, tau_hi) = (t - s1, t - s0);
            let dm0 = self.m0(tau_hi)? - self.m0(tau_lo)?;
            let dm1 = self.m1(tau_hi)? - self.m1(tau_lo)?;
            acc.add((f0 + (t - s0) * d) * dm0 - d * dm1);
        }
        Ok(acc.value())
    }
}

/// Result of [`extend_kernel`].
pub struct KernelExtension {
    pub kernel: Kernel,
    pub report: ExtensionReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionReport {
    /// Fitted lower/upper exponents of the restricted dilation function.
    pub a_hat: f64,
    pub b_hat: f64,
    /// Margin to the required open interval (-1, 0).
    pub eps_hat: f64,
    /// Relative drop of the extension at the splice point `T`
    /// (`1 − κ(T+)/κ°(T−)`, nonnegative).
    pub splice_gap: f64,
}

/// Extend a kernel known only on `(0, T)` to all of `(0, ∞)` using its
/// restricted dilation structure.
///
/// The restricted dilation function is
/// `s°(λ) = sup{κ°(λt)/κ°(t) : 0 < t < (1 ∧ λ^{-1}) T}`; the kernel is
/// extendable when its fitted exponents lie strictly inside `(-1, 0)`, and
/// the extension is `κ(t) = inf{κ°(r) s°(t/r) : 0 < r < T}` for `t ≥ T`.
///
/// Step discontinuities are handled by right-continuous regularization of
/// the ratio (both arguments sampled on `(x, x(1+1e-6)]` with identical
/// relative offsets, so pure power laws cancel exactly and survive the
/// round trip to relative accuracy better than 1e-8).
pub fn extend_kernel(kernel: &Kernel, t_cut: f64) -> Result<KernelExtension> {
    if !(t_cut > 0.0 && t_cut.is_finite()) {
        return Err(Error::Parameter(format!(
            "cut point must be positive and finite, got {t_cut}"
        )));
    }
    let grid = kernel.grid;
    let raw = kernel.eval.clone();
    // Right-continuous regularization with fixed relative offsets.
    const RC_OFFSETS: [f64; 4] = [2.5e-7, 5e-7, 7.5e-7, 1e-6];
    let rc = move |x: f64| -> f64 {
        let mut m = f64::INFINITY;
        for d in RC_OFFSETS {
            m = m.min(raw(x * (1.0 + d)));
        }
        m
    };
    let rc = Arc::new(rc);

    // Restricted dilation sup over a per-λ geometric sample of the allowed
    // t-range (8 decades below the cap, 256 points, plus the near-endpoint).
    let s_restricted = {
        let rc = rc.clone();
        move |lam: f64| -> f64 {
            let t_hi = (1.0f64.min(1.0 / lam)) * t_cut * (1.0 - 1e-9);
            let t_lo = t_hi * 1e-8;
            let n = 256usize;
            let ln_lo = t_lo.ln();
            let step = (t_hi.ln() - ln_lo) / n as f64;
            let mut best = f64::NEG_INFINITY;
            for i in 0..=n {
                let t = (ln_lo + step * i as f64).exp();
                best = best.max(rc(lam * t) / rc(t));
            }
            best
        }
    };

    // Exponent fit from λ = 2^k, k ∈ [-20, 20].
    let k_max = 20i32;
    let mut s_vals = Vec::new();
    for k in -k_max..=k_max {
        let v = s_restricted(2f64.powi(k));
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Eval {
                t: 2f64.powi(k),
                message: "restricted dilation function not finite/positive".into(),
            });
        }
        s_vals.push(v);
    }
    let (a_hat, b_hat) = crate::scaling::fit_envelope_slopes(&s_vals, k_max);
    let eps_hat = (a_hat - (-1.0)).min(0.0 - b_hat);
    if a_hat <= -1.0 + FIT_TOL {
        return Err(Error::NotExtendable {
            side: BoundSide::Lower,
            detail: format!("fitted lower exponent {a_hat:.4} ≤ -1"),
        });
    }
    if b_hat >= -FIT_TOL {
        return Err(Error::NotExtendable {
            side: BoundSide::Upper,
            detail: format!("fitted upper exponent {b_hat:.4} ≥ 0"),
        });
    }

    // Tabulate s° on a log λ-grid covering every ratio t/r the extension
    // formula can query: λ ∈ [1, t_max / r_min].
    let r_min = grid.t_min.min(t_cut * 1e-8);
    let lam_max = (grid.t_max / r_min).max(4.0);
    let per_decade = 64usize;
    let decades = lam_max.log10().ceil().max(1.0);
    let n_lam = (decades * per_decade as f64) as usize + 1;
    let mut ln_lams = Vec::with_capacity(n_lam);
    let mut ln_svals = Vec::with_capacity(n_lam);
    let ln_lam_max = lam_max.ln();
    for i in 0..=n_lam {
        let ln_lam = ln_lam_max * i as f64 / n_lam as f64;
        ln_lams.push(ln_lam);
        ln_svals.push(s_restricted(ln_lam.exp()).ln());
    }
    let s_table = move |lam: f64| -> f64 {
        let x = lam.ln();
        let n = ln_lams.len();
        let j = match ln_lams.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(j) => return ln_svals[j].exp(),
            Err(0) => 1,
            Err(j) if j >= n => n - 1,
            Err(j) => j,
        };
        let w = (x - ln_lams[j - 1]) / (ln_lams[j] - ln_lams[j - 1]);
        (ln_svals[j - 1] * (1.0 - w) + ln_svals[j] * w).exp()
    };

    // r-grid: grid points below T, plus the near-endpoint.
    let mut r_grid: Vec<f64> = grid.points().into_iter().filter(|&r| r < t_cut).collect();
    r_grid.push(t_cut * (1.0 - 1e-9));

    // Extension table on t ∈ [T, t_max], 64 points/decade, with a running
    // minimum enforcing monotone decrease.
    let t_hi = grid.t_max.max(t_cut * 10.0);
    let n_t = ((t_hi / t_cut).log10().ceil().max(1.0) * per_decade as f64) as usize + 1;
    let mut ext_ts = Vec::with_capacity(n_t + 1);
    let mut ext_vals = Vec::with_capacity(n_t + 1);
    let ln_t_cut = t_cut.ln();
    let ln_t_hi = t_hi.ln();
    let mut running = f64::INFINITY;
    for i in 0..=n_t {
        let t = (ln_t_cut + (ln_t_hi - ln_t_cut) * i as f64 / n_t as f64).exp();
        let mut inf = f64::INFINITY;
        for &r in &r_grid {
            inf = inf.min((kernel.eval)(r) * s_table(t / r));
        }
        running = running.min(inf);
        ext_ts.push(t);
        ext_vals.push(running);
    }
    let kappa_at_cut = kernel.eval_checked(t_cut * (1.0 - 1e-9))?;
    let splice_gap = (1.0 - ext_vals[0] / kappa_at_cut).max(0.0);
    let ext_table = LogLogTable::new(ext_ts, ext_vals)?;

    let inner = kernel.eval.clone();
    let extended = Kernel::custom(
        move |t: f64| {
            if t < t_cut {
                inner(t)
            } else {
                ext_table.eval(t)
            }
        },
        format!("extend({}, T={t_cut})", kernel.label),
        grid,
    );
    Ok(KernelExtension {
        kernel: extended,
        report: ExtensionReport {
            a_hat,
            b_hat,
            eps_hat,
            splice_gap,
        },
    })
}
