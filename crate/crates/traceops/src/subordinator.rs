//! Subordinators attached to a completely monotone kernel: exact stable
//! sampling, compound-Poisson approximation with small-jump drift, the
//! relaxation function `Θ(t, λ) = λ ∫_0^∞ e^{-λr} P(S_r ≥ t) dr`, the
//! potential function `ϰ(t) = ∫_0^∞ P(S_r ≤ t) dr`, and the Sonine
//! convolution identities pairing `κ` with `ϰ`.
//!
//! The subordinator `S` is the increasing Lévy process with
//! `E[e^{-λ S_r}] = e^{-r φ(λ)}`, where `φ(λ) = λ ℒ[κ](λ)` and `κ` is the
//! tail of the Lévy measure. Everything here is paired: closed forms where
//! they exist (`α`-stable, and elementary formulas at `α = 1/2`), Monte
//! Carlo estimators everywhere, and quantitative comparisons between them.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelDescriptor, KernelMoments};
use crate::quad::KahanSum;
use crate::report::{EquivalenceReport, MCEstimate};
use crate::scaling::ScalingFunction;
use crate::special::{erf, erfc, erfcx, gamma};

/// Closed forms for the `α = 1/2` stable subordinator
/// (`E[e^{-λ S_r}] = e^{-r √λ}`).
pub mod closed_half {
    use super::*;

    /// `P(S_r ≤ t) = erfc(r / (2√t))`.
    pub fn cdf(r: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        erfc(r / (2.0 * t.sqrt()))
    }

    /// `P(S_r ≥ t) = erf(r / (2√t))`.
    pub fn survival(r: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        erf(r / (2.0 * t.sqrt()))
    }

    /// Relaxation function `Θ(t, λ) = erfcx(λ √t)`; `Θ(0, λ) = 1` exactly.
    pub fn theta(t: f64, lambda: f64) -> f64 {
        erfcx(lambda * t.sqrt())
    }

    /// Potential function `ϰ(t) = √t / Γ(3/2)`.
    pub fn varkappa(t: f64) -> f64 {
        t.sqrt() / gamma(1.5)
    }
}

/// `ϰ(t) = t^α / Γ(1 + α)` for the α-stable subordinator.
pub fn stable_varkappa(alpha: f64, t: f64) -> f64 {
    t.powf(alpha) / gamma(1.0 + alpha)
}

/// Sampling strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerStrategy {
    /// Exact stable sampling for the fractional family, compound Poisson
    /// otherwise.
    #[default]
    Auto,
    Stable,
    CompoundPoisson,
}

/// Exact α-stable subordinator sampler (Kanter's representation).
///
/// With `U ~ Uniform(0, π)`, `W ~ Exp(1)` and
/// `a(u) = sin((1-α)u) sin(αu)^{α/(1-α)} / sin(u)^{1/(1-α)}`,
/// the variable `X = (a(U)/W)^{(1-α)/α}` satisfies
/// `E[e^{-sX}] = e^{-s^α}`, and `S_r = r^{1/α} X`.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    alpha: f64,
}

impl StableSampler {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "stable index must lie in (0,1), got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// One draw of the normalized variable `X` (so `S_1 = X`), computed in
    /// log space for stability near the ends of `(0, π)`.
    pub fn sample_x<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha;
        let u: f64 = std::f64::consts::PI * rng.random::<f64>();
        let w: f64 = rng.sample(Exp1);
        let ln_a = ((1.0 - a) * u).sin().ln() + a / (1.0 - a) * (a * u).sin().ln()
            - 1.0 / (1.0 - a) * u.sin().ln();
        ((ln_a - w.ln()) * (1.0 - a) / a).exp()
    }

    /// One draw of `S_r`.
    pub fn sample<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        r.powf(1.0 / self.alpha) * self.sample_x(rng)
    }
}

/// Compound-Poisson approximation for a general kernel: jumps larger than
/// the cutoff `δ` are sampled exactly from the Lévy measure (intensity
/// `κ(δ)`, inverse-transform sizes `κ^{-1}(κ(δ) U)`), jumps below `δ` are
/// replaced by their mean drift `b_δ = ∫_0^δ κ(s) ds − δ κ(δ)`.
#[derive(Clone)]
pub struct CompoundPoissonSampler {
    rate: f64,
    drift: f64,
    delta: f64,
    inverse: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CompoundPoissonSampler {
    pub fn new(kernel: &Kernel, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "cutoff must be positive and finite, got {delta}"
            )));
        }
        let rate = kernel.eval(delta);
        if !(rate.is_finite()) {
            return Err(Error::Eval {
                t: delta,
                message: "kernel not finite at the cutoff".into(),
            });
        }
        if rate <= 0.0 {
            return Err(Error::CutoffTooLarge { delta });
        }
        let drift = kernel.moments().m0(delta)? - delta * rate;
        if !(drift.is_finite() && drift >= -1e-12) {
            return Err(Error::Eval {
                t: delta,
                message: format!("small-jump drift came out as {drift}"),
            });
        }
        Ok(Self {
            rate,
            drift: drift.max(0.0),
            delta,
            inverse: kernel.inverse_sampler()?,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// One draw of (the approximation to) `S_r`.
    pub fn sample<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let mean = self.rate * r;
        let n = Poisson::new(mean)
            .map(|p| p.sample(rng))
            .unwrap_or(0.0) as u64;
        let mut acc = self.drift * r;
        for _ in 0..n {
            let u: f64 = rng.random();
            // u ∈ [0,1): shift away from 0 to keep κ^{-1} finite.
            let y = self.rate * u.max(1e-300);
            acc += (self.inverse)(y);
        }
        acc
    }
}

/// A subordinator sampler of either kind behind one interface.
#[derive(Clone)]
pub enum SubordinatorSampler {
    Stable(StableSampler),
    CompoundPoisson(CompoundPoissonSampler),
}

impl SubordinatorSampler {
    /// Build for a kernel according to the strategy. `delta` is the
    /// compound-Poisson cutoff (ignored by the stable path).
    pub fn for_kernel(kernel: &Kernel, strategy: SamplerStrategy, delta: f64) -> Result<Self> {
        match strategy {
            SamplerStrategy::Stable => match kernel.descriptor() {
                Some(KernelDescriptor::Caputo { alpha }) => {
                    Ok(Self::Stable(StableSampler::new(*alpha)?))
                }
                _ => Err(Error::Unsupported(
                    "exact stable sampling needs the fractional kernel family".into(),
                )),
            },
            SamplerStrategy::CompoundPoisson => Ok(Self::CompoundPoisson(
                CompoundPoissonSampler::new(kernel, delta)?,
            )),
            SamplerStrategy::Auto => match kernel.descriptor() {
                Some(KernelDescriptor::Caputo { alpha }) => {
                    Ok(Self::Stable(StableSampler::new(*alpha)?))
                }
                _ => Ok(Self::CompoundPoisson(CompoundPoissonSampler::new(
                    kernel, delta,
                )?)),
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> f64 {
        match self {
            Self::Stable(s) => s.sample(r, rng),
            Self::CompoundPoisson(s) => s.sample(r, rng),
        }
    }

    pub fn strategy_name(&self) -> &'static str {
        match self {
            Self::Stable(_) => "stable",
            Self::CompoundPoisson(_) => "compound_poisson",
        }
    }
}

/// One cell of the Laplace-transform verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaplaceCheck {
    pub r: f64,
    pub lambda: f64,
    /// `e^{-r φ(λ)}`.
    pub target: f64,
    pub estimate: MCEstimate,
    /// `|target − mean| ≤ 3 · half_width`.
    pub covered: bool,
}

/// Monte Carlo check of `E[e^{-λ S_r}] = e^{-r φ(λ)}` on a grid of
/// `(r, λ)` combinations.
pub fn check_laplace<R: Rng + ?Sized>(
    sampler: &SubordinatorSampler,
    phi: &ScalingFunction,
    combos: &[(f64, f64)],
    n: usize,
    rng: &mut R,
) -> Result<Vec<LaplaceCheck>> {
    if n < 100 {
        return Err(Error::Budget(format!(
            "need at least 100 samples for a meaningful CI, got {n}"
        )));
    }
    let mut out = Vec::with_capacity(combos.len());
    for &(r, lambda) in combos {
        let target = (-r * phi.eval_checked(lambda)?).exp();
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let s = sampler.sample(r, rng);
            samples.push((-lambda * s).exp());
        }
        let estimate = MCEstimate::from_samples(&samples)?;
        let covered = estimate.covers(target, 3.0);
        out.push(LaplaceCheck {
            r,
            lambda,
            target,
            estimate,
            covered,
        });
    }
    Ok(out)
}

/// Monte Carlo estimate of `Θ(t, λ)`: draw `R ~ Exp(λ)` and average the
/// indicator of `S_R ≥ t`.
pub fn theta_mc<R: Rng + ?Sized>(
    sampler: &SubordinatorSampler,
    t: f64,
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<MCEstimate> {
    let curve = theta_mc_curve(sampler, &[t], lambda, n, rng)?;
    Ok(curve.into_iter().next().unwrap())
}

/// Θ estimates on a whole `t`-grid from one common set of `(R, S_R)` draws
/// (common random numbers keep the curve monotone in `t`).
pub fn theta_mc_curve<R: Rng + ?Sized>(
    sampler: &SubordinatorSampler,
    ts: &[f64],
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<MCEstimate>> {
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!(
            "rate λ must be positive, got {lambda}"
        )));
    }
    if n < 100 {
        return Err(Error::Budget(format!(
            "need at least 100 samples for a meaningful CI, got {n}"
        )));
    }
    let mut s_draws = Vec::with_capacity(n);
    for _ in 0..n {
        let r: f64 = rng.sample::<f64, _>(Exp1) / lambda;
        s_draws.push(sampler.sample(r, rng));
    }
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let hits = s_draws.iter().filter(|&&s| s >= t).count();
        let p = hits as f64 / n as f64;
        // binomial half-width
        let half = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
        out.push(MCEstimate {
            value: p,
            half_width_95: half,
            n_samples: n as u64,
        });
    }
    Ok(out)
}

/// Report of the structural checks on a relaxation function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaPropertiesReport {
    /// `Θ(0, λ)` maximized over the λ grid (must be 1).
    pub value_at_zero: f64,
    pub monotone_in_t: bool,
    pub monotone_in_lambda: bool,
    /// Band of `Θ(t,λ) / (1 ∧ φ(1/t)/λ)` over the grid.
    pub band: EquivalenceReport,
    /// Fitted constant: `min λΘ / (φ(1/t)(1 − Θ))` over grid points with
    /// `Θ` bounded away from 1.
    pub c2_fit: f64,
}

/// Check positivity/normalization/monotonicity of `Θ` and its two-sided
/// comparison with `1 ∧ φ(1/t)/λ`.
pub fn check_theta_properties(
    theta: &dyn Fn(f64, f64) -> f64,
    phi: &ScalingFunction,
    t_grid: &[f64],
    lambda_grid: &[f64],
) -> Result<ThetaPropertiesReport> {
    if t_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::InsufficientData("empty Θ check grid".into()));
    }
    let mut value_at_zero = f64::NEG_INFINITY;
    let mut monotone_in_t = true;
    let mut monotone_in_lambda = true;
    let mut ratios = Vec::new();
    let mut c2 = f64::INFINITY;
    for &lam in lambda_grid {
        value_at_zero = value_at_zero.max(theta(0.0, lam));
        let mut prev = f64::INFINITY;
        for &t in t_grid {
            let th = theta(t, lam);
            if th > prev + 1e-9 {
                monotone_in_t = false;
            }
            prev = th;
            let envelope = (phi.eval_checked(1.0 / t)? / lam).min(1.0);
            ratios.push(th / envelope);
            if 1.0 - th > 1e-9 {
                c2 = c2.min(lam * th / (phi.eval_checked(1.0 / t)? * (1.0 - th)));
            }
        }
    }
    for &t in t_grid {
        let mut prev = f64::INFINITY;
        for &lam in lambda_grid {
            let th = theta(t, lam);
            if th > prev + 1e-9 {
                monotone_in_lambda = false;
            }
            prev = th;
        }
    }
    let band = EquivalenceReport::from_ratios(&ratios, 0.0, 1.0)?;
    Ok(ThetaPropertiesReport {
        value_at_zero,
        monotone_in_t,
        monotone_in_lambda,
        band,
        c2_fit: c2,
    })
}

/// Result of the integrated eigenfunction identity check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenfunctionReport {
    /// Worst relative residual over all λ and all grid times, normalized by
    /// the sup of the right-hand side for that λ.
    pub max_rel_residual: f64,
    /// `(λ, residual)` pairs.
    pub per_lambda: Vec<(f64, f64)>,
}

/// Verify the integrated relaxation equation
/// `∫_0^t κ(t−s)(Θ(s,λ) − 1) ds = −λ ∫_0^t Θ(s,λ) ds`
/// with kernel-exact product integration on the left and trapezoidal
/// integration on the right, over `m` panels on `[0, t_max]` graded
/// cubically into zero (`s_j = t_max (j/m)^3`) so the square-root-type
/// short-time layer of `Θ` is resolved even for large `λ`.
pub fn check_eigenfunction_identity(
    kernel: &Kernel,
    theta: &dyn Fn(f64, f64) -> f64,
    lambdas: &[f64],
    t_max: f64,
    m: usize,
) -> Result<EigenfunctionReport> {
    if m < 8 {
        return Err(Error::InsufficientData(format!(
            "need at least 8 panels, got {m}"
        )));
    }
    if !(t_max > 0.0) {
        return Err(Error::Parameter(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    let moments = kernel.moments();
    let ss: Vec<f64> = (0..=m)
        .map(|i| t_max * (i as f64 / m as f64).powi(3))
        .collect();
    let mut per_lambda = Vec::with_capacity(lambdas.len());
    let mut worst = 0.0f64;
    for &lam in lambdas {
        let th: Vec<f64> = ss.iter().map(|&s| theta(s, lam)).collect();
        let centered: Vec<f64> = th.iter().map(|&v| v - 1.0).collect();
        // cumulative trapezoid of Θ
        let mut cum = vec![0.0; ss.len()];
        let mut acc = KahanSum::new();
        for i in 1..ss.len() {
            acc.add(0.5 * (th[i] + th[i - 1]) * (ss[i] - ss[i - 1]));
            cum[i] = acc.value();
        }
        let scale = lam * cum[m]; // sup over t of |RHS|
        let mut lam_worst = 0.0f64;
        for i in 1..=m {
            let lhs = moments.convolve_linear(&ss, &centered, i)?;
            let rhs = -lam * cum[i];
            lam_worst = lam_worst.max((lhs - rhs).abs() / scale.max(1e-300));
        }
        per_lambda.push((lam, lam_worst));
        worst = worst.max(lam_worst);
    }
    Ok(EigenfunctionReport {
        max_rel_residual: worst,
        per_lambda,
    })
}

/// Result of the Sonine pairing checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SonineReport {
    /// Worst absolute error of `∫_0^t κ(t−s) dϰ(s) = 1` over the probe times.
    pub stieltjes_max_err: f64,
    /// Worst relative error of `∫_0^t κ(t−s) ϰ(s) ds = t`.
    pub convolution_max_rel_err: f64,
}

/// Verify the Sonine identities pairing a kernel with a potential function:
/// `(κ * dϰ)(t) = 1` and `(κ * ϰ)(t) = t`, using a piecewise-linear `ϰ` on
/// `m` uniform panels per probe time and kernel-exact panel moments.
pub fn sonine_check(
    kernel: &Kernel,
    varkappa: &dyn Fn(f64) -> f64,
    t_grid: &[f64],
    m: usize,
) -> Result<SonineReport> {
    if t_grid.is_empty() {
        return Err(Error::InsufficientData("empty probe grid".into()));
    }
    if m < 8 {
        return Err(Error::InsufficientData(format!(
            "need at least 8 panels, got {m}"
        )));
    }
    let moments: KernelMoments = kernel.moments();
    let mut stieltjes_err = 0.0f64;
    let mut conv_err = 0.0f64;
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(Error::Parameter(format!("probe time must be > 0, got {t}")));
        }
        let ss: Vec<f64> = (0..=m).map(|i| t * i as f64 / m as f64).collect();
        let vk: Vec<f64> = ss.iter().map(|&s| varkappa(s)).collect();
        // Stieltjes: Σ_j slope_j (M0(t - s_j) - M0(t - s_{j+1})).
        let mut acc = KahanSum::new();
        for j in 0..m {
            let slope = (vk[j + 1] - vk[j]) / (ss[j + 1] - ss[j]);
            let dm0 = moments.m0(t - ss[j])? - moments.m0(t - ss[j + 1])?;
            acc.add(slope * dm0);
        }
        stieltjes_err = stieltjes_err.max((acc.value() - 1.0).abs());
        // Convolution: ∫ κ(t-s) ϰ(s) ds = t.
        let conv = moments.convolve_linear(&ss, &vk, m)?;
        conv_err = conv_err.max((conv / t - 1.0).abs());
    }
    Ok(SonineReport {
        stieltjes_max_err: stieltjes_err,
        convolution_max_rel_err: conv_err,
    })
}

/// Monte Carlo check of the potential function for the stable subordinator:
/// `ϰ(t) = t^α E[X^{-α}]` with one reusable sample set of `X`
/// (`1{S_r ≤ t} ⇔ r ≤ (t/X)^α` turns the `r`-integral into `(t/X)^α`).
pub fn stable_varkappa_mc<R: Rng + ?Sized>(
    alpha: f64,
    ts: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, MCEstimate)>> {
    let sampler = StableSampler::new(alpha)?;
    if n < 100 {
        return Err(Error::Budget(format!(
            "need at least 100 samples for a meaningful CI, got {n}"
        )));
    }
    let weights: Vec<f64> = (0..n)
        .map(|_| sampler.sample_x(rng).powf(-alpha))
        .collect();
    let base = MCEstimate::from_samples(&weights)?;
    Ok(ts
        .iter()
        .map(|&t| {
            let s = t.powf(alpha);
            (
                t,
                MCEstimate {
                    value: s * base.value,
                    half_width_95: s * base.half_width_95,
                    n_samples: n as u64,
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LogGrid;
    use crate::kernel::PhiMethod;
    use crate::rng::task_rng;
    use approx::assert_relative_eq;

    fn half_kernel() -> Kernel {
        Kernel::caputo(0.5, LogGrid::default()).unwrap()
    }

    #[test]
    fn closed_half_values() {
        // Θ(1, 1) = erfcx(1), Θ(1, 10) = erfcx(10).
        assert_relative_eq!(
            closed_half::theta(1.0, 1.0),
            0.427_583_576_155_807_004,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            closed_half::theta(1.0, 10.0),
            0.056_140_992_743_822_586,
            max_relative = 1e-13
        );
        assert_eq!(closed_half::theta(0.0, 3.7), 1.0);
        // ϰ(1) = 1/Γ(3/2) = 2/√π.
        assert_relative_eq!(
            closed_half::varkappa(1.0),
            2.0 / std::f64::consts::PI.sqrt(),
            max_relative = 1e-14
        );
        // CDF + survival = 1.
        assert_relative_eq!(
            closed_half::cdf(1.5, 0.7) + closed_half::survival(1.5, 0.7),
            1.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn stable_sampler_laplace_transform() {
        // E[e^{-λ S_r}] = e^{-r λ^α} at several (r, λ, α).
        for &alpha in &[0.3, 0.5, 0.8] {
            let sampler =
                SubordinatorSampler::Stable(StableSampler::new(alpha).unwrap());
            let phi = ScalingFunction::power(alpha, LogGrid::default());
            let mut rng = task_rng(7, alpha.to_bits());
            let combos = [(0.5, 1.0), (1.0, 1.0), (2.0, 3.0)];
            let checks = check_laplace(&sampler, &phi, &combos, 40_000, &mut rng).unwrap();
            for c in &checks {
                assert!(
                    c.covered,
                    "α={alpha} (r={}, λ={}): target {} vs {} ± {}",
                    c.r, c.lambda, c.target, c.estimate.value, c.estimate.half_width_95
                );
            }
        }
    }

    #[test]
    fn stable_sampler_zero_time() {
        let s = StableSampler::new(0.5).unwrap();
        let mut rng = task_rng(1, 1);
        assert_eq!(s.sample(0.0, &mut rng), 0.0);
    }

    #[test]
    fn compound_poisson_matches_laplace() {
        let kernel = half_kernel();
        let sampler = SubordinatorSampler::for_kernel(
            &kernel,
            SamplerStrategy::CompoundPoisson,
            1e-3,
        )
        .unwrap();
        let phi = kernel.laplace_phi(PhiMethod::Analytic).unwrap();
        let mut rng = task_rng(11, 0);
        let combos = [(0.5, 0.5), (1.0, 1.0), (2.0, 2.0)];
        let checks = check_laplace(&sampler, &phi, &combos, 40_000, &mut rng).unwrap();
        for c in &checks {
            assert!(
                c.covered,
                "(r={}, λ={}): target {} vs {} ± {}",
                c.r, c.lambda, c.target, c.estimate.value, c.estimate.half_width_95
            );
        }
    }

    #[test]
    fn compound_poisson_drift_closed_form() {
        // b_δ = α δ^{1-α} / Γ(2-α) for the fractional kernel.
        let kernel = half_kernel();
        let cp = CompoundPoissonSampler::new(&kernel, 1e-3).unwrap();
        let want = 0.5 * 1e-3f64.powf(0.5) / gamma(1.5);
        assert_relative_eq!(cp.drift(), want, max_relative = 1e-10);
        // rate = κ(δ)
        assert_relative_eq!(cp.rate(), kernel.eval(1e-3), max_relative = 1e-14);
    }

    #[test]
    fn compound_poisson_cutoff_errors() {
        // A kernel that is exactly zero beyond t = 1: cutoff too large.
        let g = LogGrid::new(1e-6, 1e2, 16).unwrap();
        let k = Kernel::custom(|t: f64| if t <= 1.0 { 1.0 } else { 0.0 }, "dead", g);
        assert!(matches!(
            CompoundPoissonSampler::new(&k, 2.0),
            Err(Error::CutoffTooLarge { .. })
        ));
        assert!(CompoundPoissonSampler::new(&half_kernel(), 0.0).is_err());
    }

    #[test]
    fn mc_cdf_matches_closed_form_half() {
        // P(S_1 ≤ 1) = erfc(1/2).
        let s = StableSampler::new(0.5).unwrap();
        let mut rng = task_rng(3, 9);
        let n = 60_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| if s.sample(1.0, &mut rng) <= 1.0 { 1.0 } else { 0.0 })
            .collect();
        let est = MCEstimate::from_samples(&samples).unwrap();
        assert!(
            est.covers(closed_half::cdf(1.0, 1.0), 3.0),
            "got {} ± {}, want {}",
            est.value,
            est.half_width_95,
            closed_half::cdf(1.0, 1.0)
        );
    }

    #[test]
    fn theta_mc_matches_closed_form() {
        let sampler = SubordinatorSampler::Stable(StableSampler::new(0.5).unwrap());
        let mut rng = task_rng(5, 2);
        for &(t, lam) in &[(0.5, 1.0), (1.0, 2.0), (2.0, 0.5)] {
            let est = theta_mc(&sampler, t, lam, 60_000, &mut rng).unwrap();
            let want = closed_half::theta(t, lam);
            assert!(
                est.covers(want, 3.0),
                "Θ({t},{lam}): got {} ± {}, want {want}",
                est.value,
                est.half_width_95
            );
        }
    }

    #[test]
    fn theta_properties_closed_form() {
        let phi = ScalingFunction::power(0.5, LogGrid::default());
        let t_grid: Vec<f64> = (-8..=8).map(|k| 2f64.powi(k)).collect();
        let lam_grid: Vec<f64> = (-4..=4).map(|k| 2f64.powi(k)).collect();
        let rep = check_theta_properties(
            &|t, lam| closed_half::theta(t, lam),
            &phi,
            &t_grid,
            &lam_grid,
        )
        .unwrap();
        assert_eq!(rep.value_at_zero, 1.0);
        assert!(rep.monotone_in_t);
        assert!(rep.monotone_in_lambda);
        assert!(
            rep.band.ratio_min >= 0.4 && rep.band.ratio_max <= 1.1,
            "band [{}, {}]",
            rep.band.ratio_min,
            rep.band.ratio_max
        );
        assert!(rep.c2_fit > 0.0 && rep.c2_fit.is_finite());
    }

    #[test]
    fn eigenfunction_identity_closed_form() {
        let kernel = half_kernel();
        let rep = check_eigenfunction_identity(
            &kernel,
            &|t, lam| closed_half::theta(t, lam),
            &[0.1, 1.0, 10.0],
            10.0,
            512,
        )
        .unwrap();
        assert!(
            rep.max_rel_residual < 1e-3,
            "residual {}",
            rep.max_rel_residual
        );
    }

    #[test]
    fn sonine_identities_half() {
        let kernel = half_kernel();
        let t_grid: Vec<f64> = (1..=20).map(|i| 0.5 * i as f64).collect();
        let rep = sonine_check(&kernel, &closed_half::varkappa, &t_grid, 2048).unwrap();
        assert!(rep.stieltjes_max_err < 1e-3, "stieltjes {}", rep.stieltjes_max_err);
        assert!(
            rep.convolution_max_rel_err < 1e-3,
            "convolution {}",
            rep.convolution_max_rel_err
        );
    }

    #[test]
    fn sonine_identities_other_alpha() {
        let kernel = Kernel::caputo(0.3, LogGrid::default()).unwrap();
        let vk = |t: f64| stable_varkappa(0.3, t);
        let rep = sonine_check(&kernel, &vk, &[0.5, 1.0, 5.0], 2048).unwrap();
        assert!(rep.stieltjes_max_err < 1e-3);
        assert!(rep.convolution_max_rel_err < 1e-3);
    }

    #[test]
    fn varkappa_mc_covers_closed_form() {
        let mut rng = task_rng(21, 4);
        let checks = stable_varkappa_mc(0.5, &[0.5, 1.0, 2.0], 60_000, &mut rng).unwrap();
        for (t, est) in checks {
            let want = stable_varkappa(0.5, t);
            assert!(
                est.covers(want, 3.0),
                "ϰ({t}): got {} ± {}, want {want}",
                est.value,
                est.half_width_95
            );
        }
    }

    #[test]
    fn theta_curve_is_monotone_by_construction() {
        let sampler = SubordinatorSampler::Stable(StableSampler::new(0.7).unwrap());
        let mut rng = task_rng(2, 2);
        let ts = [0.1, 0.5, 1.0, 2.0, 5.0];
        let curve = theta_mc_curve(&sampler, &ts, 1.0, 5_000, &mut rng).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
    }
}
