//! Forward solving of the kernel-convolution evolution equation, the
//! explicit half-line extension constructions (exponential and relaxation
//! profiles), Laplace-transform trace bounds, round-trip constant tracking,
//! and the finite-interval variants.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, LogGrid};
use crate::interp::{canonical_blocks, dyadic_norm, Element, InterpolationCouple};
use crate::kernel::{Kernel, KernelDescriptor, PhiMethod};
use crate::quad::{integrate_from_zero, integrate_half_line, integrate_to_infinity, KahanSum, QuadOpts};
use crate::rng::task_rng;
use crate::scaling::ScalingFunction;
use crate::special::gamma;
use crate::subordinator::{closed_half, SamplerStrategy, SubordinatorSampler};
use crate::weights::Weight;

const LN2: f64 = std::f64::consts::LN_2;

/// 8-point Gauss–Legendre rule on [-1, 1].
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

// ---------------------------------------------------------------------------
// Forward Volterra solving
// ---------------------------------------------------------------------------

/// Result of [`solve_volterra_forward`]: the recovered `u`, the intermediate
/// resolvent integral `v(t) = ∫_0^t ϰ(t-s) f(s) ds`, the residual of the
/// defining equation, and the relative Monte-Carlo half-width of the
/// resolvent kernel (zero for closed forms).
#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub u: GridFunction,
    pub v: GridFunction,
    pub residual: f64,
    pub ci_relative: f64,
}

/// Cumulative moments of a power resolvent kernel `ϰ(t) = c·t^α`:
/// `N0(x) = ∫_0^x ϰ` and `N1(x) = ∫_0^x τ ϰ(τ) dτ`.
struct ResolventMoments {
    amplitude: f64,
    alpha: f64,
    ci_relative: f64,
}

impl ResolventMoments {
    /// Closed form for `ϰ(t) = t^α/Γ(1+α)`.
    fn stable(alpha: f64) -> Self {
        Self::power(1.0 / gamma(1.0 + alpha), alpha, 0.0)
    }

    fn power(amplitude: f64, alpha: f64, ci_relative: f64) -> Self {
        Self {
            amplitude,
            alpha,
            ci_relative,
        }
    }

    fn n0(&self, x: f64) -> f64 {
        self.amplitude * x.powf(1.0 + self.alpha) / (1.0 + self.alpha)
    }

    fn n1(&self, x: f64) -> f64 {
        self.amplitude * x.powf(2.0 + self.alpha) / (2.0 + self.alpha)
    }

    /// Product integration `∫_0^{ss[n]} ϰ(t - s) f(s) ds` for piecewise
    /// linear `f`, exact in `ϰ` through the panel moments.
    fn convolve(&self, ss: &[f64], fs: &[f64], n: usize) -> f64 {
        let t = ss[n];
        let mut acc = KahanSum::new();
        for j in 0..n {
            let (s0, s1) = (ss[j], ss[j + 1]);
            let (f0, f1) = (fs[j], fs[j + 1]);
            let d = (f1 - f0) / (s1 - s0);
            let (tau_lo, tau_hi) = (t - s1, t - s0);
            let dm0 = self.n0(tau_hi) - self.n0(tau_lo);
            let dm1 = self.n1(tau_hi) - self.n1(tau_lo);
            acc.add((f0 + (t - s0) * d) * dm0 - d * dm1);
        }
        acc.value()
    }
}

fn caputo_alpha(kernel: &Kernel) -> Option<f64> {
    match kernel.descriptor() {
        Some(KernelDescriptor::Caputo { alpha }) => Some(*alpha),
        _ => None,
    }
}

/// Solve `∫_0^t κ(t-s)(u(s) - u_0) ds = ∫_0^t f(s) ds` forward on the grid
/// of `f` (which must start at `t = 0`): the resolvent form turns it into
/// `v(t) = ∫_0^t ϰ(t-s) f(s) ds` with `u = u_0 + dv/dt` by three-point
/// differentiation. Requires a kernel with a closed-form resolvent.
pub fn solve_volterra_forward(kernel: &Kernel, u0: f64, f: &GridFunction) -> Result<VolterraSolution> {
    let alpha = caputo_alpha(kernel).ok_or_else(|| {
        Error::Unsupported(
            "forward solving needs a closed-form resolvent kernel; use the Monte-Carlo variant otherwise"
                .into(),
        )
    })?;
    solve_with_resolvent(kernel, u0, f, &ResolventMoments::stable(alpha))
}

/// [`solve_volterra_forward`] with the resolvent amplitude estimated by
/// Monte Carlo from subordinator draws (`ϰ(t) = ϰ(1)·t^α` by
/// self-similarity); errors as inconclusive when the confidence band is
/// too wide to certify the stated tolerance.
pub fn solve_volterra_forward_mc(
    kernel: &Kernel,
    u0: f64,
    f: &GridFunction,
    n_samples: usize,
    seed: u64,
) -> Result<VolterraSolution> {
    let alpha = caputo_alpha(kernel).ok_or_else(|| {
        Error::Unsupported("Monte-Carlo resolvents are built from stable subordinators".into())
    })?;
    let mut rng = task_rng(seed, 0);
    let est = &crate::subordinator::stable_varkappa_mc(alpha, &[1.0], n_samples, &mut rng)?[0].1;
    let rel = est.half_width_95 / est.value;
    if !(rel.is_finite() && rel < 0.05) {
        return Err(Error::Inconclusive(format!(
            "resolvent kernel confidence band is too wide: ±{:.2}%",
            100.0 * rel
        )));
    }
    solve_with_resolvent(kernel, u0, f, &ResolventMoments::power(est.value, alpha, rel))
}

fn solve_with_resolvent(
    kernel: &Kernel,
    u0: f64,
    f: &GridFunction,
    res: &ResolventMoments,
) -> Result<VolterraSolution> {
    if f.dim() != 1 {
        return Err(Error::Parameter("forward solving expects scalar data".into()));
    }
    let m = f.len();
    if m < 3 {
        return Err(Error::InsufficientData("need at least 3 time nodes".into()));
    }
    if f.ts[0] != 0.0 {
        return Err(Error::Grid("forward grid must start at t = 0".into()));
    }
    let fs: Vec<f64> = (0..m).map(|i| f.y(i)).collect();
    let mut vs = vec![0.0f64; m];
    for i in 1..m {
        vs[i] = res.convolve(&f.ts, &fs, i);
    }
    // u = u_0 + dv/dt by three-point stencils (central inside, one-sided at
    // the ends); nonuniform-grid form.
    let mut us = vec![0.0f64; m];
    let d_at = |i: usize| -> f64 {
        if i == 0 {
            let (h1, h2) = (f.ts[1] - f.ts[0], f.ts[2] - f.ts[1]);
            let a = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
            let b = (h1 + h2) / (h1 * h2);
            let c = -h1 / (h2 * (h1 + h2));
            a * vs[0] + b * vs[1] + c * vs[2]
        } else if i == m - 1 {
            let (h1, h2) = (f.ts[m - 2] - f.ts[m - 3], f.ts[m - 1] - f.ts[m - 2]);
            let a = h2 / (h1 * (h1 + h2));
            let b = -(h1 + h2) / (h1 * h2);
            let c = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
            a * vs[m - 3] + b * vs[m - 2] + c * vs[m - 1]
        } else {
            let (h1, h2) = (f.ts[i] - f.ts[i - 1], f.ts[i + 1] - f.ts[i]);
            let a = -h2 / (h1 * (h1 + h2));
            let b = (h2 - h1) / (h1 * h2);
            let c = h1 / (h2 * (h1 + h2));
            a * vs[i - 1] + b * vs[i] + c * vs[i + 1]
        }
    };
    for (i, u) in us.iter_mut().enumerate() {
        *u = u0 + d_at(i);
    }
    let u = GridFunction::scalar(f.ts.clone(), us)?;
    let v = GridFunction::scalar(f.ts.clone(), vs)?;
    let residual = residual_check(kernel, &u, f, u0)?;
    Ok(VolterraSolution {
        u,
        v,
        residual,
        ci_relative: res.ci_relative,
    })
}

/// Maximal relative residual of the two equivalent integral forms of the
/// evolution equation on the shared grid:
/// `∫_0^t κ(t-s)(u(s)-u_0) ds = ∫_0^t f ds` and (when the resolvent is in
/// closed form) `∫_0^t (u(s)-u_0) ds = ∫_0^t ϰ(t-s) f(s) ds`. Residuals
/// are normalized by the largest right-hand side of each form.
pub fn residual_check(kernel: &Kernel, u: &GridFunction, f: &GridFunction, u0: f64) -> Result<f64> {
    if u.len() != f.len() || u.ts != f.ts {
        return Err(Error::Grid("u and f must share one grid".into()));
    }
    if u.dim() != 1 || f.dim() != 1 {
        return Err(Error::Parameter("residual check expects scalar data".into()));
    }
    let m = u.len();
    let moments = kernel.moments();
    let du: Vec<f64> = (0..m).map(|i| u.y(i) - u0).collect();
    let fs: Vec<f64> = (0..m).map(|i| f.y(i)).collect();
    // Prefix ∫_0^{t_i} f and ∫_0^{t_i} (u - u_0) by trapezoid (exact for
    // the piecewise-linear interpolants).
    let prefix = |ys: &[f64]| -> Vec<f64> {
        let mut acc = KahanSum::new();
        let mut out = vec![0.0f64; m];
        for i in 1..m {
            acc.add(0.5 * (ys[i - 1] + ys[i]) * (u.ts[i] - u.ts[i - 1]));
            out[i] = acc.value();
        }
        out
    };
    let int_f = prefix(&fs);
    let int_du = prefix(&du);
    let start = if u.ts[0] == 0.0 { 1 } else { 0 };

    let mut lhs_a = vec![0.0f64; m];
    for i in start..m {
        lhs_a[i] = moments.convolve_linear(&u.ts, &du, i)?;
    }
    let scale_a = int_f.iter().fold(0.0f64, |s, &v| s.max(v.abs())).max(1e-300);
    let mut worst = (start..m)
        .map(|i| (lhs_a[i] - int_f[i]).abs() / scale_a)
        .fold(0.0f64, f64::max);

    if let Some(alpha) = caputo_alpha(kernel) {
        let res = ResolventMoments::stable(alpha);
        let scale_b = int_du.iter().fold(0.0f64, |s, &v| s.max(v.abs()));
        let scale_b = scale_b
            .max(lhs_a.iter().fold(0.0f64, |s, &v| s.max(v.abs())))
            .max(1e-300);
        for i in start..m {
            let rhs_b = res.convolve(&u.ts, &fs, i);
            worst = worst.max((int_du[i] - rhs_b).abs() / scale_b);
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Extension constructions
// ---------------------------------------------------------------------------

/// How the relaxation profile `Θ` is evaluated in the nonlocal extension.
#[derive(Debug, Clone, Copy)]
pub enum ThetaStrategy {
    /// Closed form `erfcx(λ√t)`; requires the half-order kernel.
    ClosedHalf,
    /// Monte-Carlo survival curves with the confidence band propagated
    /// into the reported norms.
    Mc { n_samples: usize, seed: u64 },
}

/// Profile mode of the extension construction.
#[derive(Clone)]
pub enum ExtensionMode {
    /// `u(t) = ∫_0^∞ e^{-tλ} v(λ) dλ/λ`.
    Local,
    /// `u(t) = ∫_0^∞ Θ(t,λ) v(λ) dλ/λ` for the kernel's relaxation family.
    Nonlocal { kernel: Kernel, theta: ThetaStrategy },
}

impl ExtensionMode {
    fn kernel(&self) -> Option<&Kernel> {
        match self {
            Self::Local => None,
            Self::Nonlocal { kernel, .. } => Some(kernel),
        }
    }
}

/// Output of [`construct_extension`].
#[derive(Debug, Clone)]
pub struct ExtensionResult {
    /// Coefficient trajectories of `u` (first node is `t = 0`).
    pub u: GridFunction,
    /// Coefficient trajectories of `f` on the same grid.
    pub f: GridFunction,
    /// Index of the first coefficient (shared with the input element).
    pub j_min: i64,
    /// `‖u‖_{L_p(w dt; A_0)}`.
    pub u_norm: f64,
    /// `‖f‖_{L_p(w dt; A_1)}`.
    pub f_norm: f64,
    /// Interpolation norm of the boundary element for the mode's parameter.
    pub a_norm: f64,
    /// `(‖u‖ + ‖f‖) / ‖a‖` (NaN for a zero element).
    pub ratio: f64,
    /// Defining-equation residual `max_t ‖u(t) − a − ∫_0^t f‖_∞ / ‖a‖_∞`.
    pub residual: f64,
    /// Relative half-width of the Monte-Carlo band on `‖u‖ + ‖f‖`
    /// (zero for deterministic profiles).
    pub ci_relative: f64,
    pub phi_label: String,
}

/// Interpolation parameter for the mode: `W^{1/p}` for the local profile,
/// `(W∘ψ)^{1/p}` for the nonlocal one.
pub fn mode_parameter(w: &Weight, p: f64, kernel: Option<&Kernel>) -> Result<ScalingFunction> {
    let cumulative = w.cumulative_scaling()?;
    match kernel {
        None => {
            let label = format!("({})^(1/{p})", cumulative.label());
            Ok(ScalingFunction::new(
                move |s: f64| cumulative.eval(s).powf(1.0 / p),
                label,
                LogGrid::default(),
            ))
        }
        Some(kernel) => {
            let pair = kernel.kappa_star_psi(PhiMethod::Auto)?;
            let psi = pair.psi;
            let label = format!("({}∘ψ)^(1/{p})", cumulative.label());
            Ok(ScalingFunction::new(
                move |s: f64| cumulative.eval(psi.eval(s)).powf(1.0 / p),
                label,
                LogGrid::default(),
            ))
        }
    }
}

fn check_trace_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!(
            "trace/extension exponent must lie in (1, ∞), got {p}"
        )));
    }
    Ok(())
}

/// Default half-line sampling grid: `t = 0` followed by log-spaced nodes
/// over eight decades (65 positive nodes).
pub fn default_time_grid() -> Vec<f64> {
    let grid = LogGrid::new(1e-4, 1e4, 8).expect("static grid bounds");
    let mut ts = vec![0.0];
    ts.extend(grid.points());
    ts
}

/// Build the extension pair `(u, f)` from the canonical dyadic
/// decomposition `v(λ) = (1/ln 2) Σ_j u_j 1_{(2^j, 2^{j+1}]}(λ)` of `a`,
/// sample it on the default time grid, and report the weighted norms.
pub fn construct_extension(
    a: &Element,
    couple: &InterpolationCouple,
    w: &Weight,
    p: f64,
    mode: &ExtensionMode,
) -> Result<ExtensionResult> {
    check_trace_exponent(p)?;
    let phi = mode_parameter(w, p, mode.kernel())?;
    phi.certify_in(0.0, 1.0)?;
    let blocks = canonical_blocks(couple, a)?;
    let (j_min, len) = match a {
        Element::Sequence { j_min, coeffs } => (*j_min, coeffs.len()),
        _ => return Err(Error::Parameter("expected a sequence element".into())),
    };
    let ts = default_time_grid();
    let nt = ts.len();

    // Mode-level checks and shared resources, outside the node loops.
    let mc_sampler = match mode {
        ExtensionMode::Local => None,
        ExtensionMode::Nonlocal { kernel, theta } => {
            if let ThetaStrategy::ClosedHalf = theta {
                let alpha = caputo_alpha(kernel).ok_or_else(|| {
                    Error::Unsupported(
                        "closed relaxation profile needs the half-order kernel".into(),
                    )
                })?;
                if (alpha - 0.5).abs() > 1e-12 {
                    return Err(Error::Parameter(format!(
                        "closed relaxation profile holds at order 1/2, got α = {alpha}"
                    )));
                }
            }
            match theta {
                ThetaStrategy::Mc { .. } => Some(SubordinatorSampler::for_kernel(
                    kernel,
                    SamplerStrategy::Auto,
                    1e-4,
                )?),
                ThetaStrategy::ClosedHalf => None,
            }
        }
    };

    // Per-block profile weights c_j(t) = ∫_block Θ(t,λ) dλ/λ and
    // d_j(t) = ∫_block λ Θ(t,λ) dλ/λ, by Gauss–Legendre in log λ.
    // `aint` carries the exact time antiderivative Σ w_m (1 - e^{-t λ_m})
    // for the exponential profile, and Monte-Carlo Θ adds half-width
    // columns.
    struct BlockProfile {
        coeffs: Vec<f64>,
        c: Vec<f64>,
        d: Vec<f64>,
        aint: Vec<f64>,
        c_hw: Vec<f64>,
        d_hw: Vec<f64>,
    }
    let mut profiles: Vec<BlockProfile> = Vec::with_capacity(blocks.len());
    let mut node_counter = 0u64;
    for (scale, block) in &blocks {
        let coeffs = match block {
            Element::Sequence { coeffs, .. } => coeffs.clone(),
            _ => unreachable!("canonical blocks are sequence elements"),
        };
        let (x_lo, x_hi) = (*scale as f64 * LN2, (*scale + 1) as f64 * LN2);
        let half = 0.5 * (x_hi - x_lo);
        let mid = 0.5 * (x_hi + x_lo);
        let mut c = vec![0.0f64; nt];
        let mut d = vec![0.0f64; nt];
        let mut aint = vec![0.0f64; nt];
        let mut c_hw = vec![0.0f64; nt];
        let mut d_hw = vec![0.0f64; nt];
        // t = 0 exactly: Θ(0, λ) = 1.
        c[0] = LN2;
        d[0] = (*scale as f64).exp2();
        for (&x, &gw) in GL_X.iter().zip(GL_W.iter()) {
            let lam = (mid + half * x).exp();
            let quad_w = half * gw;
            match mode {
                ExtensionMode::Local => {
                    for i in 1..nt {
                        let th = (-ts[i] * lam).exp();
                        c[i] += quad_w * th;
                        d[i] += quad_w * lam * th;
                        aint[i] += quad_w * (1.0 - th);
                    }
                }
                ExtensionMode::Nonlocal { theta, .. } => match theta {
                    ThetaStrategy::ClosedHalf => {
                        for i in 1..nt {
                            let th = closed_half::theta(ts[i], lam);
                            c[i] += quad_w * th;
                            d[i] += quad_w * lam * th;
                        }
                    }
                    ThetaStrategy::Mc { n_samples, seed } => {
                        let mut rng = task_rng(*seed, node_counter);
                        let curve = crate::subordinator::theta_mc_curve(
                            mc_sampler.as_ref().expect("sampler built for MC mode"),
                            &ts[1..],
                            lam,
                            *n_samples,
                            &mut rng,
                        )?;
                        for i in 1..nt {
                            let est = &curve[i - 1];
                            c[i] += quad_w * est.value;
                            d[i] += quad_w * lam * est.value;
                            c_hw[i] += quad_w * est.half_width_95;
                            d_hw[i] += quad_w * lam * est.half_width_95;
                        }
                    }
                },
            }
            node_counter += 1;
        }
        profiles.push(BlockProfile {
            coeffs,
            c,
            d,
            aint,
            c_hw,
            d_hw,
        });
    }

    // Assemble coefficient trajectories: u_k(t) = c_{j(k)}(t)/ln2 · a_k.
    let mut u_vals = vec![vec![0.0f64; len]; nt];
    let mut f_vals = vec![vec![0.0f64; len]; nt];
    let mut u_hw = vec![vec![0.0f64; len]; nt];
    let mut f_hw = vec![vec![0.0f64; len]; nt];
    for prof in &profiles {
        for (k, &a_k) in prof.coeffs.iter().enumerate() {
            if a_k == 0.0 {
                continue;
            }
            for i in 0..nt {
                u_vals[i][k] += prof.c[i] / LN2 * a_k;
                f_vals[i][k] -= prof.d[i] / LN2 * a_k;
                u_hw[i][k] += prof.c_hw[i] / LN2 * a_k.abs();
                f_hw[i][k] += prof.d_hw[i] / LN2 * a_k.abs();
            }
        }
    }

    // Defining-equation residual. Exponential profile: u' = f, checked as
    // u(t) − a − ∫_0^t f with the exact node antiderivatives (independent
    // accumulation, so assembly errors surface). Relaxation profiles obey
    // the kernel-convolution equation instead; checked per coordinate.
    let a_coeffs = match a {
        Element::Sequence { coeffs, .. } => coeffs.clone(),
        _ => unreachable!(),
    };
    let a_sup = a_coeffs.iter().fold(0.0f64, |s, &v| s.max(v.abs()));
    let mut residual = 0.0f64;
    if a_sup > 0.0 {
        match mode {
            ExtensionMode::Local => {
                for prof in &profiles {
                    for (k, &a_k) in prof.coeffs.iter().enumerate() {
                        if a_k == 0.0 {
                            continue;
                        }
                        for i in 0..nt {
                            let int_f = -a_k / LN2 * prof.aint[i];
                            let gap = (u_vals[i][k] - a_k - int_f).abs();
                            residual = residual.max(gap / a_sup);
                        }
                    }
                }
            }
            ExtensionMode::Nonlocal { kernel, .. } => {
                for (k, &a_k) in a_coeffs.iter().enumerate() {
                    if a_k == 0.0 {
                        continue;
                    }
                    let us: Vec<f64> = u_vals.iter().map(|row| row[k]).collect();
                    let fs: Vec<f64> = f_vals.iter().map(|row| row[k]).collect();
                    let uk = GridFunction::scalar(ts.clone(), us)?;
                    let fk = GridFunction::scalar(ts.clone(), fs)?;
                    residual = residual.max(residual_check(kernel, &uk, &fk, a_k)?);
                }
            }
        }
    }

    // Weighted norms with the Monte-Carlo envelope.
    let norm_with_band = |vals: &[Vec<f64>], hws: &[Vec<f64>], use_norm0: bool| -> Result<(f64, f64, f64)> {
        let mut mid = vec![0.0f64; nt];
        let mut lo = vec![0.0f64; nt];
        let mut hi = vec![0.0f64; nt];
        for i in 0..nt {
            let el = Element::Sequence {
                j_min,
                coeffs: vals[i].clone(),
            };
            let hw_el = Element::Sequence {
                j_min,
                coeffs: hws[i].clone(),
            };
            let (n, h) = if use_norm0 {
                (couple.norm0(&el)?, couple.norm0(&hw_el)?)
            } else {
                (couple.norm1(&el)?, couple.norm1(&hw_el)?)
            };
            mid[i] = n;
            lo[i] = (n - h).max(0.0);
            hi[i] = n + h;
        }
        Ok((
            lp_time_norm(&ts, &mid, w, p)?,
            lp_time_norm(&ts, &lo, w, p)?,
            lp_time_norm(&ts, &hi, w, p)?,
        ))
    };
    let (u_norm, u_lo, u_hi) = norm_with_band(&u_vals, &u_hw, true)?;
    let (f_norm, f_lo, f_hi) = norm_with_band(&f_vals, &f_hw, false)?;
    let mid_sum = u_norm + f_norm;
    let ci_relative = if mid_sum > 0.0 {
        ((u_hi + f_hi) - (u_lo + f_lo)) / (2.0 * mid_sum)
    } else {
        0.0
    };

    let a_norm = dyadic_norm(couple, &phi, p, a, None)?;
    let ratio = if a_norm > 0.0 { mid_sum / a_norm } else { f64::NAN };
    Ok(ExtensionResult {
        u: GridFunction::new(ts.clone(), u_vals)?,
        f: GridFunction::new(ts, f_vals)?,
        j_min,
        u_norm,
        f_norm,
        a_norm,
        ratio,
        residual,
        ci_relative,
        phi_label: phi.label().to_string(),
    })
}

/// `(∫_0^∞ g(t)^p w(t) dt)^{1/p}` for sampled nonnegative `g`: trapezoid
/// panels over the grid plus an exact head `g(t_1)^p·W(t_min)` below the
/// first positive node. Monotone in the weight by construction.
pub fn lp_time_norm(ts: &[f64], gs: &[f64], w: &Weight, p: f64) -> Result<f64> {
    if ts.len() != gs.len() || ts.len() < 2 {
        return Err(Error::Grid("need matching grids with ≥ 2 nodes".into()));
    }
    let mut acc = KahanSum::new();
    let start = if ts[0] == 0.0 { 1 } else { 0 };
    if ts[start] > 0.0 {
        acc.add(gs[start].powf(p) * w.cumulative(ts[start])?);
    }
    for i in start..ts.len() - 1 {
        let (t0, t1) = (ts[i], ts[i + 1]);
        let h0 = gs[i].powf(p) * w.eval(t0);
        let h1 = gs[i + 1].powf(p) * w.eval(t1);
        acc.add(0.5 * (h0 + h1) * (t1 - t0));
    }
    Ok(acc.value().powf(1.0 / p))
}

// ---------------------------------------------------------------------------
// Trace bounds
// ---------------------------------------------------------------------------

/// How a sampled-norm curve continues beyond its last node inside the
/// Laplace transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
enum TailModel {
    /// Zero extension (finite-interval data).
    Zero,
    /// Power-law extrapolation fitted on the last decade; errors when the
    /// data does not decay.
    PowerFit,
}

/// Laplace transform of a sampled nonnegative function: exact on the
/// piecewise-linear interpolant, constant head below the first node, and a
/// modeled tail beyond the last node.
struct LaplaceTable {
    ts: Vec<f64>,
    hs: Vec<f64>,
    /// `(value at t_max, fitted decay exponent)`; `None` for zero tails.
    tail: Option<(f64, f64)>,
}

impl LaplaceTable {
    fn new(ts: &[f64], hs: &[f64], model: TailModel) -> Result<Self> {
        let n = ts.len();
        if n < 8 || hs.len() != n {
            return Err(Error::InsufficientData(
                "Laplace table needs ≥ 8 matched samples".into(),
            ));
        }
        let start = if ts[0] == 0.0 { 1 } else { 0 };
        let ts = ts[start..].to_vec();
        let hs = hs[start..].to_vec();
        let h_max = hs.iter().fold(0.0f64, |s, &v| s.max(v));
        let t_max = *ts.last().unwrap();
        let h_end = *hs.last().unwrap();
        let tail = match model {
            TailModel::Zero => None,
            TailModel::PowerFit => {
                if h_max <= 0.0 || h_end <= 1e-250 * h_max {
                    None
                } else {
                    // Least-squares slope of ln h vs ln t on the last decade.
                    let lo = t_max / 10.0;
                    let pts: Vec<(f64, f64)> = ts
                        .iter()
                        .zip(hs.iter())
                        .filter(|(&t, &h)| t >= lo && h > 0.0)
                        .map(|(&t, &h)| (t.ln(), h.ln()))
                        .collect();
                    let sigma = -ls_slope(&pts);
                    if !(sigma > 0.01) {
                        return Err(Error::Truncation(format!(
                            "sampled norms do not decay (tail exponent {sigma:.3}); \
                             the Laplace tail beyond t = {t_max:.3e} cannot be truncated"
                        )));
                    }
                    Some((h_end, sigma))
                }
            }
        };
        Ok(Self { ts, hs, tail })
    }

    /// `∫_0^∞ e^{-λt} h(t) dt`, exact on the piecewise-linear interpolant.
    fn eval(&self, lambda: f64) -> f64 {
        let mut acc = KahanSum::new();
        // Head: h ≈ h(t_0) on (0, t_0].
        let t0 = self.ts[0];
        acc.add(self.hs[0] * (-(-lambda * t0).exp_m1()) / lambda);
        for i in 0..self.ts.len() - 1 {
            let (ta, tb) = (self.ts[i], self.ts[i + 1]);
            let (ha, hb) = (self.hs[i], self.hs[i + 1]);
            let ea = (-lambda * ta).exp();
            if ea == 0.0 {
                break;
            }
            let dt = tb - ta;
            let x = lambda * dt;
            // ∫_{ta}^{tb} (ha + slope·(t-ta)) e^{-λt} dt
            //   = ea/λ·(ha·g0 + slope·dt·g1/x), with the cancellation-free
            // forms g0 = 1-e^{-x} and g1 = (1-e^{-x}-x e^{-x})/x.
            let g0 = -(-x).exp_m1();
            let g1 = if x < 1e-4 {
                x * (0.5 - x / 3.0 + x * x / 8.0)
            } else {
                (g0 - x * (-x).exp()) / x
            };
            let slope = (hb - ha) / dt;
            acc.add(ea / lambda * (ha * g0 + slope * dt * g1));
        }
        if let Some((h_end, sigma)) = self.tail {
            let t_max = *self.ts.last().unwrap();
            if lambda * t_max < 700.0 {
                let tail = integrate_to_infinity(
                    &|t: f64| h_end * (t / t_max).powf(-sigma) * (-lambda * t).exp(),
                    t_max,
                    &QuadOpts::default(),
                )
                .unwrap_or(0.0);
                acc.add(tail);
            }
        }
        acc.value()
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Result of [`trace_bound`] / [`finite_interval_trace`].
#[derive(Debug, Clone, Serialize)]
pub struct TraceBoundReport {
    /// The Laplace-envelope upper bound for the interpolation norm of
    /// `u(0)`.
    pub bound: f64,
    /// Direct interpolation norm of the first sample, for comparison.
    pub direct_norm: f64,
    /// `bound / direct_norm`.
    pub ratio: f64,
    pub phi_label: String,
    /// Embedding constant over the support (finite-interval mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_constant: Option<f64>,
    /// The explicit bound for `‖u(0)‖_{A_1}` used by the kernel-mass tail
    /// term (finite-interval nonlocal mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0_x1_bound: Option<f64>,
}

fn norm_curves(
    u: &GridFunction,
    f: &GridFunction,
    j_min: i64,
    couple: &InterpolationCouple,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.ts != f.ts {
        return Err(Error::Grid("u and f must share one grid".into()));
    }
    let nt = u.len();
    let mut nu = vec![0.0f64; nt];
    let mut nf = vec![0.0f64; nt];
    for i in 0..nt {
        nu[i] = couple.norm0(&Element::Sequence {
            j_min,
            coeffs: u.values[i].clone(),
        })?;
        nf[i] = couple.norm1(&Element::Sequence {
            j_min,
            coeffs: f.values[i].clone(),
        })?;
    }
    Ok((nu, nf))
}

fn phi_p_norm(envelope: impl Fn(f64) -> f64, phi: &ScalingFunction, p: f64) -> Result<f64> {
    let integrand = |t: f64| (phi.eval(1.0 / t) * envelope(t)).powf(p) / t;
    let tail = integrate_half_line(&integrand, 1.0, &QuadOpts::default())?;
    Ok(tail.value.powf(1.0 / p))
}

/// Upper bound for the interpolation norm of `u(0)` from the Laplace
/// envelope of the K-functional: with a kernel the envelope is
/// `K(τ) ≤ λ_τ ℒ[‖u‖_{A_0} + ‖f‖_{A_1}](λ_τ)` at `λ_τ = 1/ψ(τ^{-1})`;
/// without one it is `K(t) ≤ t(ℒ[‖u‖_{A_0}](t) + ℒ[‖f‖_{A_1}](t))`.
pub fn trace_bound(
    u: &GridFunction,
    f: &GridFunction,
    j_min: i64,
    couple: &InterpolationCouple,
    w: &Weight,
    p: f64,
    kernel: Option<&Kernel>,
) -> Result<TraceBoundReport> {
    check_trace_exponent(p)?;
    let phi = mode_parameter(w, p, kernel)?;
    phi.certify_in(0.0, 1.0)?;
    let (nu, nf) = norm_curves(u, f, j_min, couple)?;
    let bound = match kernel {
        None => {
            let lu = LaplaceTable::new(&u.ts, &nu, TailModel::PowerFit)?;
            let lf = LaplaceTable::new(&f.ts, &nf, TailModel::PowerFit)?;
            phi_p_norm(|t| t * (lu.eval(t) + lf.eval(t)), &phi, p)?
        }
        Some(kernel) => {
            let g: Vec<f64> = nu.iter().zip(nf.iter()).map(|(a, b)| a + b).collect();
            let lg = LaplaceTable::new(&u.ts, &g, TailModel::PowerFit)?;
            let psi = kernel.kappa_star_psi(PhiMethod::Auto)?.psi;
            phi_p_norm(
                |tau| {
                    let lam = 1.0 / psi.eval(1.0 / tau);
                    lam * lg.eval(lam)
                },
                &phi,
                p,
            )?
        }
    };
    let u0 = Element::Sequence {
        j_min,
        coeffs: u.values[0].clone(),
    };
    let direct_norm = dyadic_norm(couple, &phi, p, &u0, None)?;
    Ok(TraceBoundReport {
        bound,
        ratio: if direct_norm > 0.0 {
            bound / direct_norm
        } else {
            f64::NAN
        },
        direct_norm,
        phi_label: phi.label().to_string(),
        embedding_constant: None,
        u0_x1_bound: None,
    })
}

// ---------------------------------------------------------------------------
// Round trips
// ---------------------------------------------------------------------------

/// Direction of a round-trip inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundTripDirection {
    Extension,
    Trace,
}

/// One side of a round-trip experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RoundTripReport {
    pub direction: RoundTripDirection,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub ratio: f64,
    pub config: String,
}

/// Both halves of a round trip plus the shared diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RoundTripOutcome {
    pub extension: RoundTripReport,
    pub trace: RoundTripReport,
    pub residual: f64,
    pub ci_width: f64,
}

/// Run the extension construction and then the trace bound on the
/// constructed pair: reports `(‖u‖+‖f‖)/‖a‖` (extension) and
/// `bound(‖u(0)‖)/(‖u‖+‖f‖)` (trace).
pub fn roundtrip_experiment(
    a: &Element,
    couple: &InterpolationCouple,
    w: &Weight,
    p: f64,
    mode: &ExtensionMode,
) -> Result<RoundTripOutcome> {
    let is_zero = match a {
        Element::Sequence { coeffs, .. } => coeffs.iter().all(|&c| c == 0.0),
        _ => false,
    };
    if is_zero {
        return Err(Error::Precondition(
            "round-trip ratios are undefined for the zero element".into(),
        ));
    }
    let ext = construct_extension(a, couple, w, p, mode)?;
    let config = format!("{} p={p} w={}", ext.phi_label, w.label());
    let tb = trace_bound(&ext.u, &ext.f, ext.j_min, couple, w, p, mode.kernel())?;
    let residual = ext.residual;
    Ok(RoundTripOutcome {
        extension: RoundTripReport {
            direction: RoundTripDirection::Extension,
            lhs_norm: ext.u_norm + ext.f_norm,
            rhs_norm: ext.a_norm,
            ratio: ext.ratio,
            config: config.clone(),
        },
        trace: RoundTripReport {
            direction: RoundTripDirection::Trace,
            lhs_norm: tb.bound,
            rhs_norm: ext.u_norm + ext.f_norm,
            ratio: tb.bound / (ext.u_norm + ext.f_norm),
            config,
        },
        residual,
        ci_width: ext.ci_relative,
    })
}

/// One case of the regression battery.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryCase {
    pub case_id: String,
    /// `"local"` or `"nonlocal"`.
    pub mode: String,
    /// Kernel order for nonlocal cases.
    pub alpha: Option<f64>,
    /// Power-weight exponent.
    pub gamma: f64,
    pub p: f64,
    /// Coordinate index of the boundary element `e_k`.
    pub k: i64,
}

/// The default 22-case battery: 18 local cases
/// (γ ∈ {-0.5, 0, 0.5} × k ∈ {-5, -3, -1, 1, 3, 5}) and 4 nonlocal
/// half-order cases (γ = -0.5, k ∈ {-1, 0, 1, 3}).
pub fn battery_cases() -> Vec<BatteryCase> {
    let mut cases = Vec::new();
    for &gamma in &[-0.5, 0.0, 0.5] {
        for &k in &[-5i64, -3, -1, 1, 3, 5] {
            cases.push(BatteryCase {
                case_id: format!("local_g{gamma}_k{k}"),
                mode: "local".into(),
                alpha: None,
                gamma,
                p: 2.0,
                k,
            });
        }
    }
    for &k in &[-1i64, 0, 1, 3] {
        cases.push(BatteryCase {
            case_id: format!("nonlocal_a0.5_g-0.5_k{k}"),
            mode: "nonlocal".into(),
            alpha: Some(0.5),
            gamma: -0.5,
            p: 2.0,
            k,
        });
    }
    cases
}

/// Run one battery case on the standard sequence couple
/// `(ℓ_∞^1, ℓ_∞^0)`.
pub fn run_battery_case(case: &BatteryCase) -> Result<RoundTripOutcome> {
    let couple = InterpolationCouple::sequence(f64::INFINITY, 1.0, f64::INFINITY, 0.0)?;
    let w = Weight::power(case.gamma, case.p)?;
    let a = Element::unit(case.k);
    let mode = match case.alpha {
        None => ExtensionMode::Local,
        Some(alpha) => ExtensionMode::Nonlocal {
            kernel: Kernel::caputo(alpha, LogGrid::default())?,
            theta: ThetaStrategy::ClosedHalf,
        },
    };
    roundtrip_experiment(&a, &couple, &w, case.p, &mode)
}

/// Run a battery in parallel (cases are independent; the output order is
/// the input order, so aggregation is deterministic).
pub fn run_battery(cases: &[BatteryCase]) -> Vec<(BatteryCase, Result<RoundTripOutcome>)> {
    use rayon::prelude::*;
    cases
        .par_iter()
        .map(|c| (c.clone(), run_battery_case(c)))
        .collect()
}

// ---------------------------------------------------------------------------
// Finite-interval trace
// ---------------------------------------------------------------------------

/// Quintic smoothstep cutoff: `1` on `[0, T/2]`, `0` on `[T, ∞)`, `C^2`.
pub fn cutoff(s: f64, t_horizon: f64) -> f64 {
    let x = (2.0 * s - t_horizon) / t_horizon;
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// Derivative of [`cutoff`] in `s`.
pub fn cutoff_derivative(s: f64, t_horizon: f64) -> f64 {
    let x = (2.0 * s - t_horizon) / t_horizon;
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let y = x * (1.0 - x);
        -(2.0 / t_horizon) * 30.0 * y * y
    }
}

fn embedding_constant(couple: &InterpolationCouple, a_support: &Element) -> Result<f64> {
    // For the sequence couple the embedding A_0 ↪ A_1 over the element's
    // index range has constant max_k 2^{k(σ1-σ0)}; σ0 ≥ σ1 is required so
    // the constant stays controlled for nonnegative indices.
    let blocks = canonical_blocks(couple, a_support)?;
    let mut n_emb = 0.0f64;
    let mut any = false;
    for (_, block) in &blocks {
        let n1 = couple.norm1(block)?;
        let n0 = couple.norm0(block)?;
        if n0 > 0.0 {
            n_emb = n_emb.max(n1 / n0);
            any = true;
        }
    }
    if !any {
        return Err(Error::Precondition(
            "embedding constant needs a nonzero sample".into(),
        ));
    }
    Ok(n_emb)
}

fn sequence_sigmas(couple: &InterpolationCouple, a: &Element) -> Result<(f64, f64)> {
    // Probe the couple's weights through unit-coordinate norms.
    let _ = canonical_blocks(couple, a)?; // ensures the sequence kind
    let e1 = Element::unit(1);
    let s0 = couple.norm0(&e1)?.log2();
    let s1 = couple.norm1(&e1)?.log2();
    Ok((s0, s1))
}

/// Trace bound from data on a finite interval `(0, T)`.
///
/// Requires `A_0 ↪ A_1` (sequence couples with `σ0 ≥ σ1`). Without a
/// kernel, multiplies by the smooth cutoff and reuses the half-line bound
/// for `(ζu, ζf + ζ'u)`. With a kernel, computes the three-part Laplace
/// split: the interval transforms of `κ*u` and `∫f`, plus the kernel-mass
/// tail term `∫_T^∞ e^{-λt} (∫_0^t κ) dt` weighted by an explicit bound
/// for `‖u(0)‖_{A_1}`.
pub fn finite_interval_trace(
    u: &GridFunction,
    f: &GridFunction,
    j_min: i64,
    t_horizon: f64,
    couple: &InterpolationCouple,
    w: &Weight,
    p: f64,
    kernel: Option<&Kernel>,
) -> Result<TraceBoundReport> {
    check_trace_exponent(p)?;
    if !(t_horizon > 0.0) || !t_horizon.is_finite() {
        return Err(Error::Parameter(format!(
            "finite horizon must be positive, got {t_horizon}"
        )));
    }
    let u0 = Element::Sequence {
        j_min,
        coeffs: u.values[0].clone(),
    };
    let (s0, s1) = sequence_sigmas(couple, &u0)?;
    if s0 < s1 {
        return Err(Error::Precondition(format!(
            "the finite-interval bound needs A_0 ↪ A_1 (σ0 ≥ σ1), got σ0 = {s0}, σ1 = {s1}"
        )));
    }
    let n_emb = embedding_constant(couple, &u0)?;
    let phi = mode_parameter(w, p, kernel)?;
    phi.certify_in(0.0, 1.0)?;
    let (nu_full, nf_full) = norm_curves(u, f, j_min, couple)?;

    let report = match kernel {
        None => {
            // ζ-multiplied pair, zero beyond the horizon.
            let nt = u.len();
            let mut zu = vec![vec![0.0f64; u.dim()]; nt];
            let mut zf = vec![vec![0.0f64; u.dim()]; nt];
            for i in 0..nt {
                let t = u.ts[i];
                let z = cutoff(t, t_horizon);
                let dz = cutoff_derivative(t, t_horizon);
                for k in 0..u.dim() {
                    zu[i][k] = z * u.values[i][k];
                    zf[i][k] = z * f.values[i][k] + dz * u.values[i][k];
                }
            }
            let zu = GridFunction::new(u.ts.clone(), zu)?;
            let zf = GridFunction::new(u.ts.clone(), zf)?;
            let (nzu, nzf) = norm_curves(&zu, &zf, j_min, couple)?;
            let lu = LaplaceTable::new(&zu.ts, &nzu, TailModel::Zero)?;
            let lf = LaplaceTable::new(&zf.ts, &nzf, TailModel::Zero)?;
            let bound = phi_p_norm(|t| t * (lu.eval(t) + lf.eval(t)), &phi, p)?;
            let direct = dyadic_norm(couple, &phi, p, &u0, None)?;
            TraceBoundReport {
                bound,
                ratio: if direct > 0.0 { bound / direct } else { f64::NAN },
                direct_norm: direct,
                phi_label: phi.label().to_string(),
                embedding_constant: Some(n_emb),
                u0_x1_bound: None,
            }
        }
        Some(kernel) => {
            let pair = kernel.kappa_star_psi(PhiMethod::Auto)?;
            let psi = pair.psi;
            let moments = kernel.moments();
            let phi_kernel = kernel.laplace_phi(PhiMethod::Auto)?;
            // Zero-extended transforms of the norm curves.
            let lu = LaplaceTable::new(&u.ts, &nu_full, TailModel::Zero)?;
            let lf = LaplaceTable::new(&f.ts, &nf_full, TailModel::Zero)?;
            // Explicit bound for ‖u(0)‖_{A_1}: divide the e^{-t}-averaged
            // data bound by ∫_0^T e^{-t} M0(t) dt.
            let nu1: Vec<f64> = (0..u.len())
                .map(|i| {
                    couple.norm1(&Element::Sequence {
                        j_min,
                        coeffs: u.values[i].clone(),
                    })
                })
                .collect::<Result<_>>()?;
            let lu1 = LaplaceTable::new(&u.ts, &nu1, TailModel::Zero)?;
            let lk1 = phi_kernel.eval(1.0); // ℒ[κ](1) = φ(1)/1
            let denom = integrate_from_zero(
                &|t: f64| (-t).exp() * moments.m0(t).unwrap_or(0.0),
                t_horizon,
                &QuadOpts::default(),
            )?;
            if !(denom > 0.0) {
                return Err(Error::Precondition(
                    "kernel mass vanishes on the horizon".into(),
                ));
            }
            let u0_x1 = (lk1 * lu1.eval(1.0) + lf.eval(1.0)) / denom;
            // Kernel-mass tail term: ∫_T^∞ e^{-λt} M0(t) dt.
            let tail_term = |lam: f64| -> f64 {
                if lam * t_horizon > 700.0 {
                    return 0.0;
                }
                integrate_to_infinity(
                    &|t: f64| (-lam * t).exp() * moments.m0(t).unwrap_or(0.0),
                    t_horizon,
                    &QuadOpts::default(),
                )
                .unwrap_or(0.0)
            };
            let envelope = |tau: f64| -> f64 {
                let lam = 1.0 / psi.eval(1.0 / tau);
                lam * (lu.eval(lam) + lf.eval(lam)) + lam * lam * u0_x1 * tail_term(lam)
            };
            let bound = phi_p_norm(envelope, &phi, p)?;
            let direct = dyadic_norm(couple, &phi, p, &u0, None)?;
            TraceBoundReport {
                bound,
                ratio: if direct > 0.0 { bound / direct } else { f64::NAN },
                direct_norm: direct,
                phi_label: phi.label().to_string(),
                embedding_constant: Some(n_emb),
                u0_x1_bound: Some(u0_x1),
            }
        }
    };
    Ok(report)
}

/// Restrict a sampled pair to `(0, T)` by dropping later nodes (the last
/// kept node is the first one at or beyond `T`, so the interval is
/// covered).
pub fn restrict_pair(u: &GridFunction, f: &GridFunction, t_horizon: f64) -> Result<(GridFunction, GridFunction)> {
    if u.ts != f.ts {
        return Err(Error::Grid("u and f must share one grid".into()));
    }
    let mut keep = u.ts.iter().take_while(|&&t| t < t_horizon).count();
    keep = (keep + 1).min(u.len());
    if keep < 8 {
        return Err(Error::InsufficientData(
            "too few nodes inside the horizon".into(),
        ));
    }
    Ok((
        GridFunction::new(u.ts[..keep].to_vec(), u.values[..keep].to_vec())?,
        GridFunction::new(f.ts[..keep].to_vec(), f.values[..keep].to_vec())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_grid(t_end: f64, m: usize) -> Vec<f64> {
        (0..=m).map(|i| t_end * i as f64 / m as f64).collect()
    }

    fn standard_couple() -> InterpolationCouple {
        InterpolationCouple::sequence(f64::INFINITY, 1.0, f64::INFINITY, 0.0).unwrap()
    }

    #[test]
    fn forward_constant_forcing_matches_power_solution() {
        for &alpha in &[0.3, 0.5, 0.7] {
            let kernel = Kernel::caputo(alpha, LogGrid::default()).unwrap();
            let ts = uniform_grid(2.0, 2048);
            let c = 2.0;
            let f = GridFunction::scalar(ts.clone(), vec![c; ts.len()]).unwrap();
            let sol = solve_volterra_forward(&kernel, 1.0, &f).unwrap();
            let mut worst = 0.0f64;
            for (i, &t) in ts.iter().enumerate() {
                if t < 0.5 {
                    continue;
                }
                let expect = 1.0 + c * t.powf(alpha) / gamma(1.0 + alpha);
                worst = worst.max((sol.u.y(i) - expect).abs() / expect);
            }
            assert!(worst < 1e-4, "α={alpha}: deviation {worst:.3e}");
            assert!(sol.residual < 1e-3, "α={alpha}: residual {:.3e}", sol.residual);
        }
    }

    #[test]
    fn forward_zero_forcing_is_constant() {
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let ts = uniform_grid(1.0, 64);
        let f = GridFunction::scalar(ts.clone(), vec![0.0; ts.len()]).unwrap();
        let sol = solve_volterra_forward(&kernel, 3.5, &f).unwrap();
        for i in 0..ts.len() {
            assert_eq!(sol.u.y(i), 3.5);
        }
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn forward_linear_forcing_half_order() {
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let ts = uniform_grid(2.0, 2048);
        let f = GridFunction::scalar(ts.clone(), ts.clone()).unwrap();
        let sol = solve_volterra_forward(&kernel, 0.0, &f).unwrap();
        let mut worst = 0.0f64;
        for (i, &t) in ts.iter().enumerate() {
            if t < 0.5 {
                continue;
            }
            let expect = t.powf(1.5) / gamma(2.5);
            worst = worst.max((sol.u.y(i) - expect).abs() / expect);
        }
        assert!(worst < 1e-4, "deviation {worst:.3e}");
    }

    #[test]
    fn forward_mc_resolvent_close_to_closed_form() {
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let ts = uniform_grid(1.0, 256);
        let f = GridFunction::scalar(ts.clone(), vec![1.0; ts.len()]).unwrap();
        let exact = solve_volterra_forward(&kernel, 0.0, &f).unwrap();
        let mc = solve_volterra_forward_mc(&kernel, 0.0, &f, 40_000, 11).unwrap();
        assert!(mc.ci_relative > 0.0 && mc.ci_relative < 0.05);
        let i = 192;
        let rel = (mc.u.y(i) - exact.u.y(i)).abs() / exact.u.y(i).abs();
        assert!(rel < 3.0 * mc.ci_relative + 1e-3, "rel {rel:.3e}");
        // Tiny sample → inconclusive.
        match solve_volterra_forward_mc(&kernel, 0.0, &f, 120, 11) {
            Err(Error::Inconclusive(_)) => {}
            other => panic!("expected inconclusive, got {other:?}"),
        }
    }

    #[test]
    fn residual_zero_for_trivial_pair() {
        let kernel = Kernel::caputo(0.4, LogGrid::default()).unwrap();
        let ts = uniform_grid(1.0, 32);
        let u = GridFunction::scalar(ts.clone(), vec![2.0; ts.len()]).unwrap();
        let f = GridFunction::scalar(ts, vec![0.0; 33]).unwrap();
        assert_eq!(residual_check(&kernel, &u, &f, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn residual_linear_in_perturbation() {
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let ts = uniform_grid(1.0, 512);
        let f = GridFunction::scalar(ts.clone(), vec![1.0; ts.len()]).unwrap();
        let sol = solve_volterra_forward(&kernel, 0.0, &f).unwrap();
        let perturbed = |eps: f64| -> f64 {
            let us: Vec<f64> = (0..ts.len())
                .map(|i| sol.u.y(i) + eps * (3.0 * ts[i]).sin())
                .collect();
            let u = GridFunction::scalar(ts.clone(), us).unwrap();
            residual_check(&kernel, &u, &f, 0.0).unwrap()
        };
        let base = sol.residual;
        let r1 = perturbed(0.01);
        let r2 = perturbed(0.02);
        assert!(r1 > base * 5.0, "perturbation must dominate: {r1:.3e} vs {base:.3e}");
        assert_relative_eq!((r2 - base) / (r1 - base), 2.0, max_relative = 0.05);
    }

    #[test]
    fn residual_decays_under_refinement() {
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let res_at = |m: usize| -> f64 {
            let ts = uniform_grid(1.0, m);
            let f = GridFunction::scalar(ts.clone(), vec![1.0; ts.len()]).unwrap();
            solve_volterra_forward(&kernel, 0.0, &f).unwrap().residual
        };
        let coarse = res_at(256);
        let fine = res_at(512);
        assert!(
            fine < coarse / 1.9,
            "first-order decay expected: {coarse:.3e} -> {fine:.3e}"
        );
    }

    #[test]
    fn extension_local_unit_element() {
        let couple = standard_couple();
        let w = Weight::one(2.0).unwrap();
        let a = Element::unit(0);
        let ext = construct_extension(&a, &couple, &w, 2.0, &ExtensionMode::Local).unwrap();
        // u(0) = a exactly.
        assert_relative_eq!(ext.u.values[0][0], 1.0, max_relative = 1e-14);
        // Defining equation to quadrature tolerance at every node.
        assert!(ext.residual < 1e-8, "residual {:.3e}", ext.residual);
        // Profile value against a direct quadrature at one interior time.
        let idx = ext
            .u
            .ts
            .iter()
            .position(|&t| t >= 1.0)
            .unwrap();
        let t = ext.u.ts[idx];
        let direct = crate::quad::integrate_log(
            &|lam: f64| (-t * lam).exp() / (lam * LN2),
            1.0,
            2.0,
            &QuadOpts::default(),
        );
        assert_relative_eq!(ext.u.values[idx][0], direct, max_relative = 1e-10);
        assert!(ext.u_norm > 0.0 && ext.f_norm > 0.0 && ext.a_norm > 0.0);
        assert!(ext.ratio.is_finite());
        assert_eq!(ext.ci_relative, 0.0);
    }

    #[test]
    fn extension_zero_element_is_zero() {
        let couple = standard_couple();
        let w = Weight::one(2.0).unwrap();
        let a = Element::sequence(0, vec![0.0]);
        let ext = construct_extension(&a, &couple, &w, 2.0, &ExtensionMode::Local).unwrap();
        assert_eq!(ext.u_norm, 0.0);
        assert_eq!(ext.f_norm, 0.0);
        assert!(ext.ratio.is_nan());
        assert!(roundtrip_experiment(&a, &couple, &w, 2.0, &ExtensionMode::Local).is_err());
    }

    #[test]
    fn extension_nonlocal_closed_form_residual() {
        let couple = standard_couple();
        let w = Weight::power(-0.5, 2.0).unwrap();
        let a = Element::unit(0);
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let mode = ExtensionMode::Nonlocal {
            kernel: kernel.clone(),
            theta: ThetaStrategy::ClosedHalf,
        };
        let out = roundtrip_experiment(&a, &couple, &w, 2.0, &mode).unwrap();
        eprintln!(
            "nonlocal roundtrip: ext ratio {:.4}, trace ratio {:.4}, residual {:.3e}",
            out.extension.ratio, out.trace.ratio, out.residual
        );
        assert!(out.residual < 1e-2, "residual {:.3e}", out.residual);
        assert!(
            out.extension.ratio > 0.8 && out.extension.ratio < 1.2,
            "extension ratio {}",
            out.extension.ratio
        );
        assert!(
            out.trace.ratio > 0.95 && out.trace.ratio < 1.5,
            "trace ratio {}",
            out.trace.ratio
        );
        let ext = construct_extension(&a, &couple, &w, 2.0, &mode).unwrap();
        assert_relative_eq!(ext.u.values[0][0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn extension_nonlocal_mc_bands() {
        let couple = standard_couple();
        let w = Weight::power(-0.5, 2.0).unwrap();
        let a = Element::unit(0);
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let closed = construct_extension(
            &a,
            &couple,
            &w,
            2.0,
            &ExtensionMode::Nonlocal {
                kernel: kernel.clone(),
                theta: ThetaStrategy::ClosedHalf,
            },
        )
        .unwrap();
        let mc = construct_extension(
            &a,
            &couple,
            &w,
            2.0,
            &ExtensionMode::Nonlocal {
                kernel,
                theta: ThetaStrategy::Mc {
                    n_samples: 4000,
                    seed: 7,
                },
            },
        )
        .unwrap();
        assert!(mc.ci_relative > 0.0);
        let rel = ((mc.u_norm + mc.f_norm) - (closed.u_norm + closed.f_norm)).abs()
            / (closed.u_norm + closed.f_norm);
        assert!(
            rel < 3.0 * mc.ci_relative + 0.02,
            "rel {rel:.3e} vs band {:.3e}",
            mc.ci_relative
        );
    }

    #[test]
    fn nonlocal_inadmissible_weight_rejected() {
        let couple = standard_couple();
        let w = Weight::power(0.2, 2.0).unwrap(); // (1+γ)/α = 2.4 > p
        let a = Element::unit(0);
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let mode = ExtensionMode::Nonlocal {
            kernel,
            theta: ThetaStrategy::ClosedHalf,
        };
        assert!(construct_extension(&a, &couple, &w, 2.0, &mode).is_err());
    }

    #[test]
    fn trace_bound_on_constructed_pair() {
        let couple = standard_couple();
        let w = Weight::one(2.0).unwrap();
        let a = Element::unit(0);
        let ext = construct_extension(&a, &couple, &w, 2.0, &ExtensionMode::Local).unwrap();
        let tb = trace_bound(&ext.u, &ext.f, ext.j_min, &couple, &w, 2.0, None).unwrap();
        eprintln!(
            "trace bound {:.6e}, direct {:.6e}, ratio {:.4}",
            tb.bound, tb.direct_norm, tb.ratio
        );
        assert!(tb.bound.is_finite() && tb.bound > 0.0);
        assert!(tb.direct_norm > 0.0);
        // The envelope is an upper estimate; the constant stays modest.
        assert!(
            tb.ratio > 1.0 && tb.ratio < 1.5,
            "trace/direct ratio {} out of band",
            tb.ratio
        );
    }

    #[test]
    fn trace_bound_rejects_nondecaying_input() {
        let couple = standard_couple();
        let w = Weight::one(2.0).unwrap();
        let ts = default_time_grid();
        let n = ts.len();
        let u = GridFunction::new(ts.clone(), vec![vec![1.0]; n]).unwrap();
        let f = GridFunction::new(ts, vec![vec![0.0]; n]).unwrap();
        match trace_bound(&u, &f, 0, &couple, &w, 2.0, None) {
            Err(Error::Truncation(_)) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn roundtrip_ratios_scale_invariant() {
        let couple = standard_couple();
        let w = Weight::power(0.5, 2.0).unwrap();
        let a1 = Element::unit(1);
        let a10 = Element::sequence(1, vec![10.0]);
        let r1 = roundtrip_experiment(&a1, &couple, &w, 2.0, &ExtensionMode::Local).unwrap();
        let r10 = roundtrip_experiment(&a10, &couple, &w, 2.0, &ExtensionMode::Local).unwrap();
        assert_relative_eq!(
            r1.extension.ratio,
            r10.extension.ratio,
            max_relative = 1e-6
        );
        assert_relative_eq!(r1.trace.ratio, r10.trace.ratio, max_relative = 1e-6);
    }

    #[test]
    fn weighted_norm_monotone_in_weight() {
        let ts: Vec<f64> = LogGrid::new(1e-3, 1e3, 16).unwrap().points();
        let gs: Vec<f64> = ts.iter().map(|&t| (-t).exp() + 0.1 / (1.0 + t * t)).collect();
        let w_small = Weight::one(2.0).unwrap();
        let w_big = Weight::custom(|t: f64| 1.0 + (-t.abs()).exp(), 2.0, "1+e^{-t}").unwrap();
        let n_small = lp_time_norm(&ts, &gs, &w_small, 2.0).unwrap();
        let n_big = lp_time_norm(&ts, &gs, &w_big, 2.0).unwrap();
        assert!(n_big >= n_small, "{n_big} < {n_small}");
    }

    #[test]
    fn battery_bands_are_stable() {
        let cases = battery_cases();
        assert_eq!(cases.len(), 22);
        let results = run_battery(&cases);
        let mut ext_ratios = Vec::new();
        let mut trace_ratios = Vec::new();
        for (case, res) in &results {
            let out = res
                .as_ref()
                .unwrap_or_else(|e| panic!("case {} failed: {e}", case.case_id));
            assert!(
                out.extension.ratio.is_finite() && out.extension.ratio > 0.0,
                "case {}",
                case.case_id
            );
            assert!(
                out.trace.ratio.is_finite() && out.trace.ratio > 0.0,
                "case {}",
                case.case_id
            );
            ext_ratios.push(out.extension.ratio);
            trace_ratios.push(out.trace.ratio);
        }
        let minmax = |v: &[f64]| -> (f64, f64) {
            (
                v.iter().fold(f64::INFINITY, |s, &x| s.min(x)),
                v.iter().fold(0.0f64, |s, &x| s.max(x)),
            )
        };
        let (ext_lo, ext_hi) = minmax(&ext_ratios);
        let (tr_lo, tr_hi) = minmax(&trace_ratios);
        eprintln!(
            "battery extension ratios: [{ext_lo:.4}, {ext_hi:.4}], trace ratios: [{tr_lo:.4}, {tr_hi:.4}]"
        );
        assert!(ext_hi / ext_lo < 100.0, "extension band {}", ext_hi / ext_lo);
        assert!(tr_hi / tr_lo < 100.0, "trace band {}", tr_hi / tr_lo);
        // Tighter regression pins on the observed deterministic bands.
        assert!(ext_lo > 0.5 && ext_hi < 1.2, "extension ratios [{ext_lo}, {ext_hi}]");
        assert!(tr_lo > 0.95 && tr_hi < 2.5, "trace ratios [{tr_lo}, {tr_hi}]");
    }

    #[test]
    fn finite_interval_matches_half_line_for_large_horizon() {
        let couple = standard_couple();
        let w = Weight::one(2.0).unwrap();
        let a = Element::unit(0);
        let ext = construct_extension(&a, &couple, &w, 2.0, &ExtensionMode::Local).unwrap();
        let half_line = trace_bound(&ext.u, &ext.f, ext.j_min, &couple, &w, 2.0, None)
            .unwrap()
            .bound;
        // Large horizon: the cutoff touches only negligible data.
        let fi = finite_interval_trace(
            &ext.u, &ext.f, ext.j_min, 2e3, &couple, &w, 2.0, None,
        )
        .unwrap();
        assert!(
            (fi.bound / half_line - 1.0).abs() < 0.05,
            "horizon 2e3: {} vs {}",
            fi.bound,
            half_line
        );
        // Modest horizon: still within a factor band of the half-line bound.
        let (ur, fr) = restrict_pair(&ext.u, &ext.f, 4.0).unwrap();
        let fi4 = finite_interval_trace(&ur, &fr, ext.j_min, 4.0, &couple, &w, 2.0, None).unwrap();
        assert!(fi4.bound.is_finite() && fi4.bound > 0.0);
        let ratio = fi4.bound / half_line;
        eprintln!(
            "finite interval: horizon 2e3 ratio {:.6}, horizon 4 ratio {ratio:.4}",
            fi.bound / half_line
        );
        assert!(ratio < 1.2 && ratio > 0.8, "ratio {ratio}");
        assert_eq!(fi.embedding_constant, Some(1.0));
    }

    #[test]
    fn finite_interval_recovers_constant_state() {
        let couple = standard_couple();
        let w = Weight::one(2.0).unwrap();
        let t_horizon = 8.0;
        let ts: Vec<f64> = {
            let mut v = vec![0.0];
            v.extend(LogGrid::new(1e-4, t_horizon, 8).unwrap().points());
            v
        };
        let n = ts.len();
        let u = GridFunction::new(ts.clone(), vec![vec![2.0]; n]).unwrap();
        let f = GridFunction::new(ts, vec![vec![0.0]; n]).unwrap();
        let fi = finite_interval_trace(&u, &f, 0, t_horizon, &couple, &w, 2.0, None).unwrap();
        eprintln!("constant-state recovery ratio {:.4}", fi.ratio);
        assert!(fi.bound.is_finite() && fi.bound > 0.0);
        assert!(
            fi.ratio > 1.0 && fi.ratio < 3.0,
            "recovered ratio {} out of band",
            fi.ratio
        );
    }

    #[test]
    fn finite_interval_nonlocal_split() {
        let couple = standard_couple();
        let w = Weight::power(-0.5, 2.0).unwrap();
        let a = Element::unit(0);
        let kernel = Kernel::caputo(0.5, LogGrid::default()).unwrap();
        let mode = ExtensionMode::Nonlocal {
            kernel: kernel.clone(),
            theta: ThetaStrategy::ClosedHalf,
        };
        let ext = construct_extension(&a, &couple, &w, 2.0, &mode).unwrap();
        let (ur, fr) = restrict_pair(&ext.u, &ext.f, 16.0).unwrap();
        let fi = finite_interval_trace(
            &ur,
            &fr,
            ext.j_min,
            16.0,
            &couple,
            &w,
            2.0,
            Some(&kernel),
        )
        .unwrap();
        assert!(fi.bound.is_finite() && fi.bound > 0.0);
        let u0b = fi.u0_x1_bound.unwrap();
        eprintln!(
            "nonlocal finite interval: bound {:.6e}, ratio {:.4}, u0 bound {u0b:.4}",
            fi.bound, fi.ratio
        );
        assert!(u0b.is_finite() && u0b > 0.0);
        // The explicit bound really dominates ‖u(0)‖_{A_1} = 1 and stays
        // close to it for this slowly-varying pair.
        assert!(u0b >= 1.0 - 0.05 && u0b < 2.0, "u0 bound {u0b}");
        assert!(fi.ratio > 0.95 && fi.ratio < 2.0, "ratio {}", fi.ratio);
    }

    #[test]
    fn finite_interval_requires_embedding() {
        // σ0 < σ1: no continuous embedding A_0 ↪ A_1 on positive indices.
        let couple = InterpolationCouple::sequence(f64::INFINITY, 0.0, f64::INFINITY, 1.0).unwrap();
        let w = Weight::one(2.0).unwrap();
        let ts = default_time_grid();
        let n = ts.len();
        let u = GridFunction::new(ts.clone(), vec![vec![1.0]; n]).unwrap();
        let f = GridFunction::new(ts, vec![vec![0.0]; n]).unwrap();
        match finite_interval_trace(&u, &f, 1, 4.0, &couple, &w, 2.0, None) {
            Err(Error::Precondition(_)) => {}
            other => panic!("expected precondition error, got {other:?}"),
        }
    }

    #[test]
    fn kernel_mass_majorant_holds() {
        // M0(t) ≤ e · t · φ(1/t): the bound behind the kernel-mass tail.
        for &alpha in &[0.3, 0.5, 0.7] {
            let kernel = Kernel::caputo(alpha, LogGrid::default()).unwrap();
            let phi = kernel.laplace_phi(PhiMethod::Auto).unwrap();
            let moments = kernel.moments();
            for &t in &[1e-3, 0.1, 1.0, 10.0, 1e3] {
                let lhs = moments.m0(t).unwrap();
                let rhs = std::f64::consts::E * t * phi.eval(1.0 / t);
                assert!(lhs <= rhs * (1.0 + 1e-12), "α={alpha}, t={t}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn cutoff_shape() {
        let t_h = 4.0;
        assert_eq!(cutoff(0.0, t_h), 1.0);
        assert_eq!(cutoff(2.0, t_h), 1.0);
        assert_eq!(cutoff(4.0, t_h), 0.0);
        assert_eq!(cutoff(5.0, t_h), 0.0);
        assert_relative_eq!(cutoff(3.0, t_h), 0.5, max_relative = 1e-12);
        // Derivative consistency by central differences.
        for &s in &[2.3, 2.8, 3.4, 3.9] {
            let h = 1e-6;
            let num = (cutoff(s + h, t_h) - cutoff(s - h, t_h)) / (2.0 * h);
            assert_relative_eq!(cutoff_derivative(s, t_h), num, max_relative = 1e-6);
        }
    }
}
