//! `simulate`: Monte-Carlo check of the subordinator Laplace transform.
//! `theta`: tabulate the relaxation profile (closed form and/or MC) and
//! check its structural properties.
//! `sonine`: verify the kernel/potential pairing identities.

use super::{close, st_check};
use crate::config::{
    d_n, d_seed, load_config, parse_kernel_spec, Common, Format, GridSpec, OneOrMany,
};
use crate::fail::{CmdResult, Failure};
use crate::out::{emit, num, sig12, to_value, Report};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;
use traceops::kernel::{KernelDescriptor, PhiMethod};
use traceops::rng::task_rng;
use traceops::scaling::ScalingFunction;
use traceops::subordinator::{
    check_laplace, check_theta_properties, closed_half, sonine_check, stable_varkappa,
    stable_varkappa_mc, theta_mc_curve, SamplerStrategy, SubordinatorSampler,
};

use super::kernel::d_kernel;

fn d_delta() -> f64 {
    1e-3
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Inline kernel spec: caputo:<alpha> or a JSON descriptor.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Sample count per (r, lambda) combination.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub command: String,
    #[serde(default = "d_kernel")]
    pub kernel: KernelDescriptor,
    #[serde(default)]
    pub strategy: SamplerStrategy,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_probe")]
    pub rs: OneOrMany,
    #[serde(default = "d_probe")]
    pub lambdas: OneOrMany,
    #[serde(default)]
    pub method: PhiMethod,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_probe() -> OneOrMany {
    OneOrMany::Many(vec![0.5, 1.0, 2.0])
}

pub fn simulate(args: SimulateArgs) -> CmdResult {
    if args.common.selftest {
        return simulate_selftest();
    }
    let mut cfg: SimulateConfig = load_config(args.common.config.as_ref(), "simulate")?;
    if let Some(spec) = &args.kernel {
        cfg.kernel = parse_kernel_spec(spec)?;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let kernel = cfg.kernel.build(cfg.grid.build()?)?;
    let phi = kernel.laplace_phi(cfg.method)?;
    let sampler = SubordinatorSampler::for_kernel(&kernel, cfg.strategy, cfg.delta)?;
    let combos: Vec<(f64, f64)> = cfg
        .rs
        .vec()
        .iter()
        .flat_map(|&r| cfg.lambdas.vec().into_iter().map(move |l| (r, l)))
        .collect();
    let mut rng = task_rng(cfg.seed, 0);
    let checks = check_laplace(&sampler, &phi, &combos, cfg.n, &mut rng)?;

    let all_covered = checks.iter().all(|c| c.covered);
    let summary = json!({
        "strategy": sampler.strategy_name(),
        "all_covered": all_covered,
        "combos": checks.len(),
    });
    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let columns = ["r", "lambda", "target", "estimate", "half_width", "covered"];
    let text = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = checks
                .iter()
                .map(|c| {
                    vec![
                        sig12(c.r),
                        sig12(c.lambda),
                        sig12(c.target),
                        sig12(c.estimate.value),
                        sig12(c.estimate.half_width_95),
                        c.covered.to_string(),
                    ]
                })
                .collect();
            report.csv(Some(&summary), &columns, &rows)
        }
        Format::Json => {
            let rows: Vec<serde_json::Value> = checks
                .iter()
                .map(|c| {
                    json!({
                        "r": num(c.r),
                        "lambda": num(c.lambda),
                        "target": num(c.target),
                        "estimate": num(c.estimate.value),
                        "half_width": num(c.estimate.half_width_95),
                        "covered": c.covered,
                    })
                })
                .collect();
            report.json(json!({ "summary": summary, "rows": rows }))
        }
    };
    emit(&text, cfg.output.as_ref())?;

    if !all_covered {
        let misses: Vec<String> = checks
            .iter()
            .filter(|c| !c.covered)
            .map(|c| format!("(r={}, lambda={})", c.r, c.lambda))
            .collect();
        return Err(Failure::Check(format!(
            "Laplace-transform estimate outside 3 half-widths at {}",
            misses.join(", ")
        )));
    }
    Ok(())
}

fn simulate_selftest() -> CmdResult {
    let grid = GridSpec::default().build()?;
    let kernel = KernelDescriptor::Caputo { alpha: 0.5 }.build(grid)?;
    let phi = kernel.laplace_phi(PhiMethod::Auto)?;
    for (strategy, name) in [
        (SamplerStrategy::Stable, "stable sampler coverage"),
        (SamplerStrategy::CompoundPoisson, "compound-poisson sampler coverage"),
    ] {
        let sampler = SubordinatorSampler::for_kernel(&kernel, strategy, 1e-3)?;
        let mut rng = task_rng(7, 0);
        let checks = check_laplace(&sampler, &phi, &[(1.0, 1.0)], 4000, &mut rng)?;
        st_check(
            checks[0].covered,
            name,
            format!(
                "target {:.6e}, estimate {:.6e} ± {:.3e}",
                checks[0].target, checks[0].estimate.value, checks[0].estimate.half_width_95
            ),
        )?;
    }
    println!("selftest passed (2 checks)");
    Ok(())
}

// ---------------------------------------------------------------------------
// theta
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMethod {
    /// `both` for the half-order kernel, `mc` otherwise.
    Auto,
    Closed,
    Mc,
    Both,
}

impl Default for ThetaMethod {
    fn default() -> Self {
        ThetaMethod::Auto
    }
}

#[derive(Debug, clap::Args)]
pub struct ThetaArgs {
    /// Kernel order of the fractional derivative.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sample count for Monte-Carlo curves.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    pub command: String,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_theta_ts")]
    pub t: OneOrMany,
    #[serde(default = "d_theta_lambdas")]
    pub lambda: OneOrMany,
    #[serde(default)]
    pub method: ThetaMethod,
    #[serde(default)]
    pub strategy: SamplerStrategy,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_alpha() -> f64 {
    0.5
}
fn d_theta_ts() -> OneOrMany {
    OneOrMany::Many(vec![0.25, 0.5, 1.0, 2.0, 4.0])
}
fn d_theta_lambdas() -> OneOrMany {
    OneOrMany::Many(vec![0.5, 1.0, 2.0, 4.0, 8.0])
}

pub fn theta(args: ThetaArgs) -> CmdResult {
    if args.common.selftest {
        return theta_selftest();
    }
    let mut cfg: ThetaConfig = load_config(args.common.config.as_ref(), "theta")?;
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let half_order = (cfg.alpha - 0.5).abs() < 1e-12;
    let method = match cfg.method {
        ThetaMethod::Auto => {
            if half_order {
                ThetaMethod::Both
            } else {
                ThetaMethod::Mc
            }
        }
        m => m,
    };
    if matches!(method, ThetaMethod::Closed | ThetaMethod::Both) && !half_order {
        return Err(Failure::Usage(format!(
            "the closed relaxation profile needs alpha = 0.5, got {}",
            cfg.alpha
        )));
    }

    let ts = cfg.t.vec();
    let lambdas = cfg.lambda.vec();
    if ts.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Failure::Usage("theta times must be finite and nonnegative".into()));
    }

    // Monte-Carlo curves per lambda (when requested): survival estimates at
    // the probe times plus t = 0, one derived rng stream per lambda.
    let mc = if matches!(method, ThetaMethod::Mc | ThetaMethod::Both) {
        let kernel = KernelDescriptor::Caputo { alpha: cfg.alpha }.build(cfg.grid.build()?)?;
        let sampler = SubordinatorSampler::for_kernel(&kernel, cfg.strategy, cfg.delta)?;
        let mut ts_zero = vec![0.0];
        ts_zero.extend(&ts);
        let mut curves = Vec::with_capacity(lambdas.len());
        for (i, &lam) in lambdas.iter().enumerate() {
            let mut rng = task_rng(cfg.seed, i as u64);
            curves.push(theta_mc_curve(&sampler, &ts_zero, lam, cfg.n, &mut rng)?);
        }
        Some((ts_zero, curves))
    } else {
        None
    };

    // Exact-match lookup into the MC table, usable as a plain Θ function on
    // the probe grid (including t = 0).
    let mc_at = |ti: usize, li: usize| -> &traceops::report::MCEstimate {
        let (_, curves) = mc.as_ref().expect("mc table");
        &curves[li][ti]
    };

    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut uncovered: Vec<String> = Vec::new();
    for (li, &lam) in lambdas.iter().enumerate() {
        for (ti, &t) in ts.iter().enumerate() {
            let (value, ci) = match method {
                ThetaMethod::Closed => (closed_half::theta(t, lam), 0.0),
                ThetaMethod::Mc => {
                    let est = mc_at(ti + 1, li);
                    (est.value, est.half_width_95)
                }
                ThetaMethod::Both => {
                    let exact = closed_half::theta(t, lam);
                    let est = mc_at(ti + 1, li);
                    // Rule-of-three slack covers the zero-variance corner of
                    // Bernoulli survival estimates.
                    let slack = 3.0 * est.half_width_95 + 3.0 / cfg.n as f64;
                    if (exact - est.value).abs() > slack {
                        uncovered.push(format!("(t={t}, lambda={lam})"));
                    }
                    (exact, est.half_width_95)
                }
                ThetaMethod::Auto => unreachable!("resolved above"),
            };
            rows.push((t, lam, value, ci));
        }
    }

    // Structural checks: normalization at t = 0, monotonicity, and the
    // two-sided comparison band against 1 ∧ φ(1/t)/λ.
    let phi = ScalingFunction::power(cfg.alpha, cfg.grid.build()?);
    let theta_fn: Box<dyn Fn(f64, f64) -> f64> = match method {
        ThetaMethod::Closed | ThetaMethod::Both => Box::new(closed_half::theta),
        _ => {
            let (ts_zero, _) = mc.as_ref().expect("mc table");
            let ts_zero = ts_zero.clone();
            let lam_list = lambdas.clone();
            let values: Vec<Vec<f64>> = {
                let (_, curves) = mc.as_ref().expect("mc table");
                curves
                    .iter()
                    .map(|c| c.iter().map(|e| e.value).collect())
                    .collect()
            };
            Box::new(move |t: f64, lam: f64| {
                let ti = ts_zero.iter().position(|&x| x == t).expect("probe time");
                let li = lam_list.iter().position(|&x| x == lam).expect("probe rate");
                values[li][ti]
            })
        }
    };
    let properties = check_theta_properties(&*theta_fn, &phi, &ts, &lambdas)?;

    let structural_ok = (properties.value_at_zero - 1.0).abs() <= 1e-9
        && properties.monotone_in_t
        // Independent MC curves are allowed to wobble across lambda.
        && (matches!(method, ThetaMethod::Mc) || properties.monotone_in_lambda);

    let summary = json!({
        "method": method,
        "all_covered": uncovered.is_empty(),
        "properties": to_value(&properties)?,
    });
    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let out_rows: Vec<Vec<String>> = rows
                .iter()
                .map(|(t, lam, th, ci)| vec![sig12(*t), sig12(*lam), sig12(*th), sig12(*ci)])
                .collect();
            report.csv(Some(&summary), &["t", "lambda", "theta", "ci"], &out_rows)
        }
        Format::Json => {
            let out_rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|(t, lam, th, ci)| {
                    json!({ "t": num(*t), "lambda": num(*lam), "theta": num(*th), "ci": num(*ci) })
                })
                .collect();
            report.json(json!({ "summary": summary, "rows": out_rows }))
        }
    };
    emit(&text, cfg.output.as_ref())?;

    if !uncovered.is_empty() {
        return Err(Failure::Check(format!(
            "closed-form and Monte-Carlo profiles disagree beyond 3 half-widths at {}",
            uncovered.join(", ")
        )));
    }
    if !structural_ok {
        return Err(Failure::Check(format!(
            "relaxation profile violates structure: value_at_zero {:.6e}, monotone_in_t {}, monotone_in_lambda {}",
            properties.value_at_zero, properties.monotone_in_t, properties.monotone_in_lambda
        )));
    }
    Ok(())
}

fn theta_selftest() -> CmdResult {
    st_check(
        close(closed_half::theta(0.0, 3.0), 1.0, 1e-12),
        "profile normalization at zero",
        format!("theta(0, 3) = {:.12e}", closed_half::theta(0.0, 3.0)),
    )?;
    let v = closed_half::theta(1.0, 1.0);
    st_check(
        v > 0.4275 && v < 0.4276,
        "closed-form value at (1, 1)",
        format!("theta(1, 1) = {v:.6e}"),
    )?;
    let dec_t = closed_half::theta(2.0, 1.0) < closed_half::theta(1.0, 1.0);
    let dec_l = closed_half::theta(1.0, 2.0) < closed_half::theta(1.0, 1.0);
    st_check(
        dec_t && dec_l,
        "profile monotone in both arguments",
        format!("dec_t {dec_t}, dec_l {dec_l}"),
    )?;

    let grid = GridSpec::default().build()?;
    let kernel = KernelDescriptor::Caputo { alpha: 0.5 }.build(grid)?;
    let sampler = SubordinatorSampler::for_kernel(&kernel, SamplerStrategy::Stable, 1e-3)?;
    let mut rng = task_rng(7, 0);
    let est = &theta_mc_curve(&sampler, &[1.0], 1.0, 4000, &mut rng)?[0];
    st_check(
        (est.value - v).abs() <= 3.0 * est.half_width_95 + 3.0 / 4000.0,
        "Monte-Carlo profile covers the closed form",
        format!("estimate {:.6e} ± {:.3e} against {:.6e}", est.value, est.half_width_95, v),
    )?;
    println!("selftest passed (4 checks)");
    Ok(())
}

// ---------------------------------------------------------------------------
// sonine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SonineMethod {
    Closed,
    Mc,
}

impl Default for SonineMethod {
    fn default() -> Self {
        SonineMethod::Closed
    }
}

#[derive(Debug, clap::Args)]
pub struct SonineArgs {
    /// Kernel order of the fractional derivative.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SonineConfig {
    pub command: String,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<OneOrMany>,
    #[serde(default = "d_panels")]
    pub panels: usize,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default)]
    pub method: SonineMethod,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_panels() -> usize {
    512
}
fn d_tol() -> f64 {
    1e-3
}

fn default_sonine_ts() -> Vec<f64> {
    // Twenty probe times, log-spaced over four decades.
    (0..20)
        .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 19.0))
        .collect()
}

pub fn sonine(args: SonineArgs) -> CmdResult {
    if args.common.selftest {
        return sonine_selftest();
    }
    let mut cfg: SonineConfig = load_config(args.common.config.as_ref(), "sonine")?;
    if let Some(alpha) = args.alpha {
        cfg.alpha = alpha;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let ts = cfg
        .t
        .as_ref()
        .map(OneOrMany::vec)
        .unwrap_or_else(default_sonine_ts);
    let kernel = KernelDescriptor::Caputo { alpha: cfg.alpha }.build(cfg.grid.build()?)?;
    let alpha = cfg.alpha;
    let varkappa = move |t: f64| stable_varkappa(alpha, t);
    let rep = sonine_check(&kernel, &varkappa, &ts, cfg.panels)?;
    let closed_pass = rep.stieltjes_max_err <= cfg.tol && rep.convolution_max_rel_err <= cfg.tol;

    // MC mode: additionally require the sampled potential to cover the
    // closed form at every probe time.
    let mc_rows = if cfg.method == SonineMethod::Mc {
        let mut rng = task_rng(cfg.seed, 0);
        let ests = stable_varkappa_mc(cfg.alpha, &ts, cfg.n, &mut rng)?;
        Some(
            ests.iter()
                .map(|(t, est)| {
                    let target = stable_varkappa(cfg.alpha, *t);
                    (*t, est.value, est.half_width_95, target, est.covers(target, 3.0))
                })
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let mc_pass = mc_rows
        .as_ref()
        .map(|rows| rows.iter().all(|r| r.4))
        .unwrap_or(true);

    let summary = json!({
        "stieltjes_max_err": num(rep.stieltjes_max_err),
        "convolution_max_rel_err": num(rep.convolution_max_rel_err),
        "tol": num(cfg.tol),
        "mc_covered": mc_pass,
    });
    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => {
            let rows = mc_rows.as_ref().map(|rows| {
                rows.iter()
                    .map(|(t, v, hw, target, covered)| {
                        json!({
                            "t": num(*t),
                            "varkappa_mc": num(*v),
                            "half_width": num(*hw),
                            "target": num(*target),
                            "covered": covered,
                        })
                    })
                    .collect::<Vec<_>>()
            });
            report.json(json!({ "summary": summary, "mc_rows": rows }))
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = match &mc_rows {
                Some(rows) => rows
                    .iter()
                    .map(|(t, v, hw, target, covered)| {
                        vec![sig12(*t), sig12(*v), sig12(*hw), sig12(*target), covered.to_string()]
                    })
                    .collect(),
                None => ts
                    .iter()
                    .map(|&t| {
                        vec![
                            sig12(t),
                            sig12(stable_varkappa(cfg.alpha, t)),
                            sig12(0.0),
                            sig12(stable_varkappa(cfg.alpha, t)),
                            "true".to_string(),
                        ]
                    })
                    .collect(),
            };
            report.csv(
                Some(&summary),
                &["t", "varkappa", "half_width", "target", "covered"],
                &rows,
            )
        }
    };
    emit(&text, cfg.output.as_ref())?;

    if !closed_pass {
        return Err(Failure::Check(format!(
            "pairing identities deviate beyond {:.1e}: stieltjes {:.3e}, convolution {:.3e}",
            cfg.tol, rep.stieltjes_max_err, rep.convolution_max_rel_err
        )));
    }
    if !mc_pass {
        return Err(Failure::Check(
            "Monte-Carlo potential misses the closed form beyond 3 half-widths".into(),
        ));
    }
    Ok(())
}

fn sonine_selftest() -> CmdResult {
    let grid = GridSpec::default().build()?;
    let kernel = KernelDescriptor::Caputo { alpha: 0.5 }.build(grid)?;
    let vk = |t: f64| stable_varkappa(0.5, t);
    let ts = [0.01, 0.1, 1.0, 10.0, 100.0];
    let rep = sonine_check(&kernel, &vk, &ts, 128)?;
    st_check(
        rep.stieltjes_max_err < 1e-3,
        "unit pairing identity",
        format!("max deviation {:.3e}", rep.stieltjes_max_err),
    )?;
    st_check(
        rep.convolution_max_rel_err < 1e-3,
        "linear pairing identity",
        format!("max relative error {:.3e}", rep.convolution_max_rel_err),
    )?;
    println!("selftest passed (2 checks)");
    Ok(())
}
