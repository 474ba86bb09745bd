//! `interp-norm`: compare the integral, dyadic, and block realizations of
//! the parameterized K-functional norm.
//! `besov-norm`: variable-smoothness Besov norm of periodic data.

use super::{close, st_check};
use crate::config::{
    d_seed, load_config, parse_phi_spec, Common, CoupleSpec, ElementSpec, Format, GridSpec,
};
use crate::fail::{CmdResult, Failure};
use crate::out::{emit, num, to_value, Report};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;
use traceops::interp::{
    besov_norm, besov_reconstruction_error, dyadic_norm, j_norm_upper, phi_norm_integral, Element,
    InterpolationCouple,
};
use traceops::scaling::ScalingDescriptor;

// ---------------------------------------------------------------------------
// interp-norm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    Integral,
    Dyadic,
    JUpper,
    All,
}

impl Default for NormMethod {
    fn default() -> Self {
        NormMethod::All
    }
}

#[derive(Debug, clap::Args)]
pub struct NormArgs {
    /// Inline scaling spec: power:<theta>, caputo:<alpha>, expr:<formula>,
    /// or a JSON descriptor.
    #[arg(long)]
    pub phi: Option<String>,
    /// Norm exponent.
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub command: String,
    #[serde(default)]
    pub couple: CoupleSpec,
    #[serde(default = "d_phi_half")]
    pub phi: ScalingDescriptor,
    #[serde(default = "d_p_one")]
    pub p: f64,
    #[serde(default)]
    pub element: ElementSpec,
    #[serde(default)]
    pub method: NormMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_start: Option<i64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_phi_half() -> ScalingDescriptor {
    ScalingDescriptor::Power {
        theta: 0.5,
        bounds: None,
    }
}
fn d_p_one() -> f64 {
    1.0
}

pub fn norm(args: NormArgs) -> CmdResult {
    if args.common.selftest {
        return norm_selftest();
    }
    let mut cfg: NormConfig = load_config(args.common.config.as_ref(), "interp-norm")?;
    if let Some(spec) = &args.phi {
        cfg.phi = parse_phi_spec(spec)?;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let couple = cfg.couple.build()?;
    let phi = cfg.phi.build(cfg.grid.build()?)?;
    let a = cfg.element.build()?;

    let want = |m: NormMethod| cfg.method == m || cfg.method == NormMethod::All;
    let integral = if want(NormMethod::Integral) {
        Some(phi_norm_integral(&couple, &phi, cfg.p, &a)?)
    } else {
        None
    };
    let dyadic = if want(NormMethod::Dyadic) {
        Some(dyadic_norm(&couple, &phi, cfg.p, &a, cfg.j_start)?)
    } else {
        None
    };
    let j_upper = if want(NormMethod::JUpper) {
        Some(j_norm_upper(&couple, &phi, cfg.p, &a)?)
    } else {
        None
    };

    let ratio = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) if y != 0.0 => Some(x / y),
        _ => None,
    };
    let results = json!({
        "label": phi.label(),
        "p": num(cfg.p),
        "integral": integral.map(num),
        "dyadic": dyadic.map(num),
        "j_upper": j_upper.map(num),
        "dyadic_over_integral": ratio(dyadic, integral).map(num),
        "j_over_dyadic": ratio(j_upper, dyadic).map(num),
    });
    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => report.json(results.clone()),
        Format::Csv => report.kv_csv(&results),
    };
    emit(&text, cfg.output.as_ref())?;

    let bad = [integral, dyadic, j_upper]
        .iter()
        .flatten()
        .any(|v| !v.is_finite());
    if bad {
        return Err(Failure::Check(format!(
            "a norm evaluated non-finite: integral {integral:?}, dyadic {dyadic:?}, block {j_upper:?}"
        )));
    }
    Ok(())
}

fn norm_selftest() -> CmdResult {
    let couple = InterpolationCouple::sequence(f64::INFINITY, 1.0, f64::INFINITY, 0.0)?;
    let phi = ScalingDescriptor::Power { theta: 0.5, bounds: None }
        .build(GridSpec::default().build()?)?;
    let a = Element::unit(0);

    let integral = phi_norm_integral(&couple, &phi, 1.0, &a)?;
    st_check(
        close(integral, 4.0, 4e-6),
        "integral norm of the unit coordinate",
        format!("integral {integral:.9e} against 4"),
    )?;

    let dyadic = dyadic_norm(&couple, &phi, 1.0, &a, None)?;
    let exact = 3.0 + 2.0 * std::f64::consts::SQRT_2;
    st_check(
        close(dyadic, exact, 1e-6 * exact),
        "dyadic norm of the unit coordinate",
        format!("dyadic {dyadic:.9e} against {exact:.9e}"),
    )?;

    let ratio = dyadic / integral;
    st_check(
        (0.5..=2.0 * std::f64::consts::SQRT_2).contains(&ratio),
        "dyadic/integral ratio inside the two-sided band",
        format!("ratio {ratio:.6e}"),
    )?;
    println!("selftest passed (3 checks)");
    Ok(())
}

// ---------------------------------------------------------------------------
// besov-norm
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct BesovArgs {
    /// Inline scaling spec for the smoothness factor.
    #[arg(long)]
    pub phi: Option<String>,
    /// Frequency of the probe Fourier mode.
    #[arg(long)]
    pub xi: Option<i64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovConfig {
    pub command: String,
    #[serde(default = "d_p_two")]
    pub p: f64,
    #[serde(default = "d_p_two")]
    pub q: f64,
    #[serde(default = "d_s0")]
    pub s0: f64,
    #[serde(default)]
    pub s1: f64,
    #[serde(default = "d_phi_half")]
    pub phi: ScalingDescriptor,
    #[serde(default = "d_grid_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<i64>,
    /// Explicit Fourier coefficients as [re, im] pairs (overrides `xi`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<[f64; 2]>>,
    /// Pointwise weight samples on the periodic grid (default: unweighted).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_p_two() -> f64 {
    2.0
}
fn d_s0() -> f64 {
    1.0
}
fn d_grid_n() -> usize {
    256
}

pub fn besov(args: BesovArgs) -> CmdResult {
    if args.common.selftest {
        return besov_selftest();
    }
    let mut cfg: BesovConfig = load_config(args.common.config.as_ref(), "besov-norm")?;
    if let Some(spec) = &args.phi {
        cfg.phi = parse_phi_spec(spec)?;
    }
    if let Some(xi) = args.xi {
        cfg.xi = Some(xi);
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let coeffs: Vec<Complex64> = match &cfg.coeffs {
        Some(pairs) => pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
        None => match Element::fourier_mode(cfg.n, cfg.xi.unwrap_or(8)) {
            Element::Fourier(c) => c,
            _ => unreachable!("fourier_mode builds Fourier storage"),
        },
    };
    let n = coeffs.len();
    let weight = match &cfg.weight {
        Some(w) => w.clone(),
        None => vec![1.0; n],
    };
    let phi = cfg.phi.build(cfg.grid.build()?)?;
    let norm = besov_norm(cfg.p, cfg.q, &weight, cfg.s0, cfg.s1, &phi, &coeffs)?;
    let reconstruction = besov_reconstruction_error(cfg.p, &weight, &coeffs)?;

    let results = json!({
        "norm": num(norm),
        "reconstruction_error": num(reconstruction),
        "n": n,
        "s0": num(cfg.s0),
        "s1": num(cfg.s1),
        "label": phi.label(),
    });
    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => report.json(results.clone()),
        Format::Csv => report.kv_csv(&results),
    };
    emit(&text, cfg.output.as_ref())?;

    if !norm.is_finite() || reconstruction > 1e-8 {
        return Err(Failure::Check(format!(
            "Besov evaluation failed: norm {norm:.6e}, reconstruction defect {reconstruction:.3e}"
        )));
    }
    Ok(())
}

fn besov_selftest() -> CmdResult {
    let phi = ScalingDescriptor::Power { theta: 0.5, bounds: None }
        .build(GridSpec::default().build()?)?;
    let coeffs = match Element::fourier_mode(64, 5) {
        Element::Fourier(c) => c,
        _ => unreachable!(),
    };
    let weight = vec![1.0; 64];
    let rec = besov_reconstruction_error(2.0, &weight, &coeffs)?;
    st_check(
        rec < 1e-10,
        "multiplier reconstruction telescopes",
        format!("defect {rec:.3e}"),
    )?;
    let norm = besov_norm(2.0, 2.0, &weight, 1.0, 0.0, &phi, &coeffs)?;
    st_check(
        norm.is_finite() && norm > 0.0,
        "single-mode norm is finite and positive",
        format!("norm {norm:.6e}"),
    )?;
    println!("selftest passed (2 checks)");
    Ok(())
}
