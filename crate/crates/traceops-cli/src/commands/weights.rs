//! `ap-constant`: sweep the Muckenhoupt characteristic of a weight.
//! `hardy`: two-weight Hardy constants, analytic and empirical.
//! `extend-weight`: extend a weight beyond its horizon with flat tails.

use super::{close, st_check};
use crate::config::{
    d_seed, d_weight_power_zero, load_config, weight_with_overrides, Common, Format, GridSpec,
    OneOrMany,
};
use crate::fail::{CmdResult, Failure};
use crate::out::{emit, num, sig12, to_value, Report};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;
use traceops::weights::{
    ap_constant, extend_weight, hardy_constants, hardy_cp, hardy_empirical, ApVerdict,
    DyadicBudget, HardyPair, Weight, WeightSpec,
};

// ---------------------------------------------------------------------------
// ap-constant
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct ApArgs {
    /// Power-weight exponent (overrides the config weight).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Lebesgue exponent paired with the weight.
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApConfig {
    pub command: String,
    #[serde(default = "d_weight_power_zero")]
    pub weight: WeightSpec,
    #[serde(default)]
    pub budget: DyadicBudget,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

pub fn ap(args: ApArgs) -> CmdResult {
    if args.common.selftest {
        return ap_selftest();
    }
    let mut cfg: ApConfig = load_config(args.common.config.as_ref(), "ap-constant")?;
    let w = weight_with_overrides(&mut cfg.weight, args.gamma, args.p)?;
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let verdict = ap_constant(&w, &cfg.budget)?;
    let results = match &verdict {
        ApVerdict::Finite(rep) => json!({
            "verdict": "finite",
            "p": num(rep.p),
            "constant": num(rep.constant),
            "witness": [num(rep.witness.0), num(rep.witness.1)],
            "intervals_checked": rep.intervals_checked,
            "label": w.label(),
        }),
        ApVerdict::NotInAp { witness, detail } => json!({
            "verdict": "not_in_ap",
            "witness": [num(witness.0), num(witness.1)],
            "detail": detail,
            "label": w.label(),
        }),
    };

    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => report.json(results.clone()),
        Format::Csv => report.kv_csv(&results),
    };
    emit(&text, cfg.output.as_ref())?;

    if let ApVerdict::NotInAp { witness, detail } = &verdict {
        return Err(Failure::Check(format!(
            "weight '{}' is not in the Muckenhoupt class: {} (witness interval [{:.3e}, {:.3e}])",
            w.label(),
            detail,
            witness.0,
            witness.1
        )));
    }
    Ok(())
}

fn ap_selftest() -> CmdResult {
    let w = Weight::power(0.0, 2.0)?;
    let verdict = ap_constant(&w, &DyadicBudget::default())?;
    let c = verdict.constant();
    st_check(
        matches!(c, Some(c) if (1.0..1.01).contains(&c)),
        "unit weight has unit characteristic",
        format!("constant {c:?}"),
    )?;

    let w = Weight::power(3.0, 2.0)?;
    let verdict = ap_constant(&w, &DyadicBudget::default())?;
    st_check(
        matches!(verdict, ApVerdict::NotInAp { .. }),
        "supercritical power refuted",
        format!("verdict {:?}", verdict.constant()),
    )?;
    println!("selftest passed (2 checks)");
    Ok(())
}

// ---------------------------------------------------------------------------
// hardy
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Trace,
    ExtensionNear,
    ExtensionFar,
}

impl Default for PairKind {
    fn default() -> Self {
        PairKind::Trace
    }
}

#[derive(Debug, clap::Args)]
pub struct HardyArgs {
    /// Power-weight exponent (overrides the config weight).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Lebesgue exponent paired with the weight.
    #[arg(long)]
    pub p: Option<f64>,
    /// Number of random test functions for the empirical sweep.
    #[arg(long)]
    pub trials: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardyConfig {
    pub command: String,
    #[serde(default = "d_weight_power_zero")]
    pub weight: WeightSpec,
    #[serde(default)]
    pub pair: PairKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<OneOrMany>,
    #[serde(default = "d_trials")]
    pub trials: u64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_trials() -> u64 {
    200
}

fn default_r_grid() -> Vec<f64> {
    (-16..=16).map(|k| (k as f64 / 2.0).exp2()).collect()
}

fn build_pair(kind: PairKind, w: &Weight) -> Result<HardyPair, Failure> {
    match kind {
        PairKind::Trace => HardyPair::trace_pair(w),
        PairKind::ExtensionNear => HardyPair::extension_pair_near(w),
        PairKind::ExtensionFar => HardyPair::extension_pair_far(w),
    }
    .map_err(Into::into)
}

pub fn hardy(args: HardyArgs) -> CmdResult {
    if args.common.selftest {
        return hardy_selftest();
    }
    let mut cfg: HardyConfig = load_config(args.common.config.as_ref(), "hardy")?;
    let w = weight_with_overrides(&mut cfg.weight, args.gamma, args.p)?;
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let pair = build_pair(cfg.pair, &w)?;
    let p = w.p();
    let rs = cfg.r.as_ref().map(OneOrMany::vec).unwrap_or_else(default_r_grid);
    let constants = hardy_constants(&pair, p, &rs)?;

    let empirical = if constants.diverged {
        None
    } else {
        Some(hardy_empirical(&pair, p, cfg.trials, cfg.seed)?)
    };

    let results = json!({
        "label": w.label(),
        "pair": cfg.pair,
        "p": num(p),
        "calibration": num(hardy_cp(p)),
        "constants": to_value(&constants)?,
        "empirical": empirical.as_ref().map(|e| to_value(e)).transpose()?,
    });
    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => report.json(results.clone()),
        Format::Csv => report.kv_csv(&results),
    };
    emit(&text, cfg.output.as_ref())?;

    if constants.diverged {
        return Err(Failure::Check(format!(
            "Hardy product diverges for '{}': {}",
            w.label(),
            constants.detail
        )));
    }
    let emp = empirical.expect("computed when finite");
    if !emp.pass {
        return Err(Failure::Check(format!(
            "empirical constant {:.6e} exceeds the calibrated bound {:.6e}",
            emp.c_emp, emp.c_bound
        )));
    }
    Ok(())
}

fn hardy_selftest() -> CmdResult {
    let w = Weight::one(2.0)?;
    let pair = HardyPair::trace_pair(&w)?;
    let rep = hardy_constants(&pair, 2.0, &default_r_grid())?;
    st_check(
        close(rep.b, 1.0, 1e-3) && rep.r_variation < 0.01 && !rep.diverged,
        "unit-weight trace pair has unit constant",
        format!("b {:.6e}, r_variation {:.3e}", rep.b, rep.r_variation),
    )?;
    let emp = hardy_empirical(&pair, 2.0, 25, 42)?;
    st_check(
        emp.pass && emp.c_emp <= emp.c_bound,
        "empirical sweep below the calibrated bound",
        format!("c_emp {:.6e}, c_bound {:.6e}", emp.c_emp, emp.c_bound),
    )?;
    println!("selftest passed (2 checks)");
    Ok(())
}

// ---------------------------------------------------------------------------
// extend-weight
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct ExtendArgs {
    /// Power-weight exponent (overrides the config weight).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Lebesgue exponent paired with the weight.
    #[arg(long)]
    pub p: Option<f64>,
    /// Horizon beyond which the weight is extended.
    #[arg(long)]
    pub t_horizon: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendConfig {
    pub command: String,
    #[serde(default = "d_weight_power_half")]
    pub weight: WeightSpec,
    #[serde(default = "d_horizon")]
    pub t_horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "d_slope_tol")]
    pub slope_tol: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_weight_power_half() -> WeightSpec {
    WeightSpec::Power {
        gamma: 0.5,
        p: 2.0,
        t_horizon: None,
    }
}
fn d_horizon() -> f64 {
    1.0
}
fn d_slope_tol() -> f64 {
    0.05
}

pub fn extend(args: ExtendArgs) -> CmdResult {
    if args.common.selftest {
        return extend_selftest();
    }
    let mut cfg: ExtendConfig = load_config(args.common.config.as_ref(), "extend-weight")?;
    let w = weight_with_overrides(&mut cfg.weight, args.gamma, args.p)?;
    if let Some(h) = args.t_horizon {
        cfg.t_horizon = h;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let ext = extend_weight(&w, cfg.t_horizon, cfg.epsilon, None)?;
    let rep = &ext.report;
    let target = -1.0 + rep.epsilon;
    let right_ok = (rep.tail_slope_right - target).abs() <= cfg.slope_tol;
    // The side that carried no original mass approaches its asymptote more
    // slowly, so it gets twice the slack.
    let left_ok = (rep.tail_slope_left - target).abs() <= 2.0 * cfg.slope_tol;

    let summary = json!({
        "epsilon": num(rep.epsilon),
        "gamma_aux": num(rep.gamma_aux),
        "target_slope": num(target),
        "tail_slope_right": num(rep.tail_slope_right),
        "tail_slope_left": num(rep.tail_slope_left),
        "slopes_ok": right_ok && left_ok,
        "ap_constant": num(rep.ap.constant),
        "ap_intervals": rep.ap.intervals_checked,
    });
    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => report.json(summary.clone()),
        Format::Csv => {
            // Plot-ready samples of the extended weight on both sides.
            let grid = cfg.grid.build()?;
            let mut rows: Vec<Vec<String>> = Vec::new();
            for &t in grid.points().iter().rev() {
                rows.push(vec![sig12(-t), sig12(ext.weight.eval(-t))]);
            }
            for &t in &grid.points() {
                rows.push(vec![sig12(t), sig12(ext.weight.eval(t))]);
            }
            report.csv(Some(&summary), &["t", "w"], &rows)
        }
    };
    emit(&text, cfg.output.as_ref())?;

    if !(right_ok && left_ok) {
        return Err(Failure::Check(format!(
            "extended tails miss the target slope {target:.4}: right {:.4} (tol {}), left {:.4} (tol {})",
            rep.tail_slope_right,
            cfg.slope_tol,
            rep.tail_slope_left,
            2.0 * cfg.slope_tol
        )));
    }
    Ok(())
}

fn extend_selftest() -> CmdResult {
    let flat = Weight::one(2.0)?;
    let ext = extend_weight(&flat, 1.0, Some(0.1), None)?;
    st_check(
        close(ext.report.tail_slope_right, -0.9, 0.05)
            && close(ext.report.tail_slope_left, -0.9, 0.05),
        "flat-weight tails near the design exponent",
        format!(
            "right {:.4}, left {:.4}",
            ext.report.tail_slope_right, ext.report.tail_slope_left
        ),
    )?;

    let w = Weight::power(0.5, 2.0)?;
    let ext = extend_weight(&w, 1.0, None, None)?;
    let target = -(1.0 - ext.report.epsilon);
    st_check(
        close(ext.report.tail_slope_right, target, 0.05),
        "auto-exponent tail slope",
        format!(
            "right {:.4} vs target {target:.4}",
            ext.report.tail_slope_right
        ),
    )?;
    st_check(
        ext.report.ap.constant.is_finite() && ext.report.ap.constant >= 1.0,
        "extension stays in the Muckenhoupt class",
        format!("constant {:.6e}", ext.report.ap.constant),
    )?;
    println!("selftest passed (3 checks)");
    Ok(())
}
