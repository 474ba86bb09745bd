//! Experiment-config plumbing shared by all subcommands.
//!
//! Every subcommand owns a config struct with `#[serde(deny_unknown_fields)]`
//! and per-field defaults; a config file must carry a `command` field naming
//! the subcommand it is for. Inline flags override config fields, and the
//! effective (defaults-filled, flag-merged) config is echoed in the report
//! header so a report is always reproducible from its own header.

use crate::fail::Failure;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use traceops::grid::{GridFunction, LogGrid};
use traceops::interp::{Element, InterpolationCouple};
use traceops::kernel::{Kernel, KernelDescriptor};
use traceops::scaling::ScalingDescriptor;
use traceops::volterra::{ExtensionMode, ThetaStrategy};
use traceops::weights::{Weight, WeightSpec};

pub const DEFAULT_N: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;

pub fn d_n() -> usize {
    DEFAULT_N
}
pub fn d_seed() -> u64 {
    DEFAULT_SEED
}

// ---------------------------------------------------------------------------
// Config loading
// ---------------------------------------------------------------------------

/// Load a command's config. With no path, the all-defaults config is used.
/// The file must be JSON with a `command` field equal to `expect`; unknown
/// fields are rejected with the offending key named.
pub fn load_config<T: DeserializeOwned>(
    path: Option<&PathBuf>,
    expect: &str,
) -> Result<T, Failure> {
    let text = match path {
        None => format!("{{\"command\":\"{expect}\"}}"),
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?,
    };
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed config JSON: {e}")))?;
    let cmd = value
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or_else(|| {
            Failure::Usage("config is missing the required string field \"command\"".into())
        })?;
    if cmd != expect {
        return Err(Failure::Usage(format!(
            "config command \"{cmd}\" does not match subcommand \"{expect}\""
        )));
    }
    serde_json::from_value(value)
        .map_err(|e| Failure::Usage(format!("invalid config for {expect}: {e}")))
}

// ---------------------------------------------------------------------------
// Common flag/field fragments
// ---------------------------------------------------------------------------

/// Report format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Flags every subcommand accepts.
#[derive(Debug, clap::Args)]
pub struct Common {
    /// Path to a JSON experiment config for this subcommand.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mirror the report to this file in addition to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report format (default depends on the subcommand).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run the built-in smoke examples instead of the configured experiment.
    #[arg(long)]
    pub selftest: bool,
}

/// A scalar-or-list JSON field (e.g. `"t": 1` or `"t": [1, 2, 4]`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn vec(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

impl From<Vec<f64>> for OneOrMany {
    fn from(v: Vec<f64>) -> Self {
        OneOrMany::Many(v)
    }
}

/// Logarithmic evaluation-grid parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "d_grid_tmin")]
    pub t_min: f64,
    #[serde(default = "d_grid_tmax")]
    pub t_max: f64,
    #[serde(default = "d_grid_ppd")]
    pub points_per_decade: usize,
}

fn d_grid_tmin() -> f64 {
    1e-8
}
fn d_grid_tmax() -> f64 {
    1e8
}
fn d_grid_ppd() -> usize {
    64
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_min: d_grid_tmin(),
            t_max: d_grid_tmax(),
            points_per_decade: d_grid_ppd(),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<LogGrid, Failure> {
        LogGrid::new(self.t_min, self.t_max, self.points_per_decade).map_err(Into::into)
    }

    /// Compact descriptor for report headers, e.g. `1e-8..1e8x64`.
    pub fn compact(&self) -> String {
        format!("{:e}..{:e}x{}", self.t_min, self.t_max, self.points_per_decade)
    }
}

// ---------------------------------------------------------------------------
// Inline spec strings
// ---------------------------------------------------------------------------

/// Parse an inline scaling-function spec: `power:<theta>`, `caputo:<alpha>`,
/// `expr:<formula>`, or a raw JSON descriptor.
pub fn parse_phi_spec(s: &str) -> Result<ScalingDescriptor, Failure> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s)
            .map_err(|e| Failure::Usage(format!("invalid scaling descriptor JSON: {e}")));
    }
    if let Some(rest) = s.strip_prefix("power:") {
        let theta = parse_f64(rest, "power exponent")?;
        return Ok(ScalingDescriptor::Power { theta, bounds: None });
    }
    if let Some(rest) = s.strip_prefix("caputo:") {
        let alpha = parse_f64(rest, "caputo order")?;
        return Ok(ScalingDescriptor::Caputo { alpha, bounds: None });
    }
    if let Some(rest) = s.strip_prefix("expr:") {
        return Ok(ScalingDescriptor::Expr {
            formula: rest.to_string(),
            bounds: None,
        });
    }
    Err(Failure::Usage(format!(
        "cannot parse scaling spec {s:?}: expected power:<theta>, caputo:<alpha>, expr:<formula>, or a JSON descriptor"
    )))
}

/// Parse an inline kernel spec: `caputo:<alpha>` or a raw JSON descriptor.
pub fn parse_kernel_spec(s: &str) -> Result<KernelDescriptor, Failure> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s)
            .map_err(|e| Failure::Usage(format!("invalid kernel descriptor JSON: {e}")));
    }
    if let Some(rest) = s.strip_prefix("caputo:") {
        let alpha = parse_f64(rest, "caputo order")?;
        return Ok(KernelDescriptor::Caputo { alpha });
    }
    Err(Failure::Usage(format!(
        "cannot parse kernel spec {s:?}: expected caputo:<alpha> or a JSON descriptor"
    )))
}

/// Parse an inline bounds pair `a,b`.
pub fn parse_bounds(s: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(Failure::Usage(format!(
            "cannot parse bounds {s:?}: expected two comma-separated numbers, e.g. 0,1"
        )));
    }
    Ok((
        parse_f64(parts[0], "lower bound")?,
        parse_f64(parts[1], "upper bound")?,
    ))
}

fn parse_f64(s: &str, what: &str) -> Result<f64, Failure> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Failure::Usage(format!("cannot parse {what} from {s:?}")))
}

// ---------------------------------------------------------------------------
// Object specs used by several commands
// ---------------------------------------------------------------------------

/// Interpolation-couple descriptor. `q0`/`q1` default to ∞ when omitted
/// (JSON numbers cannot carry infinity).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoupleSpec {
    Sequence {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q0: Option<f64>,
        sigma0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q1: Option<f64>,
        sigma1: f64,
    },
    LebesgueL1Linf,
    BesovPeriodic {
        p: f64,
        q0: f64,
        q1: f64,
        s0: f64,
        s1: f64,
        weight: Vec<f64>,
    },
}

impl Default for CoupleSpec {
    fn default() -> Self {
        CoupleSpec::Sequence {
            q0: None,
            sigma0: 1.0,
            q1: None,
            sigma1: 0.0,
        }
    }
}

impl CoupleSpec {
    pub fn build(&self) -> Result<InterpolationCouple, Failure> {
        match self {
            CoupleSpec::Sequence {
                q0,
                sigma0,
                q1,
                sigma1,
            } => InterpolationCouple::sequence(
                q0.unwrap_or(f64::INFINITY),
                *sigma0,
                q1.unwrap_or(f64::INFINITY),
                *sigma1,
            )
            .map_err(Into::into),
            CoupleSpec::LebesgueL1Linf => Ok(InterpolationCouple::lebesgue_l1_linf()),
            CoupleSpec::BesovPeriodic {
                p,
                q0,
                q1,
                s0,
                s1,
                weight,
            } => InterpolationCouple::besov_periodic(*p, *q0, *q1, *s0, *s1, weight.clone())
                .map_err(Into::into),
        }
    }
}

/// Boundary-element descriptor: either `{"unit": k}` (the coordinate vector
/// `e_k`) or `{"j_min": j, "coeffs": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_min: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
}

impl Default for ElementSpec {
    fn default() -> Self {
        Self {
            unit: Some(0),
            j_min: None,
            coeffs: None,
        }
    }
}

impl ElementSpec {
    pub fn build(&self) -> Result<Element, Failure> {
        match (&self.unit, &self.coeffs) {
            (Some(k), None) => Ok(Element::unit(*k)),
            (None, Some(coeffs)) => Ok(Element::sequence(self.j_min.unwrap_or(0), coeffs.clone())),
            (Some(_), Some(_)) => Err(Failure::Usage(
                "element spec sets both \"unit\" and \"coeffs\"; use exactly one".into(),
            )),
            (None, None) => Err(Failure::Usage(
                "element spec needs either \"unit\" or \"coeffs\"".into(),
            )),
        }
    }
}

/// Extension-mode descriptor for the trace/extension commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSpec {
    Local,
    Nonlocal {
        kernel: KernelDescriptor,
        #[serde(default)]
        theta: ThetaSpec,
    },
}

impl Default for ModeSpec {
    fn default() -> Self {
        ModeSpec::Local
    }
}

/// Relaxation-profile strategy for nonlocal modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    ClosedHalf,
    Mc {
        #[serde(default = "d_theta_mc_n")]
        n: usize,
        #[serde(default = "d_seed")]
        seed: u64,
    },
}

fn d_theta_mc_n() -> usize {
    4000
}

impl Default for ThetaSpec {
    fn default() -> Self {
        ThetaSpec::ClosedHalf
    }
}

impl ModeSpec {
    /// Build the runtime mode, also returning the kernel (when nonlocal)
    /// for the bound computations that need it separately.
    pub fn build(&self, grid: &GridSpec) -> Result<(ExtensionMode, Option<Kernel>), Failure> {
        match self {
            ModeSpec::Local => Ok((ExtensionMode::Local, None)),
            ModeSpec::Nonlocal { kernel, theta } => {
                let k = kernel.build(grid.build()?)?;
                let strategy = match theta {
                    ThetaSpec::ClosedHalf => ThetaStrategy::ClosedHalf,
                    ThetaSpec::Mc { n, seed } => ThetaStrategy::Mc {
                        n_samples: *n,
                        seed: *seed,
                    },
                };
                Ok((
                    ExtensionMode::Nonlocal {
                        kernel: k.clone(),
                        theta: strategy,
                    },
                    Some(k),
                ))
            }
        }
    }
}

/// Forcing-term descriptor for the forward solver: exactly one of a
/// constant value, a closed-form expression in `t`, or a sample table
/// (piecewise linear, zero outside its span).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
}

impl Default for ForcingSpec {
    fn default() -> Self {
        Self {
            constant: Some(1.0),
            expr: None,
            table: None,
        }
    }
}

impl ForcingSpec {
    pub fn sample(&self, ts: &[f64]) -> Result<GridFunction, Failure> {
        let set = [
            self.constant.is_some(),
            self.expr.is_some(),
            self.table.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if set != 1 {
            return Err(Failure::Usage(
                "forcing spec needs exactly one of \"constant\", \"expr\", \"table\"".into(),
            ));
        }
        let values: Vec<f64> = if let Some(c) = self.constant {
            vec![c; ts.len()]
        } else if let Some(src) = &self.expr {
            let ast = traceops::scaling::parse_expression(src)?;
            ts.iter().map(|&t| ast.eval(t)).collect()
        } else {
            let spec = self.table.as_ref().unwrap();
            let table = GridFunction::scalar(spec.ts.clone(), spec.values.clone())?;
            ts.iter().map(|&t| table.interp_zero_extended(t)).collect()
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Failure::Usage(
                "forcing evaluates to a non-finite value on the solver grid".into(),
            ));
        }
        GridFunction::scalar(ts.to_vec(), values).map_err(Into::into)
    }
}

/// Build a weight from a spec, with optional inline overrides replacing it
/// by a pure power weight.
pub fn weight_with_overrides(
    spec: &mut WeightSpec,
    gamma: Option<f64>,
    p: Option<f64>,
) -> Result<Weight, Failure> {
    if gamma.is_some() || p.is_some() {
        let (g0, p0) = match spec {
            WeightSpec::Power { gamma, p, .. } => (*gamma, *p),
            _ => (0.0, 2.0),
        };
        *spec = WeightSpec::Power {
            gamma: gamma.unwrap_or(g0),
            p: p.unwrap_or(p0),
            t_horizon: None,
        };
    }
    Weight::from_spec(spec).map_err(Into::into)
}

pub fn d_weight_power_zero() -> WeightSpec {
    WeightSpec::Power {
        gamma: 0.0,
        p: 2.0,
        t_horizon: None,
    }
}
