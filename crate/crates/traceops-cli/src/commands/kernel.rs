//! `kernel-info`: validate a kernel and report its Laplace exponent,
//! conjugate pair, and the kernel/exponent equivalence band.
//! `extend-kernel`: extend a truncated kernel to the half line.

use super::{close, st_check};
use crate::config::{
    d_seed, load_config, parse_kernel_spec, Common, Format, GridSpec, OneOrMany,
};
use crate::fail::{CmdResult, Failure};
use crate::out::{emit, num, sig12, to_value, Report};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;
use traceops::grid::LogGrid;
use traceops::kernel::{extend_kernel, KernelDescriptor, PhiMethod};

// ---------------------------------------------------------------------------
// kernel-info
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct InfoArgs {
    /// Inline kernel spec: caputo:<alpha> or a JSON descriptor.
    #[arg(long)]
    pub kernel: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoConfig {
    pub command: String,
    #[serde(default = "d_kernel")]
    pub kernel: KernelDescriptor,
    #[serde(default)]
    pub method: PhiMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<OneOrMany>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

pub fn d_kernel() -> KernelDescriptor {
    KernelDescriptor::Caputo { alpha: 0.5 }
}

fn default_lambdas() -> Vec<f64> {
    LogGrid::new(1e-4, 1e4, 4)
        .expect("static grid bounds")
        .points()
}

pub fn info(args: InfoArgs) -> CmdResult {
    if args.common.selftest {
        return info_selftest();
    }
    let mut cfg: InfoConfig = load_config(args.common.config.as_ref(), "kernel-info")?;
    if let Some(spec) = &args.kernel {
        cfg.kernel = parse_kernel_spec(spec)?;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let kernel = cfg.kernel.build(cfg.grid.build()?)?;
    let lambdas = cfg
        .lambdas
        .as_ref()
        .map(OneOrMany::vec)
        .unwrap_or_else(default_lambdas);
    let validation = kernel.validate()?;
    let equivalence = kernel.check_kernel_phi_equivalence(cfg.method, &lambdas)?;
    let conjugate = kernel.kappa_star_psi(cfg.method)?;
    let phi = kernel.laplace_phi(cfg.method)?;

    let results = json!({
        "label": kernel.label(),
        "validation": to_value(&validation)?,
        "equivalence": to_value(&equivalence)?,
        "conjugate_band": to_value(&conjugate.report)?,
        "phi_label": phi.label(),
        "psi_label": conjugate.psi.label(),
    });

    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => report.json(results),
        Format::Csv => {
            let rows: Vec<Vec<String>> = lambdas
                .iter()
                .map(|&l| {
                    let ph = phi.eval(l);
                    let ka = kernel.eval(1.0 / l);
                    vec![sig12(l), sig12(ph), sig12(ka), sig12(ph / ka)]
                })
                .collect();
            report.csv(Some(&results), &["lambda", "phi", "kappa_at_inv", "ratio"], &rows)
        }
    };
    emit(&text, cfg.output.as_ref())?;

    let pass = validation.positive
        && validation.non_increasing
        && equivalence.phi_in_class
        && equivalence.ratio_band.pass;
    if !pass {
        return Err(Failure::Check(format!(
            "kernel '{}' failed validation: positive {}, non_increasing {}, phi_in_class {}, band pass {}",
            kernel.label(),
            validation.positive,
            validation.non_increasing,
            equivalence.phi_in_class,
            equivalence.ratio_band.pass
        )));
    }
    Ok(())
}

fn info_selftest() -> CmdResult {
    let grid = GridSpec::default().build()?;
    let kernel = KernelDescriptor::Caputo { alpha: 0.5 }.build(grid)?;
    let phi = kernel.laplace_phi(PhiMethod::Auto)?;
    st_check(
        close(phi.eval(1.0), 1.0, 1e-10) && close(phi.eval(4.0), 2.0, 1e-8),
        "half-order exponent values",
        format!("phi(1) = {:.12e}, phi(4) = {:.12e}", phi.eval(1.0), phi.eval(4.0)),
    )?;

    let lambdas = default_lambdas();
    let eq = kernel.check_kernel_phi_equivalence(PhiMethod::Auto, &lambdas)?;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    st_check(
        close(eq.ratio_band.ratio_min, sqrt_pi, 1e-6 * sqrt_pi)
            && close(eq.ratio_band.ratio_max, sqrt_pi, 1e-6 * sqrt_pi)
            && eq.phi_in_class,
        "exponent/kernel ratio is the gamma factor",
        format!("band [{:.9e}, {:.9e}]", eq.ratio_band.ratio_min, eq.ratio_band.ratio_max),
    )?;

    println!("selftest passed (2 checks)");
    Ok(())
}

// ---------------------------------------------------------------------------
// extend-kernel
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct ExtendArgs {
    /// Inline kernel spec: caputo:<alpha> or a JSON descriptor.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Truncation point: the kernel is treated as known on (0, t_cut].
    #[arg(long)]
    pub t_cut: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendConfig {
    pub command: String,
    #[serde(default = "d_kernel")]
    pub kernel: KernelDescriptor,
    #[serde(default = "d_tcut")]
    pub t_cut: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_tcut() -> f64 {
    1.0
}

pub fn extend(args: ExtendArgs) -> CmdResult {
    if args.common.selftest {
        return extend_selftest();
    }
    let mut cfg: ExtendConfig = load_config(args.common.config.as_ref(), "extend-kernel")?;
    if let Some(spec) = &args.kernel {
        cfg.kernel = parse_kernel_spec(spec)?;
    }
    if let Some(t_cut) = args.t_cut {
        cfg.t_cut = t_cut;
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let grid = cfg.grid.build()?;
    let kernel = cfg.kernel.build(grid.clone())?;
    let ext = extend_kernel(&kernel, cfg.t_cut).map_err(|e| match e {
        traceops::Error::NotExtendable { .. } => Failure::Check(e.to_string()),
        other => other.into(),
    })?;

    let summary = json!({
        "a_hat": num(ext.report.a_hat),
        "b_hat": num(ext.report.b_hat),
        "eps_hat": num(ext.report.eps_hat),
        "splice_gap": num(ext.report.splice_gap),
        "label": ext.kernel.label(),
    });
    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let rows: Vec<Vec<String>> = grid
                .points()
                .iter()
                .map(|&t| vec![sig12(t), sig12(ext.kernel.eval(t))])
                .collect();
            report.csv(Some(&summary), &["t", "kappa"], &rows)
        }
        Format::Json => {
            let samples: Vec<serde_json::Value> = grid
                .points()
                .iter()
                .map(|&t| json!({ "t": num(t), "kappa": num(ext.kernel.eval(t)) }))
                .collect();
            report.json(json!({ "report": summary, "samples": samples }))
        }
    };
    emit(&text, cfg.output.as_ref())?;
    Ok(())
}

fn extend_selftest() -> CmdResult {
    use traceops::special::gamma;
    let grid = GridSpec::default().build()?;

    // An analytic power kernel truncated at 1 must extend back to itself.
    let kernel = KernelDescriptor::Caputo { alpha: 0.5 }.build(grid.clone())?;
    let ext = extend_kernel(&kernel, 1.0)?;
    let mut worst = 0.0f64;
    for &t in &[2.0f64, 10.0, 1e2, 1e4] {
        let exact = t.powf(-0.5) / gamma(0.5);
        worst = worst.max((ext.kernel.eval(t) / exact - 1.0).abs());
    }
    st_check(
        worst < 1e-8,
        "truncated power kernel round trip",
        format!("worst relative error {worst:.3e}"),
    )?;
    st_check(
        close(ext.report.a_hat, -0.5, 2e-3) && close(ext.report.b_hat, -0.5, 2e-3),
        "restricted dilation exponents",
        format!("fitted ({:.4}, {:.4})", ext.report.a_hat, ext.report.b_hat),
    )?;

    // A tabulated truncated power behaves the same way.
    let ts: Vec<f64> = LogGrid::new(1e-4, 1.0, 16)?.points();
    let values: Vec<f64> = ts.iter().map(|&t| t.powf(-0.3) / gamma(0.7)).collect();
    let table = KernelDescriptor::Table { ts, values }.build(grid)?;
    let ext = extend_kernel(&table, 1.0)?;
    let mut worst = 0.0f64;
    for &t in &[2.0f64, 10.0, 1e2] {
        let exact = t.powf(-0.3) / gamma(0.7);
        worst = worst.max((ext.kernel.eval(t) / exact - 1.0).abs());
    }
    st_check(
        worst < 1e-6,
        "tabulated truncated power extension",
        format!("worst relative error {worst:.3e}"),
    )?;

    println!("selftest passed (3 checks)");
    Ok(())
}
