//! `check-scaling`: fit the dilation exponents of a scaling function and
//! optionally certify membership in a stated class.

use super::{close, st_check};
use crate::config::{
    d_seed, load_config, parse_bounds, parse_phi_spec, Common, Format, GridSpec,
};
use crate::fail::{CmdResult, Failure};
use crate::out::{emit, num, to_value, Report};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;
use traceops::scaling::ScalingDescriptor;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Inline scaling spec: power:<theta>, caputo:<alpha>, expr:<formula>,
    /// or a JSON descriptor.
    #[arg(long)]
    pub phi: Option<String>,
    /// Class bounds to certify against, as `a,b` (e.g. `0,1`).
    #[arg(long)]
    pub bounds: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<ScalingDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
    #[serde(default = "d_kmax")]
    pub k_max: u32,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn d_kmax() -> u32 {
    20
}

pub fn run(args: Args) -> CmdResult {
    if args.common.selftest {
        return selftest();
    }
    let mut cfg: Config = load_config(args.common.config.as_ref(), "check-scaling")?;
    if let Some(spec) = &args.phi {
        cfg.phi = Some(parse_phi_spec(spec)?);
    }
    if let Some(b) = &args.bounds {
        cfg.bounds = Some(parse_bounds(b)?);
    }
    if let Some(seed) = args.common.seed {
        cfg.seed = seed;
    }
    cfg.output = args.common.output.clone().or(cfg.output.take());
    cfg.format = args.common.format.or(cfg.format);

    let descriptor = cfg.phi.clone().ok_or_else(|| {
        Failure::Usage("no scaling function given: set \"phi\" in the config or pass --phi".into())
    })?;
    let mut phi = descriptor.build(cfg.grid.build()?)?;
    if let Some(bounds) = cfg.bounds {
        phi = phi.with_bounds(Some(bounds));
    }
    let fit = phi.fit_membership_with(cfg.k_max)?;

    let results = json!({
        "label": phi.label(),
        "a_hat": num(fit.report.a_hat),
        "b_hat": num(fit.report.b_hat),
        "envelope_constant": num(fit.report.envelope_constant),
        "submultiplicativity_excess": num(fit.report.submultiplicativity_excess()),
        "bounds": cfg.bounds,
        "eps_hat": fit.eps_hat.map(num),
        "member": fit.member,
        "lambdas": fit.report.lambdas,
        "s_hat": fit.report.s_hat,
    });

    let report = Report::new(cfg.seed, cfg.grid.compact(), to_value(&cfg)?);
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => report.json(results),
        Format::Csv => {
            let summary = json!({
                "a_hat": fit.report.a_hat,
                "b_hat": fit.report.b_hat,
                "member": fit.member,
            });
            let rows: Vec<Vec<String>> = fit
                .report
                .lambdas
                .iter()
                .zip(&fit.report.s_hat)
                .map(|(l, s)| vec![crate::out::sig12(*l), crate::out::sig12(*s)])
                .collect();
            report.csv(Some(&summary), &["lambda", "s_hat"], &rows)
        }
    };
    emit(&text, cfg.output.as_ref())?;

    if fit.member == Some(false) {
        let (a, b) = cfg.bounds.expect("member verdict implies bounds");
        return Err(Failure::Check(format!(
            "'{}' is not certified in the class with exponents ({a}, {b}): fitted ({:.4}, {:.4})",
            phi.label(),
            fit.report.a_hat,
            fit.report.b_hat
        )));
    }
    Ok(())
}

fn selftest() -> CmdResult {
    let grid = GridSpec::default().build()?;

    let phi = ScalingDescriptor::Power { theta: 0.5, bounds: Some((0.0, 1.0)) }.build(grid.clone())?;
    let fit = phi.fit_membership()?;
    st_check(
        fit.member == Some(true) && close(fit.report.a_hat, 0.5, 2e-3) && close(fit.report.b_hat, 0.5, 2e-3),
        "power half certified in (0, 1)",
        format!("member {:?}, fitted ({:.4}, {:.4})", fit.member, fit.report.a_hat, fit.report.b_hat),
    )?;

    let phi = ScalingDescriptor::Power { theta: 1.5, bounds: Some((0.0, 1.0)) }.build(grid.clone())?;
    let fit = phi.fit_membership()?;
    st_check(
        fit.member == Some(false),
        "power 3/2 refuted in (0, 1)",
        format!("member {:?}", fit.member),
    )?;

    let phi = ScalingDescriptor::Caputo { alpha: 0.3, bounds: None }.build(grid)?;
    let fit = phi.fit_membership()?;
    st_check(
        close(fit.report.a_hat, 0.3, 2e-3) && close(fit.report.b_hat, 0.3, 2e-3),
        "caputo exponent fit",
        format!("fitted ({:.4}, {:.4})", fit.report.a_hat, fit.report.b_hat),
    )?;

    println!("selftest passed (3 checks)");
    Ok(())
}
