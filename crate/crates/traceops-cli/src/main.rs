//! Batch front end for the `traceops` library: every subcommand reads an
//! optional JSON config, runs one verification experiment, writes a
//! deterministic report, and exits 0 (pass), 1 (check failed), 2 (usage or
//! config error), or 3 (inconclusive within the sampling budget).

mod commands;
mod config;
mod fail;
mod out;

use clap::Parser;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "traceops",
    version,
    about = "Numerical verification toolkit for scaling functions, memory kernels, \
             subordination, weighted Hardy inequalities, interpolation norms, and \
             Volterra extension/trace round trips"
)]
struct Cli {
    /// Cap the worker-thread count for parallel batteries.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Fit dilation exponents of a scaling function and test class membership.
    CheckScaling(commands::scaling::Args),
    /// Validate a kernel and its Laplace-side scaling function.
    KernelInfo(commands::kernel::InfoArgs),
    /// Extend a truncated kernel beyond its cutoff.
    ExtendKernel(commands::kernel::ExtendArgs),
    /// Sample the inverse subordinator and check Laplace transforms.
    Simulate(commands::subord::SimulateArgs),
    /// Evaluate the relaxation function against closed forms and Monte Carlo.
    Theta(commands::subord::ThetaArgs),
    /// Check the Sonine pairing between a kernel and its conjugate density.
    Sonine(commands::subord::SonineArgs),
    /// Compute the Muckenhoupt constant of a weight.
    ApConstant(commands::weights::ApArgs),
    /// Bound weighted Hardy operators and probe the bound empirically.
    Hardy(commands::weights::HardyArgs),
    /// Extend a finite-horizon weight to the line.
    ExtendWeight(commands::weights::ExtendArgs),
    /// Evaluate interpolation functionals by integral and dyadic sums.
    InterpNorm(commands::interp::NormArgs),
    /// Evaluate a smoothness norm of a periodic function.
    BesovNorm(commands::interp::BesovArgs),
    /// Solve the forward integro-differential equation.
    SolveVolterra(commands::volterra::SolveArgs),
    /// Construct the extension pair attaining a boundary element.
    Extension(commands::volterra::ExtensionArgs),
    /// Certify the trace bound of an extension pair.
    Trace(commands::volterra::TraceArgs),
    /// Run extension/trace round trips over a case battery.
    Roundtrip(commands::volterra::RoundtripArgs),
    /// Certify a trace bound from data on a finite window.
    FiniteInterval(commands::volterra::FiniteArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // A second initialization in the same process is harmless; keep the
        // first pool in that case.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    let result = match cli.command {
        Command::CheckScaling(args) => commands::scaling::run(args),
        Command::KernelInfo(args) => commands::kernel::info(args),
        Command::ExtendKernel(args) => commands::kernel::extend(args),
        Command::Simulate(args) => commands::subord::simulate(args),
        Command::Theta(args) => commands::subord::theta(args),
        Command::Sonine(args) => commands::subord::sonine(args),
        Command::ApConstant(args) => commands::weights::ap(args),
        Command::Hardy(args) => commands::weights::hardy(args),
        Command::ExtendWeight(args) => commands::weights::extend(args),
        Command::InterpNorm(args) => commands::interp::norm(args),
        Command::BesovNorm(args) => commands::interp::besov(args),
        Command::SolveVolterra(args) => commands::volterra::solve(args),
        Command::Extension(args) => commands::volterra::extension(args),
        Command::Trace(args) => commands::volterra::trace(args),
        Command::Roundtrip(args) => commands::volterra::roundtrip(args),
        Command::FiniteInterval(args) => commands::volterra::finite_interval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.report(),
    }
}
