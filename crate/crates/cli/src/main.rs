use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sqg_core::experiment::{self, ConfigBuilder, ExitStatus, RunConfig};
use sqg_core::Error;

/// Spectral experiments for the conservative SQG equation on the 2-torus.
///
/// Settings come from a `key=value` file given with `--config`; any key can
/// be overridden with a flag of the same name.
#[derive(Parser, Debug)]
#[command(name = "sqg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one trajectory and write its diagnostics CSV.
    Run(ConfigArgs),
    /// One run per value of `sweep_tau`, plus a summary table.
    Sweep(ConfigArgs),
    /// Scan the quadratic forms over a box and write the table.
    Scan(ConfigArgs),
    /// Oracle-equivalence and invariant checks on small truncations.
    Selftest(ConfigArgs),
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct ConfigArgs {
    /// Config file with one `key=value` per line.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "t_max")]
    t_max: Option<String>,
    #[arg(long)]
    s: Option<String>,
    #[arg(long = "sample_every")]
    sample_every: Option<String>,
    /// `fast` or `direct`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long = "output_path")]
    output_path: Option<String>,
    /// Comma-separated amplitudes.
    #[arg(long = "sweep_tau")]
    sweep_tau: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "emit_scan")]
    emit_scan: Option<String>,
    #[arg(long = "scan_box")]
    scan_box: Option<String>,
    #[arg(long = "drift_budget")]
    drift_budget: Option<String>,
    #[arg(long = "halve_on_breach")]
    halve_on_breach: Option<String>,
    #[arg(long)]
    parallel: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> [(&'static str, Option<&String>); 15] {
        [
            ("tau", self.tau.as_ref()),
            ("N", self.n.as_ref()),
            ("dt", self.dt.as_ref()),
            ("t_max", self.t_max.as_ref()),
            ("s", self.s.as_ref()),
            ("sample_every", self.sample_every.as_ref()),
            ("method", self.method.as_ref()),
            ("output_path", self.output_path.as_ref()),
            ("sweep_tau", self.sweep_tau.as_ref()),
            ("seed", self.seed.as_ref()),
            ("emit_scan", self.emit_scan.as_ref()),
            ("scan_box", self.scan_box.as_ref()),
            ("drift_budget", self.drift_budget.as_ref()),
            ("halve_on_breach", self.halve_on_breach.as_ref()),
            ("parallel", self.parallel.as_ref()),
        ]
    }

    /// The file first, then the flags; also reports whether an output
    /// path was given.
    fn load(&self) -> anyhow::Result<(RunConfig, bool)> {
        let mut builder = ConfigBuilder::new();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            builder
                .apply_text(&text)
                .with_context(|| format!("in config {}", path.display()))?;
        }
        for (key, value) in self.overrides() {
            if let Some(value) = value {
                builder.apply_flag(key, value)?;
            }
        }
        let output_set = builder.output_path_set();
        Ok((builder.build()?, output_set))
    }
}

fn exit_status(err: &anyhow::Error) -> ExitStatus {
    if let Some(e) = err.downcast_ref::<Error>() {
        return ExitStatus::from_error(e);
    }
    if err.downcast_ref::<io::Error>().is_some() {
        return ExitStatus::Failure;
    }
    ExitStatus::Usage
}

fn run(command: Command) -> anyhow::Result<ExitStatus> {
    match command {
        Command::Run(args) => {
            let (config, _) = args.load()?;
            let s = experiment::run_experiment(&config)?;
            eprintln!(
                "{}: {} samples, {} steps, case {}, max J = {:.6e} at t = {}, status {:?}",
                s.path.display(),
                s.tally.records,
                s.steps,
                s.tally.case,
                s.tally.max_j,
                s.tally.t_max_j,
                s.status
            );
            Ok(s.status)
        }
        Command::Sweep(args) => {
            let (config, _) = args.load()?;
            let sweep = experiment::run_sweep(&config)?;
            for r in &sweep.runs {
                eprintln!(
                    "tau = {}: max J / tau^2 = {:.6} at t = {}, status {:?} -> {}",
                    r.tau,
                    r.tally.max_j / (r.tau * r.tau),
                    r.tally.t_max_j,
                    r.status,
                    r.path.display()
                );
            }
            eprintln!("summary -> {}", sweep.summary_path.display());
            Ok(sweep.status())
        }
        Command::Scan(args) => {
            let (config, output_set) = args.load()?;
            let path = if output_set {
                config.output_path.clone()
            } else {
                PathBuf::from("sqg_scan.csv")
            };
            let scan = experiment::emit_quadform_scan(config.scan_box(), &path)?;
            eprintln!(
                "{}: box {}, c* = {:.10} at ({}, {})",
                path.display(),
                scan.box_size,
                scan.c_star,
                scan.argmin.k1,
                scan.argmin.k2
            );
            Ok(ExitStatus::Ok)
        }
        Command::Selftest(args) => {
            let (config, _) = args.load()?;
            let report = experiment::selftest(config.seed, &mut io::stdout().lock())?;
            Ok(if report.ok() {
                ExitStatus::Ok
            } else {
                ExitStatus::Failure
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_status(&err).code() as u8)
        }
    }
}
