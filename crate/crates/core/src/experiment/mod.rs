//! Configuration, run orchestration and CSV output.
//!
//! A run streams one [`DiagnosticsRecord`](crate::DiagnosticsRecord) per
//! sample to a CSV file with the columns in [`csv::HEADER`], followed by
//! `# key=value` footer lines. Files depend only on the configuration.

mod config;
pub mod csv;
mod selftest;

pub use config::{parse_config, ConfigBuilder, RunConfig, KEYS};
pub use csv::{CsvRow, CsvSink, RunTally};
pub use selftest::{selftest, SelftestReport};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::lattice::Params;
use crate::quadform::{self, DominationScan};
use crate::timeloop::{self, DriftStats};

use csv::fmt_float;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok,
    /// I/O failure or any other runtime error.
    Failure,
    Usage,
    DriftBreach,
    NonFinite,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::Failure => 1,
            ExitStatus::Usage => 2,
            ExitStatus::DriftBreach => 3,
            ExitStatus::NonFinite => 4,
        }
    }

    pub fn from_error(err: &Error) -> Self {
        match err {
            Error::Config { .. } | Error::InvalidParameter { .. } => ExitStatus::Usage,
            Error::DriftBreach { .. } => ExitStatus::DriftBreach,
            Error::NonFinite { .. } => ExitStatus::NonFinite,
            _ => ExitStatus::Failure,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ExitStatus::Ok => "ok",
            ExitStatus::Failure => "failure",
            ExitStatus::Usage => "usage",
            ExitStatus::DriftBreach => "drift_breach",
            ExitStatus::NonFinite => "non_finite",
        }
    }
}

/// What a single run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub path: PathBuf,
    pub tau: f64,
    pub status: ExitStatus,
    pub tally: RunTally,
    pub steps: usize,
    pub halvings: u32,
    pub drift: DriftStats,
    pub c_star: f64,
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "none".to_string(), fmt_float)
}

/// Runs `config.params` and writes the CSV to `config.output_path`.
///
/// Drift breaches and non-finite states still produce a complete file;
/// they are reported through [`RunSummary::status`]. Configuration and
/// I/O problems are returned as errors.
pub fn run_experiment(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let summary = run_to_path(config, &config.params, &config.output_path)?;
    if config.emit_scan {
        emit_quadform_scan(config.scan_box(), &sibling(&config.output_path, "scan"))?;
    }
    Ok(summary)
}

fn run_to_path(config: &RunConfig, params: &Params, path: &Path) -> Result<RunSummary> {
    let evaluator = config.method.build(params.n, Parallelism::Auto)?;
    let scan = quadform::scan_domination_constant(config.scan_box())?;
    let file = BufWriter::new(File::create(path)?);
    let mut sink = CsvSink::new(file)?;

    let outcome = timeloop::run(params, &config.step_control(), evaluator.as_ref(), &mut sink);
    let (status, steps, halvings, drift) = match &outcome {
        Ok(o) => (ExitStatus::Ok, o.steps, o.halvings, o.drift),
        Err(e @ (Error::DriftBreach { .. } | Error::NonFinite { .. })) => {
            (ExitStatus::from_error(e), 0, 0, DriftStats::default())
        }
        Err(_) => return Err(outcome.unwrap_err()),
    };

    let t = &sink.tally;
    let mut footer = vec![
        ("status", status.label().to_string()),
        ("final_case", t.case.to_string()),
        ("first_case_A_t", fmt_time(t.first_a)),
        ("first_case_B_t", fmt_time(t.first_b)),
        ("initial_J", fmt_float(t.initial_j)),
        ("max_J", fmt_float(t.max_j)),
        ("t_of_max_J", fmt_float(t.t_max_j)),
        ("max_sob_s", fmt_float(t.max_sob_s)),
        ("t_of_max_sob_s", fmt_float(t.t_max_sob_s)),
        ("max_tail", fmt_float(t.max_tail)),
        ("c_star", fmt_float(scan.c_star)),
        ("c_star_box", scan.box_size.to_string()),
        ("holder_violations", t.holder_violations.to_string()),
        ("sigma_bound_violations", t.sigma_bound_violations.to_string()),
    ];
    if let Ok(o) = &outcome {
        footer.extend([
            ("drift_max_l2", fmt_float(o.drift.max_l2)),
            ("drift_max_hm12", fmt_float(o.drift.max_hm12)),
            ("drift_final_l2", fmt_float(o.drift.final_l2)),
            ("drift_final_hm12", fmt_float(o.drift.final_hm12)),
            ("steps", o.steps.to_string()),
            ("halvings", o.halvings.to_string()),
            ("dt_final", fmt_float(o.dt_final)),
        ]);
    }
    if params.tau_flagged() {
        footer.push(("note", "tau above 0.05, theta_e window not guaranteed".to_string()));
    }
    if let Some(reason) = sink.abort_reason.clone() {
        footer.push(("abort", reason));
    }
    sink.footer(footer)?;
    let tally = sink.tally.clone();
    sink.finish()?;

    Ok(RunSummary {
        path: path.to_path_buf(),
        tau: params.tau,
        status,
        tally,
        steps,
        halvings,
        drift,
        c_star: scan.c_star,
    })
}

/// `dir/stem_suffix.csv` for `dir/stem.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sqg".to_string());
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

/// Output path of the sweep member with amplitude `tau`.
pub fn sweep_member_path(base: &Path, tau: f64) -> PathBuf {
    sibling(base, &format!("tau{tau}"))
}

pub fn sweep_summary_path(base: &Path) -> PathBuf {
    sibling(base, "summary")
}

/// Result of [`run_sweep`].
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub runs: Vec<RunSummary>,
    pub summary_path: PathBuf,
}

impl SweepSummary {
    /// The first non-zero member status, else `Ok`.
    pub fn status(&self) -> ExitStatus {
        self.runs
            .iter()
            .map(|r| r.status)
            .find(|s| *s != ExitStatus::Ok)
            .unwrap_or(ExitStatus::Ok)
    }
}

/// One run per entry of `sweep_tau` (or just `tau`), plus a summary table
/// of `(tau, max J / tau^2, time of max)`.
pub fn run_sweep(config: &RunConfig) -> Result<SweepSummary> {
    config.validate()?;
    let taus = config
        .sweep_tau
        .clone()
        .unwrap_or_else(|| vec![config.params.tau]);
    let par = if config.parallel {
        Parallelism::Auto
    } else {
        Parallelism::Sequential
    };
    let base = &config.output_path;
    let runs = exec::map_indices(par, taus.len(), |i| {
        let params = Params {
            tau: taus[i],
            ..config.params
        };
        run_to_path(config, &params, &sweep_member_path(base, taus[i]))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let summary_path = sweep_summary_path(base);
    let mut out = BufWriter::new(File::create(&summary_path)?);
    writeln!(out, "tau,max_J_over_tau2,t_of_max,final_case,status")?;
    for r in &runs {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(r.tau),
            fmt_float(r.tally.max_j / (r.tau * r.tau)),
            fmt_float(r.tally.t_max_j),
            r.tally.case,
            r.status.label()
        )?;
    }
    out.flush()?;
    Ok(SweepSummary { runs, summary_path })
}

pub const SCAN_HEADER: &str = "k1,k2,a,b,c,lambda_min,lambda_min_times_k3";

/// Writes every site of the box scan and a `# c_star=` summary line.
pub fn emit_quadform_scan(box_size: usize, path: &Path) -> Result<DominationScan> {
    let rows = quadform::scan_rows(box_size)?;
    let scan = DominationScan::from_rows(box_size, &rows);
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{SCAN_HEADER}")?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k.k1,
            r.k.k2,
            fmt_float(r.form.a),
            fmt_float(r.form.b),
            fmt_float(r.form.c),
            fmt_float(r.lambda_min),
            fmt_float(r.weighted)
        )?;
    }
    let sites: Vec<String> = scan
        .indefinite_sites
        .iter()
        .map(|(k, _)| format!("({},{})", k.k1, k.k2))
        .collect();
    writeln!(out, "# c_star={}", fmt_float(scan.c_star))?;
    writeln!(out, "# argmin=({},{})", scan.argmin.k1, scan.argmin.k2)?;
    writeln!(out, "# box={box_size}")?;
    writeln!(out, "# min_off_axis_lambda={}", fmt_float(scan.min_off_axis))?;
    writeln!(out, "# max_axis_deviation={}", fmt_float(scan.max_axis_deviation))?;
    writeln!(out, "# unit_mode_sites={}", sites.join(";"))?;
    out.flush()?;
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &Path) -> RunConfig {
        let mut b = ConfigBuilder::new();
        b.apply_text("tau=0.1\nN=8\nt_max=0.5\nsample_every=4").unwrap();
        b.set("test", "output_path", dir.join("run.csv").to_str().unwrap()).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn zero_horizon_writes_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.params.t_max = 0.0;
        let summary = run_experiment(&config).unwrap();
        assert_eq!(summary.status, ExitStatus::Ok);
        let text = std::fs::read_to_string(&config.output_path).unwrap();
        let (rows, footer) = csv::read_csv(&text).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].column("t"), Some(0.0));
        assert!(footer.iter().any(|(k, v)| k == "status" && v == "ok"));
        assert!(text.lines().skip(2).all(|l| l.starts_with('#')));
    }

    #[test]
    fn rows_are_consistent_and_footer_complete() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        let summary = run_experiment(&config).unwrap();
        let text = std::fs::read_to_string(&config.output_path).unwrap();
        let (rows, footer) = csv::read_csv(&text).unwrap();
        assert_eq!(rows.len(), summary.tally.records);
        for row in &rows {
            let l2 = row.column("l2").unwrap();
            let hm = row.column("hm12").unwrap();
            assert_eq!(row.column("combined").unwrap(), l2 - hm);
        }
        for key in ["final_case", "max_J", "max_sob_s", "c_star", "drift_max_l2", "drift_max_hm12"] {
            assert!(footer.iter().any(|(k, _)| k == key), "missing {key}");
        }
        assert!(footer.iter().any(|(k, _)| k == "note"), "tau=0.1 is flagged");
    }

    #[test]
    fn drift_breach_is_reported_with_a_complete_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.drift_budget = 1e-30;
        config.halve_on_breach = false;
        let summary = run_experiment(&config).unwrap();
        assert_eq!(summary.status, ExitStatus::DriftBreach);
        assert_eq!(summary.status.code(), 3);
        let text = std::fs::read_to_string(&config.output_path).unwrap();
        assert!(text.contains("# status=drift_breach"));
        assert!(text.contains("# abort="));
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.output_path = dir.path().join("missing").join("run.csv");
        let err = run_experiment(&config).unwrap_err();
        assert_eq!(ExitStatus::from_error(&err), ExitStatus::Failure);
    }

    #[test]
    fn sweep_writes_members_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.sweep_tau = Some(vec![0.1, 0.05, 0.02]);
        let sweep = run_sweep(&config).unwrap();
        assert_eq!(sweep.status(), ExitStatus::Ok);
        for tau in [0.1, 0.05, 0.02] {
            assert!(sweep_member_path(&config.output_path, tau).exists());
        }
        let table = std::fs::read_to_string(&sweep.summary_path).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "tau,max_J_over_tau2,t_of_max,final_case,status");
        assert!(lines[1].starts_with("1.0000000000000001e-1,"));
    }

    #[test]
    fn scan_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        let scan = emit_quadform_scan(4, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let data: Vec<&str> = text.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2 * 4 * 4 + 4);
        assert!(text.contains(&format!("# c_star={}", fmt_float(scan.c_star))));
        assert!(matches!(
            emit_quadform_scan(1, &path),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes: Vec<i32> = [
            ExitStatus::Ok,
            ExitStatus::Failure,
            ExitStatus::Usage,
            ExitStatus::DriftBreach,
            ExitStatus::NonFinite,
        ]
        .iter()
        .map(|s| s.code())
        .collect();
        assert_eq!(codes, [0, 1, 2, 3, 4]);
    }
}
