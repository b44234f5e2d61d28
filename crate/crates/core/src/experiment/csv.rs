use std::io::Write;

use crate::diagnostics::{CaseLabel, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::timeloop::DiagnosticsSink;

pub const HEADER: &str =
    "t,l2,hm12,combined,tail,theta_e,J,sigma,Sigma,W_phi,W_k2,low_mass,h_half,sob_half,sob_s,case";

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_row(r: &DiagnosticsRecord) -> String {
    let fields = [
        r.t, r.l2, r.hm12, r.combined, r.tail, r.theta_e, r.j, r.sigma, r.shear, r.w_phi, r.w_k2,
        r.low_mass, r.h_half, r.sob_half, r.sob_s,
    ];
    let mut line = String::with_capacity(16 * 24);
    for x in fields {
        line.push_str(&fmt_float(x));
        line.push(',');
    }
    line.push_str(&r.case_label.to_string());
    line
}

/// Running extrema and check counts over the streamed records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTally {
    pub records: usize,
    pub initial_j: f64,
    pub max_j: f64,
    pub t_max_j: f64,
    pub initial_sob_s: f64,
    pub max_sob_s: f64,
    pub t_max_sob_s: f64,
    pub max_tail: f64,
    /// Worst case over the run: A if it ever fired, else B.
    pub case: CaseLabel,
    pub first_a: Option<f64>,
    pub first_b: Option<f64>,
    pub holder_violations: usize,
    pub sigma_bound_violations: usize,
    pub last_t: f64,
}

impl Default for RunTally {
    fn default() -> Self {
        RunTally {
            records: 0,
            initial_j: f64::NAN,
            max_j: f64::NEG_INFINITY,
            t_max_j: f64::NAN,
            initial_sob_s: f64::NAN,
            max_sob_s: f64::NEG_INFINITY,
            t_max_sob_s: f64::NAN,
            max_tail: 0.0,
            case: CaseLabel::None,
            first_a: None,
            first_b: None,
            holder_violations: 0,
            sigma_bound_violations: 0,
            last_t: f64::NAN,
        }
    }
}

impl RunTally {
    pub fn update(&mut self, r: &DiagnosticsRecord) {
        if self.records == 0 {
            self.initial_j = r.j;
            self.initial_sob_s = r.sob_s;
        }
        self.records += 1;
        if r.j > self.max_j {
            self.max_j = r.j;
            self.t_max_j = r.t;
        }
        if r.sob_s > self.max_sob_s {
            self.max_sob_s = r.sob_s;
            self.t_max_sob_s = r.t;
        }
        self.max_tail = self.max_tail.max(r.tail);
        self.case = self.case.combine(r.case_label);
        match r.case_label {
            CaseLabel::A if self.first_a.is_none() => self.first_a = Some(r.t),
            CaseLabel::B if self.first_b.is_none() => self.first_b = Some(r.t),
            _ => {}
        }
        if !(r.interpolation.gradient_holds() && r.interpolation.half_norm_holds()) {
            self.holder_violations += 1;
        }
        if !r.sigma_bound.holds() {
            self.sigma_bound_violations += 1;
        }
        self.last_t = r.t;
    }
}

/// Streams records as CSV rows and keeps a [`RunTally`].
pub struct CsvSink<W: Write> {
    out: W,
    pub tally: RunTally,
    pub abort_reason: Option<String>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{HEADER}")?;
        Ok(CsvSink {
            out,
            tally: RunTally::default(),
            abort_reason: None,
        })
    }

    /// Writes `# key=value` lines.
    pub fn footer<'a>(&mut self, lines: impl IntoIterator<Item = (&'a str, String)>) -> Result<()> {
        for (key, value) in lines {
            writeln!(self.out, "# {key}={value}")?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> DiagnosticsSink for CsvSink<W> {
    fn record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", format_row(record))?;
        self.tally.update(record);
        Ok(())
    }

    fn abort(&mut self, _last: &DiagnosticsRecord, reason: &Error) -> Result<()> {
        self.abort_reason = Some(reason.to_string());
        Ok(())
    }
}

/// A parsed data row: the fifteen numeric columns and the case label.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub values: [f64; 15],
    pub case: String,
}

impl CsvRow {
    pub fn column(&self, name: &str) -> Option<f64> {
        HEADER.split(',').position(|h| h == name).and_then(|i| self.values.get(i).copied())
    }
}

/// Reads back the data rows and the footer of a file written by [`CsvSink`].
pub fn read_csv(text: &str) -> Result<(Vec<CsvRow>, Vec<(String, String)>)> {
    let bad = |line: usize, message: String| Error::Config {
        location: format!("csv line {line}"),
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(bad(1, "missing header".into())),
    }
    let mut rows = Vec::new();
    let mut footer = Vec::new();
    for (i, line) in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once('=').unwrap_or((rest, ""));
            footer.push((k.to_string(), v.to_string()));
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 16 {
            return Err(bad(i + 1, format!("expected 16 fields, got {}", fields.len())));
        }
        let mut values = [0.0; 15];
        for (v, f) in values.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|_| bad(i + 1, format!("bad number `{f}`")))?;
        }
        rows.push(CsvRow {
            values,
            case: fields[15].to_string(),
        });
    }
    Ok((rows, footer))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, f64::MIN_POSITIVE] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-0.25), "-2.5000000000000000e-1");
    }

    #[test]
    fn header_has_sixteen_columns() {
        assert_eq!(HEADER.split(',').count(), 16);
    }
}
