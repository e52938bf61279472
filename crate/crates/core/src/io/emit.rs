use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gof::TestReport;
use crate::ode::{rk4_solve, uniform_grid, OdeModel, SolverOptions};
use crate::sim::MonteCarloReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Tsv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "tsv" => Ok(Format::Tsv),
            other => Err(Error::Config(format!("unknown format `{other}`; expected json or tsv"))),
        }
    }
}

/// Six significant digits, without trailing zeros.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    rounded.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "NA".into())
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One row per test: label, statistic, reference, p-value, decision and bandwidths.
pub fn test_reports_tsv(reports: &[TestReport]) -> String {
    let mut out = String::from("test\tstatistic\treference\tp_value\tlevel\treject\tn\th\th0\th1\n");
    for r in reports {
        let h0 = r
            .bandwidths
            .h0
            .as_ref()
            .map(|v| v.iter().map(|x| sig6(*x)).collect::<Vec<_>>().join(","))
            .unwrap_or_else(|| "NA".into());
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.label,
            sig6(r.statistic),
            r.reference.label(),
            sig6(r.p_value),
            sig6(r.level),
            r.reject,
            r.n,
            sig6(r.bandwidths.h),
            h0,
            opt(r.bandwidths.h1),
        );
    }
    out
}

/// Rejection-rate table: hypothesis, alpha, beta, then one column per test.
/// All reports must run the same tests.
pub fn mc_table_tsv(reports: &[MonteCarloReport]) -> Result<String> {
    let Some(first) = reports.first() else {
        return Err(Error::Config("no Monte Carlo reports to tabulate".into()));
    };
    let labels: Vec<&str> = first.summaries.iter().map(|s| s.test.as_str()).collect();
    let mut out = format!("hypothesis\talpha\tbeta\t{}\n", labels.join("\t"));
    for r in reports {
        let these: Vec<&str> = r.summaries.iter().map(|s| s.test.as_str()).collect();
        if these != labels {
            return Err(Error::Schema("Monte Carlo reports run different tests".into()));
        }
        let rates: Vec<String> = r.summaries.iter().map(|s| opt(s.rate)).collect();
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.hypothesis, sig6(r.spec.alpha), sig6(r.spec.beta), rates.join("\t"));
    }
    Ok(out)
}

/// Tab-separated rows under a header.
pub fn plot_tsv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\t"));
        out.push('\n');
    }
    out
}

/// `(t, X_1, ..., X_p)` on `points` equally spaced times across `span`.
pub fn trajectory_plot_data(
    model: &OdeModel,
    theta: &[f64],
    x0: &[f64],
    span: (f64, f64),
    points: usize,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    if points < 2 {
        return Err(Error::Config("plot grid needs at least two points".into()));
    }
    let grid = uniform_grid(span.0, span.1, points);
    let traj = rk4_solve(model, theta, x0, &grid, &SolverOptions::default())?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=model.p()).map(|k| format!("X{k}")));
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| std::iter::once(t).chain(traj.state(i).iter().cloned()).collect())
        .collect();
    Ok((header, rows))
}

/// Write to `path`, or to standard output when `path` is `None`.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).map_err(|e| Error::Io(e.to_string()))
        }
    }
}
