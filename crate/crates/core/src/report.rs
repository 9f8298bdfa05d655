//! Output artifacts: per-iteration CSV, summary JSON, two-column plot data
//! and a gnuplot stub. Floats use Rust's shortest round-trip formatting, so
//! identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::{IterRecord, RateFit, RunSummary, SweepOutcome};

pub const ITER_CSV_HEADER: &str = "k,f,g1,g2,ratio,v_min,v_max";
pub const SWEEP_CSV_HEADER: &str = "T,mean_g1,se_g1,rhs,term_noise,term_det,sgd_reference,violation";

pub fn iter_csv(records: &[IterRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(ITER_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.k, r.f, r.g1, r.g2, r.ratio, r.v_min, r.v_max
        );
    }
    out
}

pub fn sweep_csv(sweep: &SweepOutcome) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in &sweep.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.horizon, p.mean, p.se, p.rhs, p.term_noise, p.term_det, p.sgd_reference, p.violation
        );
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Whitespace-separated `x y` lines.
pub fn plot_data(points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = String::new();
    for (x, y) in points {
        let _ = writeln!(out, "{x} {y}");
    }
    out
}

/// Gnuplot script drawing each `.dat` file as a line on log-log axes.
pub fn gnuplot_stub(title: &str, xlabel: &str, files: &[&str], logscale: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set title \"{title}\"");
    let _ = writeln!(out, "set xlabel \"{xlabel}\"");
    if !logscale.is_empty() {
        let _ = writeln!(out, "set logscale {logscale}");
    }
    let curves: Vec<String> = files
        .iter()
        .map(|f| format!("\"{f}\" using 1:2 with lines title \"{}\"", f.trim_end_matches(".dat")))
        .collect();
    let _ = writeln!(out, "plot {}", curves.join(", \\\n     "));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSummary {
    pub empirical: Option<RateFit>,
    pub bound: Option<RateFit>,
    pub sgd_reference: Option<RateFit>,
    pub skipped_horizons: Vec<usize>,
    pub violations: Vec<usize>,
}

impl SlopeSummary {
    pub fn from_sweep(sweep: &SweepOutcome) -> Self {
        use crate::harness::fit_rate;
        let fit = |f: &dyn Fn(&crate::harness::SweepPoint) -> f64| {
            let pts: Vec<(f64, f64)> = sweep.points.iter().map(|p| (p.horizon as f64, f(p))).collect();
            fit_rate(&pts).ok()
        };
        Self {
            empirical: fit(&|p| p.mean),
            bound: fit(&|p| p.rhs),
            sgd_reference: fit(&|p| p.sgd_reference),
            skipped_horizons: sweep.skipped.clone(),
            violations: sweep.violations(),
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    written.push(path);
    Ok(())
}

/// Writes `trajectory.csv`, `summary.json`, one `.dat` per curve and
/// `plot.gp`. Returns the paths in write order.
pub fn write_run(dir: &Path, records: &[IterRecord], summary: &RunSummary) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    write(dir, "trajectory.csv", &iter_csv(records), &mut written)?;
    write(dir, "summary.json", &to_json(summary)?, &mut written)?;
    let k = |r: &IterRecord| r.k as f64;
    type Column = fn(&IterRecord) -> f64;
    let curves: [(&str, Column); 4] = [
        ("f.dat", |r| r.f),
        ("g1.dat", |r| r.g1),
        ("g2.dat", |r| r.g2),
        ("ratio.dat", |r| r.ratio),
    ];
    for (name, y) in curves {
        write(dir, name, &plot_data(records.iter().map(|r| (k(r), y(r)))), &mut written)?;
    }
    let stub = gnuplot_stub("trajectory", "k", &["g1.dat", "g2.dat", "ratio.dat"], "x");
    write(dir, "plot.gp", &stub, &mut written)?;
    Ok(written)
}

/// Writes `sweep.csv`, `slope.json`, `empirical.dat`, `bound.dat`,
/// `sgd_reference.dat` and `plot.gp`.
pub fn write_sweep(dir: &Path, sweep: &SweepOutcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    write(dir, "sweep.csv", &sweep_csv(sweep), &mut written)?;
    write(dir, "slope.json", &to_json(&SlopeSummary::from_sweep(sweep))?, &mut written)?;
    let t = |p: &crate::harness::SweepPoint| p.horizon as f64;
    write(dir, "empirical.dat", &plot_data(sweep.points.iter().map(|p| (t(p), p.mean))), &mut written)?;
    write(dir, "bound.dat", &plot_data(sweep.points.iter().map(|p| (t(p), p.rhs))), &mut written)?;
    write(
        dir,
        "sgd_reference.dat",
        &plot_data(sweep.points.iter().map(|p| (t(p), p.sgd_reference))),
        &mut written,
    )?;
    let stub = gnuplot_stub(
        "average l1 gradient norm vs horizon",
        "T",
        &["empirical.dat", "bound.dat", "sgd_reference.dat"],
        "xy",
    );
    write(dir, "plot.gp", &stub, &mut written)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_are_plain() {
        let r = IterRecord {
            k: 3,
            f: 0.5,
            g1: 2.0,
            g2: 1.25,
            ratio: f64::NAN,
            v_min: 1e-20,
            v_max: 3.0,
        };
        assert_eq!(iter_csv(&[r]), "k,f,g1,g2,ratio,v_min,v_max\n3,0.5,2,1.25,NaN,0.00000000000000000001,3\n");
    }

    #[test]
    fn plot_lines() {
        assert_eq!(plot_data([(1.0, 0.5), (2.0, 0.25)]), "1 0.5\n2 0.25\n");
    }

    #[test]
    fn stub_lists_curves() {
        let s = gnuplot_stub("t", "T", &["a.dat", "b.dat"], "xy");
        assert!(s.contains("set logscale xy"));
        assert!(s.contains("\"a.dat\" using 1:2 with lines title \"a\""));
        assert!(s.contains("\"b.dat\""));
    }
}
