use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::CellSummary;
use super::sim::SimResult;
use crate::error::{Error, Result};
use crate::planner::Method;

pub const RESULTS_COLUMNS: [&str; 11] = [
    "method",
    "n",
    "n_d",
    "seed",
    "converged",
    "measured_T_rc_s",
    "planned_T_rc_s",
    "mean_degree",
    "max_degree",
    "k_star",
    "iterations_used",
];

pub const SUMMARY_COLUMNS: [&str; 8] =
    ["method", "n", "n_d", "R_c", "mean_T", "std_T", "mean_deg", "max_deg"];

/// One line of the per-trial results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub n: usize,
    pub n_d: usize,
    pub seed: u64,
    pub converged: bool,
    #[serde(rename = "measured_T_rc_s")]
    pub measured_t_rc_s: Option<f64>,
    #[serde(rename = "planned_T_rc_s")]
    pub planned_t_rc_s: f64,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub k_star: Option<usize>,
    pub iterations_used: usize,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(file))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Header is always written, so an empty table is a header-only file.
pub fn write_results_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(RESULTS_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.n.to_string(),
            r.n_d.to_string(),
            r.seed.to_string(),
            r.converged.to_string(),
            opt(r.measured_t_rc_s),
            r.planned_t_rc_s.to_string(),
            r.mean_degree.to_string(),
            r.max_degree.to_string(),
            opt(r.k_star),
            r.iterations_used.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            what: "results",
            detail: format!("{other:?}"),
        },
    })?;
    let header = r.headers()?.clone();
    if header.iter().ne(RESULTS_COLUMNS) {
        return Err(Error::Format {
            what: "results",
            detail: format!("unexpected header {header:?}"),
        });
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_summary_csv(cells: &[CellSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for c in cells {
        w.write_record([
            c.method.to_string(),
            c.n.to_string(),
            c.n_d.to_string(),
            c.r_c.to_string(),
            opt(c.mean_t),
            opt(c.std_t),
            c.mean_deg.to_string(),
            c.max_deg.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `time_s, n_s` per simulation step.
pub fn write_ns_series_csv(sim: &SimResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["time_s", "n_s"])?;
    for (i, ns) in sim.ns_series.iter().enumerate() {
        w.write_record([(i as f64 * sim.dt).to_string(), ns.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("resilinet-export-{}", std::process::id()));
        dir.join(name)
    }

    #[test]
    fn empty_results_are_header_only() {
        let p = tmp("empty.csv");
        write_results_csv(&[], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.trim_end(), RESULTS_COLUMNS.join(","));
        assert!(read_results_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            ResultRow {
                method: Method::MlDagl,
                n: 50,
                n_d: 25,
                seed: u64::MAX,
                converged: true,
                measured_t_rc_s: Some(3.1000000000000005),
                planned_t_rc_s: 4.0 / 3.0,
                mean_degree: 2.38,
                max_degree: 12,
                k_star: Some(3),
                iterations_used: 41,
            },
            ResultRow {
                method: Method::Centering,
                n: 50,
                n_d: 25,
                seed: 0,
                converged: false,
                measured_t_rc_s: None,
                planned_t_rc_s: 30.0,
                mean_degree: 24.0,
                max_degree: 24,
                k_star: None,
                iterations_used: 0,
            },
        ];
        let p = tmp("rows.csv");
        write_results_csv(&rows, &p).unwrap();
        assert_eq!(read_results_csv(&p).unwrap(), rows);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == RESULTS_COLUMNS.len()));
    }
}
