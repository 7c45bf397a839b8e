//! Trace, report and manifest files for one scenario, and the comparison grid
//! for a set of scenarios.
//!
//! Every float is written in the shortest form that parses back to the same
//! `f64`, so costs recomputed from an emitted trace match the report exactly.
//! Reports carry no timings; rerunning a config reproduces them byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SeriesError;
use crate::sim::{CostReport, StepRecord};
use crate::tariff::PeakState;
use crate::timegrid::TimeGrid;
use crate::{Error, Result};

pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

const TRACE_HEADER: [&str; 13] = [
    "t",
    "timestamp",
    "u1_kw",
    "u2_kw",
    "soc",
    "soc_next",
    "p_nc_kw",
    "p_op_kw",
    "solve_time_s",
    "month_crossing",
    "threshold_relaxed",
    "clamped",
    "terminal_gap",
];

/// Machine-readable report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub scenario: String,
    pub label: String,
    pub n_steps: usize,
    pub report: CostReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtimes {
    pub wall_s: f64,
    pub solve_total_s: f64,
    pub solve_mean_s: f64,
    pub solve_max_s: f64,
}

impl Runtimes {
    pub fn from_trace(trace: &[StepRecord], wall_s: f64) -> Self {
        let total: f64 = trace.iter().map(|r| r.solve_time_s).sum();
        Self {
            wall_s,
            solve_total_s: total,
            solve_mean_s: total / trace.len().max(1) as f64,
            solve_max_s: trace.iter().map(|r| r.solve_time_s).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub label: String,
    pub code_version: String,
    /// TOML snapshot of the config that produced the run.
    pub config: String,
    pub series_path: PathBuf,
    pub n_steps: usize,
    pub threshold_relaxed_steps: usize,
    pub clamped_steps: usize,
    pub runtimes: Runtimes,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(
        report: &ReportDoc,
        config_toml: String,
        series_path: PathBuf,
        trace: &[StepRecord],
        wall_s: f64,
    ) -> Self {
        Self {
            scenario: report.scenario.clone(),
            label: report.label.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config_toml,
            series_path,
            n_steps: trace.len(),
            threshold_relaxed_steps: trace.iter().filter(|r| r.threshold_relaxed).count(),
            clamped_steps: trace.iter().filter(|r| r.clamped).count(),
            runtimes: Runtimes::from_trace(trace, wall_s),
            files: [TRACE_FILE, REPORT_JSON, REPORT_TXT, MANIFEST_FILE]
                .map(String::from)
                .to_vec(),
        }
    }
}

/// Write trace, both report forms and the manifest into `out_dir`.
pub fn emit_outputs(
    out_dir: &Path,
    grid: &TimeGrid,
    trace: &[StepRecord],
    report: &ReportDoc,
    manifest: &RunManifest,
) -> Result<Vec<PathBuf>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace(format!("{}: no steps to write", report.scenario)));
    }
    std::fs::create_dir_all(out_dir)?;
    let paths: Vec<PathBuf> = manifest.files.iter().map(|f| out_dir.join(f)).collect();
    write_trace(&out_dir.join(TRACE_FILE), grid, trace)?;
    std::fs::write(out_dir.join(REPORT_JSON), report_json(report)?)?;
    std::fs::write(out_dir.join(REPORT_TXT), report_table(report))?;
    std::fs::write(
        out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(manifest)? + "\n",
    )?;
    Ok(paths)
}

pub fn report_json(report: &ReportDoc) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn read_report(path: &Path) -> Result<ReportDoc> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn write_trace(path: &Path, grid: &TimeGrid, trace: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record([
            r.t.to_string(),
            grid.timestamp(r.t).format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.u1.to_string(),
            r.u2.to_string(),
            r.x.to_string(),
            r.x_next.to_string(),
            r.peaks_after.p_nc.to_string(),
            r.peaks_after.p_op.to_string(),
            r.solve_time_s.to_string(),
            u8::from(r.month_crossing).to_string(),
            u8::from(r.threshold_relaxed).to_string(),
            u8::from(r.clamped).to_string(),
            r.terminal_gap.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a trace written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let bad = |line: usize, what: &str| Error::Data {
        path: path.to_path_buf(),
        source: SeriesError::Malformed {
            line,
            msg: format!("bad {what}"),
        },
    };
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(line, TRACE_HEADER[i]));
        let b = |i: usize| match &rec[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(line, TRACE_HEADER[i])),
        };
        out.push(StepRecord {
            t: rec[0].parse().map_err(|_| bad(line, "t"))?,
            u1: f(2)?,
            u2: f(3)?,
            x: f(4)?,
            x_next: f(5)?,
            peaks_after: PeakState::new(f(6)?, f(7)?),
            solve_time_s: f(8)?,
            month_crossing: b(9)?,
            threshold_relaxed: b(10)?,
            clamped: b(11)?,
            terminal_gap: if rec[12].is_empty() { None } else { Some(f(12)?) },
        });
    }
    Ok(out)
}

/// Aligned per-month and annual cost table.
pub fn report_table(doc: &ReportDoc) -> String {
    let r = &doc.report;
    let mut s = String::new();
    let _ = writeln!(s, "{} ({}), {} steps", doc.label, doc.scenario, doc.n_steps);
    let _ = writeln!(
        s,
        "{:<8} {:>6} {:>11} {:>11} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "month", "steps", "P_NC kW", "P_OP kW", "NCDC $", "OPDC $", "energy $", "loss $", "total $"
    );
    for m in &r.months {
        let _ = writeln!(
            s,
            "{:<8} {:>6} {:>11.3} {:>11.3} {:>12.2} {:>12.2} {:>12.2} {:>12.2} {:>12.2}{}",
            m.start.format("%Y-%m"),
            m.n_steps,
            m.peak_nc_kw,
            m.peak_op_kw,
            m.ncdc,
            m.opdc,
            m.energy_cost,
            m.bess_loss,
            m.total,
            if m.partial { "  partial" } else { "" }
        );
    }
    let _ = writeln!(
        s,
        "{:<8} {:>6} {:>11} {:>11} {:>12.2} {:>12.2} {:>12.2} {:>12.2} {:>12.2}",
        "total", doc.n_steps, "", "", r.ncdc, r.opdc, r.energy_cost, r.bess_loss, r.annual_cost
    );
    s
}

/// One column of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub scenario: String,
    pub label: String,
    pub t_mpc_hours: u32,
    /// `None` for no reference, `Some(0)` for the rest of the month.
    pub t_r_hours: Option<u32>,
    pub solve_mean_s: f64,
    pub report: CostReport,
}

/// Cases as columns, cost components in k$ as rows.
pub fn comparison_table(entries: &[ComparisonEntry]) -> String {
    let width = entries.iter().map(|e| e.label.len()).max().unwrap_or(0).max(10);
    let mut s = String::new();
    let row = |s: &mut String, name: &str, cells: Vec<String>| {
        let _ = write!(s, "{name:<18}");
        for c in cells {
            let _ = write!(s, " {c:>width$}");
        }
        s.push('\n');
    };
    row(&mut s, "Cases", entries.iter().map(|e| e.label.clone()).collect());
    row(
        &mut s,
        "Run time (s/step)",
        entries.iter().map(|e| format!("{:.4}", e.solve_mean_s)).collect(),
    );
    row(
        &mut s,
        "T_MPC",
        entries.iter().map(|e| format!("{} h", e.t_mpc_hours)).collect(),
    );
    row(
        &mut s,
        "T_R",
        entries
            .iter()
            .map(|e| match e.t_r_hours {
                None => "-".to_string(),
                Some(0) => "1 mo".to_string(),
                Some(h) => format!("{h} h"),
            })
            .collect(),
    );
    let k = |v: f64| format!("{:.1}", v / 1000.0);
    row(&mut s, "NCDC (k$)", entries.iter().map(|e| k(e.report.ncdc)).collect());
    row(&mut s, "OPDC (k$)", entries.iter().map(|e| k(e.report.opdc)).collect());
    row(
        &mut s,
        "Energy Cost (k$)",
        entries.iter().map(|e| k(e.report.energy_cost)).collect(),
    );
    row(
        &mut s,
        "BESS loss (k$)",
        entries.iter().map(|e| k(e.report.bess_loss)).collect(),
    );
    row(
        &mut s,
        "Annual Cost (k$)",
        entries.iter().map(|e| k(e.report.annual_cost)).collect(),
    );
    s
}

/// One row per case with full-precision costs.
pub fn write_comparison_csv(path: &Path, entries: &[ComparisonEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario",
        "label",
        "t_mpc_hours",
        "t_r_hours",
        "solve_mean_s",
        "ncdc",
        "opdc",
        "energy_cost",
        "bess_loss",
        "annual_cost",
    ])?;
    for e in entries {
        w.write_record([
            e.scenario.clone(),
            e.label.clone(),
            e.t_mpc_hours.to_string(),
            e.t_r_hours.map(|h| h.to_string()).unwrap_or_default(),
            e.solve_mean_s.to_string(),
            e.report.ncdc.to_string(),
            e.report.opdc.to_string(),
            e.report.energy_cost.to_string(),
            e.report.bess_loss.to_string(),
            e.report.annual_cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
