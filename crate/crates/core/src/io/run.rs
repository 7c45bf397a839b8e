//! Glue between a config file, the closed-loop harness and the emitted files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{ControllerSection, RunConfig};
use super::output::{emit_outputs, ComparisonEntry, ReportDoc, RunManifest};
use super::series::{load_timeseries, Series};
use crate::controllers::{ControllerSpec, RefHorizon};
use crate::parallel;
use crate::sim::{run_closed_loop, ScenarioConfig, SimOutput};
use crate::Result;

/// A finished scenario with everything needed to write it out.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: ScenarioConfig,
    pub output: SimOutput,
    pub doc: ReportDoc,
    pub manifest: RunManifest,
}

impl ControllerSection {
    pub fn from_spec(spec: &ControllerSpec, steps_per_day: usize) -> Self {
        let hours = |steps: usize| (steps * 24 / steps_per_day) as u32;
        Self {
            variant: spec.variant,
            tracking: spec.tracking,
            mode: spec.mpc.mode,
            t_mpc_hours: hours(spec.mpc.nominal_steps),
            t_r_hours: match spec.reference {
                RefHorizon::Horizon(r) => Some(hours(r.nominal_steps)),
                _ => None,
            },
            lowering: spec.lowering.into(),
        }
    }
}

pub fn load_series(cfg: &RunConfig) -> Result<Series> {
    load_timeseries(&cfg.data.series_path, &cfg.grid()?)
}

/// Run one scenario over `series`.
pub fn execute(cfg: &RunConfig, scenario: ScenarioConfig, series: &Series) -> Result<ScenarioRun> {
    let started = Instant::now();
    let output = run_closed_loop(&scenario, &series.load_kw, &series.pv_kw)?;
    let wall_s = started.elapsed().as_secs_f64();
    let spd = scenario.grid.steps_per_day();
    let doc = ReportDoc {
        scenario: scenario.name.clone(),
        label: scenario.controller.label(spd),
        n_steps: output.trace.len(),
        report: output.report.clone(),
    };
    let mut snapshot = cfg.clone();
    snapshot.controller = ControllerSection::from_spec(&scenario.controller, spd);
    let manifest = RunManifest::new(
        &doc,
        snapshot.to_toml(),
        cfg.data.series_path.clone(),
        &output.trace,
        wall_s,
    );
    Ok(ScenarioRun {
        scenario,
        output,
        doc,
        manifest,
    })
}

/// Independent scenarios over the same series; parallel when the feature is
/// on, in input order either way.
pub fn execute_all(cfg: &RunConfig, scenarios: Vec<ScenarioConfig>, series: &Series) -> Vec<Result<ScenarioRun>> {
    parallel::map(&scenarios, |sc| execute(cfg, sc.clone(), series))
}

pub fn write_run(run: &ScenarioRun, out_dir: &Path) -> Result<Vec<PathBuf>> {
    emit_outputs(out_dir, &run.scenario.grid, &run.output.trace, &run.doc, &run.manifest)
}

pub fn comparison_entry(run: &ScenarioRun) -> ComparisonEntry {
    let section = ControllerSection::from_spec(&run.scenario.controller, run.scenario.grid.steps_per_day());
    ComparisonEntry {
        scenario: run.doc.scenario.clone(),
        label: run.doc.label.clone(),
        t_mpc_hours: section.t_mpc_hours,
        t_r_hours: match run.scenario.controller.reference {
            RefHorizon::FullMonth => Some(0),
            _ => section.t_r_hours,
        },
        solve_mean_s: run.manifest.runtimes.solve_mean_s,
        report: run.doc.report.clone(),
    }
}
