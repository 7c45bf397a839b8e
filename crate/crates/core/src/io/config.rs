//! Scenario configuration in TOML.
//!
//! ```toml
//! [tariff]
//! r_ec = 0.1        # $/kWh
//! r_nc = 24.48      # $/kW per month
//! r_op = 19.19      # $/kW per month
//!
//! [bess]
//! energy_kwh = 2500
//! power_kw = 700
//! eta = 0.8
//! soc_min = 0.2
//! soc_max = 0.8
//! soc_init = 0.5    # optional, default 0.5
//!
//! [controller]
//! variant = "proposed"   # trad | proposed | empc_star
//! tracking = "wt"        # nt | wt
//! mode = "rolling"       # shrinking | rolling
//! t_mpc_hours = 48
//! t_r_hours = 48         # proposed only
//! lowering = "segment"   # optional: segment | per_step
//!
//! [data]
//! series_path = "load_pv.csv"   # relative to this file
//!
//! [sim]
//! start_date = "2019-01-01"
//! n_days = 365
//! step_minutes = 15      # optional, default 15
//! initial_p_nc = 0.0     # optional running peaks carried into month one
//! initial_p_op = 0.0
//!
//! [output]
//! dir = "out"            # optional
//! ```

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerSpec, PeakLowering, Tracking, Variant};
use crate::sim::ScenarioConfig;
use crate::tariff::{BessParams, PeakState, TariffSchedule};
use crate::timegrid::{HorizonMode, HorizonSpec, TimeGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tariff: TariffSchedule,
    pub bess: BessSection,
    pub controller: ControllerSection,
    pub data: DataSection,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BessSection {
    pub energy_kwh: f64,
    pub power_kw: f64,
    pub eta: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    #[serde(default = "default_soc_init")]
    pub soc_init: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub variant: Variant,
    pub tracking: Tracking,
    pub mode: HorizonMode,
    pub t_mpc_hours: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_r_hours: Option<u32>,
    #[serde(default)]
    pub lowering: LoweringName,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoweringName {
    PerStep,
    #[default]
    Segment,
}

impl From<PeakLowering> for LoweringName {
    fn from(l: PeakLowering) -> Self {
        match l {
            PeakLowering::PerStep => LoweringName::PerStep,
            PeakLowering::Segment => LoweringName::Segment,
        }
    }
}

impl From<LoweringName> for PeakLowering {
    fn from(l: LoweringName) -> Self {
        match l {
            LoweringName::PerStep => PeakLowering::PerStep,
            LoweringName::Segment => PeakLowering::Segment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub series_path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub start_date: NaiveDate,
    pub n_days: usize,
    #[serde(default = "default_step_minutes")]
    pub step_minutes: u32,
    #[serde(default)]
    pub initial_p_nc: f64,
    #[serde(default)]
    pub initial_p_op: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

fn default_soc_init() -> f64 {
    0.5
}

fn default_step_minutes() -> u32 {
    15
}

/// Read and validate a config file. A relative `series_path` or output dir
/// is resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config_str(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    if cfg.data.series_path.is_relative() {
        cfg.data.series_path = base.join(&cfg.data.series_path);
    }
    if let Some(out) = &mut cfg.output {
        if out.dir.is_relative() {
            out.dir = base.join(&out.dir);
        }
    }
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.scenario()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.sim.start_date, self.sim.n_days, self.sim.step_minutes).map_err(config_err)
    }

    pub fn bess_params(&self) -> BessParams {
        let b = self.bess;
        BessParams {
            energy_kwh: b.energy_kwh,
            power_kw: b.power_kw,
            eta: b.eta,
            soc_min: b.soc_min,
            soc_max: b.soc_max,
            soc_init: b.soc_init,
        }
    }

    pub fn controller_spec(&self, grid: &TimeGrid) -> Result<ControllerSpec> {
        self.controller.spec(grid)
    }

    /// The validated scenario described by this config.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let grid = self.grid()?;
        let spec = self.controller_spec(&grid)?;
        self.scenario_with(spec)
    }

    /// Same tariff, battery and grid with another controller.
    pub fn scenario_with(&self, controller: ControllerSpec) -> Result<ScenarioConfig> {
        let grid = self.grid()?;
        let mut sc = ScenarioConfig::new(grid, self.tariff, self.bess_params(), controller);
        sc.initial_peaks = PeakState::new(self.sim.initial_p_nc, self.sim.initial_p_op);
        sc.validate().map_err(config_err)?;
        Ok(sc)
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output.as_ref().map(|o| o.dir.as_path())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl ControllerSection {
    pub fn spec(&self, grid: &TimeGrid) -> Result<ControllerSpec> {
        let horizon = |hours: u32| HorizonSpec::from_hours(grid, self.mode, hours).map_err(config_err);
        let mpc = horizon(self.t_mpc_hours)?;
        let mut spec = match (self.variant, self.t_r_hours) {
            (Variant::Proposed, Some(r)) => ControllerSpec::proposed(self.tracking, mpc, horizon(r)?),
            (Variant::Proposed, None) => return Err(Error::Config("proposed controllers need t_r_hours".into())),
            (Variant::Trad, None) => ControllerSpec::trad(self.tracking, mpc),
            (Variant::EmpcStar, None) => ControllerSpec::empc_star(self.tracking, mpc),
            (v, Some(_)) => {
                return Err(Error::Config(format!(
                    "t_r_hours is only meaningful for proposed, not {v}"
                )))
            }
        };
        spec.lowering = self.lowering.into();
        spec.validate(grid.steps_per_day()).map_err(config_err)?;
        Ok(spec)
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}
