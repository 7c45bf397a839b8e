//! Optimal-control problems solved at every closed-loop step.
//!
//! * [`trad_empc_plan`] - traditional EMPC with the demand charge evaluated
//!   over the prediction window, with or without the month's running peaks.
//! * [`build_reference`] - the reference stage; the same program over the
//!   reference window.
//! * [`proposed_empc_plan`] - the MPC stage tracking a reference trajectory
//!   through auxiliary peak states, a terminal cost and a terminal SOC pin.
//! * [`Controller`] - the per-step policy assembled from a case description.

mod block;
mod policy;
mod proposed;
mod traditional;

use serde::{Deserialize, Serialize};

pub use policy::{Controller, ControllerSpec, Decision, RefHorizon, Variant};
pub use proposed::{mpc_stage_objective, proposed_empc_plan, reference_peaks, replay_augmented, PeakLowering};
pub use traditional::{build_reference, trad_empc_plan};

use crate::optimizer::Tolerances;
use crate::tariff::{BessParams, TariffSchedule};
use crate::timegrid::{HorizonWindow, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tracking {
    /// Demand charge thresholds start from zero in every window.
    Nt,
    /// The month's running peaks enter the demand-charge term.
    Wt,
}

impl std::fmt::Display for Tracking {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tracking::Nt => "NT",
            Tracking::Wt => "WT",
        })
    }
}

/// Everything about the microgrid that does not change between steps.
#[derive(Debug, Clone, Copy)]
pub struct Plant<'a> {
    pub grid: &'a TimeGrid,
    pub tariff: &'a TariffSchedule,
    pub bess: &'a BessParams,
    pub tol: Tolerances,
}

impl<'a> Plant<'a> {
    pub fn new(grid: &'a TimeGrid, tariff: &'a TariffSchedule, bess: &'a BessParams) -> Self {
        Self {
            grid,
            tariff,
            bess,
            tol: Tolerances::default(),
        }
    }
}

/// Perfect forecast of load and PV over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSlice {
    pub window: HorizonWindow,
    pub load_kw: Vec<f64>,
    pub pv_kw: Vec<f64>,
}

impl ForecastSlice {
    pub fn new(window: HorizonWindow, load_kw: Vec<f64>, pv_kw: Vec<f64>) -> Self {
        assert_eq!(load_kw.len(), window.len(), "load must cover the window");
        assert_eq!(pv_kw.len(), window.len(), "pv must cover the window");
        Self { window, load_kw, pv_kw }
    }

    /// Slice a whole-horizon series.
    pub fn from_series(window: HorizonWindow, load: &[f64], pv: &[f64]) -> Self {
        let r = window.start..window.end + 1;
        Self::new(window, load[r.clone()].to_vec(), pv[r].to_vec())
    }

    pub fn net_kw(&self) -> Vec<f64> {
        self.load_kw.iter().zip(&self.pv_kw).map(|(l, p)| l - p).collect()
    }
}

/// Optimal dispatch over a window. `soc` has one more entry than the window.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchPlan {
    pub window: HorizonWindow,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub soc: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// The 50 % threshold was unreachable and lowered to the reachable SOC.
    pub threshold_relaxed: bool,
}

/// Reference trajectory computed at `origin` over `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub origin: usize,
    pub window: HorizonWindow,
    pub soc: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub objective: f64,
    pub threshold_relaxed: bool,
}

impl ReferenceTrajectory {
    /// x_r at absolute step `k` (`origin <= k <= window.end + 1`).
    pub fn soc_at(&self, k: usize) -> f64 {
        self.soc[k - self.origin]
    }

    pub fn u1_at(&self, k: usize) -> f64 {
        self.u1[k - self.origin]
    }
}

impl From<DispatchPlan> for ReferenceTrajectory {
    fn from(p: DispatchPlan) -> Self {
        Self {
            origin: p.window.start,
            window: p.window,
            soc: p.soc,
            u1: p.u1,
            u2: p.u2,
            objective: p.objective,
            threshold_relaxed: p.threshold_relaxed,
        }
    }
}

/// Reference peaks (ŷ, y̌) for one target step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReferencePeaks {
    pub y_hat_nc: f64,
    pub y_check_nc: f64,
    pub y_hat_op: f64,
    pub y_check_op: f64,
}

/// Augmented MPC state z = (x, y_NC, y_OP).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AugmentedState {
    pub x: f64,
    pub y_nc: f64,
    pub y_op: f64,
}
