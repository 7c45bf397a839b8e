use serde::{Deserialize, Serialize};

use super::proposed::{mpc_model, proposed_empc_plan, reference_peaks, PeakLowering};
use super::traditional::{build_reference, economic_window_model, trad_empc_plan};
use super::{ForecastSlice, Plant, ReferenceTrajectory, Tracking};
use crate::optimizer::LinearProgram;
use crate::tariff::PeakState;
use crate::timegrid::{full_month_window, window, HorizonMode, HorizonSpec, HorizonWindow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Trad,
    Proposed,
    EmpcStar,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Trad => "trad",
            Variant::Proposed => "proposed",
            Variant::EmpcStar => "empc_star",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefHorizon {
    None,
    Horizon(HorizonSpec),
    /// Remainder of the current billing month.
    FullMonth,
}

/// One case of the comparison matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerSpec {
    pub variant: Variant,
    pub tracking: Tracking,
    pub mpc: HorizonSpec,
    pub reference: RefHorizon,
    pub lowering: PeakLowering,
}

impl ControllerSpec {
    pub fn trad(tracking: Tracking, mpc: HorizonSpec) -> Self {
        Self {
            variant: Variant::Trad,
            tracking,
            mpc,
            reference: RefHorizon::None,
            lowering: PeakLowering::default(),
        }
    }

    pub fn proposed(tracking: Tracking, mpc: HorizonSpec, reference: HorizonSpec) -> Self {
        Self {
            variant: Variant::Proposed,
            tracking,
            mpc,
            reference: RefHorizon::Horizon(reference),
            lowering: PeakLowering::default(),
        }
    }

    pub fn empc_star(tracking: Tracking, mpc: HorizonSpec) -> Self {
        Self {
            variant: Variant::EmpcStar,
            tracking,
            mpc,
            reference: RefHorizon::FullMonth,
            lowering: PeakLowering::default(),
        }
    }

    /// Rejects combinations outside the case matrix's structure.
    pub fn validate(&self, steps_per_day: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match (self.variant, self.reference) {
            (Variant::Trad, RefHorizon::None) => Ok(()),
            (Variant::Trad, _) => bad("trad controllers take no reference horizon".into()),
            (Variant::Proposed, RefHorizon::Horizon(r)) => {
                if r.mode != self.mpc.mode {
                    return bad(format!(
                        "reference horizon is {} but prediction horizon is {}",
                        r.mode, self.mpc.mode
                    ));
                }
                if r.nominal_steps < self.mpc.nominal_steps {
                    return bad(format!(
                        "reference horizon ({} steps) shorter than prediction horizon ({} steps)",
                        r.nominal_steps, self.mpc.nominal_steps
                    ));
                }
                Ok(())
            }
            (Variant::Proposed, _) => bad("proposed controllers need a reference horizon".into()),
            (Variant::EmpcStar, RefHorizon::FullMonth) => {
                if self.mpc.nominal_steps != steps_per_day {
                    return bad("empc_star uses a 24 h prediction horizon".into());
                }
                Ok(())
            }
            (Variant::EmpcStar, _) => bad("empc_star uses a full-month reference".into()),
        }
    }

    /// Short case label, e.g. `Proposed_WT R48/M24 rolling`.
    pub fn label(&self, steps_per_day: usize) -> String {
        let hours = |steps: usize| steps * 24 / steps_per_day;
        let m = hours(self.mpc.nominal_steps);
        match (self.variant, self.reference) {
            (Variant::Trad, _) => format!("Trad_{} M{m} {}", self.tracking, self.mpc.mode),
            (Variant::Proposed, RefHorizon::Horizon(r)) => format!(
                "Proposed_{} R{}/M{m} {}",
                self.tracking,
                hours(r.nominal_steps),
                self.mpc.mode
            ),
            _ => format!("EMPC*_{} M{m} {}", self.tracking, self.mpc.mode),
        }
    }

    /// File-system friendly identifier.
    pub fn slug(&self, steps_per_day: usize) -> String {
        let hours = |steps: usize| steps * 24 / steps_per_day;
        let m = hours(self.mpc.nominal_steps);
        let tracking = self.tracking.to_string().to_lowercase();
        match self.reference {
            RefHorizon::Horizon(r) => format!(
                "{}_{tracking}_{}_m{m}_r{}",
                self.variant,
                self.mpc.mode,
                hours(r.nominal_steps)
            ),
            _ => format!("{}_{tracking}_{}_m{m}", self.variant, self.mpc.mode),
        }
    }

    /// The 10 cases of one horizon mode in table order: Trad 24 h, proposed
    /// (24, 24), Trad 48 h, proposed (48, 24) and proposed (48, 48), where
    /// pairs are (reference, prediction) hours, each with NT then WT.
    pub fn matrix(steps_per_day: usize, mode: HorizonMode) -> Vec<Self> {
        let spec = |days: usize| HorizonSpec {
            mode,
            nominal_steps: days * steps_per_day,
        };
        let mut out = Vec::with_capacity(10);
        for (r, m) in [(0, 1), (1, 1), (0, 2), (2, 1), (2, 2)] {
            for tracking in [Tracking::Nt, Tracking::Wt] {
                out.push(if r == 0 {
                    Self::trad(tracking, spec(m))
                } else {
                    Self::proposed(tracking, spec(m), spec(r))
                });
            }
        }
        out
    }

    /// Both 10-case matrices, shrinking first.
    pub fn full_matrix(steps_per_day: usize) -> Vec<Self> {
        let mut out = Self::matrix(steps_per_day, HorizonMode::Shrinking);
        out.extend(Self::matrix(steps_per_day, HorizonMode::Rolling));
        out
    }
}

/// First action of one closed-loop step plus audit data.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub u1: f64,
    pub u2: f64,
    pub window: HorizonWindow,
    pub objective: f64,
    pub reference_objective: Option<f64>,
    /// `|x(τ+1) - x_r(τ+1)|` of the MPC plan, for pinned variants.
    pub terminal_gap: Option<f64>,
    /// A month boundary lies strictly inside the prediction window.
    pub month_crossing: bool,
    /// The SOC threshold of the solved program had to be lowered.
    pub threshold_relaxed: bool,
    pub iterations: usize,
}

/// Per-step policy over a perfect forecast of the full series.
#[derive(Debug, Clone, Copy)]
pub struct Controller<'a> {
    pub spec: ControllerSpec,
    pub plant: Plant<'a>,
    load: &'a [f64],
    pv: &'a [f64],
}

impl<'a> Controller<'a> {
    pub fn new(spec: ControllerSpec, plant: Plant<'a>, load: &'a [f64], pv: &'a [f64]) -> Result<Self> {
        spec.validate(plant.grid.steps_per_day())?;
        let n = plant.grid.n_steps();
        if load.len() != n || pv.len() != n {
            return Err(Error::Config(format!(
                "series of {} / {} points for a grid of {n} steps",
                load.len(),
                pv.len()
            )));
        }
        Ok(Self { spec, plant, load, pv })
    }

    fn slice(&self, w: HorizonWindow) -> ForecastSlice {
        ForecastSlice::from_series(w, self.load, self.pv)
    }

    fn reference_window(&self, t: usize) -> Result<Option<HorizonWindow>> {
        let grid = self.plant.grid;
        Ok(match self.spec.reference {
            RefHorizon::None => None,
            RefHorizon::Horizon(r) => Some(window(grid, &r, t)?),
            RefHorizon::FullMonth => Some(full_month_window(grid, t)?),
        })
    }

    /// Prediction window at `t`, clipped to the reference window when there is one.
    pub fn windows(&self, t: usize) -> Result<(HorizonWindow, Option<HorizonWindow>)> {
        let mut w = window(self.plant.grid, &self.spec.mpc, t)?;
        let r = self.reference_window(t)?;
        if let Some(r) = r {
            if w.end > r.end {
                w.end = r.end;
                w.threshold_step = w.threshold_step.min(r.end + 1);
            }
        }
        Ok((w, r))
    }

    fn reference(&self, rw: HorizonWindow, x_t: f64, peaks: PeakState, t: usize) -> Result<ReferenceTrajectory> {
        build_reference(&self.plant, x_t, &self.slice(rw), peaks, self.spec.tracking)
            .map_err(|source| Error::Solver { step: t, source })
    }

    /// Reference stage (pinned variants) then MPC stage at step `t`.
    pub fn step(&self, t: usize, x_t: f64, peaks: PeakState) -> Result<Decision> {
        let grid = self.plant.grid;
        let (w, rw) = self.windows(t)?;
        let month_crossing = (t + 1..=w.end).any(|k| grid.is_month_start(k));
        let forecast = self.slice(w);
        let solver = |source| Error::Solver { step: t, source };
        match rw {
            None => {
                let plan = trad_empc_plan(&self.plant, x_t, &forecast, peaks, self.spec.tracking).map_err(solver)?;
                Ok(Decision {
                    u1: plan.u1[0],
                    u2: plan.u2[0],
                    window: w,
                    objective: plan.objective,
                    reference_objective: None,
                    terminal_gap: None,
                    month_crossing,
                    threshold_relaxed: plan.threshold_relaxed,
                    iterations: plan.iterations,
                })
            }
            Some(rw) => {
                let reference = self.reference(rw, x_t, peaks, t)?;
                let plan = proposed_empc_plan(&self.plant, x_t, peaks, &reference, &forecast, self.spec.lowering)
                    .map_err(solver)?;
                let gap = (plan.soc[w.len()] - reference.soc_at(w.end + 1)).abs();
                Ok(Decision {
                    u1: plan.u1[0],
                    u2: plan.u2[0],
                    window: w,
                    objective: plan.objective,
                    reference_objective: Some(reference.objective),
                    terminal_gap: Some(gap),
                    month_crossing,
                    threshold_relaxed: reference.threshold_relaxed,
                    iterations: plan.iterations,
                })
            }
        }
    }

    /// The lowered programs solved at step `t`, labelled by stage. The
    /// reference program is solved so that the MPC stage can be assembled.
    pub fn stage_programs(&self, t: usize, x_t: f64, peaks: PeakState) -> Result<Vec<(String, LinearProgram)>> {
        let (w, rw) = self.windows(t)?;
        let forecast = self.slice(w);
        let mut out = Vec::new();
        match rw {
            None => {
                let (model, _) = economic_window_model(&self.plant, x_t, &forecast, peaks, self.spec.tracking);
                out.push(("mpc".to_string(), model.lower()?.lp));
            }
            Some(rw) => {
                let rf = self.slice(rw);
                let (model, _) = economic_window_model(&self.plant, x_t, &rf, peaks, self.spec.tracking);
                out.push(("reference".to_string(), model.lower()?.lp));
                let reference = self.reference(rw, x_t, peaks, t)?;
                let rp = reference_peaks(self.plant.grid, w.end + 1, &reference, peaks)?;
                let (model, _) = mpc_model(&self.plant, x_t, peaks, &reference, &forecast, &rp, self.spec.lowering);
                out.push(("mpc".to_string(), model.lower()?.lp));
            }
        }
        Ok(out)
    }
}
