//! Tariff, battery parameters and the monthly peak tracker.

use serde::{Deserialize, Serialize};

use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// Energy rate in $/kWh and demand-charge rates in $/kW of monthly peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSchedule {
    pub r_ec: f64,
    pub r_nc: f64,
    pub r_op: f64,
}

impl TariffSchedule {
    pub fn new(r_ec: f64, r_nc: f64, r_op: f64) -> Result<Self> {
        let t = Self { r_ec, r_nc, r_op };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r_ec", self.r_ec), ("r_nc", self.r_nc), ("r_op", self.r_op)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("tariff.{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// SDG&E AL-TOU style rates used by the Port of San Diego case.
    pub fn case_study() -> Self {
        Self {
            r_ec: 0.1,
            r_nc: 24.48,
            r_op: 19.19,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BessParams {
    pub energy_kwh: f64,
    pub power_kw: f64,
    /// Roundtrip efficiency.
    pub eta: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
}

impl BessParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.energy_kwh.is_finite() && self.energy_kwh > 0.0) {
            return bad(format!("bess.energy_kwh must be > 0, got {}", self.energy_kwh));
        }
        if !(self.power_kw.is_finite() && self.power_kw > 0.0) {
            return bad(format!("bess.power_kw must be > 0, got {}", self.power_kw));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("bess.eta must lie in (0, 1], got {}", self.eta));
        }
        let ordered = 0.0 <= self.soc_min
            && self.soc_min <= self.soc_init
            && self.soc_init <= self.soc_max
            && self.soc_max <= 1.0;
        if !ordered {
            return bad(format!(
                "bess SOC limits must satisfy 0 <= soc_min <= soc_init <= soc_max <= 1, got {} / {} / {}",
                self.soc_min, self.soc_init, self.soc_max
            ));
        }
        Ok(())
    }

    pub fn case_study() -> Self {
        Self {
            energy_kwh: 2500.0,
            power_kw: 700.0,
            eta: 0.8,
            soc_min: 0.2,
            soc_max: 0.8,
            soc_init: 0.5,
        }
    }

    /// Loss-cost weight per kW of |u2| per hour, as a fraction of the energy rate.
    pub fn loss_factor(&self) -> f64 {
        (1.0 - self.eta) / 2.0
    }
}

/// Monthly demand-charge thresholds (P̂_NC, P̂_OP).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakState {
    pub p_nc: f64,
    pub p_op: f64,
}

impl PeakState {
    pub fn new(p_nc: f64, p_op: f64) -> Self {
        Self { p_nc, p_op }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepCost {
    pub grid_cost: f64,
    pub loss_cost: f64,
}

/// Energy cost of one step: purchased (or credited) grid energy and the
/// battery loss estimate `R_EC ΔT (1 - η)/2 |u2|`.
pub fn energy_cost_step(u1: f64, u2: f64, tariff: &TariffSchedule, bess: &BessParams, dt_hours: f64) -> StepCost {
    StepCost {
        grid_cost: tariff.r_ec * dt_hours * u1,
        loss_cost: tariff.r_ec * dt_hours * bess.loss_factor() * u2.abs(),
    }
}

/// Peaks of `u1` over `{t..=tau_e}` restricted to the month of `t`.
/// `u1[0]` is the demand at step `t`. The on-peak peak is 0 when no on-peak
/// step of that month falls inside the window.
pub fn window_peaks(u1: &[f64], grid: &TimeGrid, t: usize, tau_e: usize) -> PeakState {
    assert!(t <= tau_e && u1.len() > tau_e - t, "u1 must cover [t, tau_e]");
    let month = grid.month(t);
    let mut p_nc = f64::NEG_INFINITY;
    let mut p_op: Option<f64> = None;
    for k in t..=tau_e {
        if grid.month(k) != month || k >= grid.n_steps() {
            continue;
        }
        let v = u1[k - t];
        p_nc = p_nc.max(v);
        if grid.in_op(k) {
            p_op = Some(p_op.map_or(v, |p| p.max(v)));
        }
    }
    PeakState {
        p_nc,
        p_op: p_op.unwrap_or(0.0),
    }
}

/// `R_NC max(P_NC, P̂_NC) + R_OP max(P_OP, P̂_OP)`.
pub fn demand_charge_cost(peaks: PeakState, state: PeakState, tariff: &TariffSchedule) -> f64 {
    tariff.r_nc * peaks.p_nc.max(state.p_nc) + tariff.r_op * peaks.p_op.max(state.p_op)
}

/// Advance the monthly peak tracker past step `t` with realized demand `u1_t`.
pub fn update_peak_state(state: PeakState, u1_t: f64, grid: &TimeGrid, t: usize) -> Result<PeakState> {
    let op = grid.is_op_period(t)?;
    let (reset_nc, reset_op) = grid.sigma(t + 1)?;
    let keep = |reset: bool| if reset { 0.0 } else { 1.0 };
    let op_input = if op { u1_t } else { 0.0 };
    Ok(PeakState {
        p_nc: keep(reset_nc) * state.p_nc.max(u1_t),
        p_op: keep(reset_op) * state.p_op.max(op_input),
    })
}
