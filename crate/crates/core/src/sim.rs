//! Closed-loop harness and monthly cost settlement.

use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::controllers::{Controller, ControllerSpec, Plant};
use crate::optimizer::Tolerances;
use crate::parallel;
use crate::tariff::{energy_cost_step, update_peak_state, BessParams, PeakState, TariffSchedule};
use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// SOC excursions up to this size are clamped back into the box and flagged.
pub const SOC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: TimeGrid,
    pub tariff: TariffSchedule,
    pub bess: BessParams,
    pub controller: ControllerSpec,
    /// Running peaks carried into the first month.
    pub initial_peaks: PeakState,
    pub tol: Tolerances,
}

impl ScenarioConfig {
    pub fn new(grid: TimeGrid, tariff: TariffSchedule, bess: BessParams, controller: ControllerSpec) -> Self {
        Self {
            name: controller.slug(grid.steps_per_day()),
            grid,
            tariff,
            bess,
            controller,
            initial_peaks: PeakState::default(),
            tol: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tariff.validate()?;
        self.bess.validate()?;
        self.controller.validate(self.grid.steps_per_day())?;
        let p = self.initial_peaks;
        if !(p.p_nc >= 0.0 && p.p_op >= 0.0 && p.p_nc.is_finite() && p.p_op.is_finite()) {
            return Err(Error::Config(format!(
                "initial peaks must be finite and >= 0, got ({}, {})",
                p.p_nc, p.p_op
            )));
        }
        Ok(())
    }

    pub fn plant(&self) -> Plant<'_> {
        let mut plant = Plant::new(&self.grid, &self.tariff, &self.bess);
        plant.tol = self.tol;
        plant
    }
}

/// One executed closed-loop step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub u1: f64,
    pub u2: f64,
    pub x: f64,
    pub x_next: f64,
    /// P̂ after the update past `t`, including any reset at `t + 1`.
    pub peaks_after: PeakState,
    pub solve_time_s: f64,
    pub month_crossing: bool,
    pub terminal_gap: Option<f64>,
    pub threshold_relaxed: bool,
    /// The plant clamped a SOC excursion within [`SOC_TOLERANCE`].
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthCost {
    pub month: usize,
    pub start: NaiveDate,
    pub n_steps: usize,
    pub partial: bool,
    pub peak_nc_kw: f64,
    pub peak_op_kw: f64,
    pub ncdc: f64,
    pub opdc: f64,
    pub energy_cost: f64,
    pub bess_loss: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub months: Vec<MonthCost>,
    pub ncdc: f64,
    pub opdc: f64,
    pub energy_cost: f64,
    pub bess_loss: f64,
    pub annual_cost: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trace: Vec<StepRecord>,
    pub report: CostReport,
}

impl SimOutput {
    pub fn total_solve_time_s(&self) -> f64 {
        self.trace.iter().map(|r| r.solve_time_s).sum()
    }
}

/// SOC after applying `u2` for one step. Results within [`SOC_TOLERANCE`] of
/// the box are clamped and flagged; anything further out is an error.
pub fn plant_step(x: f64, u2: f64, bess: &BessParams, dt_hours: f64) -> std::result::Result<(f64, bool), f64> {
    let next = x - u2 * dt_hours / bess.energy_kwh;
    if next < bess.soc_min - SOC_TOLERANCE || next > bess.soc_max + SOC_TOLERANCE || !next.is_finite() {
        return Err(next);
    }
    let clamped = next.clamp(bess.soc_min, bess.soc_max);
    Ok((clamped, clamped != next))
}

/// Runs the first `n_steps` closed-loop steps: reference stage and MPC stage
/// at each `t`, apply the first action, then advance SOC and peak tracker.
pub fn simulate(config: &ScenarioConfig, load: &[f64], pv: &[f64], n_steps: usize) -> Result<Vec<StepRecord>> {
    config.validate()?;
    let grid = &config.grid;
    let controller = Controller::new(config.controller, config.plant(), load, pv)?;
    let dt = grid.dt_hours();
    let n_steps = n_steps.min(grid.n_steps());
    let mut x = config.bess.soc_init;
    let mut peaks = config.initial_peaks;
    let mut trace = Vec::with_capacity(n_steps);
    let started = Instant::now();
    for t in 0..n_steps {
        let clock = Instant::now();
        let d = controller.step(t, x, peaks)?;
        let solve_time_s = clock.elapsed().as_secs_f64();
        let (x_next, clamped) = plant_step(x, d.u2, &config.bess, dt).map_err(|soc| Error::SocOutOfRange {
            step: t,
            soc,
            min: config.bess.soc_min,
            max: config.bess.soc_max,
        })?;
        if clamped {
            log::debug!("{}: SOC clamped at step {t}", config.name);
        }
        let peaks_after = update_peak_state(peaks, d.u1, grid, t)?;
        log::debug!(
            "{}: t={t} u1={:.3} u2={:.3} x={:.6} iters={} solve={:.4}s",
            config.name,
            d.u1,
            d.u2,
            x_next,
            d.iterations,
            solve_time_s
        );
        trace.push(StepRecord {
            t,
            u1: d.u1,
            u2: d.u2,
            x,
            x_next,
            peaks_after,
            solve_time_s,
            month_crossing: d.month_crossing,
            terminal_gap: d.terminal_gap,
            threshold_relaxed: d.threshold_relaxed,
            clamped,
        });
        x = x_next;
        peaks = peaks_after;
    }
    let elapsed = started.elapsed().as_secs_f64();
    log::info!(
        "{}: {} steps in {:.2}s ({:.4}s/step)",
        config.name,
        n_steps,
        elapsed,
        elapsed / n_steps.max(1) as f64
    );
    Ok(trace)
}

/// Full closed-loop run with settlement.
pub fn run_closed_loop(config: &ScenarioConfig, load: &[f64], pv: &[f64]) -> Result<SimOutput> {
    let trace = simulate(config, load, pv, config.grid.n_steps())?;
    let report = settle_costs(&trace, &config.grid, &config.tariff, &config.bess, config.initial_peaks)?;
    Ok(SimOutput { trace, report })
}

/// Runs independent scenarios over the same series, in parallel when the
/// `parallel` feature is on. Results keep the input order.
pub fn run_matrix(configs: &[ScenarioConfig], load: &[f64], pv: &[f64]) -> Vec<Result<SimOutput>> {
    parallel::map(configs, |c| run_closed_loop(c, load, pv))
}

/// Sequential counterpart of [`run_matrix`].
pub fn run_matrix_sequential(configs: &[ScenarioConfig], load: &[f64], pv: &[f64]) -> Vec<Result<SimOutput>> {
    parallel::map_sequential(configs, |c| run_closed_loop(c, load, pv))
}

/// Monthly and total costs from realized demand. Month peaks are the running
/// max of `u1` floored at zero; `initial_peaks` also count toward the first
/// month.
pub fn settle_costs(
    trace: &[StepRecord],
    grid: &TimeGrid,
    tariff: &TariffSchedule,
    bess: &BessParams,
    initial_peaks: PeakState,
) -> Result<CostReport> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace("trace has no steps".into()));
    }
    let dt = grid.dt_hours();
    let mut months: Vec<MonthCost> = Vec::new();
    let mut running = initial_peaks;
    for (i, r) in trace.iter().enumerate() {
        let m = grid.month(r.t);
        if months.last().is_none_or(|mc| mc.month != m) {
            if i > 0 {
                running = PeakState::default();
            }
            months.push(MonthCost {
                month: m,
                start: grid.timestamp(r.t).date(),
                n_steps: 0,
                partial: grid.month_is_partial(m),
                peak_nc_kw: 0.0,
                peak_op_kw: 0.0,
                ncdc: 0.0,
                opdc: 0.0,
                energy_cost: 0.0,
                bess_loss: 0.0,
                total: 0.0,
            });
        }
        let mc = months.last_mut().expect("month pushed above");
        running.p_nc = running.p_nc.max(r.u1);
        if grid.in_op(r.t) {
            running.p_op = running.p_op.max(r.u1);
        }
        let c = energy_cost_step(r.u1, r.u2, tariff, bess, dt);
        mc.n_steps += 1;
        mc.energy_cost += c.grid_cost;
        mc.bess_loss += c.loss_cost;
        mc.peak_nc_kw = running.p_nc;
        mc.peak_op_kw = running.p_op;
    }
    for mc in &mut months {
        mc.partial |= mc.n_steps < grid.month_range(mc.month).len();
        mc.ncdc = tariff.r_nc * mc.peak_nc_kw;
        mc.opdc = tariff.r_op * mc.peak_op_kw;
        mc.total = mc.ncdc + mc.opdc + mc.energy_cost + mc.bess_loss;
    }
    let sum = |f: fn(&MonthCost) -> f64| months.iter().map(f).sum::<f64>();
    let ncdc = sum(|m| m.ncdc);
    let opdc = sum(|m| m.opdc);
    let energy_cost = sum(|m| m.energy_cost);
    let bess_loss = sum(|m| m.bess_loss);
    Ok(CostReport {
        annual_cost: ncdc + opdc + energy_cost + bess_loss,
        months,
        ncdc,
        opdc,
        energy_cost,
        bess_loss,
    })
}

/// SOC at the start of each day covered by the trace, plus the final SOC if
/// the trace ends on a day boundary.
pub fn midnight_soc(trace: &[StepRecord], grid: &TimeGrid) -> Vec<f64> {
    let mut out: Vec<f64> = trace.iter().filter(|r| grid.is_midnight(r.t)).map(|r| r.x).collect();
    if let Some(last) = trace.last() {
        if grid.is_midnight(last.t + 1) {
            out.push(last.x_next);
        }
    }
    out
}

/// `x(midnight_{d+1}) - x(midnight_d)` for every complete day.
pub fn daily_soc_difference(trace: &[StepRecord], grid: &TimeGrid) -> Vec<f64> {
    midnight_soc(trace, grid).windows(2).map(|w| w[1] - w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::Tracking;
    use crate::timegrid::{HorizonMode, HorizonSpec};

    fn grid(y: i32, m: u32, d: u32, days: usize, step: u32) -> TimeGrid {
        TimeGrid::new(NaiveDate::from_ymd_opt(y, m, d).unwrap(), days, step).unwrap()
    }

    fn record(t: usize, u1: f64) -> StepRecord {
        StepRecord {
            t,
            u1,
            u2: 0.0,
            x: 0.5,
            x_next: 0.5,
            peaks_after: PeakState::default(),
            solve_time_s: 0.0,
            month_crossing: false,
            terminal_gap: None,
            threshold_relaxed: false,
            clamped: false,
        }
    }

    #[test]
    fn plant_step_examples() {
        let bess = BessParams::case_study();
        assert_eq!(plant_step(0.5, 0.0, &bess, 0.25), Ok((0.5, false)));
        let (x, _) = plant_step(0.5, 700.0, &bess, 0.25).unwrap();
        assert!((x - 0.43).abs() < 1e-12);
        let (x, _) = plant_step(0.5, -700.0, &bess, 0.25).unwrap();
        assert!((x - 0.57).abs() < 1e-12);
        let (x, clamped) = plant_step(0.2 + 1e-9, 0.0001, &bess, 0.25).unwrap();
        assert!(clamped && x == 0.2);
        assert!(plant_step(0.21, 700.0, &bess, 0.25).is_err());
    }

    #[test]
    fn settlement_examples() {
        let g = grid(2019, 1, 1, 1, 15);
        let tariff = TariffSchedule::case_study();
        let bess = BessParams::case_study();
        let mut trace: Vec<_> = (0..96).map(|t| record(t, 10.0)).collect();
        trace[20].u1 = 100.0;
        trace[66].u1 = 40.0; // 16:30
        let r = settle_costs(&trace, &g, &tariff, &bess, PeakState::default()).unwrap();
        assert!((r.ncdc - 2448.0).abs() < 1e-9);
        assert!((r.opdc - 767.6).abs() < 1e-9);
        assert!(r.months[0].partial);

        let zeros: Vec<_> = (0..96).map(|t| record(t, 0.0)).collect();
        let r = settle_costs(&zeros, &g, &tariff, &bess, PeakState::default()).unwrap();
        assert_eq!(r.annual_cost, 0.0);
        assert!(settle_costs(&[], &g, &tariff, &bess, PeakState::default()).is_err());
    }

    #[test]
    fn two_identical_months_double() {
        let g = grid(2019, 4, 1, 61, 60); // April (30 d) and May (31 d)
        let tariff = TariffSchedule::case_study();
        let bess = BessParams::case_study();
        let apr = 30 * 24;
        let trace: Vec<_> = (0..apr)
            .map(|t| record(t, 50.0 + (t % 24) as f64))
            .chain((apr..apr + apr).map(|t| record(t, 50.0 + (t % 24) as f64)))
            .collect();
        let r = settle_costs(&trace, &g, &tariff, &bess, PeakState::default()).unwrap();
        assert_eq!(r.months.len(), 2);
        assert_eq!(r.months[0].ncdc, r.months[1].ncdc);
        assert_eq!(r.months[0].energy_cost, r.months[1].energy_cost);
        assert_eq!(r.ncdc, 2.0 * r.months[0].ncdc);
        assert!(!r.months[0].partial);
        assert!(r.months[1].partial);
    }

    #[test]
    fn zero_load_costs_nothing() {
        let g = grid(2019, 1, 30, 3, 60);
        let spd = g.steps_per_day();
        let load = vec![0.0; g.n_steps()];
        let pv = vec![0.0; g.n_steps()];
        let spec = |mode| HorizonSpec {
            mode,
            nominal_steps: spd,
        };
        let rolling = spec(HorizonMode::Rolling);
        let shrinking = spec(HorizonMode::Shrinking);
        for controller in [
            ControllerSpec::trad(Tracking::Nt, rolling),
            ControllerSpec::trad(Tracking::Wt, shrinking),
            ControllerSpec::proposed(Tracking::Wt, shrinking, shrinking),
            ControllerSpec::empc_star(Tracking::Wt, rolling),
        ] {
            let cfg = ScenarioConfig::new(
                g.clone(),
                TariffSchedule::case_study(),
                BessParams::case_study(),
                controller,
            );
            let out = run_closed_loop(&cfg, &load, &pv).unwrap();
            assert!(out.report.annual_cost.abs() < 1e-9, "{}", out.report.annual_cost);
            assert!(out.trace.iter().all(|r| r.u2.abs() < 1e-9));
            assert_eq!(out.report.months.len(), 2);
        }
    }

    #[test]
    fn daily_difference_counts_complete_days() {
        let g = grid(2019, 1, 1, 2, 60);
        let mut trace: Vec<_> = (0..48).map(|t| record(t, 0.0)).collect();
        trace[24].x = 0.6;
        trace[47].x_next = 0.55;
        let d = daily_soc_difference(&trace, &g);
        assert_eq!(d.len(), 2);
        assert!((d[0] - 0.1).abs() < 1e-12);
        assert!((d[1] + 0.05).abs() < 1e-12);
    }
}
