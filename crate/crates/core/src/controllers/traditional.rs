use super::block::DispatchBlock;
use super::{DispatchPlan, ForecastSlice, Plant, ReferenceTrajectory, Tracking};
use crate::optimizer::{LinExpr, PwlModel, SolveError};
use crate::tariff::PeakState;

/// Builds `Σ C₁ + C₂` over the forecast window with the SOC dynamics, power and
/// SOC limits, and the 50 % low threshold.
///
/// C₂ counts only window steps in the billing month of `t`; the thresholds are
/// zero for NT and the running peaks for WT.
pub(crate) fn economic_window_model(
    plant: &Plant,
    x_t: f64,
    forecast: &ForecastSlice,
    peak_state: PeakState,
    tracking: Tracking,
) -> (PwlModel, DispatchBlock) {
    let window = forecast.window;
    let grid = plant.grid;
    let mut model = PwlModel::new();
    let mut block = DispatchBlock::add(&mut model, plant, window, x_t, forecast.net_kw());
    block.add_soc_threshold(&mut model, plant);

    let thresholds = match tracking {
        Tracking::Nt => PeakState::default(),
        Tracking::Wt => peak_state,
    };
    let month = grid.month(window.start);
    let mut nc = vec![LinExpr::constant(thresholds.p_nc)];
    let mut op = vec![LinExpr::constant(thresholds.p_op)];
    for (i, k) in window.steps().enumerate() {
        if grid.month(k) != month {
            continue;
        }
        nc.push(block.u1(i));
        if grid.in_op(k) {
            op.push(block.u1(i));
        }
    }
    model.add_max_term(plant.tariff.r_nc, nc);
    model.add_max_term(plant.tariff.r_op, op);
    (model, block)
}

/// Traditional EMPC plan over `forecast.window` starting from SOC `x_t`.
pub fn trad_empc_plan(
    plant: &Plant,
    x_t: f64,
    forecast: &ForecastSlice,
    peak_state: PeakState,
    tracking: Tracking,
) -> Result<DispatchPlan, SolveError> {
    let (model, block) = economic_window_model(plant, x_t, forecast, peak_state, tracking);
    let sol = model.solve(&plant.tol)?;
    Ok(block.extract(plant, &sol))
}

/// Reference stage: the same economic program over the reference window,
/// anchored at the current SOC.
pub fn build_reference(
    plant: &Plant,
    x_t: f64,
    forecast: &ForecastSlice,
    peak_state: PeakState,
    tracking: Tracking,
) -> Result<ReferenceTrajectory, SolveError> {
    trad_empc_plan(plant, x_t, forecast, peak_state, tracking).map(ReferenceTrajectory::from)
}
