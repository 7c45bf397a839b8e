use super::block::DispatchBlock;
use super::{AugmentedState, DispatchPlan, ForecastSlice, Plant, ReferencePeaks, ReferenceTrajectory};
use crate::optimizer::{Cmp, LinExpr, PwlModel, SolveError, VarId};
use crate::tariff::PeakState;
use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// How the auxiliary peak recursion is written into the LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PeakLowering {
    /// One `y_NC`, `y_OP` pair per step with
    /// `y(k+1) >= (1-σ(k)) y(k)` and `y(k+1) >= u1(k)`.
    PerStep,
    /// One peak column per month segment of the window. Between resets the
    /// recursion is a running max, so only its value at a reset or at the
    /// terminal step is priced.
    #[default]
    Segment,
}

/// Reference peaks (ŷ, y̌) at target step `k` from the reference computed at
/// `reference.origin` with peaks `p_hat` observed there.
///
/// When `k` is one past the reference window the future set is empty; y̌
/// then takes its value at the last reference step.
pub fn reference_peaks(
    grid: &TimeGrid,
    k: usize,
    reference: &ReferenceTrajectory,
    p_hat: PeakState,
) -> Result<ReferencePeaks> {
    let w = reference.window;
    if k < reference.origin || k > w.end + 1 {
        return Err(Error::Model(format!(
            "reference peaks requested at step {k}, reference covers {}..={}",
            reference.origin,
            w.end + 1
        )));
    }
    let (sigma_k, _) = grid.sigma(k)?;

    let mut y_hat_nc = p_hat.p_nc;
    let mut y_hat_op = p_hat.p_op;
    if k > 0 {
        let month = grid.month(k - 1);
        for kp in w.steps().filter(|&kp| grid.month(kp) == month) {
            let u = reference.u1_at(kp);
            y_hat_nc = y_hat_nc.max(u);
            if grid.in_op(kp) {
                y_hat_op = y_hat_op.max(u);
            }
        }
    }

    let future = |from: usize| {
        let month = grid.month(from);
        let mut nc = 0.0_f64;
        let mut op = 0.0_f64;
        for kp in (from..=w.end).filter(|&kp| grid.month(kp) == month) {
            let u = reference.u1_at(kp);
            nc = nc.max(u);
            if grid.in_op(kp) {
                op = op.max(u);
            }
        }
        (nc, op)
    };
    let (y_check_nc, y_check_op) = if sigma_k {
        (0.0, 0.0)
    } else if k > w.end {
        let (s, _) = grid.sigma(w.end)?;
        if s {
            (0.0, 0.0)
        } else {
            future(w.end)
        }
    } else {
        future(k)
    };

    Ok(ReferencePeaks {
        y_hat_nc,
        y_check_nc,
        y_hat_op,
        y_check_op,
    })
}

/// MPC stage of the proposed EMPC: stage costs with month-end demand charges,
/// the reference terminal cost and the terminal SOC pin `x(τ+1) = x_r(τ+1)`.
pub fn proposed_empc_plan(
    plant: &Plant,
    x_t: f64,
    peak_state: PeakState,
    reference: &ReferenceTrajectory,
    forecast: &ForecastSlice,
    lowering: PeakLowering,
) -> std::result::Result<DispatchPlan, SolveError> {
    let window = forecast.window;
    let terminal = window.end + 1;
    if reference.origin != window.start || terminal > reference.window.end + 1 {
        return Err(SolveError::Malformed(format!(
            "reference {}..={} does not cover terminal step {terminal}",
            reference.origin, reference.window.end
        )));
    }
    let peaks = reference_peaks(plant.grid, terminal, reference, peak_state)
        .map_err(|e| SolveError::Malformed(e.to_string()))?;
    let (model, block) = mpc_model(plant, x_t, peak_state, reference, forecast, &peaks, lowering);
    let sol = model.solve(&plant.tol)?;
    Ok(block.extract(plant, &sol))
}

/// Builds the MPC-stage program; exposed to the crate for LP dumps.
pub(crate) fn mpc_model(
    plant: &Plant,
    x_t: f64,
    peak_state: PeakState,
    reference: &ReferenceTrajectory,
    forecast: &ForecastSlice,
    peaks: &ReferencePeaks,
    lowering: PeakLowering,
) -> (PwlModel, DispatchBlock) {
    let grid = plant.grid;
    let tariff = plant.tariff;
    let window = forecast.window;
    let n = window.len();
    let mut model = PwlModel::new();
    let block = DispatchBlock::add(&mut model, plant, window, x_t, forecast.net_kw());

    let e_pin = reference.soc_at(window.end + 1) * plant.bess.energy_kwh;
    model.set_bounds(block.energy[n], e_pin, e_pin);

    // P̂(t) already carries any reset at t, so y(t+1) starts from it
    let floor = peak_state;

    match lowering {
        PeakLowering::PerStep => {
            let mut prev: Option<(VarId, VarId)> = None;
            for (i, k) in window.steps().enumerate() {
                let reset = grid.is_month_start(k);
                let y_nc = model.add_var(format!("ync{}", i + 1), 0.0, f64::INFINITY);
                let y_op = model.add_var(format!("yop{}", i + 1), 0.0, f64::INFINITY);
                model.add_constraint(block.u1(i).term(y_nc, -1.0), Cmp::Le, 0.0);
                if grid.in_op(k) {
                    model.add_constraint(block.u1(i).term(y_op, -1.0), Cmp::Le, 0.0);
                }
                match prev {
                    None => {
                        model.set_bounds(y_nc, floor.p_nc, f64::INFINITY);
                        model.set_bounds(y_op, floor.p_op, f64::INFINITY);
                    }
                    Some((p_nc, p_op)) => {
                        if reset {
                            model.add_cost(p_nc, tariff.r_nc);
                            model.add_cost(p_op, tariff.r_op);
                        } else {
                            model.add_constraint(LinExpr::var(p_nc).term(y_nc, -1.0), Cmp::Le, 0.0);
                            model.add_constraint(LinExpr::var(p_op).term(y_op, -1.0), Cmp::Le, 0.0);
                        }
                    }
                }
                prev = Some((y_nc, y_op));
            }
            let (y_nc, y_op) = prev.expect("window has at least one step");
            model.add_max_term(
                tariff.r_nc,
                vec![LinExpr::var(y_nc), LinExpr::constant(peaks.y_check_nc)],
            );
            model.add_max_term(
                tariff.r_op,
                vec![LinExpr::var(y_op), LinExpr::constant(peaks.y_check_op)],
            );
        }
        PeakLowering::Segment => {
            let mut nc = vec![LinExpr::constant(floor.p_nc)];
            let mut op = vec![LinExpr::constant(floor.p_op)];
            for (i, k) in window.steps().enumerate() {
                if i > 0 && grid.is_month_start(k) {
                    let done_nc = std::mem::replace(&mut nc, vec![LinExpr::constant(0.0)]);
                    let done_op = std::mem::replace(&mut op, vec![LinExpr::constant(0.0)]);
                    model.add_max_term(tariff.r_nc, done_nc);
                    model.add_max_term(tariff.r_op, done_op);
                }
                nc.push(block.u1(i));
                if grid.in_op(k) {
                    op.push(block.u1(i));
                }
            }
            nc.push(LinExpr::constant(peaks.y_check_nc));
            op.push(LinExpr::constant(peaks.y_check_op));
            model.add_max_term(tariff.r_nc, nc);
            model.add_max_term(tariff.r_op, op);
        }
    }
    model.add_constant(-(tariff.r_nc * peaks.y_hat_nc + tariff.r_op * peaks.y_hat_op));
    (model, block)
}

/// Runs the auxiliary peak recursion over a plan's `u1`, starting from
/// `y(t) = P̂(t)`. Entry `i` is the state at `window.start + i`. A reset at
/// the first step is already reflected in `P̂(t)`.
pub fn replay_augmented(grid: &TimeGrid, plan: &DispatchPlan, peak_state: PeakState) -> Vec<AugmentedState> {
    let mut out = Vec::with_capacity(plan.u1.len() + 1);
    let mut z = AugmentedState {
        x: plan.soc[0],
        y_nc: peak_state.p_nc,
        y_op: peak_state.p_op,
    };
    out.push(z);
    for (i, k) in plan.window.steps().enumerate() {
        let keep = if i > 0 && grid.is_month_start(k) { 0.0 } else { 1.0 };
        let u = plan.u1[i];
        z = AugmentedState {
            x: plan.soc[i + 1],
            y_nc: (keep * z.y_nc).max(u),
            y_op: (keep * z.y_op).max(if grid.in_op(k) { u } else { 0.0 }),
        };
        out.push(z);
    }
    out
}

/// MPC-stage objective of a plan recomputed from the replayed recursion.
pub fn mpc_stage_objective(plant: &Plant, plan: &DispatchPlan, peak_state: PeakState, peaks: &ReferencePeaks) -> f64 {
    let tariff = plant.tariff;
    let dt = plant.grid.dt_hours();
    let z = replay_augmented(plant.grid, plan, peak_state);
    let mut total = 0.0;
    for (i, k) in plan.window.steps().enumerate() {
        let c = crate::tariff::energy_cost_step(plan.u1[i], plan.u2[i], tariff, plant.bess, dt);
        total += c.grid_cost + c.loss_cost;
        if i > 0 && plant.grid.is_month_start(k) {
            total += tariff.r_nc * z[i].y_nc + tariff.r_op * z[i].y_op;
        }
    }
    let last = z[z.len() - 1];
    total
        + tariff.r_nc * (last.y_nc.max(peaks.y_check_nc) - peaks.y_hat_nc)
        + tariff.r_op * (last.y_op.max(peaks.y_check_op) - peaks.y_hat_op)
}
