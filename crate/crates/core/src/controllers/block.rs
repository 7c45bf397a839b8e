//! Battery dispatch variables shared by every controller program.

use super::{DispatchPlan, Plant};
use crate::optimizer::{Cmp, LinExpr, ModelSolution, PwlModel, VarId};
use crate::timegrid::HorizonWindow;

pub(crate) const SOC_THRESHOLD: f64 = 0.5;

/// Window decision variables. Battery power is split into discharge and
/// charge parts, `u2 = dis - ch`, so the loss term `|u2|` is linear. Stored
/// energy is in kWh: `e = BESS_en · x`.
pub(crate) struct DispatchBlock {
    pub window: HorizonWindow,
    pub net: Vec<f64>,
    pub dis: Vec<VarId>,
    pub ch: Vec<VarId>,
    /// `energy[i]` is the stored energy at step `window.start + i`, for
    /// `i = 0..=len`.
    pub energy: Vec<VarId>,
    e0: f64,
    threshold_relaxed: bool,
}

impl DispatchBlock {
    /// Adds dispatch variables, SOC dynamics and bounds, and the energy cost.
    pub fn add(model: &mut PwlModel, plant: &Plant, window: HorizonWindow, soc0: f64, net: Vec<f64>) -> Self {
        let n = window.len();
        debug_assert_eq!(net.len(), n);
        let bess = plant.bess;
        let cap = bess.energy_kwh;
        let (e_lo, e_hi) = (bess.soc_min * cap, bess.soc_max * cap);
        let dt = plant.grid.dt_hours();
        let rate = plant.tariff.r_ec * dt;
        let loss = rate * bess.loss_factor();

        let mut dis = Vec::with_capacity(n);
        let mut ch = Vec::with_capacity(n);
        let mut energy = Vec::with_capacity(n + 1);
        let e0 = soc0 * cap;
        // an initial SOC outside the box leaves an empty interval (infeasible)
        energy.push(model.add_var("e0", e0.max(e_lo), e0.min(e_hi)));
        for i in 0..n {
            let d = model.add_var(format!("dis{i}"), 0.0, bess.power_kw);
            let c = model.add_var(format!("ch{i}"), 0.0, bess.power_kw);
            let e = model.add_var(format!("e{}", i + 1), e_lo, e_hi);
            // e[i+1] - e[i] + dt (dis - ch) = 0
            model.add_constraint(
                LinExpr::var(e).term(energy[i], -1.0).term(d, dt).term(c, -dt),
                Cmp::Eq,
                0.0,
            );
            // R_EC ΔT (u1 + (1-η)/2 |u2|) with u1 = net - dis + ch
            model.add_constant(rate * net[i]);
            model.add_cost(d, loss - rate);
            model.add_cost(c, loss + rate);
            dis.push(d);
            ch.push(c);
            energy.push(e);
        }
        Self {
            window,
            net,
            dis,
            ch,
            energy,
            e0,
            threshold_relaxed: false,
        }
    }

    /// `u1` at window offset `i` as an affine expression of the block.
    pub fn u1(&self, i: usize) -> LinExpr {
        LinExpr::constant(self.net[i])
            .term(self.dis[i], -1.0)
            .term(self.ch[i], 1.0)
    }

    /// `x(threshold_step) >= 0.5` when the threshold falls inside the window
    /// or one step past it. If 0.5 cannot be reached from the initial SOC at
    /// full charging power, the bound drops to the reachable SOC and the plan
    /// is flagged.
    pub fn add_soc_threshold(&mut self, model: &mut PwlModel, plant: &Plant) {
        let w = self.window;
        if w.threshold_step > w.start && w.threshold_step <= w.end + 1 {
            let bess = plant.bess;
            let steps = (w.threshold_step - w.start) as f64;
            let reach = (self.e0 + bess.power_kw * plant.grid.dt_hours() * steps).min(bess.soc_max * bess.energy_kwh);
            let target = SOC_THRESHOLD * bess.energy_kwh;
            let bound = if reach < target {
                self.threshold_relaxed = true;
                log::warn!(
                    "SOC threshold at step {} unreachable from step {}; bound lowered to {:.6}",
                    w.threshold_step,
                    w.start,
                    reach / bess.energy_kwh
                );
                reach
            } else {
                target
            };
            let e = self.energy[w.threshold_step - w.start];
            model.add_constraint(LinExpr::var(e), Cmp::Ge, bound);
        }
    }

    pub fn extract(&self, plant: &Plant, sol: &ModelSolution) -> DispatchPlan {
        let cap = plant.bess.energy_kwh;
        let u2: Vec<f64> = self
            .dis
            .iter()
            .zip(&self.ch)
            .map(|(&d, &c)| sol.value(d) - sol.value(c))
            .collect();
        let u1 = self.net.iter().zip(&u2).map(|(n, u)| n - u).collect();
        let soc = self.energy.iter().map(|&e| sol.value(e) / cap).collect();
        DispatchPlan {
            window: self.window,
            u1,
            u2,
            soc,
            objective: sol.objective,
            iterations: sol.iterations,
            threshold_relaxed: self.threshold_relaxed,
        }
    }
}
