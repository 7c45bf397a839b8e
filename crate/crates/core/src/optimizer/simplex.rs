//! Bounded-variable revised primal simplex.
//!
//! Every row `a_i x (<=|=) b_i` receives a logical column `s_i` so that
//! `a_i x + s_i = b_i`, with `s_i ∈ [0, ∞)` for `<=` rows and `s_i ∈ [0, 0]` for
//! equalities. The starting basis is all logicals, after which a crash pass
//! swaps structural columns into the equality rows wherever a stable pivot
//! exists. Remaining primal infeasibilities are removed by a composite phase 1
//! that minimises the sum of bound violations of the basic variables, with a
//! long-step ratio test that passes breakpoints while that sum keeps falling.
//! The basis is held as sparse LU factors plus an eta file and refactored
//! periodically.
//! Dantzig pricing is used until a run of degenerate pivots is seen, after
//! which Bland's rule takes over until progress resumes.

use super::lp::{LinearProgram, LpSolution, LpStatus, Sense};
use super::lu::BasisFactor;
use super::{SolveError, Tolerances};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const REFRESH_EVERY: usize = 100;
const DEGENERATE_RUN_FOR_BLAND: usize = 30;
const MAX_REINVERSIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable sitting at zero.
    Free,
}

struct Simplex {
    m: usize,
    n: usize,
    // structural columns, compressed sparse column
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    rhs: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    x: Vec<f64>,
    factor: BasisFactor,
    y: Vec<f64>,
    alpha: Vec<f64>,
    cb: Vec<f64>,
    iterations: usize,
    primal_tol: f64,
    dual_tol: f64,
}

enum Step {
    Optimal,
    Infeasible,
    Unbounded,
    Continue,
}

/// Solve `lp`. Iteration-limit exhaustion and numerical breakdown are errors,
/// never silently reported as optimal.
pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> Result<LpSolution, SolveError> {
    lp.check_dimensions().map_err(SolveError::Malformed)?;
    let n = lp.n_vars();
    for j in 0..n {
        if lp.lower[j].is_nan() || lp.upper[j].is_nan() {
            return Err(SolveError::Malformed(format!("variable {j} has a NaN bound")));
        }
        if lp.lower[j] > lp.upper[j] {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                x: vec![0.0; n],
                iterations: 0,
            });
        }
    }

    let mut s = Simplex::new(lp, tol);
    let max_iter = tol.max_iterations.unwrap_or_else(|| 20_000 + 50 * (s.m + s.n));
    let mut reinversions = 0;
    let mut degenerate_run = 0usize;
    let mut phase_two_y_valid = false;

    let status = loop {
        if s.iterations >= max_iter {
            return Err(SolveError::IterationLimit {
                iterations: s.iterations,
            });
        }
        if s.iterations > 0 && s.iterations.is_multiple_of(REFRESH_EVERY) {
            s.refresh_basics();
            phase_two_y_valid = false;
        }
        let bland = degenerate_run > DEGENERATE_RUN_FOR_BLAND;
        match s.iterate(bland, &mut phase_two_y_valid, &mut degenerate_run)? {
            Step::Continue => continue,
            Step::Unbounded => break LpStatus::Unbounded,
            terminal @ (Step::Optimal | Step::Infeasible) => {
                // Confirm on a fresh basis solve before trusting the verdict.
                let residual = s.residual();
                if residual > tol.feasibility * 1e-2 && reinversions < MAX_REINVERSIONS {
                    reinversions += 1;
                    s.reinvert()?;
                    phase_two_y_valid = false;
                    continue;
                }
                s.refresh_basics();
                phase_two_y_valid = false;
                if s.max_basic_infeasibility() > s.primal_tol {
                    if matches!(terminal, Step::Infeasible) {
                        break LpStatus::Infeasible;
                    }
                    continue;
                }
                match terminal {
                    Step::Optimal => break LpStatus::Optimal,
                    _ => continue,
                }
            }
        }
    };

    let x = s.x[..n].to_vec();
    let objective = if status == LpStatus::Optimal {
        lp.evaluate(&x)
    } else {
        f64::NAN
    };
    Ok(LpSolution {
        status,
        objective,
        x,
        iterations: s.iterations,
    })
}

impl Simplex {
    fn new(lp: &LinearProgram, tol: &Tolerances) -> Self {
        let m = lp.n_rows();
        let n = lp.n_vars();

        let mut counts = vec![0usize; n + 1];
        for row in &lp.rows {
            for &(j, _) in &row.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[n];
        let mut fill = counts.clone();
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }

        let total = n + m;
        let mut lb = Vec::with_capacity(total);
        let mut ub = Vec::with_capacity(total);
        let mut cost = Vec::with_capacity(total);
        lb.extend_from_slice(&lp.lower);
        ub.extend_from_slice(&lp.upper);
        cost.extend_from_slice(&lp.objective);
        for row in &lp.rows {
            lb.push(0.0);
            ub.push(match row.sense {
                Sense::Le => f64::INFINITY,
                Sense::Eq => 0.0,
            });
            cost.push(0.0);
        }

        let mut state = vec![VarState::Basic; total];
        let mut x = vec![0.0; total];
        for j in 0..n {
            let (l, u) = (lb[j], ub[j]);
            if l.is_finite() {
                state[j] = VarState::AtLower;
                x[j] = l;
            } else if u.is_finite() {
                state[j] = VarState::AtUpper;
                x[j] = u;
            } else {
                state[j] = VarState::Free;
            }
        }
        let basis: Vec<usize> = (n..total).collect();
        let factor = BasisFactor::new(m, |p| vec![(p, 1.0)]).expect("identity basis");

        let scale = lp
            .rows
            .iter()
            .map(|r| r.rhs.abs())
            .chain(
                lp.lower
                    .iter()
                    .chain(&lp.upper)
                    .filter(|v| v.is_finite())
                    .map(|v| v.abs()),
            )
            .fold(1.0f64, f64::max);

        let mut s = Self {
            m,
            n,
            col_start: counts,
            col_row,
            col_val,
            rhs: lp.rows.iter().map(|r| r.rhs).collect(),
            lb,
            ub,
            cost,
            state,
            basis,
            x,
            factor,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            cb: vec![0.0; m],
            iterations: 0,
            primal_tol: (tol.feasibility * 1e-2 * scale).max(1e-11),
            dual_tol: (tol.optimality * 1e-2).max(1e-12),
        };
        s.crash(lp);
        if s.reinvert().is_err() {
            // fall back to the slack basis
            for j in 0..n {
                if s.state[j] == VarState::Basic {
                    s.state[j] = if s.lb[j].is_finite() {
                        VarState::AtLower
                    } else if s.ub[j].is_finite() {
                        VarState::AtUpper
                    } else {
                        VarState::Free
                    };
                    s.x[j] = match s.state[j] {
                        VarState::AtLower => s.lb[j],
                        VarState::AtUpper => s.ub[j],
                        _ => 0.0,
                    };
                }
            }
            s.basis = (n..total).collect();
            for j in n..total {
                s.state[j] = VarState::Basic;
            }
            s.reinvert().expect("identity basis");
        }
        s
    }

    /// Replace the fixed logical of each equality row by a structural column
    /// when the pivot is well conditioned. Wider-ranged columns go first since
    /// they are least likely to start outside their bounds.
    fn crash(&mut self, lp: &LinearProgram) {
        let n = self.n;
        let mut candidates: Vec<(usize, f64)> = Vec::new();
        for (i, row) in lp.rows.iter().enumerate() {
            if row.sense != Sense::Eq || self.basis[i] != n + i {
                continue;
            }
            candidates.clear();
            candidates.extend(
                row.coeffs
                    .iter()
                    .filter(|&&(j, a)| a != 0.0 && self.state[j] != VarState::Basic && self.lb[j] < self.ub[j])
                    .map(|&(j, _)| (j, self.ub[j] - self.lb[j])),
            );
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for &(j, _) in &candidates {
                self.compute_alpha(j);
                let biggest = self.alpha.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                if self.alpha[i].abs() >= 0.1 * biggest && self.alpha[i].abs() > PIVOT_TOL {
                    self.state[n + i] = VarState::AtLower;
                    self.x[n + i] = 0.0;
                    self.basis[i] = j;
                    self.state[j] = VarState::Basic;
                    self.factor.push_eta(i, &self.alpha);
                    break;
                }
            }
        }
    }

    /// Recompute basic values from the nonbasic ones: `x_B = B⁻¹ (b - N x_N)`.
    fn refresh_basics(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.n {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for p in self.col_start[j]..self.col_start[j + 1] {
                    r[self.col_row[p]] -= self.col_val[p] * xj;
                }
            }
        }
        for i in 0..m {
            let j = self.n + i;
            if self.state[j] != VarState::Basic {
                r[i] -= self.x[j];
            }
        }
        self.factor.ftran(&mut r);
        for i in 0..m {
            self.x[self.basis[i]] = r[i];
        }
    }

    /// Max absolute row residual `|A x + s - b|` of the current point.
    fn residual(&self) -> f64 {
        let mut r: Vec<f64> = (0..self.m).map(|i| self.x[self.n + i] - self.rhs[i]).collect();
        for j in 0..self.n {
            let xj = self.x[j];
            if xj != 0.0 {
                for p in self.col_start[j]..self.col_start[j + 1] {
                    r[self.col_row[p]] += self.col_val[p] * xj;
                }
            }
        }
        r.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| (self.lb[j] - self.x[j]).max(self.x[j] - self.ub[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Factor the current basis afresh and recompute the basic values.
    fn reinvert(&mut self) -> Result<(), SolveError> {
        let n = self.n;
        let (basis, col_start, col_row, col_val) = (&self.basis, &self.col_start, &self.col_row, &self.col_val);
        self.factor = BasisFactor::new(self.m, |p| {
            let j = basis[p];
            if j < n {
                (col_start[j]..col_start[j + 1])
                    .map(|k| (col_row[k], col_val[k]))
                    .collect()
            } else {
                vec![(j - n, 1.0)]
            }
        })
        .map_err(SolveError::Numerical)?;
        self.refresh_basics();
        Ok(())
    }

    /// `y = c_B B⁻¹` for the given basic costs.
    fn compute_duals(&mut self) {
        self.y.copy_from_slice(&self.cb);
        self.factor.btran(&mut self.y);
    }

    fn reduced_cost(&self, j: usize, phase_one: bool) -> f64 {
        let c = if phase_one { 0.0 } else { self.cost[j] };
        if j < self.n {
            let mut d = c;
            for p in self.col_start[j]..self.col_start[j + 1] {
                d -= self.y[self.col_row[p]] * self.col_val[p];
            }
            d
        } else {
            c - self.y[j - self.n]
        }
    }

    fn compute_alpha(&mut self, q: usize) {
        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        if q < self.n {
            for p in self.col_start[q]..self.col_start[q + 1] {
                self.alpha[self.col_row[p]] = self.col_val[p];
            }
        } else {
            self.alpha[q - self.n] = 1.0;
        }
        self.factor.ftran(&mut self.alpha);
    }

    fn iterate(
        &mut self,
        bland: bool,
        phase_two_y_valid: &mut bool,
        degenerate_run: &mut usize,
    ) -> Result<Step, SolveError> {
        let m = self.m;
        let ptol = self.primal_tol;

        // Phase selection from current basic infeasibilities.
        let mut infeasible = 0;
        for i in 0..m {
            let j = self.basis[i];
            let v = self.x[j];
            self.cb[i] = if v < self.lb[j] - ptol {
                infeasible += 1;
                -1.0
            } else if v > self.ub[j] + ptol {
                infeasible += 1;
                1.0
            } else {
                0.0
            };
        }
        let phase_one = infeasible > 0;
        if phase_one {
            self.compute_duals();
            *phase_two_y_valid = false;
        } else if !*phase_two_y_valid {
            for i in 0..m {
                self.cb[i] = self.cost[self.basis[i]];
            }
            self.compute_duals();
            *phase_two_y_valid = true;
        }

        // Pricing.
        let mut entering: Option<(usize, f64, f64)> = None; // (col, dir, |d|)
        for j in 0..self.n + m {
            let dir = match self.state[j] {
                VarState::Basic => continue,
                VarState::AtLower if self.lb[j] == self.ub[j] => continue,
                _ => {
                    let d = self.reduced_cost(j, phase_one);
                    match self.state[j] {
                        VarState::AtLower if d < -self.dual_tol => (1.0, -d),
                        VarState::AtUpper if d > self.dual_tol => (-1.0, d),
                        VarState::Free if d.abs() > self.dual_tol => (-d.signum(), d.abs()),
                        _ => continue,
                    }
                }
            };
            if bland {
                entering = Some((j, dir.0, dir.1));
                break;
            }
            if entering.is_none_or(|(_, _, best)| dir.1 > best) {
                entering = Some((j, dir.0, dir.1));
            }
        }
        let Some((q, dir, _)) = entering else {
            return Ok(if phase_one { Step::Infeasible } else { Step::Optimal });
        };
        let d_q = self.reduced_cost(q, phase_one);

        self.compute_alpha(q);

        if phase_one && !bland {
            return match self.long_step_phase_one(q, dir, d_q, degenerate_run)? {
                Step::Unbounded => Err(SolveError::Numerical(
                    "phase-one direction without a blocking row".into(),
                )),
                step => Ok(step),
            };
        }

        // Ratio test. Basic i changes at rate delta_i = -dir * alpha_i.
        let mut theta_min = f64::INFINITY;
        for i in 0..m {
            let a = self.alpha[i];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some((theta, _)) = self.row_limit(i, -dir * a, phase_one) {
                theta_min = theta_min.min(theta);
            }
        }
        let flip = self.ub[q] - self.lb[q];
        if flip.is_finite() && flip <= theta_min {
            // bound flip, no basis change
            let theta = flip;
            self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
            self.state[q] = if dir > 0.0 {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            for i in 0..m {
                let a = self.alpha[i];
                if a != 0.0 {
                    self.x[self.basis[i]] -= dir * a * theta;
                }
            }
            self.iterations += 1;
            *degenerate_run = 0;
            return Ok(Step::Continue);
        }
        if theta_min == f64::INFINITY {
            if phase_one {
                return Err(SolveError::Numerical(
                    "phase-one direction without a blocking row".into(),
                ));
            }
            return Ok(Step::Unbounded);
        }

        // Among rows that block within a hair of theta_min, prefer the largest
        // pivot (or the lowest variable index under Bland's rule).
        let tie = theta_min + 1e-12 * (1.0 + theta_min);
        let mut leave: Option<(usize, f64, f64)> = None; // (row, bound, |alpha|)
        for i in 0..m {
            let a = self.alpha[i];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some((theta, bound)) = self.row_limit(i, -dir * a, phase_one) {
                if theta <= tie {
                    let better = match leave {
                        None => true,
                        Some((r, _, best)) => {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                a.abs() > best
                            }
                        }
                    };
                    if better {
                        leave = Some((i, bound, a.abs()));
                    }
                }
            }
        }
        let (r, bound, _) = leave.expect("ratio test found a blocking row");
        let theta = theta_min.max(0.0);

        if theta <= 1e-12 {
            *degenerate_run += 1;
        } else {
            *degenerate_run = 0;
        }

        // Primal update.
        self.x[q] += dir * theta;
        for i in 0..m {
            let a = self.alpha[i];
            if a != 0.0 {
                self.x[self.basis[i]] -= dir * a * theta;
            }
        }
        let leaving = self.basis[r];
        self.x[leaving] = bound;
        self.state[leaving] = if bound == self.lb[leaving] {
            VarState::AtLower
        } else {
            VarState::AtUpper
        };
        self.basis[r] = q;
        self.state[q] = VarState::Basic;

        self.pivot_inverse(r)?;
        *phase_two_y_valid = false;
        self.iterations += 1;
        Ok(Step::Continue)
    }

    /// Phase-1 step along entering column `q`. Breakpoints where basic
    /// variables reach a bound are passed in order while the slope of the sum
    /// of infeasibilities stays negative.
    fn long_step_phase_one(
        &mut self,
        q: usize,
        dir: f64,
        d_q: f64,
        degenerate_run: &mut usize,
    ) -> Result<Step, SolveError> {
        let m = self.m;
        let ptol = self.primal_tol;
        // (theta, row, bound)
        let mut breaks: Vec<(f64, usize, f64)> = Vec::new();
        for i in 0..m {
            let a = self.alpha[i];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -dir * a;
            let j = self.basis[i];
            let (v, l, u) = (self.x[j], self.lb[j], self.ub[j]);
            if v < l - ptol {
                if rate > 0.0 {
                    breaks.push(((l - v) / rate, i, l));
                    if u.is_finite() {
                        breaks.push(((u - v) / rate, i, u));
                    }
                }
            } else if v > u + ptol {
                if rate < 0.0 {
                    breaks.push(((u - v) / rate, i, u));
                    if l.is_finite() {
                        breaks.push(((l - v) / rate, i, l));
                    }
                }
            } else if rate < 0.0 && l.is_finite() {
                breaks.push(((v - l).max(0.0) / -rate, i, l));
            } else if rate > 0.0 && u.is_finite() {
                breaks.push(((u - v).max(0.0) / rate, i, u));
            }
        }
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0));

        let flip = self.ub[q] - self.lb[q];
        let mut slope = dir * d_q;
        let mut stop: Option<usize> = None;
        for (k, &(theta, i, _)) in breaks.iter().enumerate() {
            if flip.is_finite() && flip <= theta {
                break;
            }
            slope += self.alpha[i].abs();
            if slope >= -self.dual_tol {
                stop = Some(k);
                break;
            }
        }
        let Some(k) = stop.or_else(|| {
            // entering variable reaches its other bound first, or the slope
            // never turns: take the last breakpoint short of the flip
            if flip.is_finite() {
                None
            } else {
                breaks.len().checked_sub(1)
            }
        }) else {
            if !flip.is_finite() {
                return Ok(Step::Unbounded);
            }
            let theta = flip;
            self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
            self.state[q] = if dir > 0.0 {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            for i in 0..m {
                let a = self.alpha[i];
                if a != 0.0 {
                    self.x[self.basis[i]] -= dir * a * theta;
                }
            }
            self.iterations += 1;
            *degenerate_run = 0;
            return Ok(Step::Continue);
        };

        // prefer the largest pivot among breakpoints tied with the stop
        let theta_k = breaks[k].0;
        let tie = theta_k + 1e-12 * (1.0 + theta_k);
        let mut pick = k;
        for (idx, &(theta, i, _)) in breaks.iter().enumerate().skip(k + 1) {
            if theta > tie {
                break;
            }
            if self.alpha[i].abs() > self.alpha[breaks[pick].1].abs() {
                pick = idx;
            }
        }
        let (theta, r, bound) = breaks[pick];
        let theta = theta.max(0.0);
        if theta <= 1e-12 {
            *degenerate_run += 1;
        } else {
            *degenerate_run = 0;
        }
        self.x[q] += dir * theta;
        for i in 0..m {
            let a = self.alpha[i];
            if a != 0.0 {
                self.x[self.basis[i]] -= dir * a * theta;
            }
        }
        let leaving = self.basis[r];
        self.x[leaving] = bound;
        self.state[leaving] = if bound == self.lb[leaving] {
            VarState::AtLower
        } else {
            VarState::AtUpper
        };
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
        self.pivot_inverse(r)?;
        self.iterations += 1;
        Ok(Step::Continue)
    }

    /// Step length at which basic row `i` blocks when it moves at `rate`, and
    /// the bound it lands on.
    fn row_limit(&self, i: usize, rate: f64, phase_one: bool) -> Option<(f64, f64)> {
        let j = self.basis[i];
        let (v, l, u) = (self.x[j], self.lb[j], self.ub[j]);
        let ptol = self.primal_tol;
        if phase_one && v < l - ptol {
            return (rate > 0.0).then(|| ((l - v) / rate, l));
        }
        if phase_one && v > u + ptol {
            return (rate < 0.0).then(|| ((u - v) / rate, u));
        }
        if rate < 0.0 && l.is_finite() {
            Some(((v - l).max(0.0) / -rate, l))
        } else if rate > 0.0 && u.is_finite() {
            Some(((u - v).max(0.0) / rate, u))
        } else {
            None
        }
    }

    /// Append the eta for a pivot on row `r` with column `alpha`, refactoring
    /// once the eta file grows long.
    fn pivot_inverse(&mut self, r: usize) -> Result<(), SolveError> {
        self.factor.push_eta(r, &self.alpha);
        if self.factor.n_etas() >= REFACTOR_EVERY {
            self.reinvert()?;
        }
        Ok(())
    }
}
