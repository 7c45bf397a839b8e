use super::lp::{LinearProgram, LpStatus, Sense};
use super::{solve_lp, SolveError, Tolerances};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Affine expression `Σ aᵢ xᵢ + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, v: VarId, a: f64) -> Self {
        self.terms.push((v, a));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, a)| a == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, a)| a * x[v.0]).sum::<f64>()
    }

    fn coeffs(&self, sign: f64) -> Vec<(usize, f64)> {
        self.terms
            .iter()
            .filter(|(_, a)| *a != 0.0)
            .map(|&(v, a)| (v.0, sign * a))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct VarDef {
    name: String,
    lower: f64,
    upper: f64,
}

/// Convex piecewise-linear minimisation model:
/// `linear + Σ cᵢ |affᵢ| + Σ dⱼ max(affⱼ₁, …)` over bounded variables and
/// linear constraints, with all `cᵢ, dⱼ >= 0`.
#[derive(Debug, Clone, Default)]
pub struct PwlModel {
    vars: Vec<VarDef>,
    constraints: Vec<(LinExpr, Cmp, f64)>,
    linear: Vec<f64>,
    constant: f64,
    abs_terms: Vec<(f64, LinExpr)>,
    max_terms: Vec<(f64, Vec<LinExpr>)>,
}

#[derive(Debug, Clone)]
pub struct LoweredModel {
    pub lp: LinearProgram,
    /// Model variables occupy LP columns `0..n_model_vars`; epigraph columns follow.
    pub n_model_vars: usize,
}

#[derive(Debug, Clone)]
pub struct ModelSolution {
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl ModelSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}

impl PwlModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(VarDef {
            name: name.into(),
            lower,
            upper,
        });
        self.linear.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
    }

    pub fn add_constraint(&mut self, expr: LinExpr, cmp: Cmp, rhs: f64) {
        self.constraints.push((expr, cmp, rhs));
    }

    pub fn add_cost(&mut self, v: VarId, c: f64) {
        self.linear[v.0] += c;
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn add_affine_cost(&mut self, expr: &LinExpr, scale: f64) {
        self.constant += scale * expr.constant;
        for &(v, a) in &expr.terms {
            self.linear[v.0] += scale * a;
        }
    }

    pub fn add_abs_term(&mut self, coef: f64, expr: LinExpr) {
        self.abs_terms.push((coef, expr));
    }

    pub fn add_max_term(&mut self, coef: f64, exprs: Vec<LinExpr>) {
        self.max_terms.push((coef, exprs));
    }

    /// The piecewise objective evaluated at model-variable values `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let linear: f64 = self.linear.iter().zip(x).map(|(c, v)| c * v).sum();
        let abs: f64 = self.abs_terms.iter().map(|(c, e)| c * e.eval(x).abs()).sum();
        let max: f64 = self
            .max_terms
            .iter()
            .map(|(d, es)| d * es.iter().map(|e| e.eval(x)).fold(f64::NEG_INFINITY, f64::max))
            .sum();
        self.constant + linear + abs + max
    }

    /// Epigraph lowering: every `c |a|` becomes `s >= a, s >= -a` with cost
    /// `c s`; every `d max(a₁..aₘ)` becomes `m >= aᵢ` with cost `d m`.
    /// Constant members of a max become a lower bound on its epigraph column.
    pub fn lower(&self) -> Result<LoweredModel> {
        let mut lp = LinearProgram::default();
        for (v, c) in self.vars.iter().zip(&self.linear) {
            lp.add_var(v.name.clone(), v.lower, v.upper, *c);
        }
        lp.offset = self.constant;

        for (expr, cmp, rhs) in &self.constraints {
            let rhs = rhs - expr.constant;
            match cmp {
                Cmp::Le => lp.add_row(expr.coeffs(1.0), Sense::Le, rhs),
                Cmp::Ge => lp.add_row(expr.coeffs(-1.0), Sense::Le, -rhs),
                Cmp::Eq => lp.add_row(expr.coeffs(1.0), Sense::Eq, rhs),
            }
        }

        for (k, (c, expr)) in self.abs_terms.iter().enumerate() {
            if c.is_nan() || *c < 0.0 {
                return Err(Error::Model(format!("abs term {k} has negative weight {c}")));
            }
            let s = lp.add_var(format!("abs{k}"), 0.0, f64::INFINITY, *c);
            let mut up = expr.coeffs(1.0);
            up.push((s, -1.0));
            lp.add_row(up, Sense::Le, -expr.constant);
            let mut down = expr.coeffs(-1.0);
            down.push((s, -1.0));
            lp.add_row(down, Sense::Le, expr.constant);
        }

        for (k, (d, exprs)) in self.max_terms.iter().enumerate() {
            if d.is_nan() || *d < 0.0 {
                return Err(Error::Model(format!("max term {k} has negative weight {d}")));
            }
            if exprs.is_empty() {
                return Err(Error::Model(format!("max term {k} has no members")));
            }
            let floor = exprs
                .iter()
                .filter(|e| e.is_constant())
                .map(|e| e.constant)
                .fold(f64::NEG_INFINITY, f64::max);
            let m = lp.add_var(format!("max{k}"), floor, f64::INFINITY, *d);
            for e in exprs.iter().filter(|e| !e.is_constant()) {
                let mut row = e.coeffs(1.0);
                row.push((m, -1.0));
                lp.add_row(row, Sense::Le, -e.constant);
            }
        }

        Ok(LoweredModel {
            lp,
            n_model_vars: self.vars.len(),
        })
    }

    /// Lower and solve; non-optimal outcomes become errors.
    pub fn solve(&self, tol: &Tolerances) -> std::result::Result<ModelSolution, SolveError> {
        let lowered = self.lower().map_err(|e| SolveError::Malformed(e.to_string()))?;
        let sol = solve_lp(&lowered.lp, tol)?;
        if sol.status != LpStatus::Optimal {
            return Err(SolveError::NotOptimal(sol.status));
        }
        let mut values = sol.x;
        values.truncate(lowered.n_model_vars);
        Ok(ModelSolution {
            objective: sol.objective,
            values,
            iterations: sol.iterations,
        })
    }
}
