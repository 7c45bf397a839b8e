use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `minimize offset + c·x  s.t.  rows, lower <= x <= upper`.
///
/// Infinite bounds are encoded as `f64::NEG_INFINITY` / `f64::INFINITY`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<f64>,
    pub offset: f64,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(cost);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row { coeffs, sense, rhs });
    }

    pub fn check_dimensions(&self) -> Result<(), String> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n || self.names.len() != n {
            return Err("bound/name vectors do not match the objective length".into());
        }
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(&(j, _)) = row.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(format!("row {i} references variable {j} of {n}"));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, a)| !a.is_finite()) {
                return Err(format!("row {i} has non-finite data"));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.offset.is_finite() {
            return Err("objective has non-finite data".into());
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Plain-text dump, one variable or constraint per line, for cross-checks
    /// against external solvers.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vars {} rows {}", self.n_vars(), self.n_rows());
        let _ = writeln!(out, "offset {}", self.offset);
        for j in 0..self.n_vars() {
            let _ = writeln!(
                out,
                "var {j} {} lo {} hi {} cost {}",
                self.names[j], self.lower[j], self.upper[j], self.objective[j]
            );
        }
        for (i, row) in self.rows.iter().enumerate() {
            let sense = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
            };
            let _ = write!(out, "row {i}");
            for &(j, a) in &row.coeffs {
                let _ = write!(out, " {a}*x{j}");
            }
            let _ = writeln!(out, " {sense} {}", row.rhs);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective including the constant offset; meaningful only when optimal.
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
