//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use empc::optimizer::{Cmp, LinExpr, LinearProgram, PwlModel, Sense, VarId};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small random LP with every variable boxed, so the feasible set is a
/// polytope and an optimum exists whenever it is nonempty. Rows mostly pass
/// through a hidden interior point; a few seeds get an inconsistent row.
pub fn random_lp(seed: u64, max_vars: usize, max_rows: usize) -> LinearProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(1..=max_rows);
    let mut lp = LinearProgram::default();
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo = f64::from(rng.random_range(-4..=1));
        let hi = lo + f64::from(rng.random_range(1..=6));
        x0.push(rng.random_range(lo..=hi));
        let c = f64::from(rng.random_range(-5..=5));
        lp.add_var(format!("x{j}"), lo, hi, c);
    }
    let inconsistent = rng.random_bool(0.1);
    for i in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                let a = f64::from(rng.random_range(-4..=4));
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        if coeffs.is_empty() {
            coeffs.push((rng.random_range(0..n), 1.0));
        }
        let lhs: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let eq = rng.random_bool(0.2) && i < n;
        let (sense, rhs) = if eq {
            (Sense::Eq, lhs)
        } else if inconsistent && i == 0 {
            // push the row past everything the box allows
            let reach: f64 = coeffs
                .iter()
                .map(|&(j, a)| (a * lp.lower[j]).min(a * lp.upper[j]))
                .sum();
            (Sense::Le, reach - 1.0)
        } else if rng.random_bool(0.15) {
            // tight through x0, degenerate at that point
            (Sense::Le, lhs)
        } else {
            (Sense::Le, lhs + f64::from(rng.random_range(0..=6)))
        };
        lp.add_row(coeffs, sense, rhs);
    }
    lp
}

/// Optimal objective of a boxed LP by enumerating every basic solution, or
/// `None` when the feasible set is empty.
pub fn vertex_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    let m = lp.n_rows();
    let dense: Vec<Vec<f64>> = lp
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![0.0; n];
            for &(j, a) in &r.coeffs {
                v[j] += a;
            }
            v
        })
        .collect();

    let mut best: Option<f64> = None;
    // every variable at its lower bound (0), upper bound (1) or free (2)
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&j| state[j] == 2).collect();
        let k = free.len();
        // equalities are enforced by the feasibility check, so redundant
        // ones need not be among the active rows
        if k <= m {
            for active in combinations(m, k) {
                if let Some(x) = basic_solution(lp, &dense, &state, &free, &active) {
                    if lp.max_violation(&x) <= 1e-9 {
                        let f = lp.evaluate(&x);
                        best = Some(best.map_or(f, |b: f64| b.min(f)));
                    }
                }
            }
        }
        // next state in base 3
        let mut j = 0;
        loop {
            if j == n {
                return best;
            }
            state[j] += 1;
            if state[j] == 3 {
                state[j] = 0;
                j += 1;
            } else {
                break;
            }
        }
    }
}

fn basic_solution(
    lp: &LinearProgram,
    dense: &[Vec<f64>],
    state: &[u8],
    free: &[usize],
    active: &[usize],
) -> Option<Vec<f64>> {
    let n = lp.n_vars();
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = match state[j] {
            0 => lp.lower[j],
            1 => lp.upper[j],
            _ => 0.0,
        };
    }
    let k = free.len();
    if k == 0 {
        return Some(x);
    }
    let a = DMatrix::from_fn(k, k, |r, c| dense[active[r]][free[c]]);
    let b = DVector::from_fn(k, |r, _| {
        let i = active[r];
        let fixed: f64 = (0..n).filter(|&j| state[j] != 2).map(|j| dense[i][j] * x[j]).sum();
        lp.rows[i].rhs - fixed
    });
    let lu = a.full_piv_lu();
    if lu.determinant().abs() < 1e-9 {
        return None;
    }
    let sol = lu.solve(&b)?;
    for (c, &j) in free.iter().enumerate() {
        x[j] = sol[c];
    }
    Some(x)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// A random convex piecewise-linear model over boxed variables with abs and
/// max terms, some constant max members, and a few linear constraints that a
/// hidden point satisfies.
pub fn random_pwl(seed: u64) -> PwlModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let mut model = PwlModel::new();
    let mut x0 = Vec::new();
    let vars: Vec<VarId> = (0..n)
        .map(|j| {
            let lo = rng.random_range(-10.0..0.0);
            let hi = rng.random_range(0.0..10.0);
            x0.push(rng.random_range(lo..hi));
            let v = model.add_var(format!("v{j}"), lo, hi);
            model.add_cost(v, rng.random_range(-2.0..2.0));
            v
        })
        .collect();
    let expr = |rng: &mut ChaCha8Rng| {
        let mut e = LinExpr::constant(rng.random_range(-5.0..5.0));
        for &v in &vars {
            if rng.random_bool(0.5) {
                e = e.term(v, rng.random_range(-3.0..3.0));
            }
        }
        e
    };
    for _ in 0..rng.random_range(0..=3) {
        let c = rng.random_range(0.0..4.0);
        let e = expr(&mut rng);
        model.add_abs_term(c, e);
    }
    for _ in 0..rng.random_range(0..=3) {
        let d = rng.random_range(0.0..4.0);
        let members: Vec<LinExpr> = (0..rng.random_range(1..=4))
            .map(|_| {
                if rng.random_bool(0.2) {
                    LinExpr::constant(rng.random_range(-5.0..5.0))
                } else {
                    expr(&mut rng)
                }
            })
            .collect();
        model.add_max_term(d, members);
    }
    for _ in 0..rng.random_range(0..=2) {
        let e = expr(&mut rng);
        let at = e.eval(&x0);
        let (cmp, rhs) = match rng.random_range(0..3) {
            0 => (Cmp::Le, at + rng.random_range(0.0..2.0)),
            1 => (Cmp::Ge, at - rng.random_range(0.0..2.0)),
            _ => (Cmp::Eq, at),
        };
        model.add_constraint(e, cmp, rhs);
    }
    model
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
