//! Sparse LU factors of a simplex basis with a product-form eta file.
//!
//! `B0` is factored by right-looking Gaussian elimination with Markowitz
//! pivot selection under a column threshold. Later basis changes append eta
//! columns, so `B_k⁻¹ = E_k⁻¹ ⋯ E_1⁻¹ B0⁻¹` until the next refactorization.

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

struct Eta {
    r: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

pub(super) struct BasisFactor {
    m: usize,
    /// Row and column (basis position) eliminated at each step.
    prow: Vec<usize>,
    pcol: Vec<usize>,
    diag: Vec<f64>,
    /// Off-diagonal pivot-row entries `(position, value)` per step.
    u: Vec<Vec<(usize, f64)>>,
    /// Row multipliers `(row, l)` per step.
    l: Vec<Vec<(usize, f64)>>,
    etas: Vec<Eta>,
    work: Vec<f64>,
}

impl BasisFactor {
    /// Factor the `m × m` matrix whose column `p` has the sparse entries
    /// `column(p)` as `(row, value)` pairs.
    pub(super) fn new<F>(m: usize, column: F) -> Result<Self, String>
    where
        F: Fn(usize) -> Vec<(usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for p in 0..m {
            for (i, v) in column(p) {
                if v != 0.0 {
                    rows[i].push((p, v));
                    col_rows[p].push(i);
                }
            }
        }
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut f = Self {
            m,
            prow: Vec::with_capacity(m),
            pcol: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
            u: Vec::with_capacity(m),
            l: Vec::with_capacity(m),
            etas: Vec::new(),
            work: vec![0.0; m],
        };

        let mut col_count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let mut buckets = CountBuckets::new(&col_count);
        for _ in 0..m {
            let Some((pr, pc)) = select_pivot(&rows, &col_rows, &col_count, &row_done, &col_done, &mut buckets) else {
                return Err("singular basis".into());
            };
            let pivot_row = std::mem::take(&mut rows[pr]);
            let piv = entry(&pivot_row, pc).expect("pivot entry present");
            row_done[pr] = true;
            col_done[pc] = true;
            for &(c, _) in &pivot_row {
                col_count[c] = col_count[c].saturating_sub(1);
                buckets.moved(c, col_count[c]);
            }

            let mut lk = Vec::new();
            let others: Vec<usize> = col_rows[pc].iter().copied().filter(|&i| !row_done[i]).collect();
            for i in others {
                let Some(a) = entry(&rows[i], pc) else {
                    continue;
                };
                let mult = a / piv;
                rows[i].retain(|&(c, _)| c != pc);
                if mult == 0.0 {
                    continue;
                }
                lk.push((i, mult));
                for &(c, v) in &pivot_row {
                    if c == pc {
                        continue;
                    }
                    match rows[i].iter_mut().find(|e| e.0 == c) {
                        Some(e) => e.1 -= mult * v,
                        None => {
                            rows[i].push((c, -mult * v));
                            col_rows[c].push(i);
                            col_count[c] += 1;
                            buckets.moved(c, col_count[c]);
                        }
                    }
                }
            }
            f.prow.push(pr);
            f.pcol.push(pc);
            f.diag.push(piv);
            f.u.push(pivot_row.into_iter().filter(|&(c, _)| c != pc).collect());
            f.l.push(lk);
        }
        Ok(f)
    }

    pub(super) fn n_etas(&self) -> usize {
        self.etas.len()
    }

    /// Overwrite `v` (indexed by row) with `B⁻¹ v` (indexed by basis position).
    pub(super) fn ftran(&mut self, v: &mut [f64]) {
        for k in 0..self.m {
            let wr = v[self.prow[k]];
            if wr != 0.0 {
                for &(i, l) in &self.l[k] {
                    v[i] -= l * wr;
                }
            }
        }
        let x = &mut self.work;
        for k in (0..self.m).rev() {
            let mut s = v[self.prow[k]];
            for &(p, u) in &self.u[k] {
                s -= u * x[p];
            }
            x[self.pcol[k]] = s / self.diag[k];
        }
        v.copy_from_slice(x);
        for eta in &self.etas {
            let vr = v[eta.r];
            if vr != 0.0 {
                let t = vr / eta.pivot;
                v[eta.r] = t;
                for &(i, a) in &eta.entries {
                    v[i] -= a * t;
                }
            }
        }
    }

    /// Overwrite `c` (indexed by basis position) with `c B⁻¹` (indexed by row).
    pub(super) fn btran(&mut self, c: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.r];
            for &(i, a) in &eta.entries {
                s -= c[i] * a;
            }
            c[eta.r] = s / eta.pivot;
        }
        let z = &mut self.work;
        for k in 0..self.m {
            let zr = c[self.pcol[k]] / self.diag[k];
            z[self.prow[k]] = zr;
            if zr != 0.0 {
                for &(p, u) in &self.u[k] {
                    c[p] -= zr * u;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut s = 0.0;
            for &(i, l) in &self.l[k] {
                s += z[i] * l;
            }
            z[self.prow[k]] -= s;
        }
        c.copy_from_slice(z);
    }

    /// Record the replacement of basis position `r` by a column whose
    /// transformed form is `alpha`.
    pub(super) fn push_eta(&mut self, r: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != r && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            r,
            pivot: alpha[r],
            entries,
        });
    }
}

/// Active columns bucketed by count. Entries go stale when a column's count
/// changes or it is eliminated and are skipped lazily.
struct CountBuckets {
    buckets: Vec<Vec<usize>>,
}

impl CountBuckets {
    fn new(col_count: &[usize]) -> Self {
        let mut buckets = vec![Vec::new(); col_count.len() + 1];
        for (c, &k) in col_count.iter().enumerate() {
            buckets[k.min(col_count.len())].push(c);
        }
        Self { buckets }
    }

    fn moved(&mut self, c: usize, count: usize) {
        let k = count.min(self.buckets.len() - 1);
        self.buckets[k].push(c);
    }

    /// Up to `out.len()` live columns of least count.
    fn least(&mut self, col_count: &[usize], col_done: &[bool], out: &mut [usize]) -> usize {
        for (k, bucket) in self.buckets.iter_mut().enumerate() {
            bucket.retain(|&c| !col_done[c] && col_count[c].min(col_count.len()) == k);
            if !bucket.is_empty() {
                let len = bucket.len().min(out.len());
                out[..len].copy_from_slice(&bucket[bucket.len() - len..]);
                return len;
            }
        }
        0
    }
}

/// Markowitz choice among a few columns of least count, subject to the
/// column threshold. Falls back to every active column when those yield no
/// acceptable pivot.
fn select_pivot(
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    col_count: &[usize],
    row_done: &[bool],
    col_done: &[bool],
    buckets: &mut CountBuckets,
) -> Option<(usize, usize)> {
    let mut shortlist = [usize::MAX; 4];
    let len = buckets.least(col_count, col_done, &mut shortlist);
    let pick = |cols: &mut dyn Iterator<Item = usize>| {
        // (row, col, |a|, cost)
        let mut best: Option<(usize, usize, f64, usize)> = None;
        for c in cols {
            let live = || {
                col_rows[c]
                    .iter()
                    .filter(|&&i| !row_done[i])
                    .filter_map(|&i| entry(&rows[i], c).map(|v| (i, v)))
                    .filter(|&(_, v)| v.abs() > SINGULAR_TOL)
            };
            let (cmax, ccount) = live().fold((0.0f64, 0usize), |(a, k), (_, v)| (a.max(v.abs()), k + 1));
            for (i, v) in live() {
                if v.abs() < PIVOT_THRESHOLD * cmax {
                    continue;
                }
                let cost = (rows[i].len() - 1) * (ccount - 1);
                let better = match best {
                    None => true,
                    Some((_, _, a, bc)) => cost < bc || (cost == bc && v.abs() > a),
                };
                if better {
                    best = Some((i, c, v.abs(), cost));
                }
            }
        }
        best.map(|b| (b.0, b.1))
    };
    pick(&mut shortlist[..len].iter().copied()).or_else(|| pick(&mut (0..col_count.len()).filter(|&c| !col_done[c])))
}

fn entry(row: &[(usize, f64)], c: usize) -> Option<f64> {
    row.iter().find(|e| e.0 == c).map(|e| e.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(m: usize, a: &[f64]) -> BasisFactor {
        BasisFactor::new(m, |p| (0..m).map(|i| (i, a[i * m + p])).collect()).unwrap()
    }

    fn matvec(m: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..m).map(|i| (0..m).map(|k| a[i * m + k] * x[k]).sum()).collect()
    }

    #[test]
    fn solves_both_ways() {
        let a = [
            2.0, 0.0, 1.0, 0.0, //
            1.0, 3.0, 0.0, 0.0, //
            0.0, 1.0, 4.0, 1.0, //
            0.0, 0.0, 1.0, 5.0,
        ];
        let mut f = dense(4, &a);
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b = matvec(4, &a, &x);
        f.ftran(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
        // y A = c
        let y = [0.3, -1.0, 2.0, 0.7];
        let mut c: Vec<f64> = (0..4).map(|k| (0..4).map(|i| y[i] * a[i * 4 + k]).sum()).collect();
        f.btran(&mut c);
        for (u, v) in c.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactor() {
        let mut a = vec![
            1.0, 2.0, 0.0, //
            0.0, 1.0, 1.0, //
            3.0, 0.0, 1.0,
        ];
        let mut f = dense(3, &a);
        let col = [1.0, 4.0, -2.0];
        let mut alpha = col.to_vec();
        f.ftran(&mut alpha);
        f.push_eta(1, &alpha);
        for i in 0..3 {
            a[i * 3 + 1] = col[i];
        }
        let mut g = dense(3, &a);
        for trial in [[1.0, 0.0, 0.0], [0.5, -1.0, 2.0]] {
            let (mut u, mut v) = (trial.to_vec(), trial.to_vec());
            f.ftran(&mut u);
            g.ftran(&mut v);
            let (mut p, mut q) = (trial.to_vec(), trial.to_vec());
            f.btran(&mut p);
            g.btran(&mut q);
            for k in 0..3 {
                assert!((u[k] - v[k]).abs() < 1e-12);
                assert!((p[k] - q[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_is_rejected() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(BasisFactor::new(2, |p| (0..2).map(|i| (i, a[i * 2 + p])).collect()).is_err());
    }
}
