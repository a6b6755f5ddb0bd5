//! Dense two-phase tableau simplex for `max cᵀx` s.t. `Ax = b`, `x >= 0`.
//!
//! Sized for problems with a handful of equality rows and many columns.
//! Entering columns follow Dantzig's rule and switch to Bland's rule after
//! a run of degenerate pivots.

const EPS: f64 = 1e-11;
const DEGENERATE_RUN: usize = 50;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
    /// Pivot cap reached.
    Stalled,
}

struct Tableau {
    width: usize,
    rows: usize,
    /// `rows` constraint rows followed by one objective row; the last entry
    /// of each row is the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f != 0.0 {
                for (dst, &src) in self.data[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                    *dst -= f * src;
                }
            }
        }
        self.basis[pr] = pc;
    }

    /// Loads `costs` into the objective row as reduced costs for the
    /// current basis.
    fn set_objective(&mut self, costs: &[f64]) {
        let w = self.width;
        let obj = self.rows * w;
        self.data[obj..obj + w].fill(0.0);
        self.data[obj..obj + costs.len()].copy_from_slice(costs);
        for r in 0..self.rows {
            let cb = costs.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for c in 0..w {
                    self.data[obj + c] -= cb * self.data[r * w + c];
                }
            }
        }
    }

    /// Runs simplex over columns `< allowed`. `Ok(true)` at optimum,
    /// `Ok(false)` when unbounded.
    fn optimize(&mut self, allowed: usize) -> Result<bool, ()> {
        let mut degenerate = 0;
        for _ in 0..MAX_PIVOTS {
            let obj = self.rows;
            let entering = if degenerate < DEGENERATE_RUN {
                (0..allowed).filter(|&c| self.at(obj, c) > EPS).max_by(|&x, &y| self.at(obj, x).total_cmp(&self.at(obj, y)).then(y.cmp(&x)))
            } else {
                (0..allowed).find(|&c| self.at(obj, c) > EPS)
            };
            let Some(pc) = entering else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let v = self.at(r, pc);
                if v > EPS {
                    let ratio = self.rhs(r) / v;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => ratio < best - EPS || (ratio <= best + EPS && self.basis[r] < self.basis[lr]),
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, ratio)) = leave else { return Ok(false) };
            degenerate = if ratio.abs() <= EPS { degenerate + 1 } else { 0 };
            self.pivot(pr, pc);
        }
        Err(())
    }
}

pub fn maximize(lp: &StandardLp) -> LpOutcome {
    let (m, n) = (lp.rows, lp.cols);
    assert_eq!(lp.a.len(), m * n);
    assert_eq!(lp.b.len(), m);
    assert_eq!(lp.cost.len(), n);
    // Columns: n originals, m artificials, rhs.
    let width = n + m + 1;
    let mut data = vec![0.0; (m + 1) * width];
    for r in 0..m {
        let sign = if lp.b[r] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..n {
            data[r * width + c] = sign * lp.a[r * n + c];
        }
        data[r * width + n + r] = 1.0;
        data[r * width + width - 1] = sign * lp.b[r];
    }
    let mut t = Tableau { width, rows: m, data, basis: (n..n + m).collect() };

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].fill(-1.0);
    t.set_objective(&phase1);
    if t.optimize(n + m).is_err() {
        return LpOutcome::Stalled;
    }
    let infeasibility = t.rhs(m);
    if infeasibility > 1e-9 {
        return LpOutcome::Infeasible;
    }
    // Drive artificials out of the basis; rows where that is impossible are
    // redundant and dropped.
    let mut r = 0;
    while r < t.rows {
        if t.basis[r] >= n {
            if let Some(c) = (0..n).find(|&c| t.at(r, c).abs() > 1e-9) {
                t.pivot(r, c);
            } else {
                let w = t.width;
                t.data.drain(r * w..(r + 1) * w);
                t.basis.remove(r);
                t.rows -= 1;
                continue;
            }
        }
        r += 1;
    }

    t.set_objective(&lp.cost);
    match t.optimize(n) {
        Err(()) => LpOutcome::Stalled,
        Ok(false) => LpOutcome::Unbounded,
        Ok(true) => {
            let mut x = vec![0.0; n];
            for (row, &col) in t.basis.iter().enumerate() {
                if col < n {
                    x[col] = t.rhs(row);
                }
            }
            let value = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
            LpOutcome::Optimal { value, x }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 (slacks s1..s3).
        let lp = StandardLp {
            rows: 3,
            cols: 5,
            a: vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 1.0, 0.0, 3.0, 2.0, 0.0, 0.0, 1.0],
            b: vec![4.0, 12.0, 18.0],
            cost: vec![3.0, 5.0, 0.0, 0.0, 0.0],
        };
        match maximize(&lp) {
            LpOutcome::Optimal { value, x } => {
                assert!((value - 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x + y = -1 with x, y >= 0.
        let lp = StandardLp { rows: 1, cols: 2, a: vec![1.0, 1.0], b: vec![-1.0], cost: vec![1.0, 0.0] };
        assert_eq!(maximize(&lp), LpOutcome::Infeasible);
        // x - y = 0, maximize x.
        let lp = StandardLp { rows: 1, cols: 2, a: vec![1.0, -1.0], b: vec![0.0], cost: vec![1.0, 0.0] };
        assert_eq!(maximize(&lp), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let lp = StandardLp {
            rows: 2,
            cols: 2,
            a: vec![1.0, 1.0, 2.0, 2.0],
            b: vec![1.0, 2.0],
            cost: vec![1.0, 2.0],
        };
        match maximize(&lp) {
            LpOutcome::Optimal { value, .. } => assert!((value - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
