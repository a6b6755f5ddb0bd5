//! Random row thinning of a 2-summing frame.
//!
//! Rows of `sigma_prime` are kept independently with probability
//! `min(1, √(log N / n))`. A draw is accepted only after checking that every
//! column ℓ₁ sum over the kept rows is at most `3 √(log N)` and that at least
//! `√(n log N) / 16` rows survived; otherwise it is redrawn.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{l1_budget, log_dim, SignedBasisMatrix, TOL};
use crate::rng::{self, Stream};

/// Selector density `min(1, √(log N / n))`.
pub fn selector_density(n: usize, n_cols: usize) -> f64 {
    (log_dim(n_cols) / n as f64).sqrt().min(1.0)
}

/// Cardinality floor `√(n log N) / 16`.
pub fn cardinality_floor(n: usize, n_cols: usize) -> f64 {
    (n as f64 * log_dim(n_cols)).sqrt() / 16.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsifyOptions {
    pub seed: u64,
    pub budget: u32,
    /// Try the whole of `sigma_prime` before drawing selectors.
    pub full_set_first: bool,
}

impl Default for SparsifyOptions {
    fn default() -> Self {
        Self { seed: 0, budget: 64, full_set_first: true }
    }
}

/// Exact evaluation of both acceptance conditions for a row set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsifyCheck {
    pub worst_column: usize,
    pub worst_sum: f64,
    pub l1_bound: f64,
    pub size: usize,
    pub size_floor: f64,
}

impl SparsifyCheck {
    pub fn column_ok(&self) -> bool {
        self.worst_sum <= self.l1_bound + TOL
    }

    pub fn size_ok(&self) -> bool {
        self.size as f64 >= self.size_floor
    }

    pub fn passed(&self) -> bool {
        self.column_ok() && self.size_ok()
    }
}

/// Checks `rows` against the bounds derived from `n = |sigma_prime|`.
pub fn check_sparsified(basis: &SignedBasisMatrix, rows: &[usize]) -> SparsifyCheck {
    let n_cols = basis.n_cols();
    let mut sums = vec![0.0; n_cols];
    for &i in rows {
        sums.iter_mut().zip(basis.row(i)).for_each(|(s, v)| *s += v.abs());
    }
    let (worst_column, worst_sum) =
        sums.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    SparsifyCheck {
        worst_column,
        worst_sum,
        l1_bound: l1_budget(n_cols),
        size: rows.len(),
        size_floor: cardinality_floor(basis.sigma_prime().len(), n_cols),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sparsified {
    /// Kept rows, as sorted indices into the basis.
    pub rows: Vec<usize>,
    pub attempts: u32,
    pub density: f64,
    pub check: SparsifyCheck,
}

pub fn sparsify(basis: &SignedBasisMatrix, opts: SparsifyOptions) -> Result<Sparsified> {
    if opts.budget == 0 {
        return Err(Error::Precondition("sparsify budget must be at least 1".into()));
    }
    let report = basis.validate_frame2summ()?;
    if let Some(fail) = report.first_failure() {
        return Err(Error::ValidationFailed(format!(
            "2-summing frame fails {:?}: value {} vs bound {} at index {}",
            fail.hypothesis, fail.value, fail.bound, fail.witness
        )));
    }
    let pool = basis.sigma_prime();
    let density = selector_density(pool.len(), basis.n_cols());
    let mut rng = rng::stream(opts.seed, Stream::Sparsify);
    let mut worst = (0usize, f64::NEG_INFINITY);
    let mut short = 0u32;
    let mut attempts = 0u32;

    if opts.full_set_first {
        attempts += 1;
        let check = check_sparsified(basis, pool);
        if check.passed() {
            return Ok(Sparsified { rows: pool.to_vec(), attempts, density, check });
        }
        note_failure(&check, &mut worst, &mut short);
    }
    while attempts < opts.budget {
        attempts += 1;
        let rows: Vec<usize> = pool.iter().copied().filter(|_| rng.gen::<f64>() < density).collect();
        let check = check_sparsified(basis, &rows);
        if check.passed() {
            return Ok(Sparsified { rows, attempts, density, check });
        }
        note_failure(&check, &mut worst, &mut short);
    }
    Err(Error::SparsifyFailure { attempts, column: worst.0, sum: worst.1, short })
}

fn note_failure(check: &SparsifyCheck, worst: &mut (usize, f64), short: &mut u32) {
    if !check.size_ok() {
        *short += 1;
    }
    if check.worst_sum > worst.1 {
        *worst = (check.worst_column, check.worst_sum);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled_identity(n: usize, n_cols: usize, v: f64) -> SignedBasisMatrix {
        let mut entries = vec![0.0; n * n_cols];
        for i in 0..n {
            entries[i * n_cols + i] = if i % 2 == 0 { v } else { -v };
        }
        SignedBasisMatrix::new(n, n_cols, entries).unwrap().with_sigma_prime((0..n).collect(), 0.5).unwrap()
    }

    #[test]
    fn small_pool_keeps_everything_in_one_attempt() {
        // n = 3 <= log 100, density clamps to 1.
        let b = scaled_identity(3, 100, 0.9);
        assert_eq!(selector_density(3, 100), 1.0);
        for full in [true, false] {
            let out = sparsify(&b, SparsifyOptions { seed: 1, budget: 4, full_set_first: full }).unwrap();
            assert_eq!(out.rows, vec![0, 1, 2]);
            assert_eq!(out.attempts, 1);
        }
    }

    #[test]
    fn column_l2_violation_is_refused_upstream() {
        let r = vec![0.9, 0.0, 0.0, 0.0];
        let b = SignedBasisMatrix::from_rows(&[r.clone(), r]).unwrap().with_sigma_prime(vec![0, 1], 0.5).unwrap();
        assert!(matches!(sparsify(&b, SparsifyOptions::default()), Err(Error::ValidationFailed(_))));
    }

    #[test]
    fn dense_columns_force_thinning() {
        // 400 rows of 1/20 in every column: ℓ₂ = 1, ℓ₁ = 20 > 3 √(log 50).
        let (n, n_cols) = (400, 50);
        let b = SignedBasisMatrix::new(n, n_cols, vec![0.05; n * n_cols])
            .unwrap()
            .with_sigma_prime((0..n).collect(), 0.05)
            .unwrap();
        let out = sparsify(&b, SparsifyOptions { seed: 3, budget: 64, full_set_first: true }).unwrap();
        assert!(out.attempts >= 2);
        assert!(out.rows.len() < n);
        let check = check_sparsified(&b, &out.rows);
        assert!(check.passed());
        assert_eq!(check, out.check);
    }

    #[test]
    fn exhausted_budget_reports_worst_column() {
        // Column ℓ₂ = 1 but ℓ₁ = 10 > 3 √(log 3), so the full pool fails.
        let heavy = SignedBasisMatrix::new(100, 3, vec![0.1; 300]).unwrap().with_sigma_prime((0..100).collect(), 0.1).unwrap();
        match sparsify(&heavy, SparsifyOptions { seed: 0, budget: 1, full_set_first: true }) {
            Err(Error::SparsifyFailure { attempts: 1, sum, short: 0, .. }) => assert!((sum - 10.0).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        // A draw at density √(log 3 / 100) keeps about ten rows and fits.
        let ok = sparsify(&heavy, SparsifyOptions { seed: 0, budget: 64, full_set_first: true }).unwrap();
        assert!(ok.check.passed());
    }

    #[test]
    fn removing_rows_keeps_a_satisfying_set_satisfying_columns() {
        let (n, n_cols) = (400, 50);
        let b = SignedBasisMatrix::new(n, n_cols, vec![0.05; n * n_cols])
            .unwrap()
            .with_sigma_prime((0..n).collect(), 0.05)
            .unwrap();
        let out = sparsify(&b, SparsifyOptions { seed: 9, ..Default::default() }).unwrap();
        let mut rows = out.rows.clone();
        while rows.pop().is_some() {
            assert!(check_sparsified(&b, &rows).column_ok());
        }
    }
}
