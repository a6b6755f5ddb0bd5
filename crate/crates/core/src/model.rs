//! Instance and result data model shared by every stage.
//!
//! Matrices are dense and row-major: row `i` is the vector `a_i ∈ ℝ^N`,
//! column `j` collects the `j`-th coordinate of every row.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack applied to every `<=` / `>=` hypothesis check.
pub const TOL: f64 = 1e-9;

/// Natural log of the ambient dimension. Every parameter derived from
/// `log N` goes through here.
pub fn log_dim(n_cols: usize) -> f64 {
    (n_cols as f64).ln()
}

/// Column ℓ₁ budget `3 √(log N)`.
pub fn l1_budget(n_cols: usize) -> f64 {
    3.0 * log_dim(n_cols).sqrt()
}

fn check_shape(n_rows: usize, n_cols: usize, entries: &[f64]) -> Result<()> {
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::InvalidInput(format!("empty matrix {n_rows}x{n_cols}")));
    }
    if entries.len() != n_rows * n_cols {
        return Err(Error::InvalidInput(format!(
            "{} entries for a {n_rows}x{n_cols} matrix",
            entries.len()
        )));
    }
    if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite entry at row {} column {}",
            pos / n_cols,
            pos % n_cols
        )));
    }
    Ok(())
}

fn flatten(rows: &[Vec<f64>]) -> Result<(usize, usize, Vec<f64>)> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
        return Err(Error::InvalidInput(format!(
            "row {i} has {} entries, expected {n_cols}",
            rows[i].len()
        )));
    }
    Ok((n_rows, n_cols, rows.concat()))
}

/// Nonnegative `n × N` matrix `[a_i(j)]` with the row lower bound `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
    gamma: f64,
    validated: bool,
}

impl FrameMatrix {
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<f64>, gamma: f64) -> Result<Self> {
        check_shape(n_rows, n_cols, &entries)?;
        if let Some(pos) = entries.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative entry {} at row {} column {}",
                entries[pos],
                pos / n_cols,
                pos % n_cols
            )));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} outside (0, 1]")));
        }
        Ok(Self { n_rows, n_cols, entries, gamma, validated: false })
    }

    pub fn from_rows(rows: &[Vec<f64>], gamma: f64) -> Result<Self> {
        let (n, big_n, entries) = flatten(rows)?;
        Self::new(n, big_n, entries, gamma)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n_cols)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Runs [`validate_prop1`] and caches the outcome.
    pub fn validate(&mut self) -> Result<ValidationReport> {
        let report = validate_prop1(self)?;
        self.validated = report.passed;
        Ok(report)
    }

    /// Errors unless [`FrameMatrix::validate`] has passed.
    pub fn require_validated(&self) -> Result<()> {
        if self.validated {
            Ok(())
        } else {
            Err(Error::Unvalidated)
        }
    }

    /// Permutes columns; the cached validation flag is dropped.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for row in self.rows() {
            entries.extend(perm.iter().map(|&j| row[j]));
        }
        Self { entries, validated: false, ..self.clone() }
    }
}

/// Which hypothesis a [`HypothesisCheck`] covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Every column ℓ₂ norm is at most 1.
    ColumnL2,
    /// Every column ℓ₁ norm is at most `3 √(log N)`.
    ColumnL1,
    /// Every row has an entry of size at least the threshold.
    RowMax,
}

/// The extremal column or row for one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    /// Column index for column hypotheses, row index for row hypotheses.
    pub witness: usize,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    fn from_checks(checks: Vec<HypothesisCheck>) -> Self {
        Self { passed: checks.iter().all(|c| c.passed), checks }
    }

    pub fn check(&self, h: Hypothesis) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.hypothesis == h)
    }

    pub fn first_failure(&self) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Keeps the first strictly-larger (or strictly-smaller) candidate, so ties
/// resolve to the smallest index.
fn extremal(values: impl Iterator<Item = f64>, largest: bool) -> (usize, f64) {
    let mut best = (0, if largest { f64::NEG_INFINITY } else { f64::INFINITY });
    for (idx, v) in values.enumerate() {
        if (largest && v > best.1) || (!largest && v < best.1) {
            best = (idx, v);
        }
    }
    best
}

fn column_norms(n_cols: usize, rows: impl Iterator<Item = impl AsRef<[f64]>>) -> (Vec<f64>, Vec<f64>) {
    let mut sq = vec![0.0; n_cols];
    let mut abs = vec![0.0; n_cols];
    for row in rows {
        for ((s, a), &v) in sq.iter_mut().zip(abs.iter_mut()).zip(row.as_ref()) {
            *s += v * v;
            *a += v.abs();
        }
    }
    (sq.into_iter().map(f64::sqrt).collect(), abs)
}

fn row_sup(row: &[f64]) -> f64 {
    row.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Checks the three hypotheses on a nonnegative frame: column ℓ₂ ≤ 1,
/// column ℓ₁ ≤ 3√(log N), row max ≥ γ.
pub fn validate_prop1(frame: &FrameMatrix) -> Result<ValidationReport> {
    if frame.n_cols < 2 {
        return Err(Error::Degenerate(format!(
            "N = {} gives log N <= 0; need N >= 2",
            frame.n_cols
        )));
    }
    let (l2, l1) = column_norms(frame.n_cols, frame.rows());
    let (c2, v2) = extremal(l2.iter().copied(), true);
    let budget = l1_budget(frame.n_cols);
    let (c1, v1) = extremal(l1.iter().copied(), true);
    let (r, vr) = extremal(frame.rows().map(row_sup), false);
    Ok(ValidationReport::from_checks(vec![
        HypothesisCheck { hypothesis: Hypothesis::ColumnL2, passed: v2 <= 1.0 + TOL, witness: c2, value: v2, bound: 1.0 },
        HypothesisCheck { hypothesis: Hypothesis::ColumnL1, passed: v1 <= budget + TOL, witness: c1, value: v1, bound: budget },
        HypothesisCheck {
            hypothesis: Hypothesis::RowMax,
            passed: vr >= frame.gamma - TOL,
            witness: r,
            value: vr,
            bound: frame.gamma,
        },
    ]))
}

/// Signed vectors `a_i ∈ ℝ^N` spanning a subspace of ℓ∞^N, plus the row
/// subset `sigma_prime` on which the 2-summing conditions hold.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedBasisMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
    sigma_prime: Vec<usize>,
    threshold: f64,
}

impl SignedBasisMatrix {
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        check_shape(n_rows, n_cols, &entries)?;
        Ok(Self { n_rows, n_cols, entries, sigma_prime: Vec::new(), threshold: 0.5 })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let (n, big_n, entries) = flatten(rows)?;
        Self::new(n, big_n, entries)
    }

    /// Sets `sigma_prime` (deduplicated, sorted) and the row sup-norm threshold.
    pub fn with_sigma_prime(mut self, mut sigma_prime: Vec<usize>, threshold: f64) -> Result<Self> {
        sigma_prime.sort_unstable();
        sigma_prime.dedup();
        if let Some(&bad) = sigma_prime.iter().find(|&&i| i >= self.n_rows) {
            return Err(Error::InvalidInput(format!("sigma_prime index {bad} >= n = {}", self.n_rows)));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidInput(format!("threshold {threshold} must be positive")));
        }
        self.sigma_prime = sigma_prime;
        self.threshold = threshold;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n_cols)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn sigma_prime(&self) -> &[usize] {
        &self.sigma_prime
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Rows listed in `rows`, in that order; `sigma_prime` of the result is
    /// every row.
    pub fn restrict(&self, rows: &[usize]) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            if i >= self.n_rows {
                return Err(Error::InvalidInput(format!("row {i} >= n = {}", self.n_rows)));
            }
            entries.extend_from_slice(self.row(i));
        }
        let restricted = Self::new(rows.len(), self.n_cols, entries)?;
        restricted.with_sigma_prime((0..rows.len()).collect(), self.threshold)
    }

    /// `[|a_i(j)|]` over the given rows, as an (unvalidated) frame.
    pub fn abs_frame(&self, rows: &[usize], gamma: f64) -> Result<FrameMatrix> {
        let mut entries = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            entries.extend(self.row(i).iter().map(|v| v.abs()));
        }
        FrameMatrix::new(rows.len(), self.n_cols, entries, gamma)
    }

    /// Checks, over `sigma_prime` only: column ℓ₂ ≤ 1 and row sup ≥ threshold.
    pub fn validate_frame2summ(&self) -> Result<ValidationReport> {
        if self.sigma_prime.is_empty() {
            return Err(Error::InvalidInput("sigma_prime is empty".into()));
        }
        let (l2, _) = column_norms(self.n_cols, self.sigma_prime.iter().map(|&i| self.row(i)));
        let (c2, v2) = extremal(l2.iter().copied(), true);
        let (k, vr) = extremal(self.sigma_prime.iter().map(|&i| row_sup(self.row(i))), false);
        Ok(ValidationReport::from_checks(vec![
            HypothesisCheck { hypothesis: Hypothesis::ColumnL2, passed: v2 <= 1.0 + TOL, witness: c2, value: v2, bound: 1.0 },
            HypothesisCheck {
                hypothesis: Hypothesis::RowMax,
                passed: vr >= self.threshold - TOL,
                witness: self.sigma_prime[k],
                value: vr,
                bound: self.threshold,
            },
        ]))
    }
}

/// Free function form of [`SignedBasisMatrix::validate_frame2summ`].
pub fn validate_frame2summ(basis: &SignedBasisMatrix) -> Result<ValidationReport> {
    basis.validate_frame2summ()
}

/// Tunables of the extraction stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractParams {
    pub eta: f64,
    pub gamma: f64,
    /// Constant in the acceptance thresholds `3 C eta` and `3 C log N`.
    pub c: f64,
    /// Selector density `min(1, 2 eta / √(log N))`.
    pub delta: f64,
    /// Small/large split threshold `eta / log N`.
    pub epsilon: f64,
    /// Moment order `log N`.
    pub p: f64,
    pub seed: u64,
    /// Maximum resampling attempts.
    pub budget: u32,
    /// Accept the whole row set without sampling when it already meets the
    /// selection conditions.
    pub full_set_first: bool,
}

impl ExtractParams {
    pub const DEFAULT_C: f64 = 4.0;
    pub const DEFAULT_BUDGET: u32 = 64;

    pub fn new(eta: f64, gamma: f64, n_cols: usize) -> Result<Self> {
        if n_cols < 2 {
            return Err(Error::Degenerate(format!("N = {n_cols}; need N >= 2")));
        }
        if !(eta > 0.0 && eta < gamma && gamma <= 1.0) {
            return Err(Error::Precondition(format!(
                "need 0 < eta < gamma <= 1, got eta = {eta}, gamma = {gamma}"
            )));
        }
        let log_n = log_dim(n_cols);
        Ok(Self {
            eta,
            gamma,
            c: Self::DEFAULT_C,
            delta: (2.0 * eta / log_n.sqrt()).min(1.0),
            epsilon: eta / log_n,
            p: log_n,
            seed: 0,
            budget: Self::DEFAULT_BUDGET,
            full_set_first: true,
        })
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Precondition(format!("C = {c} must be positive")));
        }
        self.c = c;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, budget: u32) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Precondition("budget must be at least 1".into()));
        }
        self.budget = budget;
        Ok(self)
    }

    pub fn with_full_set_first(mut self, on: bool) -> Self {
        self.full_set_first = on;
        self
    }

    /// `1 + eta + 3 C eta / gamma`, the guaranteed ℓ∞ ratio of extracted blocks.
    pub fn ratio_bound(&self) -> f64 {
        1.0 + self.eta + 3.0 * self.c * self.eta / self.gamma
    }
}

/// One greedy block: column label `j_r`, rows `sigma_r`, weight `s_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub column: usize,
    pub rows: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSelection {
    /// Every greedy block, in extraction order.
    pub blocks: Vec<Block>,
    /// The (1+eta)-flat run of weights chosen for output.
    pub interval: Range<usize>,
    /// Rows of the selected set left after the last block.
    pub survivors: Vec<usize>,
}

impl BlockSelection {
    pub fn selected(&self) -> &[Block] {
        &self.blocks[self.interval.clone()]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.weight).collect()
    }
}

/// ℓ∞^m equivalence constants of an assembled basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub m: usize,
    /// Rescaling λ that makes the smallest block sup-norm equal to 1.
    pub scale: f64,
    /// Domination constant `max_j Σ_r |x_r(j)|`.
    pub upper: f64,
    /// Certified lower constant from the peak columns.
    pub lower_cert: f64,
    pub lower_exact: Option<f64>,
    /// `upper / lower_cert`.
    pub distance: f64,
    /// `(upper - 1) / eta`.
    pub k_measured: f64,
}

/// Kind tag of an instance file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Prop1,
    Basis,
}

/// On-disk instance: `{"kind", "n", "N", "gamma", "rows", "sigma_prime"?}`,
/// indices 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub kind: InstanceKind,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub gamma: f64,
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_prime: Option<Vec<usize>>,
}

impl Instance {
    pub fn from_frame(frame: &FrameMatrix) -> Self {
        Self {
            kind: InstanceKind::Prop1,
            n: frame.n_rows(),
            big_n: frame.n_cols(),
            gamma: frame.gamma(),
            rows: frame.to_rows(),
            sigma_prime: None,
        }
    }

    /// `gamma` carries the basis threshold; `sigma_prime` is written only
    /// when nonempty.
    pub fn from_basis(basis: &SignedBasisMatrix) -> Self {
        let sp = basis.sigma_prime();
        Self {
            kind: InstanceKind::Basis,
            n: basis.n_rows(),
            big_n: basis.n_cols(),
            gamma: basis.threshold(),
            rows: basis.to_rows(),
            sigma_prime: (!sp.is_empty()).then(|| sp.to_vec()),
        }
    }

    fn check_dims(&self) -> Result<()> {
        if self.rows.len() != self.n {
            return Err(Error::InvalidInput(format!("n = {} but {} rows given", self.n, self.rows.len())));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != self.big_n) {
            return Err(Error::InvalidInput(format!(
                "N = {} but row {i} has {} entries",
                self.big_n,
                self.rows[i].len()
            )));
        }
        Ok(())
    }

    pub fn to_frame(&self) -> Result<FrameMatrix> {
        if self.kind != InstanceKind::Prop1 {
            return Err(Error::InvalidInput("expected a prop1 instance".into()));
        }
        self.check_dims()?;
        FrameMatrix::from_rows(&self.rows, self.gamma)
    }

    pub fn to_basis(&self) -> Result<SignedBasisMatrix> {
        self.check_dims()?;
        let basis = SignedBasisMatrix::from_rows(&self.rows)?;
        match &self.sigma_prime {
            Some(sp) => basis.with_sigma_prime(sp.clone(), self.gamma),
            None if self.gamma > 0.0 => basis.with_sigma_prime(Vec::new(), self.gamma),
            None => Ok(basis),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("instance JSON: {e}")))
    }
}
