//! Brute-force ground truth for the certificates produced by the pipeline.

pub mod moments;
pub mod simplex;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembler::upper_constant;
use crate::error::{Error, Result};
use crate::generators::OperatorSpaceEmbedding;
use crate::model::{l1_budget, FrameMatrix, TOL};
use crate::rng::{self, Stream};
use crate::sparsifier::selector_density;

pub use moments::{binomial_moment, calibration_grid, lemma1_ratio_grid, GridCell, RatioGrid};
use simplex::{maximize, LpOutcome, StandardLp};

pub const MAX_EXACT_M: usize = 8;
pub const MAX_EXACT_N: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactEquivalence {
    pub upper: f64,
    pub lower: f64,
    /// Face `α_r = sign` attaining `lower`.
    pub face: (usize, i8),
}

/// Value of `min t` s.t. `|Σ_r α_r x_r(j)| <= t` for all `j`, over
/// `α_{r0} = sign`, `α_s ∈ [-1, 1]`. Solved through its dual
/// `max hᵀy` s.t. `Gᵀy = e_t`, `y >= 0`.
fn face_value(vectors: &[Vec<f64>], r0: usize, sign: f64) -> Result<f64> {
    let m = vectors.len();
    let n_cols = vectors[r0].len();
    let others: Vec<usize> = (0..m).filter(|&s| s != r0).collect();
    let cols = 2 * n_cols + 2 * others.len();
    let mut a = vec![0.0; m * cols];
    let mut cost = vec![0.0; cols];
    // Row 0 carries the coefficient of t, row k >= 1 that of α_{others[k-1]}.
    for j in 0..n_cols {
        let (up, down) = (2 * j, 2 * j + 1);
        // t - Σ α_s x_s(j) >= sign x_{r0}(j) and t + Σ α_s x_s(j) >= -sign x_{r0}(j).
        a[up] = 1.0;
        a[down] = 1.0;
        for (k, &s) in others.iter().enumerate() {
            a[(k + 1) * cols + up] = -vectors[s][j];
            a[(k + 1) * cols + down] = vectors[s][j];
        }
        cost[up] = sign * vectors[r0][j];
        cost[down] = -sign * vectors[r0][j];
    }
    for k in 0..others.len() {
        // α_s >= -1 and -α_s >= -1.
        let (lo, hi) = (2 * n_cols + 2 * k, 2 * n_cols + 2 * k + 1);
        a[(k + 1) * cols + lo] = 1.0;
        a[(k + 1) * cols + hi] = -1.0;
        cost[lo] = -1.0;
        cost[hi] = -1.0;
    }
    let mut b = vec![0.0; m];
    b[0] = 1.0;
    match maximize(&StandardLp { rows: m, cols, a, b, cost }) {
        LpOutcome::Optimal { value, .. } => Ok(value),
        other => Err(Error::Invariant(format!("face LP ({r0}, {sign}) ended {other:?}"))),
    }
}

/// Exact constants `U`, `L` with `L max|α| <= ‖Σ α_r x_r‖∞ <= U max|α|`.
pub fn exact_equivalence(vectors: &[Vec<f64>]) -> Result<ExactEquivalence> {
    let m = vectors.len();
    if m == 0 {
        return Err(Error::InvalidInput("no vectors".into()));
    }
    if m > MAX_EXACT_M {
        return Err(Error::SizeRefusal(m));
    }
    let n_cols = vectors[0].len();
    if n_cols > MAX_EXACT_N || vectors.iter().any(|x| x.len() != n_cols) {
        return Err(Error::InvalidInput(format!("vectors must share a length of at most {MAX_EXACT_N}")));
    }
    let faces: Vec<(usize, i8)> = (0..m).flat_map(|r| [(r, 1i8), (r, -1i8)]).collect();
    let values = faces
        .par_iter()
        .map(|&(r, s)| face_value(vectors, r, s as f64))
        .collect::<Result<Vec<f64>>>()?;
    let (k, lower) = values.iter().copied().enumerate().fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    Ok(ExactEquivalence { upper: upper_constant(vectors), lower, face: faces[k] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRate {
    pub trials: u64,
    pub violations: u64,
    /// `trials · N`.
    pub pairs: u64,
    pub rate: f64,
    pub density: f64,
    pub bound: f64,
}

/// Fraction of `(draw, column)` pairs whose selected column sum exceeds
/// `3 √(log N)`, at density `√(log N / n)`.
pub fn selector_tail_rate(frame: &FrameMatrix, trials: u64, seed: u64) -> Result<TailRate> {
    frame.require_validated()?;
    Ok(count_tail(frame, trials, seed))
}

fn count_tail(frame: &FrameMatrix, trials: u64, seed: u64) -> TailRate {
    let (n, n_cols) = (frame.n_rows(), frame.n_cols());
    let density = selector_density(n, n_cols);
    let bound = l1_budget(n_cols);
    let support: Vec<Vec<(usize, f64)>> =
        frame.rows().map(|r| r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect()).collect();
    let mut rng = rng::stream(seed, Stream::TailRate);
    let mut sums = vec![0.0; n_cols];
    let mut violations = 0u64;
    for _ in 0..trials {
        sums.fill(0.0);
        for row in &support {
            if rng.gen::<f64>() < density {
                for &(j, v) in row {
                    sums[j] += v;
                }
            }
        }
        violations += sums.iter().filter(|&&s| s > bound).count() as u64;
    }
    let pairs = trials * n_cols as u64;
    let rate = if pairs == 0 { 0.0 } else { violations as f64 / pairs as f64 };
    TailRate { trials, violations, pairs, rate, density, bound }
}

/// Largest eigenvalue of a symmetric 3×3 matrix (trigonometric form).
fn sym3_top_eigen(m: [[f64; 3]; 3]) -> f64 {
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    if p1 == 0.0 {
        return m[0][0].max(m[1][1]).max(m[2][2]);
    }
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = m;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= q;
        row.iter_mut().for_each(|v| *v /= p);
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    q + 2.0 * p * phi.cos()
}

/// Top singular value of a row-major `l × l` matrix, `l <= 3`.
pub fn operator_norm_exact(t: &[f64], l: usize) -> Result<f64> {
    if !(1..=3).contains(&l) || t.len() != l * l {
        return Err(Error::InvalidInput(format!("operator norm needs an l x l matrix with l in 1..=3, got {} entries for l = {l}", t.len())));
    }
    let mut g = [[0.0; 3]; 3];
    for (a, row) in g.iter_mut().enumerate().take(l) {
        for (b, v) in row.iter_mut().enumerate().take(l) {
            *v = (0..l).map(|k| t[k * l + a] * t[k * l + b]).sum();
        }
    }
    let top = match l {
        1 => g[0][0],
        2 => {
            let (a, b, c) = (g[0][0], g[0][1], g[1][1]);
            (a + c) / 2.0 + (((a - c) / 2.0).powi(2) + b * b).sqrt()
        }
        _ => sym3_top_eigen(g),
    };
    Ok(top.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionCheck {
    pub trials: usize,
    pub violations: usize,
    /// Smallest `‖T‖ / net sup` seen (at least 1 when sound).
    pub min_ratio: f64,
    /// Largest `‖T‖ / net sup` seen (at most 4 when sound).
    pub max_ratio: f64,
}

/// Checks `net sup <= ‖T‖ <= 4 net sup` on Gaussian operators.
pub fn operator_distortion(emb: &OperatorSpaceEmbedding, trials: usize, seed: u64) -> Result<DistortionCheck> {
    let l = emb.l;
    let mut rng = rng::stream(seed, Stream::Probe);
    let mut out = DistortionCheck { trials, violations: 0, min_ratio: f64::INFINITY, max_ratio: 0.0 };
    for _ in 0..trials {
        let t: Vec<f64> = (0..l * l).map(|_| rng.sample(StandardNormal)).collect();
        let norm = operator_norm_exact(&t, l)?;
        let sup = emb.net_sup(&t);
        if sup > norm + TOL || norm > 4.0 * sup + TOL {
            out.violations += 1;
        }
        let ratio = norm / sup;
        out.min_ratio = out.min_ratio.min(ratio);
        out.max_ratio = out.max_ratio.max(ratio);
    }
    Ok(out)
}
