//! Signed block sums and their ℓ∞^m equivalence certificate.
//!
//! For blocks `σ_r` of a signed basis, `x_r = λ Σ_{i∈σ_r} sign(a_i(ĵ_r)) a_i`
//! where `ĵ_r` is the peak coordinate of `Σ_{i∈σ_r} |a_i|` and `λ` makes the
//! smallest of those peaks equal to 1. For any coefficients `α`,
//!
//! ```text
//! L · max|α_r| <= ‖Σ α_r x_r‖∞ <= U · max|α_r|
//! ```
//!
//! with `U = max_j Σ_r |x_r(j)|` (triangle inequality per column) and
//! `L = min_r (x_r(ĵ_r) - Σ_{s≠r} |x_s(ĵ_r)|)` (evaluate at the peak column
//! of the largest coefficient).

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Block, EquivalenceReport, SignedBasisMatrix};
use crate::rng::StageRng;

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledBasis {
    pub vectors: Vec<Vec<f64>>,
    /// Peak column `ĵ_r` of each block.
    pub peaks: Vec<usize>,
    /// `λ = 1 / min_r ‖Σ_{i∈σ_r} |a_i|‖∞`.
    pub scale: f64,
}

/// `sign(0) = +1`.
fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Rows in `blocks` index `basis` directly.
pub fn assemble_basis(basis: &SignedBasisMatrix, blocks: &[Block]) -> Result<AssembledBasis> {
    if blocks.is_empty() {
        return Err(Error::InvalidInput("no blocks to assemble".into()));
    }
    let n_cols = basis.n_cols();
    let mut peaks = Vec::with_capacity(blocks.len());
    let mut peak_values = Vec::with_capacity(blocks.len());
    for block in blocks {
        if block.rows.is_empty() {
            return Err(Error::InvalidInput(format!("block at column {} has no rows", block.column)));
        }
        let mut mass = vec![0.0; n_cols];
        for &i in &block.rows {
            if i >= basis.n_rows() {
                return Err(Error::InvalidInput(format!("block row {i} >= n = {}", basis.n_rows())));
            }
            mass.iter_mut().zip(basis.row(i)).for_each(|(s, v)| *s += v.abs());
        }
        let (peak, value) = mass.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        if let Some(first) = peaks.iter().position(|&p| p == peak) {
            return Err(Error::AssemblyFailure { first, second: peaks.len(), column: peak });
        }
        peaks.push(peak);
        peak_values.push(value);
    }
    let min_peak = peak_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_peak > 0.0) {
        return Err(Error::InvalidInput("a block has zero mass".into()));
    }
    let scale = 1.0 / min_peak;
    let vectors = blocks
        .iter()
        .zip(&peaks)
        .map(|(block, &peak)| {
            let mut x = vec![0.0; n_cols];
            for &i in &block.rows {
                let s = scale * sign(basis.get(i, peak));
                x.iter_mut().zip(basis.row(i)).for_each(|(acc, v)| *acc += s * v);
            }
            x
        })
        .collect();
    Ok(AssembledBasis { vectors, peaks, scale })
}

/// `max_j Σ_r |x_r(j)|`.
pub fn upper_constant(vectors: &[Vec<f64>]) -> f64 {
    let n_cols = vectors.first().map_or(0, Vec::len);
    (0..n_cols).map(|j| vectors.iter().map(|x| x[j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `min_r (x_r(ĵ_r) - Σ_{s≠r} |x_s(ĵ_r)|)` and the block attaining it.
pub fn certified_lower(vectors: &[Vec<f64>], peaks: &[usize]) -> (f64, usize) {
    peaks
        .iter()
        .enumerate()
        .map(|(r, &j)| {
            let off: f64 = vectors.iter().enumerate().filter(|&(s, _)| s != r).map(|(_, x)| x[j].abs()).sum();
            (vectors[r][j] - off, r)
        })
        .fold((f64::INFINITY, 0), |b, c| if c.0 < b.0 { c } else { b })
}

/// Certificate for `vectors` with peak labels. Fails when the certified
/// lower constant is not positive.
pub fn equivalence_report(vectors: &[Vec<f64>], peaks: &[usize], scale: f64, eta: f64) -> Result<EquivalenceReport> {
    if vectors.is_empty() || vectors.len() != peaks.len() {
        return Err(Error::InvalidInput(format!("{} vectors with {} peak labels", vectors.len(), peaks.len())));
    }
    if let Some(r) = vectors.iter().position(|x| x.iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1.0 - 1e-9) {
        return Err(Error::InvalidInput(format!("vector {r} has sup norm below 1")));
    }
    let upper = upper_constant(vectors);
    let (lower, block) = certified_lower(vectors, peaks);
    if !(lower > 0.0) {
        return Err(Error::NoCertificate { lower, block });
    }
    Ok(EquivalenceReport {
        m: vectors.len(),
        scale,
        upper,
        lower_cert: lower,
        lower_exact: None,
        distance: upper / lower,
        k_measured: (upper - 1.0) / eta,
    })
}

/// `‖Σ α_r x_r‖∞`.
pub fn combination_norm(vectors: &[Vec<f64>], alpha: &[f64]) -> f64 {
    let n_cols = vectors.first().map_or(0, Vec::len);
    (0..n_cols).map(|j| vectors.iter().zip(alpha).map(|(x, a)| a * x[j]).sum::<f64>().abs()).fold(0.0, f64::max)
}

/// Smallest and largest `‖Σ α_r x_r‖∞` over random `α` with `max|α_r| = 1`.
pub fn probe_equivalence(vectors: &[Vec<f64>], probes: usize, rng: &mut StageRng) -> (f64, f64) {
    let m = vectors.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..probes {
        let mut alpha: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let pin = rng.gen_range(0..m);
        alpha[pin] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let v = combination_norm(vectors, &alpha);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};
    use proptest::prelude::*;

    fn block(column: usize, rows: Vec<usize>) -> Block {
        Block { column, rows, weight: 0.0 }
    }

    #[test]
    fn one_row_block() {
        let b = SignedBasisMatrix::from_rows(&[vec![-0.9, 0.3]]).unwrap();
        let a = assemble_basis(&b, &[block(0, vec![0])]).unwrap();
        assert_eq!(a.peaks, vec![0]);
        assert!((a.scale - 1.0 / 0.9).abs() < 1e-15);
        assert!((a.vectors[0][0] - 1.0).abs() < 1e-15);
        assert!((a.vectors[0][1] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_blocks_give_disjoint_unit_vectors() {
        let b = SignedBasisMatrix::from_rows(&[
            vec![0.6, 0.0, 0.0, 0.0],
            vec![0.0, -0.5, 0.1, 0.0],
            vec![0.0, 0.0, 0.0, 0.7],
        ])
        .unwrap();
        let a = assemble_basis(&b, &[block(0, vec![0]), block(1, vec![1]), block(3, vec![2])]).unwrap();
        assert_eq!(a.peaks, vec![0, 1, 3]);
        for x in &a.vectors {
            let sup = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(sup >= 1.0 - 1e-12);
        }
        let r = equivalence_report(&a.vectors, &a.peaks, a.scale, 0.1).unwrap();
        assert_eq!(r.m, 3);
    }

    #[test]
    fn shared_peak_is_an_assembly_failure() {
        let b = SignedBasisMatrix::from_rows(&[vec![0.9, 0.1], vec![0.8, 0.0]]).unwrap();
        let err = assemble_basis(&b, &[block(0, vec![0]), block(1, vec![1])]).unwrap_err();
        assert_eq!(err, Error::AssemblyFailure { first: 0, second: 1, column: 0 });
    }

    #[test]
    fn unit_vectors_have_distance_one() {
        let xs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let r = equivalence_report(&xs, &[0, 1, 2], 1.0, 0.1).unwrap();
        assert_eq!((r.upper, r.lower_cert, r.distance), (1.0, 1.0, 1.0));
        assert_eq!(r.k_measured, 0.0);
    }

    #[test]
    fn two_vector_certificate_arithmetic() {
        let xs = vec![vec![1.0, 0.2], vec![0.1, 1.0]];
        let r = equivalence_report(&xs, &[0, 1], 1.0, 0.1).unwrap();
        assert!((r.upper - 1.2).abs() < 1e-15);
        assert!((r.lower_cert - 0.8).abs() < 1e-15);
        assert!((r.distance - 1.5).abs() < 1e-15);
        assert!((r.k_measured - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equal_peak_mass_has_no_certificate() {
        let xs = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(equivalence_report(&xs, &[0, 1], 1.0, 0.1).unwrap_err(), Error::NoCertificate { lower: 0.0, block: 0 });
    }

    #[test]
    fn probes_stay_inside_certificate() {
        let xs = vec![vec![1.0, 0.2, -0.1], vec![0.1, 1.0, 0.05], vec![-0.05, 0.1, 1.0]];
        let r = equivalence_report(&xs, &[0, 1, 2], 1.0, 0.1).unwrap();
        let mut rng = rng::stream(0, Stream::Probe);
        let (lo, hi) = probe_equivalence(&xs, 1000, &mut rng);
        assert!(lo >= r.lower_cert - 1e-9);
        assert!(hi <= r.upper + 1e-9);
    }

    proptest! {
        #[test]
        fn distance_is_scale_invariant(
            m in 1usize..5,
            noise in prop::collection::vec(-0.1f64..0.1, 40),
            scale in 0.01f64..100.0,
        ) {
            let n_cols = m + 2;
            let xs: Vec<Vec<f64>> = (0..m)
                .map(|r| (0..n_cols).map(|j| if j == r { 1.0 } else { noise[(r * n_cols + j) % noise.len()] / m as f64 }).collect())
                .collect();
            let peaks: Vec<usize> = (0..m).collect();
            let base = equivalence_report(&xs, &peaks, 1.0, 0.1).unwrap();
            let scaled: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| v * scale).collect()).collect();
            let (u, l) = (upper_constant(&scaled), certified_lower(&scaled, &peaks).0);
            let s = scale;
            prop_assert!((u - s * base.upper).abs() <= 1e-12 * s);
            prop_assert!((l - s * base.lower_cert).abs() <= 1e-12 * s);
            prop_assert!((u / l - base.distance).abs() <= 1e-12);
        }
    }
}
