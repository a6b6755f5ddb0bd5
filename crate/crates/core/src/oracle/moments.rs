//! Exact moments of a Binomial(n, δ) count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_N: usize = 500;
pub const MAX_Q: u32 = 50;

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for k in 2..=n {
        let v = (k as f64).ln();
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        out[k] = sum + comp;
    }
    out
}

/// `(E S^q)^{1/q}` for `S ~ Binomial(n, delta)`.
pub fn binomial_moment(n: usize, delta: f64, q: u32) -> Result<f64> {
    if n > MAX_N || q > MAX_Q || q == 0 {
        return Err(Error::InvalidInput(format!("binomial moment needs n <= {MAX_N} and 1 <= q <= {MAX_Q}, got n = {n}, q = {q}")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidInput(format!("delta must lie in [0, 1], got {delta}")));
    }
    if n == 0 || delta == 0.0 {
        return Ok(0.0);
    }
    if delta == 1.0 {
        return Ok(n as f64);
    }
    let lf = ln_factorials(n);
    let (ld, lc) = (delta.ln(), (-delta).ln_1p());
    let logs: Vec<f64> = (1..=n)
        .map(|k| lf[n] - lf[k] - lf[n - k] + k as f64 * ld + (n - k) as f64 * lc + q as f64 * (k as f64).ln())
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = compensated_sum(logs.iter().map(|&l| (l - top).exp()));
    Ok(((top + tail.ln()) / q as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub delta: f64,
    pub q: u32,
    pub moment: f64,
    /// `moment / (δn + q)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioGrid {
    pub cells: Vec<GridCell>,
    /// First cell attaining the largest ratio, in `n`, `δ`, `q` order.
    pub max: GridCell,
}

pub fn lemma1_ratio_grid(n_list: &[usize], delta_list: &[f64], q_list: &[u32]) -> Result<RatioGrid> {
    if n_list.is_empty() || delta_list.is_empty() || q_list.is_empty() {
        return Err(Error::InvalidInput("ratio grid needs nonempty n, delta and q lists".into()));
    }
    let mut cells = Vec::with_capacity(n_list.len() * delta_list.len() * q_list.len());
    for &n in n_list {
        for &delta in delta_list {
            for &q in q_list {
                let moment = binomial_moment(n, delta, q)?;
                cells.push(GridCell { n, delta, q, moment, ratio: moment / (delta * n as f64 + q as f64) });
            }
        }
    }
    let max = *cells.iter().reduce(|b, c| if c.ratio > b.ratio { c } else { b }).expect("grid is nonempty");
    Ok(RatioGrid { cells, max })
}

/// The calibration grid: `n ∈ {10,50,100,200}`, `δ ∈ {0.01,0.05,0.1,0.5,1}`,
/// `q ∈ 1..=30`.
pub fn calibration_grid() -> Result<RatioGrid> {
    let qs: Vec<u32> = (1..=30).collect();
    lemma1_ratio_grid(&[10, 50, 100, 200], &[0.01, 0.05, 0.1, 0.5, 1.0], &qs)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct summation with exact binomial weights, for small `n`.
    fn naive(n: usize, delta: f64, q: u32) -> f64 {
        let mut choose = 1.0_f64;
        let mut total = 0.0;
        for k in 0..=n {
            if k > 0 {
                choose = choose * (n - k + 1) as f64 / k as f64;
            }
            total += choose * delta.powi(k as i32) * (1.0 - delta).powi((n - k) as i32) * (k as f64).powi(q as i32);
        }
        total.powf(1.0 / q as f64)
    }

    #[test]
    fn documented_values() {
        for q in [1, 7, 50] {
            assert_eq!(binomial_moment(1, 1.0, q).unwrap(), 1.0);
        }
        assert!((binomial_moment(2, 0.5, 2).unwrap() - 1.5f64.sqrt()).abs() < 1e-14);
        assert_eq!(binomial_moment(30, 0.0, 3).unwrap(), 0.0);
        let g = lemma1_ratio_grid(&[1], &[1.0], &[1]).unwrap();
        assert_eq!(g.max.ratio, 0.5);
    }

    #[test]
    fn second_moment_closed_form() {
        // E S² = nδ(1-δ) + (nδ)².
        let g = lemma1_ratio_grid(&[100], &[0.1], &[2]).unwrap();
        let exact = (100.0 * 0.1 * 0.9 + 100.0_f64).sqrt();
        assert!((g.max.moment - exact).abs() < 1e-12);
        assert!((g.max.ratio - exact / 12.0).abs() < 1e-13);
    }

    #[test]
    fn agrees_with_direct_summation() {
        for n in [1, 5, 20, 40] {
            for delta in [0.03, 0.3, 0.77] {
                for q in [1, 2, 5, 9] {
                    let (a, b) = (binomial_moment(n, delta, q).unwrap(), naive(n, delta, q));
                    assert!((a - b).abs() <= 1e-12 * b.max(1.0), "n={n} δ={delta} q={q}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn refuses_out_of_range() {
        assert!(binomial_moment(501, 0.5, 2).is_err());
        assert!(binomial_moment(10, 0.5, 51).is_err());
        assert!(binomial_moment(10, 1.5, 2).is_err());
        assert!(binomial_moment(10, 0.5, 0).is_err());
    }

    #[test]
    fn extreme_corner_is_finite() {
        let v = binomial_moment(500, 0.999, 50).unwrap();
        assert!(v.is_finite() && v <= 500.0 && v > 499.0);
    }

    #[test]
    fn monotone_in_each_argument() {
        let deltas = [0.0, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 1.0];
        for &n in &[1usize, 10, 60] {
            for w in deltas.windows(2) {
                for q in [1, 4, 20] {
                    assert!(binomial_moment(n, w[0], q).unwrap() <= binomial_moment(n, w[1], q).unwrap() * (1.0 + 1e-14));
                    assert!(binomial_moment(n, w[1], q).unwrap() <= binomial_moment(n + 1, w[1], q).unwrap() * (1.0 + 1e-14));
                    assert!(binomial_moment(n, w[1], q).unwrap() <= binomial_moment(n, w[1], q + 1).unwrap() * (1.0 + 1e-14));
                }
            }
        }
    }

    #[test]
    fn calibration_constant_is_stable_under_refinement() {
        let coarse = calibration_grid().unwrap().max.ratio;
        let qs: Vec<u32> = (1..=30).collect();
        let fine = lemma1_ratio_grid(
            &[10, 25, 50, 75, 100, 150, 200],
            &[0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 0.75, 1.0],
            &qs,
        )
        .unwrap()
        .max
        .ratio;
        assert!(coarse.is_finite() && coarse <= 2.0);
        assert!((fine - coarse).abs() <= 0.05 * coarse);
    }
}
