//! Test-instance synthesis.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{l1_budget, FrameMatrix, SignedBasisMatrix};
use crate::rng::{self, StageRng, Stream};

/// Retries allowed when planting a `gamma` entry for one row.
pub const PLANT_BUDGET: u32 = 64;

/// Random nonnegative frame that passes `validate_prop1`.
///
/// Each column gets a sparse uniform draw (entry present with probability
/// `density`), scaled down to meet the ℓ₂ and ℓ₁ budgets. Rows whose largest
/// entry is below `gamma` then get a planted `gamma` in a random column; the
/// unplanted entries of that column are scaled down to restore the budgets.
/// Planted entries (including natural row maxima) are never rescaled.
pub fn gen_prop1_instance(n: usize, n_cols: usize, gamma: f64, density: f64, seed: u64) -> Result<FrameMatrix> {
    if n == 0 || n_cols < 3 {
        return Err(Error::InvalidInput(format!("need n >= 1 and N >= 3, got n = {n}, N = {n_cols}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) || !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "need gamma, density in (0, 1], got gamma = {gamma}, density = {density}"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Generate);
    let l1_cap = l1_budget(n_cols);
    // Column-major while building; columns are the unit of rescaling.
    let mut cols = vec![0.0f64; n * n_cols];
    for col in cols.chunks_exact_mut(n) {
        for v in col.iter_mut() {
            if rng.gen::<f64>() < density {
                *v = rng.gen::<f64>();
            }
        }
        let sq: f64 = col.iter().map(|v| v * v).sum();
        let l1: f64 = col.iter().sum();
        if sq > 0.0 {
            let t = (1.0 / sq.sqrt()).min(l1_cap / l1).min(1.0);
            col.iter_mut().for_each(|v| *v *= t);
        }
    }

    let mut planted: Vec<Vec<usize>> = vec![Vec::new(); n_cols];
    let mut needs_plant = Vec::new();
    for i in 0..n {
        let (j, v) = (0..n_cols).map(|j| (j, cols[j * n + i])).fold((0, f64::NEG_INFINITY), |b, c| {
            if c.1 > b.1 {
                c
            } else {
                b
            }
        });
        if v >= gamma {
            planted[j].push(i);
        } else {
            needs_plant.push(i);
        }
    }

    for i in needs_plant {
        let mut attempts = 0;
        loop {
            if attempts == PLANT_BUDGET {
                return Err(Error::GenerationFailure {
                    attempts,
                    reason: format!("no column can absorb a planted {gamma} for row {i}"),
                });
            }
            attempts += 1;
            let j = rng.gen_range(0..n_cols);
            let col = &mut cols[j * n..(j + 1) * n];
            let p_sq: f64 = planted[j].iter().map(|&k| col[k] * col[k]).sum::<f64>() + gamma * gamma;
            let p_l1: f64 = planted[j].iter().map(|&k| col[k]).sum::<f64>() + gamma;
            if p_sq > 1.0 + 1e-12 || p_l1 > l1_cap {
                continue;
            }
            col[i] = gamma;
            planted[j].push(i);
            let is_free = |k: usize, planted: &[usize]| !planted.contains(&k);
            let (mut f_sq, mut f_l1) = (0.0, 0.0);
            for (k, v) in col.iter().enumerate() {
                if is_free(k, &planted[j]) {
                    f_sq += v * v;
                    f_l1 += v;
                }
            }
            if f_sq > 0.0 {
                let room_sq = (1.0 - p_sq).max(0.0);
                let t = (room_sq / f_sq).sqrt().min((l1_cap - p_l1).max(0.0) / f_l1).min(1.0);
                for (k, v) in col.iter_mut().enumerate() {
                    if is_free(k, &planted[j]) {
                        *v *= t;
                    }
                }
            }
            break;
        }
    }

    let mut entries = vec![0.0; n * n_cols];
    for j in 0..n_cols {
        for i in 0..n {
            entries[i * n_cols + j] = cols[j * n + i];
        }
    }
    let mut frame = FrameMatrix::new(n, n_cols, entries, gamma)?;
    let report = frame.validate()?;
    match report.first_failure() {
        None => Ok(frame),
        Some(check) => Err(Error::GenerationFailure {
            attempts: 1,
            reason: format!("generated frame fails {:?} at index {}", check.hypothesis, check.witness),
        }),
    }
}

/// Frame with `value` at `(i, i)` and zeros elsewhere; `n_cols >= n`.
pub fn gen_diagonal(n: usize, n_cols: usize, value: f64) -> Result<FrameMatrix> {
    if n_cols < n {
        return Err(Error::InvalidInput(format!("diagonal needs N >= n, got n = {n}, N = {n_cols}")));
    }
    let mut entries = vec![0.0; n * n_cols];
    for i in 0..n {
        entries[i * n_cols + i] = value;
    }
    FrameMatrix::new(n, n_cols, entries, value.min(1.0))
}

fn gaussian_vec(rng: &mut StageRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt, two passes. Returns `false` if a row collapses.
pub(crate) fn orthonormalize(rows: &mut [Vec<f64>]) -> bool {
    for i in 0..rows.len() {
        for _ in 0..2 {
            for k in 0..i {
                let (head, tail) = rows.split_at_mut(i);
                let c = dot(&tail[0], &head[k]);
                tail[0].iter_mut().zip(&head[k]).for_each(|(v, u)| *v -= c * u);
            }
        }
        let norm = dot(&rows[i], &rows[i]).sqrt();
        if norm < 1e-12 {
            return false;
        }
        rows[i].iter_mut().for_each(|v| *v /= norm);
    }
    true
}

/// `n` orthonormalized standard Gaussian vectors in ℝ^N.
pub fn gen_random_subspace(n: usize, n_cols: usize, seed: u64) -> Result<SignedBasisMatrix> {
    if n == 0 || n > n_cols {
        return Err(Error::InvalidInput(format!("need 1 <= n <= N, got n = {n}, N = {n_cols}")));
    }
    let mut rng = rng::stream(seed, Stream::Generate);
    let mut rows: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(&mut rng, n_cols)).collect();
    if !orthonormalize(&mut rows) {
        return Err(Error::Invariant("gaussian rows were linearly dependent".into()));
    }
    SignedBasisMatrix::from_rows(&rows)
}

/// Separation of net points and covering radius checked by probing.
pub const NET_RADIUS: f64 = 0.5;
const NET_PATIENCE: usize = 4000;
const NET_PROBES: usize = 10_000;

/// Greedy maximal `1/2`-separated set on the Euclidean sphere `S^{l-1}`.
///
/// Candidates are uniform on the sphere; sampling stops after
/// `NET_PATIENCE` consecutive rejections. Afterwards `NET_PROBES` uniform
/// probes are checked for coverage and any uncovered probe joins the net.
pub fn sphere_net(l: usize, rng: &mut StageRng) -> Vec<Vec<f64>> {
    let sample = |rng: &mut StageRng| loop {
        let mut v = gaussian_vec(rng, l);
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    };
    let far = |net: &[Vec<f64>], p: &[f64]| net.iter().all(|q| dist(p, q) > NET_RADIUS);
    let mut net: Vec<Vec<f64>> = Vec::new();
    let mut misses = 0;
    while misses < NET_PATIENCE {
        let p = sample(rng);
        if far(&net, &p) {
            net.push(p);
            misses = 0;
        } else {
            misses += 1;
        }
    }
    for _ in 0..NET_PROBES {
        let p = sample(rng);
        if far(&net, &p) {
            net.push(p);
        }
    }
    net
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nets of `X = ℓ₂^l` and `Y* = ℓ₂^l` and the induced map
/// `T ↦ (y*_i(T x_j))_{i,j}` from `l × l` operators into ℓ∞.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpaceEmbedding {
    pub l: usize,
    pub net_x: Vec<Vec<f64>>,
    pub net_ystar: Vec<Vec<f64>>,
}

impl OperatorSpaceEmbedding {
    /// Ambient dimension `|net_ystar| · |net_x|`.
    pub fn dim(&self) -> usize {
        self.net_x.len() * self.net_ystar.len()
    }

    /// `t` is row-major `l × l`. Coordinate `i * |net_x| + j` is `y*_i(T x_j)`.
    pub fn embed(&self, t: &[f64]) -> Vec<f64> {
        let l = self.l;
        assert_eq!(t.len(), l * l, "operator must be l x l");
        let images: Vec<Vec<f64>> = self
            .net_x
            .iter()
            .map(|x| (0..l).map(|r| dot(&t[r * l..(r + 1) * l], x)).collect())
            .collect();
        let mut out = Vec::with_capacity(self.dim());
        for y in &self.net_ystar {
            out.extend(images.iter().map(|tx| dot(y, tx)));
        }
        out
    }

    /// `max_{i,j} y*_i(T x_j)`.
    pub fn net_sup(&self, t: &[f64]) -> f64 {
        self.embed(t).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The `l²`-dimensional image subspace, spanned by the images of the
    /// matrix units `E_ab` (row `a * l + b`).
    pub fn to_basis(&self) -> Result<SignedBasisMatrix> {
        let l = self.l;
        let rows: Vec<Vec<f64>> = (0..l * l)
            .map(|k| {
                let mut unit = vec![0.0; l * l];
                unit[k] = 1.0;
                self.embed(&unit)
            })
            .collect();
        SignedBasisMatrix::from_rows(&rows)
    }
}

/// Builds the operator-space embedding for `l ∈ {1, 2, 3}`.
pub fn gen_operator_space(l: usize, seed: u64) -> Result<OperatorSpaceEmbedding> {
    if !(1..=3).contains(&l) {
        return Err(Error::InvalidInput(format!("operator space needs l in 1..=3, got {l}")));
    }
    let mut rng = rng::stream(seed, Stream::Net);
    let net_x = sphere_net(l, &mut rng);
    let net_ystar = sphere_net(l, &mut rng);
    Ok(OperatorSpaceEmbedding { l, net_x, net_ystar })
}
