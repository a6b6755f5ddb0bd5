//! From a subspace basis to a 2-summing frame.
//!
//! The basis is moved to John position (its maximal inscribed ellipsoid
//! becomes the Euclidean ball), greedy Dvoretzky-Rogers vectors are picked
//! there, and the frame entries are the coordinate functionals evaluated on
//! those vectors: `a_i(j) = x*_j(x_i)`. Because the Euclidean ball sits in
//! the unit ball, every column of the frame has ℓ₂ norm at most 1.

pub mod mvee;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::SignedBasisMatrix;
use crate::rng::StageRng;

pub use mvee::{mvee, Ellipsoid, MveeOptions, MveeSolution};

/// Column `j` of the basis, i.e. the coordinate functional `x*_j` in basis
/// coordinates.
pub fn coordinate_functionals(basis: &SignedBasisMatrix) -> Vec<Vec<f64>> {
    (0..basis.n_cols()).map(|j| (0..basis.n_rows()).map(|i| basis.get(i, j)).collect()).collect()
}

#[derive(Debug, Clone)]
pub struct JohnPosition {
    pub basis: SignedBasisMatrix,
    /// `Q^{1/2}`: new basis rows are `transform * old rows`.
    pub transform: DMatrix<f64>,
    pub solution: MveeSolution,
}

/// Changes coordinates so that the maximal inscribed ellipsoid of the unit
/// ball of the row span becomes the Euclidean unit ball.
///
/// `Q` is shrunk by `max_j v_jᵀQv_j` when the solver returns it slightly
/// infeasible, so the Euclidean ball lies inside the unit ball exactly.
pub fn john_position(basis: &SignedBasisMatrix, opts: MveeOptions) -> Result<JohnPosition> {
    let functionals = coordinate_functionals(basis);
    let solution = mvee(&functionals, opts)?;
    let worst = functionals.iter().map(|v| solution.ellipsoid.support_sq(v)).fold(0.0_f64, f64::max);
    let q = &solution.ellipsoid.q / worst.max(1.0);
    let eig = q.symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|e| e.max(0.0).sqrt());
    let transform = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();

    let n = basis.n_rows();
    let old = DMatrix::from_row_slice(n, basis.n_cols(), basis.entries());
    let new = &transform * old;
    let rows: Vec<Vec<f64>> = new.row_iter().map(|r| r.iter().copied().collect()).collect();
    let moved = SignedBasisMatrix::from_rows(&rows)?;
    Ok(JohnPosition { basis: moved, transform, solution })
}

/// Worst violations of `‖u‖_X <= |u|₂ <= √n ‖u‖_X` over `probes` random
/// unit directions, returned as `(inner, outer)`; both are `<= 0` up to
/// rounding when the basis is in John position.
pub fn john_sandwich_gap(basis: &SignedBasisMatrix, probes: usize, rng: &mut StageRng) -> (f64, f64) {
    let n = basis.n_rows();
    let body = SupNormBody::from_basis(basis);
    let (mut inner, mut outer) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..probes {
        let mut u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm2(&u);
        u.iter_mut().for_each(|x| *x /= len);
        let x = body.norm(&u);
        inner = inner.max(x - 1.0);
        outer = outer.max(1.0 - (n as f64).sqrt() * x);
    }
    (inner, outer)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components along each (orthonormal) vector in `taken`, twice.
fn project_out(v: &mut [f64], taken: &[Vec<f64>]) {
    for _ in 0..2 {
        for t in taken {
            let c = dot(v, t);
            v.iter_mut().zip(t).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// A norm on ℝ^n, evaluated pointwise.
pub trait NormOracle {
    fn dim(&self) -> usize;

    fn norm(&self, x: &[f64]) -> f64;

    /// Unit vector orthogonal to `taken` maximizing the norm, when it has a
    /// closed form. `None` falls back to projected ascent.
    fn exact_max_on_complement(&self, _taken: &[Vec<f64>]) -> Option<Vec<f64>> {
        None
    }
}

/// `‖x‖ = max_j |⟨v_j, x⟩|`, the norm a subspace inherits from ℓ∞^N.
#[derive(Debug, Clone)]
pub struct SupNormBody {
    pub functionals: Vec<Vec<f64>>,
}

impl SupNormBody {
    pub fn from_basis(basis: &SignedBasisMatrix) -> Self {
        Self { functionals: coordinate_functionals(basis) }
    }
}

impl NormOracle for SupNormBody {
    fn dim(&self) -> usize {
        self.functionals.first().map_or(0, Vec::len)
    }

    fn norm(&self, x: &[f64]) -> f64 {
        self.functionals.iter().map(|v| dot(v, x).abs()).fold(0.0, f64::max)
    }

    /// `max_{x ⊥ taken, |x| = 1} max_j |⟨v_j, x⟩| = max_j |P v_j|`, attained
    /// at `P v_j / |P v_j|` for the best `j` (smallest index on ties).
    fn exact_max_on_complement(&self, taken: &[Vec<f64>]) -> Option<Vec<f64>> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for v in &self.functionals {
            let mut p = v.clone();
            project_out(&mut p, taken);
            let len = norm2(&p);
            if best.as_ref().is_none_or(|(b, _)| len > *b) {
                best = Some((len, p));
            }
        }
        let (len, mut p) = best?;
        if len <= 1e-14 {
            return None;
        }
        p.iter_mut().for_each(|x| *x /= len);
        project_out(&mut p, taken);
        let len = norm2(&p);
        p.iter_mut().for_each(|x| *x /= len);
        Some(p)
    }
}

/// Euclidean norm on ℝ^n.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean(pub usize);

impl NormOracle for Euclidean {
    fn dim(&self) -> usize {
        self.0
    }

    fn norm(&self, x: &[f64]) -> f64 {
        norm2(x)
    }
}

/// Adapts a closure `x ↦ ‖x‖` on ℝ^n.
pub struct FnNorm<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64> NormOracle for FnNorm<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn norm(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    pub restarts: usize,
    pub max_steps: usize,
    /// Rotation angle below which a local search counts as stationary.
    pub min_angle: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self { restarts: 16, max_steps: 20_000, min_angle: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrVectors {
    /// Orthonormal vectors in ℝ^n, in selection order.
    pub vectors: Vec<Vec<f64>>,
    /// `‖x_i‖_X`, nonincreasing.
    pub norms: Vec<f64>,
    /// Some ascent ran out of steps before becoming stationary.
    pub approximate: bool,
}

impl DrVectors {
    /// `max |G - I|` over the Gram matrix of the vectors.
    pub fn gram_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, x) in self.vectors.iter().enumerate() {
            for (b, y) in self.vectors.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot(x, y) - target).abs());
            }
        }
        worst
    }
}

/// Orthonormal basis of the complement of `taken` in ℝ^n.
fn complement_basis(n: usize, taken: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let mut all = taken.to_vec();
        all.extend(out.iter().cloned());
        project_out(&mut e, &all);
        let len = norm2(&e);
        if len > 1e-8 {
            e.iter_mut().for_each(|x| *x /= len);
            out.push(e);
        }
        if out.len() + taken.len() == n {
            break;
        }
    }
    out
}

/// Maximizes `norm(Σ z_k c_k)` over unit `z` by random-plane rotations.
/// Returns the maximizer (in ℝ^n) and whether every restart stalled below
/// `min_angle` within `max_steps`.
fn ascend<N: NormOracle + ?Sized>(oracle: &N, comp: &[Vec<f64>], opts: AscentOptions, rng: &mut StageRng) -> (Vec<f64>, bool) {
    let k = comp.len();
    let lift = |z: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; comp[0].len()];
        for (c, &w) in comp.iter().zip(z) {
            x.iter_mut().zip(c).for_each(|(a, b)| *a += w * b);
        }
        x
    };
    let value = |z: &[f64]| oracle.norm(&lift(z));
    let mut starts: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let mut e = vec![0.0; k];
            e[a] = 1.0;
            e
        })
        .collect();
    for _ in 0..opts.restarts {
        let mut z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm2(&z);
        z.iter_mut().for_each(|x| *x /= len);
        starts.push(z);
    }
    let mut best = (f64::NEG_INFINITY, starts[0].clone());
    let mut stationary = true;
    for mut z in starts {
        let mut f = value(&z);
        let mut angle: f64 = 0.5;
        let mut steps = 0;
        if k > 1 {
            while angle >= opts.min_angle {
                if steps == opts.max_steps {
                    stationary = false;
                    break;
                }
                steps += 1;
                let mut d: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
                let c = dot(&d, &z);
                d.iter_mut().zip(&z).for_each(|(a, b)| *a -= c * b);
                let len = norm2(&d);
                if len < 1e-12 {
                    continue;
                }
                d.iter_mut().for_each(|x| *x /= len);
                let mut improved = false;
                for sign in [1.0, -1.0] {
                    let (s, co) = (sign * angle).sin_cos();
                    let mut cand: Vec<f64> = z.iter().zip(&d).map(|(a, b)| co * a + s * b).collect();
                    let len = norm2(&cand);
                    cand.iter_mut().for_each(|x| *x /= len);
                    let fc = value(&cand);
                    if fc > f + 1e-14 * f.abs() {
                        z = cand;
                        f = fc;
                        improved = true;
                        break;
                    }
                }
                if improved {
                    angle = (angle * 1.5).min(0.5);
                } else {
                    angle *= 0.7;
                }
            }
        }
        if f > best.0 {
            best = (f, z);
        }
    }
    let mut x = lift(&best.1);
    let len = norm2(&x);
    x.iter_mut().for_each(|v| *v /= len);
    (x, stationary)
}

/// Greedy Dvoretzky-Rogers selection: `x_i` maximizes the norm over unit
/// vectors orthogonal to `x_1 … x_{i-1}`.
pub fn dvoretzky_rogers<N: NormOracle + ?Sized>(oracle: &N, opts: AscentOptions, rng: &mut StageRng) -> DrVectors {
    let n = oracle.dim();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    let mut approximate = false;
    for _ in 0..n {
        let x = match oracle.exact_max_on_complement(&vectors) {
            Some(x) => x,
            None => {
                let comp = complement_basis(n, &vectors);
                let (mut x, stationary) = ascend(oracle, &comp, opts, rng);
                approximate |= !stationary;
                project_out(&mut x, &vectors);
                let len = norm2(&x);
                x.iter_mut().for_each(|v| *v /= len);
                x
            }
        };
        norms.push(oracle.norm(&x));
        vectors.push(x);
    }
    DrVectors { vectors, norms, approximate }
}

/// Rows `a_i(j) = x*_j(x_i)` for the Dvoretzky-Rogers vectors `x_i`, with
/// `sigma_prime = {i : max_j |a_i(j)| >= gamma_cut}`.
pub fn two_summing_frame(john: &SignedBasisMatrix, dr: &DrVectors, gamma_cut: f64) -> Result<SignedBasisMatrix> {
    let n = john.n_rows();
    if dr.vectors.len() != n {
        return Err(Error::InvalidInput(format!("{} DR vectors for an {n}-dimensional basis", dr.vectors.len())));
    }
    let big_n = john.n_cols();
    let old = DMatrix::from_row_slice(n, big_n, john.entries());
    let coeffs = DMatrix::from_fn(n, n, |i, k| dr.vectors[i][k]);
    let rows = coeffs * old;
    let entries: Vec<f64> = rows.transpose().iter().copied().collect();
    let frame = SignedBasisMatrix::new(n, big_n, entries)?;
    let keep: Vec<usize> =
        (0..n).filter(|&i| frame.row(i).iter().fold(0.0_f64, |m, v| m.max(v.abs())) >= gamma_cut).collect();
    if 4 * keep.len() < n || keep.is_empty() {
        return Err(Error::PreprocessFailure { kept: keep.len(), n, cut: gamma_cut });
    }
    frame.with_sigma_prime(keep, gamma_cut)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessOptions {
    pub gamma_cut: f64,
    pub mvee: MveeOptions,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self { gamma_cut: 0.3, mvee: MveeOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    /// Frame rows `a_i(j)` with `sigma_prime` filled.
    pub frame: SignedBasisMatrix,
    pub dr_norms: Vec<f64>,
    pub mvee_iterations: usize,
    pub mvee_residual: f64,
}

/// John position, then Dvoretzky-Rogers, then the dual frame.
pub fn preprocess(basis: &SignedBasisMatrix, opts: PreprocessOptions) -> Result<Preprocessed> {
    let john = john_position(basis, opts.mvee)?;
    let body = SupNormBody::from_basis(&john.basis);
    // Sup-norm bodies take the closed-form branch, so no randomness is drawn.
    let mut rng = crate::rng::stream(0, crate::rng::Stream::Probe);
    let dr = dvoretzky_rogers(&body, AscentOptions::default(), &mut rng);
    let frame = two_summing_frame(&john.basis, &dr, opts.gamma_cut)?;
    Ok(Preprocessed {
        frame,
        dr_norms: dr.norms,
        mvee_iterations: john.solution.iterations,
        mvee_residual: john.solution.residual,
    })
}

/// `Σ_i a_i(j)^2` per column of the frame; used by tests and reports.
pub fn column_sq_norms(frame: &SignedBasisMatrix) -> Vec<f64> {
    let mut out = vec![0.0; frame.n_cols()];
    for row in frame.rows() {
        out.iter_mut().zip(row).for_each(|(s, v)| *s += v * v);
    }
    out
}
