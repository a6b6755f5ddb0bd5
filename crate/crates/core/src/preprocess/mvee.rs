//! Maximum-volume ellipsoid inscribed in a symmetric polytope
//! `{c ∈ ℝ^n : |⟨v_j, c⟩| <= 1 for all j}`.
//!
//! Solved as `max log det Q` subject to `v_jᵀ Q v_j <= 1`. The dual is a
//! D-optimal design over the `v_j`: with weights `u` on the simplex and
//! `M(u) = Σ u_j v_j v_jᵀ`, the optimum is `Q = M(u*)⁻¹ / n`. Weights are
//! updated one coordinate at a time with exact line search (Khachiyan's
//! toward step plus the Wolfe-Atwood away step), so `log det M(u)` never
//! decreases.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rebuild `M⁻¹` from scratch this often to cap rank-one update drift.
const REFRESH_EVERY: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MveeOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MveeOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 100_000 }
    }
}

/// `E = {Q^{1/2} z : |z| <= 1}`; `E` lies inside the body iff
/// `vᵀ Q v <= 1` for each defining functional `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub q: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// `vᵀ Q v`.
    pub fn support_sq(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        v.dot(&(&self.q * &v))
    }

    pub fn log_det(&self) -> f64 {
        self.q.clone().cholesky().map_or(f64::NEG_INFINITY, |c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }
}

#[derive(Debug, Clone)]
pub struct MveeSolution {
    pub ellipsoid: Ellipsoid,
    pub iterations: usize,
    /// `max_j v_jᵀ Q v_j - 1` at return.
    pub residual: f64,
    /// `log det M(u)` after each iteration, starting with the uniform design.
    pub dual_log_det: Vec<f64>,
    /// Final design weights.
    pub weights: Vec<f64>,
}

struct Design<'a> {
    points: &'a [DVector<f64>],
    u: Vec<f64>,
    m_inv: DMatrix<f64>,
    g: Vec<f64>,
    log_det: f64,
}

impl<'a> Design<'a> {
    fn rebuild(points: &'a [DVector<f64>], u: Vec<f64>) -> Option<Self> {
        let n = points[0].len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (p, &w) in points.iter().zip(&u) {
            if w > 0.0 {
                m.ger(w, p, p, 1.0);
            }
        }
        let chol = m.cholesky()?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let m_inv = chol.inverse();
        let g = points.iter().map(|p| p.dot(&(&m_inv * p))).collect();
        Some(Self { points, u, m_inv, g, log_det })
    }

    /// Moves weight `lambda` onto point `j` (negative `lambda` takes it away).
    fn step(&mut self, j: usize, lambda: f64) -> bool {
        let mu = lambda / (1.0 - lambda);
        let gj = self.g[j];
        let denom = 1.0 + mu * gj;
        if denom <= 1e-14 {
            return false;
        }
        let w = &self.m_inv * &self.points[j];
        let scale = 1.0 / (1.0 - lambda);
        for (gk, p) in self.g.iter_mut().zip(self.points) {
            let t = p.dot(&w);
            *gk = scale * (*gk - mu * t * t / denom);
        }
        self.m_inv.ger(-mu / denom, &w, &w, 1.0);
        self.m_inv *= scale;
        let n = self.points[0].len() as f64;
        self.log_det += n * (1.0 - lambda).ln() + denom.ln();
        for uk in self.u.iter_mut() {
            *uk *= 1.0 - lambda;
        }
        self.u[j] += lambda;
        if self.u[j] < 1e-15 {
            self.u[j] = 0.0;
        }
        true
    }
}

/// Numerical rank of `Σ v vᵀ`.
pub fn functional_rank(functionals: &[Vec<f64>], dim: usize) -> usize {
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for v in functionals {
        let v = DVector::from_column_slice(v);
        m.ger(1.0, &v, &v, 1.0);
    }
    let eig = m.symmetric_eigen().eigenvalues;
    let top = eig.iter().fold(0.0_f64, |a, &b| a.max(b));
    eig.iter().filter(|&&e| e > top * 1e-12 && e > 0.0).count()
}

pub fn mvee(functionals: &[Vec<f64>], opts: MveeOptions) -> Result<MveeSolution> {
    let n = functionals.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::InvalidInput("no functionals".into()));
    }
    if functionals.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput("functionals differ in length".into()));
    }
    let rank = functional_rank(functionals, n);
    if rank < n {
        return Err(Error::DegenerateBody { rank, dim: n });
    }
    let points: Vec<DVector<f64>> = functionals.iter().map(|v| DVector::from_column_slice(v)).collect();
    let count = points.len();
    let dim = n as f64;
    let mut design = Design::rebuild(&points, vec![1.0 / count as f64; count]).ok_or(Error::DegenerateBody { rank, dim: n })?;
    let mut trace = vec![design.log_det];
    let mut iterations = 0;
    loop {
        let (j_plus, g_plus) = argmax(design.g.iter().copied());
        let residual = g_plus / dim - 1.0;
        if residual <= opts.tol {
            let q = &design.m_inv / dim;
            return Ok(MveeSolution {
                ellipsoid: Ellipsoid { q },
                iterations,
                residual,
                dual_log_det: trace,
                weights: design.u,
            });
        }
        if iterations == opts.max_iter {
            return Err(Error::Convergence { iterations, residual });
        }
        let (j_minus, g_minus) = design
            .g
            .iter()
            .zip(&design.u)
            .enumerate()
            .filter(|(_, (_, &u))| u > 0.0)
            .map(|(k, (&g, _))| (k, g))
            .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });

        let (j, lambda) = if g_plus - dim >= dim - g_minus {
            (j_plus, (g_plus - dim) / (dim * (g_plus - 1.0)))
        } else {
            let u = design.u[j_minus];
            let floor = -u / (1.0 - u);
            let lambda = if g_minus > 1.0 { ((g_minus - dim) / (dim * (g_minus - 1.0))).max(floor) } else { floor };
            (j_minus, lambda)
        };
        iterations += 1;
        if !design.step(j, lambda) {
            // Away step to the boundary left M singular in floating point:
            // drop the point and rebuild.
            let mut u = design.u.clone();
            u[j] = 0.0;
            let total: f64 = u.iter().sum();
            u.iter_mut().for_each(|w| *w /= total);
            design = Design::rebuild(&points, u).ok_or(Error::DegenerateBody { rank, dim: n })?;
        } else if iterations % REFRESH_EVERY == 0 {
            let u = std::mem::take(&mut design.u);
            design = Design::rebuild(&points, u).ok_or(Error::DegenerateBody { rank, dim: n })?;
        }
        trace.push(design.log_det);
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values.enumerate().fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
}
