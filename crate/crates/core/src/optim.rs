//! Small dense solvers for quadratics over the simplex and the affine
//! hyperplane `1ᵀθ = 1`, plus the row-group soft-threshold.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility tolerance of a [`CoefficientVector`].
pub const CONSTRAINT_TOL: f64 = 1e-8;
/// Eigenvalues above `-PSD_TOL` are treated as nonnegative.
pub const PSD_TOL: f64 = 1e-8;

/// `θᵀAθ + θᵀb` with `A` stored symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl QuadraticSystem {
    /// Symmetrizes `a` as `(a + aᵀ)/2`.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<QuadraticSystem> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::invalid(format!(
                "system dimensions disagree: A is {}x{}, b has {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::invalid("empty quadratic system"));
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("quadratic system has non-finite entries"));
        }
        let a = (&a + a.transpose()) * 0.5;
        Ok(QuadraticSystem { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        theta.dot(&(&self.a * theta)) + theta.dot(&self.b)
    }

    /// `2Aθ + b`.
    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.a * theta * 2.0 + &self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    Simplex,
    Hyperplane,
    Fixed,
}

/// Diffusion coefficients tagged with the constraint set they satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    theta: Vec<f64>,
    constraint: Constraint,
}

impl CoefficientVector {
    /// Checks feasibility for the given tag. `Fixed` vectors must lie on the
    /// simplex as well.
    pub fn new(theta: Vec<f64>, constraint: Constraint) -> Result<CoefficientVector> {
        if theta.is_empty() || theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("coefficient vector is empty or non-finite"));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > CONSTRAINT_TOL {
            return Err(Error::invalid(format!(
                "coefficients sum to {sum}, expected 1"
            )));
        }
        if constraint != Constraint::Hyperplane && theta.iter().any(|&x| x < -CONSTRAINT_TOL) {
            return Err(Error::invalid("simplex coefficients must be nonnegative"));
        }
        Ok(CoefficientVector { theta, constraint })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding.
pub fn project_simplex(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut u = x.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            tau = candidate;
        }
    }
    x.iter().map(|&xi| (xi - tau).max(0.0)).collect()
}

fn project(v: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(project_simplex(v.as_slice()))
}

/// `‖θ − Π(θ − s·∇f(θ))‖∞`.
fn kkt_residual(sys: &QuadraticSystem, theta: &DVector<f64>, step: f64) -> f64 {
    let g = sys.gradient(theta);
    (theta - project(&(theta - g * step))).amax()
}

/// Minimizes `θᵀAθ + θᵀb` over the simplex by accelerated projected gradient
/// with adaptive restart, finished by an exact solve on the detected support.
///
/// On return both `‖θ − Π(θ − ∇f)‖∞` and its `1/L`-step counterpart are at
/// most `opts.tol`.
pub fn solve_simplex_qp(sys: &QuadraticSystem, opts: &SolverOptions) -> Result<CoefficientVector> {
    let k = sys.dim();
    let eig = SymmetricEigen::new(sys.a.clone());
    let lambda_min = eig.eigenvalues.min();
    let shifted;
    let sys = if lambda_min < -PSD_TOL {
        log::warn!("shifting indefinite system by {:.3e}", lambda_min.abs() + 1e-10);
        let shift = DMatrix::identity(k, k) * (lambda_min.abs() + 1e-10);
        shifted = QuadraticSystem {
            a: &sys.a + shift,
            b: sys.b.clone(),
        };
        &shifted
    } else {
        sys
    };
    let lipschitz = 2.0 * eig.eigenvalues.max().max(0.0) + 2.0 * (-lambda_min).max(0.0);

    if lipschitz <= f64::EPSILON * sys.b.amax().max(1.0) {
        return Ok(linear_vertex(sys));
    }
    let step = 1.0 / lipschitz;
    let converged = |theta: &DVector<f64>| {
        let r_unit = kkt_residual(sys, theta, 1.0);
        let r_step = kkt_residual(sys, theta, step);
        (r_unit.max(r_step), r_unit <= opts.tol && r_step <= opts.tol)
    };

    let mut theta = DVector::from_element(k, 1.0 / k as f64);
    let mut y = theta.clone();
    let mut t = 1.0_f64;
    let mut f_theta = sys.objective(&theta);
    let mut residual = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let (r, done) = converged(&theta);
        residual = r;
        if done {
            return finish(theta);
        }
        if iter % 20 == 19 {
            for polished in polish_candidates(sys, &theta, step) {
                let (rp, done_p) = converged(&polished);
                if done_p {
                    return finish(polished);
                }
                if rp <= r && sys.objective(&polished) <= f_theta {
                    theta = polished.clone();
                    y = polished;
                    f_theta = sys.objective(&theta);
                    t = 1.0;
                    break;
                }
            }
        }
        let next = project(&(&y - sys.gradient(&y) * step));
        let f_next = sys.objective(&next);
        if f_next > f_theta {
            // Restart momentum from the current iterate.
            t = 1.0;
            y = theta.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &theta) * ((t - 1.0) / t_next);
        theta = next;
        f_theta = f_next;
        t = t_next;
    }
    for polished in polish_candidates(sys, &theta, step) {
        if converged(&polished).1 {
            return finish(polished);
        }
    }
    Err(Error::QpNotConverged {
        iterations: opts.max_iter,
        residual,
        iterate: theta.iter().copied().collect(),
    })
}

/// Renormalizes away roundoff and tags the result.
fn finish(theta: DVector<f64>) -> Result<CoefficientVector> {
    let clipped: Vec<f64> = theta.iter().map(|&x| x.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    CoefficientVector::new(clipped.iter().map(|x| x / sum).collect(), Constraint::Simplex)
}

/// Minimizer of a (numerically) linear objective: the vertex with the
/// smallest `b_k`, or the uniform point when `b` is constant.
fn linear_vertex(sys: &QuadraticSystem) -> CoefficientVector {
    let k = sys.dim();
    let (min, max) = (sys.b.min(), sys.b.max());
    let theta = if max - min <= f64::EPSILON * max.abs().max(1.0) {
        vec![1.0 / k as f64; k]
    } else {
        let best = (0..k).find(|&i| sys.b[i] == min).unwrap_or(0);
        let mut v = vec![0.0; k];
        v[best] = 1.0;
        v
    };
    CoefficientVector {
        theta,
        constraint: Constraint::Simplex,
    }
}

/// Feasible equality-constrained minimizers on candidate faces: the support
/// of `theta`, and the supports of its projected-gradient steps of length
/// 1 and `step`, which coincide with the optimal face near a nondegenerate
/// solution.
fn polish_candidates(sys: &QuadraticSystem, theta: &DVector<f64>, step: f64) -> Vec<DVector<f64>> {
    let g = sys.gradient(theta);
    let mut supports: Vec<Vec<usize>> = Vec::with_capacity(3);
    for point in [theta.clone(), project(&(theta - &g)), project(&(theta - &g * step))] {
        let support: Vec<usize> = (0..point.len()).filter(|&i| point[i] > 1e-12).collect();
        if !supports.contains(&support) {
            supports.push(support);
        }
    }
    supports
        .iter()
        .filter_map(|support| polish_on_support(sys, support, theta.len()))
        .collect()
}

/// Solves the equality-constrained problem on `support` and returns it when
/// primal feasible.
fn polish_on_support(sys: &QuadraticSystem, support: &[usize], k: usize) -> Option<DVector<f64>> {
    let sub = equality_solve(sys, support)?;
    if sub.iter().any(|&x| x < 0.0) {
        return None;
    }
    let mut full = DVector::zeros(k);
    for (&i, &x) in support.iter().zip(sub.iter()) {
        full[i] = x;
    }
    Some(full)
}

/// Minimizer of the quadratic restricted to `support` with `1ᵀθ_S = 1`.
fn equality_solve(sys: &QuadraticSystem, support: &[usize]) -> Option<DVector<f64>> {
    let s = support.len();
    if s == 0 {
        return None;
    }
    let mut m = DMatrix::zeros(s + 1, s + 1);
    let mut rhs = DVector::zeros(s + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            m[(r, c)] = 2.0 * sys.a[(i, j)];
        }
        m[(r, s)] = 1.0;
        m[(s, r)] = 1.0;
        rhs[r] = -sys.b[i];
    }
    rhs[s] = 1.0;
    let x = m.full_piv_lu().solve(&rhs)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(x.rows(0, s).into_owned())
}

/// Default ridge `1e-8 · trace(A)/K` for [`solve_hyperplane_qp`].
pub fn default_ridge(sys: &QuadraticSystem) -> f64 {
    1e-8 * sys.a.trace().abs() / sys.dim() as f64
}

/// Exact minimizer of `θᵀAθ + θᵀb` subject to `1ᵀθ = 1`, from the KKT system
/// `[2(A + ridge·I) 1; 1ᵀ 0] [θ; ν] = [−b; 1]`.
pub fn solve_hyperplane_qp(sys: &QuadraticSystem, ridge: f64) -> Result<CoefficientVector> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!("ridge must be nonnegative, got {ridge}")));
    }
    let k = sys.dim();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    m.view_mut((0, 0), (k, k))
        .copy_from(&((&sys.a + DMatrix::identity(k, k) * ridge) * 2.0));
    for i in 0..k {
        m[(i, k)] = 1.0;
        m[(k, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs.rows_mut(0, k).copy_from(&(-&sys.b));
    rhs[k] = 1.0;

    let singular = || {
        Error::Singular(format!(
            "hyperplane KKT system is singular with ridge {ridge:.3e}; increase the ridge"
        ))
    };
    let lu = m.clone().full_piv_lu();
    if !lu.is_invertible() {
        return Err(singular());
    }
    let mut x = lu.solve(&rhs).ok_or_else(singular)?;
    // One step of iterative refinement.
    let r = &rhs - &m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(singular());
    }
    let theta: Vec<f64> = x.rows(0, k).iter().copied().collect();
    let sum: f64 = theta.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(singular());
    }
    CoefficientVector::new(theta, Constraint::Hyperplane)
}

/// Row `i` becomes `x_i · [1 − λ/(2‖x_i‖₂)]₊`.
pub fn row_group_soft_threshold(x: &DMatrix<f64>, lambda_o: f64) -> DMatrix<f64> {
    let weights = vec![1.0; x.nrows()];
    row_group_soft_threshold_weighted(x, lambda_o, &weights)
}

/// Row `i` becomes `x_i · [1 − λ·w_i/(2‖x_i‖₂)]₊`.
pub fn row_group_soft_threshold_weighted(
    x: &DMatrix<f64>,
    lambda_o: f64,
    weights: &[f64],
) -> DMatrix<f64> {
    assert_eq!(weights.len(), x.nrows(), "one weight per row");
    let mut out = x.clone();
    for (i, &w) in weights.iter().enumerate() {
        let norm = x.row(i).norm();
        let threshold = 0.5 * lambda_o * w;
        let scale = if norm > threshold {
            1.0 - threshold / norm
        } else {
            0.0
        };
        out.row_mut(i).scale_mut(scale);
    }
    out
}
