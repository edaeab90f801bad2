//! Outlier-aware diffusions fitted by alternating minimization over
//! leave-one-out residuals.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{ClassDiffusion, LabeledSet};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::optim::{
    row_group_soft_threshold, row_group_soft_threshold_weighted, solve_simplex_qp,
    CoefficientVector, QuadraticSystem, SolverOptions,
};
use crate::walks::{landing_probabilities, leave_one_out_walks, SeedVector};

/// `|L|×K` matrix for one class. Row `r` (labeled node `i`) holds
/// `[p_{L_c∖i}^(k)]_i` when `i ∈ L_c` and `[p_c^(k)]_i` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaveOneOutMatrix {
    pub class: usize,
    pub rows: DMatrix<f64>,
}

pub fn build_loo_matrix(
    g: &Graph,
    labels: &LabeledSet,
    class: usize,
    k: usize,
) -> Result<LeaveOneOutMatrix> {
    let seeds = labels.seeds(class);
    if seeds.len() < 2 {
        return Err(Error::InsufficientSeeds {
            context: format!("class {class}"),
            found: seeds.len(),
            needed: 2,
        });
    }
    let rows_idx = labels.nodes();
    let (full, _) = landing_probabilities(g, &SeedVector::new(g.num_nodes(), &seeds)?, k)?;
    let mut rows = DMatrix::from_fn(rows_idx.len(), k, |r, s| full.step(s + 1)[rows_idx[r]]);
    for walk in leave_one_out_walks(g, &seeds, k, rows_idx)? {
        let r = labels
            .position(walk.left_out)
            .expect("seeds are labeled nodes");
        for (s, values) in walk.values.iter().enumerate() {
            rows[(r, s)] = values[r];
        }
    }
    Ok(LeaveOneOutMatrix { class, rows })
}

/// `ȳ_{L_c} = y_{L_c}/|L|` over labeled rows.
fn normalized_target(labels: &LabeledSet, class: usize) -> DVector<f64> {
    DVector::from_vec(labels.indicator(class)) / labels.len() as f64
}

fn labeled_inverse_degrees(g: &Graph, labels: &LabeledSet) -> DVector<f64> {
    DVector::from_iterator(labels.len(), labels.nodes().iter().map(|&i| 1.0 / g.degree(i)))
}

/// `‖D_L^{-1/2}(o + ȳ_{L_c} − R_c θ)‖²`.
pub fn robust_loss(
    g: &Graph,
    r: &LeaveOneOutMatrix,
    labels: &LabeledSet,
    o: &[f64],
    theta: &[f64],
) -> f64 {
    let inv_d = labeled_inverse_degrees(g, labels);
    let y = normalized_target(labels, r.class);
    let fit = &r.rows * DVector::from_column_slice(theta);
    let resid = DVector::from_column_slice(o) + y - fit;
    resid.component_mul(&resid).dot(&inv_d)
}

/// Form of the outlier update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierStep {
    /// `O = SoftThres_λ(Ỹ)` with `Ỹ = ȳ − Rθ`, unweighted.
    AsPrinted,
    /// Exact minimizer of the joint objective in `O`:
    /// `o_i = −ỹ_i · [1 − λ√d_i/(2‖ỹ_i‖)]₊`.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustParams {
    pub k: usize,
    pub lambda_theta: f64,
    pub lambda_o: f64,
    pub eps: f64,
    pub max_sweeps: usize,
    pub outlier_step: OutlierStep,
    pub solver: SolverOptions,
}

impl Default for RobustParams {
    fn default() -> Self {
        RobustParams {
            k: 50,
            lambda_theta: 67.5e-5,
            lambda_o: 14.6e-3,
            eps: 1e-4,
            max_sweeps: 100,
            outlier_step: OutlierStep::AsPrinted,
            solver: SolverOptions::default(),
        }
    }
}

impl RobustParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        for (name, v) in [
            ("lambda_theta", self.lambda_theta),
            ("lambda_o", self.lambda_o),
            ("eps", self.eps),
        ] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RobustFit {
    /// Classes fitted, ascending; column order of `outliers`.
    pub classes: Vec<usize>,
    pub thetas: Vec<CoefficientVector>,
    /// Labeled nodes, row order of `outliers`.
    pub labeled: Vec<usize>,
    /// `|L|×C` outlier matrix after the last sweep.
    pub outliers: DMatrix<f64>,
    /// Nodes whose outlier row is nonzero.
    pub outlier_nodes: Vec<usize>,
    /// Flagged nodes kept as seeds so that no class loses all of them.
    pub retained: Vec<usize>,
    /// Joint objective after each sweep.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Diffusions recomputed from the cleaned seed sets.
    pub diffusions: Vec<ClassDiffusion>,
}

/// Alternates simplex-constrained θ-steps (one per class) with a
/// row-sparse outlier step, then drops flagged seeds and recomputes the
/// class diffusions.
pub fn fit_radadif(g: &Graph, labels: &LabeledSet, params: &RobustParams) -> Result<RobustFit> {
    params.validate()?;
    if labels.num_nodes() != g.num_nodes() {
        return Err(Error::invalid("labeled set and graph differ in node count"));
    }
    let classes = labels.classes_in_use();
    let loo: Vec<LeaveOneOutMatrix> = classes
        .par_iter()
        .map(|&c| build_loo_matrix(g, labels, c, params.k))
        .collect::<Result<_>>()?;
    let inv_d = labeled_inverse_degrees(g, labels);
    let targets: Vec<DVector<f64>> = classes.iter().map(|&c| normalized_target(labels, c)).collect();
    // RᵀD†R + λ_θ I is fixed across sweeps.
    let grams: Vec<DMatrix<f64>> = loo
        .iter()
        .map(|r| {
            let weighted = DMatrix::from_fn(r.rows.nrows(), r.rows.ncols(), |i, j| {
                r.rows[(i, j)] * inv_d[i]
            });
            r.rows.transpose() * weighted
                + DMatrix::identity(params.k, params.k) * params.lambda_theta
        })
        .collect();

    let n_l = labels.len();
    let n_c = classes.len();
    let sqrt_d: Vec<f64> = labels.nodes().iter().map(|&i| g.degree(i).sqrt()).collect();
    let mut outliers = DMatrix::zeros(n_l, n_c);
    let mut thetas: Vec<CoefficientVector> = Vec::new();
    let mut residuals = DMatrix::zeros(n_l, n_c);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < params.max_sweeps {
        sweeps += 1;
        let next: Vec<CoefficientVector> = (0..n_c)
            .into_par_iter()
            .map(|j| {
                let target = &targets[j] + outliers.column(j);
                let b = -2.0 * loo[j].rows.transpose() * target.component_mul(&inv_d);
                solve_simplex_qp(&QuadraticSystem::new(grams[j].clone(), b)?, &params.solver)
            })
            .collect::<Result<_>>()?;

        for j in 0..n_c {
            let fit = &loo[j].rows * DVector::from_column_slice(next[j].theta());
            residuals.set_column(j, &(&targets[j] - fit));
        }
        outliers = match params.outlier_step {
            OutlierStep::AsPrinted => row_group_soft_threshold(&residuals, params.lambda_o),
            OutlierStep::Exact => -row_group_soft_threshold_weighted(&residuals, params.lambda_o, &sqrt_d),
        };

        let change = if thetas.is_empty() {
            f64::INFINITY
        } else {
            thetas
                .iter()
                .zip(&next)
                .map(|(a, b)| {
                    a.theta()
                        .iter()
                        .zip(b.theta())
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        };
        thetas = next;
        trace.push(joint_objective(
            &residuals,
            &outliers,
            &thetas,
            &inv_d,
            &sqrt_d,
            params,
        ));
        if change <= params.eps {
            converged = true;
            break;
        }
    }

    let flagged: Vec<usize> = (0..n_l).filter(|&r| outliers.row(r).norm() > 0.0).collect();
    let outlier_nodes: Vec<usize> = flagged.iter().map(|&r| labels.nodes()[r]).collect();
    let mut retained = Vec::new();
    for &c in &classes {
        let seeds = labels.seeds(c);
        if seeds.iter().all(|s| outlier_nodes.contains(s)) {
            let keep = seeds
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let ra = residuals.row(labels.position(a).unwrap()).norm();
                    let rb = residuals.row(labels.position(b).unwrap()).norm();
                    ra.total_cmp(&rb).then(a.cmp(&b))
                })
                .expect("class in use has seeds");
            log::debug!("all seeds of class {c} flagged; keeping node {keep}");
            retained.push(keep);
        }
    }
    let removed: Vec<usize> = outlier_nodes
        .iter()
        .copied()
        .filter(|i| !retained.contains(i))
        .collect();
    let cleaned = labels.without(&removed)?;
    let diffusions = classes
        .par_iter()
        .zip(&thetas)
        .map(|(&c, theta)| {
            let seeds = SeedVector::new(g.num_nodes(), &cleaned.seeds(c))?;
            let (p, _) = landing_probabilities(g, &seeds, params.k)?;
            Ok(ClassDiffusion {
                class: c,
                scores: p.combine(theta.theta()),
                coefficients: Some(theta.clone()),
            })
        })
        .collect::<Result<_>>()?;

    Ok(RobustFit {
        classes,
        thetas,
        labeled: labels.nodes().to_vec(),
        outliers,
        outlier_nodes,
        retained,
        trace,
        sweeps,
        converged,
        diffusions,
    })
}

/// `Σ_c [‖D^{-1/2}(o_c + ỹ_c)‖² + λ_θ‖θ_c‖²] + λ_o Σ_i ‖o_i‖/√d_i`, where
/// `ỹ_c = ȳ_c − R_c θ_c`.
fn joint_objective(
    residuals: &DMatrix<f64>,
    outliers: &DMatrix<f64>,
    thetas: &[CoefficientVector],
    inv_d: &DVector<f64>,
    sqrt_d: &[f64],
    params: &RobustParams,
) -> f64 {
    let total = outliers + residuals;
    let mut value = 0.0;
    for r in 0..total.nrows() {
        value += inv_d[r] * total.row(r).norm_squared();
        value += params.lambda_o * outliers.row(r).norm() / sqrt_d[r];
    }
    for th in thetas {
        value += params.lambda_theta * th.theta().iter().map(|x| x * x).sum::<f64>();
    }
    value
}

/// Detection and false-alarm rates of the flagged set against known
/// outliers: `p_d = |S ∩ T|/|T|`, `p_fa = |S ∖ T|/|L ∖ T|`, with `0/0 = 0`.
pub fn detection_counts(fit: &RobustFit, true_outliers: &[usize]) -> (f64, f64) {
    detection_rates(&fit.labeled, &fit.outlier_nodes, true_outliers)
}

pub fn detection_rates(labeled: &[usize], flagged: &[usize], true_outliers: &[usize]) -> (f64, f64) {
    let is_true = |i: &usize| true_outliers.contains(i);
    let hits = flagged.iter().filter(|i| is_true(i)).count();
    let false_alarms = flagged.len() - hits;
    let negatives = labeled.iter().filter(|i| !is_true(i)).count();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(hits, true_outliers.len()), ratio(false_alarms, negatives))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::predict;
    use approx::assert_abs_diff_eq;

    /// Two 6-cliques joined by one edge.
    fn barbell() -> Graph {
        let mut edges = Vec::new();
        for side in [0, 6] {
            for i in 0..6 {
                for j in (i + 1)..6 {
                    edges.push((side + i, side + j, 1.0));
                }
            }
        }
        edges.push((5, 6, 1.0));
        Graph::from_edges(12, edges).unwrap()
    }

    #[test]
    fn two_seed_rows_are_single_seed_walks() {
        let g = barbell();
        let labels = LabeledSet::multiclass(12, 1, &[(1, 0), (3, 0)]).unwrap();
        let r = build_loo_matrix(&g, &labels, 0, 4).unwrap();
        let (from3, _) = landing_probabilities(&g, &SeedVector::new(12, &[3]).unwrap(), 4).unwrap();
        for k in 1..=4 {
            assert_eq!(r.rows[(0, k - 1)], from3.step(k)[1]);
        }
    }

    #[test]
    fn insufficient_seeds_names_class() {
        let g = barbell();
        let labels = LabeledSet::multiclass(12, 2, &[(1, 0), (3, 0), (8, 1)]).unwrap();
        let err = build_loo_matrix(&g, &labels, 1, 4).unwrap_err();
        assert!(err.to_string().contains("class 1"));
    }

    #[test]
    fn perfect_cancellation_has_zero_loss() {
        let g = barbell();
        let labels = LabeledSet::multiclass(12, 2, &[(1, 0), (3, 0), (8, 1), (9, 1)]).unwrap();
        let r = build_loo_matrix(&g, &labels, 0, 3).unwrap();
        let theta = [0.2, 0.3, 0.5];
        let fit = &r.rows * DVector::from_column_slice(&theta);
        let y = normalized_target(&labels, 0);
        let o: Vec<f64> = (fit - y).iter().copied().collect();
        assert_abs_diff_eq!(robust_loss(&g, &r, &labels, &o, &theta), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn detection_examples() {
        let l = [1, 2, 3, 4];
        assert_eq!(detection_rates(&l, &[2, 3], &[2, 3]), (1.0, 0.0));
        assert_eq!(detection_rates(&l, &[], &[2, 3]), (0.0, 0.0));
        assert_eq!(detection_rates(&l, &l, &[2, 3]), (1.0, 1.0));
        assert_eq!(detection_rates(&l, &[1], &[]), (0.0, 0.25));
    }

    #[test]
    fn huge_lambda_flags_nothing() {
        let g = barbell();
        let labels =
            LabeledSet::multiclass(12, 2, &[(0, 0), (1, 0), (2, 0), (9, 1), (10, 1), (11, 1)]).unwrap();
        for step in [OutlierStep::AsPrinted, OutlierStep::Exact] {
            let params = RobustParams {
                k: 6,
                lambda_o: 1e6,
                outlier_step: step,
                ..RobustParams::default()
            };
            let fit = fit_radadif(&g, &labels, &params).unwrap();
            assert!(fit.outlier_nodes.is_empty());
            assert!(fit.outliers.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn zero_lambda_keeps_one_seed_per_class() {
        let g = barbell();
        let labels =
            LabeledSet::multiclass(12, 2, &[(0, 0), (1, 0), (2, 0), (9, 1), (10, 1), (11, 1)]).unwrap();
        let params = RobustParams {
            k: 6,
            lambda_o: 0.0,
            max_sweeps: 5,
            ..RobustParams::default()
        };
        let fit = fit_radadif(&g, &labels, &params).unwrap();
        assert_eq!(fit.outlier_nodes.len(), 6);
        assert_eq!(fit.retained.len(), 2);
        assert_eq!(fit.diffusions.len(), 2);
    }

    #[test]
    fn flipped_label_is_detected_and_removed() {
        let g = barbell();
        // Node 4 sits in the class-0 clique but carries class 1.
        let pairs = [(0, 0), (1, 0), (2, 0), (4, 1), (8, 1), (9, 1), (10, 1)];
        let labels = LabeledSet::multiclass(12, 2, &pairs).unwrap();
        let params = RobustParams {
            k: 8,
            lambda_o: 0.02,
            outlier_step: OutlierStep::Exact,
            ..RobustParams::default()
        };
        let fit = fit_radadif(&g, &labels, &params).unwrap();
        assert!(fit.outlier_nodes.contains(&4), "flagged {:?}", fit.outlier_nodes);
        let unlabeled = [3, 5, 6, 7, 11];
        assert_eq!(predict(&fit.diffusions, &unlabeled), vec![0, 0, 1, 1, 1]);
        for w in fit.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }
}
