//! Library routines checked against dense reference computations.

use adadif::graph::{laplacian_quadratic, spectral_summary};
use adadif::optim::solve_hyperplane_qp;
use adadif::walks::leave_one_out_walks;
use adadif::*;
use adadif_testkit as tk;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn graph(n: usize, edges: &[tk::Edge]) -> Graph {
    Graph::from_edges(n, edges.iter().copied()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn landing_probabilities_match_matrix_powers() {
    let mut rng = tk::rng(11);
    for _ in 0..20 {
        let edges = tk::random_connected(12, 0.2, true, &mut rng);
        let g = graph(12, &edges);
        let h = tk::dense_transition(&tk::dense_adjacency(12, &edges));
        let seeds = [0, 5, 7];
        let (p, dp) = landing_probabilities(&g, &SeedVector::new(12, &seeds).unwrap(), 5).unwrap();
        let dense = tk::dense_landing(&h, &tk::dense_seed(12, &seeds), 6);
        for k in 1..=5 {
            let col: Vec<f64> = dense.column(k - 1).iter().copied().collect();
            assert!(max_abs_diff(p.step(k), &col) < 1e-12);
            let next: Vec<f64> = dense.column(k).iter().copied().collect();
            let diff: Vec<f64> = col.iter().zip(&next).map(|(a, b)| a - b).collect();
            assert!(max_abs_diff(dp.step(k), &diff) < 1e-12);
        }
    }
}

#[test]
fn dictionary_column_matches_two_pass_weighted_sum() {
    let mut rng = tk::rng(12);
    let edges = tk::random_connected(30, 0.1, false, &mut rng);
    let g = graph(30, &edges);
    let seeds = SeedVector::new(30, &[3, 4]).unwrap();
    let hk = hk_coefficients(5.0, 20).unwrap();
    let dict = Dictionary::new(vec![hk.theta().to_vec()]).unwrap();
    let single = dictionary_diffusions(&g, &seeds, &dict).unwrap();
    let (p, _) = landing_probabilities(&g, &seeds, 20).unwrap();
    let two_pass = p.combine(hk.theta());
    assert!(max_abs_diff(&single[0], &two_pass) < 1e-12);
    assert!((single[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn leave_one_out_walks_match_dense_oracle_and_mean_identity() {
    let mut rng = tk::rng(13);
    for _ in 0..10 {
        let edges = tk::random_connected(20, 0.15, true, &mut rng);
        let g = graph(20, &edges);
        let h = tk::dense_transition(&tk::dense_adjacency(20, &edges));
        let class_seeds = [2, 9, 14];
        let rows: Vec<usize> = (0..20).collect();
        let walks = leave_one_out_walks(&g, &class_seeds, 4, &rows).unwrap();
        let full = tk::dense_landing(&h, &tk::dense_seed(20, &class_seeds), 4);
        let mut mean = DMatrix::zeros(20, 4);
        for w in &walks {
            let rest: Vec<usize> = class_seeds.iter().copied().filter(|&s| s != w.left_out).collect();
            let dense = tk::dense_landing(&h, &tk::dense_seed(20, &rest), 4);
            for k in 0..4 {
                let col: Vec<f64> = dense.column(k).iter().copied().collect();
                assert!(max_abs_diff(&w.values[k], &col) < 1e-12);
            }
            mean += dense / class_seeds.len() as f64;
        }
        assert!((mean - full).amax() < 1e-10);
    }
}

/// Dense `A = PᵀD†_L P + λ PᵀD⁻¹LD⁻¹P` and `b = −(2/|L|) PᵀD†_L y`.
fn dense_system(
    edges: &[tk::Edge],
    n: usize,
    labels: &LabeledSet,
    class: usize,
    k: usize,
    lambda: f64,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let w = tk::dense_adjacency(n, edges);
    let h = tk::dense_transition(&w);
    let d = tk::dense_degrees(&w);
    let p = tk::dense_landing(&h, &tk::dense_seed(n, &labels.seeds(class)), k);
    let mut d_l = DMatrix::zeros(n, n);
    let mut y = DVector::zeros(n);
    for &i in labels.nodes() {
        d_l[(i, i)] = 1.0 / d[i];
        if labels.labels_of(i).unwrap().contains(&class) {
            y[i] = 1.0 / labels.len() as f64;
        }
    }
    let d_inv = DMatrix::from_diagonal(&d.map(|x| 1.0 / x));
    let lap = tk::dense_laplacian(&w);
    let a = p.transpose() * &d_l * &p + p.transpose() * &d_inv * lap * &d_inv * &p * lambda;
    let b = -(p.transpose() * d_l * y) * 2.0;
    (a, b, p)
}

#[test]
fn assembled_system_matches_dense_formula() {
    let mut rng = tk::rng(14);
    for trial in 0..20 {
        let n = 15;
        let edges = tk::random_connected(n, 0.2, trial % 2 == 0, &mut rng);
        let g = graph(n, &edges);
        let pairs: Vec<(usize, usize)> = (0..n).step_by(2).map(|i| (i, (i / 2) % 3)).collect();
        let labels = LabeledSet::multiclass(n, 3, &pairs).unwrap();
        let lambda = rng.random_range(0.0..20.0);
        for class in 0..3 {
            let seeds = SeedVector::new(n, &labels.seeds(class)).unwrap();
            let (p, pt) = landing_probabilities(&g, &seeds, 4).unwrap();
            let sys = assemble_system(&g, &p, &pt, &labels, class, lambda).unwrap();
            let (a, b, _) = dense_system(&edges, n, &labels, class, 4, lambda);
            let a_sym = (&a + a.transpose()) * 0.5;
            let scale = a_sym.amax().max(1.0);
            assert!((sys.a() - a_sym).amax() / scale < 1e-10);
            assert!((sys.b() - b).amax() < 1e-12);
        }
    }
}

#[test]
fn quadratic_equals_loss_plus_smoothness_up_to_constant() {
    let mut rng = tk::rng(15);
    for _ in 0..20 {
        let n = 18;
        let edges = tk::random_connected(n, 0.2, true, &mut rng);
        let g = graph(n, &edges);
        let pairs: Vec<(usize, usize)> = (0..n).step_by(3).map(|i| (i, i % 2)).collect();
        let labels = LabeledSet::multiclass(n, 2, &pairs).unwrap();
        let lambda = rng.random_range(0.0..10.0);
        let seeds = SeedVector::new(n, &labels.seeds(0)).unwrap();
        let (p, pt) = landing_probabilities(&g, &seeds, 5).unwrap();
        let sys = assemble_system(&g, &p, &pt, &labels, 0, lambda).unwrap();
        let theta = DVector::from_vec(project_simplex(tk::random_vector(5, 1.0, &mut rng).as_slice()));
        let f = p.combine(theta.as_slice());

        let mut loss = 0.0;
        let mut constant = 0.0;
        for &i in labels.nodes() {
            let y = if labels.labels_of(i).unwrap()[0] == 0 { 1.0 / labels.len() as f64 } else { 0.0 };
            loss += (y - f[i]).powi(2) / g.degree(i);
            constant += y * y / g.degree(i);
        }
        let mut smooth = 0.0;
        for &(a, b, w) in &edges {
            smooth += w * (f[a] / g.degree(a) - f[b] / g.degree(b)).powi(2);
        }
        let lhs = sys.objective(&theta) + constant;
        assert!((lhs - (loss + lambda * smooth)).abs() < 1e-10, "{lhs} vs {}", loss + lambda * smooth);
    }
}

#[test]
fn laplacian_quadratic_matches_dense_form() {
    let mut rng = tk::rng(16);
    let edges = tk::random_connected(25, 0.1, true, &mut rng);
    let g = graph(25, &edges);
    let w = tk::dense_adjacency(25, &edges);
    let d_inv = DMatrix::from_diagonal(&tk::dense_degrees(&w).map(|d| 1.0 / d));
    let form = &d_inv * tk::dense_laplacian(&w) * &d_inv;
    let x = tk::random_vector(25, 1.0, &mut rng);
    let y = tk::random_vector(25, 1.0, &mut rng);
    let got = laplacian_quadratic(&g, x.as_slice(), y.as_slice());
    assert!((got - x.dot(&(&form * &y))).abs() < 1e-10);
}

#[test]
fn spectral_summary_matches_dense_eigenvalues() {
    let mut rng = tk::rng(17);
    for _ in 0..10 {
        let edges = tk::random_connected(40, 0.08, true, &mut rng);
        let g = graph(40, &edges);
        let ev = tk::normalized_laplacian_spectrum(&tk::dense_adjacency(40, &edges));
        let s = spectral_summary(&g, 1e-10).unwrap();
        assert!((s.mu2 - ev[1]).abs() < 1e-6, "{} vs {}", s.mu2, ev[1]);
        assert!((s.mu_n - ev[39]).abs() < 1e-6, "{} vs {}", s.mu_n, ev[39]);
        assert!((s.mu_prime - ev[1].min(2.0 - ev[39])).abs() < 1e-6);
    }
}

#[test]
fn ppr_matches_truncated_neumann_series() {
    let mut rng = tk::rng(18);
    for _ in 0..5 {
        let n = 60;
        let edges = tk::random_connected(n, 0.06, true, &mut rng);
        let g = graph(n, &edges);
        let h = tk::dense_transition(&tk::dense_adjacency(n, &edges));
        let labels = LabeledSet::multiclass(n, 2, &[(0, 0), (1, 0), (10, 1)]).unwrap();
        for (alpha, k) in [(0.98, 50), (0.5, 50), (0.85, 30)] {
            let fits = fit_fixed(&g, &labels, &ppr_coefficients(alpha, k).unwrap()).unwrap();
            for fit in &fits {
                let v = tk::dense_seed(n, &labels.seeds(fit.class));
                // Σ_{j=0}^{K} (αH)^j = (I − αH)^{-1}(I − (αH)^{K+1}).
                let ah = &h * alpha;
                let mut tail = DMatrix::identity(n, n);
                for _ in 0..=k {
                    tail = &ah * tail;
                }
                let resolvent = (DMatrix::identity(n, n) - &ah).lu().solve(&DMatrix::identity(n, n)).unwrap();
                let series = resolvent * (DMatrix::identity(n, n) - tail) * &v;
                let without_first = series - &v;
                let expected = &without_first / without_first.sum();
                assert!(max_abs_diff(&fit.scores, expected.as_slice()) < 1e-6);
            }
        }
    }
}

#[test]
fn small_alpha_ppr_matches_plain_resolvent() {
    let mut rng = tk::rng(19);
    let n = 50;
    let edges = tk::random_connected(n, 0.08, false, &mut rng);
    let g = graph(n, &edges);
    let h = tk::dense_transition(&tk::dense_adjacency(n, &edges));
    let labels = LabeledSet::multiclass(n, 1, &[(3, 0)]).unwrap();
    let alpha = 0.5;
    let fits = fit_fixed(&g, &labels, &ppr_coefficients(alpha, 50).unwrap()).unwrap();
    let v = tk::dense_seed(n, &[3]);
    let full = (DMatrix::identity(n, n) - &h * alpha).lu().solve(&v).unwrap() * (1.0 - alpha);
    let without_first = full - &v * (1.0 - alpha);
    let expected = &without_first / without_first.sum();
    assert!(max_abs_diff(&fits[0].scores, expected.as_slice()) < 1e-6);
}

#[test]
fn heat_kernel_matches_matrix_exponential() {
    let mut rng = tk::rng(20);
    for _ in 0..5 {
        let n = 80;
        let edges = tk::random_connected(n, 0.05, true, &mut rng);
        let g = graph(n, &edges);
        let h = tk::dense_transition(&tk::dense_adjacency(n, &edges));
        let labels = LabeledSet::multiclass(n, 1, &[(4, 0), (40, 0)]).unwrap();
        for t in [1.0, 5.0, 10.0] {
            let fits = fit_fixed(&g, &labels, &hk_coefficients(t, 50).unwrap()).unwrap();
            let v = tk::dense_seed(n, &[4, 40]);
            let heat = tk::expm(&((&h - DMatrix::identity(n, n)) * t)) * &v;
            // Drop the k = 0 term e^{-t} v and renormalize.
            let without_first = heat - &v * (-t).exp();
            let expected = &without_first / without_first.sum();
            assert!(max_abs_diff(&fits[0].scores, expected.as_slice()) < 1e-6);
        }
    }
}

#[test]
fn loo_matrix_matches_dense_oracle() {
    let mut rng = tk::rng(21);
    let n = 12;
    let edges = tk::random_connected(n, 0.25, true, &mut rng);
    let g = graph(n, &edges);
    let h = tk::dense_transition(&tk::dense_adjacency(n, &edges));
    let labels = LabeledSet::multiclass(n, 2, &[(0, 0), (3, 0), (5, 1), (7, 0), (9, 1)]).unwrap();
    for class in 0..2 {
        let r = build_loo_matrix(&g, &labels, class, 4).unwrap();
        let seeds = labels.seeds(class);
        let full = tk::dense_landing(&h, &tk::dense_seed(n, &seeds), 4);
        for (row, &i) in labels.nodes().iter().enumerate() {
            let source = if seeds.contains(&i) {
                let rest: Vec<usize> = seeds.iter().copied().filter(|&s| s != i).collect();
                tk::dense_landing(&h, &tk::dense_seed(n, &rest), 4)
            } else {
                full.clone()
            };
            for k in 0..4 {
                assert!((r.rows[(row, k)] - source[(i, k)]).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&r.rows[(row, k)]));
            }
        }
        // Weighted average of seed rows recovers the full walk at labeled nodes.
        for k in 0..4 {
            for &i in labels.nodes() {
                let mean: f64 = seeds
                    .iter()
                    .map(|&s| {
                        let rest: Vec<usize> = seeds.iter().copied().filter(|&x| x != s).collect();
                        tk::dense_landing(&h, &tk::dense_seed(n, &rest), 4)[(i, k)]
                    })
                    .sum::<f64>()
                    / seeds.len() as f64;
                assert!((mean - full[(i, k)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn robust_loss_matches_naive_sum() {
    let mut rng = tk::rng(22);
    let n = 20;
    let edges = tk::random_connected(n, 0.2, true, &mut rng);
    let g = graph(n, &edges);
    let labels = LabeledSet::multiclass(n, 2, &[(1, 0), (2, 0), (6, 1), (8, 1), (11, 0)]).unwrap();
    let r = build_loo_matrix(&g, &labels, 0, 5).unwrap();
    for _ in 0..20 {
        let o = tk::random_vector(labels.len(), 0.1, &mut rng);
        let theta = project_simplex(tk::random_vector(5, 1.0, &mut rng).as_slice());
        let mut naive = 0.0;
        for (row, &i) in labels.nodes().iter().enumerate() {
            let y = if labels.labels_of(i).unwrap()[0] == 0 { 1.0 / labels.len() as f64 } else { 0.0 };
            let fit: f64 = (0..5).map(|k| r.rows[(row, k)] * theta[k]).sum();
            naive += (o[row] + y - fit).powi(2) / g.degree(i);
        }
        let got = robust_loss(&g, &r, &labels, o.as_slice(), &theta);
        assert!((got - naive).abs() < 1e-12);
    }
}

#[test]
fn hyperplane_solution_matches_null_space_oracle() {
    let mut rng = tk::rng(23);
    for _ in 0..50 {
        let k = rng.random_range(2..7);
        let a = tk::random_psd(k, k + 2, &mut rng) + DMatrix::identity(k, k) * 0.01;
        let b = tk::random_vector(k, 1.0, &mut rng);
        let sys = QuadraticSystem::new(a.clone(), b.clone()).unwrap();
        let th = solve_hyperplane_qp(&sys, 0.0).unwrap();
        let oracle = tk::equality_constrained_min(&a, &b).unwrap();
        assert!(max_abs_diff(th.theta(), oracle.as_slice()) < 1e-8);
    }
}

#[test]
fn theorem_bound_worked_example() {
    let inputs = BoundInputs {
        gamma: 0.1,
        d_max: 4.0,
        d_min_plus: 2.0,
        d_min_minus: 2.0,
        n_plus: 1,
        n_minus: 1,
        mu_prime: 0.5,
        alpha: None,
    };
    // Independent evaluation of the closed form.
    let direct = ((2.0 * 2.0 / 0.1) * (2.0 / 2f64.sqrt())).ln() / 0.5;
    assert_eq!(direct.ceil() as usize, 9);
    assert_eq!(kgamma_bound(&inputs).unwrap(), 9);
}
