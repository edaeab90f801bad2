//! Random graph generators and dense reference computations for tests.
//!
//! Everything here works on plain edge lists and dense matrices so that the
//! oracles share no code with the library under test.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Edge = (usize, usize, f64);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected, non-bipartite graph: a random spanning tree, the triangle
/// 0–1–2, and each remaining pair with probability `p`. Weights are 1 unless
/// `weighted`, in which case they are uniform in [0.5, 2].
pub fn random_connected(n: usize, p: f64, weighted: bool, rng: &mut impl Rng) -> Vec<Edge> {
    assert!(n >= 3, "need at least 3 nodes");
    let mut present = vec![false; n * n];
    let mut edges = Vec::new();
    let mut add = |a: usize, b: usize, rng: &mut dyn rand::RngCore, edges: &mut Vec<Edge>| {
        let (a, b) = (a.min(b), a.max(b));
        if a == b || present[a * n + b] {
            return;
        }
        present[a * n + b] = true;
        let w = if weighted { rng.random_range(0.5..2.0) } else { 1.0 };
        edges.push((a, b, w));
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        add(order[i], parent, rng, &mut edges);
    }
    add(0, 1, rng, &mut edges);
    add(1, 2, rng, &mut edges);
    add(0, 2, rng, &mut edges);
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.random_bool(p) {
                add(a, b, rng, &mut edges);
            }
        }
    }
    edges
}

/// Random geometric graph on the unit square: points closer than `radius`
/// are joined. Components are then chained by their closest point pairs,
/// so the result is connected.
pub fn random_geometric(n: usize, radius: f64, rng: &mut impl Rng) -> Vec<Edge> {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let dist = |a: usize, b: usize| ((pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2)).sqrt();
    let mut edges = Vec::new();
    let mut comp: Vec<usize> = (0..n).collect();
    fn root(comp: &mut [usize], mut i: usize) -> usize {
        while comp[i] != i {
            comp[i] = comp[comp[i]];
            i = comp[i];
        }
        i
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if dist(a, b) < radius {
                edges.push((a, b, 1.0));
                let (ra, rb) = (root(&mut comp, a), root(&mut comp, b));
                comp[ra] = rb;
            }
        }
    }
    loop {
        let r0 = root(&mut comp, 0);
        let outside: Vec<usize> = (0..n).filter(|&i| root(&mut comp, i) != r0).collect();
        if outside.is_empty() {
            return edges;
        }
        let inside: Vec<usize> = (0..n).filter(|&i| root(&mut comp, i) == r0).collect();
        let (a, b) = inside
            .iter()
            .flat_map(|&a| outside.iter().map(move |&b| (a, b)))
            .min_by(|x, y| dist(x.0, x.1).total_cmp(&dist(y.0, y.1)))
            .unwrap();
        edges.push((a.min(b), a.max(b), 1.0));
        let (ra, rb) = (root(&mut comp, a), root(&mut comp, b));
        comp[rb] = ra;
    }
}

/// Eigenvalues of `H = W D^{-1}`, descending.
pub fn transition_spectrum(w: &DMatrix<f64>) -> Vec<f64> {
    normalized_laplacian_spectrum(w).iter().map(|mu| 1.0 - mu).collect()
}

/// Connected stochastic block model. Each block is made connected by a
/// path through its members and consecutive blocks are joined by one edge;
/// other pairs link with probability `p_in` or `p_out`. Returns the edges
/// and the block of each node.
pub fn connected_sbm(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    rng: &mut impl Rng,
) -> (Vec<Edge>, Vec<usize>) {
    let block: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = block.len();
    let mut present = std::collections::HashSet::new();
    let mut edges = Vec::new();
    let mut push = |a: usize, b: usize, edges: &mut Vec<Edge>| {
        let key = (a.min(b), a.max(b));
        if a != b && present.insert(key) {
            edges.push((key.0, key.1, 1.0));
        }
    };
    let mut start = 0;
    for &s in sizes {
        for i in start + 1..start + s {
            push(i - 1, i, &mut edges);
        }
        if start > 0 {
            push(start - 1, start, &mut edges);
        }
        start += s;
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let p = if block[a] == block[b] { p_in } else { p_out };
            if rng.random_bool(p) {
                push(a, b, &mut edges);
            }
        }
    }
    (edges, block)
}

/// Odd ring of `n` nodes plus random chords until `m` edges in total.
pub fn ring_with_chords(n: usize, m: usize, rng: &mut impl Rng) -> Vec<Edge> {
    assert!(n >= 3 && n % 2 == 1, "ring length must be odd and at least 3");
    assert!(m >= n, "need at least the ring edges");
    let mut present = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(m);
    for i in 0..n {
        let (a, b) = (i.min((i + 1) % n), i.max((i + 1) % n));
        present.insert((a, b));
        edges.push((a, b, 1.0));
    }
    while edges.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && present.insert(key) {
            edges.push((key.0, key.1, 1.0));
        }
    }
    edges
}

/// Symmetric weighted adjacency; duplicate edges sum, a self-loop adds its
/// weight once to the diagonal.
pub fn dense_adjacency(n: usize, edges: &[Edge]) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for &(a, b, x) in edges {
        w[(a, b)] += x;
        if a != b {
            w[(b, a)] += x;
        }
    }
    w
}

pub fn dense_degrees(w: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(w.nrows(), w.row_iter().map(|r| r.sum()))
}

/// `H = W D⁻¹`.
pub fn dense_transition(w: &DMatrix<f64>) -> DMatrix<f64> {
    let d = dense_degrees(w);
    DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] / d[j])
}

/// `L = D − W`.
pub fn dense_laplacian(w: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&dense_degrees(w)) - w
}

/// Uniform distribution on `seeds`.
pub fn dense_seed(n: usize, seeds: &[usize]) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    for &s in seeds {
        v[s] = 1.0 / seeds.len() as f64;
    }
    v
}

/// `[H v, H² v, …, H^K v]` as an N×K matrix.
pub fn dense_landing(h: &DMatrix<f64>, v: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(v.len(), k);
    let mut power = DMatrix::identity(h.nrows(), h.ncols());
    for j in 0..k {
        power = h * &power;
        out.set_column(j, &(&power * v));
    }
    out
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of `I − D^{-1/2} W D^{-1/2}`, ascending.
pub fn normalized_laplacian_spectrum(w: &DMatrix<f64>) -> Vec<f64> {
    let d = dense_degrees(w);
    let n = w.nrows();
    let s = DMatrix::from_fn(n, n, |i, j| w[(i, j)] / (d[i] * d[j]).sqrt());
    symmetric_eigenvalues(&(DMatrix::identity(n, n) - s))
}

pub fn quadratic_objective(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x)) + x.dot(b)
}

/// Minimizer of `xᵀAx + xᵀb` on `{1ᵀx = 1}` by null-space elimination:
/// `x = e_0 + Z z` with `Z` spanning `{1ᵀz = 0}`. Returns `None` when the
/// reduced Hessian is singular.
pub fn equality_constrained_min(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let k = b.len();
    let mut x0 = DVector::zeros(k);
    x0[0] = 1.0;
    if k == 1 {
        return Some(x0);
    }
    let z = DMatrix::from_fn(k, k - 1, |i, j| {
        if i == 0 {
            -1.0
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let reduced = z.transpose() * a * &z * 2.0;
    let rhs = -(z.transpose() * (a * &x0 * 2.0 + b));
    let chol = reduced.clone().cholesky()?;
    let sol = chol.solve(&rhs);
    Some(x0 + z * sol)
}

/// Minimizer of `xᵀAx + xᵀb` over the simplex for PSD `A`, found by trying
/// every support and keeping the best feasible stationary point.
pub fn simplex_qp_by_enumeration(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = b.len();
    assert!(k <= 16, "enumeration is exponential in K");
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        let s = support.len();
        let a_s = DMatrix::from_fn(s, s, |r, c| a[(support[r], support[c])]);
        let b_s = DVector::from_fn(s, |r, _| b[support[r]]);
        let Some(x_s) = equality_constrained_min(&a_s, &b_s) else {
            continue;
        };
        if x_s.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut x = DVector::zeros(k);
        for (r, &i) in support.iter().enumerate() {
            x[i] = x_s[r].max(0.0);
        }
        let f = quadratic_objective(a, b, &x);
        if best.as_ref().is_none_or(|(fb, _)| f < *fb) {
            best = Some((f, x));
        }
    }
    best.expect("the vertices are always candidates").1
}

/// Euclidean projection onto the simplex as the QP `min ‖y − x‖²`.
pub fn projection_by_enumeration(x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let a = DMatrix::identity(k, k);
    let b = DVector::from_iterator(k, x.iter().map(|v| -2.0 * v));
    simplex_qp_by_enumeration(&a, &b).iter().copied().collect()
}

/// Random symmetric positive semidefinite matrix `GᵀG/K` with optional
/// rank deficiency.
pub fn random_psd(k: usize, rank: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rank, k, |_, _| rng.random_range(-1.0..1.0));
    g.transpose() * g / k as f64
}

pub fn random_vector(k: usize, scale: f64, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(k, |_, _| rng.random_range(-scale..scale))
}

/// `e^{M}` by nalgebra's scaling-and-squaring Padé routine.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().exp()
}
