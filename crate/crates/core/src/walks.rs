//! Landing probabilities of random walks seeded on node sets.

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Tolerance for a dictionary column to count as lying on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-8;

/// Uniform distribution over a seed set: `1/|S|` on `S`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedVector {
    num_nodes: usize,
    nodes: Vec<usize>,
}

impl SeedVector {
    pub fn new(num_nodes: usize, nodes: &[usize]) -> Result<SeedVector> {
        let mut nodes = nodes.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::invalid("seed set is empty"));
        }
        if let Some(&bad) = nodes.iter().find(|&&i| i >= num_nodes) {
            return Err(Error::invalid(format!(
                "seed node {bad} out of range for {num_nodes} nodes"
            )));
        }
        Ok(SeedVector { num_nodes, nodes })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_nodes];
        let mass = 1.0 / self.nodes.len() as f64;
        for &i in &self.nodes {
            v[i] = mass;
        }
        v
    }
}

/// Columns `p^(1) .. p^(K)` of `H^k v`, plus the extra step `p^(K+1)`.
#[derive(Debug, Clone)]
pub struct LandingProbMatrix {
    columns: Vec<Vec<f64>>,
    next: Vec<f64>,
}

impl LandingProbMatrix {
    /// Number of steps `K`.
    pub fn steps(&self) -> usize {
        self.columns.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.next.len()
    }

    /// `p^(k)` for `k` in `1..=K`.
    pub fn step(&self, k: usize) -> &[f64] {
        assert!(k >= 1 && k <= self.columns.len(), "step {k} out of range");
        &self.columns[k - 1]
    }

    /// `p^(K+1)`.
    pub fn next_step(&self) -> &[f64] {
        &self.next
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Row `i`: `[p^(1)_i, …, p^(K)_i]`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// `Σ_k θ_k p^(k)`.
    pub fn combine(&self, theta: &[f64]) -> Vec<f64> {
        combine_columns(&self.columns, theta)
    }
}

/// Differential landing probabilities `p̃^(k) = p^(k) − p^(k+1)`, `k = 1..K`.
#[derive(Debug, Clone)]
pub struct DifferentialMatrix {
    columns: Vec<Vec<f64>>,
}

impl DifferentialMatrix {
    pub fn steps(&self) -> usize {
        self.columns.len()
    }

    /// `p̃^(k)` for `k` in `1..=K`.
    pub fn step(&self, k: usize) -> &[f64] {
        &self.columns[k - 1]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

pub(crate) fn combine_columns(columns: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    assert_eq!(columns.len(), weights.len(), "one weight per column");
    let n = columns.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (col, &w) in columns.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(col) {
            *o += w * x;
        }
    }
    out
}

/// Runs the walk from `seeds` for `K + 1` steps and returns `P^(K)` and its
/// differentials. Each column is obtained from the previous one by a single
/// sparse transition apply.
pub fn landing_probabilities(
    g: &Graph,
    seeds: &SeedVector,
    k: usize,
) -> Result<(LandingProbMatrix, DifferentialMatrix)> {
    if k == 0 {
        return Err(Error::invalid("number of steps K must be at least 1"));
    }
    check_seed_graph(g, seeds)?;
    let n = g.num_nodes();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut current = seeds.to_dense();
    for _ in 0..k {
        let mut next = vec![0.0; n];
        g.apply_transition_into(&current, &mut next);
        columns.push(next.clone());
        current = next;
    }
    let mut last = vec![0.0; n];
    g.apply_transition_into(&current, &mut last);

    let differentials = (0..k)
        .map(|j| {
            let following = if j + 1 < k { &columns[j + 1] } else { &last };
            columns[j]
                .iter()
                .zip(following)
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    Ok((
        LandingProbMatrix {
            columns,
            next: last,
        },
        DifferentialMatrix {
            columns: differentials,
        },
    ))
}

/// K×D dictionary whose columns are coefficient vectors on the K-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    steps: usize,
    columns: Vec<Vec<f64>>,
}

impl Dictionary {
    /// Each column must have length `K`, be nonnegative and sum to one.
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Dictionary> {
        let steps = columns
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("dictionary has no columns"))?;
        if steps == 0 {
            return Err(Error::invalid("dictionary columns are empty"));
        }
        for (d, col) in columns.iter().enumerate() {
            if col.len() != steps {
                return Err(Error::invalid(format!(
                    "dictionary column {d} has length {}, expected {steps}",
                    col.len()
                )));
            }
            let sum: f64 = col.iter().sum();
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min >= -SIMPLEX_TOL && (sum - 1.0).abs() <= SIMPLEX_TOL) {
                return Err(Error::invalid(format!(
                    "dictionary column {d} is not on the simplex (min {min:.3e}, sum {sum:.12})"
                )));
            }
        }
        Ok(Dictionary { steps, columns })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn size(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, d: usize) -> &[f64] {
        &self.columns[d]
    }

    /// Coefficient vector `C θ` over the K steps.
    pub fn expand(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.size());
        (0..self.steps)
            .map(|k| {
                self.columns
                    .iter()
                    .zip(theta)
                    .map(|(c, t)| c[k] * t)
                    .sum()
            })
            .collect()
    }
}

/// `f^(d) = Σ_k C_kd p^(k)` for every dictionary column, accumulated in one
/// pass over the walk without storing the K landing-probability columns.
pub fn dictionary_diffusions(
    g: &Graph,
    seeds: &SeedVector,
    dictionary: &Dictionary,
) -> Result<Vec<Vec<f64>>> {
    check_seed_graph(g, seeds)?;
    let n = g.num_nodes();
    let mut out = vec![vec![0.0; n]; dictionary.size()];
    let mut current = seeds.to_dense();
    let mut next = vec![0.0; n];
    for k in 0..dictionary.steps() {
        g.apply_transition_into(&current, &mut next);
        std::mem::swap(&mut current, &mut next);
        for (d, f) in out.iter_mut().enumerate() {
            let c = dictionary.columns[d][k];
            if c == 0.0 {
                continue;
            }
            for (fi, pi) in f.iter_mut().zip(&current) {
                *fi += c * pi;
            }
        }
    }
    Ok(out)
}

/// Landing probabilities of one leave-one-out walk, kept only at a fixed
/// list of rows.
#[derive(Debug, Clone)]
pub struct RestrictedWalk {
    /// Node left out of the seed set.
    pub left_out: usize,
    /// `values[k-1][r]` is `p^(k)` at `rows[r]`.
    pub values: Vec<Vec<f64>>,
}

/// For each `i` in `class_seeds`, the K-step walk seeded uniformly on
/// `class_seeds ∖ {i}`, restricted to `rows`.
pub fn leave_one_out_walks(
    g: &Graph,
    class_seeds: &[usize],
    k: usize,
    rows: &[usize],
) -> Result<Vec<RestrictedWalk>> {
    use rayon::prelude::*;

    let mut seeds = class_seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.len() < 2 {
        return Err(Error::InsufficientSeeds {
            context: "leave-one-out seed set".into(),
            found: seeds.len(),
            needed: 2,
        });
    }
    if k == 0 {
        return Err(Error::invalid("number of steps K must be at least 1"));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= g.num_nodes()) {
        return Err(Error::invalid(format!("row {bad} out of range")));
    }
    seeds
        .par_iter()
        .map(|&left_out| {
            let rest: Vec<usize> = seeds.iter().copied().filter(|&j| j != left_out).collect();
            let seed = SeedVector::new(g.num_nodes(), &rest)?;
            let n = g.num_nodes();
            let mut current = seed.to_dense();
            let mut next = vec![0.0; n];
            let mut values = Vec::with_capacity(k);
            for _ in 0..k {
                g.apply_transition_into(&current, &mut next);
                std::mem::swap(&mut current, &mut next);
                values.push(rows.iter().map(|&r| current[r]).collect());
            }
            Ok(RestrictedWalk { left_out, values })
        })
        .collect()
}

fn check_seed_graph(g: &Graph, seeds: &SeedVector) -> Result<()> {
    if seeds.num_nodes != g.num_nodes() {
        return Err(Error::invalid(format!(
            "seed vector built for {} nodes, graph has {}",
            seeds.num_nodes,
            g.num_nodes()
        )));
    }
    Ok(())
}
