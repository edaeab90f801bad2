//! Sparse undirected weighted graphs.
//!
//! Adjacency is kept in compressed sparse row form with both directions of
//! every edge stored (a self-loop is stored once). All random-walk work goes
//! through [`Graph::apply_transition`], which computes `H x = W D^{-1} x`
//! without materializing `H`.

use std::collections::VecDeque;
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default residual tolerance for the extremal eigenvalue estimates.
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-8;
/// Iteration cap for each power iteration in [`spectral_summary`].
pub const MAX_POWER_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    num_edges: usize,
    /// Original (file) id of each internal node.
    original_ids: Vec<u64>,
    /// Number of edge records read from the source, before merging duplicates.
    edge_records: usize,
}

impl Graph {
    /// Builds a graph on nodes `0..num_nodes` from `(u, v, w)` triples.
    ///
    /// Repeated pairs (in either orientation) have their weights summed.
    /// Every node must end up with positive degree.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut list = Vec::new();
        for (u, v, w) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            list.push((u.min(v), u.max(v), w));
        }
        let records = list.len();
        let ids = (0..num_nodes as u64).collect();
        Self::build(num_nodes, list, ids, records)
    }

    fn build(
        n: usize,
        mut list: Vec<(usize, usize, f64)>,
        original_ids: Vec<u64>,
        edge_records: usize,
    ) -> Result<Graph> {
        if n == 0 {
            return Err(Error::DegenerateGraph("graph has no nodes".into()));
        }
        list.sort_unstable_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(list.len());
        for (u, v, w) in list {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += w,
                _ => merged.push((u, v, w)),
            }
        }

        let mut counts = vec![0usize; n];
        for &(u, v, _) in &merged {
            counts[u] += 1;
            if u != v {
                counts[v] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let nnz = *offsets.last().unwrap();
        let mut neighbors = vec![0usize; nnz];
        let mut weights = vec![0.0f64; nnz];
        let mut cursor = offsets[..n].to_vec();
        for &(u, v, w) in &merged {
            neighbors[cursor[u]] = v;
            weights[cursor[u]] = w;
            cursor[u] += 1;
            if u != v {
                neighbors[cursor[v]] = u;
                weights[cursor[v]] = w;
                cursor[v] += 1;
            }
        }
        // Rows filled from sorted (u, v) pairs are already ordered by neighbor
        // for the forward direction; reverse entries need a per-row sort.
        for i in 0..n {
            let (s, e) = (offsets[i], offsets[i + 1]);
            let mut row: Vec<(usize, f64)> = neighbors[s..e]
                .iter()
                .copied()
                .zip(weights[s..e].iter().copied())
                .collect();
            row.sort_unstable_by_key(|&(j, _)| j);
            for (k, (j, w)) in row.into_iter().enumerate() {
                neighbors[s + k] = j;
                weights[s + k] = w;
            }
        }

        let degrees: Vec<f64> = (0..n)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::DegenerateGraph(format!(
                "node {} (original id {}) is isolated",
                i, original_ids[i]
            )));
        }

        Ok(Graph {
            offsets,
            neighbors,
            weights,
            degrees,
            num_edges: merged.len(),
            original_ids,
            edge_records,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.degrees.len()
    }

    /// Undirected edge count, each edge (and self-loop) counted once.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Number of stored adjacency entries (both directions of each edge).
    pub fn num_entries(&self) -> usize {
        self.neighbors.len()
    }

    /// Edge records in the source before duplicate merging.
    pub fn edge_records(&self) -> usize {
        self.edge_records
    }

    /// Weighted degree `d_i = Σ_k W_ki`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_degree(&self) -> f64 {
        self.degrees.iter().sum()
    }

    /// Neighbors of `i` with their edge weights, sorted by neighbor index.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.offsets[i], self.offsets[i + 1]);
        self.neighbors[s..e]
            .iter()
            .copied()
            .zip(self.weights[s..e].iter().copied())
    }

    pub fn original_id(&self, i: usize) -> u64 {
        self.original_ids[i]
    }

    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    /// Internal index of an original node id.
    pub fn index_of(&self, original: u64) -> Option<usize> {
        // ids are assigned in ascending original order on load
        self.original_ids.binary_search(&original).ok()
    }

    /// `H x` with `H = W D^{-1}`.
    pub fn apply_transition(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        self.apply_transition_into(x, &mut out);
        out
    }

    /// `H x` written into `out`. O(|E|).
    pub fn apply_transition_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.num_nodes();
        assert_eq!(x.len(), n, "vector length must equal node count");
        assert_eq!(out.len(), n, "output length must equal node count");
        for (i, slot) in out.iter_mut().enumerate() {
            let (s, e) = (self.offsets[i], self.offsets[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                let j = self.neighbors[k];
                acc += self.weights[k] * x[j] / self.degrees[j];
            }
            *slot = acc;
        }
    }

    /// Symmetric normalized adjacency `D^{-1/2} W D^{-1/2} x`.
    fn apply_normalized_adjacency(&self, x: &[f64], inv_sqrt_deg: &[f64], out: &mut [f64]) {
        for i in 0..self.num_nodes() {
            let (s, e) = (self.offsets[i], self.offsets[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                let j = self.neighbors[k];
                acc += self.weights[k] * inv_sqrt_deg[j] * x[j];
            }
            out[i] = acc * inv_sqrt_deg[i];
        }
    }

    /// Connected component label for every node, numbered by first appearance.
    pub fn connected_components(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut label = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn num_components(&self) -> usize {
        self.connected_components()
            .into_iter()
            .max()
            .map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.num_components() == 1
    }

    /// Two-colorability test. A self-loop makes a graph non-bipartite.
    pub fn is_bipartite(&self) -> bool {
        let n = self.num_nodes();
        let mut color = vec![u8::MAX; n];
        let mut queue = VecDeque::new();
        for start in 0..n {
            if color[start] != u8::MAX {
                continue;
            }
            color[start] = 0;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if color[v] == u8::MAX {
                        color[v] = 1 - color[u];
                        queue.push_back(v);
                    } else if color[v] == color[u] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Induced subgraph on `nodes` (internal indices). The returned graph
    /// keeps the original ids; node order follows ascending original id.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let mut keep: Vec<usize> = nodes.to_vec();
        keep.sort_unstable_by_key(|&i| self.original_ids[i]);
        keep.dedup();
        let mut position = vec![usize::MAX; self.num_nodes()];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = new;
        }
        let mut list = Vec::new();
        for &old in &keep {
            for (j, w) in self.neighbors(old) {
                let (a, b) = (position[old], position[j]);
                if b != usize::MAX && a <= b {
                    list.push((a, b, w));
                }
            }
        }
        let records = list.len();
        let ids = keep.iter().map(|&i| self.original_ids[i]).collect();
        Self::build(keep.len(), list, ids, records)
    }

    /// Largest connected component as a standalone graph, together with the
    /// parent-graph index of each of its nodes.
    pub fn largest_component(&self) -> Result<(Graph, Vec<usize>)> {
        let labels = self.connected_components();
        let count = labels.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        let best = (0..count).max_by_key(|&c| (sizes[c], usize::MAX - c)).unwrap_or(0);
        let members: Vec<usize> = (0..self.num_nodes()).filter(|&i| labels[i] == best).collect();
        let sub = self.induced_subgraph(&members)?;
        let mapping = sub
            .original_ids()
            .iter()
            .map(|&id| self.index_of(id).expect("subgraph ids come from parent"))
            .collect();
        Ok((sub, mapping))
    }
}

/// Reads a whitespace-delimited edge list.
///
/// Each non-comment line is `u v` or `u v w` with non-negative integer ids;
/// `#` starts a comment. Ids are remapped to `0..N` in ascending order of
/// the original id.
pub fn load_graph<R: BufRead>(reader: R) -> Result<Graph> {
    let mut raw: Vec<(u64, u64, f64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Format {
                line: lineno,
                message: format!("expected 'u v' or 'u v w', found {} fields", fields.len()),
            });
        }
        let parse_id = |s: &str| {
            s.parse::<u64>().map_err(|_| Error::Format {
                line: lineno,
                message: format!("invalid node id '{s}'"),
            })
        };
        let u = parse_id(fields[0])?;
        let v = parse_id(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => s.parse::<f64>().map_err(|_| Error::Format {
                line: lineno,
                message: format!("invalid weight '{s}'"),
            })?,
            None => 1.0,
        };
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Format {
                line: lineno,
                message: format!("edge weight must be positive, found {w}"),
            });
        }
        raw.push((u, v, w));
    }

    let mut ids: Vec<u64> = raw.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let index = |id: u64| ids.binary_search(&id).expect("id collected above");
    let records = raw.len();
    let list = raw
        .into_iter()
        .map(|(u, v, w)| {
            let (a, b) = (index(u), index(v));
            (a.min(b), a.max(b), w)
        })
        .collect();
    Graph::build(ids.len(), list, ids, records)
}

/// `H x`; see [`Graph::apply_transition`].
pub fn apply_transition(g: &Graph, x: &[f64]) -> Vec<f64> {
    g.apply_transition(x)
}

/// Steady-state distribution `π_i = d_i / Σ_j d_j`.
pub fn stationary_distribution(g: &Graph) -> Vec<f64> {
    let total = g.total_degree();
    g.degrees().iter().map(|d| d / total).collect()
}

/// `(D^{-1}x)ᵀ L (D^{-1}y)` evaluated edge by edge.
pub fn laplacian_quadratic(g: &Graph, x: &[f64], y: &[f64]) -> f64 {
    let n = g.num_nodes();
    assert_eq!(x.len(), n);
    assert_eq!(y.len(), n);
    let d = g.degrees();
    let mut acc = 0.0;
    for i in 0..n {
        let xi = x[i] / d[i];
        let yi = y[i] / d[i];
        for (j, w) in g.neighbors(i) {
            acc += w * (xi - x[j] / d[j]) * (yi - y[j] / d[j]);
        }
    }
    0.5 * acc
}

/// Extremal eigenvalues of the normalized Laplacian `I − D^{-1/2} W D^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralSummary {
    /// Second-smallest eigenvalue μ₂.
    pub mu2: f64,
    /// Largest eigenvalue μ_N.
    pub mu_n: f64,
    /// `min{μ₂, 2 − μ_N}`.
    pub mu_prime: f64,
    pub residual_mu2: f64,
    pub residual_mu_n: f64,
}

pub fn spectral_summary(g: &Graph, tol: f64) -> Result<SpectralSummary> {
    spectral_summary_with(g, tol, MAX_POWER_ITERATIONS)
}

/// Power iteration for μ₂ (on `I + S` with the top eigenvector deflated)
/// and μ_N (on `I − S`), where `S = D^{-1/2} W D^{-1/2}`.
pub fn spectral_summary_with(g: &Graph, tol: f64, max_iter: usize) -> Result<SpectralSummary> {
    let components = g.num_components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::DegenerateGraph("spectrum needs at least two nodes".into()));
    }
    let inv_sqrt: Vec<f64> = g.degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
    let total = g.total_degree();
    let q1: Vec<f64> = g.degrees().iter().map(|d| (d / total).sqrt()).collect();

    // I + S has spectrum 2 − μ_n in [0, 2]; after removing q1 its top
    // eigenvalue is 2 − μ₂.
    let (top, residual_mu2) = power_iteration(
        n,
        Some(&q1),
        tol,
        max_iter,
        "power iteration for mu2",
        |x, out| {
            g.apply_normalized_adjacency(x, &inv_sqrt, out);
            for (o, xi) in out.iter_mut().zip(x) {
                *o += xi;
            }
        },
    )?;
    let mu2 = (2.0 - top).max(0.0);

    let (mu_n, residual_mu_n) = if g.is_bipartite() {
        (2.0, 0.0)
    } else {
        let (val, res) = power_iteration(
            n,
            None,
            tol,
            max_iter,
            "power iteration for muN",
            |x, out| {
                g.apply_normalized_adjacency(x, &inv_sqrt, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi - *o;
                }
            },
        )?;
        (val.min(2.0), res)
    };

    Ok(SpectralSummary {
        mu2,
        mu_n,
        mu_prime: mu2.min(2.0 - mu_n),
        residual_mu2,
        residual_mu_n,
    })
}

/// Dominant eigenvalue of a symmetric PSD operator, optionally restricted to
/// the orthogonal complement of a unit vector. Returns `(rayleigh, residual)`.
fn power_iteration<F>(
    n: usize,
    deflate: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    what: &'static str,
    mut apply: F,
) -> Result<(f64, f64)>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let project = |v: &mut [f64]| {
        if let Some(q) = deflate {
            let c: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
    };
    // deterministic, well-spread start vector
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            ((h >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect();
    project(&mut x);
    normalize(&mut x);
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        apply(&x, &mut y);
        project(&mut y);
        let rho: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - rho * a).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol {
            return Ok((rho, residual));
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            // x lies in the null space; the dominant eigenvalue is 0
            return Ok((0.0, 0.0));
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    Err(Error::NotConverged {
        what,
        iterations: max_iter,
        residual,
    })
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Graph> {
        load_graph(s.as_bytes())
    }

    #[test]
    fn path_graph_from_text() {
        let g = parse("0 1\n1 2").unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn duplicate_edges_sum_weights() {
        let g = parse("0 1 2\n0 1 3").unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.degrees(), &[5.0, 5.0]);
        assert_eq!(g.edge_records(), 2);
        // reversed orientation is the same undirected edge
        let g = parse("0 1\n1 0").unwrap();
        assert_eq!(g.degrees(), &[2.0, 2.0]);
    }

    #[test]
    fn comments_and_remapping() {
        let g = parse("# header\n10 30 # trailing\n\n30 20\n").unwrap();
        assert_eq!(g.original_ids(), &[10, 20, 30]);
        assert_eq!(g.index_of(30), Some(2));
        assert_eq!(g.index_of(11), None);
        assert_eq!(g.degrees(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_weights_and_fields() {
        assert!(matches!(parse("0 1 0"), Err(Error::Format { line: 1, .. })));
        assert!(matches!(parse("0 1\n1 2 -3"), Err(Error::Format { line: 2, .. })));
        assert!(matches!(parse("0 1 1 1"), Err(Error::Format { .. })));
        assert!(matches!(parse("0 x"), Err(Error::Format { .. })));
        assert!(matches!(parse("-1 2"), Err(Error::Format { .. })));
    }

    #[test]
    fn rejects_isolated_and_empty() {
        assert!(matches!(
            Graph::from_edges(3, [(0, 1, 1.0)]),
            Err(Error::DegenerateGraph(_))
        ));
        assert!(matches!(parse("# nothing\n"), Err(Error::DegenerateGraph(_))));
    }

    #[test]
    fn self_loops_are_allowed() {
        let g = Graph::from_edges(2, [(0, 0, 2.0), (0, 1, 1.0)]).unwrap();
        assert_eq!(g.degrees(), &[3.0, 1.0]);
        assert_eq!(g.num_edges(), 2);
        assert!(!g.is_bipartite());
        let y = g.apply_transition(&[1.0, 0.0]);
        assert!((y[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((y[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_transition() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(g.apply_transition(&[1.0, 0.0, 0.0]), vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn stationary_is_fixed_point() {
        let g = parse("0 1\n1 2\n2 3\n3 0\n0 2").unwrap();
        let pi = stationary_distribution(&g);
        let next = g.apply_transition(&pi);
        for (a, b) in pi.iter().zip(&next) {
            assert!((a - b).abs() < 1e-15);
        }
        let path = parse("0 1\n1 2").unwrap();
        assert_eq!(stationary_distribution(&path), vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn laplacian_form_annihilates_degree_vector() {
        let g = parse("0 1\n1 2\n2 0\n2 3").unwrap();
        let d = g.degrees().to_vec();
        assert!(laplacian_quadratic(&g, &d, &d).abs() < 1e-15);
        let path = parse("0 1\n1 2").unwrap();
        // (1/1 − 0/2)² on edge (0,1), nothing else
        assert!((laplacian_quadratic(&path, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn components_and_subgraphs() {
        let g = parse("0 1\n1 2\n5 6").unwrap();
        assert_eq!(g.num_components(), 2);
        assert!(matches!(
            spectral_summary(&g, 1e-8),
            Err(Error::Disconnected { components: 2 })
        ));
        let (lcc, map) = g.largest_component().unwrap();
        assert_eq!(lcc.num_nodes(), 3);
        assert_eq!(lcc.original_ids(), &[0, 1, 2]);
        assert_eq!(map, vec![0, 1, 2]);
    }

    #[test]
    fn complete_graph_spectrum() {
        let edges = (0..4).flat_map(|i| ((i + 1)..4).map(move |j| (i, j, 1.0)));
        let g = Graph::from_edges(4, edges).unwrap();
        let s = spectral_summary(&g, 1e-10).unwrap();
        assert!((s.mu2 - 4.0 / 3.0).abs() < 1e-8);
        assert!((s.mu_n - 4.0 / 3.0).abs() < 1e-8);
        assert!((s.mu_prime - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn path_spectrum_is_bipartite() {
        let g = parse("0 1\n1 2").unwrap();
        let s = spectral_summary(&g, 1e-10).unwrap();
        assert!((s.mu2 - 1.0).abs() < 1e-8);
        assert_eq!(s.mu_n, 2.0);
        assert_eq!(s.mu_prime, 0.0);
    }
}
