//! Adaptive and fixed diffusion classifiers built on landing probabilities.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::optim::{
    default_ridge, solve_hyperplane_qp, solve_simplex_qp, CoefficientVector, Constraint,
    QuadraticSystem, SolverOptions,
};
use crate::walks::{
    combine_columns, dictionary_diffusions, landing_probabilities, Dictionary,
    DifferentialMatrix, LandingProbMatrix, SeedVector,
};

/// Labeled nodes with their label sets over the classes `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    num_nodes: usize,
    num_classes: usize,
    multilabel: bool,
    nodes: Vec<usize>,
    labels: Vec<Vec<usize>>,
    position: Vec<Option<usize>>,
}

impl LabeledSet {
    /// One label per node. A node listed twice is an error.
    pub fn multiclass(
        num_nodes: usize,
        num_classes: usize,
        pairs: &[(usize, usize)],
    ) -> Result<LabeledSet> {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(format!(
                "node {} has more than one label in a multiclass set",
                w[0].0
            )));
        }
        let entries = sorted.into_iter().map(|(i, c)| (i, vec![c])).collect();
        LabeledSet::build(num_nodes, num_classes, false, entries)
    }

    /// Any nonempty label set per node; repeated node ids are merged.
    pub fn multilabel(
        num_nodes: usize,
        num_classes: usize,
        pairs: &[(usize, usize)],
    ) -> Result<LabeledSet> {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut entries: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, c) in sorted {
            match entries.last_mut() {
                Some((last, set)) if *last == i => set.push(c),
                _ => entries.push((i, vec![c])),
            }
        }
        LabeledSet::build(num_nodes, num_classes, true, entries)
    }

    fn build(
        num_nodes: usize,
        num_classes: usize,
        multilabel: bool,
        entries: Vec<(usize, Vec<usize>)>,
    ) -> Result<LabeledSet> {
        if entries.is_empty() {
            return Err(Error::invalid("labeled set is empty"));
        }
        let mut position = vec![None; num_nodes];
        let mut nodes = Vec::with_capacity(entries.len());
        let mut labels = Vec::with_capacity(entries.len());
        for (idx, (i, set)) in entries.into_iter().enumerate() {
            if i >= num_nodes {
                return Err(Error::invalid(format!(
                    "labeled node {i} out of range for {num_nodes} nodes"
                )));
            }
            if let Some(&c) = set.iter().find(|&&c| c >= num_classes) {
                return Err(Error::invalid(format!(
                    "label {c} out of range for {num_classes} classes"
                )));
            }
            position[i] = Some(idx);
            nodes.push(i);
            labels.push(set);
        }
        Ok(LabeledSet {
            num_nodes,
            num_classes,
            multilabel,
            nodes,
            labels,
            position,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_multilabel(&self) -> bool {
        self.multilabel
    }

    /// Labeled nodes in ascending order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of `node` within [`LabeledSet::nodes`].
    pub fn position(&self, node: usize) -> Option<usize> {
        self.position.get(node).copied().flatten()
    }

    pub fn is_labeled(&self, node: usize) -> bool {
        self.position(node).is_some()
    }

    pub fn labels_of(&self, node: usize) -> Option<&[usize]> {
        self.position(node).map(|p| self.labels[p].as_slice())
    }

    /// Label sets aligned with [`LabeledSet::nodes`].
    pub fn label_sets(&self) -> &[Vec<usize>] {
        &self.labels
    }

    /// `L_c`, ascending.
    pub fn seeds(&self, class: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .zip(&self.labels)
            .filter(|(_, set)| set.contains(&class))
            .map(|(&i, _)| i)
            .collect()
    }

    /// Classes with at least one seed.
    pub fn classes_in_use(&self) -> Vec<usize> {
        let mut used = vec![false; self.num_classes];
        for set in &self.labels {
            for &c in set {
                used[c] = true;
            }
        }
        (0..self.num_classes).filter(|&c| used[c]).collect()
    }

    /// `y_{L_c}` over labeled rows: 1 where the node carries `class`.
    pub fn indicator(&self, class: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|set| if set.contains(&class) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Copy with the given nodes' labels removed.
    pub fn without(&self, removed: &[usize]) -> Result<LabeledSet> {
        let entries = self
            .nodes
            .iter()
            .zip(&self.labels)
            .filter(|(i, _)| !removed.contains(i))
            .map(|(&i, set)| (i, set.clone()))
            .collect();
        LabeledSet::build(self.num_nodes, self.num_classes, self.multilabel, entries)
    }

    /// Copy with the label sets of some nodes replaced.
    pub fn relabeled(&self, changes: &[(usize, Vec<usize>)]) -> Result<LabeledSet> {
        let mut labels = self.labels.clone();
        for (node, set) in changes {
            let p = self
                .position(*node)
                .ok_or_else(|| Error::invalid(format!("node {node} is not labeled")))?;
            labels[p] = set.clone();
        }
        let entries = self.nodes.iter().copied().zip(labels).collect();
        LabeledSet::build(self.num_nodes, self.num_classes, self.multilabel, entries)
    }
}

/// Score vector `f_c` for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDiffusion {
    pub class: usize,
    pub scores: Vec<f64>,
    /// Coefficients over walk steps `1..=K`; absent for label propagation.
    pub coefficients: Option<CoefficientVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub k: usize,
    pub lambda: f64,
    pub dictionary: bool,
    pub unconstrained: bool,
    /// `None` selects [`default_ridge`].
    pub ridge: Option<f64>,
    pub solver: SolverOptions,
}

impl HyperParams {
    pub fn multiclass() -> HyperParams {
        HyperParams {
            k: 15,
            lambda: 15.0,
            dictionary: false,
            unconstrained: false,
            ridge: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn multilabel() -> HyperParams {
        HyperParams {
            k: 10,
            lambda: 5.0,
            ..HyperParams::multiclass()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::invalid(format!("ridge must be nonnegative, got {r}")));
            }
        }
        Ok(())
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams::multiclass()
    }
}

/// `θ_k ∝ α^k`, `k = 1..K`.
pub fn ppr_coefficients(alpha: f64, k: usize) -> Result<CoefficientVector> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let log_weights: Vec<f64> = (1..=k).map(|j| (j as f64) * alpha.ln()).collect();
    normalized_from_logs(&log_weights)
}

/// `θ_k ∝ t^k / k!`, `k = 1..K`.
pub fn hk_coefficients(t: f64, k: usize) -> Result<CoefficientVector> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("t must be positive, got {t}")));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let mut log_weights = Vec::with_capacity(k);
    let mut acc = 0.0;
    for j in 1..=k {
        acc += t.ln() - (j as f64).ln();
        log_weights.push(acc);
    }
    normalized_from_logs(&log_weights)
}

fn normalized_from_logs(log_weights: &[f64]) -> Result<CoefficientVector> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    CoefficientVector::new(w.iter().map(|x| x / sum).collect(), Constraint::Fixed)
}

/// Ten columns: heat kernels at `t ∈ {5, 8, 12, 15, 20}` and polynomial
/// profiles `k^β` for `β ∈ {2, 4, 6, 8, 10}`, each on the simplex.
pub fn default_dictionary(k: usize) -> Result<Dictionary> {
    let mut columns = Vec::with_capacity(10);
    for t in [5.0, 8.0, 12.0, 15.0, 20.0] {
        columns.push(hk_coefficients(t, k)?.into_vec());
    }
    for beta in [2, 4, 6, 8, 10] {
        let log_weights: Vec<f64> = (1..=k).map(|j| beta as f64 * (j as f64).ln()).collect();
        columns.push(normalized_from_logs(&log_weights)?.into_vec());
    }
    Dictionary::new(columns)
}

/// Builds `A_c = Pᵀ(D†_L P + λ D⁻¹ P̃)` and `b_c = −(2/|L|) Pᵀ D†_L y_{L_c}`
/// from landing probabilities seeded at `L_c`.
pub fn assemble_system(
    g: &Graph,
    p: &LandingProbMatrix,
    ptilde: &DifferentialMatrix,
    labels: &LabeledSet,
    class: usize,
    lambda: f64,
) -> Result<QuadraticSystem> {
    if p.steps() != ptilde.steps() {
        return Err(Error::invalid("landing and differential matrices differ in K"));
    }
    assemble_from_basis(g, p.columns(), ptilde.columns(), labels, class, lambda)
}

/// Same quadratic for an arbitrary basis `B` and its differential
/// `B̃ = B − HB`: `A = Bᵀ(D†_L B + λ D⁻¹ B̃)`, `b = −(2/|L|) Bᵀ D†_L y`.
pub(crate) fn assemble_from_basis(
    g: &Graph,
    basis: &[Vec<f64>],
    diff: &[Vec<f64>],
    labels: &LabeledSet,
    class: usize,
    lambda: f64,
) -> Result<QuadraticSystem> {
    if labels.is_empty() {
        return Err(Error::invalid("labeled set is empty"));
    }
    if labels.num_nodes() != g.num_nodes() {
        return Err(Error::invalid("labeled set and graph differ in node count"));
    }
    let k = basis.len();
    let n = g.num_nodes();
    let degrees = g.degrees();
    let scale = 1.0 / labels.len() as f64;

    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    let mut row = vec![0.0; k];
    for (&i, set) in labels.nodes().iter().zip(labels.label_sets()) {
        let inv_d = 1.0 / degrees[i];
        for (r, col) in row.iter_mut().zip(basis) {
            *r = col[i];
        }
        for r in 0..k {
            let w = inv_d * row[r];
            for s in 0..k {
                a[(r, s)] += w * row[s];
            }
        }
        if set.contains(&class) {
            for r in 0..k {
                b[r] -= 2.0 * scale * inv_d * row[r];
            }
        }
    }
    if lambda != 0.0 {
        // Σ_i (λ/d_i) B_i B̃_iᵀ accumulated over all nodes.
        let smooth = (0..n)
            .into_par_iter()
            .fold(
                || DMatrix::<f64>::zeros(k, k),
                |mut acc, i| {
                    let w = lambda / degrees[i];
                    for r in 0..k {
                        let br = w * basis[r][i];
                        if br == 0.0 {
                            continue;
                        }
                        for s in 0..k {
                            acc[(r, s)] += br * diff[s][i];
                        }
                    }
                    acc
                },
            )
            .reduce(|| DMatrix::zeros(k, k), |x, y| x + y);
        a += smooth;
    }
    QuadraticSystem::new(a, b)
}

/// Learns per-class coefficients and returns the resulting diffusions,
/// ordered by class id. Classes without seeds are skipped.
pub fn fit_adadif(
    g: &Graph,
    labels: &LabeledSet,
    hp: &HyperParams,
    dictionary: Option<&Dictionary>,
) -> Result<Vec<ClassDiffusion>> {
    hp.validate()?;
    let default_dict;
    let dict = if hp.dictionary {
        match dictionary {
            Some(d) => Some(d),
            None => {
                default_dict = default_dictionary(hp.k)?;
                Some(&default_dict)
            }
        }
    } else {
        dictionary
    };
    if let Some(d) = dict {
        if d.steps() != hp.k {
            return Err(Error::invalid(format!(
                "dictionary has {} steps, K is {}",
                d.steps(),
                hp.k
            )));
        }
    }
    labels
        .classes_in_use()
        .into_par_iter()
        .map(|class| fit_class(g, labels, hp, dict, class))
        .collect()
}

fn fit_class(
    g: &Graph,
    labels: &LabeledSet,
    hp: &HyperParams,
    dict: Option<&Dictionary>,
    class: usize,
) -> Result<ClassDiffusion> {
    let seeds = SeedVector::new(g.num_nodes(), &labels.seeds(class))?;
    let (basis, diff) = match dict {
        None => {
            let (p, pt) = landing_probabilities(g, &seeds, hp.k)?;
            (p.columns().to_vec(), pt.columns().to_vec())
        }
        Some(d) => {
            let f = dictionary_diffusions(g, &seeds, d)?;
            let ft = f
                .iter()
                .map(|col| {
                    let hf = g.apply_transition(col);
                    col.iter().zip(&hf).map(|(x, y)| x - y).collect()
                })
                .collect();
            (f, ft)
        }
    };
    let sys = assemble_from_basis(g, &basis, &diff, labels, class, hp.lambda)?;
    let theta = if hp.unconstrained {
        let ridge = hp.ridge.unwrap_or_else(|| default_ridge(&sys));
        solve_hyperplane_qp(&sys, ridge)?
    } else {
        solve_simplex_qp(&sys, &hp.solver)?
    };
    let scores = combine_columns(&basis, theta.theta());
    let coefficients = match dict {
        None => theta,
        Some(d) => CoefficientVector::new(d.expand(theta.theta()), theta.constraint())?,
    };
    Ok(ClassDiffusion {
        class,
        scores,
        coefficients: Some(coefficients),
    })
}

/// `f_c = P_c θ` for every class in use, with a shared fixed θ.
pub fn fit_fixed(
    g: &Graph,
    labels: &LabeledSet,
    theta: &CoefficientVector,
) -> Result<Vec<ClassDiffusion>> {
    let k = theta.len();
    labels
        .classes_in_use()
        .into_par_iter()
        .map(|class| {
            let seeds = SeedVector::new(g.num_nodes(), &labels.seeds(class))?;
            let (p, _) = landing_probabilities(g, &seeds, k)?;
            Ok(ClassDiffusion {
                class,
                scores: p.combine(theta.theta()),
                coefficients: Some(theta.clone()),
            })
        })
        .collect()
}

/// `f_c = p_c^(k)`.
pub fn kstep_classifier(g: &Graph, labels: &LabeledSet, k: usize) -> Result<Vec<ClassDiffusion>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut selector = vec![0.0; k];
    selector[k - 1] = 1.0;
    let theta = CoefficientVector::new(selector, Constraint::Fixed)?;
    fit_fixed(g, labels, &theta)
}

/// Iterates `F ← HF` and re-clamps labeled rows to their label indicators,
/// `iters` times. Returns one column per class in the universe.
pub fn label_propagation(
    g: &Graph,
    labels: &LabeledSet,
    iters: usize,
) -> Result<Vec<ClassDiffusion>> {
    if iters == 0 {
        return Err(Error::invalid("label propagation needs at least one iteration"));
    }
    if labels.num_nodes() != g.num_nodes() {
        return Err(Error::invalid("labeled set and graph differ in node count"));
    }
    let n = g.num_nodes();
    Ok((0..labels.num_classes())
        .into_par_iter()
        .map(|class| {
            let clamp: Vec<(usize, f64)> = labels
                .nodes()
                .iter()
                .copied()
                .zip(labels.indicator(class))
                .collect();
            let mut f = vec![0.0; n];
            for &(i, y) in &clamp {
                f[i] = y;
            }
            let mut next = vec![0.0; n];
            for _ in 0..iters {
                g.apply_transition_into(&f, &mut next);
                std::mem::swap(&mut f, &mut next);
                for &(i, y) in &clamp {
                    f[i] = y;
                }
            }
            ClassDiffusion {
                class,
                scores: f,
                coefficients: None,
            }
        })
        .collect())
}

/// Argmax class per node; ties go to the smallest class id.
pub fn predict(diffusions: &[ClassDiffusion], nodes: &[usize]) -> Vec<usize> {
    let ordered = sorted_by_class(diffusions);
    nodes
        .iter()
        .map(|&i| {
            let mut best: Option<(usize, f64)> = None;
            for d in &ordered {
                let s = d.scores[i];
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((d.class, s));
                }
            }
            best.map_or(0, |(c, _)| c)
        })
        .collect()
}

/// The `m[j]` highest-scoring classes of `nodes[j]`, in ascending class
/// order. Ties favor smaller class ids.
pub fn predict_top_m(diffusions: &[ClassDiffusion], nodes: &[usize], m: &[usize]) -> Vec<Vec<usize>> {
    assert_eq!(nodes.len(), m.len(), "one m per node");
    let ordered = sorted_by_class(diffusions);
    nodes
        .iter()
        .zip(m)
        .map(|(&i, &mi)| {
            let mut ranked: Vec<(usize, f64)> =
                ordered.iter().map(|d| (d.class, d.scores[i])).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut top: Vec<usize> = ranked.into_iter().take(mi).map(|(c, _)| c).collect();
            top.sort_unstable();
            top
        })
        .collect()
}

/// Number of `nodes` whose score is zero in every class.
pub fn count_unscored(diffusions: &[ClassDiffusion], nodes: &[usize]) -> usize {
    nodes
        .iter()
        .filter(|&&i| diffusions.iter().all(|d| d.scores[i] == 0.0))
        .count()
}

fn sorted_by_class(diffusions: &[ClassDiffusion]) -> Vec<&ClassDiffusion> {
    let mut ordered: Vec<&ClassDiffusion> = diffusions.iter().collect();
    ordered.sort_by_key(|d| d.class);
    ordered
}
