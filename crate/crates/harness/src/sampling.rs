//! Seeded selection of labeled nodes and synthetic label corruption.

use adadif::LabeledSet;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::GroundTruth;
use crate::error::{Error, Result};

/// Retries allowed when a uniform sample leaves a class under-seeded.
pub const MAX_SAMPLE_RETRIES: u64 = 100;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn to_labeled_set(truth: &GroundTruth, nodes: &[usize]) -> Result<LabeledSet> {
    let n = truth.labels.len();
    let pairs: Vec<(usize, usize)> = nodes
        .iter()
        .flat_map(|&i| truth.labels[i].iter().map(move |&c| (i, c)))
        .collect();
    let set = if truth.multilabel {
        LabeledSet::multilabel(n, truth.num_classes(), &pairs)?
    } else {
        LabeledSet::multiclass(n, truth.num_classes(), &pairs)?
    };
    Ok(set)
}

/// Exactly `per_class` members of every class, uniformly without
/// replacement. In multilabel data a node drawn for several classes is
/// included once.
pub fn class_balanced_sample(truth: &GroundTruth, per_class: usize, seed: u64) -> Result<LabeledSet> {
    if per_class == 0 {
        return Err(Error::Config("per-class sample size must be positive".into()));
    }
    let mut rng = rng(seed);
    let mut chosen = Vec::new();
    for (c, members) in truth.members().iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::Sampling(format!(
                "class {} has {} members, fewer than {per_class}",
                truth.class_ids[c],
                members.len()
            )));
        }
        let picks = index::sample(&mut rng, members.len(), per_class);
        chosen.extend(picks.iter().map(|j| members[j]));
    }
    chosen.sort_unstable();
    chosen.dedup();
    to_labeled_set(truth, &chosen)
}

/// `⌊fraction·N⌋` nodes drawn uniformly from the labeled nodes. Redrawn with
/// a shifted seed while any class has fewer than `min_per_class` seeds.
pub fn uniform_sample(
    truth: &GroundTruth,
    fraction: f64,
    min_per_class: usize,
    seed: u64,
) -> Result<LabeledSet> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("fraction must lie in (0,1), got {fraction}")));
    }
    let pool = truth.labeled_nodes();
    let size = (fraction * truth.labels.len() as f64).floor() as usize;
    if size == 0 || size > pool.len() {
        return Err(Error::Sampling(format!(
            "cannot draw {size} nodes from {} labeled nodes",
            pool.len()
        )));
    }
    for attempt in 0..MAX_SAMPLE_RETRIES {
        let mut rng = rng(seed.wrapping_add(attempt));
        let mut chosen: Vec<usize> = index::sample(&mut rng, pool.len(), size)
            .iter()
            .map(|j| pool[j])
            .collect();
        chosen.sort_unstable();
        let mut counts = vec![0usize; truth.num_classes()];
        for &i in &chosen {
            for &c in &truth.labels[i] {
                counts[c] += 1;
            }
        }
        if counts.iter().all(|&k| k >= min_per_class.max(1)) {
            return to_labeled_set(truth, &chosen);
        }
    }
    Err(Error::Sampling(format!(
        "no sample of {size} nodes covered every class with {} seed(s) after {MAX_SAMPLE_RETRIES} draws",
        min_per_class.max(1)
    )))
}

/// Each labeled node independently, with probability `p_cor`, receives a
/// label drawn uniformly from the other classes. Returns the corrupted set
/// and the flipped nodes.
pub fn corrupt_labels(sample: &LabeledSet, p_cor: f64, seed: u64) -> Result<(LabeledSet, Vec<usize>)> {
    if sample.is_multilabel() {
        return Err(Error::Config("label corruption needs a multiclass sample".into()));
    }
    if !(0.0..=1.0).contains(&p_cor) {
        return Err(Error::Config(format!("p_cor must lie in [0,1], got {p_cor}")));
    }
    let classes = sample.num_classes();
    if classes < 2 && p_cor > 0.0 {
        return Err(Error::Config("corruption needs at least two classes".into()));
    }
    let mut rng = rng(seed);
    let mut changes = Vec::new();
    for (&i, set) in sample.nodes().iter().zip(sample.label_sets()) {
        if rng.random_bool(p_cor) {
            let c = set[0];
            let mut other = rng.random_range(0..classes - 1);
            if other >= c {
                other += 1;
            }
            changes.push((i, vec![other]));
        }
    }
    let flipped = changes.iter().map(|(i, _)| *i).collect();
    Ok((sample.relabeled(&changes)?, flipped))
}

/// Shuffled split of `nodes` into `folds` nearly equal parts.
pub fn folds(nodes: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut shuffled = nodes.to_vec();
    shuffled.shuffle(&mut rng(seed));
    let mut out = vec![Vec::new(); folds.max(1)];
    for (j, i) in shuffled.into_iter().enumerate() {
        out[j % folds.max(1)].push(i);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(classes: &[usize]) -> GroundTruth {
        let k = classes.iter().max().unwrap() + 1;
        GroundTruth {
            class_ids: (0..k as u64).collect(),
            labels: classes.iter().map(|&c| vec![c]).collect(),
            multilabel: false,
        }
    }

    #[test]
    fn balanced_sample_exact_counts_and_deterministic() {
        let t = truth(&[0, 1, 0, 1, 2, 2, 0, 1, 2, 0]);
        let s = class_balanced_sample(&t, 2, 5).unwrap();
        assert_eq!(s.len(), 6);
        for c in 0..3 {
            assert_eq!(s.seeds(c).len(), 2);
        }
        assert_eq!(s, class_balanced_sample(&t, 2, 5).unwrap());
        let whole = class_balanced_sample(&t, 3, 1).unwrap();
        assert_eq!(whole.seeds(1), vec![1, 3, 7]);
        let err = class_balanced_sample(&t, 4, 1).unwrap_err();
        assert!(err.to_string().contains("class 1"));
    }

    #[test]
    fn uniform_sample_size_and_coverage() {
        let t = truth(&(0..100).map(|i| i % 4).collect::<Vec<_>>());
        let s = uniform_sample(&t, 0.1, 1, 3).unwrap();
        assert_eq!(s.len(), 10);
        assert_eq!(s.classes_in_use().len(), 4);
        assert_eq!(s, uniform_sample(&t, 0.1, 1, 3).unwrap());
        assert!(uniform_sample(&t, 0.03, 1, 3).is_err());
        assert!(uniform_sample(&t, 1.0, 1, 3).is_err());
    }

    #[test]
    fn corruption_extremes() {
        let t = truth(&(0..30).map(|i| i % 3).collect::<Vec<_>>());
        let s = class_balanced_sample(&t, 5, 0).unwrap();
        let (same, none) = corrupt_labels(&s, 0.0, 1).unwrap();
        assert_eq!(same, s);
        assert!(none.is_empty());
        let (all, flipped) = corrupt_labels(&s, 1.0, 1).unwrap();
        assert_eq!(flipped.len(), s.len());
        for &i in s.nodes() {
            assert_ne!(all.labels_of(i), s.labels_of(i));
        }
    }

    #[test]
    fn folds_partition_nodes() {
        let nodes: Vec<usize> = (0..23).collect();
        let f = folds(&nodes, 5, 9);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, nodes);
        assert!(f.iter().all(|x| x.len() == 4 || x.len() == 5));
    }
}
