//! Qualitative behaviour of the fitted models on synthetic graphs.

use adadif::*;
use adadif_testkit as tk;
use rand::seq::SliceRandom;
use rand::Rng;

fn sbm(seed: u64, sizes: &[usize], p_in: f64, p_out: f64) -> (Graph, Vec<usize>) {
    let mut rng = tk::rng(seed);
    let (edges, block) = tk::connected_sbm(sizes, p_in, p_out, &mut rng);
    (Graph::from_edges(block.len(), edges).unwrap(), block)
}

fn sample_per_class(block: &[usize], per_class: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = tk::rng(seed);
    let classes = block.iter().max().unwrap() + 1;
    let mut pairs = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..block.len()).filter(|&i| block[i] == c).collect();
        members.shuffle(&mut rng);
        pairs.extend(members.into_iter().take(per_class).map(|i| (i, c)));
    }
    pairs
}

#[test]
fn strong_smoothness_selects_last_step() {
    for seed in 0..10u64 {
        let (g, block) = sbm(seed, &[40, 40, 40], 0.15, 0.01);
        assert!(!g.is_bipartite());
        let labels = LabeledSet::multiclass(g.num_nodes(), 3, &sample_per_class(&block, 5, seed)).unwrap();
        let hp = HyperParams {
            k: 15,
            lambda: 1e6,
            ..HyperParams::default()
        };
        for fit in fit_adadif(&g, &labels, &hp, None).unwrap() {
            let th = fit.coefficients.unwrap();
            let dist = th
                .theta()
                .iter()
                .enumerate()
                .map(|(k, &x)| if k == 14 { (x - 1.0).abs() } else { x.abs() })
                .fold(0.0, f64::max);
            assert!(dist <= 0.01, "seed {seed} class {}: {:?}", fit.class, th.theta());
        }
    }
}

#[test]
fn adaptive_fit_classifies_planted_partition() {
    let (g, block) = sbm(42, &[60, 60], 0.1, 0.01);
    let labels = LabeledSet::multiclass(g.num_nodes(), 2, &sample_per_class(&block, 5, 1)).unwrap();
    let fits = fit_adadif(&g, &labels, &HyperParams::default(), None).unwrap();
    let unlabeled: Vec<usize> = (0..g.num_nodes()).filter(|&i| !labels.is_labeled(i)).collect();
    let pred = predict(&fits, &unlabeled);
    let correct = unlabeled.iter().zip(&pred).filter(|(&i, &p)| block[i] == p).count();
    assert!(correct as f64 / unlabeled.len() as f64 > 0.9);
}

fn corrupt(pairs: &[(usize, usize)], classes: usize, p: f64, seed: u64) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut rng = tk::rng(seed);
    let mut out = Vec::new();
    let mut flipped = Vec::new();
    for &(i, c) in pairs {
        if rng.random_bool(p) {
            let mut other = rng.random_range(0..classes - 1);
            if other >= c {
                other += 1;
            }
            out.push((i, other));
            flipped.push(i);
        } else {
            out.push((i, c));
        }
    }
    (out, flipped)
}

#[test]
fn exact_outlier_step_descends_and_detects() {
    let mut detections = Vec::new();
    for seed in 0..6u64 {
        let (g, block) = sbm(100 + seed, &[50, 50, 50], 0.12, 0.01);
        let clean = sample_per_class(&block, 12, seed);
        let (noisy, flipped) = corrupt(&clean, 3, 0.2, seed);
        let labels = LabeledSet::multiclass(g.num_nodes(), 3, &noisy).unwrap();
        let params = RobustParams {
            k: 20,
            outlier_step: OutlierStep::Exact,
            ..RobustParams::default()
        };
        let fit = fit_radadif(&g, &labels, &params).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "objective rose: {:?}", fit.trace);
        }
        if !flipped.is_empty() {
            detections.push(detection_counts(&fit, &flipped));
        }
    }
    let (pd, pfa): (f64, f64) = detections
        .iter()
        .fold((0.0, 0.0), |(a, b), (d, f)| (a + d, b + f));
    assert!(pd > pfa, "mean p_d {pd} vs p_fa {pfa}");
}

#[test]
fn outlier_rows_share_support_across_classes() {
    let (g, block) = sbm(7, &[40, 40], 0.15, 0.02);
    let (noisy, _) = corrupt(&sample_per_class(&block, 10, 3), 2, 0.3, 9);
    let labels = LabeledSet::multiclass(g.num_nodes(), 2, &noisy).unwrap();
    for step in [OutlierStep::AsPrinted, OutlierStep::Exact] {
        let params = RobustParams {
            k: 15,
            lambda_o: 5e-3,
            outlier_step: step,
            ..RobustParams::default()
        };
        let fit = fit_radadif(&g, &labels, &params).unwrap();
        for r in 0..fit.outliers.nrows() {
            let row = fit.outliers.row(r);
            let flagged = fit.outlier_nodes.contains(&fit.labeled[r]);
            assert_eq!(flagged, row.norm() > 0.0);
        }
    }
}
