//! Invariants of sampling and scoring.

use adadif_harness::dataset::GroundTruth;
use adadif_harness::*;
use proptest::prelude::*;

fn truth(classes: &[usize], k: usize) -> GroundTruth {
    GroundTruth {
        class_ids: (0..k as u64).collect(),
        labels: classes.iter().map(|&c| vec![c]).collect(),
        multilabel: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f1_scores_lie_in_unit_interval(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
        let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let (mi, ma) = micro_macro_f1_single(&p, &t, 4).unwrap();
        prop_assert!((0.0..=1.0).contains(&mi));
        prop_assert!((0.0..=1.0).contains(&ma));
        let acc = p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / p.len() as f64;
        prop_assert!((mi - acc).abs() < 1e-12);
    }

    #[test]
    fn balanced_sample_has_exact_counts(per_class in 1usize..6, seed in any::<u64>()) {
        let t = truth(&(0..60).map(|i| i % 3).collect::<Vec<_>>(), 3);
        let s = class_balanced_sample(&t, per_class, seed).unwrap();
        for c in 0..3 {
            let seeds = s.seeds(c);
            prop_assert_eq!(seeds.len(), per_class);
            prop_assert!(seeds.iter().all(|&i| t.labels[i] == vec![c]));
        }
    }

    #[test]
    fn uniform_sample_covers_classes(fraction in 0.1f64..0.9, seed in any::<u64>()) {
        let t = truth(&(0..80).map(|i| i % 4).collect::<Vec<_>>(), 4);
        let s = uniform_sample(&t, fraction, 1, seed).unwrap();
        prop_assert_eq!(s.len(), (fraction * 80.0).floor() as usize);
        prop_assert_eq!(s.classes_in_use().len(), 4);
    }

    #[test]
    fn corruption_flips_only_reported_nodes(p in 0.0f64..=1.0, seed in any::<u64>()) {
        let t = truth(&(0..40).map(|i| i % 4).collect::<Vec<_>>(), 4);
        let s = class_balanced_sample(&t, 5, seed).unwrap();
        let (c, flipped) = corrupt_labels(&s, p, seed).unwrap();
        prop_assert_eq!(c.nodes(), s.nodes());
        for &i in s.nodes() {
            let changed = c.labels_of(i) != s.labels_of(i);
            prop_assert_eq!(changed, flipped.contains(&i));
        }
    }
}

#[test]
fn corruption_rate_within_binomial_band() {
    let t = truth(&(0..1000).map(|i| i % 5).collect::<Vec<_>>(), 5);
    let s = class_balanced_sample(&t, 200, 3).unwrap();
    let p = 0.2;
    let (_, flipped) = corrupt_labels(&s, p, 11).unwrap();
    let sigma = (1000.0 * p * (1.0 - p)).sqrt();
    assert!((flipped.len() as f64 - 200.0).abs() <= 3.0 * sigma);
}
