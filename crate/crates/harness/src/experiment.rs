//! Repeated seeded trials of a classifier on a dataset, plus the label
//! corruption and detection sweeps built on them.

use std::time::Instant;

use adadif::{
    count_unscored, fit_adadif, fit_fixed, fit_radadif, hk_coefficients, kstep_classifier,
    label_propagation, ppr_coefficients, predict, predict_top_m, robust::detection_rates,
    ClassDiffusion, Graph, HyperParams, LabeledSet, RobustParams,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::metrics::{mean_std, micro_macro_f1};
use crate::sampling::{class_balanced_sample, corrupt_labels, folds, uniform_sample, MAX_SAMPLE_RETRIES};

const CORRUPTION_STREAM: u64 = 0x5851_F42D_4C95_7F2D;
const FOLD_STREAM: u64 = 0x1405_7B7E_F767_814F;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Adadif { hp: HyperParams },
    Radadif { params: RobustParams },
    Ppr { alpha: f64, k: usize },
    Hk { t: f64, k: usize },
    Lp { iters: usize },
    Kstep { k: usize },
    /// Picks the candidate with the best mean micro-F1 over `folds`
    /// held-out parts of the labeled sample, then refits on all of it.
    CrossValidated { candidates: Vec<MethodSpec>, folds: usize },
}

impl MethodSpec {
    pub fn name(&self) -> String {
        match self {
            MethodSpec::Adadif { .. } => "adadif".into(),
            MethodSpec::Radadif { .. } => "radadif".into(),
            MethodSpec::Ppr { .. } => "ppr".into(),
            MethodSpec::Hk { .. } => "hk".into(),
            MethodSpec::Lp { .. } => "lp".into(),
            MethodSpec::Kstep { .. } => "kstep".into(),
            MethodSpec::CrossValidated { candidates, .. } => {
                let names: Vec<String> = candidates.iter().map(MethodSpec::name).collect();
                let mut unique = names.clone();
                unique.dedup();
                if unique.len() == 1 {
                    format!("{}-cv", unique[0])
                } else {
                    format!("cv[{}]", names.join(","))
                }
            }
        }
    }

    /// Heat kernel with `t` chosen among `grid` by k-fold validation.
    pub fn hk_cross_validated(grid: &[f64], k: usize, folds: usize) -> MethodSpec {
        MethodSpec::CrossValidated {
            candidates: grid.iter().map(|&t| MethodSpec::Hk { t, k }).collect(),
            folds,
        }
    }

    pub fn min_seeds_per_class(&self) -> usize {
        match self {
            MethodSpec::Radadif { .. } => 2,
            MethodSpec::CrossValidated { candidates, .. } => candidates
                .iter()
                .map(MethodSpec::min_seeds_per_class)
                .max()
                .unwrap_or(1),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MethodSpec::Adadif { hp } => hp.validate()?,
            MethodSpec::Radadif { params } => params.validate()?,
            MethodSpec::Ppr { alpha, k } => {
                ppr_coefficients(*alpha, *k)?;
            }
            MethodSpec::Hk { t, k } => {
                hk_coefficients(*t, *k)?;
            }
            MethodSpec::Lp { iters } if *iters == 0 => {
                return Err(Error::Config("label propagation needs iters >= 1".into()))
            }
            MethodSpec::Kstep { k } if *k == 0 => return Err(Error::Config("k must be >= 1".into())),
            MethodSpec::CrossValidated { candidates, folds } => {
                if candidates.is_empty() || *folds < 2 {
                    return Err(Error::Config(
                        "cross-validation needs candidates and at least 2 folds".into(),
                    ));
                }
                for c in candidates {
                    c.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingSpec {
    PerClass { count: usize },
    Fraction { fraction: f64 },
}

impl SamplingSpec {
    pub fn draw(&self, truth: &GroundTruth, min_per_class: usize, seed: u64) -> Result<LabeledSet> {
        match *self {
            SamplingSpec::PerClass { count } => {
                if count < min_per_class {
                    return Err(Error::Config(format!(
                        "method needs at least {min_per_class} seeds per class, sampling gives {count}"
                    )));
                }
                class_balanced_sample(truth, count, seed)
            }
            SamplingSpec::Fraction { fraction } => uniform_sample(truth, fraction, min_per_class, seed),
        }
    }
}

/// Output of one fitted method on one labeled set.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub diffusions: Vec<ClassDiffusion>,
    /// Seeds flagged as outliers, robust fits only.
    pub flagged: Option<Vec<usize>>,
    /// Largest increase of the robust objective between sweeps.
    pub objective_rise: Option<f64>,
    /// Index of the selected candidate, cross-validated fits only.
    pub selected: Option<usize>,
}

impl Fitted {
    fn plain(diffusions: Vec<ClassDiffusion>) -> Fitted {
        Fitted {
            diffusions,
            flagged: None,
            objective_rise: None,
            selected: None,
        }
    }
}

pub fn fit_method(g: &Graph, labels: &LabeledSet, method: &MethodSpec, seed: u64) -> Result<Fitted> {
    Ok(match method {
        MethodSpec::Adadif { hp } => Fitted::plain(fit_adadif(g, labels, hp, None)?),
        MethodSpec::Radadif { params } => {
            let fit = fit_radadif(g, labels, params)?;
            let rise = fit
                .trace
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(0.0, f64::max);
            Fitted {
                diffusions: fit.diffusions,
                flagged: Some(fit.outlier_nodes),
                objective_rise: Some(rise),
                selected: None,
            }
        }
        MethodSpec::Ppr { alpha, k } => Fitted::plain(fit_fixed(g, labels, &ppr_coefficients(*alpha, *k)?)?),
        MethodSpec::Hk { t, k } => Fitted::plain(fit_fixed(g, labels, &hk_coefficients(*t, *k)?)?),
        MethodSpec::Lp { iters } => Fitted::plain(label_propagation(g, labels, *iters)?),
        MethodSpec::Kstep { k } => Fitted::plain(kstep_classifier(g, labels, *k)?),
        MethodSpec::CrossValidated { candidates, folds: n_folds } => {
            let parts = folds(labels.nodes(), *n_folds, seed ^ FOLD_STREAM);
            let mut best: Option<(usize, f64)> = None;
            for (idx, candidate) in candidates.iter().enumerate() {
                let mut scores = Vec::with_capacity(parts.len());
                for held in &parts {
                    if held.is_empty() {
                        continue;
                    }
                    let train = labels.without(held)?;
                    let score = fit_method(g, &train, candidate, seed)
                        .and_then(|f| {
                            let truth: Vec<Vec<usize>> =
                                held.iter().map(|&i| labels.labels_of(i).unwrap().to_vec()).collect();
                            let pred = predict_sets(&f.diffusions, held, &truth, labels.is_multilabel());
                            micro_macro_f1(&pred, &truth, labels.num_classes()).map(|s| s.0)
                        })
                        .unwrap_or_else(|e| {
                            log::warn!("candidate {idx} failed on a fold: {e}");
                            f64::NEG_INFINITY
                        });
                    scores.push(score);
                }
                let mean = scores.iter().sum::<f64>() / scores.len().max(1) as f64;
                if best.is_none_or(|(_, b)| mean > b) {
                    best = Some((idx, mean));
                }
            }
            let (idx, _) = best.expect("validated: candidates nonempty");
            let mut fitted = fit_method(g, labels, &candidates[idx], seed)?;
            fitted.selected = Some(idx);
            fitted
        }
    })
}

fn predict_sets(
    diffusions: &[ClassDiffusion],
    nodes: &[usize],
    truth: &[Vec<usize>],
    multilabel: bool,
) -> Vec<Vec<usize>> {
    if multilabel {
        let m: Vec<usize> = truth.iter().map(Vec::len).collect();
        predict_top_m(diffusions, nodes, &m)
    } else {
        predict(diffusions, nodes).into_iter().map(|c| vec![c]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub method: String,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub wall_time_s: f64,
    pub labeled: usize,
    pub evaluated: usize,
    /// Evaluated nodes with zero score in every class.
    pub unscored: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupted: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_fa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_rise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: String,
    pub params: serde_json::Value,
    pub sampling: SamplingSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_cor: Option<f64>,
    pub trials: usize,
    pub micro_mean: f64,
    pub micro_std: f64,
    pub macro_mean: f64,
    pub macro_std: f64,
    pub wall_time_mean_s: f64,
    pub unscored_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialOptions {
    /// Flip each sampled label with this probability before fitting.
    pub p_cor: Option<f64>,
    /// Raises the per-class seed floor of the sample, so that methods with
    /// different floors can share samples.
    pub min_per_class: Option<usize>,
}

/// Per-trial seeds drawn from one stream seeded by `master`.
pub fn trial_seeds(master: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..trials).map(|_| rng.next_u64()).collect()
}

/// Runs `trials` independent sample/fit/evaluate rounds. Evaluation uses
/// only ground-truth-labeled nodes outside the sample.
pub fn run_experiment(
    dataset: &Dataset,
    method: &MethodSpec,
    sampling: &SamplingSpec,
    trials: usize,
    seed: u64,
    options: TrialOptions,
) -> Result<ExperimentResult> {
    method.validate()?;
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let seeds = trial_seeds(seed, trials);
    let results: Vec<TrialResult> = seeds
        .par_iter()
        .enumerate()
        .map(|(trial, &s)| run_trial(dataset, method, sampling, trial, s, options))
        .collect::<Result<_>>()?;
    let aggregate = aggregate(method, sampling, options.p_cor, &results);
    Ok(ExperimentResult {
        trials: results,
        aggregate,
    })
}

fn run_trial(
    dataset: &Dataset,
    method: &MethodSpec,
    sampling: &SamplingSpec,
    trial: usize,
    seed: u64,
    options: TrialOptions,
) -> Result<TrialResult> {
    let truth = &dataset.truth;
    let floor = method.min_seeds_per_class().max(options.min_per_class.unwrap_or(1));
    let sample = sampling.draw(truth, floor, seed)?;
    let (labels, flipped) = match options.p_cor {
        Some(p) => {
            let (l, f) = corrupt_with_floor(&sample, p, method.min_seeds_per_class(), seed)?;
            (l, Some(f))
        }
        None => (sample, None),
    };
    let start = Instant::now();
    let fitted = fit_method(&dataset.graph, &labels, method, seed)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let unlabeled: Vec<usize> = truth
        .labeled_nodes()
        .into_iter()
        .filter(|&i| !labels.is_labeled(i))
        .collect();
    assert!(unlabeled.iter().all(|&i| !labels.is_labeled(i)), "train/test overlap");
    let actual: Vec<Vec<usize>> = unlabeled.iter().map(|&i| truth.labels[i].clone()).collect();
    let pred = predict_sets(&fitted.diffusions, &unlabeled, &actual, truth.multilabel);
    let (micro_f1, macro_f1) = micro_macro_f1(&pred, &actual, truth.num_classes())?;
    let detection = match (&fitted.flagged, &flipped) {
        (Some(flagged), Some(flipped)) => Some(detection_rates(labels.nodes(), flagged, flipped)),
        _ => None,
    };
    Ok(TrialResult {
        trial,
        seed,
        method: method.name(),
        micro_f1,
        macro_f1,
        wall_time_s,
        labeled: labels.len(),
        evaluated: unlabeled.len(),
        unscored: count_unscored(&fitted.diffusions, &unlabeled),
        corrupted: flipped.as_ref().map(Vec::len),
        p_d: detection.map(|d| d.0),
        p_fa: detection.map(|d| d.1),
        objective_rise: fitted.objective_rise,
        selected: fitted.selected,
    })
}

/// Corrupts `sample`, redrawing while some class in use is left with fewer
/// than `floor` seeds.
fn corrupt_with_floor(sample: &LabeledSet, p: f64, floor: usize, seed: u64) -> Result<(LabeledSet, Vec<usize>)> {
    for attempt in 0..MAX_SAMPLE_RETRIES {
        let (labels, flipped) = corrupt_labels(sample, p, (seed ^ CORRUPTION_STREAM).wrapping_add(attempt))?;
        if labels.classes_in_use().iter().all(|&c| labels.seeds(c).len() >= floor) {
            return Ok((labels, flipped));
        }
    }
    Err(Error::Sampling(format!(
        "no corruption left every class with {floor} seeds after {MAX_SAMPLE_RETRIES} draws"
    )))
}

/// Sums in order of trial seed so the result is independent of scheduling.
fn aggregate(
    method: &MethodSpec,
    sampling: &SamplingSpec,
    p_cor: Option<f64>,
    results: &[TrialResult],
) -> Aggregate {
    let mut ordered: Vec<&TrialResult> = results.iter().collect();
    ordered.sort_by_key(|r| (r.seed, r.trial));
    let micro: Vec<f64> = ordered.iter().map(|r| r.micro_f1).collect();
    let macro_: Vec<f64> = ordered.iter().map(|r| r.macro_f1).collect();
    let wall: Vec<f64> = ordered.iter().map(|r| r.wall_time_s).collect();
    let (micro_mean, micro_std) = mean_std(&micro);
    let (macro_mean, macro_std) = mean_std(&macro_);
    Aggregate {
        method: method.name(),
        params: serde_json::to_value(method).unwrap_or(serde_json::Value::Null),
        sampling: *sampling,
        p_cor,
        trials: results.len(),
        micro_mean,
        micro_std,
        macro_mean,
        macro_std,
        wall_time_mean_s: mean_std(&wall).0,
        unscored_total: results.iter().map(|r| r.unscored).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub p_cor: f64,
    pub result: ExperimentResult,
}

/// Runs every method at every corruption level with shared trial seeds, so
/// methods see identical samples and corruptions.
pub fn corruption_sweep(
    dataset: &Dataset,
    methods: &[MethodSpec],
    sampling: &SamplingSpec,
    p_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let floor = methods.iter().map(MethodSpec::min_seeds_per_class).max().unwrap_or(1);
    let mut out = Vec::new();
    for &p in p_grid {
        for method in methods {
            let options = TrialOptions {
                p_cor: Some(p),
                min_per_class: Some(floor),
            };
            let result = run_experiment(dataset, method, sampling, trials, seed, options)?;
            out.push(SweepPoint { p_cor: p, result });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocPoint {
    pub lambda_o: f64,
    pub p_fa: f64,
    pub p_d: f64,
    /// Largest objective increase between sweeps over all fits.
    pub max_objective_rise: f64,
}

/// Mean detection and false-alarm rates of the robust fit for each
/// `λ_o` in `lambda_grid`, sorted by false-alarm rate.
#[allow(clippy::too_many_arguments)]
pub fn roc_sweep(
    dataset: &Dataset,
    sampling: &SamplingSpec,
    p_cor: f64,
    lambda_grid: &[f64],
    trials: usize,
    seed: u64,
    base: &RobustParams,
) -> Result<Vec<RocPoint>> {
    if dataset.truth.multilabel {
        return Err(Error::Config("ROC sweep needs a multiclass dataset".into()));
    }
    let mut points = Vec::with_capacity(lambda_grid.len());
    for &lambda_o in lambda_grid {
        let method = MethodSpec::Radadif {
            params: RobustParams {
                lambda_o,
                ..base.clone()
            },
        };
        let options = TrialOptions {
            p_cor: Some(p_cor),
            min_per_class: None,
        };
        let result = run_experiment(dataset, &method, sampling, trials, seed, options)?;
        let pd: Vec<f64> = result.trials.iter().filter_map(|t| t.p_d).collect();
        let pfa: Vec<f64> = result.trials.iter().filter_map(|t| t.p_fa).collect();
        let rise = result
            .trials
            .iter()
            .filter_map(|t| t.objective_rise)
            .fold(0.0, f64::max);
        points.push(RocPoint {
            lambda_o,
            p_fa: mean_std(&pfa).0,
            p_d: mean_std(&pd).0,
            max_objective_rise: rise,
        });
    }
    points.sort_by(|a, b| a.p_fa.total_cmp(&b.p_fa).then(a.p_d.total_cmp(&b.p_d)));
    Ok(points)
}
