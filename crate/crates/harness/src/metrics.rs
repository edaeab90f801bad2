//! Micro- and macro-averaged F1 over label sets.

use crate::error::{Error, Result};

/// `(micro, macro)` F1 of predicted label sets against true label sets.
/// Micro pools true/false positives and false negatives over all classes;
/// macro averages per-class F1 over `0..num_classes`, with F1 = 0 for a class
/// that never occurs in either.
pub fn micro_macro_f1(
    predictions: &[Vec<usize>],
    truth: &[Vec<usize>],
    num_classes: usize,
) -> Result<(f64, f64)> {
    if predictions.len() != truth.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} ground-truth entries",
            predictions.len(),
            truth.len()
        )));
    }
    if num_classes == 0 {
        return Err(Error::Config("empty class universe".into()));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (pred, actual) in predictions.iter().zip(truth) {
        for &c in pred.iter().chain(actual) {
            if c >= num_classes {
                return Err(Error::Config(format!("class {c} outside universe of {num_classes}")));
            }
        }
        for &c in pred {
            if actual.contains(&c) {
                tp[c] += 1;
            } else {
                fp[c] += 1;
            }
        }
        for &c in actual {
            if !pred.contains(&c) {
                fn_[c] += 1;
            }
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let macro_ = (0..num_classes).map(|c| f1(tp[c], fp[c], fn_[c])).sum::<f64>() / num_classes as f64;
    Ok((micro, macro_))
}

/// Single-label convenience wrapper.
pub fn micro_macro_f1_single(predictions: &[usize], truth: &[usize], num_classes: usize) -> Result<(f64, f64)> {
    let p: Vec<Vec<usize>> = predictions.iter().map(|&c| vec![c]).collect();
    let t: Vec<Vec<usize>> = truth.iter().map(|&c| vec![c]).collect();
    micro_macro_f1(&p, &t, num_classes)
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
