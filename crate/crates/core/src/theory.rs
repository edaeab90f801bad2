//! Walk-length thresholds beyond which two class diffusions become
//! indistinguishable, as closed-form bounds and as measured on a graph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, SpectralSummary};
use crate::walks::{landing_probabilities, SeedVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub gamma: f64,
    pub d_max: f64,
    /// Smallest degree within the positive seed set.
    pub d_min_plus: f64,
    /// Smallest degree within the negative seed set.
    pub d_min_minus: f64,
    pub n_plus: usize,
    pub n_minus: usize,
    pub mu_prime: f64,
    pub alpha: Option<f64>,
}

impl BoundInputs {
    /// Degrees and set sizes read off `g` for the two seed sets.
    pub fn from_graph(
        g: &Graph,
        seeds_plus: &[usize],
        seeds_minus: &[usize],
        gamma: f64,
        spectrum: &SpectralSummary,
    ) -> Result<BoundInputs> {
        let min_degree = |set: &[usize]| -> Result<f64> {
            if set.is_empty() {
                return Err(Error::invalid("seed set is empty"));
            }
            if let Some(&bad) = set.iter().find(|&&i| i >= g.num_nodes()) {
                return Err(Error::invalid(format!("seed node {bad} out of range")));
            }
            Ok(set.iter().map(|&i| g.degree(i)).fold(f64::INFINITY, f64::min))
        };
        let dedup_len = |set: &[usize]| {
            let mut v = set.to_vec();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        Ok(BoundInputs {
            gamma,
            d_max: g.max_degree(),
            d_min_plus: min_degree(seeds_plus)?,
            d_min_minus: min_degree(seeds_minus)?,
            n_plus: dedup_len(seeds_plus),
            n_minus: dedup_len(seeds_minus),
            mu_prime: spectrum.mu_prime,
            alpha: None,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.mu_prime.is_nan() || self.mu_prime <= 0.0 {
            return Err(Error::NoSpectralGap {
                mu_prime: self.mu_prime,
            });
        }
        if self.mu_prime >= 2.0 {
            return Err(Error::invalid(format!(
                "mu_prime must lie in (0,2), got {}",
                self.mu_prime
            )));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("d_max", self.d_max),
            ("d_min_plus", self.d_min_plus),
            ("d_min_minus", self.d_min_minus),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_plus == 0 || self.n_minus == 0 {
            return Err(Error::invalid("seed set sizes must be positive"));
        }
        Ok(())
    }

    /// `1/√(d_min− |L−|) + 1/√(d_min+ |L+|)`.
    fn seed_term(&self) -> f64 {
        1.0 / (self.d_min_minus * self.n_minus as f64).sqrt()
            + 1.0 / (self.d_min_plus * self.n_plus as f64).sqrt()
    }
}

/// `⌈(1/μ′) ln[(2√d_max/γ)(1/√(d_min− |L−|) + 1/√(d_min+ |L+|))]⌉`, at least 1.
pub fn kgamma_bound(inputs: &BoundInputs) -> Result<usize> {
    inputs.validate()?;
    let arg = 2.0 * inputs.d_max.sqrt() / inputs.gamma * inputs.seed_term();
    Ok(ceil_at_least_one(arg.ln() / inputs.mu_prime))
}

/// Personalized-PageRank variant: `γ` is replaced by `γ/(1−α)` and the rate
/// by `μ′ − ln α`.
pub fn kgamma_bound_ppr(inputs: &BoundInputs) -> Result<usize> {
    inputs.validate()?;
    let alpha = inputs
        .alpha
        .ok_or_else(|| Error::invalid("alpha is required for the PageRank bound"))?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let arg = 2.0 * inputs.d_max.sqrt() * (1.0 - alpha) / inputs.gamma * inputs.seed_term();
    Ok(ceil_at_least_one(arg.ln() / (inputs.mu_prime - alpha.ln())))
}

fn ceil_at_least_one(x: f64) -> usize {
    if x.is_finite() && x > 1.0 {
        x.ceil() as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EmpiricalKGamma {
    Found { k: usize, norm: f64 },
    NotFound { min_norm: f64 },
}

impl EmpiricalKGamma {
    pub fn k(&self) -> Option<usize> {
        match self {
            EmpiricalKGamma::Found { k, .. } => Some(*k),
            EmpiricalKGamma::NotFound { .. } => None,
        }
    }
}

/// Smallest `K ≤ k_max` with
/// `‖(p₊^(K) − p₊^(K+1)) − (p₋^(K) − p₋^(K+1))‖₂ ≤ γ`.
///
/// Over θ on the simplex, extending a K-step diffusion by one step changes
/// the two-class output by `θ_K` times this difference, so θ = e_K is the
/// worst case.
pub fn empirical_kgamma(
    g: &Graph,
    seeds_plus: &[usize],
    seeds_minus: &[usize],
    gamma: f64,
    k_max: usize,
) -> Result<EmpiricalKGamma> {
    if k_max == 0 {
        return Err(Error::invalid("K_max must be at least 1"));
    }
    let n = g.num_nodes();
    let (p_plus, d_plus) = landing_probabilities(g, &SeedVector::new(n, seeds_plus)?, k_max)?;
    let (_, d_minus) = landing_probabilities(g, &SeedVector::new(n, seeds_minus)?, k_max)?;
    debug_assert_eq!(p_plus.steps(), k_max);
    let mut min_norm = f64::INFINITY;
    for k in 1..=k_max {
        let norm = d_plus
            .step(k)
            .iter()
            .zip(d_minus.step(k))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if norm <= gamma {
            return Ok(EmpiricalKGamma::Found { k, norm });
        }
        min_norm = min_norm.min(norm);
    }
    Ok(EmpiricalKGamma::NotFound { min_norm })
}
