//! Beta-Bernoulli belief state, Bernoulli KL divergence and discrete entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::BetaDensity;

/// Probabilities handed to [`bernoulli_kl`] are clamped into `[KL_CLAMP, 1 - KL_CLAMP]`.
pub const KL_CLAMP: f64 = 1e-9;

const ENTROPY_SUM_TOL: f64 = 1e-9;

/// Pseudo-counts of a Beta(α, β) prior over a Bernoulli mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPrior {
    pub const UNIFORM: BetaPrior = BetaPrior {
        alpha: 1.0,
        beta: 1.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidPosterior(format!(
                "prior pseudo-counts must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self::UNIFORM
    }
}

/// Per-arm Beta(b1, b2) posteriors over Bernoulli reward means.
///
/// `b1` is prior α plus observed successes, `b2` is prior β plus observed
/// failures. Updates return a new value; the state is never mutated in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaPosterior {
    arms: Vec<(f64, f64)>,
}

impl BetaPosterior {
    /// Builds a posterior from explicit `(b1, b2)` pairs, one per arm.
    pub fn new(arms: Vec<(f64, f64)>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::InvalidPosterior(format!(
                "need at least 2 arms, got {}",
                arms.len()
            )));
        }
        for (i, &(b1, b2)) in arms.iter().enumerate() {
            if !(b1 > 0.0 && b2 > 0.0 && b1.is_finite() && b2.is_finite()) {
                return Err(Error::InvalidPosterior(format!(
                    "arm {i} has non-positive pseudo-counts ({b1}, {b2})"
                )));
            }
        }
        Ok(Self { arms })
    }

    /// `num_arms` arms, all at the given prior.
    pub fn from_prior(num_arms: usize, prior: BetaPrior) -> Result<Self> {
        Self::new(vec![(prior.alpha, prior.beta); num_arms])
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn params(&self, arm: usize) -> Result<(f64, f64)> {
        self.arms.get(arm).copied().ok_or(Error::InvalidArm {
            arm,
            num_arms: self.arms.len(),
        })
    }

    pub fn arms(&self) -> &[(f64, f64)] {
        &self.arms
    }

    /// Posterior after observing `reward` on `arm`.
    pub fn update(&self, arm: usize, reward: bool) -> Result<Self> {
        self.params(arm)?;
        let mut arms = self.arms.clone();
        if reward {
            arms[arm].0 += 1.0;
        } else {
            arms[arm].1 += 1.0;
        }
        Ok(Self { arms })
    }

    /// Posterior mean b1 / (b1 + b2) of `arm`.
    pub fn mean(&self, arm: usize) -> Result<f64> {
        let (b1, b2) = self.params(arm)?;
        Ok(b1 / (b1 + b2))
    }

    pub fn means(&self) -> Vec<f64> {
        self.arms.iter().map(|&(b1, b2)| b1 / (b1 + b2)).collect()
    }

    pub(crate) fn densities(&self) -> Vec<BetaDensity> {
        self.arms
            .iter()
            .map(|&(b1, b2)| BetaDensity::new_unchecked(b1, b2))
            .collect()
    }
}

/// KL divergence of Bernoulli(p1) from Bernoulli(p2), in nats.
///
/// Both arguments are clamped into `[KL_CLAMP, 1 - KL_CLAMP]` first, so the
/// result is always finite.
pub fn bernoulli_kl(p1: f64, p2: f64) -> f64 {
    let p1 = p1.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    let p2 = p2.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    if p1 == p2 {
        return 0.0;
    }
    let kl = p1 * (p1 / p2).ln() + (1.0 - p1) * ((1.0 - p1) / (1.0 - p2)).ln();
    kl.max(0.0)
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
pub fn entropy(dist: &[f64]) -> Result<f64> {
    if dist.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Domain(
            "entropy requires nonnegative finite probabilities".into(),
        ));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > ENTROPY_SUM_TOL {
        return Err(Error::NotNormalized(total));
    }
    Ok(entropy_unchecked(dist))
}

pub(crate) fn entropy_unchecked(dist: &[f64]) -> f64 {
    -dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}
