//! Beta-Bernoulli Thompson sampling.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::posterior::BetaPosterior;

/// Beta(b1, b2) sampler built from two unit-scale Gamma variates.
///
/// `rand_distr::Gamma` uses the Marsaglia–Tsang squeeze for shape ≥ 1 and the
/// `U^(1/shape)` boost below 1.
#[derive(Debug, Clone, Copy)]
pub struct BetaSampler {
    x: Gamma<f64>,
    y: Gamma<f64>,
}

impl BetaSampler {
    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        let gamma = |shape: f64| {
            Gamma::new(shape, 1.0).map_err(|e| {
                Error::Domain(format!(
                    "Beta shape parameters must be positive ({shape}): {e}"
                ))
            })
        };
        if !(b1 > 0.0 && b2 > 0.0) {
            return Err(Error::Domain(format!(
                "Beta shape parameters must be positive, got ({b1}, {b2})"
            )));
        }
        Ok(Self {
            x: gamma(b1)?,
            y: gamma(b2)?,
        })
    }
}

impl Distribution<f64> for BetaSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.x.sample(rng);
            let y = self.y.sample(rng);
            let total = x + y;
            // both variates can underflow for tiny shapes; redraw
            if total > 0.0 {
                return x / total;
            }
        }
    }
}

/// One Beta(b1, b2) variate.
pub fn beta_sample<R: Rng + ?Sized>(b1: f64, b2: f64, rng: &mut R) -> Result<f64> {
    Ok(BetaSampler::new(b1, b2)?.sample(rng))
}

/// Draws one posterior sample per arm and returns the argmax (lowest index on ties).
pub fn ts_select_arm<R: Rng + ?Sized>(state: &BetaPosterior, rng: &mut R) -> usize {
    let mut best = 0;
    let mut best_draw = f64::NEG_INFINITY;
    for (i, &(b1, b2)) in state.arms().iter().enumerate() {
        let draw = BetaSampler::new(b1, b2)
            .expect("posterior pseudo-counts are positive")
            .sample(rng);
        if draw > best_draw {
            best = i;
            best_draw = draw;
        }
    }
    best
}
