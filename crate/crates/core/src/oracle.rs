//! Monte Carlo estimators for the quantities that [`crate::ids`] computes by
//! quadrature.
//!
//! These share nothing with the quadrature path except the posterior type:
//! they draw joint samples `(X_1, ..., X_K)` from the product of Beta
//! posteriors and average. Work is split into fixed-size blocks, each with its
//! own ChaCha stream, so results do not depend on the rayon thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ids::ConditionalMeans;
use crate::posterior::{entropy_unchecked, BetaPosterior};
use crate::thompson::BetaSampler;

/// Smallest sample count accepted by the estimators.
pub const MIN_SAMPLES: usize = 10_000;
/// A row of the conditional-mean matrix needs this many conditioning hits.
pub const MIN_HITS: u64 = 1_000;
/// Default joint-sample budget for `alpha` and `M`.
pub const DEFAULT_SAMPLES: usize = 1_000_000;

const BLOCK: usize = 1 << 15;

fn block_rng(base: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(block);
    rng
}

fn samplers(state: &BetaPosterior) -> Vec<BetaSampler> {
    state
        .arms()
        .iter()
        .map(|&(b1, b2)| BetaSampler::new(b1, b2).expect("posterior pseudo-counts are positive"))
        .collect()
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::Domain(format!(
            "Monte Carlo estimators need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    Ok(())
}

/// Running sums of the joint draws, keyed by the winning arm.
#[derive(Debug, Clone)]
struct Tally {
    k: usize,
    draws: u64,
    hits: Vec<u64>,
    sums: Vec<f64>,
    squares: Vec<f64>,
}

impl Tally {
    fn new(k: usize) -> Self {
        Self {
            k,
            draws: 0,
            hits: vec![0; k],
            sums: vec![0.0; k * k],
            squares: vec![0.0; k * k],
        }
    }

    fn merge(mut self, other: &Tally) -> Self {
        self.draws += other.draws;
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.squares.iter_mut().zip(&other.squares) {
            *a += b;
        }
        self
    }
}

fn run_block(samplers: &[BetaSampler], n: usize, rng: &mut ChaCha8Rng, moments: bool) -> Tally {
    let k = samplers.len();
    let mut tally = Tally::new(k);
    let mut x = vec![0.0; k];
    for _ in 0..n {
        let mut best = 0;
        for (j, s) in samplers.iter().enumerate() {
            x[j] = s.sample(rng);
            if x[j] > x[best] {
                best = j;
            }
        }
        tally.hits[best] += 1;
        if moments {
            let row = best * k;
            for j in 0..k {
                tally.sums[row + j] += x[j];
                tally.squares[row + j] += x[j] * x[j];
            }
        }
    }
    tally.draws = n as u64;
    tally
}

/// Draws `samples` joint vectors split into blocks; block `b` uses stream `first_block + b`.
fn simulate(
    state: &BetaPosterior,
    samples: usize,
    base: u64,
    first_block: u64,
    moments: bool,
) -> Tally {
    let samplers = samplers(state);
    let blocks = samples.div_ceil(BLOCK);
    let tallies: Vec<Tally> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = BLOCK.min(samples - b * BLOCK);
            let mut rng = block_rng(base, first_block + b as u64);
            run_block(&samplers, n, &mut rng, moments)
        })
        .collect();
    tallies
        .iter()
        .fold(Tally::new(state.num_arms()), |acc, t| acc.merge(t))
}

/// Empirical probability that each arm is the argmax of a joint posterior draw.
pub fn mc_alpha<R: Rng + ?Sized>(
    state: &BetaPosterior,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_samples(samples)?;
    let tally = simulate(state, samples, rng.random(), 0, false);
    Ok(tally
        .hits
        .iter()
        .map(|&h| h as f64 / samples as f64)
        .collect())
}

/// Monte Carlo estimate of the conditional-mean matrix.
#[derive(Debug, Clone, Serialize)]
pub struct McConditionalMeans {
    /// Rows with no conditioning hits hold unconditional posterior means.
    pub m: ConditionalMeans,
    /// Number of draws in which each arm was the argmax.
    pub hits: Vec<u64>,
    /// Standard error of every entry (`+∞` for rows with fewer than two hits).
    pub stderr: Vec<Vec<f64>>,
    /// Rows that did not meet the precision requirement.
    pub insufficient_rows: Vec<usize>,
    /// Total joint draws used.
    pub samples: u64,
}

impl McConditionalMeans {
    fn from_tally(state: &BetaPosterior, tally: &Tally, target_se: Option<f64>) -> Self {
        let k = tally.k;
        let means = state.means();
        let mut rows = Vec::with_capacity(k);
        let mut stderr = Vec::with_capacity(k);
        let mut insufficient_rows = Vec::new();
        for i in 0..k {
            let h = tally.hits[i];
            let mut row = Vec::with_capacity(k);
            let mut se_row = Vec::with_capacity(k);
            for j in 0..k {
                if h == 0 {
                    row.push(means[j]);
                    se_row.push(f64::INFINITY);
                    continue;
                }
                let n = h as f64;
                let mean = tally.sums[i * k + j] / n;
                row.push(mean);
                if h < 2 {
                    se_row.push(f64::INFINITY);
                } else {
                    let var = ((tally.squares[i * k + j] - n * mean * mean) / (n - 1.0)).max(0.0);
                    se_row.push((var / n).sqrt());
                }
            }
            let imprecise = target_se.is_some_and(|t| se_row.iter().any(|&s| s > t));
            if h < MIN_HITS || imprecise {
                insufficient_rows.push(i);
            }
            rows.push(row);
            stderr.push(se_row);
        }
        Self {
            m: ConditionalMeans::from_rows(rows).expect("square by construction"),
            hits: tally.hits.clone(),
            stderr,
            insufficient_rows,
            samples: tally.draws,
        }
    }

    pub fn is_sufficient(&self, row: usize) -> bool {
        !self.insufficient_rows.contains(&row)
    }
}

/// Empirical `E[X_j | arm i is the argmax]` from `samples` joint draws.
///
/// Rows with fewer than [`MIN_HITS`] conditioning events are listed in
/// `insufficient_rows`.
pub fn mc_m<R: Rng + ?Sized>(
    state: &BetaPosterior,
    samples: usize,
    rng: &mut R,
) -> Result<McConditionalMeans> {
    check_samples(samples)?;
    let tally = simulate(state, samples, rng.random(), 0, true);
    Ok(McConditionalMeans::from_tally(state, &tally, None))
}

/// Like [`mc_m`], but keeps drawing further batches until every row's
/// standard errors are at most `target_se`, or `max_samples` draws are spent.
///
/// Rows of arms that rarely win need many more draws than the base budget
/// before their conditional means are resolved. Rows still short of the
/// target at the cap are reported in `insufficient_rows`.
pub fn mc_m_to_precision<R: Rng + ?Sized>(
    state: &BetaPosterior,
    samples: usize,
    target_se: f64,
    max_samples: usize,
    rng: &mut R,
) -> Result<McConditionalMeans> {
    check_samples(samples)?;
    let base: u64 = rng.random();
    let mut tally = simulate(state, samples, base, 0, true);
    let mut next_block = samples.div_ceil(BLOCK) as u64;
    loop {
        let current = McConditionalMeans::from_tally(state, &tally, Some(target_se));
        let spent = tally.draws as usize;
        if current.insufficient_rows.is_empty() || spent >= max_samples {
            return Ok(current);
        }
        // estimate the draws needed by the neediest row from its hit rate
        let mut needed = 0usize;
        for &i in &current.insufficient_rows {
            let worst_se = current.stderr[i].iter().copied().fold(0.0, f64::max);
            let hits = tally.hits[i].max(1) as f64;
            let rate = hits / spent as f64;
            let hits_wanted = if worst_se.is_finite() {
                (hits * (worst_se / target_se).powi(2) * 1.1).max(MIN_HITS as f64)
            } else {
                MIN_HITS as f64 * 4.0
            };
            needed = needed.max(((hits_wanted / rate) as usize).saturating_sub(spent));
        }
        let batch = needed.max(samples).min(max_samples - spent);
        let extra = simulate(state, batch, base, next_block, true);
        next_block += batch.div_ceil(BLOCK) as u64;
        tally = tally.merge(&extra);
    }
}

/// Expected drop in the entropy of the optimal-arm distribution from one pull of `arm`.
///
/// Both reward outcomes are enumerated and weighted by the posterior-predictive
/// probability `b1 / (b1 + b2)`; each optimality distribution is estimated by
/// [`mc_alpha`] with `samples` draws. The three estimates share a seed.
pub fn mc_information_gain<R: Rng + ?Sized>(
    state: &BetaPosterior,
    arm: usize,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    check_samples(samples)?;
    let p = state.mean(arm)?;
    let success = state.update(arm, true)?;
    let failure = state.update(arm, false)?;
    let base: u64 = rng.random();
    let alpha_of = |s: &BetaPosterior| -> Vec<f64> {
        simulate(s, samples, base, 0, false)
            .hits
            .iter()
            .map(|&h| h as f64 / samples as f64)
            .collect()
    };
    let now = entropy_unchecked(&alpha_of(state));
    let after_success = entropy_unchecked(&alpha_of(&success));
    let after_failure = entropy_unchecked(&alpha_of(&failure));
    Ok(now - p * after_success - (1.0 - p) * after_failure)
}
