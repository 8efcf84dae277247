//! Synthetic Bernoulli environments, simulation loops and pseudo-regret accounting.
//!
//! Every run derives its random streams from one master seed through fixed
//! labels (see [`Stream`]), so the environment's reward draws never depend on
//! how many numbers the algorithm consumes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gts::ExpertPool;
use crate::ids::IdsSampler;
use crate::posterior::{BetaPosterior, BetaPrior};
use crate::special::Grid;
use crate::thompson::ts_select_arm;

/// Labeled substreams of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Environment = 1,
    Algorithm = 2,
    Oracle = 3,
    Context = 4,
}

/// ChaCha8 generator for `label` under `seed`.
pub fn stream_rng(seed: u64, label: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label as u64);
    rng
}

fn check_mean(value: f64, what: &str) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::InvalidEnvironment(format!(
            "{what} must lie strictly inside (0, 1), got {value}"
        )));
    }
    Ok(())
}

/// Stationary K-armed Bernoulli bandit.
#[derive(Debug, Clone)]
pub struct BernoulliEnv {
    means: Vec<f64>,
    rng: ChaCha8Rng,
}

impl BernoulliEnv {
    pub fn new(means: Vec<f64>, rng: ChaCha8Rng) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::InvalidEnvironment(format!(
                "need at least 2 arms, got {}",
                means.len()
            )));
        }
        for m in &means {
            check_mean(*m, "arm mean")?;
        }
        Ok(Self { means, rng })
    }

    /// Environment using the [`Stream::Environment`] substream of `seed`.
    pub fn seeded(means: Vec<f64>, seed: u64) -> Result<Self> {
        Self::new(means, stream_rng(seed, Stream::Environment))
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    pub fn best_mean(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `μ* − μ_arm`.
    pub fn gap(&self, arm: usize) -> f64 {
        self.best_mean() - self.means[arm]
    }

    pub fn step(&mut self, arm: usize) -> Result<bool> {
        let mean = *self.means.get(arm).ok_or(Error::InvalidArm {
            arm,
            num_arms: self.means.len(),
        })?;
        Ok(self.rng.random::<f64>() < mean)
    }
}

/// Contextual Bernoulli bandit over a finite context set.
#[derive(Debug, Clone)]
pub struct ContextualEnv {
    means: Vec<Vec<f64>>,
    context_weights: Vec<f64>,
    context_rng: ChaCha8Rng,
    reward_rng: ChaCha8Rng,
}

impl ContextualEnv {
    /// `means[x][a]` is the reward mean of arm `a` in context `x`. Contexts are
    /// drawn i.i.d. from `context_weights` (uniform when `None`).
    pub fn new(
        means: Vec<Vec<f64>>,
        context_weights: Option<Vec<f64>>,
        context_rng: ChaCha8Rng,
        reward_rng: ChaCha8Rng,
    ) -> Result<Self> {
        let arms = means.first().map_or(0, Vec::len);
        if means.is_empty() || arms < 2 {
            return Err(Error::InvalidEnvironment(
                "need at least one context and two arms".into(),
            ));
        }
        for (x, row) in means.iter().enumerate() {
            if row.len() != arms {
                return Err(Error::InvalidEnvironment(format!(
                    "context {x} has {} arms, expected {arms}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidEnvironment(format!(
                    "mean {v} in context {x} outside [0, 1]"
                )));
            }
        }
        let weights = match context_weights {
            None => vec![1.0 / means.len() as f64; means.len()],
            Some(w) => {
                if w.len() != means.len() {
                    return Err(Error::LengthMismatch {
                        expected: means.len(),
                        got: w.len(),
                    });
                }
                if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                    return Err(Error::InvalidEnvironment(
                        "context weights must be nonnegative".into(),
                    ));
                }
                let total: f64 = w.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::InvalidEnvironment(
                        "context weights sum to zero".into(),
                    ));
                }
                w.iter().map(|v| v / total).collect()
            }
        };
        Ok(Self {
            means,
            context_weights: weights,
            context_rng,
            reward_rng,
        })
    }

    /// Environment using the [`Stream::Context`] and [`Stream::Environment`] substreams of `seed`.
    pub fn seeded(
        means: Vec<Vec<f64>>,
        context_weights: Option<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        Self::new(
            means,
            context_weights,
            stream_rng(seed, Stream::Context),
            stream_rng(seed, Stream::Environment),
        )
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn mean(&self, context: usize, arm: usize) -> f64 {
        self.means[context][arm]
    }

    pub fn num_contexts(&self) -> usize {
        self.means.len()
    }

    pub fn num_arms(&self) -> usize {
        self.means[0].len()
    }

    pub fn context_weights(&self) -> &[f64] {
        &self.context_weights
    }

    pub fn sample_context(&mut self) -> usize {
        let u: f64 = self.context_rng.random();
        let mut acc = 0.0;
        for (x, &w) in self.context_weights.iter().enumerate() {
            acc += w;
            if w > 0.0 && u < acc {
                return x;
            }
        }
        self.context_weights
            .iter()
            .rposition(|&w| w > 0.0)
            .expect("some context has positive weight")
    }

    pub fn step(&mut self, context: usize, arm: usize) -> Result<bool> {
        let row = self.means.get(context).ok_or(Error::InvalidContext {
            context,
            num_contexts: self.means.len(),
        })?;
        let mean = *row.get(arm).ok_or(Error::InvalidArm {
            arm,
            num_arms: row.len(),
        })?;
        Ok(self.reward_rng.random::<f64>() < mean)
    }
}

/// One round of a trajectory. `t` starts at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub context: Option<usize>,
    pub arm: usize,
    pub reward: bool,
    pub regret_step: f64,
    pub regret_cum: f64,
}

/// IDS internals logged at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsStepDiagnostics {
    pub t: usize,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub gain: Vec<f64>,
    pub rho_star: f64,
    pub pi: Vec<f64>,
    pub psi: f64,
}

/// A full simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    /// Per-round IDS diagnostics; empty for other algorithms.
    pub ids_diagnostics: Vec<IdsStepDiagnostics>,
    /// Final normalized expert weights (GTS only).
    pub expert_posterior: Option<Vec<f64>>,
    /// Index of the comparator expert (GTS only).
    pub best_expert: Option<usize>,
    /// Hash of the experiment configuration that produced the run, if any.
    pub config_hash: Option<String>,
}

impl RunRecord {
    pub fn run_id(&self) -> String {
        format!("{}-seed{}", self.algorithm, self.seed)
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.regret_cum)
    }

    /// Cumulative regret after round `t` (0 for `t = 0`).
    pub fn regret_at(&self, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        self.steps[t.min(self.steps.len()) - 1].regret_cum
    }

    pub fn regret_curve(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.regret_cum).collect()
    }

    /// Largest information ratio realized during an IDS run.
    pub fn max_psi(&self) -> Option<f64> {
        self.ids_diagnostics
            .iter()
            .map(|d| d.psi)
            .filter(|p| p.is_finite())
            .reduce(f64::max)
    }
}

/// Policies for the non-contextual Bernoulli bandit.
#[derive(Debug, Clone, PartialEq)]
pub enum BanditAlgorithm {
    Ids {
        prior: BetaPrior,
        grid: Grid,
    },
    Thompson {
        prior: BetaPrior,
    },
    /// Uniformly random play; the baseline for regret comparisons.
    Uniform,
}

impl BanditAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ids { .. } => "ids",
            Self::Thompson { .. } => "ts",
            Self::Uniform => "uniform",
        }
    }
}

/// Runs `algorithm` against `env` for `horizon` rounds.
///
/// The algorithm draws from the [`Stream::Algorithm`] substream of `seed`.
/// Per-round regret is the pseudo-regret `μ* − μ_{a_t}`.
pub fn run_bandit(
    algorithm: &BanditAlgorithm,
    mut env: BernoulliEnv,
    horizon: usize,
    seed: u64,
) -> Result<RunRecord> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let k = env.num_arms();
    let mut rng = stream_rng(seed, Stream::Algorithm);
    let mut steps = Vec::with_capacity(horizon);
    let mut diagnostics = Vec::new();
    let mut cum = 0.0;

    let prior = match algorithm {
        BanditAlgorithm::Ids { prior, .. } | BanditAlgorithm::Thompson { prior } => *prior,
        BanditAlgorithm::Uniform => BetaPrior::UNIFORM,
    };
    let mut state = BetaPosterior::from_prior(k, prior)?;
    let mut sampler = match algorithm {
        BanditAlgorithm::Ids { grid, .. } => Some(IdsSampler::new(grid.clone())),
        _ => None,
    };

    for t in 1..=horizon {
        let arm = match (algorithm, sampler.as_mut()) {
            (BanditAlgorithm::Ids { .. }, Some(sampler)) => {
                let decision = sampler.select(&state, &mut rng)?;
                diagnostics.push(IdsStepDiagnostics {
                    t,
                    alpha: decision.quantities.alpha,
                    delta: decision.quantities.delta,
                    gain: decision.quantities.gain,
                    rho_star: decision.quantities.rho_star,
                    pi: decision.pi.probs().to_vec(),
                    psi: decision.psi,
                });
                decision.arm
            }
            (BanditAlgorithm::Thompson { .. }, _) => ts_select_arm(&state, &mut rng),
            _ => rng.random_range(0..k),
        };
        let reward = env.step(arm)?;
        state = state.update(arm, reward)?;
        let regret_step = env.gap(arm);
        cum += regret_step;
        steps.push(StepRecord {
            t,
            context: None,
            arm,
            reward,
            regret_step,
            regret_cum: cum,
        });
    }

    Ok(RunRecord {
        algorithm: algorithm.name().to_string(),
        seed,
        steps,
        ids_diagnostics: diagnostics,
        expert_posterior: None,
        best_expert: None,
        config_hash: None,
    })
}

/// Runs generalized Thompson sampling for `horizon` rounds.
///
/// Regret is measured against the expert whose greedy policy collects the most
/// expected reward over the realized context sequence (lowest index on ties).
/// When that expert is greedy-optimal in every realized context, each
/// increment is nonnegative; otherwise the algorithm can beat the comparator
/// in some rounds.
pub fn run_gts(
    pool: ExpertPool,
    mut env: ContextualEnv,
    horizon: usize,
    seed: u64,
) -> Result<RunRecord> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    if pool.num_contexts() != env.num_contexts() || pool.num_arms() != env.num_arms() {
        return Err(Error::InvalidEnvironment(format!(
            "experts cover {} contexts x {} arms, environment has {} x {}",
            pool.num_contexts(),
            pool.num_arms(),
            env.num_contexts(),
            env.num_arms()
        )));
    }
    let mut rng = stream_rng(seed, Stream::Algorithm);
    let mut pool = pool;
    let mut rounds = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let context = env.sample_context();
        let arm = pool.select_arm(context, &mut rng)?;
        let reward = env.step(context, arm)?;
        pool = pool.update(context, arm, reward)?;
        rounds.push((context, arm, reward));
    }

    let experts = pool.experts();
    let totals: Vec<f64> = experts
        .iter()
        .map(|e| {
            rounds
                .iter()
                .map(|&(x, _, _)| env.mean(x, e.policy(x)))
                .sum()
        })
        .collect();
    let mut best = 0;
    for (i, &v) in totals.iter().enumerate() {
        if v > totals[best] {
            best = i;
        }
    }
    let comparator = &experts[best];

    let mut cum = 0.0;
    let steps = rounds
        .iter()
        .enumerate()
        .map(|(i, &(context, arm, reward))| {
            let regret_step =
                env.mean(context, comparator.policy(context)) - env.mean(context, arm);
            cum += regret_step;
            StepRecord {
                t: i + 1,
                context: Some(context),
                arm,
                reward,
                regret_step,
                regret_cum: cum,
            }
        })
        .collect();

    Ok(RunRecord {
        algorithm: "gts".to_string(),
        seed,
        steps,
        ids_diagnostics: Vec::new(),
        expert_posterior: Some(pool.posterior()),
        best_expert: Some(best),
        config_hash: None,
    })
}
