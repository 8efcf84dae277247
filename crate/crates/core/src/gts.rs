//! Generalized Thompson sampling over a finite pool of experts.
//!
//! Each expert is a lookup table of predicted mean rewards over a finite
//! context set. Weights are kept in log space: after a few thousand log-loss
//! updates the raw products `Π exp(−η ℓ)` fall below the smallest positive
//! `f64`, while their ratios (which are all the algorithm uses) stay well
//! conditioned.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::ActionDistribution;

/// Predictions are clamped into `[LOG_LOSS_CLAMP, 1 − LOG_LOSS_CLAMP]` before log loss.
pub const LOG_LOSS_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logarithmic,
    Square,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logarithmic" | "log" => Ok(Self::Logarithmic),
            "square" => Ok(Self::Square),
            other => Err(Error::InvalidPool(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// Loss of predicting `predicted` when the observed reward is `reward`.
pub fn loss(kind: LossKind, predicted: f64, reward: bool) -> f64 {
    match kind {
        LossKind::Logarithmic => {
            let p = predicted.clamp(LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP);
            if reward {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        }
        LossKind::Square => {
            let r = if reward { 1.0 } else { 0.0 };
            (predicted - r).powi(2)
        }
    }
}

/// An expert: predicted mean reward for every (context, arm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expert {
    id: usize,
    table: Vec<Vec<f64>>,
}

impl Expert {
    /// `table[context][arm]` must be rectangular with entries in [0, 1].
    pub fn new(id: usize, table: Vec<Vec<f64>>) -> Result<Self> {
        let arms = table.first().map_or(0, Vec::len);
        if table.is_empty() || arms == 0 {
            return Err(Error::InvalidPool(format!(
                "expert {id} has an empty table"
            )));
        }
        for (x, row) in table.iter().enumerate() {
            if row.len() != arms {
                return Err(Error::InvalidPool(format!(
                    "expert {id}: context {x} has {} arms, expected {arms}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidPool(format!(
                    "expert {id}: prediction {v} outside [0, 1] in context {x}"
                )));
            }
        }
        Ok(Self { id, table })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn num_contexts(&self) -> usize {
        self.table.len()
    }

    pub fn num_arms(&self) -> usize {
        self.table[0].len()
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn predict(&self, context: usize, arm: usize) -> f64 {
        self.table[context][arm]
    }

    /// Greedy arm for `context`, lowest index on ties.
    pub fn policy(&self, context: usize) -> usize {
        let row = &self.table[context];
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }
}

/// Expert pool with exponential weights and γ-uniform exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertPool {
    experts: Vec<Expert>,
    log_weights: Vec<f64>,
    eta: f64,
    gamma: f64,
    loss: LossKind,
}

impl ExpertPool {
    /// `prior` defaults to uniform `1/N`; it need not be normalized.
    pub fn new(
        experts: Vec<Expert>,
        prior: Option<Vec<f64>>,
        eta: f64,
        gamma: f64,
        loss: LossKind,
    ) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::InvalidPool("pool has no experts".into()));
        }
        let (contexts, arms) = (experts[0].num_contexts(), experts[0].num_arms());
        if let Some(e) = experts
            .iter()
            .find(|e| e.num_contexts() != contexts || e.num_arms() != arms)
        {
            return Err(Error::InvalidPool(format!(
                "expert {} has shape {}x{}, expected {contexts}x{arms}",
                e.id(),
                e.num_contexts(),
                e.num_arms()
            )));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidPool(format!(
                "eta must be positive, got {eta}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidPool(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        let n = experts.len();
        let prior = prior.unwrap_or_else(|| vec![1.0 / n as f64; n]);
        if prior.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: prior.len(),
            });
        }
        if prior.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidPool("prior weights must be positive".into()));
        }
        Ok(Self {
            experts,
            log_weights: prior.iter().map(|p| p.ln()).collect(),
            eta,
            gamma,
            loss,
        })
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn num_arms(&self) -> usize {
        self.experts[0].num_arms()
    }

    pub fn num_contexts(&self) -> usize {
        self.experts[0].num_contexts()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Raw weights `w_i,t`; may underflow after very long runs, use
    /// [`ExpertPool::posterior`] for normalized values.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Normalized weights `w_i,t / W_t`.
    pub fn posterior(&self) -> Vec<f64> {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = self.log_weights.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = scaled.iter().sum();
        scaled.iter().map(|s| s / total).collect()
    }

    fn check_context(&self, context: usize) -> Result<()> {
        if context >= self.num_contexts() {
            return Err(Error::InvalidContext {
                context,
                num_contexts: self.num_contexts(),
            });
        }
        Ok(())
    }

    /// `P(a) = (1 − γ) Σ_i w_i 1[E_i(x) = a] / W + γ / K`.
    pub fn action_distribution(&self, context: usize) -> Result<ActionDistribution> {
        self.check_context(context)?;
        let k = self.num_arms();
        let posterior = self.posterior();
        let mut probs = vec![self.gamma / k as f64; k];
        for (expert, w) in self.experts.iter().zip(&posterior) {
            probs[expert.policy(context)] += (1.0 - self.gamma) * w;
        }
        // absorb rounding so the vector sums to one
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        ActionDistribution::new(probs)
    }

    /// Multiplies every weight by `exp(−η ℓ(f_i(x, a), r))`.
    pub fn update(&self, context: usize, arm: usize, reward: bool) -> Result<Self> {
        self.check_context(context)?;
        if arm >= self.num_arms() {
            return Err(Error::InvalidArm {
                arm,
                num_arms: self.num_arms(),
            });
        }
        let mut next = self.clone();
        for (lw, expert) in next.log_weights.iter_mut().zip(&self.experts) {
            *lw -= self.eta * loss(self.loss, expert.predict(context, arm), reward);
        }
        Ok(next)
    }

    /// Samples an arm from [`ExpertPool::action_distribution`].
    pub fn select_arm<R: Rng + ?Sized>(&self, context: usize, rng: &mut R) -> Result<usize> {
        Ok(self.action_distribution(context)?.sample(rng))
    }
}

/// Free-function form of [`ExpertPool::action_distribution`].
pub fn gts_action_distribution(pool: &ExpertPool, context: usize) -> Result<ActionDistribution> {
    pool.action_distribution(context)
}

/// Free-function form of [`ExpertPool::update`].
pub fn gts_update(
    pool: &ExpertPool,
    context: usize,
    arm: usize,
    reward: bool,
) -> Result<ExpertPool> {
    pool.update(context, arm, reward)
}

/// Posterior probability that each expert is the reward-maximizing one.
pub fn gts_posterior(pool: &ExpertPool) -> Vec<f64> {
    pool.posterior()
}

/// Exploration rate used when none is configured: `min(1, K^(2/3) / T^(1/3))`.
pub fn default_gamma(num_arms: usize, horizon: usize) -> f64 {
    let k = num_arms as f64;
    let t = horizon.max(1) as f64;
    (k.powf(2.0 / 3.0) / t.powf(1.0 / 3.0)).min(1.0)
}

#[derive(Debug, Deserialize)]
struct ExpertRow {
    expert_id: usize,
    context_id: usize,
    arm_id: usize,
    predicted_mean: f64,
}

/// Reads experts from CSV text with header
/// `expert_id,context_id,arm_id,predicted_mean`.
///
/// Ids are zero-based. Every expert must cover the full `contexts × arms`
/// table exactly once, and expert ids must be contiguous from 0. Lines
/// starting with `#` are ignored.
pub fn read_experts<R: Read>(reader: R, contexts: usize, arms: usize) -> Result<Vec<Expert>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::ExpertsFile(e.to_string()))?
        .clone();
    let expected = ["expert_id", "context_id", "arm_id", "predicted_mean"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::ExpertsFile(format!(
            "header must be {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut tables: Vec<Vec<Vec<Option<f64>>>> = Vec::new();
    for (line, row) in csv.deserialize::<ExpertRow>().enumerate() {
        let row = row.map_err(|e| Error::ExpertsFile(format!("row {}: {e}", line + 1)))?;
        if row.context_id >= contexts {
            return Err(Error::ExpertsFile(format!(
                "row {}: context {} out of range (contexts = {contexts})",
                line + 1,
                row.context_id
            )));
        }
        if row.arm_id >= arms {
            return Err(Error::ExpertsFile(format!(
                "row {}: arm {} out of range (arms = {arms})",
                line + 1,
                row.arm_id
            )));
        }
        if !(0.0..=1.0).contains(&row.predicted_mean) {
            return Err(Error::ExpertsFile(format!(
                "row {}: predicted mean {} outside [0, 1]",
                line + 1,
                row.predicted_mean
            )));
        }
        if row.expert_id >= tables.len() {
            tables.resize(row.expert_id + 1, vec![vec![None; arms]; contexts]);
        }
        let cell = &mut tables[row.expert_id][row.context_id][row.arm_id];
        if cell.is_some() {
            return Err(Error::ExpertsFile(format!(
                "row {}: duplicate entry for expert {}, context {}, arm {}",
                line + 1,
                row.expert_id,
                row.context_id,
                row.arm_id
            )));
        }
        *cell = Some(row.predicted_mean);
    }
    if tables.is_empty() {
        return Err(Error::ExpertsFile("no experts defined".into()));
    }
    tables
        .into_iter()
        .enumerate()
        .map(|(id, table)| {
            let mut rows = Vec::with_capacity(contexts);
            for (x, row) in table.into_iter().enumerate() {
                let mut values = Vec::with_capacity(arms);
                for (a, v) in row.into_iter().enumerate() {
                    values.push(v.ok_or_else(|| {
                        Error::ExpertsFile(format!("expert {id} is missing context {x}, arm {a}"))
                    })?);
                }
                rows.push(values);
            }
            Expert::new(id, rows)
        })
        .collect()
}

/// Reads an experts file from disk; see [`read_experts`].
pub fn load_experts(path: &Path, contexts: usize, arms: usize) -> Result<Vec<Expert>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::ExpertsFile(format!("{}: {e}", path.display())))?;
    read_experts(file, contexts, arms)
}

/// Serializes experts in the format accepted by [`read_experts`].
pub fn experts_to_csv(experts: &[Expert]) -> String {
    let mut out = String::from("expert_id,context_id,arm_id,predicted_mean\n");
    for e in experts {
        for (x, row) in e.table().iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                out.push_str(&format!("{},{x},{a},{v}\n", e.id()));
            }
        }
    }
    out
}
