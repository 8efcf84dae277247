//! Regret-bound checkpoints and the `bound-check` report.

use std::path::Path;

use bandit_core::RunRecord;
use serde::Serialize;

use crate::config::{CellAlgorithm, Experiment};
use crate::config::{EnvSpec, LoadedConfig};
use crate::error::{HarnessError, Result};
use crate::output::write_json_atomic;
use crate::simulate::run_cell;
use bandit_core::BanditAlgorithm;

/// Slack allowed on the `Ψ* ≤ K/2` audit.
pub const HALF_K_SLACK: f64 = 1e-6;

/// Checkpoints at `T/4`, `T/2` and `T` (duplicates and zero dropped).
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = [horizon / 4, horizon / 2, horizon]
        .into_iter()
        .filter(|&t| t > 0)
        .collect();
    out.dedup();
    out
}

/// Entropy of the initial optimal-arm distribution. All arms share one prior,
/// so that distribution is uniform.
pub fn prior_entropy(num_arms: usize) -> f64 {
    (num_arms as f64).ln()
}

/// `√(½ K H t)`.
pub fn ids_bound(num_arms: usize, entropy: f64, t: usize) -> f64 {
    (0.5 * num_arms as f64 * entropy * t as f64).sqrt()
}

/// `√(Ψ̄ H t)`.
pub fn psi_bound(psi_bar: f64, entropy: f64, t: usize) -> f64 {
    (psi_bar * entropy * t as f64).sqrt()
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn mean_regret_at(runs: &[RunRecord], t: usize) -> f64 {
    runs.iter().map(|r| r.regret_at(t)).sum::<f64>() / runs.len() as f64
}

/// Largest finite Ψ* over all runs and rounds.
pub fn max_psi(runs: &[RunRecord]) -> Option<f64> {
    runs.iter().filter_map(RunRecord::max_psi).reduce(f64::max)
}

/// Rounds, over all runs, whose Ψ* exceeds `K/2`.
pub fn half_k_violations(runs: &[RunRecord], num_arms: usize) -> usize {
    let limit = num_arms as f64 / 2.0 + HALF_K_SLACK;
    runs.iter()
        .flat_map(|r| &r.ids_diagnostics)
        .filter(|d| d.psi.is_finite() && d.psi > limit)
        .count()
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheckpoint {
    pub t: usize,
    pub mean_regret: f64,
    pub ids_bound: f64,
    /// `mean_regret / ids_bound`; at most 1 when the bound holds.
    pub ids_ratio: f64,
    pub psi_bound: Option<f64>,
    pub psi_ratio: Option<f64>,
    pub within_bound: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub version: String,
    pub config_hash: String,
    pub num_arms: usize,
    pub horizon: usize,
    pub seeds: usize,
    pub prior_entropy: f64,
    pub checkpoints: Vec<BoundCheckpoint>,
    pub max_psi: Option<f64>,
    pub half_k: f64,
    /// Rounds with `Ψ* > K/2`; informational only.
    pub half_k_violations: usize,
    pub passed: bool,
}

impl BoundReport {
    pub fn from_runs(
        runs: &[RunRecord],
        num_arms: usize,
        horizon: usize,
        config_hash: &str,
    ) -> Self {
        let entropy = prior_entropy(num_arms);
        let psi_bar = max_psi(runs);
        let checkpoints: Vec<BoundCheckpoint> = checkpoints(horizon)
            .into_iter()
            .map(|t| {
                let mean_regret = mean_regret_at(runs, t);
                let bound = ids_bound(num_arms, entropy, t);
                let psi = psi_bar.map(|p| psi_bound(p, entropy, t));
                BoundCheckpoint {
                    t,
                    mean_regret,
                    ids_bound: bound,
                    ids_ratio: mean_regret / bound,
                    psi_bound: psi,
                    psi_ratio: psi.map(|b| mean_regret / b),
                    within_bound: mean_regret <= bound,
                }
            })
            .collect();
        let passed = checkpoints.iter().all(|c| c.within_bound);
        Self {
            version: crate::VERSION.to_string(),
            config_hash: config_hash.to_string(),
            num_arms,
            horizon,
            seeds: runs.len(),
            prior_entropy: entropy,
            checkpoints,
            max_psi: psi_bar,
            half_k: num_arms as f64 / 2.0,
            half_k_violations: half_k_violations(runs, num_arms),
            passed,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:>8} {:>12} {:>12} {:>8} {:>12} {:>8}  status\n",
            "t", "mean_regret", "ids_bound", "ratio", "psi_bound", "ratio"
        );
        for c in &self.checkpoints {
            out.push_str(&format!(
                "{:>8} {:>12.4} {:>12.4} {:>8.4} {:>12} {:>8}  {}\n",
                c.t,
                c.mean_regret,
                c.ids_bound,
                c.ids_ratio,
                c.psi_bound.map_or("-".into(), |b| format!("{b:.4}")),
                c.psi_ratio.map_or("-".into(), |r| format!("{r:.4}")),
                if c.within_bound { "ok" } else { "EXCEEDED" }
            ));
        }
        let psi = self.max_psi.map_or("-".into(), |p| format!("{p:.6}"));
        out.push_str(&format!(
            "max psi* = {psi} (K/2 = {}); rounds above K/2: {}\n",
            self.half_k, self.half_k_violations
        ));
        out
    }
}

/// Runs IDS on the configured Bernoulli environment and checks the regret bound.
/// The report is written to `bound_check.json` in the output directory.
pub fn bound_check(loaded: &LoadedConfig, output: Option<&Path>) -> Result<BoundReport> {
    let env = loaded.environment()?;
    let EnvSpec::Bernoulli(means) = &env else {
        return Err(HarnessError::config(
            "environment.kind: bound-check needs a bernoulli environment",
        ));
    };
    let prior = loaded.prior()?;
    let grid = loaded.grid()?;
    let experiment = Experiment {
        cells: Vec::new(),
        env: env.clone(),
        horizon: loaded.horizon()?,
        seeds: loaded.seeds()?,
        prior,
        grid: grid.clone(),
        config_hash: loaded.config.hash(),
    };
    let ids = CellAlgorithm::Bandit(BanditAlgorithm::Ids { prior, grid });
    let runs = run_cell(&experiment, &ids)?;
    let report = BoundReport::from_runs(
        &runs,
        means.len(),
        experiment.horizon,
        &experiment.config_hash,
    );
    write_json_atomic(&loaded.output_dir(output).join("bound_check.json"), &report)?;
    Ok(report)
}
