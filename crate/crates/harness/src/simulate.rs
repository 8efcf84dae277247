//! The `simulate` command: runs every (algorithm × seed) replicate and writes results.

use std::path::{Path, PathBuf};

use bandit_core::simenv::{run_bandit, run_gts};
use bandit_core::{BernoulliEnv, ContextualEnv, Error as CoreError, RunRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    checkpoints, half_k_violations, ids_bound, max_psi, mean_regret_at, mean_std, prior_entropy,
};
use crate::config::{CellAlgorithm, EnvSpec, Experiment, LoadedConfig};
use crate::error::Result;
use crate::output::{
    diagnostics_csv, diagnostics_file_name, trajectory_csv, trajectory_file_name, write_dir_atomic,
    write_json_atomic,
};

/// Runs one replicate.
pub fn run_replicate(
    experiment: &Experiment,
    cell: &CellAlgorithm,
    seed: u64,
) -> Result<RunRecord> {
    let horizon = experiment.horizon;
    let mut run = match (cell, &experiment.env) {
        (CellAlgorithm::Bandit(algorithm), EnvSpec::Bernoulli(means)) => run_bandit(
            algorithm,
            BernoulliEnv::seeded(means.clone(), seed)?,
            horizon,
            seed,
        )?,
        (CellAlgorithm::Gts(pool), EnvSpec::Contextual { means, weights }) => {
            let env = ContextualEnv::seeded(means.clone(), weights.clone(), seed)?;
            run_gts(pool.clone(), env, horizon, seed)?
        }
        _ => {
            return Err(CoreError::InvalidEnvironment(format!(
                "{} cannot run in this environment",
                cell.name()
            ))
            .into())
        }
    };
    run.config_hash = Some(experiment.config_hash.clone());
    Ok(run)
}

/// Runs all seeds of one cell, in parallel, in seed order.
pub fn run_cell(experiment: &Experiment, cell: &CellAlgorithm) -> Result<Vec<RunRecord>> {
    experiment
        .seeds
        .par_iter()
        .map(|&seed| run_replicate(experiment, cell, seed))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointSummary {
    pub t: usize,
    pub mean_regret: f64,
    /// `√(½ K ln K t)`; absent for contextual cells.
    pub bound: Option<f64>,
    /// `mean_regret / bound`.
    pub margin_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub algorithm: String,
    pub runs: usize,
    pub final_regret_mean: f64,
    pub final_regret_std: f64,
    pub checkpoints: Vec<CheckpointSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_above_half_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_best_expert_weight: Option<f64>,
}

impl CellSummary {
    pub fn from_runs(algorithm: &str, runs: &[RunRecord], env: &EnvSpec, horizon: usize) -> Self {
        let finals: Vec<f64> = runs.iter().map(RunRecord::final_regret).collect();
        let (mean, std) = mean_std(&finals);
        let k = env.num_arms();
        let bandit = matches!(env, EnvSpec::Bernoulli(_));
        let checkpoints = checkpoints(horizon)
            .into_iter()
            .map(|t| {
                let mean_regret = mean_regret_at(runs, t);
                let bound = bandit.then(|| ids_bound(k, prior_entropy(k), t));
                CheckpointSummary {
                    t,
                    mean_regret,
                    bound,
                    margin_ratio: bound.map(|b| mean_regret / b),
                }
            })
            .collect();
        let is_ids = runs.iter().any(|r| !r.ids_diagnostics.is_empty());
        let best_weight: Vec<f64> = runs
            .iter()
            .filter_map(|r| Some(r.expert_posterior.as_ref()?[r.best_expert?]))
            .collect();
        Self {
            algorithm: algorithm.to_string(),
            runs: runs.len(),
            final_regret_mean: mean,
            final_regret_std: std,
            checkpoints,
            max_psi: if is_ids { max_psi(runs) } else { None },
            psi_above_half_k: is_ids.then(|| half_k_violations(runs, k)),
            mean_best_expert_weight: (!best_weight.is_empty()).then(|| mean_std(&best_weight).0),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{}: {} runs, final regret {:.4} ± {:.4}",
            self.algorithm, self.runs, self.final_regret_mean, self.final_regret_std
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub version: String,
    pub config_hash: String,
    pub horizon: usize,
    pub num_arms: usize,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellSummary>,
}

/// Where a simulation wrote its results.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub dir: PathBuf,
    pub summary: Summary,
}

/// Runs the experiment matrix. Each cell's files are written to
/// `<output>/<algorithm>/` as one unit, and `summary.json` last.
pub fn simulate(loaded: &LoadedConfig, output: Option<&Path>) -> Result<SimulationOutput> {
    let experiment = loaded.experiment()?;
    let dir = loaded.output_dir(output);
    let mut cells = Vec::with_capacity(experiment.cells.len());
    for cell in &experiment.cells {
        let runs = run_cell(&experiment, cell)?;
        let mut files = Vec::with_capacity(2 * runs.len());
        for run in &runs {
            files.push((trajectory_file_name(run), trajectory_csv(run)));
            if let Some(diag) = diagnostics_csv(run) {
                files.push((diagnostics_file_name(run), diag));
            }
        }
        write_dir_atomic(&dir.join(cell.name()), &files)?;
        cells.push(CellSummary::from_runs(
            cell.name(),
            &runs,
            &experiment.env,
            experiment.horizon,
        ));
    }
    let summary = Summary {
        version: crate::VERSION.to_string(),
        config_hash: experiment.config_hash.clone(),
        horizon: experiment.horizon,
        num_arms: experiment.env.num_arms(),
        seeds: experiment.seeds.clone(),
        cells,
    };
    write_json_atomic(&dir.join("summary.json"), &summary)?;
    Ok(SimulationOutput { dir, summary })
}
