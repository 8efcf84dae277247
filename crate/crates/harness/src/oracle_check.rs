//! The `oracle-check` command: quadrature α and M against Monte Carlo.

use std::path::Path;

use bandit_core::ids::{compute_alpha, compute_m};
use bandit_core::oracle::{mc_alpha, mc_m_to_precision, MIN_SAMPLES};
use bandit_core::simenv::{stream_rng, Stream};
use bandit_core::{BetaPosterior, Grid};
use rand::Rng;
use serde::Serialize;

use crate::config::{LoadedConfig, OracleConfig};
use crate::error::{HarnessError, Result};
use crate::output::write_json_atomic;

#[derive(Debug, Clone, Serialize)]
pub struct StateComparison {
    pub index: usize,
    pub arms: Vec<(f64, f64)>,
    pub alpha_quadrature: Vec<f64>,
    pub alpha_monte_carlo: Vec<f64>,
    pub alpha_max_abs_diff: f64,
    /// Over the rows the oracle resolved.
    pub m_max_abs_diff: f64,
    /// Rows whose conditioning event was too rare to resolve within the draw cap.
    pub insufficient_rows: Vec<usize>,
    pub m_samples: u64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryCheck {
    pub num_arms: usize,
    /// `max |α_i − 1/K|`.
    pub alpha_deviation: f64,
    /// Largest spread among diagonal and among off-diagonal entries of M.
    pub m_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub version: String,
    pub tolerance: f64,
    pub samples: usize,
    pub grid_points: usize,
    pub states: Vec<StateComparison>,
    pub alpha_max_abs_diff: f64,
    pub m_max_abs_diff: f64,
    pub insufficient_rows: usize,
    pub symmetry: Option<SymmetryCheck>,
    pub passed: bool,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn validate(cfg: &OracleConfig) -> Result<()> {
    let bad = |field: &str, msg: &str| Err(HarnessError::config(format!("oracle.{field}: {msg}")));
    if cfg.states == 0 {
        return bad("states", "must be at least 1");
    }
    if cfg.arms.is_empty() || cfg.arms.iter().any(|&k| k < 2) {
        return bad("arms", "every entry must be at least 2");
    }
    if !(cfg.min_count > 0.0 && cfg.min_count <= cfg.max_count && cfg.max_count.is_finite()) {
        return bad("min_count", "need 0 < min_count <= max_count");
    }
    if cfg.samples < MIN_SAMPLES {
        return bad("samples", &format!("must be at least {MIN_SAMPLES}"));
    }
    if !(cfg.tolerance > 0.0) {
        return bad("tolerance", "must be positive");
    }
    if cfg.m_target_se.is_some_and(|s| !(s > 0.0)) {
        return bad("m_target_se", "must be positive");
    }
    if cfg.max_samples < cfg.samples {
        return bad("max_samples", "must be at least oracle.samples");
    }
    if cfg.symmetry_arms == 1 {
        return bad("symmetry_arms", "use 0 to skip, or at least 2");
    }
    Ok(())
}

/// Random states with pseudo-counts uniform in `[min_count, max_count]`.
pub fn random_states(cfg: &OracleConfig) -> Vec<BetaPosterior> {
    let mut rng = stream_rng(cfg.seed, Stream::Oracle);
    (0..cfg.states)
        .map(|n| {
            let k = cfg.arms[n % cfg.arms.len()];
            let arms = (0..k)
                .map(|_| {
                    (
                        rng.random_range(cfg.min_count..=cfg.max_count),
                        rng.random_range(cfg.min_count..=cfg.max_count),
                    )
                })
                .collect();
            BetaPosterior::new(arms).expect("pseudo-counts are positive")
        })
        .collect()
}

pub fn compare_state(
    index: usize,
    state: &BetaPosterior,
    cfg: &OracleConfig,
    grid: &Grid,
    seed: u64,
) -> Result<StateComparison> {
    let mut rng = stream_rng(seed, Stream::Oracle);
    let alpha = compute_alpha(state, grid);
    let m = compute_m(state, &alpha, grid)?;
    let mc = mc_alpha(state, cfg.samples, &mut rng)?;
    let target = cfg.m_target_se.unwrap_or(cfg.tolerance / 5.0);
    let mc_m = mc_m_to_precision(state, cfg.samples, target, cfg.max_samples, &mut rng)?;
    let alpha_diff = max_abs_diff(&alpha, &mc);
    let m_diff = (0..state.num_arms())
        .filter(|&i| mc_m.is_sufficient(i))
        .map(|i| max_abs_diff(m.row(i), mc_m.m.row(i)))
        .fold(0.0, f64::max);
    Ok(StateComparison {
        index,
        arms: state.arms().to_vec(),
        alpha_quadrature: alpha,
        alpha_monte_carlo: mc,
        alpha_max_abs_diff: alpha_diff,
        m_max_abs_diff: m_diff,
        insufficient_rows: mc_m.insufficient_rows.clone(),
        m_samples: mc_m.samples,
        passed: alpha_diff <= cfg.tolerance && m_diff <= cfg.tolerance,
    })
}

pub fn symmetry_check(num_arms: usize, grid: &Grid, tolerance: f64) -> Result<SymmetryCheck> {
    let state = BetaPosterior::new(vec![(2.0, 2.0); num_arms])?;
    let alpha = compute_alpha(&state, grid);
    let m = compute_m(&state, &alpha, grid)?;
    let uniform = 1.0 / num_arms as f64;
    let alpha_deviation = alpha
        .iter()
        .map(|a| (a - uniform).abs())
        .fold(0.0, f64::max);
    let (diag, off) = (m.get(0, 0), m.get(0, 1));
    let mut m_deviation: f64 = 0.0;
    for i in 0..num_arms {
        for j in 0..num_arms {
            let reference = if i == j { diag } else { off };
            m_deviation = m_deviation.max((m.get(i, j) - reference).abs());
        }
    }
    Ok(SymmetryCheck {
        num_arms,
        alpha_deviation,
        m_deviation,
        tolerance,
        passed: alpha_deviation < tolerance && m_deviation < tolerance,
    })
}

/// Runs the full comparison suite.
pub fn oracle_report(cfg: &OracleConfig, grid: &Grid) -> Result<OracleReport> {
    validate(cfg)?;
    let mut seeds = stream_rng(cfg.seed ^ 0x5eed, Stream::Oracle);
    let states = random_states(cfg)
        .iter()
        .enumerate()
        .map(|(n, s)| compare_state(n, s, cfg, grid, seeds.random()))
        .collect::<Result<Vec<_>>>()?;
    let symmetry = match cfg.symmetry_arms {
        0 => None,
        k => Some(symmetry_check(k, grid, cfg.symmetry_tolerance)?),
    };
    let passed = states.iter().all(|s| s.passed) && symmetry.as_ref().is_none_or(|s| s.passed);
    Ok(OracleReport {
        version: crate::VERSION.to_string(),
        tolerance: cfg.tolerance,
        samples: cfg.samples,
        grid_points: grid.len(),
        alpha_max_abs_diff: states
            .iter()
            .map(|s| s.alpha_max_abs_diff)
            .fold(0.0, f64::max),
        m_max_abs_diff: states.iter().map(|s| s.m_max_abs_diff).fold(0.0, f64::max),
        insufficient_rows: states.iter().map(|s| s.insufficient_rows.len()).sum(),
        states,
        symmetry,
        passed,
    })
}

impl OracleReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:>5} {:>3} {:>12} {:>12} {:>12} {:>11}  status\n",
            "state", "K", "alpha_diff", "m_diff", "m_samples", "unresolved"
        );
        for s in &self.states {
            out.push_str(&format!(
                "{:>5} {:>3} {:>12.3e} {:>12.3e} {:>12} {:>11}  {}\n",
                s.index,
                s.arms.len(),
                s.alpha_max_abs_diff,
                s.m_max_abs_diff,
                s.m_samples,
                s.insufficient_rows.len(),
                if s.passed { "ok" } else { "FAIL" }
            ));
        }
        out.push_str(&format!(
            "max |alpha diff| = {:.3e}, max |M diff| = {:.3e} (tolerance {:.1e})\n",
            self.alpha_max_abs_diff, self.m_max_abs_diff, self.tolerance
        ));
        if let Some(sym) = &self.symmetry {
            out.push_str(&format!(
                "symmetry ({} identical arms): alpha deviation {:.3e}, M deviation {:.3e} {}\n",
                sym.num_arms,
                sym.alpha_deviation,
                sym.m_deviation,
                if sym.passed { "ok" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Runs the suite from a config and writes `oracle_check.json`.
pub fn oracle_check(loaded: &LoadedConfig, output: Option<&Path>) -> Result<OracleReport> {
    let report = oracle_report(&loaded.config.oracle, &loaded.grid()?)?;
    write_json_atomic(
        &loaded.output_dir(output).join("oracle_check.json"),
        &report,
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> OracleConfig {
        OracleConfig {
            states: 2,
            arms: vec![2, 3],
            samples: 200_000,
            max_samples: 400_000,
            tolerance: 2e-2,
            ..OracleConfig::default()
        }
    }

    #[test]
    fn loose_tolerance_passes() {
        let report = oracle_report(&small(), &Grid::uniform(1001).unwrap()).unwrap();
        assert!(report.passed, "{}", report.render());
        assert!(report.symmetry.unwrap().alpha_deviation < 1e-3);
    }

    #[test]
    fn impossible_tolerance_fails_with_diffs() {
        let cfg = OracleConfig {
            tolerance: 1e-9,
            m_target_se: Some(1e-2),
            ..small()
        };
        let report = oracle_report(&cfg, &Grid::uniform(1001).unwrap()).unwrap();
        assert!(!report.passed);
        assert!(report.alpha_max_abs_diff > 1e-9);
        assert!(report.render().contains("FAIL"));
    }

    #[test]
    fn invalid_settings_name_the_field() {
        let cfg = OracleConfig {
            arms: vec![1],
            ..small()
        };
        let err = oracle_report(&cfg, &Grid::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("oracle.arms"), "{err}");
    }
}
