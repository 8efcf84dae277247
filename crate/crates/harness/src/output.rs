//! Result files: per-run CSV trajectories, IDS diagnostics and atomic writes.
//!
//! Floats are written with Rust's shortest round-trip formatting, rows end in
//! LF, and `context_id` is empty for non-contextual runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bandit_core::RunRecord;
use serde::Serialize;

use crate::error::{HarnessError, Result};

pub const TRAJECTORY_HEADER: &str =
    "run_id,algorithm,seed,t,context_id,arm,reward,regret_step,regret_cum";

pub fn trajectory_csv(run: &RunRecord) -> String {
    let id = run.run_id();
    let mut out = String::with_capacity(48 * (run.steps.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &run.steps {
        let context = s.context.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{id},{},{},{},{context},{},{},{},{}",
            run.algorithm,
            run.seed,
            s.t,
            s.arm,
            u8::from(s.reward),
            s.regret_step,
            s.regret_cum
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Per-round IDS internals, one wide row per round. Empty for other algorithms.
pub fn diagnostics_csv(run: &RunRecord) -> Option<String> {
    let first = run.ids_diagnostics.first()?;
    let k = first.alpha.len();
    let mut out = String::from("run_id,t");
    for name in ["alpha", "delta", "gain", "pi"] {
        for i in 0..k {
            write!(out, ",{name}_{i}").unwrap();
        }
    }
    out.push_str(",rho_star,psi\n");
    let id = run.run_id();
    for d in &run.ids_diagnostics {
        write!(out, "{id},{}", d.t).unwrap();
        for column in [&d.alpha, &d.delta, &d.gain, &d.pi] {
            for v in column.iter() {
                write!(out, ",{v}").unwrap();
            }
        }
        writeln!(out, ",{},{}", d.rho_star, d.psi).unwrap();
    }
    Some(out)
}

pub fn trajectory_file_name(run: &RunRecord) -> String {
    format!("{}.csv", run.run_id())
}

pub fn diagnostics_file_name(run: &RunRecord) -> String {
    format!("{}.diagnostics.csv", run.run_id())
}

fn create_dir_all(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| HarnessError::io(path, e))
}

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes a whole directory of files as one unit.
///
/// Files go to `<dir>.partial` first; the finished directory then replaces
/// `dir`. On error the previous contents of `dir` are left untouched.
pub fn write_dir_atomic(dir: &Path, files: &[(String, String)]) -> Result<()> {
    let mut staging = dir.as_os_str().to_owned();
    staging.push(".partial");
    let staging = PathBuf::from(staging);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| HarnessError::io(&staging, e))?;
    }
    create_dir_all(&staging)?;
    for (name, contents) in files {
        let path = staging.join(name);
        fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| HarnessError::io(dir, e))
}
