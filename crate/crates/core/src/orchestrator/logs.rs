//! Append-only run logs and the resume checkpoint.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::experimenter::{Oracle, TypeStats};
use crate::scoring::HypothesisSet;

use super::OrchestratorError;

pub const CONFIG_SNAPSHOT: &str = "config.snapshot";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const PROPOSALS: &str = "hypotheses.jsonl";
pub const ACCEPTED: &str = "hypotheses_accepted.jsonl";
pub const ITERATIONS: &str = "iterations.jsonl";
pub const COLLECTION: &str = "collection_stats.csv";
pub const PPO_STATS: &str = "ppo/ppo_stats.csv";
pub const SUMMARY: &str = "summary.csv";

pub const COLLECTION_HEADER: &str =
    "iteration,scope,Standing,Holding1,Holding2,GrowPlant,GrowSH,GrowBH";
pub const PPO_HEADER: &str = "iteration,policy_loss,value_loss,entropy,approx_kl,clip_fraction,total,grad_norm,explained_variance,minibatches,aborted,mean_reward";

/// One line of `iterations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: u32,
    /// Type histogram of everything collected.
    pub collected: [usize; 6],
    /// Type histogram of what the scientist saw.
    pub forwarded: [usize; 6],
    pub proposals: usize,
    pub accepted: usize,
    pub hypotheses: String,
    pub score: f64,
    /// Relative path of the evaluation written after this iteration.
    pub eval: Option<String>,
}

/// One line of `hypotheses_accepted.jsonl`: the hypotheses after an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedEntry {
    pub iteration: u32,
    pub text: String,
    pub score: f64,
    pub created_at: Option<(u32, u32)>,
}

/// Everything carried from one iteration to the next that is not derived
/// from seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub next_iteration: u32,
    pub hypotheses: HypothesisSet,
    pub oracle: Option<Oracle>,
    pub type_stats: Option<TypeStats>,
    /// Policy file under `ppo/`, relative to the run directory.
    pub policy_file: Option<String>,
}

pub fn append_line(path: &Path, line: &str) -> Result<(), OrchestratorError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn append_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OrchestratorError> {
    let line = serde_json::to_string(value).map_err(|e| OrchestratorError::Format(e.to_string()))?;
    append_line(path, &line)
}

/// Appends a CSV row, writing the header first if the file is new.
pub fn append_csv(path: &Path, header: &str, row: &str) -> Result<(), OrchestratorError> {
    if !path.exists() {
        append_line(path, header)?;
    }
    append_line(path, row)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, OrchestratorError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                OrchestratorError::Format(format!("{}:{}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

/// Writes through a temporary file so a crash never leaves a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OrchestratorError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(dir: &Path) -> Result<Option<Checkpoint>, OrchestratorError> {
    let path = dir.join(CHECKPOINT);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| OrchestratorError::Format(format!("{}: {e}", path.display())))
}

pub fn write_checkpoint(dir: &Path, cp: &Checkpoint) -> Result<(), OrchestratorError> {
    let text =
        serde_json::to_string_pretty(cp).map_err(|e| OrchestratorError::Format(e.to_string()))?;
    write_atomic(&dir.join(CHECKPOINT), text.as_bytes())
}

fn keep_lines(path: &Path, keep: impl Fn(&str) -> Result<bool, OrchestratorError>) -> Result<(), OrchestratorError> {
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path)?;
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if keep(line)? {
            out.push_str(line);
            out.push('\n');
        }
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Deserialize)]
struct IterationField {
    iteration: u32,
}

/// Drops everything a killed run wrote for iterations at or past `next`.
pub fn truncate_logs(dir: &Path, next: u32) -> Result<(), OrchestratorError> {
    for name in [PROPOSALS, ACCEPTED, ITERATIONS] {
        keep_lines(&dir.join(name), |l| {
            let f: IterationField = serde_json::from_str(l)
                .map_err(|e| OrchestratorError::Format(format!("{name}: {e}")))?;
            Ok(f.iteration < next)
        })?;
    }
    for name in [COLLECTION, PPO_STATS] {
        keep_lines(&dir.join(name), |l| {
            let first = l.split(',').next().unwrap_or("");
            Ok(match first.parse::<u32>() {
                Ok(i) => i < next,
                Err(_) => first == "iteration",
            })
        })?;
    }
    for (sub, prefix, limit) in [("transitions", "t", next), ("eval", "", next + 1)] {
        let d = dir.join(sub);
        if !d.exists() {
            continue;
        }
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            if let Some(n) = stem.strip_prefix(prefix).and_then(|s| s.parse::<u32>().ok()) {
                // eval/####.csv is named after the iteration count it follows.
                if n >= limit {
                    fs::remove_file(&path)?;
                }
            }
        }
    }
    let summary = dir.join(SUMMARY);
    if summary.exists() {
        fs::remove_file(summary)?;
    }
    Ok(())
}

pub fn transitions_path(dir: &Path, iteration: u32) -> PathBuf {
    dir.join("transitions").join(format!("t{iteration:04}.jsonl"))
}

pub fn eval_name(after: u32) -> String {
    format!("eval/{after:04}.csv")
}

pub fn policy_name(iteration: u32) -> String {
    format!("ppo/policy_{iteration:04}.bin")
}
