//! Held-out test set and the metrics computed on it: per-type
//! log-likelihood, normalized AUC, top-k accuracy under constrained
//! decoding, and the proposal retention rate.

mod report;

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    legal_actions, step, Action, EnvConfig, EnvState, Playground, RenderStyle, SceneSpec,
    TransitionRecord, TransitionType,
};
use crate::experimenter::{type_histogram, ExperimenterError, Oracle, OracleKind, TEST_DISTRIBUTION};
use crate::par;
use crate::scientist::ProposalRecord;
use crate::scoring::{HypothesisSet, ScoringError, Statistician};

pub use report::{read_eval_csv, write_eval_csv, write_summary_csv, EvalReport, SummaryRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Experimenter(#[from] ExperimenterError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed data: {0}")]
    Format(String),
}

/// Records with the fixed per-type counts, never shown to the scientist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub seed: u64,
    pub records: Vec<TransitionRecord>,
}

impl TestSet {
    /// Draws the 168 target types in shuffled order and produces each one
    /// with the shortest script from the current scene.
    pub fn build(seed: u64, env: &EnvConfig, scene: &SceneSpec) -> Result<Self, EvalError> {
        let total: usize = TEST_DISTRIBUTION.iter().sum();
        let mut playground = Playground::new(env.clone(), scene.clone(), RenderStyle::Standard, seed)
            .map_err(ExperimenterError::from)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7E57_5E7D);
        let records = Oracle::new(OracleKind::Ideal).collect(&mut playground, 0, total, &mut rng)?;
        Ok(TestSet { seed, records })
    }

    pub fn counts(&self) -> [usize; 6] {
        type_histogram(&self.records)
    }

    pub fn restyled(&self, style: RenderStyle) -> Self {
        TestSet {
            seed: self.seed,
            records: self.records.iter().map(|r| r.restyled(style)).collect(),
        }
    }

    /// One JSON record per line.
    pub fn save_jsonl(&self, path: &Path) -> Result<(), EvalError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| EvalError::Format(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_jsonl(path: &Path, seed: u64) -> Result<Self, EvalError> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line)
                    .map_err(|e| EvalError::Format(format!("line {}: {e}", i + 1)))?,
            );
        }
        Ok(TestSet { seed, records })
    }
}

fn per_type_mean(records: &[TransitionRecord], values: &[f64]) -> [f64; 6] {
    let mut sums = [0.0; 6];
    let mut counts = [0usize; 6];
    for (r, v) in records.iter().zip(values) {
        sums[r.ttype.index()] += v;
        counts[r.ttype.index()] += 1;
    }
    let mut out = [f64::NAN; 6];
    for i in 0..6 {
        if counts[i] > 0 {
            out[i] = sums[i] / counts[i] as f64;
        }
    }
    out
}

/// Mean log-likelihood of the true change per type (NaN for absent types),
/// plus the mean over all records.
pub fn eval_loglik(
    statistician: &Statistician,
    h: &HypothesisSet,
    testset: &TestSet,
) -> Result<([f64; 6], f64), EvalError> {
    if testset.records.is_empty() {
        return Err(EvalError::InvalidArgument("empty test set".into()));
    }
    let scores = statistician.score_records(h, &testset.records)?;
    let overall = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((per_type_mean(&testset.records, &scores), overall))
}

/// Normalized area under the log-likelihood curve for evaluations at every
/// iteration: `series[t]` is the value after iteration `t`, `series[0]` the
/// starting point (not part of the average).
pub fn auc(series: &[f64], baseline: f64) -> Result<f64, EvalError> {
    if !(baseline < 0.0) {
        return Err(EvalError::InvalidArgument(format!(
            "baseline must be negative, got {baseline}"
        )));
    }
    if series.len() < 2 {
        return Err(EvalError::InvalidArgument("need at least one iteration".into()));
    }
    let t = (series.len() - 1) as f64;
    let ratio: f64 = series[1..].iter().map(|l| l / baseline).sum();
    Ok(1.0 - ratio / t)
}

/// [`auc`] for evaluations at a subset of iterations. Points must start at 0,
/// increase strictly and end at the final iteration; values in between are
/// linearly interpolated, which equals trapezoidal integration of the curve.
pub fn auc_sampled(points: &[(u32, f64)], baseline: f64) -> Result<f64, EvalError> {
    if points.first().map(|p| p.0) != Some(0) {
        return Err(EvalError::InvalidArgument("samples must start at iteration 0".into()));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(EvalError::InvalidArgument("sample iterations must increase".into()));
    }
    let last = points.last().expect("non-empty").0 as usize;
    let mut dense = vec![0.0; last + 1];
    dense[0] = points[0].1;
    for w in points.windows(2) {
        let ((t0, y0), (t1, y1)) = (w[0], w[1]);
        for t in t0..=t1 {
            let f = (t - t0) as f64 / (t1 - t0) as f64;
            dense[t as usize] = y0 + f * (y1 - y0);
        }
    }
    auc(&dense, baseline)
}

/// Distinct (action, change) pairs reachable in one step, in canonical
/// action order.
pub fn enumerate_valid_next(
    state: &EnvState,
    config: &EnvConfig,
    style: RenderStyle,
) -> Vec<(Action, String)> {
    let mut seen = HashSet::new();
    legal_actions(state, config)
        .into_iter()
        .filter_map(|a| {
            let (_, rec) = step(state, &a, config, style).ok()?;
            seen.insert(rec.change_text.clone()).then_some((a, rec.change_text))
        })
        .collect()
}

/// Whether the true change ranks within the top `k` given the scores of the
/// other candidates. Candidates scoring exactly the same as the truth count against it.
pub fn in_top_k(true_score: f64, other_scores: &[f64], k: usize) -> bool {
    let ahead = other_scores.iter().filter(|&&s| s >= true_score).count();
    ahead < k
}

/// Fraction of records per type whose true change is among the `k` best of
/// all valid next changes, scored under the record's own state and action;
/// also the fraction over all records.
pub fn constrained_topk(
    statistician: &Statistician,
    h: &HypothesisSet,
    testset: &TestSet,
    k: usize,
    config: &EnvConfig,
) -> Result<([f64; 6], f64), EvalError> {
    if testset.records.is_empty() {
        return Err(EvalError::InvalidArgument("empty test set".into()));
    }
    if k == 0 {
        return Err(EvalError::InvalidArgument("k must be at least 1".into()));
    }
    let hits = par::try_map(statistician.exec(), &testset.records, |r| {
        let mut candidates: Vec<String> =
            enumerate_valid_next(&r.state_before, config, r.style)
                .into_iter()
                .map(|(_, c)| c)
                .collect();
        if !candidates.contains(&r.change_text) {
            candidates.push(r.change_text.clone());
        }
        let mut truth = None;
        let mut others = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let s = statistician.score_change(h, &r.state_text, &r.action_text, c)?;
            if *c == r.change_text {
                truth = Some(s);
            } else {
                others.push(s);
            }
        }
        let truth = truth.expect("true change is a candidate");
        Ok::<f64, ScoringError>(if in_top_k(truth, &others, k) { 1.0 } else { 0.0 })
    })?;
    let overall = hits.iter().sum::<f64>() / hits.len() as f64;
    Ok((per_type_mean(&testset.records, &hits), overall))
}

/// Rolling acceptance fraction over `window` consecutive proposals; entry
/// `i` covers proposals `i .. i + window`.
pub fn retention_rate(proposals: &[ProposalRecord], window: usize) -> Result<Vec<f64>, EvalError> {
    if window == 0 {
        return Err(EvalError::InvalidArgument("window must be at least 1".into()));
    }
    Ok(proposals
        .windows(window)
        .map(|w| w.iter().filter(|p| p.accepted).count() as f64 / window as f64)
        .collect())
}

/// Runs both test-set metrics for one hypothesis set.
pub fn evaluate(
    statistician: &Statistician,
    h: &HypothesisSet,
    testset: &TestSet,
    config: &EnvConfig,
    iteration: u32,
) -> Result<EvalReport, EvalError> {
    let (mean_ll, overall_ll) = eval_loglik(statistician, h, testset)?;
    let (top3, overall_top3) = constrained_topk(statistician, h, testset, 3, config)?;
    Ok(EvalReport {
        iteration,
        mean_ll,
        overall_ll,
        top3,
        overall_top3,
    })
}

/// Per-type AUC from a sequence of reports, the first being the baseline.
pub fn summarize(reports: &[EvalReport]) -> Result<Vec<SummaryRow>, EvalError> {
    let base = reports
        .first()
        .filter(|r| r.iteration == 0)
        .ok_or_else(|| EvalError::InvalidArgument("missing iteration-0 baseline".into()))?;
    let mut rows = Vec::new();
    let mut push = |name: String, pick: &dyn Fn(&EvalReport) -> (f64, f64)| -> Result<(), EvalError> {
        let points: Vec<(u32, f64)> = reports.iter().map(|r| (r.iteration, pick(r).0)).collect();
        let last = reports.last().expect("non-empty");
        let auc = if reports.len() > 1 {
            auc_sampled(&points, pick(base).0)?
        } else {
            f64::NAN
        };
        rows.push(SummaryRow {
            ttype: name,
            baseline_ll: pick(base).0,
            final_ll: pick(last).0,
            final_top3: pick(last).1,
            auc,
        });
        Ok(())
    };
    for t in TransitionType::ALL {
        push(t.name().to_string(), &|r: &EvalReport| (r.mean_ll[t.index()], r.top3[t.index()]))?;
    }
    push("all".into(), &|r: &EvalReport| (r.overall_ll, r.overall_top3))?;
    Ok(rows)
}

#[cfg(test)]
mod tests;
