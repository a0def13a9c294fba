//! Post-hoc evaluation of finished runs and CSV series for plotting.

use std::fs;
use std::path::{Path, PathBuf};

use crate::env::RenderStyle;
use crate::eval::{
    evaluate, read_eval_csv, retention_rate, summarize, write_eval_csv, write_summary_csv,
    TestSet,
};
use crate::par::Exec;
use crate::scientist::ProposalRecord;
use crate::scoring::{HypothesisSet, Statistician};

use super::logs::*;
use super::{OrchestratorError, RunConfig};

fn eval_files(dir: &Path) -> Result<Vec<PathBuf>, OrchestratorError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Summary table over every report in `eval_dir`.
pub(super) fn write_summary_from(eval_dir: &Path, out: &Path) -> Result<(), OrchestratorError> {
    let reports = eval_files(eval_dir)?
        .iter()
        .map(|p| read_eval_csv(p))
        .collect::<Result<Vec<_>, _>>()?;
    write_summary_csv(out, &summarize(&reports)?)?;
    Ok(())
}

/// Re-evaluates the hypotheses a run held at each of its evaluation points,
/// rendering the test set in `style`. Reports go to `eval_<style>/` and a
/// summary to `summary_<style>.csv`; returns the report directory.
pub fn evaluate_run(dir: &Path, style: RenderStyle, exec: Exec) -> Result<PathBuf, OrchestratorError> {
    let config = RunConfig::load(&dir.join(CONFIG_SNAPSHOT))?;
    let accepted: Vec<AcceptedEntry> = read_jsonl(&dir.join(ACCEPTED))?;
    if accepted.is_empty() {
        return Err(OrchestratorError::RunDir(format!(
            "{} has no completed iterations",
            dir.display()
        )));
    }
    let label = match style {
        RenderStyle::Standard => "standard",
        RenderStyle::Generalization => "generalization",
    };
    let out = dir.join(format!("eval_{label}"));
    fs::create_dir_all(&out)?;
    let backend = config.backend.build(&config.env)?;
    let statistician = Statistician::new(backend.as_ref()).with_exec(exec);
    let testset = TestSet::build(config.testset_seed, &config.env, &config.scene)?.restyled(style);

    let last = accepted.last().expect("non-empty").iteration + 1;
    let mut points = vec![(0, HypothesisSet::new(config.initial_hypotheses.clone()))];
    for e in &accepted {
        let after = e.iteration + 1;
        if after % config.eval_every == 0 || after == last {
            points.push((after, HypothesisSet::new(e.text.clone())));
        }
    }
    for (after, h) in points {
        statistician.clear_cache();
        let report = evaluate(&statistician, &h, &testset, &config.env, after)?;
        write_eval_csv(&out.join(format!("{after:04}.csv")), &report)?;
    }
    write_summary_from(&out, &dir.join(format!("summary_{label}.csv")))?;
    Ok(out)
}

/// Writes plot-ready series to `out`:
///
/// * `loglik.csv`: every evaluation, one row per type and point
/// * `collection.csv`: per-iteration type histograms
/// * `retention.csv`: rolling acceptance rate of proposals
/// * `summary.csv`: per-type AUC and final metrics
pub fn export_plot_data(dir: &Path, out: &Path, window: usize) -> Result<(), OrchestratorError> {
    fs::create_dir_all(out)?;
    let mut loglik = String::new();
    for (i, p) in eval_files(&dir.join("eval"))?.iter().enumerate() {
        let text = fs::read_to_string(p)?;
        for (j, line) in text.lines().enumerate() {
            if j == 0 && i > 0 {
                continue;
            }
            loglik.push_str(line);
            loglik.push('\n');
        }
    }
    fs::write(out.join("loglik.csv"), loglik)?;

    if dir.join(COLLECTION).exists() {
        fs::copy(dir.join(COLLECTION), out.join("collection.csv"))?;
    }

    let proposals: Vec<ProposalRecord> = read_jsonl(&dir.join(PROPOSALS))?;
    let rates = retention_rate(&proposals, window)?;
    let mut retention = String::from("index,iteration,step,rate\n");
    for (i, r) in rates.iter().enumerate() {
        let end = &proposals[i + window - 1];
        retention.push_str(&format!("{i},{},{},{r}\n", end.iteration, end.step));
    }
    fs::write(out.join("retention.csv"), retention)?;

    if !eval_files(&dir.join("eval"))?.is_empty() {
        write_summary_from(&dir.join("eval"), &out.join("summary.csv"))?;
    }
    Ok(())
}
