use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::TransitionType;

use super::EvalError;

/// Test-set metrics for the hypotheses held after `iteration` (0 is the
/// empty-hypothesis baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iteration: u32,
    pub mean_ll: [f64; 6],
    pub overall_ll: f64,
    pub top3: [f64; 6],
    pub overall_top3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub ttype: String,
    pub baseline_ll: f64,
    pub final_ll: f64,
    pub final_top3: f64,
    pub auc: f64,
}

const EVAL_HEADER: &str = "iteration,ttype,mean_ll,top3_acc";

/// One row per type plus an `all` row.
pub fn write_eval_csv(path: &Path, report: &EvalReport) -> Result<(), EvalError> {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    for t in TransitionType::ALL {
        let i = t.index();
        out.push_str(&format!(
            "{},{},{},{}\n",
            report.iteration, t, report.mean_ll[i], report.top3[i]
        ));
    }
    out.push_str(&format!(
        "{},all,{},{}\n",
        report.iteration, report.overall_ll, report.overall_top3
    ));
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_eval_csv(path: &Path) -> Result<EvalReport, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(EVAL_HEADER) {
        return Err(EvalError::Format(format!("{}: unexpected header", path.display())));
    }
    let bad = |line: &str| EvalError::Format(format!("{}: bad row {line:?}", path.display()));
    let mut report = EvalReport {
        iteration: 0,
        mean_ll: [f64::NAN; 6],
        overall_ll: f64::NAN,
        top3: [f64::NAN; 6],
        overall_top3: f64::NAN,
    };
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(line));
        }
        report.iteration = cols[0].parse().map_err(|_| bad(line))?;
        let ll: f64 = cols[2].parse().map_err(|_| bad(line))?;
        let acc: f64 = cols[3].parse().map_err(|_| bad(line))?;
        if cols[1] == "all" {
            report.overall_ll = ll;
            report.overall_top3 = acc;
        } else {
            let t = TransitionType::from_name(cols[1]).ok_or_else(|| bad(line))?;
            report.mean_ll[t.index()] = ll;
            report.top3[t.index()] = acc;
        }
    }
    Ok(report)
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), EvalError> {
    let mut out = String::from("ttype,baseline_ll,final_ll,final_top3,auc\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.ttype, r.baseline_ll, r.final_ll, r.final_top3, r.auc
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
