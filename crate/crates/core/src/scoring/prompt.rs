use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::env::{TransitionRecord, TransitionType};

use super::HypothesisSet;

const SYSTEM_V1: &str = include_str!("../../assets/prompts/v1/system.txt");
const STATISTICIAN_V1: &str = include_str!("../../assets/prompts/v1/statistician_user.txt");
const SCIENTIST_V1: &str = include_str!("../../assets/prompts/v1/scientist_user.txt");

/// Clause dropped from the statistician prompt when there are no hypotheses.
pub const HYPOTHESIS_CLAUSE: &str = "You know that:\n<hypothesis>\n";
pub const EMPTY_SLOT: &str = "None yet.";

/// A prompt split the way chat models consume it. `target` is the assistant
/// continuation to score; it is empty for generation requests.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub version: &'static str,
    pub system: &'static str,
    pub statistician: &'static str,
    pub scientist: &'static str,
}

impl PromptTemplates {
    pub fn v1() -> Self {
        PromptTemplates {
            version: "v1",
            system: SYSTEM_V1,
            statistician: STATISTICIAN_V1,
            scientist: SCIENTIST_V1,
        }
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::v1()
    }
}

/// Substitutes `<name>` placeholders in a single left-to-right pass, so text
/// inserted for one slot is never re-scanned for another.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(pos) = rest.find('<') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        match slots
            .iter()
            .find(|(name, _)| tail.strip_prefix('<').and_then(|t| t.strip_prefix(name)).is_some_and(|t| t.starts_with('>')))
        {
            Some((name, value)) => {
                out.push_str(value);
                rest = &tail[name.len() + 2..];
            }
            None => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn build_statistician_prompt(
    templates: &PromptTemplates,
    hypotheses: &HypothesisSet,
    state_text: &str,
    action_text: &str,
    change_text: &str,
) -> PromptBundle {
    let user = if hypotheses.is_empty() {
        let template = templates.statistician.replacen(HYPOTHESIS_CLAUSE, "", 1);
        fill(&template, &[("state", state_text), ("action", action_text)])
    } else {
        fill(
            templates.statistician,
            &[
                ("hypothesis", hypotheses.text.as_str()),
                ("state", state_text),
                ("action", action_text),
            ],
        )
    };
    PromptBundle {
        system: templates.system.to_string(),
        user,
        target: change_text.to_string(),
    }
}

/// One transition as a three-line block.
pub fn render_transition_block(record: &TransitionRecord) -> String {
    format!(
        "State: {}\nAction: {}\nChange: {}",
        record.state_text, record.action_text, record.change_text
    )
}

fn render_blocks(records: &[&TransitionRecord]) -> String {
    if records.is_empty() {
        return EMPTY_SLOT.to_string();
    }
    records
        .iter()
        .map(|r| render_transition_block(r))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Picks at most `budget` records for the scientist's context window.
///
/// Identical (state, action, change) triples are collapsed first. If more than
/// `budget` remain, each present transition type keeps at least one record and
/// the rest of the budget is shared in proportion to type frequency. Within a
/// type, records are taken at evenly spaced positions. Output keeps log order.
pub fn select_context(records: &[TransitionRecord], budget: usize) -> Vec<&TransitionRecord> {
    let mut seen = HashSet::new();
    let unique: Vec<&TransitionRecord> = records
        .iter()
        .filter(|r| seen.insert(r.text_key()))
        .collect();
    if unique.len() <= budget {
        return unique;
    }

    let mut by_type: Vec<Vec<usize>> = vec![Vec::new(); TransitionType::ALL.len()];
    for (i, r) in unique.iter().enumerate() {
        by_type[r.ttype.index()].push(i);
    }
    let present: Vec<usize> = (0..by_type.len()).filter(|&t| !by_type[t].is_empty()).collect();
    let total = unique.len() as f64;
    let mut quota = vec![0usize; by_type.len()];
    for &t in &present {
        quota[t] = 1;
    }
    let mut assigned: usize = quota.iter().sum();
    while assigned < budget {
        let next = present
            .iter()
            .copied()
            .filter(|&t| quota[t] < by_type[t].len())
            .max_by(|&a, &b| {
                let deficit = |t: usize| by_type[t].len() as f64 / total * budget as f64 - quota[t] as f64;
                deficit(a).total_cmp(&deficit(b)).then(b.cmp(&a))
            });
        match next {
            Some(t) => {
                quota[t] += 1;
                assigned += 1;
            }
            None => break,
        }
    }

    let mut keep = vec![false; unique.len()];
    for &t in &present {
        let members = &by_type[t];
        let q = quota[t];
        for j in 0..q {
            keep[members[j * members.len() / q]] = true;
        }
    }
    unique
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}

pub fn build_scientist_prompt(
    templates: &PromptTemplates,
    trajectories: &[TransitionRecord],
    previous: &HypothesisSet,
    worst: &[TransitionRecord],
    context_budget: usize,
) -> PromptBundle {
    let context = select_context(trajectories, context_budget);
    let worst: Vec<&TransitionRecord> = worst.iter().collect();
    let previous_text = if previous.is_empty() {
        EMPTY_SLOT
    } else {
        previous.text.as_str()
    };
    let user = fill(
        templates.scientist,
        &[
            ("trajectories", &render_blocks(&context)),
            ("previous hypothesis", previous_text),
            ("worst trajectories", &render_blocks(&worst)),
        ],
    );
    PromptBundle {
        system: templates.system.to_string(),
        user,
        target: String::new(),
    }
}
