//! A closed-form stand-in for a language model.
//!
//! Scoring reads the statistician prompt back into a state and action, runs the
//! simulator to find the true change, and returns:
//!
//! * `covered_logprob` (-1) for the true change when the hypotheses cover its type,
//! * `-(base_penalty + difficulty)` for an uncovered true change, with difficulty
//!   0..=5 from standing to growing a big herbivore,
//! * `wrong_logprob` (-12) for any other candidate.
//!
//! A type is covered when the hypothesis text contains every keyword of that
//! type's canonical rule. Generation emits the canonical rule of each type seen
//! in the scientist prompt's trajectories, each with probability
//! `inclusion_prob`, using the request seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    classify_change_text, parse_action, parse_state, render_change, transition, EnvConfig,
    RenderStyle, TransitionType,
};

use super::{GenerationParams, PromptBundle, ScoredContinuation, ScorerBackend, ScoringError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub covered_logprob: f64,
    pub base_penalty: f64,
    pub wrong_logprob: f64,
    pub inclusion_prob: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            covered_logprob: -1.0,
            base_penalty: 4.0,
            wrong_logprob: -12.0,
            inclusion_prob: 0.7,
        }
    }
}

pub fn difficulty(ttype: TransitionType) -> f64 {
    ttype.index() as f64
}

pub fn canonical_rule(ttype: TransitionType) -> &'static str {
    match ttype {
        TransitionType::Standing => "When you go to an object, you are standing on it.",
        TransitionType::Holding1 => {
            "When you pick up the first object, in your inventory there is the object."
        }
        TransitionType::Holding2 => {
            "When you pick up a second object, in your inventory there are the two objects."
        }
        TransitionType::GrowPlant => {
            "Giving water to a plant seed makes the objects transform into the grown plant."
        }
        TransitionType::GrowSmallHerbivore => {
            "Giving a grown plant to a baby small herbivore makes the objects transform into the grown small herbivore."
        }
        TransitionType::GrowBigHerbivore => {
            "Giving two grown plants to a baby big herbivore makes the objects transform into the grown big herbivore."
        }
    }
}

fn keywords(ttype: TransitionType) -> &'static [&'static str] {
    match ttype {
        TransitionType::Standing => &["go to", "standing on"],
        TransitionType::Holding1 => &["pick up", "there is the"],
        TransitionType::Holding2 => &["pick up", "there are the"],
        TransitionType::GrowPlant => &["water", "seed", "transform"],
        TransitionType::GrowSmallHerbivore => &["grown plant", "small herbivore"],
        TransitionType::GrowBigHerbivore => &["two grown plants", "big herbivore"],
    }
}

/// Whether `hypotheses` mentions every keyword of the rule for `ttype`.
pub fn covers(hypotheses: &str, ttype: TransitionType) -> bool {
    let lower = hypotheses.to_lowercase();
    keywords(ttype).iter().all(|k| lower.contains(k))
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let len = text[from..].find(end)?;
    Some(&text[from..from + len])
}

#[derive(Debug, Clone, Default)]
pub struct SyntheticBackend {
    config: SyntheticConfig,
    env: EnvConfig,
}

impl SyntheticBackend {
    pub fn new(config: SyntheticConfig, env: EnvConfig) -> Self {
        SyntheticBackend { config, env }
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.config
    }

    /// Log-probability the formula assigns to the true change of a `ttype` transition.
    pub fn true_change_logprob(&self, hypotheses: &str, ttype: TransitionType) -> f64 {
        if covers(hypotheses, ttype) {
            self.config.covered_logprob
        } else {
            -(self.config.base_penalty + difficulty(ttype))
        }
    }

    fn true_change(&self, user: &str) -> Result<Option<(String, TransitionType)>, ScoringError> {
        let decode = |e: crate::env::EnvError| ScoringError::Decode(e.to_string());
        let state_text = between(user, "The last state was: ", "\nThe last action was: ")
            .ok_or_else(|| ScoringError::Decode("no state in prompt".into()))?;
        let action_text = between(user, "The last action was: ", "\nThe change is:")
            .ok_or_else(|| ScoringError::Decode("no action in prompt".into()))?;
        let state = parse_state(state_text).map_err(decode)?;
        let action = parse_action(action_text).map_err(decode)?;
        let style = if state_text.contains("In your inventory") {
            RenderStyle::Standard
        } else {
            RenderStyle::Generalization
        };
        Ok(transition(&state, &action, &self.env)
            .ok()
            .map(|(after, ttype)| (render_change(ttype, &after, style), ttype)))
    }
}

impl ScorerBackend for SyntheticBackend {
    fn score(&self, bundle: &PromptBundle) -> Result<ScoredContinuation, ScoringError> {
        let hypotheses = between(&bundle.user, "You know that:\n", "\nYour objective is").unwrap_or("");
        let total_logprob = match self.true_change(&bundle.user)? {
            Some((truth, ttype)) if truth == bundle.target.trim() => {
                self.true_change_logprob(hypotheses, ttype)
            }
            _ => self.config.wrong_logprob,
        };
        Ok(ScoredContinuation {
            total_logprob,
            token_count: bundle.target.split_whitespace().count().max(1),
        })
    }

    fn generate(
        &self,
        bundle: &PromptBundle,
        params: &GenerationParams,
    ) -> Result<String, ScoringError> {
        let trajectories = between(
            &bundle.user,
            "Your previous experiences were:\n",
            "\nCan you find",
        )
        .unwrap_or("");
        let mut present = [false; 6];
        for line in trajectories.lines() {
            if let Some(t) = line.strip_prefix("Change: ").and_then(classify_change_text) {
                present[t.index()] = true;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let rules: Vec<&str> = TransitionType::ALL
            .iter()
            .filter(|t| present[t.index()])
            .filter(|_| rng.gen::<f64>() < self.config.inclusion_prob)
            .map(|&t| canonical_rule(t))
            .collect();
        Ok(rules.join("\n"))
    }

    fn name(&self) -> &str {
        "synthetic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{
        legal_actions, new_scene, step, Action, EnvState, ObjectInstance, SceneSpec,
        TransitionRecord, Variety,
    };
    use crate::scoring::{build_scientist_prompt, build_statistician_prompt, HypothesisSet, PromptTemplates};

    fn grow_plant_record() -> TransitionRecord {
        let mut s = EnvState::new(vec![ObjectInstance::seed(Variety::Potato), ObjectInstance::water()]);
        s.inventory.push(ObjectInstance::water());
        s.standing_on = Some(0);
        step(&s, &Action::Release("water".into()), &EnvConfig::default(), RenderStyle::Standard)
            .unwrap()
            .1
    }

    fn score_with(h: &str, r: &TransitionRecord, change: &str) -> f64 {
        let b = build_statistician_prompt(
            &PromptTemplates::v1(),
            &HypothesisSet::new(h),
            &r.state_text,
            &r.action_text,
            change,
        );
        SyntheticBackend::default().score(&b).unwrap().total_logprob
    }

    #[test]
    fn formula_values() {
        let r = grow_plant_record();
        let rule = canonical_rule(TransitionType::GrowPlant);
        assert_eq!(score_with(rule, &r, &r.change_text), -1.0);
        assert_eq!(score_with("", &r, &r.change_text), -7.0);
        assert_eq!(score_with(rule, &r, "You are standing on the water."), -12.0);
    }

    #[test]
    fn canonical_rules_cover_their_own_type() {
        for t in TransitionType::ALL {
            assert!(covers(canonical_rule(t), t), "{t}");
        }
        assert!(!covers(canonical_rule(TransitionType::GrowPlant), TransitionType::GrowSmallHerbivore));
        assert!(!covers(canonical_rule(TransitionType::Holding1), TransitionType::Holding2));
    }

    #[test]
    fn generalization_prompts_are_understood() {
        let r = grow_plant_record().restyled(RenderStyle::Generalization);
        assert_eq!(r.change_text, "The potato results from combining the objects.");
        assert_eq!(score_with("", &r, &r.change_text), -7.0);
        assert_eq!(score_with("", &r, "The objects transform into the potato."), -12.0);
    }

    #[test]
    fn true_change_beats_every_other_candidate() {
        let cfg = EnvConfig::default();
        let state = new_scene(&SceneSpec::default(), 3, 16).unwrap();
        let mut s = state;
        for i in 0..12 {
            let legal = legal_actions(&s, &cfg);
            let a = legal[i % legal.len()].clone();
            let (next, rec) = step(&s, &a, &cfg, RenderStyle::Standard).unwrap();
            let truth = score_with("", &rec, &rec.change_text);
            for other in &legal {
                let (_, alt) = step(&s, other, &cfg, RenderStyle::Standard).unwrap();
                if alt.change_text != rec.change_text {
                    assert!(truth > score_with("", &rec, &alt.change_text));
                }
            }
            s = next;
        }
    }

    #[test]
    fn generation_only_mentions_present_types() {
        let mut s = EnvState::new(vec![ObjectInstance::water(), ObjectInstance::seed(Variety::Pea)]);
        let mut recs = Vec::new();
        for name in ["water", "pea seed", "water"] {
            let (next, rec) =
                step(&s, &Action::GoTo(name.into()), &EnvConfig::default(), RenderStyle::Standard).unwrap();
            recs.push(rec);
            s = next;
        }
        let bundle = build_scientist_prompt(&PromptTemplates::v1(), &recs, &HypothesisSet::empty(), &recs, 30);
        let backend = SyntheticBackend::default();
        let mut seen_rule = false;
        for seed in 0..50 {
            let text = backend
                .generate(&bundle, &GenerationParams { seed, ..Default::default() })
                .unwrap();
            assert!(text.is_empty() || text == canonical_rule(TransitionType::Standing));
            seen_rule |= !text.is_empty();
        }
        assert!(seen_rule);
        let params = GenerationParams { seed: 9, ..Default::default() };
        assert_eq!(
            backend.generate(&bundle, &params).unwrap(),
            backend.generate(&bundle, &params).unwrap()
        );
    }

    #[test]
    fn grow_plant_rule_inclusion_rate() {
        let r = grow_plant_record();
        let bundle = build_scientist_prompt(&PromptTemplates::v1(), &[r.clone()], &HypothesisSet::empty(), &[r], 30);
        let backend = SyntheticBackend::default();
        let n = 2000;
        let hits = (0..n)
            .filter(|&seed| {
                backend
                    .generate(&bundle, &GenerationParams { seed, ..Default::default() })
                    .unwrap()
                    .contains(canonical_rule(TransitionType::GrowPlant))
            })
            .count();
        let rate = hits as f64 / n as f64;
        // binomial sd at p = 0.7, n = 2000 is about 0.01
        assert!((rate - 0.7).abs() < 0.04, "{rate}");
    }
}
