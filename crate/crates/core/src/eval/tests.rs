use super::*;
use crate::env::{ObjectInstance, Variety};
use crate::scoring::{
    canonical_rule, PromptBundle, ScoredContinuation, ScorerBackend, SyntheticBackend,
};

fn testset(seed: u64) -> TestSet {
    TestSet::build(seed, &EnvConfig::default(), &SceneSpec::default()).unwrap()
}

fn all_rules() -> HypothesisSet {
    HypothesisSet::new(
        TransitionType::ALL
            .iter()
            .map(|&t| canonical_rule(t))
            .collect::<Vec<_>>()
            .join("\n"),
    )
}

#[test]
fn testset_counts_are_exact() {
    let a = testset(0);
    let b = testset(1);
    assert_eq!(a.counts(), [120, 20, 7, 12, 6, 3]);
    assert_eq!(b.counts(), [120, 20, 7, 12, 6, 3]);
    assert_ne!(a.records, b.records);
    assert_eq!(a, testset(0));
}

#[test]
fn testset_jsonl_round_trip() {
    let a = testset(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("test.jsonl");
    a.save_jsonl(&path).unwrap();
    assert_eq!(TestSet::load_jsonl(&path, 2).unwrap(), a);
}

#[test]
fn synthetic_loglik_per_type() {
    let backend = SyntheticBackend::default();
    let st = Statistician::new(&backend);
    let ts = testset(3);
    let (empty, _) = eval_loglik(&st, &HypothesisSet::empty(), &ts).unwrap();
    assert_eq!(empty, [-4.0, -5.0, -6.0, -7.0, -8.0, -9.0]);
    let (full, overall) = eval_loglik(&st, &all_rules(), &ts).unwrap();
    assert_eq!(full, [-1.0; 6]);
    assert_eq!(overall, -1.0);

    let mut shuffled = ts.clone();
    shuffled.records.reverse();
    assert_eq!(eval_loglik(&st, &HypothesisSet::empty(), &shuffled).unwrap().0, empty);
}

#[test]
fn auc_reference_values() {
    let b = -6.5;
    assert!((auc(&[b; 11], b).unwrap() - 0.0).abs() < 1e-12);
    let mut zero = vec![0.0; 11];
    zero[0] = b;
    assert!((auc(&zero, b).unwrap() - 1.0).abs() < 1e-12);
    assert!(auc(&[b, 2.0 * b, 2.0 * b], b).unwrap() < 0.0);
    // halfway between baseline and perfect
    assert!((auc(&[b, b / 2.0, b / 2.0], b).unwrap() - 0.5).abs() < 1e-12);
    assert!(auc(&[0.0, 0.0], 0.0).is_err());
    assert!(auc(&[b], b).is_err());
}

#[test]
fn sampled_auc_interpolates() {
    let b = -4.0;
    let dense: Vec<f64> = (0..=20).map(|t| b + 0.1 * t as f64).collect();
    let points: Vec<(u32, f64)> = (0..=20).step_by(5).map(|t| (t as u32, dense[t])).collect();
    let a = auc(&dense, b).unwrap();
    assert!((auc_sampled(&points, b).unwrap() - a).abs() < 1e-12);
    assert!(auc_sampled(&[(1, b), (2, b)], b).is_err());
    assert!(auc_sampled(&[(0, b), (0, b)], b).is_err());
}

#[test]
fn valid_next_changes() {
    let cfg = EnvConfig::default();
    let fresh = crate::env::new_scene(&SceneSpec::default(), 5, 16).unwrap();
    let cands = enumerate_valid_next(&fresh, &cfg, RenderStyle::Standard);
    let names: HashSet<String> = fresh.scene.iter().map(|o| o.display_name()).collect();
    assert_eq!(cands.len(), names.len());
    assert!(cands.iter().all(|(a, c)| matches!(a, Action::GoTo(_)) && c.starts_with("You are standing on")));

    let mut s = EnvState::new(vec![ObjectInstance::seed(Variety::Beet), ObjectInstance::water()]);
    s.inventory.push(ObjectInstance::water());
    s.standing_on = Some(0);
    let cands = enumerate_valid_next(&s, &cfg, RenderStyle::Standard);
    assert!(cands.iter().any(|(_, c)| c == "The objects transform into the beet."));

    let single = EnvState::new(vec![ObjectInstance::water()]);
    assert_eq!(enumerate_valid_next(&single, &cfg, RenderStyle::Standard).len(), 1);
}

#[test]
fn top_k_is_conservative_on_ties() {
    assert!(in_top_k(-1.0, &[-2.0, -3.0, -4.0], 1));
    assert!(in_top_k(-3.0, &[-1.0, -2.0, -4.0], 3));
    assert!(!in_top_k(-3.0, &[-1.0, -2.0, -3.0], 3));
    assert!(in_top_k(-3.0, &[-1.0, -3.0], 3));
}

/// Ranks the true change last by inverting the synthetic scores.
struct Adversarial(SyntheticBackend);

impl ScorerBackend for Adversarial {
    fn score(&self, bundle: &PromptBundle) -> Result<ScoredContinuation, ScoringError> {
        let s = self.0.score(bundle)?;
        Ok(ScoredContinuation {
            total_logprob: -13.0 - s.total_logprob,
            ..s
        })
    }
    fn generate(&self, b: &PromptBundle, p: &crate::scoring::GenerationParams) -> Result<String, ScoringError> {
        self.0.generate(b, p)
    }
    fn name(&self) -> &str {
        "adversarial"
    }
}

#[test]
fn constrained_decoding_extremes() {
    let cfg = EnvConfig::default();
    let ts = testset(4);
    let synthetic = SyntheticBackend::default();
    let st = Statistician::new(&synthetic);
    for h in [HypothesisSet::empty(), all_rules()] {
        let (acc, overall) = constrained_topk(&st, &h, &ts, 3, &cfg).unwrap();
        assert_eq!(acc, [1.0; 6]);
        assert_eq!(overall, 1.0);
    }
    let adv = Adversarial(SyntheticBackend::default());
    let st = Statistician::new(&adv);
    let (acc, _) = constrained_topk(&st, &HypothesisSet::empty(), &ts, 3, &cfg).unwrap();
    for t in TransitionType::ALL {
        let recs: Vec<&TransitionRecord> = ts.records.iter().filter(|r| r.ttype == t).collect();
        let small = recs
            .iter()
            .filter(|r| enumerate_valid_next(&r.state_before, &cfg, r.style).len() <= 3)
            .count();
        assert_eq!(acc[t.index()], small as f64 / recs.len() as f64, "{t}");
    }
    assert!(constrained_topk(&st, &HypothesisSet::empty(), &ts, 0, &cfg).is_err());
}

fn proposals(pattern: &[bool]) -> Vec<ProposalRecord> {
    pattern
        .iter()
        .enumerate()
        .map(|(i, &accepted)| ProposalRecord {
            iteration: (i / 5) as u32,
            step: (i % 5) as u32,
            candidate_text: String::new(),
            candidate_score: None,
            score_before: 0.0,
            u: 0.5,
            accepted,
            failure: None,
        })
        .collect()
}

#[test]
fn retention_rates() {
    assert_eq!(retention_rate(&proposals(&[true; 12]), 4).unwrap(), vec![1.0; 9]);
    assert_eq!(retention_rate(&proposals(&[false; 6]), 3).unwrap(), vec![0.0; 4]);
    let one_in_five: Vec<bool> = (0..25).map(|i| i % 5 == 2).collect();
    let r = retention_rate(&proposals(&one_in_five), 5).unwrap();
    assert!(r.iter().all(|&x| (x - 0.2).abs() < 1e-15));
    assert!(retention_rate(&proposals(&[true]), 0).is_err());
}

#[test]
fn generalization_keeps_records() {
    let ts = testset(6);
    let g = ts.restyled(RenderStyle::Generalization);
    assert_eq!(g.counts(), ts.counts());
    for (a, b) in ts.records.iter().zip(&g.records) {
        assert_eq!(a.ttype, b.ttype);
        assert_eq!(a.state_before, b.state_before);
        assert_eq!(crate::env::classify_change_text(&b.change_text), Some(b.ttype));
        assert_ne!(a.change_text, b.change_text);
    }
    let backend = SyntheticBackend::default();
    let st = Statistician::new(&backend);
    let (ll, _) = eval_loglik(&st, &HypothesisSet::empty(), &g).unwrap();
    assert_eq!(ll, [-4.0, -5.0, -6.0, -7.0, -8.0, -9.0]);
}

#[test]
fn reports_round_trip_and_summarize() {
    let backend = SyntheticBackend::default();
    let st = Statistician::new(&backend);
    let ts = testset(7);
    let cfg = EnvConfig::default();
    let r0 = evaluate(&st, &HypothesisSet::empty(), &ts, &cfg, 0).unwrap();
    let r2 = evaluate(&st, &all_rules(), &ts, &cfg, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("0002.csv");
    write_eval_csv(&path, &r2).unwrap();
    assert_eq!(read_eval_csv(&path).unwrap(), r2);

    let rows = summarize(&[r0.clone(), r2]).unwrap();
    assert_eq!(rows.len(), 7);
    // linear rise from the baseline to -1 over two iterations
    let gp = &rows[TransitionType::GrowPlant.index()];
    let expect = 1.0 - ((-4.0 / -7.0) + (-1.0 / -7.0)) / 2.0;
    assert!((gp.auc - expect).abs() < 1e-12);
    assert_eq!(rows[6].ttype, "all");
    assert!(summarize(&[]).is_err());
    write_summary_csv(&dir.path().join("summary.csv"), &rows).unwrap();
}
