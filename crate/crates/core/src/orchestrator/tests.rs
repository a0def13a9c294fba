use std::collections::BTreeMap;
use std::path::Path;

use super::logs::{read_jsonl, AcceptedEntry, IterationLog, ACCEPTED, ITERATIONS, PROPOSALS};
use super::*;
use crate::rl::PpoConfig;
use crate::scientist::ProposalRecord;

fn small(experimenter: ExperimenterSpec) -> RunConfig {
    RunConfig {
        iterations: 3,
        collect_n: 30,
        rl_collect_n: 60,
        eval_every: 2,
        seed: 11,
        experimenter,
        ppo: PpoConfig {
            n_envs: 2,
            episodes_per_env: 1,
            n_epochs: 2,
            batch_size: 32,
            ..PpoConfig::default()
        },
        ..RunConfig::default()
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn defaults_and_toml_round_trip() {
    let c = RunConfig::default();
    assert_eq!((c.iterations, c.n_steps, c.collect_n, c.rl_collect_n), (400, 5, 150, 3600));
    assert_eq!(c.scientist.context_budget, 30);
    let text = c.to_toml().unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), c);

    let rl = RunConfig::from_toml("[experimenter]\nkind = \"alpexp\"\n").unwrap();
    assert_eq!(rl.experimenter, ExperimenterSpec::Alpexp { alpha: 0.9 });
    rl.validate().unwrap();
    let http = RunConfig::from_toml("[backend]\nkind = \"http\"\nurl = \"http://x/v1\"\n").unwrap();
    match http.backend {
        BackendSpec::Http(h) => assert_eq!(h.url, "http://x/v1"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn validation() {
    let bad = |c: RunConfig| assert!(c.validate().is_err(), "{c:?}");
    bad(RunConfig { collect_n: 0, ..RunConfig::default() });
    bad(RunConfig { iterations: 0, ..RunConfig::default() });
    bad(RunConfig { rl_collect_n: 100, ..RunConfig::default() });
    bad(RunConfig {
        experimenter: ExperimenterSpec::Alpexp { alpha: 1.5 },
        ..RunConfig::default()
    });
    bad(RunConfig {
        experimenter: ExperimenterSpec::Logp,
        rl_collect_n: 3000,
        ..RunConfig::default()
    });
    assert!(RunConfig::from_toml("iterations = \"many\"").is_err());
}

#[test]
fn derived_seeds_differ() {
    let mut seen = std::collections::HashSet::new();
    for it in 0..50 {
        for stream in 0..6 {
            assert!(seen.insert(derive_seed(7, it, stream)));
        }
    }
    assert_ne!(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
}

#[test]
fn two_iterations_log_every_event() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig {
        iterations: 2,
        ..small(ExperimenterSpec::Random)
    };
    let out = run(&config, tmp.path(), &RunOptions::default()).unwrap();
    assert!(out.finished);
    assert_eq!(out.completed, 2);
    let iters: Vec<IterationLog> = read_jsonl(&tmp.path().join(ITERATIONS)).unwrap();
    let props: Vec<ProposalRecord> = read_jsonl(&tmp.path().join(PROPOSALS)).unwrap();
    let acc: Vec<AcceptedEntry> = read_jsonl(&tmp.path().join(ACCEPTED)).unwrap();
    assert_eq!(iters.len(), 2);
    assert_eq!(props.len(), 10);
    assert_eq!(acc.len(), 2);
    assert_eq!(iters.iter().map(|l| l.iteration).collect::<Vec<_>>(), vec![0, 1]);
    for l in &iters {
        assert_eq!(l.forwarded.iter().sum::<usize>(), 30);
    }
    for f in ["config.snapshot", "eval/0000.csv", "eval/0002.csv", "summary.csv",
        "transitions/t0000.jsonl", "transitions/t0001.jsonl", "collection_stats.csv"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    assert!(!tmp.path().join("eval/0001.csv").exists());
    // Refusing to clobber an existing run.
    assert!(run(&config, tmp.path(), &RunOptions::default()).is_err());
}

#[test]
fn identical_seeds_give_identical_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let config = small(ExperimenterSpec::Curriculum { thresholds: [1, 2] });
    run(&config, a.path(), &RunOptions::default()).unwrap();
    let seq = RunOptions {
        exec: crate::par::Exec::Sequential,
        ..RunOptions::default()
    };
    run(&config, b.path(), &seq).unwrap();
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

fn check_resume(config: RunConfig, kill_at: u32) {
    let (full, cut) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&config, full.path(), &RunOptions::default()).unwrap();
    let stopped = run(
        &config,
        cut.path(),
        &RunOptions {
            stop_after: Some(kill_at),
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(!stopped.finished);
    assert_eq!(stopped.completed, kill_at);
    // Leftovers of a half-written iteration must be discarded.
    let garbage = format!("{{\"iteration\":{kill_at},\"junk\":true}}\n");
    for name in [PROPOSALS, ACCEPTED] {
        let p = cut.path().join(name);
        let mut text = std::fs::read_to_string(&p).unwrap();
        text.push_str(&garbage);
        std::fs::write(&p, text).unwrap();
    }
    std::fs::write(cut.path().join(format!("transitions/t{kill_at:04}.jsonl")), "partial").unwrap();
    let resumed = run(
        &config,
        cut.path(),
        &RunOptions {
            resume: true,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(resumed.finished);
    assert_eq!(snapshot(full.path()), snapshot(cut.path()));
}

#[test]
fn resume_matches_uninterrupted_oracle_run() {
    check_resume(small(ExperimenterSpec::Hardest), 1);
}

#[test]
fn resume_matches_uninterrupted_rl_run() {
    check_resume(small(ExperimenterSpec::Alpexp { alpha: 0.5 }), 2);
}

#[test]
fn resume_restores_the_replay_window() {
    check_resume(
        RunConfig {
            replay_iterations: 1,
            ..small(ExperimenterSpec::Hardest)
        },
        2,
    );
}

#[test]
fn replay_only_changes_later_iterations() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let online = small(ExperimenterSpec::Random);
    run(&online, a.path(), &RunOptions::default()).unwrap();
    let replay = RunConfig {
        replay_iterations: 2,
        ..online
    };
    run(&replay, b.path(), &RunOptions::default()).unwrap();
    let la: Vec<IterationLog> = read_jsonl(&a.path().join(ITERATIONS)).unwrap();
    let lb: Vec<IterationLog> = read_jsonl(&b.path().join(ITERATIONS)).unwrap();
    // With nothing to replay yet the first iteration is unaffected.
    assert_eq!(la[0], lb[0]);
    // Later scores sum over more evidence.
    assert!(lb[2].score < la[2].score, "{} vs {}", lb[2].score, la[2].score);
}

#[test]
fn resume_rejects_a_different_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small(ExperimenterSpec::Random);
    run(&config, tmp.path(), &RunOptions { stop_after: Some(1), ..RunOptions::default() }).unwrap();
    let other = RunConfig { seed: 12, ..config };
    let err = run(&other, tmp.path(), &RunOptions { resume: true, ..RunOptions::default() });
    assert!(matches!(err, Err(OrchestratorError::RunDir(_))));
}

#[test]
fn rl_run_forwards_the_tail_and_logs_training() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig {
        iterations: 2,
        ..small(ExperimenterSpec::Logp)
    };
    run(&config, tmp.path(), &RunOptions::default()).unwrap();
    let iters: Vec<IterationLog> = read_jsonl(&tmp.path().join(ITERATIONS)).unwrap();
    for l in &iters {
        assert_eq!(l.collected.iter().sum::<usize>(), 60);
        assert_eq!(l.forwarded.iter().sum::<usize>(), 30);
    }
    let stats = std::fs::read_to_string(tmp.path().join("ppo/ppo_stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 3);
    assert!(tmp.path().join("ppo/policy_0001.bin").exists());
    assert!(!tmp.path().join("ppo/policy_0000.bin").exists());
}

#[test]
fn frozen_hypotheses_never_change() {
    let tmp = tempfile::tempdir().unwrap();
    let config = RunConfig {
        iterations: 2,
        n_steps: 0,
        freeze_hypotheses: true,
        initial_hypotheses: "Nothing ever happens.".into(),
        ..small(ExperimenterSpec::Random)
    };
    run(&config, tmp.path(), &RunOptions::default()).unwrap();
    let acc: Vec<AcceptedEntry> = read_jsonl(&tmp.path().join(ACCEPTED)).unwrap();
    assert!(acc.iter().all(|e| e.text == "Nothing ever happens."));
    let props: Vec<ProposalRecord> = read_jsonl(&tmp.path().join(PROPOSALS)).unwrap();
    assert!(props.is_empty());
}

#[test]
fn unreachable_backend_fails_without_losing_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    let config = RunConfig {
        backend: BackendSpec::Http(crate::scoring::HttpConfig {
            url: format!("http://127.0.0.1:{port}/v1"),
            api_key_env: None,
            attempts: 1,
            backoff_ms: 0,
            timeout_secs: 2,
            ..Default::default()
        }),
        ..small(ExperimenterSpec::Random)
    };
    assert!(run(&config, tmp.path(), &RunOptions::default()).is_err());
    assert!(tmp.path().join("config.snapshot").exists());
    // The same call with resume set retries from the start.
    assert!(run(&config, tmp.path(), &RunOptions { resume: true, ..RunOptions::default() }).is_err());
}

#[test]
fn plot_data_and_generalization_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small(ExperimenterSpec::Curriculum { thresholds: [1, 2] });
    run(&config, tmp.path(), &RunOptions::default()).unwrap();
    let out = tmp.path().join("plots");
    export_plot_data(tmp.path(), &out, 5).unwrap();
    let loglik = std::fs::read_to_string(out.join("loglik.csv")).unwrap();
    // Header plus 7 rows for each of the evaluations after 0, 2 and 3 iterations.
    assert_eq!(loglik.lines().count(), 1 + 3 * 7);
    let retention = std::fs::read_to_string(out.join("retention.csv")).unwrap();
    assert_eq!(retention.lines().count(), 1 + 15 - 5 + 1);
    assert!(out.join("summary.csv").exists() && out.join("collection.csv").exists());

    let dir = evaluate_run(tmp.path(), crate::env::RenderStyle::Generalization, crate::par::Exec::Parallel).unwrap();
    assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 3);
    assert!(tmp.path().join("summary_generalization.csv").exists());
}
