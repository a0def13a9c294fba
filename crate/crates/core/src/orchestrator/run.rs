use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Playground, TransitionRecord};
use crate::eval::{evaluate, write_eval_csv, TestSet};
use crate::experimenter::{compute_rewards, type_histogram, Oracle, TypeStats};
use crate::par::Exec;
use crate::rl::{collect_rollouts, load_checkpoint, ppo_update, save_checkpoint, Adam, Policy};
use crate::scientist::{evaluate_hypotheses, refine, MetropolisState, Scientist};
use crate::scoring::{HypothesisSet, Statistician};

use super::logs::*;
use super::{derive_seed, OrchestratorError, RunConfig};

const STREAM_ENV: u64 = 1;
const STREAM_ORACLE: u64 = 2;
const STREAM_SCIENTIST: u64 = 3;
const STREAM_ROLLOUT: u64 = 4;
const STREAM_PPO: u64 = 5;
const STREAM_INIT: u64 = 6;

#[derive(Debug, Clone)]
#[derive(Default)]
pub struct RunOptions {
    pub exec: Exec,
    /// Continue the run found in the directory instead of starting afresh.
    pub resume: bool,
    /// Return after this many completed iterations, as if killed.
    pub stop_after: Option<u32>,
}


#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    /// Iterations completed, including those from before a resume.
    pub completed: u32,
    pub finished: bool,
    pub hypotheses: HypothesisSet,
}

struct Learner {
    policy: Policy,
    adam: Adam,
    stats: TypeStats,
}

fn start_fresh(config: &RunConfig, dir: &Path) -> Result<Checkpoint, OrchestratorError> {
    if dir.join(CONFIG_SNAPSHOT).exists() {
        return Err(OrchestratorError::RunDir(format!(
            "{} already holds a run; resume it or pick another directory",
            dir.display()
        )));
    }
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(CONFIG_SNAPSHOT), config.to_toml()?.as_bytes())?;
    Ok(Checkpoint {
        next_iteration: 0,
        hypotheses: HypothesisSet::new(config.initial_hypotheses.clone()),
        oracle: config.experimenter.oracle().map(Oracle::new),
        type_stats: None,
        policy_file: None,
    })
}

fn resume_from(config: &RunConfig, dir: &Path) -> Result<Checkpoint, OrchestratorError> {
    let snapshot = RunConfig::load(&dir.join(CONFIG_SNAPSHOT))
        .map_err(|e| OrchestratorError::RunDir(format!("cannot read the config snapshot: {e}")))?;
    if &snapshot != config {
        return Err(OrchestratorError::RunDir(
            "config differs from the snapshot of the run being resumed".into(),
        ));
    }
    let cp = match read_checkpoint(dir)? {
        Some(cp) => cp,
        None => Checkpoint {
            next_iteration: 0,
            hypotheses: HypothesisSet::new(config.initial_hypotheses.clone()),
            oracle: config.experimenter.oracle().map(Oracle::new),
            type_stats: None,
            policy_file: None,
        },
    };
    truncate_logs(dir, cp.next_iteration)?;
    Ok(cp)
}

fn load_learner(config: &RunConfig, dir: &Path, cp: &Checkpoint) -> Result<Option<Learner>, OrchestratorError> {
    let Some(signal) = config.experimenter.signal() else {
        return Ok(None);
    };
    let alpha = match signal {
        crate::experimenter::RewardSignal::AlpExp { alpha } => alpha,
        _ => 0.0,
    };
    let (policy, adam) = match &cp.policy_file {
        Some(name) => load_checkpoint(&dir.join(name))?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, u64::MAX, STREAM_INIT));
            let policy = Policy::new(&mut rng);
            let adam = Adam::new(policy.n_params());
            (policy, adam)
        }
    };
    let stats = match &cp.type_stats {
        Some(s) => s.clone(),
        None => TypeStats::new(alpha)?,
    };
    Ok(Some(Learner { policy, adam, stats }))
}

fn histogram_row(iteration: u32, scope: &str, h: [usize; 6]) -> String {
    let cells: Vec<String> = h.iter().map(|c| c.to_string()).collect();
    format!("{iteration},{scope},{}", cells.join(","))
}

fn write_transitions(path: &Path, records: &[TransitionRecord]) -> Result<(), OrchestratorError> {
    let mut text = String::new();
    for r in records {
        text.push_str(
            &serde_json::to_string(r).map_err(|e| OrchestratorError::Format(e.to_string()))?,
        );
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Runs (or resumes) the outer loop in `dir`.
///
/// A failure of the backend leaves the checkpoint at the last completed
/// iteration, so the same call with `resume` set picks up from there.
pub fn run(config: &RunConfig, dir: &Path, options: &RunOptions) -> Result<RunOutcome, OrchestratorError> {
    config.validate()?;
    let mut cp = if options.resume {
        resume_from(config, dir)?
    } else {
        start_fresh(config, dir)?
    };
    for sub in ["transitions", "eval", "ppo"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let exec = options.exec;
    let backend = config.backend.build(&config.env)?;
    let statistician = Statistician::new(backend.as_ref()).with_exec(exec);
    let scientist = Scientist::new(backend.as_ref(), config.scientist.clone());
    let testset = TestSet::build(config.testset_seed, &config.env, &config.scene)?.restyled(config.style);
    if !dir.join("testset.jsonl").exists() {
        testset.save_jsonl(&dir.join("testset.jsonl"))?;
    }
    let mut learner = load_learner(config, dir, &cp)?;

    if cp.next_iteration == 0 && !dir.join(eval_name(0)).exists() {
        let report = evaluate(&statistician, &cp.hypotheses, &testset, &config.env, 0)?;
        write_eval_csv(&dir.join(eval_name(0)), &report)?;
    }

    // Evidence of earlier iterations, oldest first, when replay is on.
    let mut replay: VecDeque<Vec<TransitionRecord>> = VecDeque::new();
    let first = cp.next_iteration.saturating_sub(config.replay_iterations as u32);
    for t in first..cp.next_iteration {
        replay.push_back(read_jsonl(&transitions_path(dir, t))?);
    }

    let seed = config.seed;
    while cp.next_iteration < config.iterations {
        if options.stop_after.is_some_and(|s| cp.next_iteration >= s) {
            break;
        }
        let t = cp.next_iteration;
        let ti = t as u64;
        statistician.clear_cache();

        // Evidence.
        let mut buffer = None;
        let data: Vec<TransitionRecord> = if let Some(oracle) = cp.oracle.as_mut() {
            let mut playground = Playground::new(
                config.env.clone(),
                config.scene.clone(),
                config.style,
                derive_seed(seed, ti, STREAM_ENV),
            )
            .map_err(crate::experimenter::ExperimenterError::from)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ti, STREAM_ORACLE));
            oracle.collect(&mut playground, t, config.collect_n, &mut rng)?
        } else {
            let l = learner.as_ref().expect("RL runs have a learner");
            let buf = collect_rollouts(
                &l.policy,
                &config.env,
                &config.scene,
                config.style,
                &config.ppo,
                derive_seed(seed, ti, STREAM_ROLLOUT),
                exec,
            )?;
            let tail = buf.records[buf.records.len() - config.collect_n..].to_vec();
            buffer = Some(buf);
            tail
        };
        let collected = match &buffer {
            Some(b) => type_histogram(&b.records),
            None => type_histogram(&data),
        };
        let forwarded = type_histogram(&data);
        write_transitions(&transitions_path(dir, t), &data)?;

        // Hypotheses.
        let evidence: Vec<TransitionRecord> = if config.replay_iterations == 0 {
            data.clone()
        } else {
            replay.iter().flatten().chain(&data).cloned().collect()
        };
        let h_prev = cp.hypotheses.clone();
        let (state, proposals) = if config.freeze_hypotheses {
            let score = evaluate_hypotheses(&statistician, &h_prev, &evidence)?;
            (
                MetropolisState {
                    current: h_prev.clone(),
                    current_score: score,
                },
                Vec::new(),
            )
        } else {
            let start = MetropolisState::start(&statistician, h_prev.clone(), &evidence)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ti, STREAM_SCIENTIST));
            refine(start, &scientist, &statistician, &evidence, config.n_steps, t, &mut rng)?
        };

        // Experimenter update.
        let mut policy_file = cp.policy_file.clone();
        let mut stats_row = None;
        if let (Some(mut buf), Some(l)) = (buffer, learner.as_mut()) {
            let signal = config.experimenter.signal().expect("RL runs have a signal");
            let rewards = compute_rewards(
                signal,
                &statistician,
                &h_prev,
                &state.current,
                &buf.records,
                &mut l.stats,
            )?;
            let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
            buf.set_rewards(rewards)?;
            buf.compute_advantages(config.ppo.gamma, config.ppo.gae_lambda);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ti, STREAM_PPO));
            let u = ppo_update(&mut l.policy, &mut l.adam, &buf, &config.ppo, &mut rng, exec)?;
            if u.aborted {
                log::warn!("iteration {t}: PPO update rolled back after a non-finite loss");
            }
            let name = policy_name(t);
            save_checkpoint(&dir.join(&name), &l.policy, &l.adam)?;
            policy_file = Some(name);
            stats_row = Some(format!(
                "{t},{},{},{},{},{},{},{},{},{},{},{}",
                u.loss.policy_loss,
                u.loss.value_loss,
                u.loss.entropy,
                u.loss.approx_kl,
                u.loss.clip_fraction,
                u.loss.total,
                u.grad_norm,
                u.explained_variance,
                u.minibatches,
                u.aborted,
                mean_reward
            ));
        }

        // Evaluation.
        let after = t + 1;
        let eval = if after % config.eval_every == 0 || after == config.iterations {
            let report = evaluate(&statistician, &state.current, &testset, &config.env, after)?;
            let name = eval_name(after);
            write_eval_csv(&dir.join(&name), &report)?;
            Some(name)
        } else {
            None
        };

        // Logs, then the checkpoint that makes them count.
        for p in &proposals {
            append_json(&dir.join(PROPOSALS), p)?;
        }
        append_json(
            &dir.join(ACCEPTED),
            &AcceptedEntry {
                iteration: t,
                text: state.current.text.clone(),
                score: state.current_score,
                created_at: state.current.created_at,
            },
        )?;
        append_csv(&dir.join(COLLECTION), COLLECTION_HEADER, &histogram_row(t, "collected", collected))?;
        append_csv(&dir.join(COLLECTION), COLLECTION_HEADER, &histogram_row(t, "forwarded", forwarded))?;
        if let Some(row) = stats_row {
            append_csv(&dir.join(PPO_STATS), PPO_HEADER, &row)?;
        }
        append_json(
            &dir.join(ITERATIONS),
            &IterationLog {
                iteration: t,
                collected,
                forwarded,
                proposals: proposals.len(),
                accepted: proposals.iter().filter(|p| p.accepted).count(),
                hypotheses: state.current.text.clone(),
                score: state.current_score,
                eval,
            },
        )?;
        if config.replay_iterations > 0 {
            replay.push_back(data);
            if replay.len() > config.replay_iterations {
                replay.pop_front();
            }
        }
        let old_policy = cp.policy_file.take();
        cp = Checkpoint {
            next_iteration: after,
            hypotheses: state.current,
            oracle: cp.oracle.take(),
            type_stats: learner.as_ref().map(|l| l.stats.clone()),
            policy_file,
        };
        write_checkpoint(dir, &cp)?;
        if let Some(old) = old_policy.filter(|o| Some(o) != cp.policy_file.as_ref()) {
            let _ = fs::remove_file(dir.join(old));
        }
        log::info!(
            "iteration {t}: forwarded {forwarded:?}, {} proposals accepted",
            proposals.iter().filter(|p| p.accepted).count()
        );
    }

    let finished = cp.next_iteration >= config.iterations;
    if finished {
        super::export::write_summary_from(&dir.join("eval"), &dir.join(SUMMARY))?;
    }
    Ok(RunOutcome {
        run_dir: dir.to_path_buf(),
        completed: cp.next_iteration,
        finished,
        hypotheses: cp.hypotheses,
    })
}
