//! One (scenario, algorithm, seed) run: rollout collection, updates,
//! periodic deterministic evaluation, CSV artifacts and checkpoints.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;

use super::{run_dir, ExperimentPlan, MetricsRow};
use crate::config::ScenarioConfig;
use crate::derive_seed;
use crate::map_model::MapCurve;
use crate::rl::{random_policy, Algo, AnyTrainer, HyperParams, RolloutBuffer, Transition};
use crate::world::{episode_objective, EpisodeSummary, JointAction, UplinkWorld};
use crate::Result;

const INIT_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
const EVAL_ENV_STREAM: u64 = 3;
const RANDOM_POLICY_STREAM: u64 = 4;

const TRAIN_HEADER: &str =
    "step,reward_alloc,reward_resol,actor1_loss,actor2_loss,critic_loss,mean_ratio1,mean_ratio2";
const EPISODES_HEADER: &str =
    "seed,scenario,episode,total_delay_s,mean_map,idle_count,reward_alloc,reward_resol";

/// Per-run knobs shared by the CLI and the plan.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub total_steps: u64,
    /// Evaluate with deterministic policies every this many env steps.
    pub eval_every: u64,
    /// Length of one evaluation episode.
    pub eval_len: u32,
    pub fading: bool,
    pub eq13_literal: bool,
    /// Episode length during training.
    pub train_episode_len: u32,
    /// Physical parameters; n_iov/n_mmbs/seed/fading are overwritten per
    /// run from the scenario code.
    pub base_config: ScenarioConfig,
    pub curve: MapCurve,
    pub hyper: HyperParams,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            total_steps: 280_000,
            eval_every: 5_000,
            eval_len: 1_000,
            fading: true,
            eq13_literal: false,
            train_episode_len: 100,
            base_config: ScenarioConfig::default(),
            curve: MapCurve::default(),
            hyper: HyperParams::default(),
        }
    }
}

impl RunOptions {
    /// Desk-scale defaults; the full-scale step count stays available via
    /// `total_steps`.
    pub fn desk_scale() -> Self {
        RunOptions { total_steps: 50_000, ..RunOptions::default() }
    }

    fn configs_for(&self, scenario: &str, seed: u64) -> Result<(ScenarioConfig, ScenarioConfig)> {
        let (m, n) = crate::config::parse_scenario(scenario)?;
        let mut cfg = self.base_config.clone();
        cfg.n_mmbs = m;
        cfg.n_iov = n;
        cfg.seed = seed;
        cfg.fading_enabled = self.fading;
        cfg.episode_len = self.train_episode_len;
        cfg.mmbs_positions = crate::config::mmbs_layout(m, cfg.map_side_m, seed);
        cfg.validate()?;
        let mut eval_cfg = cfg.clone();
        eval_cfg.episode_len = self.eval_len;
        eval_cfg.seed = derive_seed(seed, EVAL_ENV_STREAM);
        Ok((cfg, eval_cfg))
    }

    fn hyper_for(&self) -> HyperParams {
        HyperParams {
            total_steps: self.total_steps,
            eq13_literal: self.eq13_literal,
            ..self.hyper.clone()
        }
    }
}

/// Runs one evaluation episode with deterministic policies (or the random
/// baseline) on a fresh evaluation world.
fn eval_episode(
    policy: Option<&AnyTrainer>,
    eval_cfg: &ScenarioConfig,
    curve: &MapCurve,
    random_rng: &mut StdRng,
) -> Result<EpisodeSummary> {
    let mut env = UplinkWorld::new(eval_cfg.clone(), curve.clone())?;
    let mut outcomes = Vec::with_capacity(eval_cfg.episode_len as usize);
    let mut obs = env.observe();
    while !env.is_done() {
        let action = match policy {
            Some(trainer) => {
                let (alloc, resol) = trainer.act_greedy(&obs);
                JointAction { alloc, resol }
            }
            None => random_policy(eval_cfg, random_rng),
        };
        let out = env.step(&action)?;
        obs = out.observation.clone();
        outcomes.push(out);
    }
    Ok(episode_objective(&outcomes, eval_cfg))
}

struct EvalRecord {
    step: u64,
    summary: EpisodeSummary,
}

fn append_line(file: &mut File, line: &str) -> Result<()> {
    writeln!(file, "{line}")?;
    Ok(())
}

fn episodes_line(seed: u64, scenario: &str, episode: usize, s: &EpisodeSummary) -> String {
    format!(
        "{seed},{scenario},{episode},{},{},{},{},{}",
        s.total_delay_s, s.mean_map, s.idle_count, s.reward_alloc_mean, s.reward_resol_mean
    )
}

/// Trains (or, for the random baseline, only evaluates) one triple and
/// writes its artifacts under `out_dir`.
pub fn run_single(
    out_dir: &Path,
    scenario: &str,
    algo: Algo,
    seed: u64,
    opts: &RunOptions,
) -> Result<MetricsRow> {
    let (cfg, eval_cfg) = opts.configs_for(scenario, seed)?;
    let dir = run_dir(out_dir, scenario, algo, seed);
    std::fs::create_dir_all(&dir)?;
    cfg.save(&dir.join("config.txt"))?;

    let mut train_csv = File::create(dir.join("train.csv"))?;
    append_line(&mut train_csv, TRAIN_HEADER)?;
    let mut episodes_csv = File::create(dir.join("episodes.csv"))?;
    append_line(&mut episodes_csv, EPISODES_HEADER)?;

    let mut random_rng = StdRng::seed_from_u64(derive_seed(seed, RANDOM_POLICY_STREAM));

    let row = if algo.is_learner() {
        let hp = opts.hyper_for();
        hp.validate()?;
        let mut init_rng = StdRng::seed_from_u64(derive_seed(seed, INIT_STREAM));
        let mut train_rng = StdRng::seed_from_u64(derive_seed(seed, TRAIN_STREAM));
        let mut env = UplinkWorld::new(cfg.clone(), opts.curve.clone())?;
        let mut trainer = AnyTrainer::new(
            algo,
            env.observation_dim(),
            cfg.n_iov,
            cfg.n_mmbs,
            (cfg.p_min, cfg.p_max),
            &hp,
            &mut init_rng,
        )?;

        let mut buffer = RolloutBuffer::new(hp.segment_len);
        let mut obs = env.observe();
        let mut episode_rewards: Vec<(f64, f64)> = Vec::new();
        let mut ep_acc = (0.0, 0.0, 0u32);
        let mut evals: Vec<EvalRecord> = Vec::new();
        let n_updates = hp.total_steps / hp.segment_len as u64;
        let effective_steps = n_updates * hp.segment_len as u64;
        let mut steps_done: u64 = 0;

        for update_i in 0..n_updates {
            for _ in 0..hp.segment_len {
                let sample = trainer.act(&obs, &mut train_rng);
                let (value_alloc, value_resol) = trainer.stream_values(&obs);
                let action = JointAction {
                    alloc: sample.alloc.clone(),
                    resol: sample.resolutions.clone(),
                };
                let out = env.step(&action)?;
                buffer.push(Transition {
                    obs: std::mem::take(&mut obs),
                    alloc: sample.alloc,
                    resol_z: sample.resol_z,
                    logp_alloc: sample.logp_alloc,
                    logp_resol: sample.logp_resol,
                    reward_alloc: out.reward_alloc,
                    reward_resol: out.reward_resol,
                    value_alloc,
                    value_resol,
                })?;
                ep_acc.0 += out.reward_alloc;
                ep_acc.1 += out.reward_resol;
                ep_acc.2 += 1;
                obs = out.observation;
                steps_done += 1;
                if env.is_done() {
                    episode_rewards
                        .push((ep_acc.0 / ep_acc.2 as f64, ep_acc.1 / ep_acc.2 as f64));
                    ep_acc = (0.0, 0.0, 0);
                    env.reset();
                    obs = env.observe();
                }
            }
            let (ba, br) = trainer.stream_values(&obs);
            buffer.set_bootstrap(ba, br);
            let (seg_ra, seg_rr) = buffer.mean_rewards();
            let diag = trainer.update(&buffer, &hp, &mut train_rng)?;
            buffer.clear();
            append_line(
                &mut train_csv,
                &format!(
                    "{steps_done},{seg_ra},{seg_rr},{},{},{},{},{}",
                    diag.actor1_loss,
                    diag.actor2_loss,
                    diag.critic_loss,
                    diag.mean_ratio1,
                    diag.mean_ratio2
                ),
            )?;

            let last_update = update_i + 1 == n_updates;
            if steps_done % opts.eval_every == 0 || last_update {
                let summary = eval_episode(Some(&trainer), &eval_cfg, &opts.curve, &mut random_rng)?;
                append_line(
                    &mut episodes_csv,
                    &episodes_line(seed, scenario, evals.len(), &summary),
                )?;
                evals.push(EvalRecord { step: steps_done, summary });
            }
        }

        // degenerate plans (fewer steps than one segment) never trained or
        // evaluated; still evaluate once so the row is meaningful
        if evals.is_empty() {
            let summary = eval_episode(Some(&trainer), &eval_cfg, &opts.curve, &mut random_rng)?;
            append_line(&mut episodes_csv, &episodes_line(seed, scenario, 0, &summary))?;
            evals.push(EvalRecord { step: steps_done, summary });
        }

        let ckpt_dir = dir.join("checkpoints");
        trainer.save(&ckpt_dir, seed)?;
        let manifest = format!(
            "algorithm = {}\nsteps = {steps_done}\n{}",
            algo,
            hp.describe()
        );
        std::fs::write(ckpt_dir.join("manifest.txt"), manifest)?;

        // training-time statistic: mean over the last 10% of episodes
        let tail = (episode_rewards.len() / 10).max(1);
        let final_slice = if episode_rewards.is_empty() {
            &[][..]
        } else {
            &episode_rewards[episode_rewards.len() - tail..]
        };
        let (mut fra, mut frr) = (0.0, 0.0);
        for (a, r) in final_slice {
            fra += a / final_slice.len() as f64;
            frr += r / final_slice.len() as f64;
        }
        if final_slice.is_empty() {
            fra = evals.last().unwrap().summary.reward_alloc_mean;
            frr = evals.last().unwrap().summary.reward_resol_mean;
        }

        // evaluation statistic over the final 10% of training
        let threshold = (effective_steps as f64 * 0.9).floor() as u64;
        let late: Vec<&EvalRecord> = evals.iter().filter(|e| e.step > threshold).collect();
        let late = if late.is_empty() {
            evals.iter().rev().take(1).collect::<Vec<_>>()
        } else {
            late
        };
        let era = late.iter().map(|e| e.summary.reward_alloc_mean).sum::<f64>() / late.len() as f64;
        let err_ = late.iter().map(|e| e.summary.reward_resol_mean).sum::<f64>() / late.len() as f64;
        let last = &evals.last().expect("at least one evaluation ran").summary;

        MetricsRow {
            scenario: scenario.to_string(),
            algorithm: algo,
            seed,
            final_reward_alloc: fra,
            final_reward_resol: frr,
            eval_reward_alloc: era,
            eval_reward_resol: err_,
            eval_total_delay_s: last.total_delay_s,
            eval_mean_map: last.mean_map,
            eval_idle_count: last.idle_count,
        }
    } else {
        // random baseline: no training, evaluation only
        let summary = eval_episode(None, &eval_cfg, &opts.curve, &mut random_rng)?;
        append_line(&mut episodes_csv, &episodes_line(seed, scenario, 0, &summary))?;
        MetricsRow {
            scenario: scenario.to_string(),
            algorithm: algo,
            seed,
            final_reward_alloc: summary.reward_alloc_mean,
            final_reward_resol: summary.reward_resol_mean,
            eval_reward_alloc: summary.reward_alloc_mean,
            eval_reward_resol: summary.reward_resol_mean,
            eval_total_delay_s: summary.total_delay_s,
            eval_mean_map: summary.mean_map,
            eval_idle_count: summary.idle_count,
        }
    };

    row.save(&dir.join("metrics.csv"))?;
    Ok(row)
}

/// Loads a checkpoint written by [`run_single`] and runs one deterministic
/// evaluation episode, appending to the run's `episodes.csv`.
pub fn evaluate_checkpoint(
    out_dir: &Path,
    scenario: &str,
    algo: Algo,
    seed: u64,
    opts: &RunOptions,
) -> Result<EpisodeSummary> {
    let (cfg, eval_cfg) = opts.configs_for(scenario, seed)?;
    let dir = run_dir(out_dir, scenario, algo, seed);
    let mut random_rng = StdRng::seed_from_u64(derive_seed(seed, RANDOM_POLICY_STREAM));
    let summary = if algo.is_learner() {
        let trainer = AnyTrainer::load(
            &dir.join("checkpoints"),
            algo,
            (cfg.p_min, cfg.p_max),
            &opts.hyper_for(),
        )?;
        eval_episode(Some(&trainer), &eval_cfg, &opts.curve, &mut random_rng)?
    } else {
        eval_episode(None, &eval_cfg, &opts.curve, &mut random_rng)?
    };
    std::fs::create_dir_all(&dir)?;
    let episodes_path = dir.join("episodes.csv");
    let episode_idx = if episodes_path.exists() {
        std::fs::read_to_string(&episodes_path)?
            .lines()
            .count()
            .saturating_sub(1)
    } else {
        0
    };
    let mut file = if episodes_path.exists() {
        std::fs::OpenOptions::new().append(true).open(&episodes_path)?
    } else {
        let mut f = File::create(&episodes_path)?;
        append_line(&mut f, EPISODES_HEADER)?;
        f
    };
    append_line(&mut file, &episodes_line(seed, scenario, episode_idx, &summary))?;
    Ok(summary)
}

/// Runs the whole plan and returns every metrics row; also writes the
/// cross-seed aggregation into the output directory.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<MetricsRow>> {
    plan.validate()?;
    std::fs::create_dir_all(&plan.out_dir)?;
    let mut rows = Vec::new();
    for scenario in &plan.scenarios {
        for &algo in &plan.algorithms {
            for &seed in &plan.seeds {
                rows.push(run_single(&plan.out_dir, scenario, algo, seed, &plan.options)?);
            }
        }
    }
    let expected: Vec<(String, Algo)> = plan
        .scenarios
        .iter()
        .flat_map(|s| plan.algorithms.iter().map(move |&a| (s.clone(), a)))
        .collect();
    let summary = super::aggregate(&rows, Some(&expected));
    summary.save(&plan.out_dir)?;
    Ok(rows)
}
