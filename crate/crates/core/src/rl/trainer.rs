//! The trainers: dual actors with one shared critic (PPO or A2C update
//! rules), and the independent dual-agent PPO baseline with private critics.

use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;

use super::buffer::RolloutBuffer;
use super::gae::gae;
use super::hyper::HyperParams;
use super::policy::{AllocPolicy, Critic, ResolPolicy};
use super::update::{
    alloc_objective_and_grad, critic_objective_and_grad, mean_std, normalize,
    resol_objective_and_grad, RatioStats, SurrogateRule, UpdateDiagnostics,
};
use super::Algo;
use crate::error::Error;
use crate::nn::AdamState;
use crate::Result;

/// One sampled joint action with everything the buffer needs.
#[derive(Debug, Clone)]
pub struct ActionSample {
    pub alloc: Vec<Option<usize>>,
    pub resol_z: Vec<f64>,
    /// Squashed resolutions actually sent to the world.
    pub resolutions: Vec<f64>,
    pub logp_alloc: f64,
    pub logp_resol: f64,
}

/// Both actors plus the shared critic; runs either the clipped-surrogate
/// update (K epochs over shuffled minibatches) or the single-pass A2C rule
/// on the same structure. Both actors always receive the same summed
/// advantage signal.
#[derive(Debug, Clone)]
pub struct DualTrainer {
    pub alloc: AllocPolicy,
    pub resol: ResolPolicy,
    pub critic: Critic,
    opt_alloc: AdamState,
    opt_resol: AdamState,
    opt_log_std: AdamState,
    opt_critic: AdamState,
    update_count: u64,
}

impl DualTrainer {
    pub fn new(
        obs_dim: usize,
        n_iov: usize,
        n_mmbs: usize,
        resol_bounds: (f64, f64),
        hp: &HyperParams,
        rng: &mut StdRng,
    ) -> Self {
        let alloc = AllocPolicy::new(obs_dim, n_iov, n_mmbs, &hp.hidden, rng);
        let resol = ResolPolicy::new(obs_dim, n_iov, resol_bounds, &hp.hidden, rng);
        let critic = Critic::new(obs_dim, &hp.hidden, rng);
        Self::from_parts(alloc, resol, critic, hp)
    }

    pub fn from_parts(
        alloc: AllocPolicy,
        resol: ResolPolicy,
        critic: Critic,
        hp: &HyperParams,
    ) -> Self {
        let opt_alloc = AdamState::new(alloc.net.param_count(), hp.actor_lr);
        let opt_resol = AdamState::new(resol.net.param_count(), hp.actor_lr);
        let opt_log_std = AdamState::new(resol.log_std.len(), hp.actor_lr);
        let opt_critic = AdamState::new(critic.net.param_count(), hp.critic_lr);
        DualTrainer {
            alloc,
            resol,
            critic,
            opt_alloc,
            opt_resol,
            opt_log_std,
            opt_critic,
            update_count: 0,
        }
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn act(&self, obs: &[f64], rng: &mut StdRng) -> ActionSample {
        let (alloc, logp_alloc) = self.alloc.sample(obs, rng);
        let (resol_z, logp_resol) = self.resol.sample(obs, rng);
        let resolutions = self.resol.squash(&resol_z);
        ActionSample { alloc, resol_z, resolutions, logp_alloc, logp_resol }
    }

    pub fn act_greedy(&self, obs: &[f64]) -> (Vec<Option<usize>>, Vec<f64>) {
        (self.alloc.greedy(obs), self.resol.greedy(obs))
    }

    /// Target-critic values for the two reward streams (identical here, the
    /// critic is shared).
    pub fn stream_values(&self, obs: &[f64]) -> (f64, f64) {
        let v = self.critic.target_value(obs);
        (v, v)
    }

    /// Clipped-surrogate update over K epochs of shuffled minibatches.
    pub fn happo_update(
        &mut self,
        buffer: &RolloutBuffer,
        hp: &HyperParams,
        rng: &mut StdRng,
    ) -> Result<UpdateDiagnostics> {
        let rule = SurrogateRule::PpoClip {
            epsilon: hp.clip_epsilon,
            literal_min_over_ratios: hp.eq13_literal,
        };
        self.update_impl(buffer, hp, rng, rule, hp.epochs)
    }

    /// Single-pass unclipped policy-gradient update (A2C) over the same
    /// dual-actor shared-critic structure.
    pub fn haa2c_update(
        &mut self,
        buffer: &RolloutBuffer,
        hp: &HyperParams,
        rng: &mut StdRng,
    ) -> Result<UpdateDiagnostics> {
        self.update_impl(buffer, hp, rng, SurrogateRule::PolicyGradient, 1)
    }

    fn update_impl(
        &mut self,
        buffer: &RolloutBuffer,
        hp: &HyperParams,
        rng: &mut StdRng,
        rule: SurrogateRule,
        epochs: usize,
    ) -> Result<UpdateDiagnostics> {
        require_full(buffer)?;
        let t_bar = buffer.len();
        let steps = buffer.transitions();
        let values = buffer.values_with_bootstrap(false)?;

        // Raw advantage streams from the frozen target critic.
        let adv_alloc = gae(&buffer.rewards_alloc(), &values, hp.gamma, hp.lambda)?;
        let adv_resol = gae(&buffer.rewards_resol(), &values, hp.gamma, hp.lambda)?;

        // Critic regression targets stay raw regardless of normalization.
        let targets: Vec<f64> = (0..t_bar)
            .map(|t| adv_alloc[t] + adv_resol[t] + hp.gamma * values[t + 1])
            .collect();

        let (a1m, a1s) = mean_std(&adv_alloc);
        let (a2m, a2s) = mean_std(&adv_resol);
        let advantage_sum: Vec<f64> = if hp.normalize_advantages {
            let n1 = normalize(&adv_alloc);
            let n2 = normalize(&adv_resol);
            (0..t_bar).map(|t| n1[t] + n2[t]).collect()
        } else {
            (0..t_bar).map(|t| adv_alloc[t] + adv_resol[t]).collect()
        };

        // Ratio identity over the whole buffer before any gradient step.
        let initial_ratio_max_dev = self.initial_ratio_dev(steps);

        let mut diag = DiagAccum::default();
        let mut order: Vec<usize> = (0..t_bar).collect();
        for _epoch in 0..epochs {
            order.shuffle(rng);
            for batch in order.chunks(hp.batch_size) {
                let obs: Vec<&[f64]> = batch.iter().map(|&t| steps[t].obs.as_slice()).collect();
                let allocs: Vec<&[Option<usize>]> =
                    batch.iter().map(|&t| steps[t].alloc.as_slice()).collect();
                let zs: Vec<&[f64]> = batch.iter().map(|&t| steps[t].resol_z.as_slice()).collect();
                let lp1: Vec<f64> = batch.iter().map(|&t| steps[t].logp_alloc).collect();
                let lp2: Vec<f64> = batch.iter().map(|&t| steps[t].logp_resol).collect();
                let adv: Vec<f64> = batch.iter().map(|&t| advantage_sum[t]).collect();
                let tgt: Vec<f64> = batch.iter().map(|&t| targets[t]).collect();

                let (obj1, grad1, rs1) = alloc_objective_and_grad(
                    &self.alloc, &obs, &allocs, &lp1, &adv, rule, hp.entropy_coef,
                );
                let (obj2, grad2, grad_ls, rs2) = resol_objective_and_grad(
                    &self.resol, &obs, &zs, &lp2, &adv, rule, hp.entropy_coef,
                );
                let (closs, gradc) = critic_objective_and_grad(&self.critic.net, &obs, &tgt);
                self.check_finite(obj1, obj2, closs)?;

                // gradient ascent on the actors, descent on the critic
                self.opt_alloc
                    .step(self.alloc.net.params_mut(), &negate(grad1))?;
                self.opt_resol
                    .step(self.resol.net.params_mut(), &negate(grad2))?;
                self.opt_log_std.step(&mut self.resol.log_std, &negate(grad_ls))?;
                self.resol.clamp_log_std();
                self.opt_critic.step(self.critic.net.params_mut(), &gradc)?;

                diag.add(obj1, obj2, closs, rs1, rs2);
            }
        }

        self.update_count += 1;
        if self.update_count % hp.target_refresh == 0 {
            self.critic.sync_target();
        }

        Ok(diag.finish(initial_ratio_max_dev, a1m, a1s, a2m, a2s))
    }

    fn initial_ratio_dev(&self, steps: &[super::buffer::Transition]) -> f64 {
        let mut max_dev: f64 = 0.0;
        for t in steps {
            let r1 = (self.alloc.log_prob(&t.obs, &t.alloc) - t.logp_alloc).exp();
            let r2 = (self.resol.log_prob(&t.obs, &t.resol_z) - t.logp_resol).exp();
            max_dev = max_dev.max((r1 - 1.0).abs()).max((r2 - 1.0).abs());
        }
        max_dev
    }

    fn check_finite(&self, obj1: f64, obj2: f64, closs: f64) -> Result<()> {
        for (q, v) in [("actor1 objective", obj1), ("actor2 objective", obj2), ("critic loss", closs)] {
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss {
                    quantity: q.to_string(),
                    update: self.update_count,
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path, seed: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.alloc.net.save(&dir.join("alloc.mlp"), seed)?;
        self.resol.net.save(&dir.join("resol.mlp"), seed)?;
        save_log_std(&dir.join("resol_log_std.txt"), &self.resol.log_std)?;
        self.critic.net.save(&dir.join("critic.mlp"), seed)?;
        Ok(())
    }

    pub fn load(dir: &Path, resol_bounds: (f64, f64), hp: &HyperParams) -> Result<Self> {
        let (resol_net, _) = crate::nn::Mlp::load(&dir.join("resol.mlp"))?;
        let n_iov = resol_net.output_dim();
        let log_std = load_log_std(&dir.join("resol_log_std.txt"), n_iov)?;
        let resol = ResolPolicy::from_parts(resol_net, log_std, resol_bounds);
        let (alloc_net, _) = crate::nn::Mlp::load(&dir.join("alloc.mlp"))?;
        let alloc = AllocPolicy::from_net(alloc_net, n_iov);
        let (critic_net, _) = crate::nn::Mlp::load(&dir.join("critic.mlp"))?;
        Ok(Self::from_parts(alloc, resol, Critic::from_net(critic_net), hp))
    }
}

/// Independent dual-agent PPO: each agent owns a private critic and only
/// ever sees its own reward stream and advantages.
#[derive(Debug, Clone)]
pub struct IppoTrainer {
    pub alloc: AllocPolicy,
    pub critic_alloc: Critic,
    pub resol: ResolPolicy,
    pub critic_resol: Critic,
    opt_alloc: AdamState,
    opt_resol: AdamState,
    opt_log_std: AdamState,
    opt_critic_alloc: AdamState,
    opt_critic_resol: AdamState,
    update_count: u64,
}

impl IppoTrainer {
    pub fn new(
        obs_dim: usize,
        n_iov: usize,
        n_mmbs: usize,
        resol_bounds: (f64, f64),
        hp: &HyperParams,
        rng: &mut StdRng,
    ) -> Self {
        let alloc = AllocPolicy::new(obs_dim, n_iov, n_mmbs, &hp.hidden, rng);
        let critic_alloc = Critic::new(obs_dim, &hp.hidden, rng);
        let resol = ResolPolicy::new(obs_dim, n_iov, resol_bounds, &hp.hidden, rng);
        let critic_resol = Critic::new(obs_dim, &hp.hidden, rng);
        Self::from_parts(alloc, critic_alloc, resol, critic_resol, hp)
    }

    pub fn from_parts(
        alloc: AllocPolicy,
        critic_alloc: Critic,
        resol: ResolPolicy,
        critic_resol: Critic,
        hp: &HyperParams,
    ) -> Self {
        let opt_alloc = AdamState::new(alloc.net.param_count(), hp.actor_lr);
        let opt_resol = AdamState::new(resol.net.param_count(), hp.actor_lr);
        let opt_log_std = AdamState::new(resol.log_std.len(), hp.actor_lr);
        let opt_critic_alloc = AdamState::new(critic_alloc.net.param_count(), hp.critic_lr);
        let opt_critic_resol = AdamState::new(critic_resol.net.param_count(), hp.critic_lr);
        IppoTrainer {
            alloc,
            critic_alloc,
            resol,
            critic_resol,
            opt_alloc,
            opt_resol,
            opt_log_std,
            opt_critic_alloc,
            opt_critic_resol,
            update_count: 0,
        }
    }

    pub fn act(&self, obs: &[f64], rng: &mut StdRng) -> ActionSample {
        let (alloc, logp_alloc) = self.alloc.sample(obs, rng);
        let (resol_z, logp_resol) = self.resol.sample(obs, rng);
        let resolutions = self.resol.squash(&resol_z);
        ActionSample { alloc, resol_z, resolutions, logp_alloc, logp_resol }
    }

    pub fn act_greedy(&self, obs: &[f64]) -> (Vec<Option<usize>>, Vec<f64>) {
        (self.alloc.greedy(obs), self.resol.greedy(obs))
    }

    pub fn stream_values(&self, obs: &[f64]) -> (f64, f64) {
        (
            self.critic_alloc.target_value(obs),
            self.critic_resol.target_value(obs),
        )
    }

    /// Standard PPO per agent; the agents never read each other's rewards,
    /// values or advantages.
    pub fn update(
        &mut self,
        buffer: &RolloutBuffer,
        hp: &HyperParams,
        rng: &mut StdRng,
    ) -> Result<UpdateDiagnostics> {
        require_full(buffer)?;
        let rule = SurrogateRule::PpoClip {
            epsilon: hp.clip_epsilon,
            literal_min_over_ratios: hp.eq13_literal,
        };
        let t_bar = buffer.len();
        let steps = buffer.transitions();
        let values_alloc = buffer.values_with_bootstrap(false)?;
        let values_resol = buffer.values_with_bootstrap(true)?;
        let adv_alloc = gae(&buffer.rewards_alloc(), &values_alloc, hp.gamma, hp.lambda)?;
        let adv_resol = gae(&buffer.rewards_resol(), &values_resol, hp.gamma, hp.lambda)?;

        let targets_alloc: Vec<f64> = (0..t_bar)
            .map(|t| adv_alloc[t] + hp.gamma * values_alloc[t + 1])
            .collect();
        let targets_resol: Vec<f64> = (0..t_bar)
            .map(|t| adv_resol[t] + hp.gamma * values_resol[t + 1])
            .collect();

        let (a1m, a1s) = mean_std(&adv_alloc);
        let (a2m, a2s) = mean_std(&adv_resol);
        let sig_alloc = if hp.normalize_advantages { normalize(&adv_alloc) } else { adv_alloc };
        let sig_resol = if hp.normalize_advantages { normalize(&adv_resol) } else { adv_resol };

        let mut initial_ratio_max_dev: f64 = 0.0;
        for t in steps {
            let r1 = (self.alloc.log_prob(&t.obs, &t.alloc) - t.logp_alloc).exp();
            let r2 = (self.resol.log_prob(&t.obs, &t.resol_z) - t.logp_resol).exp();
            initial_ratio_max_dev = initial_ratio_max_dev
                .max((r1 - 1.0).abs())
                .max((r2 - 1.0).abs());
        }

        let mut diag = DiagAccum::default();
        let mut order: Vec<usize> = (0..t_bar).collect();
        for _epoch in 0..hp.epochs {
            order.shuffle(rng);
            for batch in order.chunks(hp.batch_size) {
                let obs: Vec<&[f64]> = batch.iter().map(|&t| steps[t].obs.as_slice()).collect();
                let allocs: Vec<&[Option<usize>]> =
                    batch.iter().map(|&t| steps[t].alloc.as_slice()).collect();
                let zs: Vec<&[f64]> = batch.iter().map(|&t| steps[t].resol_z.as_slice()).collect();
                let lp1: Vec<f64> = batch.iter().map(|&t| steps[t].logp_alloc).collect();
                let lp2: Vec<f64> = batch.iter().map(|&t| steps[t].logp_resol).collect();
                let adv1: Vec<f64> = batch.iter().map(|&t| sig_alloc[t]).collect();
                let adv2: Vec<f64> = batch.iter().map(|&t| sig_resol[t]).collect();
                let tgt1: Vec<f64> = batch.iter().map(|&t| targets_alloc[t]).collect();
                let tgt2: Vec<f64> = batch.iter().map(|&t| targets_resol[t]).collect();

                let (obj1, grad1, rs1) = alloc_objective_and_grad(
                    &self.alloc, &obs, &allocs, &lp1, &adv1, rule, hp.entropy_coef,
                );
                let (obj2, grad2, grad_ls, rs2) = resol_objective_and_grad(
                    &self.resol, &obs, &zs, &lp2, &adv2, rule, hp.entropy_coef,
                );
                let (closs1, gradc1) =
                    critic_objective_and_grad(&self.critic_alloc.net, &obs, &tgt1);
                let (closs2, gradc2) =
                    critic_objective_and_grad(&self.critic_resol.net, &obs, &tgt2);
                for (q, v) in [
                    ("actor1 objective", obj1),
                    ("actor2 objective", obj2),
                    ("critic1 loss", closs1),
                    ("critic2 loss", closs2),
                ] {
                    if !v.is_finite() {
                        return Err(Error::NonFiniteLoss {
                            quantity: q.to_string(),
                            update: self.update_count,
                        });
                    }
                }

                self.opt_alloc
                    .step(self.alloc.net.params_mut(), &negate(grad1))?;
                self.opt_resol
                    .step(self.resol.net.params_mut(), &negate(grad2))?;
                self.opt_log_std.step(&mut self.resol.log_std, &negate(grad_ls))?;
                self.resol.clamp_log_std();
                self.opt_critic_alloc
                    .step(self.critic_alloc.net.params_mut(), &gradc1)?;
                self.opt_critic_resol
                    .step(self.critic_resol.net.params_mut(), &gradc2)?;

                diag.add(obj1, obj2, 0.5 * (closs1 + closs2), rs1, rs2);
            }
        }

        self.update_count += 1;
        if self.update_count % hp.target_refresh == 0 {
            self.critic_alloc.sync_target();
            self.critic_resol.sync_target();
        }

        Ok(diag.finish(initial_ratio_max_dev, a1m, a1s, a2m, a2s))
    }

    pub fn save(&self, dir: &Path, seed: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.alloc.net.save(&dir.join("alloc.mlp"), seed)?;
        self.resol.net.save(&dir.join("resol.mlp"), seed)?;
        save_log_std(&dir.join("resol_log_std.txt"), &self.resol.log_std)?;
        self.critic_alloc.net.save(&dir.join("critic_alloc.mlp"), seed)?;
        self.critic_resol.net.save(&dir.join("critic_resol.mlp"), seed)?;
        Ok(())
    }

    pub fn load(dir: &Path, resol_bounds: (f64, f64), hp: &HyperParams) -> Result<Self> {
        let (resol_net, _) = crate::nn::Mlp::load(&dir.join("resol.mlp"))?;
        let n_iov = resol_net.output_dim();
        let log_std = load_log_std(&dir.join("resol_log_std.txt"), n_iov)?;
        let resol = ResolPolicy::from_parts(resol_net, log_std, resol_bounds);
        let (alloc_net, _) = crate::nn::Mlp::load(&dir.join("alloc.mlp"))?;
        let alloc = AllocPolicy::from_net(alloc_net, n_iov);
        let (c1, _) = crate::nn::Mlp::load(&dir.join("critic_alloc.mlp"))?;
        let (c2, _) = crate::nn::Mlp::load(&dir.join("critic_resol.mlp"))?;
        Ok(Self::from_parts(
            alloc,
            Critic::from_net(c1),
            resol,
            Critic::from_net(c2),
            hp,
        ))
    }
}

/// Dispatch wrapper so the harness can drive every learner uniformly.
#[derive(Debug, Clone)]
pub enum AnyTrainer {
    Happo(DualTrainer),
    Haa2c(DualTrainer),
    Ippo(IppoTrainer),
}

impl AnyTrainer {
    pub fn new(
        algo: Algo,
        obs_dim: usize,
        n_iov: usize,
        n_mmbs: usize,
        resol_bounds: (f64, f64),
        hp: &HyperParams,
        rng: &mut StdRng,
    ) -> Result<Self> {
        match algo {
            Algo::Happo => Ok(AnyTrainer::Happo(DualTrainer::new(
                obs_dim, n_iov, n_mmbs, resol_bounds, hp, rng,
            ))),
            Algo::Haa2c => Ok(AnyTrainer::Haa2c(DualTrainer::new(
                obs_dim, n_iov, n_mmbs, resol_bounds, hp, rng,
            ))),
            Algo::Ippo => Ok(AnyTrainer::Ippo(IppoTrainer::new(
                obs_dim, n_iov, n_mmbs, resol_bounds, hp, rng,
            ))),
            Algo::Random => Err(Error::Config(
                "the random baseline has no trainable parameters".into(),
            )),
        }
    }

    pub fn algo(&self) -> Algo {
        match self {
            AnyTrainer::Happo(_) => Algo::Happo,
            AnyTrainer::Haa2c(_) => Algo::Haa2c,
            AnyTrainer::Ippo(_) => Algo::Ippo,
        }
    }

    pub fn act(&self, obs: &[f64], rng: &mut StdRng) -> ActionSample {
        match self {
            AnyTrainer::Happo(t) | AnyTrainer::Haa2c(t) => t.act(obs, rng),
            AnyTrainer::Ippo(t) => t.act(obs, rng),
        }
    }

    pub fn act_greedy(&self, obs: &[f64]) -> (Vec<Option<usize>>, Vec<f64>) {
        match self {
            AnyTrainer::Happo(t) | AnyTrainer::Haa2c(t) => t.act_greedy(obs),
            AnyTrainer::Ippo(t) => t.act_greedy(obs),
        }
    }

    pub fn stream_values(&self, obs: &[f64]) -> (f64, f64) {
        match self {
            AnyTrainer::Happo(t) | AnyTrainer::Haa2c(t) => t.stream_values(obs),
            AnyTrainer::Ippo(t) => t.stream_values(obs),
        }
    }

    pub fn update(
        &mut self,
        buffer: &RolloutBuffer,
        hp: &HyperParams,
        rng: &mut StdRng,
    ) -> Result<UpdateDiagnostics> {
        match self {
            AnyTrainer::Happo(t) => t.happo_update(buffer, hp, rng),
            AnyTrainer::Haa2c(t) => t.haa2c_update(buffer, hp, rng),
            AnyTrainer::Ippo(t) => t.update(buffer, hp, rng),
        }
    }

    pub fn save(&self, dir: &Path, seed: u64) -> Result<()> {
        match self {
            AnyTrainer::Happo(t) | AnyTrainer::Haa2c(t) => t.save(dir, seed),
            AnyTrainer::Ippo(t) => t.save(dir, seed),
        }
    }

    pub fn load(dir: &Path, algo: Algo, resol_bounds: (f64, f64), hp: &HyperParams) -> Result<Self> {
        match algo {
            Algo::Happo => Ok(AnyTrainer::Happo(DualTrainer::load(dir, resol_bounds, hp)?)),
            Algo::Haa2c => Ok(AnyTrainer::Haa2c(DualTrainer::load(dir, resol_bounds, hp)?)),
            Algo::Ippo => Ok(AnyTrainer::Ippo(IppoTrainer::load(dir, resol_bounds, hp)?)),
            Algo::Random => Err(Error::Config("no checkpoints exist for the random baseline".into())),
        }
    }
}

fn negate(mut grad: Vec<f64>) -> Vec<f64> {
    for g in &mut grad {
        *g = -*g;
    }
    grad
}

/// Advantages are only defined over complete segments.
fn require_full(buffer: &RolloutBuffer) -> Result<()> {
    if !buffer.is_full() {
        return Err(Error::Action(format!(
            "update needs a full rollout segment ({} of {} steps collected)",
            buffer.len(),
            buffer.capacity()
        )));
    }
    Ok(())
}

fn save_log_std(path: &Path, log_std: &[f64]) -> Result<()> {
    let text: String = log_std.iter().map(|v| format!("{v:e}\n")).collect();
    std::fs::write(path, text)?;
    Ok(())
}

fn load_log_std(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse("log_std file", format!("bad value \"{t}\"")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: values.len() });
    }
    Ok(values)
}

#[derive(Default)]
struct DiagAccum {
    batches: f64,
    obj1: f64,
    obj2: f64,
    closs: f64,
    ratio1: f64,
    ratio2: f64,
}

impl DiagAccum {
    fn add(&mut self, obj1: f64, obj2: f64, closs: f64, rs1: RatioStats, rs2: RatioStats) {
        self.batches += 1.0;
        self.obj1 += obj1;
        self.obj2 += obj2;
        self.closs += closs;
        self.ratio1 += rs1.mean_ratio;
        self.ratio2 += rs2.mean_ratio;
    }

    fn finish(self, initial_ratio_max_dev: f64, a1m: f64, a1s: f64, a2m: f64, a2s: f64) -> UpdateDiagnostics {
        let n = self.batches.max(1.0);
        UpdateDiagnostics {
            actor1_loss: -self.obj1 / n,
            actor2_loss: -self.obj2 / n,
            critic_loss: self.closs / n,
            mean_ratio1: self.ratio1 / n,
            mean_ratio2: self.ratio2 / n,
            initial_ratio_max_dev,
            adv_alloc_mean: a1m,
            adv_alloc_std: a1s,
            adv_resol_mean: a2m,
            adv_resol_std: a2s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::buffer::Transition;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> StdRng {
        StdRng::seed_from_u64(seed)
    }

    fn tiny_hp() -> HyperParams {
        HyperParams {
            epochs: 2,
            batch_size: 4,
            segment_len: 8,
            normalize_advantages: false,
            ..HyperParams::default()
        }
    }

    /// Rolls a buffer by sampling from the trainer's own policies, so
    /// behavior log-probs match the current nets exactly.
    fn fill_buffer<F>(len: usize, obs_dim: usize, mut act: F, reward: impl Fn(usize) -> (f64, f64)) -> RolloutBuffer
    where
        F: FnMut(&[f64]) -> (ActionSample, (f64, f64)),
    {
        let mut r = rng(100);
        let mut buf = RolloutBuffer::new(len);
        for t in 0..len {
            let obs: Vec<f64> = (0..obs_dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let (sample, (va, vr)) = act(&obs);
            let (ra, rr) = reward(t);
            buf.push(Transition {
                obs,
                alloc: sample.alloc,
                resol_z: sample.resol_z,
                logp_alloc: sample.logp_alloc,
                logp_resol: sample.logp_resol,
                reward_alloc: ra,
                reward_resol: rr,
                value_alloc: va,
                value_resol: vr,
            })
            .unwrap();
        }
        buf
    }

    fn dual_trainer(hp: &HyperParams, seed: u64) -> DualTrainer {
        let mut r = rng(seed);
        DualTrainer::new(3, 2, 2, (64.0, 416.0), hp, &mut r)
    }

    #[test]
    fn zero_advantages_leave_actors_untouched() {
        let hp = tiny_hp();
        let mut trainer = dual_trainer(&hp, 1);
        let mut act_rng = rng(7);
        // constant rewards and a zero critic make every delta and advantage 0
        for p in trainer.critic.net.params_mut() {
            *p = 0.0;
        }
        trainer.critic.sync_target();
        let t = trainer.clone();
        let mut buf = fill_buffer(
            8,
            3,
            |obs| (t.act(obs, &mut act_rng), t.stream_values(obs)),
            |_| (0.0, 0.0),
        );
        buf.set_bootstrap(0.0, 0.0);

        let alloc_before = trainer.alloc.net.params().to_vec();
        let resol_before = trainer.resol.net.params().to_vec();
        let diag = trainer.happo_update(&buf, &hp, &mut rng(2)).unwrap();
        assert_eq!(trainer.alloc.net.params(), alloc_before.as_slice());
        assert_eq!(trainer.resol.net.params(), resol_before.as_slice());
        assert!(diag.initial_ratio_max_dev < 1e-9);
        assert_eq!(diag.adv_alloc_std, 0.0);
    }

    #[test]
    fn ratios_are_one_before_the_first_gradient_step() {
        let hp = HyperParams { normalize_advantages: true, ..tiny_hp() };
        let mut trainer = dual_trainer(&hp, 3);
        let mut act_rng = rng(5);
        let t = trainer.clone();
        let mut reward_rng = rng(8);
        let rewards: Vec<(f64, f64)> = (0..8)
            .map(|_| (reward_rng.random_range(-2.0..0.0), reward_rng.random_range(-1.0..3.0)))
            .collect();
        let mut buf = fill_buffer(
            8,
            3,
            |obs| (t.act(obs, &mut act_rng), t.stream_values(obs)),
            |i| rewards[i],
        );
        buf.set_bootstrap(0.1, 0.1);
        let diag = trainer.happo_update(&buf, &hp, &mut rng(2)).unwrap();
        assert!(
            diag.initial_ratio_max_dev < 1e-9,
            "ratio identity violated: {}",
            diag.initial_ratio_max_dev
        );
    }

    #[test]
    fn happo_with_huge_clip_matches_haa2c_first_step() {
        // With ratios at 1 the clipped-surrogate gradient is A * grad logp,
        // identical to the policy gradient, so one full-batch step of each
        // rule from the same state must produce the same parameters.
        let hp = HyperParams {
            epochs: 1,
            batch_size: 8,
            segment_len: 8,
            clip_epsilon: 1e9,
            normalize_advantages: false,
            ..HyperParams::default()
        };
        let a = dual_trainer(&hp, 11);
        let mut b = a.clone();
        let mut trainer_a = a.clone();

        let mut act_rng = rng(21);
        let src = a.clone();
        let mut reward_rng = rng(31);
        let rewards: Vec<(f64, f64)> = (0..8)
            .map(|_| (reward_rng.random_range(-2.0..2.0), reward_rng.random_range(-2.0..2.0)))
            .collect();
        let mut buf = fill_buffer(
            8,
            3,
            |obs| (src.act(obs, &mut act_rng), src.stream_values(obs)),
            |i| rewards[i],
        );
        buf.set_bootstrap(0.2, 0.2);

        trainer_a.happo_update(&buf, &hp, &mut rng(4)).unwrap();
        b.haa2c_update(&buf, &hp, &mut rng(4)).unwrap();
        for (x, y) in trainer_a.alloc.net.params().iter().zip(b.alloc.net.params()) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        for (x, y) in trainer_a.resol.net.params().iter().zip(b.resol.net.params()) {
            assert!((x - y).abs() < 1e-10);
        }
        // critics run the same rule in both variants
        assert_eq!(trainer_a.critic.net.params(), b.critic.net.params());
    }

    #[test]
    fn happo_actors_share_one_advantage_sum() {
        // Swapping the two reward streams leaves A^alloc + A^resol (and the
        // critic target) unchanged, so the shared-critic update must produce
        // bitwise-identical networks. Independent PPO must not.
        let hp = HyperParams {
            epochs: 1,
            batch_size: 8,
            segment_len: 8,
            normalize_advantages: true,
            ..HyperParams::default()
        };
        let trainer = dual_trainer(&hp, 71);
        let mut act_rng = rng(72);
        let src = trainer.clone();
        let mut reward_rng = rng(73);
        let rewards: Vec<(f64, f64)> = (0..8)
            .map(|_| (reward_rng.random_range(-3.0..1.0), reward_rng.random_range(-1.0..3.0)))
            .collect();
        let mut buf = fill_buffer(
            8,
            3,
            |obs| (src.act(obs, &mut act_rng), src.stream_values(obs)),
            |i| rewards[i],
        );
        buf.set_bootstrap(0.1, 0.1);

        let mut swapped = RolloutBuffer::new(8);
        for t in buf.transitions() {
            let mut t = t.clone();
            std::mem::swap(&mut t.reward_alloc, &mut t.reward_resol);
            swapped.push(t).unwrap();
        }
        swapped.set_bootstrap(0.1, 0.1);

        let mut a = trainer.clone();
        let mut b = trainer.clone();
        a.happo_update(&buf, &hp, &mut rng(9)).unwrap();
        b.happo_update(&swapped, &hp, &mut rng(9)).unwrap();
        assert_eq!(a.alloc.net.params(), b.alloc.net.params());
        assert_eq!(a.resol.net.params(), b.resol.net.params());
        assert_eq!(a.critic.net.params(), b.critic.net.params());

        // the independent agents read only their own stream, so the swap
        // must move them
        let mut r = rng(74);
        let ippo = IppoTrainer::new(3, 2, 2, (64.0, 416.0), &hp, &mut r);
        let mut ia = ippo.clone();
        let mut ib = ippo.clone();
        ia.update(&buf, &hp, &mut rng(9)).unwrap();
        ib.update(&swapped, &hp, &mut rng(9)).unwrap();
        assert_ne!(ia.alloc.net.params(), ib.alloc.net.params());
    }

    #[test]
    fn single_step_buffer_composes_the_verified_pieces() {
        let hp = HyperParams {
            epochs: 1,
            batch_size: 1,
            segment_len: 1,
            normalize_advantages: false,
            entropy_coef: 0.0,
            ..HyperParams::default()
        };
        let trainer = dual_trainer(&hp, 17);
        let mut act_rng = rng(23);
        let obs = vec![0.4, -0.2, 0.8];
        let sample = trainer.act(&obs, &mut act_rng);
        let (va, vr) = trainer.stream_values(&obs);
        let mut buf = RolloutBuffer::new(1);
        buf.push(Transition {
            obs: obs.clone(),
            alloc: sample.alloc.clone(),
            resol_z: sample.resol_z.clone(),
            logp_alloc: sample.logp_alloc,
            logp_resol: sample.logp_resol,
            reward_alloc: -1.5,
            reward_resol: 2.5,
            value_alloc: va,
            value_resol: vr,
        })
        .unwrap();
        buf.set_bootstrap(0.3, 0.3);

        // hand-compute the single-step advantages and losses
        let delta_a = -1.5 + hp.gamma * 0.3 - va;
        let delta_r = 2.5 + hp.gamma * 0.3 - vr;
        let adv_sum = delta_a + delta_r;
        // ratio is 1 at the first step, so both actor losses are -adv_sum
        let mut t2 = trainer.clone();
        let diag = t2.happo_update(&buf, &hp, &mut rng(2)).unwrap();
        assert!((diag.actor1_loss - (-adv_sum)).abs() < 1e-9);
        assert!((diag.actor2_loss - (-adv_sum)).abs() < 1e-9);
        let target = adv_sum + hp.gamma * 0.3;
        let expect_closs = crate::rl::critic_loss(va, adv_sum, 0.3, hp.gamma);
        assert!((diag.critic_loss - expect_closs).abs() < 1e-9);
        assert!((expect_closs - (va - target) * (va - target)).abs() < 1e-12);
    }

    #[test]
    fn ippo_agents_never_read_each_other() {
        // Two runs whose buffers differ only in the alloc-side data must
        // leave agent2 (actor + critic) bitwise identical, and vice versa.
        let hp = tiny_hp();
        let mut r = rng(41);
        let base = IppoTrainer::new(3, 2, 2, (64.0, 416.0), &hp, &mut r);

        let mut act_rng = rng(51);
        let src = base.clone();
        let mut buf_a = fill_buffer(
            8,
            3,
            |obs| (src.act(obs, &mut act_rng), src.stream_values(obs)),
            |t| (t as f64, -(t as f64)),
        );
        buf_a.set_bootstrap(0.1, -0.1);

        // same transitions, different alloc rewards only
        let mut buf_b = buf_a.clone();
        {
            let mut tweaked = buf_b.transitions().to_vec();
            for tr in &mut tweaked {
                tr.reward_alloc *= -3.0;
            }
            buf_b = RolloutBuffer::new(8);
            for tr in tweaked {
                buf_b.push(tr).unwrap();
            }
            buf_b.set_bootstrap(0.1, -0.1);
        }

        let mut run_a = base.clone();
        let mut run_b = base.clone();
        run_a.update(&buf_a, &hp, &mut rng(6)).unwrap();
        run_b.update(&buf_b, &hp, &mut rng(6)).unwrap();
        assert_eq!(run_a.resol.net.params(), run_b.resol.net.params());
        assert_eq!(run_a.resol.log_std, run_b.resol.log_std);
        assert_eq!(run_a.critic_resol.net.params(), run_b.critic_resol.net.params());
        // while agent1 did diverge
        assert_ne!(run_a.critic_alloc.net.params(), run_b.critic_alloc.net.params());
    }

    #[test]
    fn ippo_identical_streams_train_identical_critics() {
        let hp = tiny_hp();
        let mut r = rng(61);
        let alloc = AllocPolicy::new(3, 2, 2, &hp.hidden, &mut r);
        let resol = ResolPolicy::new(3, 2, (64.0, 416.0), &hp.hidden, &mut r);
        // both critics start from the same parameters
        let critic = Critic::new(3, &hp.hidden, &mut r);
        let mut trainer = IppoTrainer::from_parts(alloc, critic.clone(), resol, critic, &hp);

        let mut act_rng = rng(71);
        let src = trainer.clone();
        let mut buf = fill_buffer(
            8,
            3,
            |obs| (src.act(obs, &mut act_rng), src.stream_values(obs)),
            |t| {
                let r = (t as f64).sin();
                (r, r) // identical reward streams
            },
        );
        buf.set_bootstrap(0.05, 0.05);
        trainer.update(&buf, &hp, &mut rng(8)).unwrap();
        assert_eq!(
            trainer.critic_alloc.net.params(),
            trainer.critic_resol.net.params()
        );
    }

    #[test]
    fn ippo_zero_resol_rewards_shrink_its_advantages() {
        let hp = HyperParams {
            epochs: 2,
            batch_size: 8,
            segment_len: 16,
            critic_lr: 5e-3,
            hidden: vec![8, 8],
            normalize_advantages: false,
            ..HyperParams::default()
        };
        let mut r = rng(81);
        let mut trainer = IppoTrainer::new(3, 2, 2, (64.0, 416.0), &hp, &mut r);
        let rounds = 100;
        let mut mean_abs = Vec::with_capacity(rounds);
        for round in 0..rounds {
            let mut act_rng = rng(90 + round as u64);
            let src = trainer.clone();
            let mut buf = fill_buffer(
                16,
                3,
                |obs| (src.act(obs, &mut act_rng), src.stream_values(obs)),
                |_| (1.0, 0.0),
            );
            let (_, vr) = trainer.stream_values(&[0.0, 0.0, 0.0]);
            buf.set_bootstrap(0.0, vr);
            let values = buf.values_with_bootstrap(true).unwrap();
            let adv = gae(&buf.rewards_resol(), &values, hp.gamma, hp.lambda).unwrap();
            mean_abs.push(adv.iter().map(|a| a.abs()).sum::<f64>() / adv.len() as f64);
            trainer.update(&buf, &hp, &mut rng(7)).unwrap();
        }
        // critic2 fits the all-zero return, advantages collapse toward 0
        let first: f64 = mean_abs[..5].iter().sum::<f64>() / 5.0;
        let last: f64 = mean_abs[rounds - 5..].iter().sum::<f64>() / 5.0;
        assert!(
            last < first,
            "resol advantage magnitude should shrink: {first} -> {last}"
        );
    }

    #[test]
    fn save_load_round_trip_preserves_policies() {
        let hp = tiny_hp();
        let trainer = dual_trainer(&hp, 91);
        let dir = tempfile::tempdir().unwrap();
        trainer.save(dir.path(), 91).unwrap();
        let back = DualTrainer::load(dir.path(), (64.0, 416.0), &hp).unwrap();
        assert_eq!(trainer.alloc.net.params(), back.alloc.net.params());
        assert_eq!(trainer.resol.net.params(), back.resol.net.params());
        assert_eq!(trainer.resol.log_std, back.resol.log_std);
        assert_eq!(trainer.critic.net.params(), back.critic.net.params());
        let obs = [0.5, -0.5, 0.25];
        assert_eq!(trainer.act_greedy(&obs), back.act_greedy(&obs));
    }

    #[test]
    fn non_finite_rewards_abort_with_diagnostics() {
        let hp = tiny_hp();
        let mut trainer = dual_trainer(&hp, 95);
        let mut act_rng = rng(96);
        let src = trainer.clone();
        let mut buf = fill_buffer(
            8,
            3,
            |obs| (src.act(obs, &mut act_rng), src.stream_values(obs)),
            |_| (f64::NAN, 0.0),
        );
        buf.set_bootstrap(0.0, 0.0);
        assert!(matches!(
            trainer.happo_update(&buf, &hp, &mut rng(1)),
            Err(Error::NonFiniteLoss { .. })
        ));
    }
}
