//! Batch objectives and their exact gradients for both actors and the
//! critic. These functions are pure in (parameters, batch), which is what
//! lets the finite-difference checks drive the same code path the trainers
//! use.

use super::objective::{ppo_actor_objective, ppo_actor_objective_dlogp, ppo_ratio};
use super::policy::{AllocPolicy, ResolPolicy};
use crate::nn::Mlp;

/// How the actor surrogate treats the probability ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurrogateRule {
    /// Clipped PPO surrogate; `literal_min_over_ratios` switches to the
    /// min-over-ratios variant.
    PpoClip {
        epsilon: f64,
        literal_min_over_ratios: bool,
    },
    /// Plain policy gradient `logpi(a|s) * A`, used by the A2C variant.
    PolicyGradient,
}

impl SurrogateRule {
    fn objective(&self, logp_new: f64, logp_old: f64, advantage: f64) -> f64 {
        match *self {
            SurrogateRule::PpoClip { epsilon, literal_min_over_ratios } => {
                ppo_actor_objective(logp_new, logp_old, advantage, epsilon, literal_min_over_ratios)
            }
            SurrogateRule::PolicyGradient => logp_new * advantage,
        }
    }

    fn dlogp(&self, logp_new: f64, logp_old: f64, advantage: f64) -> f64 {
        match *self {
            SurrogateRule::PpoClip { epsilon, literal_min_over_ratios } => {
                ppo_actor_objective_dlogp(logp_new, logp_old, advantage, epsilon, literal_min_over_ratios)
            }
            SurrogateRule::PolicyGradient => advantage,
        }
    }
}

/// Ratio summary of one batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct RatioStats {
    pub mean_ratio: f64,
    pub max_dev_from_one: f64,
}

/// Mean surrogate objective (to maximize) of the allocation actor over a
/// batch and its gradient with respect to the policy network parameters.
pub fn alloc_objective_and_grad(
    policy: &AllocPolicy,
    obs: &[&[f64]],
    allocs: &[&[Option<usize>]],
    logp_old: &[f64],
    advantages: &[f64],
    rule: SurrogateRule,
    entropy_coef: f64,
) -> (f64, Vec<f64>, RatioStats) {
    let batch = obs.len() as f64;
    let n_choices = policy.n_choices();
    let mut objective = 0.0;
    let mut grad = vec![0.0; policy.net.param_count()];
    let mut stats = RatioStats::default();

    for s in 0..obs.len() {
        let cache = policy.net.forward_cached(obs[s]);
        let logits = cache.output().to_vec();
        let logp_new = policy.log_prob_from_logits(&logits, allocs[s]);
        let rho = ppo_ratio(logp_new, logp_old[s]);
        stats.mean_ratio += rho / batch;
        stats.max_dev_from_one = stats.max_dev_from_one.max((rho - 1.0).abs());

        objective += rule.objective(logp_new, logp_old[s], advantages[s]) / batch;
        let dlogp = rule.dlogp(logp_new, logp_old[s], advantages[s]) / batch;

        let mut upstream = vec![0.0; logits.len()];
        for (i, &a) in allocs[s].iter().enumerate() {
            let head = &logits[i * n_choices..(i + 1) * n_choices];
            let log_probs = AllocPolicy::head_log_probs(head);
            let choice = a.unwrap_or(n_choices - 1);
            for k in 0..n_choices {
                let p_k = log_probs[k].exp();
                let indicator = if k == choice { 1.0 } else { 0.0 };
                upstream[i * n_choices + k] += dlogp * (indicator - p_k);
            }
            if entropy_coef > 0.0 {
                let head_entropy: f64 = log_probs.iter().map(|l| -l.exp() * l).sum();
                objective += entropy_coef * head_entropy / batch;
                for k in 0..n_choices {
                    let p_k = log_probs[k].exp();
                    upstream[i * n_choices + k] +=
                        entropy_coef * (-p_k * (log_probs[k] + head_entropy)) / batch;
                }
            }
        }
        policy.net.backward_into(&cache, &upstream, &mut grad);
    }
    (objective, grad, stats)
}

/// Mean surrogate objective (to maximize) of the resolution actor over a
/// batch, with gradients for the mean network and for the learnable
/// log-stds.
pub fn resol_objective_and_grad(
    policy: &ResolPolicy,
    obs: &[&[f64]],
    zs: &[&[f64]],
    logp_old: &[f64],
    advantages: &[f64],
    rule: SurrogateRule,
    entropy_coef: f64,
) -> (f64, Vec<f64>, Vec<f64>, RatioStats) {
    let batch = obs.len() as f64;
    let n = policy.n_iov();
    let mut objective = 0.0;
    let mut net_grad = vec![0.0; policy.net.param_count()];
    let mut log_std_grad = vec![0.0; n];
    let mut stats = RatioStats::default();

    for s in 0..obs.len() {
        let cache = policy.net.forward_cached(obs[s]);
        let means = cache.output().to_vec();
        let logp_new = policy.log_prob_of(&means, zs[s]);
        let rho = ppo_ratio(logp_new, logp_old[s]);
        stats.mean_ratio += rho / batch;
        stats.max_dev_from_one = stats.max_dev_from_one.max((rho - 1.0).abs());

        objective += rule.objective(logp_new, logp_old[s], advantages[s]) / batch;
        let dlogp = rule.dlogp(logp_new, logp_old[s], advantages[s]) / batch;

        let mut upstream = vec![0.0; n];
        for i in 0..n {
            let std = policy.log_std[i].exp();
            let t = (zs[s][i] - means[i]) / std;
            upstream[i] = dlogp * t / std;
            log_std_grad[i] += dlogp * (t * t - 1.0);
        }
        policy.net.backward_into(&cache, &upstream, &mut net_grad);

        if entropy_coef > 0.0 {
            // diagonal Gaussian entropy: sum_i log std_i + n/2 * ln(2 pi e)
            let entropy: f64 = policy.log_std.iter().sum::<f64>()
                + n as f64 * 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
            objective += entropy_coef * entropy / batch;
            for g in log_std_grad.iter_mut() {
                *g += entropy_coef / batch;
            }
        }
    }
    (objective, net_grad, log_std_grad, stats)
}

/// Mean squared error of the critic against fixed regression targets, and
/// its gradient.
pub fn critic_objective_and_grad(net: &Mlp, obs: &[&[f64]], targets: &[f64]) -> (f64, Vec<f64>) {
    let batch = obs.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; net.param_count()];
    for s in 0..obs.len() {
        let cache = net.forward_cached(obs[s]);
        let err = cache.output()[0] - targets[s];
        loss += err * err / batch;
        net.backward_into(&cache, &[2.0 * err / batch], &mut grad);
    }
    (loss, grad)
}

/// Summary of one trainer update, one row of the training log.
#[derive(Debug, Clone, Copy)]
pub struct UpdateDiagnostics {
    /// Negated mean surrogate objectives, so smaller is better.
    pub actor1_loss: f64,
    pub actor2_loss: f64,
    pub critic_loss: f64,
    /// Mean probability ratios over all processed minibatches.
    pub mean_ratio1: f64,
    pub mean_ratio2: f64,
    /// Largest |ratio - 1| over the whole buffer measured before the first
    /// gradient step of the update; zero up to rounding by construction.
    pub initial_ratio_max_dev: f64,
    pub adv_alloc_mean: f64,
    pub adv_alloc_std: f64,
    pub adv_resol_mean: f64,
    pub adv_resol_std: f64,
}

pub(super) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean/std normalization of one advantage stream; degenerate streams pass
/// through centered only.
pub(super) fn normalize(xs: &[f64]) -> Vec<f64> {
    let (mean, std) = mean_std(xs);
    xs.iter().map(|x| (x - mean) / (std + 1e-8)).collect()
}
