//! The two actors and the shared critic.

use rand::rngs::StdRng;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::nn::Mlp;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Discrete allocation actor: the network maps an observation to
/// `n_iov * (n_mmbs + 1)` logits, read as one categorical head per IoV with
/// the last index meaning "stay idle". The joint log-probability of an
/// allocation is the sum of the per-head log-probabilities.
#[derive(Debug, Clone)]
pub struct AllocPolicy {
    pub net: Mlp,
    n_iov: usize,
    n_choices: usize,
}

impl AllocPolicy {
    pub fn new(obs_dim: usize, n_iov: usize, n_mmbs: usize, hidden: &[usize], rng: &mut StdRng) -> Self {
        let n_choices = n_mmbs + 1;
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(n_iov * n_choices);
        let mut net = Mlp::new(&sizes, rng);
        // near-uniform initial policy
        net.scale_output_layer(0.01);
        AllocPolicy { net, n_iov, n_choices }
    }

    pub fn n_iov(&self) -> usize {
        self.n_iov
    }

    pub fn n_choices(&self) -> usize {
        self.n_choices
    }

    pub fn from_net(net: Mlp, n_iov: usize) -> Self {
        let n_choices = net.output_dim() / n_iov;
        assert_eq!(net.output_dim(), n_iov * n_choices, "logit width must factor into heads");
        AllocPolicy { net, n_iov, n_choices }
    }

    fn choice_of(&self, a: Option<usize>) -> usize {
        a.unwrap_or(self.n_choices - 1)
    }

    fn alloc_of(&self, choice: usize) -> Option<usize> {
        if choice == self.n_choices - 1 {
            None
        } else {
            Some(choice)
        }
    }

    /// Log-softmax over one head.
    pub fn head_log_probs(head_logits: &[f64]) -> Vec<f64> {
        let max = head_logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + head_logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        head_logits.iter().map(|z| z - lse).collect()
    }

    /// Joint log-probability of `alloc` under the given raw logits.
    pub fn log_prob_from_logits(&self, logits: &[f64], alloc: &[Option<usize>]) -> f64 {
        debug_assert_eq!(logits.len(), self.n_iov * self.n_choices);
        let mut lp = 0.0;
        for (i, &a) in alloc.iter().enumerate() {
            let head = &logits[i * self.n_choices..(i + 1) * self.n_choices];
            lp += Self::head_log_probs(head)[self.choice_of(a)];
        }
        lp
    }

    pub fn log_prob(&self, obs: &[f64], alloc: &[Option<usize>]) -> f64 {
        self.log_prob_from_logits(&self.net.forward(obs), alloc)
    }

    /// Independent categorical draw per head; returns the allocation and its
    /// joint log-probability.
    pub fn sample(&self, obs: &[f64], rng: &mut StdRng) -> (Vec<Option<usize>>, f64) {
        let logits = self.net.forward(obs);
        let mut alloc = Vec::with_capacity(self.n_iov);
        let mut lp = 0.0;
        for i in 0..self.n_iov {
            let head = &logits[i * self.n_choices..(i + 1) * self.n_choices];
            let log_probs = Self::head_log_probs(head);
            let u: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let mut choice = self.n_choices - 1;
            for (k, l) in log_probs.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    choice = k;
                    break;
                }
            }
            lp += log_probs[choice];
            alloc.push(self.alloc_of(choice));
        }
        (alloc, lp)
    }

    /// Deterministic evaluation mode: argmax per head.
    pub fn greedy(&self, obs: &[f64]) -> Vec<Option<usize>> {
        let logits = self.net.forward(obs);
        (0..self.n_iov)
            .map(|i| {
                let head = &logits[i * self.n_choices..(i + 1) * self.n_choices];
                let best = head
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k)
                    .unwrap();
                self.alloc_of(best)
            })
            .collect()
    }
}

/// Continuous resolution actor: the network emits one pre-squash Gaussian
/// mean per IoV; the log standard deviations are state-independent learnable
/// parameters clamped to [-5, 2]. The emitted resolution is
/// `p_min + (tanh(z) + 1)/2 * (p_max - p_min)`, so bounds hold by
/// construction. Log-probabilities are taken in pre-squash space for both
/// the behavior and the current policy, so ratios stay consistent without a
/// Jacobian correction.
#[derive(Debug, Clone)]
pub struct ResolPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
    n_iov: usize,
    p_min: f64,
    p_max: f64,
}

impl ResolPolicy {
    pub const LOG_STD_MIN: f64 = -5.0;
    pub const LOG_STD_MAX: f64 = 2.0;

    pub fn new(
        obs_dim: usize,
        n_iov: usize,
        (p_min, p_max): (f64, f64),
        hidden: &[usize],
        rng: &mut StdRng,
    ) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(n_iov);
        let mut net = Mlp::new(&sizes, rng);
        net.scale_output_layer(0.01);
        ResolPolicy {
            net,
            log_std: vec![0.0; n_iov],
            n_iov,
            p_min,
            p_max,
        }
    }

    pub fn from_parts(net: Mlp, log_std: Vec<f64>, (p_min, p_max): (f64, f64)) -> Self {
        let n_iov = net.output_dim();
        assert_eq!(log_std.len(), n_iov);
        ResolPolicy { net, log_std, n_iov, p_min, p_max }
    }

    pub fn n_iov(&self) -> usize {
        self.n_iov
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.p_min, self.p_max)
    }

    /// Bounded resolution from a pre-squash sample.
    pub fn squash(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .map(|zi| self.p_min + (zi.tanh() + 1.0) / 2.0 * (self.p_max - self.p_min))
            .collect()
    }

    /// Diagonal Gaussian log-density of `z` around the given means.
    pub fn log_prob_of(&self, means: &[f64], z: &[f64]) -> f64 {
        debug_assert_eq!(means.len(), self.n_iov);
        let mut lp = 0.0;
        for i in 0..self.n_iov {
            let std = self.log_std[i].exp();
            let t = (z[i] - means[i]) / std;
            lp += -0.5 * t * t - self.log_std[i] - HALF_LN_2PI;
        }
        lp
    }

    pub fn log_prob(&self, obs: &[f64], z: &[f64]) -> f64 {
        self.log_prob_of(&self.net.forward(obs), z)
    }

    /// Per-IoV Gaussian draw in pre-squash space.
    pub fn sample(&self, obs: &[f64], rng: &mut StdRng) -> (Vec<f64>, f64) {
        let means = self.net.forward(obs);
        let mut z = Vec::with_capacity(self.n_iov);
        for i in 0..self.n_iov {
            let normal = Normal::new(means[i], self.log_std[i].exp()).expect("finite std");
            z.push(normal.sample(rng));
        }
        let lp = self.log_prob_of(&means, &z);
        (z, lp)
    }

    /// Deterministic evaluation mode: squashed mean.
    pub fn greedy(&self, obs: &[f64]) -> Vec<f64> {
        self.squash(&self.net.forward(obs))
    }

    pub fn clamp_log_std(&mut self) {
        for l in &mut self.log_std {
            *l = l.clamp(Self::LOG_STD_MIN, Self::LOG_STD_MAX);
        }
    }
}

/// State-value estimator with a frozen target copy used for advantage and
/// regression targets; the copy is refreshed from the live parameters every
/// C update iterations.
#[derive(Debug, Clone)]
pub struct Critic {
    pub net: Mlp,
    pub target: Mlp,
}

impl Critic {
    pub fn new(obs_dim: usize, hidden: &[usize], rng: &mut StdRng) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, rng);
        let target = net.clone();
        Critic { net, target }
    }

    pub fn from_net(net: Mlp) -> Self {
        let target = net.clone();
        Critic { net, target }
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.net.forward(obs)[0]
    }

    pub fn target_value(&self, obs: &[f64]) -> f64 {
        self.target.forward(obs)[0]
    }

    pub fn sync_target(&mut self) {
        self.target = self.net.clone();
    }
}
