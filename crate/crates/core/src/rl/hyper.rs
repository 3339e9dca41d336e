use crate::error::Error;
use crate::Result;

/// Hyperparameters of the PPO-family trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Discount rate gamma.
    pub gamma: f64,
    /// Trace decay lambda of the truncated TD(lambda) advantages.
    pub lambda: f64,
    /// Policy clipping parameter epsilon.
    pub clip_epsilon: f64,
    /// Optimization epochs K per collected segment.
    pub epochs: usize,
    /// Minibatch size; must divide `segment_len`.
    pub batch_size: usize,
    /// Trajectory segment length between updates.
    pub segment_len: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Refresh the target critic every C updates.
    pub target_refresh: u64,
    /// Total environment steps to train for.
    pub total_steps: u64,
    /// Hidden layer widths shared by actors and critic.
    pub hidden: Vec<usize>,
    /// Optional entropy bonus coefficient; 0 disables it.
    pub entropy_coef: f64,
    /// Normalize each advantage stream (mean/std) before the actors see it.
    /// The critic regression target always uses the raw streams.
    pub normalize_advantages: bool,
    /// Use the min-over-ratios clipped form instead of the standard
    /// min-over-products surrogate.
    pub eq13_literal: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            gamma: 0.99,
            lambda: 0.95,
            clip_epsilon: 0.2,
            epochs: 10,
            batch_size: 250,
            segment_len: 1000,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            target_refresh: 5,
            total_steps: 50_000,
            hidden: vec![64, 64],
            entropy_coef: 0.0,
            normalize_advantages: true,
            eq13_literal: false,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must be in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        if !(self.clip_epsilon > 0.0) {
            return fail(format!("clip_epsilon must be > 0, got {}", self.clip_epsilon));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.segment_len == 0 {
            return fail("epochs, batch_size and segment_len must be >= 1".into());
        }
        if self.segment_len % self.batch_size != 0 {
            return fail(format!(
                "batch_size {} must divide segment_len {}",
                self.batch_size, self.segment_len
            ));
        }
        if self.target_refresh == 0 {
            return fail("target_refresh must be >= 1".into());
        }
        if !(self.actor_lr > 0.0) || !(self.critic_lr > 0.0) {
            return fail("learning rates must be > 0".into());
        }
        if self.hidden.is_empty() {
            return fail("need at least one hidden layer".into());
        }
        Ok(())
    }

    /// Key=value rendering for run manifests.
    pub fn describe(&self) -> String {
        format!(
            "gamma = {}\nlambda = {}\nclip_epsilon = {}\nepochs = {}\nbatch_size = {}\n\
             segment_len = {}\nactor_lr = {}\ncritic_lr = {}\ntarget_refresh = {}\n\
             total_steps = {}\nhidden = {:?}\nentropy_coef = {}\nnormalize_advantages = {}\n\
             eq13_literal = {}\n",
            self.gamma,
            self.lambda,
            self.clip_epsilon,
            self.epochs,
            self.batch_size,
            self.segment_len,
            self.actor_lr,
            self.critic_lr,
            self.target_refresh,
            self.total_steps,
            self.hidden,
            self.entropy_coef,
            self.normalize_advantages,
            self.eq13_literal,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        HyperParams::default().validate().unwrap();
    }

    #[test]
    fn batch_size_must_divide_segment() {
        let hp = HyperParams { batch_size: 300, ..HyperParams::default() };
        assert!(hp.validate().is_err());
    }
}
