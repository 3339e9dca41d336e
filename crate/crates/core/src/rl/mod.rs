//! Learning algorithms for the joint allocation/resolution problem: a
//! dual-actor shared-critic PPO with heterogeneous (discrete + continuous)
//! actions, an A2C variant over the same structure, independent per-agent
//! PPO, and the uniform random baseline.

mod buffer;
mod gae;
mod hyper;
mod objective;
mod policy;
mod random;
mod trainer;
mod update;

pub use buffer::{RolloutBuffer, Transition};
pub use gae::gae;
pub use hyper::HyperParams;
pub use objective::{critic_loss, ppo_actor_objective, ppo_actor_objective_dlogp, ppo_ratio};
pub use policy::{AllocPolicy, Critic, ResolPolicy};
pub use random::random_policy;
pub use trainer::{ActionSample, AnyTrainer, DualTrainer, IppoTrainer};
pub use update::{
    alloc_objective_and_grad, critic_objective_and_grad, resol_objective_and_grad, SurrogateRule,
    UpdateDiagnostics,
};

use crate::error::Error;
use crate::Result;

/// Algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Happo,
    Haa2c,
    Ippo,
    Random,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Happo, Algo::Haa2c, Algo::Ippo, Algo::Random];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "happo" => Ok(Algo::Happo),
            "haa2c" => Ok(Algo::Haa2c),
            "ippo" => Ok(Algo::Ippo),
            "random" => Ok(Algo::Random),
            _ => Err(Error::UnknownAlgorithm(s.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Happo => "happo",
            Algo::Haa2c => "haa2c",
            Algo::Ippo => "ippo",
            Algo::Random => "random",
        }
    }

    /// Random has no learnable parameters; everything else trains.
    pub fn is_learner(&self) -> bool {
        !matches!(self, Algo::Random)
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algo_names_round_trip() {
        for algo in Algo::ALL {
            assert_eq!(Algo::parse(algo.name()).unwrap(), algo);
        }
        assert!(Algo::parse("sarsa").is_err());
    }
}
