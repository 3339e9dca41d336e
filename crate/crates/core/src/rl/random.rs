use rand::rngs::StdRng;
use rand::Rng;

use crate::config::ScenarioConfig;
use crate::world::JointAction;

/// The random baseline: uniform over the M MMBS choices plus idle for every
/// IoV, uniform resolution within bounds.
pub fn random_policy(cfg: &ScenarioConfig, rng: &mut StdRng) -> JointAction {
    let alloc = (0..cfg.n_iov)
        .map(|_| {
            let k = rng.random_range(0..=cfg.n_mmbs);
            if k == cfg.n_mmbs {
                None
            } else {
                Some(k)
            }
        })
        .collect();
    let resol = (0..cfg.n_iov)
        .map(|_| rng.random_range(cfg.p_min..=cfg.p_max))
        .collect();
    JointAction { alloc, resol }
}
