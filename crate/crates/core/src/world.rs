//! Seeded simulation of the IoV-to-MMBS uplink world: mobility, channel
//! gains, intra-cell interference, Shannon rates, latencies, idle accounting
//! and the two per-agent reward signals.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp};

use crate::config::ScenarioConfig;
use crate::error::Error;
use crate::map_model::MapCurve;
use crate::Result;

/// Per-iteration physical state of the world.
///
/// Gains are stored row-major: `gains[i * n_mmbs + v]` is the linear gain
/// between IoV `i` and MMBS `v`. Powers are drawn once per episode.
/// `last_data_bits` holds the data sizes uplinked in the previous iteration
/// (zeros at the start of an episode) since the sizes chosen this iteration
/// are not known before the action is.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// 1-based transmission iteration t within the episode.
    pub iteration: u32,
    pub iov_positions: Vec<(f64, f64)>,
    pub gains: Vec<f64>,
    pub powers: Vec<f64>,
    pub last_data_bits: Vec<f64>,
    /// Cumulative idle count per IoV over the episode.
    pub cum_idle: Vec<u64>,
}

/// Joint action of both agents for one iteration: an MMBS index per IoV
/// (`None` = stay idle this uplink) and a resolution per IoV in
/// `[p_min, p_max]` ppi.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAction {
    pub alloc: Vec<Option<usize>>,
    pub resol: Vec<f64>,
}

/// Everything produced by one simulation step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Uplink latency per IoV in seconds; 0 for idle IoVs.
    pub per_iov_latency: Vec<f64>,
    /// Detection quality per IoV on the 0-100 scale; 0 for idle IoVs.
    pub per_iov_map: Vec<f64>,
    pub idle_flags: Vec<bool>,
    /// Allocation-agent reward: `-(sum_i q*l_i + f*I_i) / N`.
    pub reward_alloc: f64,
    /// Resolution-agent reward: `-(sum_i q*l_i - b*mAP_i) / N`.
    pub reward_resol: f64,
    /// Observation of the state reached after this step.
    pub observation: Vec<f64>,
}

/// Frame size in bits for a square frame of side `p` pixels carrying `xi`
/// bits per pixel.
pub fn data_size(p: f64, xi: f64) -> f64 {
    xi * p * p
}

/// Linear channel gain between an IoV and an MMBS.
///
/// Log-distance path loss `g = reference_gain * d^-alpha` with the distance
/// floored at 1 m so the reference gain is also the ceiling. When fading is
/// enabled the gain is multiplied by a unit-mean exponential draw from `rng`
/// (note the draw consumes RNG state, so call order matters for
/// reproducibility).
pub fn channel_gain(
    iov_pos: (f64, f64),
    mmbs_pos: (f64, f64),
    cfg: &ScenarioConfig,
    rng: &mut StdRng,
) -> f64 {
    let dx = iov_pos.0 - mmbs_pos.0;
    let dy = iov_pos.1 - mmbs_pos.1;
    let d = (dx * dx + dy * dy).sqrt().max(1.0);
    let gain = cfg.reference_gain * d.powf(-cfg.path_loss_exponent);
    if cfg.fading_enabled {
        // Exp(1) has unit mean, i.e. Rayleigh fading in the power domain.
        gain * Exp::new(1.0).expect("valid rate").sample(rng)
    } else {
        gain
    }
}

/// Signal-to-interference-plus-noise ratio of IoV `i` under allocation
/// `alloc`. Interference sums only the IoVs assigned to the same MMBS
/// (intra-cell). Callers must skip idle IoVs.
///
/// # Panics
/// If `alloc[i]` is idle; querying an idle IoV is a contract violation.
pub fn sinr(
    i: usize,
    alloc: &[Option<usize>],
    gains: &[f64],
    powers: &[f64],
    cfg: &ScenarioConfig,
) -> f64 {
    let cell = alloc[i].expect("sinr queried for an idle IoV");
    let m = cfg.n_mmbs;
    let signal = gains[i * m + cell] * powers[i];
    let mut interference = 0.0;
    for (n, &a) in alloc.iter().enumerate() {
        if n != i && a == Some(cell) {
            interference += gains[n * m + cell] * powers[n];
        }
    }
    signal / (interference + cfg.noise_power())
}

/// Shannon uplink rate in bit/s: `B * log2(1 + sinr)`.
pub fn rate(sinr: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

/// Uplink latency in seconds for `d` bits at `r` bit/s.
///
/// A positive data size over a zero rate means the IoV was allocated to an
/// MMBS it cannot reach, which is reported as an error rather than an
/// infinite latency.
pub fn latency(d_bits: f64, r: f64) -> Result<f64> {
    if d_bits == 0.0 {
        return Ok(0.0);
    }
    if r <= 0.0 {
        return Err(Error::UnreachableLink);
    }
    Ok(d_bits / r)
}

/// Both per-agent rewards from the per-IoV step quantities.
///
/// The latency term is deliberately present in both rewards, so the two do
/// not partition the objective.
pub fn step_rewards(
    latencies: &[f64],
    maps: &[f64],
    idle_flags: &[bool],
    cfg: &ScenarioConfig,
) -> (f64, f64) {
    let n = latencies.len() as f64;
    let mut alloc_sum = 0.0;
    let mut resol_sum = 0.0;
    for i in 0..latencies.len() {
        let idle = if idle_flags[i] { 1.0 } else { 0.0 };
        alloc_sum += cfg.weight_q * latencies[i] + cfg.weight_f * idle;
        resol_sum += cfg.weight_q * latencies[i] - cfg.weight_b * maps[i];
    }
    (-alloc_sum / n, -resol_sum / n)
}

/// One axis-clipped mobility step.
pub fn apply_move(pos: (f64, f64), delta: (f64, f64), map_side_m: f64) -> (f64, f64) {
    (
        (pos.0 + delta.0).clamp(0.0, map_side_m),
        (pos.1 + delta.1).clamp(0.0, map_side_m),
    )
}

/// The uplink world. Owns the scenario config, the detection-quality curve
/// and a seeded RNG; identical seed and config give bitwise-identical
/// trajectories under identical action sequences.
///
/// Single-threaded by design; run several instances with distinct seeds for
/// parallel rollouts.
#[derive(Debug, Clone)]
pub struct UplinkWorld {
    cfg: ScenarioConfig,
    curve: MapCurve,
    rng: StdRng,
    state: WorldState,
}

impl UplinkWorld {
    pub fn new(cfg: ScenarioConfig, curve: MapCurve) -> Result<Self> {
        cfg.validate()?;
        let rng = StdRng::seed_from_u64(cfg.seed);
        let n = cfg.n_iov;
        let state = WorldState {
            iteration: 1,
            iov_positions: vec![(0.0, 0.0); n],
            gains: vec![0.0; n * cfg.n_mmbs],
            powers: vec![0.0; n],
            last_data_bits: vec![0.0; n],
            cum_idle: vec![0; n],
        };
        let mut world = UplinkWorld { cfg, curve, rng, state };
        world.reset();
        Ok(world)
    }

    pub fn cfg(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn curve(&self) -> &MapCurve {
        &self.curve
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    /// True once all `episode_len` transmissions of the episode have run.
    pub fn is_done(&self) -> bool {
        self.state.iteration > self.cfg.episode_len
    }

    /// Starts a fresh episode: seeded uniform positions, per-episode powers,
    /// fresh gains. Draw order (positions, then powers, then any fading) is
    /// part of the determinism contract.
    pub fn reset(&mut self) -> &WorldState {
        let cfg = &self.cfg;
        for pos in self.state.iov_positions.iter_mut() {
            pos.0 = self.rng.random_range(0.0..=cfg.map_side_m);
            pos.1 = self.rng.random_range(0.0..=cfg.map_side_m);
        }
        for p in self.state.powers.iter_mut() {
            *p = self.rng.random_range(cfg.power_min..=cfg.power_max);
        }
        self.state.iteration = 1;
        self.state.last_data_bits.fill(0.0);
        self.state.cum_idle.fill(0);
        self.refresh_gains();
        &self.state
    }

    fn refresh_gains(&mut self) {
        let m = self.cfg.n_mmbs;
        for i in 0..self.cfg.n_iov {
            for v in 0..m {
                self.state.gains[i * m + v] = channel_gain(
                    self.state.iov_positions[i],
                    self.cfg.mmbs_positions[v],
                    &self.cfg,
                    &mut self.rng,
                );
            }
        }
    }

    /// Flat observation of the current state: log10 of the N*M gains
    /// followed by the previous data sizes normalized by the largest
    /// possible frame.
    pub fn observe(&self) -> Vec<f64> {
        observe(&self.state, &self.cfg)
    }

    /// Dimension of [`UplinkWorld::observe`]: N*M + N.
    pub fn observation_dim(&self) -> usize {
        self.cfg.n_iov * self.cfg.n_mmbs + self.cfg.n_iov
    }

    /// Runs one transmission iteration.
    ///
    /// Computes SINR/rate/latency and detection quality for every non-idle
    /// IoV, the idle flags and both rewards, then advances the world:
    /// mobility, fresh gains, bookkeeping for the next observation.
    pub fn step(&mut self, action: &JointAction) -> Result<StepOutcome> {
        let cfg = &self.cfg;
        let n = cfg.n_iov;
        if self.is_done() {
            return Err(Error::EpisodeOver {
                iteration: self.state.iteration,
                episode_len: cfg.episode_len,
            });
        }
        self.validate_action(action)?;

        let mut latencies = vec![0.0; n];
        let mut maps = vec![0.0; n];
        let mut idle_flags = vec![false; n];
        let mut data_bits = vec![0.0; n];
        for i in 0..n {
            match action.alloc[i] {
                None => {
                    idle_flags[i] = true;
                    self.state.cum_idle[i] += 1;
                }
                Some(_) => {
                    let g = sinr(i, &action.alloc, &self.state.gains, &self.state.powers, cfg);
                    let r = rate(g, cfg.bandwidth_hz);
                    let d = data_size(action.resol[i], cfg.bits_per_pixel);
                    latencies[i] = latency(d, r)?;
                    maps[i] = self.curve.score(action.resol[i])?;
                    data_bits[i] = d;
                }
            }
        }
        let (reward_alloc, reward_resol) = step_rewards(&latencies, &maps, &idle_flags, cfg);

        // Advance the world. Mobility first, then fading, in fixed order.
        let max_move = cfg.max_move_m;
        let map_side = cfg.map_side_m;
        for i in 0..n {
            let delta = (
                self.rng.random_range(-max_move..=max_move),
                self.rng.random_range(-max_move..=max_move),
            );
            self.state.iov_positions[i] = apply_move(self.state.iov_positions[i], delta, map_side);
        }
        self.refresh_gains();
        self.state.last_data_bits = data_bits;
        self.state.iteration += 1;

        Ok(StepOutcome {
            per_iov_latency: latencies,
            per_iov_map: maps,
            idle_flags,
            reward_alloc,
            reward_resol,
            observation: self.observe(),
        })
    }

    fn validate_action(&self, action: &JointAction) -> Result<()> {
        let cfg = &self.cfg;
        if action.alloc.len() != cfg.n_iov || action.resol.len() != cfg.n_iov {
            return Err(Error::Action(format!(
                "action vectors must have length {}, got alloc {} / resol {}",
                cfg.n_iov,
                action.alloc.len(),
                action.resol.len()
            )));
        }
        for (i, &a) in action.alloc.iter().enumerate() {
            if let Some(v) = a {
                if v >= cfg.n_mmbs {
                    return Err(Error::Action(format!(
                        "IoV {i} allocated to MMBS {v}, only {} exist",
                        cfg.n_mmbs
                    )));
                }
            }
        }
        for (i, &p) in action.resol.iter().enumerate() {
            if !(p >= cfg.p_min && p <= cfg.p_max) {
                return Err(Error::Action(format!(
                    "IoV {i} resolution {p} outside [{}, {}]",
                    cfg.p_min, cfg.p_max
                )));
            }
        }
        Ok(())
    }
}

/// Observation of a state under a config; see [`UplinkWorld::observe`].
pub fn observe(state: &WorldState, cfg: &ScenarioConfig) -> Vec<f64> {
    let mut obs = Vec::with_capacity(state.gains.len() + cfg.n_iov);
    obs.extend(state.gains.iter().map(|g| g.log10()));
    let d_max = data_size(cfg.p_max, cfg.bits_per_pixel);
    obs.extend(state.last_data_bits.iter().map(|d| d / d_max));
    obs
}

/// Decomposed episode totals backing both the scalar objective and the
/// per-episode metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    /// `sum_t sum_i q*l - b*mAP + f*I`; smaller is better.
    pub objective: f64,
    /// Total uplink delay in seconds across all IoVs and iterations.
    pub total_delay_s: f64,
    /// Mean detection quality over non-idle transmissions; 0 when nothing
    /// was transmitted.
    pub mean_map: f64,
    /// How many (IoV, iteration) pairs actually transmitted.
    pub transmitted_count: u64,
    /// Total idle count.
    pub idle_count: u64,
    /// Per-step means of the two rewards.
    pub reward_alloc_mean: f64,
    pub reward_resol_mean: f64,
}

/// Folds step outcomes into the episode objective and its decomposition.
pub fn episode_objective(outcomes: &[StepOutcome], cfg: &ScenarioConfig) -> EpisodeSummary {
    assert!(!outcomes.is_empty(), "episode_objective needs at least one step");
    let mut objective = 0.0;
    let mut total_delay = 0.0;
    let mut map_sum = 0.0;
    let mut transmitted = 0u64;
    let mut idle = 0u64;
    let mut ra = 0.0;
    let mut rr = 0.0;
    for out in outcomes {
        for i in 0..out.per_iov_latency.len() {
            let idle_term = if out.idle_flags[i] { 1.0 } else { 0.0 };
            objective += cfg.weight_q * out.per_iov_latency[i]
                - cfg.weight_b * out.per_iov_map[i]
                + cfg.weight_f * idle_term;
            total_delay += out.per_iov_latency[i];
            if out.idle_flags[i] {
                idle += 1;
            } else {
                map_sum += out.per_iov_map[i];
                transmitted += 1;
            }
        }
        ra += out.reward_alloc;
        rr += out.reward_resol;
    }
    let steps = outcomes.len() as f64;
    EpisodeSummary {
        objective,
        total_delay_s: total_delay,
        mean_map: if transmitted > 0 { map_sum / transmitted as f64 } else { 0.0 },
        transmitted_count: transmitted,
        idle_count: idle,
        reward_alloc_mean: ra / steps,
        reward_resol_mean: rr / steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    fn rng() -> StdRng {
        StdRng::seed_from_u64(0)
    }

    #[test]
    fn data_size_is_quadratic_in_resolution() {
        assert_eq!(data_size(0.0, 24.0), 0.0);
        assert_eq!(data_size(100.0, 24.0), 240_000.0);
        assert_eq!(data_size(416.0, 24.0), 4_153_344.0);
    }

    #[test]
    fn channel_gain_follows_log_distance_model() {
        let cfg = test_cfg();
        let g1 = channel_gain((0.0, 0.0), (1.0, 0.0), &cfg, &mut rng());
        assert!((g1 - 1.0e-3).abs() < 1e-12);
        let g10 = channel_gain((0.0, 0.0), (10.0, 0.0), &cfg, &mut rng());
        assert!((g10 - 1.0e-6).abs() < 1e-15);
        // sub-meter distances are floored at the 1 m reference
        let gfloor = channel_gain((0.0, 0.0), (0.5, 0.0), &cfg, &mut rng());
        assert!((gfloor - 1.0e-3).abs() < 1e-12);
    }

    #[test]
    fn fading_is_unit_mean_and_seeded() {
        let mut cfg = test_cfg();
        cfg.fading_enabled = true;
        let mut r1 = rng();
        let mut r2 = rng();
        let base = 1.0e-3;
        let mut mean = 0.0;
        let draws = 20_000;
        for _ in 0..draws {
            let g = channel_gain((0.0, 0.0), (1.0, 0.0), &cfg, &mut r1);
            assert_eq!(g, channel_gain((0.0, 0.0), (1.0, 0.0), &cfg, &mut r2));
            mean += g / base;
        }
        mean /= draws as f64;
        assert!((mean - 1.0).abs() < 0.03, "unit-mean fading, got {mean}");
    }

    #[test]
    fn sinr_counts_only_same_cell_interference() {
        let mut cfg = test_cfg();
        cfg.n_iov = 2;
        cfg.n_mmbs = 2;
        cfg.mmbs_positions = vec![(250.0, 250.0), (750.0, 750.0)];
        // single IoV: g*h = 1e-6, noise 1e-6 -> sinr 1
        let gains = vec![1.0e-6, 1.0e-6];
        let powers = vec![1.0];
        let single = ScenarioConfig { n_iov: 1, mmbs_positions: vec![(0.0, 0.0), (1.0, 1.0)], ..cfg.clone() };
        let s = sinr(0, &[Some(0)], &gains[..2], &powers, &single);
        assert!((s - 1.0).abs() < 1e-12);

        // two IoVs: g*h products 2e-10 and 1e-10, noise shrunk to 1e-10
        let mut two = cfg.clone();
        two.noise_psd = 1.0e-17; // * 1e7 Hz = 1e-10 W
        let gains = vec![2.0e-10, 2.0e-10, 1.0e-10, 1.0e-10];
        let powers = vec![1.0, 1.0];
        let same_cell = [Some(0), Some(0)];
        let s1 = sinr(0, &same_cell, &gains, &powers, &two);
        assert!((s1 - 1.0).abs() < 1e-12, "2e-10/(1e-10+1e-10) = 1, got {s1}");
        let split = [Some(0), Some(1)];
        let s1 = sinr(0, &split, &gains, &powers, &two);
        assert!((s1 - 2.0).abs() < 1e-12, "no cross-cell interference, got {s1}");
    }

    #[test]
    #[should_panic(expected = "idle IoV")]
    fn sinr_for_idle_iov_is_a_contract_violation() {
        let cfg = test_cfg();
        sinr(0, &[None, Some(0), Some(1)], &[1.0; 9], &[1.0; 3], &cfg);
    }

    #[test]
    fn rate_follows_shannon_formula() {
        assert_eq!(rate(0.0, 1.0e7), 0.0);
        assert!((rate(1.0, 1.0e7) - 1.0e7).abs() < 1e-3);
        assert!((rate(3.0, 1.0e7) - 2.0e7).abs() < 1e-3);
    }

    #[test]
    fn latency_divides_and_flags_unreachable_links() {
        assert_eq!(latency(0.0, 0.0).unwrap(), 0.0);
        assert!((latency(2.4e6, 1.0e7).unwrap() - 0.24).abs() < 1e-12);
        assert!((latency(4_153_344.0, 2.0e7).unwrap() - 0.2076672).abs() < 1e-12);
        assert!(matches!(latency(1.0, 0.0), Err(Error::UnreachableLink)));
    }

    #[test]
    fn rewards_match_hand_arithmetic() {
        let cfg = test_cfg(); // q=60, b=50, f=75
        // all idle, N=3
        let (ra, rr) = step_rewards(&[0.0; 3], &[0.0; 3], &[true; 3], &cfg);
        assert!((ra - (-75.0)).abs() < 1e-12);
        assert_eq!(rr, 0.0);
        // one IoV, l = 0.24 s, mAP = 50
        let one = ScenarioConfig { n_iov: 1, ..cfg };
        let (ra, rr) = step_rewards(&[0.24], &[50.0], &[false], &one);
        assert!((ra - (-14.4)).abs() < 1e-12);
        assert!((rr - 2485.6).abs() < 1e-12);
    }

    #[test]
    fn all_idle_step_matches_reward_examples() {
        let mut w = UplinkWorld::new(test_cfg(), MapCurve::default()).unwrap();
        let action = JointAction { alloc: vec![None; 3], resol: vec![64.0; 3] };
        let out = w.step(&action).unwrap();
        assert!((out.reward_alloc - (-75.0)).abs() < 1e-12);
        assert_eq!(out.reward_resol, 0.0);
        assert_eq!(out.idle_flags, vec![true; 3]);
        assert_eq!(out.per_iov_latency, vec![0.0; 3]);
        assert_eq!(w.state().cum_idle, vec![1; 3]);
    }

    #[test]
    fn mobility_clips_to_the_map() {
        assert_eq!(apply_move((0.0, 0.0), (-100.0, -100.0), 1000.0), (0.0, 0.0));
        assert_eq!(apply_move((950.0, 20.0), (100.0, -100.0), 1000.0), (1000.0, 0.0));
        assert_eq!(apply_move((500.0, 500.0), (10.0, -10.0), 1000.0), (510.0, 490.0));
    }

    #[test]
    fn positions_and_powers_respect_bounds_across_episodes() {
        let mut cfg = test_cfg();
        cfg.episode_len = 5;
        cfg.fading_enabled = true;
        let mut w = UplinkWorld::new(cfg.clone(), MapCurve::default()).unwrap();
        for _ in 0..3 {
            while !w.is_done() {
                let action = JointAction {
                    alloc: vec![Some(0), None, Some(2)],
                    resol: vec![64.0, 416.0, 200.0],
                };
                w.step(&action).unwrap();
                for &(x, y) in &w.state().iov_positions {
                    assert!((0.0..=cfg.map_side_m).contains(&x));
                    assert!((0.0..=cfg.map_side_m).contains(&y));
                }
                for &p in &w.state().powers {
                    assert!((cfg.power_min..=cfg.power_max).contains(&p));
                }
                for &g in &w.state().gains {
                    assert!(g > 0.0);
                }
            }
            w.reset();
        }
    }

    #[test]
    fn step_after_episode_end_is_an_error() {
        let mut cfg = test_cfg();
        cfg.episode_len = 2;
        let mut w = UplinkWorld::new(cfg, MapCurve::default()).unwrap();
        let action = JointAction { alloc: vec![None; 3], resol: vec![64.0; 3] };
        w.step(&action).unwrap();
        w.step(&action).unwrap();
        assert!(w.is_done());
        assert!(matches!(w.step(&action), Err(Error::EpisodeOver { .. })));
    }

    #[test]
    fn invalid_actions_are_rejected() {
        let mut w = UplinkWorld::new(test_cfg(), MapCurve::default()).unwrap();
        let bad_mmbs = JointAction { alloc: vec![Some(3), None, None], resol: vec![64.0; 3] };
        assert!(matches!(w.step(&bad_mmbs), Err(Error::Action(_))));
        let bad_resol = JointAction { alloc: vec![None; 3], resol: vec![63.0, 64.0, 64.0] };
        assert!(matches!(w.step(&bad_resol), Err(Error::Action(_))));
        let bad_len = JointAction { alloc: vec![None; 2], resol: vec![64.0; 2] };
        assert!(matches!(w.step(&bad_len), Err(Error::Action(_))));
    }

    #[test]
    fn observation_layout_and_normalization() {
        let cfg = test_cfg();
        let w = UplinkWorld::new(cfg.clone(), MapCurve::default()).unwrap();
        let obs = w.observe();
        assert_eq!(obs.len(), cfg.n_iov * cfg.n_mmbs + cfg.n_iov);
        // nothing transmitted yet: data-size slots all zero
        assert!(obs[cfg.n_iov * cfg.n_mmbs..].iter().all(|&x| x == 0.0));

        let state = WorldState {
            iteration: 2,
            iov_positions: vec![(0.0, 0.0)],
            gains: vec![1.0e-6],
            powers: vec![1.5],
            last_data_bits: vec![data_size(cfg.p_max, cfg.bits_per_pixel)],
            cum_idle: vec![0],
        };
        let one = ScenarioConfig { n_iov: 1, n_mmbs: 1, mmbs_positions: vec![(0.0, 0.0)], ..cfg };
        let obs = observe(&state, &one);
        assert!((obs[0] - (-6.0)).abs() < 1e-12);
        assert!((obs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn episode_objective_examples() {
        let cfg = test_cfg(); // N = 3, f = 75
        let idle_step = StepOutcome {
            per_iov_latency: vec![0.0; 3],
            per_iov_map: vec![0.0; 3],
            idle_flags: vec![true; 3],
            reward_alloc: -75.0,
            reward_resol: 0.0,
            observation: vec![],
        };
        let summary = episode_objective(&[idle_step.clone(), idle_step], &cfg);
        assert!((summary.objective - 450.0).abs() < 1e-12);
        assert_eq!(summary.mean_map, 0.0);
        assert_eq!(summary.transmitted_count, 0);
        assert_eq!(summary.idle_count, 6);

        let one_cfg = ScenarioConfig { n_iov: 1, ..cfg };
        let step = StepOutcome {
            per_iov_latency: vec![0.24],
            per_iov_map: vec![50.0],
            idle_flags: vec![false],
            reward_alloc: -14.4,
            reward_resol: 2485.6,
            observation: vec![],
        };
        let summary = episode_objective(&[step], &one_cfg);
        assert!((summary.objective - (-2485.6)).abs() < 1e-12);
        assert!((summary.total_delay_s - 0.24).abs() < 1e-12);
        assert!((summary.mean_map - 50.0).abs() < 1e-12);
    }

    #[test]
    fn identical_seeds_give_bitwise_identical_trajectories() {
        let mut cfg = test_cfg();
        cfg.fading_enabled = true;
        cfg.seed = 42;
        let mut a = UplinkWorld::new(cfg.clone(), MapCurve::default()).unwrap();
        let mut b = UplinkWorld::new(cfg, MapCurve::default()).unwrap();
        assert_eq!(a.state(), b.state());
        let action = JointAction {
            alloc: vec![Some(1), None, Some(1)],
            resol: vec![128.0, 64.0, 333.0],
        };
        for _ in 0..20 {
            let oa = a.step(&action).unwrap();
            let ob = b.step(&action).unwrap();
            assert_eq!(a.state(), b.state());
            assert_eq!(oa.observation, ob.observation);
            assert!(oa.reward_alloc == ob.reward_alloc && oa.reward_resol == ob.reward_resol);
        }
    }

    #[test]
    fn raising_resolution_never_lowers_own_latency() {
        // d = xi p^2 grows while the rate is untouched by p.
        let mut w = UplinkWorld::new(test_cfg(), MapCurve::default()).unwrap();
        let mut prev = 0.0;
        for p in [64.0, 128.0, 256.0, 416.0] {
            let mut probe = w.clone();
            let out = probe
                .step(&JointAction { alloc: vec![Some(0), None, None], resol: vec![p, 64.0, 64.0] })
                .unwrap();
            assert!(out.per_iov_latency[0] >= prev);
            prev = out.per_iov_latency[0];
        }
        // keep the original world borrowed mutably so clones above are fresh
        w.reset();
    }

    #[test]
    fn joining_a_cell_never_raises_existing_sinr() {
        let cfg = ScenarioConfig { n_iov: 3, ..test_cfg() };
        let w = UplinkWorld::new(cfg.clone(), MapCurve::default()).unwrap();
        let gains = &w.state().gains;
        let powers = &w.state().powers;
        let without = sinr(0, &[Some(0), None, None], gains, powers, &cfg);
        let with_one = sinr(0, &[Some(0), Some(0), None], gains, powers, &cfg);
        let with_two = sinr(0, &[Some(0), Some(0), Some(0)], gains, powers, &cfg);
        assert!(with_one <= without);
        assert!(with_two <= with_one);
        // a join elsewhere changes nothing
        let elsewhere = sinr(0, &[Some(0), None, Some(1)], gains, powers, &cfg);
        assert_eq!(elsewhere, without);
    }

    mod properties {
        use super::*;
        use proptest::collection::vec;
        use proptest::prelude::*;

        fn per_iov_vectors() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
            (1usize..6).prop_flat_map(|n| {
                (
                    vec(0.0f64..1e4, n),
                    vec(0.0f64..100.0, n),
                    vec(any::<bool>(), n),
                )
            })
        }

        proptest! {
            /// Both reward definitions hold literally; their sum reproduces
            /// the objective term except for the latency term, which appears
            /// in both by construction.
            #[test]
            fn reward_formulas_hold((mut latencies, mut maps, idle) in per_iov_vectors()) {
                let n = latencies.len();
                for i in 0..n {
                    if idle[i] {
                        latencies[i] = 0.0;
                        maps[i] = 0.0;
                    }
                }
                let cfg = ScenarioConfig { n_iov: n, ..test_cfg() };
                let (ra, rr) = step_rewards(&latencies, &maps, &idle, &cfg);
                let mut alloc_sum = 0.0;
                let mut resol_sum = 0.0;
                let mut objective = 0.0;
                for i in 0..n {
                    let idle_term = if idle[i] { 1.0 } else { 0.0 };
                    alloc_sum += cfg.weight_q * latencies[i] + cfg.weight_f * idle_term;
                    resol_sum += cfg.weight_q * latencies[i] - cfg.weight_b * maps[i];
                    objective += cfg.weight_q * latencies[i] - cfg.weight_b * maps[i]
                        + cfg.weight_f * idle_term;
                }
                let tol = 1e-9 * alloc_sum.abs().max(resol_sum.abs()).max(1.0);
                prop_assert!((ra - (-alloc_sum / n as f64)).abs() < tol);
                prop_assert!((rr - (-resol_sum / n as f64)).abs() < tol);
                let q_l: f64 = latencies.iter().map(|l| cfg.weight_q * l).sum();
                prop_assert!((objective - (-(n as f64) * (ra + rr) - q_l)).abs()
                    < 1e-9 * objective.abs().max(1.0));
            }

            /// With everything else fixed, raising one IoV's resolution
            /// never lowers its latency.
            #[test]
            fn latency_monotone_in_resolution(
                seed in any::<u64>(),
                a in 64.0f64..416.0,
                b in 64.0f64..416.0,
            ) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let cfg = ScenarioConfig { seed, ..test_cfg() };
                let world = UplinkWorld::new(cfg, MapCurve::default()).unwrap();
                let latency_at = |p: f64| {
                    let out = world
                        .clone()
                        .step(&JointAction {
                            alloc: vec![Some(1), Some(1), None],
                            resol: vec![p, 200.0, 64.0],
                        })
                        .unwrap();
                    out.per_iov_latency[0]
                };
                prop_assert!(latency_at(lo) <= latency_at(hi));
            }

            /// Adding an IoV to an MMBS never increases the SINR of the
            /// IoVs already on it.
            #[test]
            fn interference_monotone_in_cell_size(
                seed in any::<u64>(),
                join_cell in any::<bool>(),
            ) {
                let cfg = ScenarioConfig { seed, ..test_cfg() };
                let world = UplinkWorld::new(cfg.clone(), MapCurve::default()).unwrap();
                let gains = &world.state().gains;
                let powers = &world.state().powers;
                let before = [Some(0), Some(0), None];
                let after = [Some(0), Some(0), Some(if join_cell { 0 } else { 1 })];
                for i in 0..2 {
                    let s_before = sinr(i, &before, gains, powers, &cfg);
                    let s_after = sinr(i, &after, gains, powers, &cfg);
                    if join_cell {
                        prop_assert!(s_after <= s_before);
                    } else {
                        prop_assert!(s_after == s_before);
                    }
                }
            }
        }
    }
}
