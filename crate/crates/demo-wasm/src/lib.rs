//! Browser demo of the uplink world. Three interactive operations are
//! exposed to JavaScript, all returning JSON strings:
//!
//! * [`map_curve_points`] — samples of the detection-quality curve for the
//!   mAP/latency-vs-resolution plot,
//! * [`DemoWorld::step_random`] — one live simulation step under the random
//!   baseline policy, for the map animation,
//! * [`DemoWorld::uplink_report`] — a what-if table: every vehicle uplinks
//!   to its best station at a chosen resolution.
//!
//! Build with `wasm-pack build --target web crates/demo-wasm` (or
//! `cargo build --target wasm32-unknown-unknown` plus `wasm-bindgen`); the
//! page in `static/` loads the generated module.

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use uplink_rl::config::ScenarioConfig;
use uplink_rl::map_model::MapCurve;
use uplink_rl::rl::random_policy;
use uplink_rl::world::{data_size, latency, rate, sinr, UplinkWorld};
use uplink_rl::derive_seed;

#[derive(Serialize)]
struct CurvePoint {
    p: f64,
    map: f64,
    raw: f64,
}

#[derive(Serialize)]
struct CurvePayload {
    domain: (f64, f64),
    coeffs: [f64; 4],
    points: Vec<CurvePoint>,
}

fn curve_points_json(n: usize) -> Result<String, uplink_rl::Error> {
    let curve = MapCurve::default();
    let (lo, hi) = curve.domain();
    let n = n.max(2);
    let points = (0..n)
        .map(|i| {
            let p = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            Ok(CurvePoint { p, map: curve.score(p)?, raw: curve.raw(p) })
        })
        .collect::<Result<_, uplink_rl::Error>>()?;
    Ok(serde_json::to_string(&CurvePayload { domain: (lo, hi), coeffs: curve.coeffs(), points })
        .expect("serializable"))
}

/// Detection-quality curve sampled at `n` resolutions, as JSON.
#[wasm_bindgen]
pub fn map_curve_points(n: usize) -> Result<String, JsError> {
    curve_points_json(n).map_err(|e| JsError::new(&e.to_string()))
}

#[derive(Serialize)]
struct IovView {
    x: f64,
    y: f64,
    alloc: Option<usize>,
    resolution: f64,
    latency_s: f64,
    map: f64,
    idle: bool,
}

#[derive(Serialize)]
struct StepPayload {
    iteration: u32,
    map_side_m: f64,
    mmbs: Vec<(f64, f64)>,
    iovs: Vec<IovView>,
    reward_alloc: f64,
    reward_resol: f64,
    cum_idle: Vec<u64>,
}

#[derive(Serialize)]
struct UplinkRow {
    iov: usize,
    mmbs: usize,
    distance_m: f64,
    sinr_db: f64,
    rate_bit_s: f64,
    data_bits: f64,
    latency_s: f64,
    map: f64,
}

#[derive(Serialize)]
struct UplinkPayload {
    resolution: f64,
    rows: Vec<UplinkRow>,
    reward_alloc: f64,
    reward_resol: f64,
}

/// A live simulated world driven from the page.
#[wasm_bindgen]
pub struct DemoWorld {
    world: UplinkWorld,
    policy_rng: StdRng,
}

impl DemoWorld {
    fn build(scenario: &str, seed: u64, fading: bool) -> Result<Self, uplink_rl::Error> {
        let mut cfg = ScenarioConfig::for_scenario(scenario, seed)?;
        cfg.fading_enabled = fading;
        let world = UplinkWorld::new(cfg, MapCurve::default())?;
        Ok(DemoWorld {
            world,
            policy_rng: StdRng::seed_from_u64(derive_seed(seed, 0xDE40)),
        })
    }

    fn step_random_json(&mut self) -> Result<String, uplink_rl::Error> {
        if self.world.is_done() {
            self.world.reset();
        }
        // positions as they are while transmitting, before mobility advances
        let positions = self.world.state().iov_positions.clone();
        let action = random_policy(self.world.cfg(), &mut self.policy_rng);
        let iteration = self.world.state().iteration;
        let out = self.world.step(&action)?;
        let iovs = (0..positions.len())
            .map(|i| IovView {
                x: positions[i].0,
                y: positions[i].1,
                alloc: action.alloc[i],
                resolution: action.resol[i],
                latency_s: out.per_iov_latency[i],
                map: out.per_iov_map[i],
                idle: out.idle_flags[i],
            })
            .collect();
        let payload = StepPayload {
            iteration,
            map_side_m: self.world.cfg().map_side_m,
            mmbs: self.world.cfg().mmbs_positions.clone(),
            iovs,
            reward_alloc: out.reward_alloc,
            reward_resol: out.reward_resol,
            cum_idle: self.world.state().cum_idle.clone(),
        };
        Ok(serde_json::to_string(&payload).expect("serializable"))
    }

    fn uplink_report_json(&self, resolution: f64) -> Result<String, uplink_rl::Error> {
        let cfg = self.world.cfg();
        let state = self.world.state();
        let m = cfg.n_mmbs;
        // everyone transmits to the station with the strongest gain
        let alloc: Vec<Option<usize>> = (0..cfg.n_iov)
            .map(|i| {
                (0..m)
                    .max_by(|&a, &b| state.gains[i * m + a].total_cmp(&state.gains[i * m + b]))
            })
            .collect();
        let curve = self.world.curve();
        let mut rows = Vec::with_capacity(cfg.n_iov);
        let mut latencies = vec![0.0; cfg.n_iov];
        let mut maps = vec![0.0; cfg.n_iov];
        for i in 0..cfg.n_iov {
            let cell = alloc[i].expect("at least one station");
            let g = sinr(i, &alloc, &state.gains, &state.powers, cfg);
            let r = rate(g, cfg.bandwidth_hz);
            let d = data_size(resolution, cfg.bits_per_pixel);
            let ell = latency(d, r)?;
            let map = curve.score(resolution)?;
            latencies[i] = ell;
            maps[i] = map;
            let (ix, iy) = state.iov_positions[i];
            let (mx, my) = cfg.mmbs_positions[cell];
            rows.push(UplinkRow {
                iov: i,
                mmbs: cell,
                distance_m: ((ix - mx).powi(2) + (iy - my).powi(2)).sqrt(),
                sinr_db: 10.0 * g.log10(),
                rate_bit_s: r,
                data_bits: d,
                latency_s: ell,
                map,
            });
        }
        let no_idle = vec![false; cfg.n_iov];
        let (reward_alloc, reward_resol) =
            uplink_rl::world::step_rewards(&latencies, &maps, &no_idle, cfg);
        Ok(serde_json::to_string(&UplinkPayload { resolution, rows, reward_alloc, reward_resol })
            .expect("serializable"))
    }
}

#[wasm_bindgen]
impl DemoWorld {
    /// Scenario is a grid code ("33".."37"); fading toggles Rayleigh-power
    /// draws on the channel gains.
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, seed: u32, fading: bool) -> Result<DemoWorld, JsError> {
        Self::build(scenario, seed as u64, fading).map_err(|e| JsError::new(&e.to_string()))
    }

    /// One simulation step under the random baseline; returns the frame as
    /// JSON. Episodes restart transparently.
    pub fn step_random(&mut self) -> Result<String, JsError> {
        self.step_random_json().map_err(|e| JsError::new(&e.to_string()))
    }

    /// What-if report: every vehicle uplinks to its strongest station at
    /// the given resolution (ppi).
    pub fn uplink_report(&self, resolution: f64) -> Result<String, JsError> {
        self.uplink_report_json(resolution)
            .map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn reset(&mut self) {
        self.world.reset();
    }
}
