//! Scenario parameterization and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};

use crate::error::Error;
use crate::{derive_seed, Result};

/// Scenario grid used by the experiments: 3 base stations, 3..=7 vehicles,
/// encoded as two digits "MN" ("34" = 3 MMBS, 4 IoVs).
pub const SCENARIOS: [&str; 5] = ["33", "34", "35", "36", "37"];

const MMBS_PLACEMENT_STREAM: u64 = 0xB5;

/// Full physical + experiment parameterization of one simulated world.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of IoV clients N.
    pub n_iov: usize,
    /// Number of edge base stations M.
    pub n_mmbs: usize,
    /// Uplink bandwidth B in Hz.
    pub bandwidth_hz: f64,
    /// Noise level sigma^2. Interpreted as a power spectral density in W/Hz
    /// (so the noise term is `bandwidth_hz * noise_psd`) unless
    /// `noise_is_total` is set, in which case it is the total noise power in
    /// Watt and bandwidth does not multiply it.
    pub noise_psd: f64,
    /// Treat `noise_psd` as total noise power instead of a density.
    pub noise_is_total: bool,
    /// Transmit power bounds in Watt; powers are drawn per episode.
    pub power_min: f64,
    pub power_max: f64,
    /// Resolution bounds in ppi (side length of the square uplinked frame).
    pub p_min: f64,
    pub p_max: f64,
    /// Bits carried per pixel, so a frame at resolution p is
    /// `bits_per_pixel * p^2` bits.
    pub bits_per_pixel: f64,
    /// Side of the square map in meters.
    pub map_side_m: f64,
    /// Maximum per-axis movement per iteration in meters.
    pub max_move_m: f64,
    /// Objective weights: q scales latency, b scales detection quality,
    /// f scales idle counts.
    pub weight_q: f64,
    pub weight_b: f64,
    pub weight_f: f64,
    /// Transmission iterations per episode.
    pub episode_len: u32,
    /// Path-loss exponent alpha of the log-distance gain model.
    pub path_loss_exponent: f64,
    /// Linear channel gain at the 1 m reference distance.
    pub reference_gain: f64,
    /// Multiply gains by a unit-mean exponential draw, redrawn every
    /// iteration (Rayleigh-power fading).
    pub fading_enabled: bool,
    /// Base-station coordinates in meters, exactly `n_mmbs` entries.
    pub mmbs_positions: Vec<(f64, f64)>,
    /// Master seed; all world draws derive from it.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let map_side_m = 1000.0;
        ScenarioConfig {
            n_iov: 3,
            n_mmbs: 3,
            bandwidth_hz: 1.0e7,
            noise_psd: 1.0e-13,
            noise_is_total: false,
            power_min: 1.5,
            power_max: 2.0,
            p_min: 64.0,
            p_max: 416.0,
            bits_per_pixel: 24.0,
            map_side_m,
            max_move_m: 100.0,
            weight_q: 60.0,
            weight_b: 50.0,
            weight_f: 75.0,
            episode_len: 100,
            path_loss_exponent: 3.0,
            reference_gain: 1.0e-3,
            fading_enabled: false,
            mmbs_positions: mmbs_layout(3, map_side_m, 0),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Config for one cell of the experiment grid.
    pub fn for_scenario(scenario: &str, seed: u64) -> Result<Self> {
        let (m, n) = parse_scenario(scenario)?;
        let mut cfg = ScenarioConfig {
            n_iov: n,
            n_mmbs: m,
            seed,
            ..ScenarioConfig::default()
        };
        cfg.mmbs_positions = mmbs_layout(m, cfg.map_side_m, seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Noise term entering the SINR denominator, in Watt.
    pub fn noise_power(&self) -> f64 {
        if self.noise_is_total {
            self.noise_psd
        } else {
            self.bandwidth_hz * self.noise_psd
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_iov < 1 || self.n_mmbs < 1 {
            return fail(format!("need n_iov >= 1 and n_mmbs >= 1, got {} and {}", self.n_iov, self.n_mmbs));
        }
        if !(self.power_min <= self.power_max) || self.power_min < 0.0 {
            return fail(format!("power bounds [{}, {}] invalid", self.power_min, self.power_max));
        }
        if !(self.p_min < self.p_max) || self.p_min < 0.0 {
            return fail(format!("resolution bounds [{}, {}] invalid", self.p_min, self.p_max));
        }
        if !(self.weight_q > 0.0 && self.weight_b > 0.0 && self.weight_f > 0.0) {
            return fail("all objective weights must be > 0".into());
        }
        if !(self.bandwidth_hz > 0.0) {
            return fail(format!("bandwidth_hz must be > 0, got {}", self.bandwidth_hz));
        }
        if !(self.noise_psd > 0.0) || !(self.bits_per_pixel > 0.0) {
            return fail("noise_psd and bits_per_pixel must be > 0".into());
        }
        if !(self.map_side_m > 0.0) || self.max_move_m < 0.0 {
            return fail("map_side_m must be > 0 and max_move_m >= 0".into());
        }
        if self.episode_len == 0 {
            return fail("episode_len must be >= 1".into());
        }
        if !(self.path_loss_exponent > 0.0) || !(self.reference_gain > 0.0) {
            return fail("path_loss_exponent and reference_gain must be > 0".into());
        }
        if self.mmbs_positions.len() != self.n_mmbs {
            return fail(format!(
                "mmbs_positions has {} entries, expected n_mmbs = {}",
                self.mmbs_positions.len(),
                self.n_mmbs
            ));
        }
        for &(x, y) in &self.mmbs_positions {
            if !(0.0..=self.map_side_m).contains(&x) || !(0.0..=self.map_side_m).contains(&y) {
                return fail(format!("mmbs position ({x}, {y}) outside map"));
            }
        }
        Ok(())
    }

    /// Serializes to the flat `key = value` text format.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let p = &mut s;
        let _ = writeln!(p, "n_iov = {}", self.n_iov);
        let _ = writeln!(p, "n_mmbs = {}", self.n_mmbs);
        let _ = writeln!(p, "bandwidth_hz = {}", self.bandwidth_hz);
        let _ = writeln!(p, "noise_psd = {}", self.noise_psd);
        let _ = writeln!(p, "noise_is_total = {}", self.noise_is_total);
        let _ = writeln!(p, "power_min = {}", self.power_min);
        let _ = writeln!(p, "power_max = {}", self.power_max);
        let _ = writeln!(p, "p_min = {}", self.p_min);
        let _ = writeln!(p, "p_max = {}", self.p_max);
        let _ = writeln!(p, "bits_per_pixel = {}", self.bits_per_pixel);
        let _ = writeln!(p, "map_side_m = {}", self.map_side_m);
        let _ = writeln!(p, "max_move_m = {}", self.max_move_m);
        let _ = writeln!(p, "weight_q = {}", self.weight_q);
        let _ = writeln!(p, "weight_b = {}", self.weight_b);
        let _ = writeln!(p, "weight_f = {}", self.weight_f);
        let _ = writeln!(p, "episode_len = {}", self.episode_len);
        let _ = writeln!(p, "path_loss_exponent = {}", self.path_loss_exponent);
        let _ = writeln!(p, "reference_gain = {}", self.reference_gain);
        let _ = writeln!(p, "fading_enabled = {}", self.fading_enabled);
        let positions: Vec<String> = self
            .mmbs_positions
            .iter()
            .map(|(x, y)| format!("{x},{y}"))
            .collect();
        let _ = writeln!(p, "mmbs_positions = {}", positions.join("; "));
        let _ = writeln!(p, "seed = {}", self.seed);
        s
    }

    /// Parses the flat `key = value` format. Unknown keys are rejected so a
    /// typo cannot silently fall back to a default.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut explicit_mmbs = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse("config", format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |detail: String| Error::parse("config", detail);
            macro_rules! num {
                ($t:ty) => {
                    value.parse::<$t>().map_err(|_| {
                        bad(format!("line {}: {key} wants a number, got \"{value}\"", lineno + 1))
                    })?
                };
            }
            match key {
                "n_iov" => cfg.n_iov = num!(usize),
                "n_mmbs" => cfg.n_mmbs = num!(usize),
                "bandwidth_hz" => cfg.bandwidth_hz = num!(f64),
                "noise_psd" => cfg.noise_psd = num!(f64),
                "noise_is_total" => cfg.noise_is_total = num!(bool),
                "power_min" => cfg.power_min = num!(f64),
                "power_max" => cfg.power_max = num!(f64),
                "p_min" => cfg.p_min = num!(f64),
                "p_max" => cfg.p_max = num!(f64),
                "bits_per_pixel" => cfg.bits_per_pixel = num!(f64),
                "map_side_m" => cfg.map_side_m = num!(f64),
                "max_move_m" => cfg.max_move_m = num!(f64),
                "weight_q" => cfg.weight_q = num!(f64),
                "weight_b" => cfg.weight_b = num!(f64),
                "weight_f" => cfg.weight_f = num!(f64),
                "episode_len" => cfg.episode_len = num!(u32),
                "path_loss_exponent" => cfg.path_loss_exponent = num!(f64),
                "reference_gain" => cfg.reference_gain = num!(f64),
                "fading_enabled" => cfg.fading_enabled = num!(bool),
                "seed" => cfg.seed = num!(u64),
                "mmbs_positions" => {
                    explicit_mmbs = true;
                    cfg.mmbs_positions = parse_positions(value)
                        .map_err(|d| bad(format!("line {}: {d}", lineno + 1)))?;
                }
                other => {
                    return Err(bad(format!("line {}: unknown key \"{other}\"", lineno + 1)));
                }
            }
        }
        if !explicit_mmbs {
            cfg.mmbs_positions = mmbs_layout(cfg.n_mmbs, cfg.map_side_m, cfg.seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_key_values())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_key_values(&text)
    }
}

fn parse_positions(value: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    let mut out = Vec::new();
    for pair in value.split(';') {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let (x, y) = pair
            .split_once(',')
            .ok_or_else(|| format!("expected \"x,y\", got \"{pair}\""))?;
        let x: f64 = x.trim().parse().map_err(|_| format!("bad x in \"{pair}\""))?;
        let y: f64 = y.trim().parse().map_err(|_| format!("bad y in \"{pair}\""))?;
        out.push((x, y));
    }
    Ok(out)
}

/// Deterministic base-station layout. Three stations sit at fixed
/// map-relative spots; any other count is placed uniformly from a seeded
/// stream so runs stay reproducible.
pub fn mmbs_layout(m: usize, map_side_m: f64, seed: u64) -> Vec<(f64, f64)> {
    if m == 3 {
        return vec![
            (0.25 * map_side_m, 0.25 * map_side_m),
            (0.75 * map_side_m, 0.25 * map_side_m),
            (0.50 * map_side_m, 0.75 * map_side_m),
        ];
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(derive_seed(seed, MMBS_PLACEMENT_STREAM));
    (0..m)
        .map(|_| {
            (
                rng.random_range(0.0..=map_side_m),
                rng.random_range(0.0..=map_side_m),
            )
        })
        .collect()
}

/// Parses a scenario code "MN" into (n_mmbs, n_iov).
///
/// Only the experiment grid (M = 3, N in 3..=7) is accepted.
pub fn parse_scenario(s: &str) -> Result<(usize, usize)> {
    if SCENARIOS.contains(&s) {
        let bytes = s.as_bytes();
        Ok(((bytes[0] - b'0') as usize, (bytes[1] - b'0') as usize))
    } else {
        Err(Error::UnknownScenario(s.to_string()))
    }
}

/// Inverse of [`parse_scenario`].
pub fn format_scenario(m: usize, n: usize) -> String {
    format!("{m}{n}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_codes_round_trip() {
        for s in SCENARIOS {
            let (m, n) = parse_scenario(s).unwrap();
            assert_eq!(format_scenario(m, n), s);
        }
        assert_eq!(parse_scenario("37").unwrap(), (3, 7));
    }

    #[test]
    fn unknown_scenarios_are_rejected() {
        for bad in ["99", "32", "38", "3", "334", "ab", ""] {
            assert!(matches!(parse_scenario(bad), Err(Error::UnknownScenario(_))), "{bad}");
        }
    }

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn key_value_round_trip() {
        let mut cfg = ScenarioConfig::for_scenario("35", 7).unwrap();
        cfg.fading_enabled = true;
        cfg.noise_is_total = true;
        let text = cfg.to_key_values();
        let back = ScenarioConfig::from_key_values(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!(ScenarioConfig::from_key_values("n_iov
").is_err());
        assert!(ScenarioConfig::from_key_values("n_iov = three
").is_err());
        assert!(ScenarioConfig::from_key_values("mystery_key = 4
").is_err());
        // invariant violations caught by validate
        assert!(ScenarioConfig::from_key_values("p_min = 500
").is_err());
    }

    #[test]
    fn fixed_layout_for_three_stations() {
        let cfg = ScenarioConfig::default();
        assert_eq!(
            cfg.mmbs_positions,
            vec![(250.0, 250.0), (750.0, 250.0), (500.0, 750.0)]
        );
    }

    #[test]
    fn seeded_layout_for_other_counts() {
        let a = mmbs_layout(5, 1000.0, 1);
        let b = mmbs_layout(5, 1000.0, 1);
        let c = mmbs_layout(5, 1000.0, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 5);
        for (x, y) in a {
            assert!((0.0..=1000.0).contains(&x) && (0.0..=1000.0).contains(&y));
        }
    }

    #[test]
    fn noise_power_readings() {
        let mut cfg = ScenarioConfig::default();
        assert!((cfg.noise_power() - 1.0e-6).abs() < 1e-18);
        cfg.noise_is_total = true;
        assert!((cfg.noise_power() - 1.0e-13).abs() < 1e-25);
    }
}
