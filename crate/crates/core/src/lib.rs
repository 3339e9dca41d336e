//! Simulator and reinforcement-learning library for vehicle-to-edge uplink
//! offloading.
//!
//! A fleet of Internet-of-Vehicles (IoV) clients streams camera scenes to
//! edge base stations (MMBS) for compute-heavy detection. Two coupled
//! decisions are made every transmission iteration:
//!
//! * which MMBS each IoV uploads to, or whether it stays idle (discrete), and
//! * at which resolution each IoV encodes its scene (continuous),
//!
//! trading detection quality against uplink latency and idle counts. The
//! [`world`] module simulates the radio side (path loss, intra-cell
//! interference, Shannon rates, latency, rewards), [`map_model`] holds the
//! empirical detection-quality curve, [`nn`] is a small MLP/Adam toolkit,
//! [`rl`] implements the dual-actor shared-critic PPO family used to learn
//! the joint policy, and [`harness`] orchestrates seeded experiments.

pub mod config;
pub mod error;
pub mod harness;
pub mod map_model;
pub mod nn;
pub mod rl;
pub mod world;

pub use config::ScenarioConfig;
pub use error::Error;
pub use map_model::MapCurve;
pub use world::{JointAction, StepOutcome, UplinkWorld, WorldState};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Derives an independent stream seed from a base seed.
///
/// Training, evaluation, network init and environment draws must not share
/// an RNG stream, otherwise e.g. changing the evaluation cadence would
/// perturb training trajectories. SplitMix64 keeps the derivation stable
/// across platforms.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
