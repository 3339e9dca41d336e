//! Experiment orchestration: seeded multi-run training and evaluation over
//! the scenario grid, per-run CSV artifacts, and cross-seed aggregation.
//!
//! Every (scenario, algorithm, seed) triple produces one run directory
//! `out/<scenario>/<algo>/<seed>/` holding `config.txt`, `train.csv`,
//! `episodes.csv`, `metrics.csv` and `checkpoints/`. Runs are bitwise
//! reproducible from (plan, seed, build).

mod aggregate;
mod run;

pub use aggregate::{aggregate, aggregate_dir, read_metrics_rows, CellSummary, Summary};
pub use run::{evaluate_checkpoint, run_experiment, run_single, RunOptions};

use std::path::{Path, PathBuf};

use crate::config::SCENARIOS;
use crate::error::Error;
use crate::rl::Algo;
use crate::Result;

/// What to run: the cross product of scenarios, algorithms and seeds.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub scenarios: Vec<String>,
    pub algorithms: Vec<Algo>,
    pub seeds: Vec<u64>,
    pub options: RunOptions,
    pub out_dir: PathBuf,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            scenarios: SCENARIOS.iter().map(|s| s.to_string()).collect(),
            algorithms: Algo::ALL.to_vec(),
            seeds: (0..=9).collect(),
            options: RunOptions::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("plan needs scenarios, algorithms and seeds".into()));
        }
        for s in &self.scenarios {
            crate::config::parse_scenario(s)?;
        }
        Ok(())
    }
}

/// One row of the per-run metrics file.
///
/// The `final_*` rewards are training-time statistics (mean per-step reward
/// over the last 10% of training episodes); the `eval_*` rewards are the
/// deterministic-policy evaluation means over the final 10% of training.
/// Both are emitted because "overall reward" is ambiguous between them. The
/// remaining eval metrics come from the last evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario: String,
    pub algorithm: Algo,
    pub seed: u64,
    pub final_reward_alloc: f64,
    pub final_reward_resol: f64,
    pub eval_reward_alloc: f64,
    pub eval_reward_resol: f64,
    pub eval_total_delay_s: f64,
    pub eval_mean_map: f64,
    pub eval_idle_count: u64,
}

pub(crate) const METRICS_HEADER: &str = "scenario,algorithm,seed,final_reward_alloc,final_reward_resol,eval_reward_alloc,eval_reward_resol,eval_total_delay_s,eval_mean_map,eval_idle_count";

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.algorithm,
            self.seed,
            self.final_reward_alloc,
            self.final_reward_resol,
            self.eval_reward_alloc,
            self.eval_reward_resol,
            self.eval_total_delay_s,
            self.eval_mean_map,
            self.eval_idle_count
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::parse(
                "metrics row",
                format!("expected 10 fields, got {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::parse("metrics row", format!("bad number \"{}\"", fields[i])))
        };
        Ok(MetricsRow {
            scenario: fields[0].to_string(),
            algorithm: Algo::parse(fields[1])?,
            seed: fields[2]
                .parse()
                .map_err(|_| Error::parse("metrics row", format!("bad seed \"{}\"", fields[2])))?,
            final_reward_alloc: num(3)?,
            final_reward_resol: num(4)?,
            eval_reward_alloc: num(5)?,
            eval_reward_resol: num(6)?,
            eval_total_delay_s: num(7)?,
            eval_mean_map: num(8)?,
            eval_idle_count: fields[9]
                .parse()
                .map_err(|_| Error::parse("metrics row", format!("bad idle count \"{}\"", fields[9])))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, format!("{METRICS_HEADER}\n{}\n", self.to_csv_line()))?;
        Ok(())
    }
}

/// Per-run directory `out/<scenario>/<algo>/<seed>/`.
pub fn run_dir(out_dir: &Path, scenario: &str, algo: Algo, seed: u64) -> PathBuf {
    out_dir.join(scenario).join(algo.name()).join(seed.to_string())
}
