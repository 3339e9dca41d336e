//! Command-line driver for the uplink offloading simulator and its
//! reinforcement-learning experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uplink_rl::config::{format_scenario, parse_scenario, ScenarioConfig, SCENARIOS};
use uplink_rl::harness::{self, ExperimentPlan, RunOptions};
use uplink_rl::map_model;
use uplink_rl::rl::Algo;

#[derive(Parser)]
#[command(
    name = "uplink-rl",
    version,
    about = "Train and evaluate allocation/resolution agents on the vehicle-to-edge uplink simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one (scenario, algorithm, seed) triple and write its artifacts
    Train(RunArgs),
    /// Run one deterministic evaluation episode from a saved checkpoint
    Evaluate(RunArgs),
    /// Run a grid of scenarios x algorithms x seeds, then aggregate
    Sweep(SweepArgs),
    /// Fit detection-quality curve coefficients from resolution/mAP pairs
    FitMap(FitMapArgs),
    /// Aggregate every metrics.csv under an output directory
    Aggregate(AggregateArgs),
}

/// Parses on/off switches.
fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected \"on\" or \"off\", got \"{other}\"")),
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario code: 3 MMBS and 3..=7 IoVs, e.g. 35
    #[arg(long)]
    scenario: Option<String>,
    /// happo, haa2c, ippo or random
    #[arg(long, default_value = "happo")]
    algo: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total environment steps (desk scale by default; the full-scale
    /// experiments used 280000)
    #[arg(long, default_value_t = 50_000)]
    steps: u64,
    /// Physical-parameter config file (key = value); grid shape and seed
    /// still come from --scenario/--seed
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (runs go to out/scenario/algo/seed/)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Rayleigh-power fading on the channel gains [default: on, or the
    /// config file's value]
    #[arg(long, value_parser = parse_switch)]
    fading: Option<bool>,
    /// Use the min-over-ratios clipped surrogate instead of the standard
    /// min-over-products form
    #[arg(long = "eq13-literal", value_parser = parse_switch, default_value = "off", action = clap::ArgAction::Set)]
    eq13_literal: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated scenario codes, or "all" for 33..37
    #[arg(long, default_value = "all")]
    scenario: String,
    /// Comma-separated algorithms, or "all"
    #[arg(long, default_value = "all")]
    algo: String,
    /// Comma-separated seeds
    #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9")]
    seed: String,
    #[arg(long, default_value_t = 50_000)]
    steps: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_parser = parse_switch)]
    fading: Option<bool>,
    #[arg(long = "eq13-literal", value_parser = parse_switch, default_value = "off", action = clap::ArgAction::Set)]
    eq13_literal: bool,
}

#[derive(Args)]
struct FitMapArgs {
    /// CSV of measured pairs with header "resolution_ppi,map"
    #[arg(long = "in")]
    input: PathBuf,
    /// Where to write the 4 fitted coefficients; printed either way
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Directory holding scenario/algo/seed/metrics.csv trees
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn build_options(
    steps: u64,
    config: &Option<PathBuf>,
    fading: Option<bool>,
    eq13_literal: bool,
) -> uplink_rl::Result<RunOptions> {
    let mut opts = RunOptions::desk_scale();
    opts.total_steps = steps;
    opts.eq13_literal = eq13_literal;
    if let Some(path) = config {
        let cfg = ScenarioConfig::load(path)?;
        opts.fading = fading.unwrap_or(cfg.fading_enabled);
        opts.base_config = cfg;
    } else {
        opts.fading = fading.unwrap_or(true);
    }
    Ok(opts)
}

/// Scenario label for a run; `--scenario` wins, otherwise it is derived
/// from the config file's grid shape.
fn scenario_label(args_scenario: &Option<String>, opts: &RunOptions) -> uplink_rl::Result<String> {
    match args_scenario {
        Some(s) => {
            parse_scenario(s)?;
            Ok(s.clone())
        }
        None => {
            let label = format_scenario(opts.base_config.n_mmbs, opts.base_config.n_iov);
            parse_scenario(&label)?;
            Ok(label)
        }
    }
}

fn parse_scenario_list(s: &str) -> uplink_rl::Result<Vec<String>> {
    if s == "all" {
        return Ok(SCENARIOS.iter().map(|x| x.to_string()).collect());
    }
    let list: Vec<String> = s.split(',').map(|x| x.trim().to_string()).collect();
    for item in &list {
        parse_scenario(item)?;
    }
    Ok(list)
}

fn parse_algo_list(s: &str) -> uplink_rl::Result<Vec<Algo>> {
    if s == "all" {
        return Ok(Algo::ALL.to_vec());
    }
    s.split(',').map(|x| Algo::parse(x.trim())).collect()
}

fn parse_seed_list(s: &str) -> uplink_rl::Result<Vec<u64>> {
    s.split(',')
        .map(|x| {
            x.trim().parse::<u64>().map_err(|_| {
                uplink_rl::Error::Parse {
                    what: "seed list".into(),
                    detail: format!("bad seed \"{x}\""),
                }
            })
        })
        .collect()
}

fn run() -> uplink_rl::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let algo = Algo::parse(&args.algo)?;
            let opts = build_options(args.steps, &args.config, args.fading, args.eq13_literal)?;
            let scenario = scenario_label(&args.scenario, &opts)?;
            let row = harness::run_single(&args.out, &scenario, algo, args.seed, &opts)?;
            println!(
                "trained {scenario}/{algo}/{}: final rewards ({:.3}, {:.3}), eval delay {:.3} s, eval mAP {:.3}, idle {}",
                args.seed,
                row.final_reward_alloc,
                row.final_reward_resol,
                row.eval_total_delay_s,
                row.eval_mean_map,
                row.eval_idle_count
            );
        }
        Command::Evaluate(args) => {
            let algo = Algo::parse(&args.algo)?;
            let opts = build_options(args.steps, &args.config, args.fading, args.eq13_literal)?;
            let scenario = scenario_label(&args.scenario, &opts)?;
            let s = harness::evaluate_checkpoint(&args.out, &scenario, algo, args.seed, &opts)?;
            println!(
                "evaluated {scenario}/{algo}/{}: total delay {:.3} s, mean mAP {:.3}, idle {}, rewards ({:.3}, {:.3})",
                args.seed,
                s.total_delay_s,
                s.mean_map,
                s.idle_count,
                s.reward_alloc_mean,
                s.reward_resol_mean
            );
        }
        Command::Sweep(args) => {
            let options = build_options(args.steps, &args.config, args.fading, args.eq13_literal)?;
            let plan = ExperimentPlan {
                scenarios: parse_scenario_list(&args.scenario)?,
                algorithms: parse_algo_list(&args.algo)?,
                seeds: parse_seed_list(&args.seed)?,
                options,
                out_dir: args.out.clone(),
            };
            let rows = harness::run_experiment(&plan)?;
            for row in &rows {
                println!(
                    "{}/{}/{}: final rewards ({:.3}, {:.3})",
                    row.scenario, row.algorithm, row.seed,
                    row.final_reward_alloc, row.final_reward_resol
                );
            }
            println!("{} runs -> {}", rows.len(), args.out.join("summary.txt").display());
        }
        Command::FitMap(args) => {
            let pairs = map_model::read_pairs_csv(&args.input)?;
            let fit = map_model::fit_curve(&pairs)?;
            let [c3, c2, c1, c0] = fit.curve.coeffs();
            println!("coefficients (p^3, p^2, p, 1): {c3:e} {c2:e} {c1:e} {c0:e}");
            println!("residual rms: {:e}", fit.residual_rms);
            let (lo, hi) = fit.curve.domain();
            println!("domain: [{lo}, {hi}] ppi");
            if let Some(out) = args.out {
                fit.curve.save(&out)?;
                println!("wrote {}", out.display());
            }
        }
        Command::Aggregate(args) => {
            let summary = harness::aggregate_dir(&args.out)?;
            print!("{}", summary.to_table());
            println!("wrote {} and {}",
                args.out.join("summary.csv").display(),
                args.out.join("summary.txt").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
