//! Cross-seed aggregation of metrics rows into median/min/max summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{MetricsRow, METRICS_HEADER};
use crate::error::Error;
use crate::rl::Algo;
use crate::Result;

/// The metrics aggregated per (scenario, algorithm) cell, in output order.
const METRIC_NAMES: [&str; 7] = [
    "final_reward_alloc",
    "final_reward_resol",
    "eval_reward_alloc",
    "eval_reward_resol",
    "eval_total_delay_s",
    "eval_mean_map",
    "eval_idle_count",
];

/// Median/min/max over seeds for every metric of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub scenario: String,
    pub algorithm: Algo,
    pub n_seeds: usize,
    /// One (median, min, max) triple per aggregated metric, in the order
    /// of the summary CSV columns.
    pub stats: Vec<(f64, f64, f64)>,
}

impl CellSummary {
    pub fn metric(&self, name: &str) -> Option<(f64, f64, f64)> {
        METRIC_NAMES
            .iter()
            .position(|m| *m == name)
            .map(|i| self.stats[i])
    }
}

/// Aggregated view over all rows, plus any grid cells that were requested
/// but produced no rows (reported, never fabricated).
#[derive(Debug, Clone)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    pub missing: Vec<(String, Algo)>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn metric_values(rows: &[&MetricsRow], idx: usize) -> Vec<f64> {
    rows.iter()
        .map(|r| match idx {
            0 => r.final_reward_alloc,
            1 => r.final_reward_resol,
            2 => r.eval_reward_alloc,
            3 => r.eval_reward_resol,
            4 => r.eval_total_delay_s,
            5 => r.eval_mean_map,
            _ => r.eval_idle_count as f64,
        })
        .collect()
}

/// Groups rows by (scenario, algorithm) and reduces each metric to
/// median/min/max over seeds.
pub fn aggregate(rows: &[MetricsRow], expected: Option<&[(String, Algo)]>) -> Summary {
    let mut groups: BTreeMap<(String, String), Vec<&MetricsRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.scenario.clone(), row.algorithm.name().to_string()))
            .or_default()
            .push(row);
    }
    let mut cells = Vec::new();
    for ((scenario, _), group) in &groups {
        let algorithm = group[0].algorithm;
        let stats = (0..METRIC_NAMES.len())
            .map(|i| {
                let mut values = metric_values(group, i);
                values.sort_by(|a, b| a.total_cmp(b));
                (median(&values), values[0], values[values.len() - 1])
            })
            .collect();
        cells.push(CellSummary {
            scenario: scenario.clone(),
            algorithm,
            n_seeds: group.len(),
            stats,
        });
    }
    let missing = expected
        .map(|cells_wanted| {
            cells_wanted
                .iter()
                .filter(|(s, a)| !groups.contains_key(&(s.clone(), a.name().to_string())))
                .cloned()
                .collect()
        })
        .unwrap_or_default();
    Summary { cells, missing }
}

impl Summary {
    /// Long-format CSV: one line per (cell, metric).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scenario,algorithm,metric,n_seeds,median,min,max\n");
        for cell in &self.cells {
            for (name, (med, min, max)) in METRIC_NAMES.iter().zip(&cell.stats) {
                let _ = writeln!(
                    s,
                    "{},{},{name},{},{med},{min},{max}",
                    cell.scenario, cell.algorithm, cell.n_seeds
                );
            }
        }
        s
    }

    /// Aligned plain-text table for eyeballs.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<9} {:<7} {:>7} {:>20} {:>20} {:>13} {:>9} {:>10}",
            "scenario", "algo", "n_seeds", "final_reward_alloc", "final_reward_resol",
            "total_delay_s", "mean_map", "idle_count"
        );
        for cell in &self.cells {
            let g = |name: &str| cell.metric(name).unwrap().0;
            let _ = writeln!(
                s,
                "{:<9} {:<7} {:>7} {:>20.3} {:>20.3} {:>13.3} {:>9.3} {:>10.1}",
                cell.scenario,
                cell.algorithm.name(),
                cell.n_seeds,
                g("final_reward_alloc"),
                g("final_reward_resol"),
                g("eval_total_delay_s"),
                g("eval_mean_map"),
                g("eval_idle_count"),
            );
        }
        for (scenario, algo) in &self.missing {
            let _ = writeln!(s, "{:<9} {:<7} missing", scenario, algo.name());
        }
        s
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        std::fs::write(out_dir.join("summary.csv"), self.to_csv())?;
        std::fs::write(out_dir.join("summary.txt"), self.to_table())?;
        Ok(())
    }
}

/// Recursively collects every `metrics.csv` under a sweep output directory.
pub fn read_metrics_rows(dir: &Path) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    collect_rows(dir, &mut rows)?;
    if rows.is_empty() {
        return Err(Error::EmptyAggregation(dir.display().to_string()));
    }
    // deterministic order regardless of directory walk order
    rows.sort_by(|a, b| {
        (a.scenario.as_str(), a.algorithm.name(), a.seed)
            .cmp(&(b.scenario.as_str(), b.algorithm.name(), b.seed))
    });
    Ok(rows)
}

fn collect_rows(dir: &Path, rows: &mut Vec<MetricsRow>) -> Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            collect_rows(&path, rows)?;
        } else if path.file_name().is_some_and(|n| n == "metrics.csv") {
            let text = std::fs::read_to_string(&path)?;
            let mut lines = text.lines();
            match lines.next() {
                Some(h) if h == METRICS_HEADER => {}
                other => {
                    return Err(Error::parse(
                        "metrics csv",
                        format!("{}: unexpected header {other:?}", path.display()),
                    ))
                }
            }
            for line in lines.filter(|l| !l.trim().is_empty()) {
                rows.push(MetricsRow::from_csv_line(line)?);
            }
        }
    }
    Ok(())
}

/// Aggregates whatever rows exist under `dir` and writes the summary files
/// next to them.
pub fn aggregate_dir(dir: &Path) -> Result<Summary> {
    let rows = read_metrics_rows(dir)?;
    let summary = aggregate(&rows, None);
    summary.save(dir)?;
    Ok(summary)
}
