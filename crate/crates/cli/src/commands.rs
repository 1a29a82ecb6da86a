use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use amod_core::deepc::{build_hankel, numerical_rank, CollectedData};
use amod_core::experiment::{Experiment, RunConfig, RunOutcome};
use amod_core::simulator::{write_metrics_csv, write_series_csv, MetricsReport};
use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{config_error, render_config};
use crate::output::{write_atomic, write_text};

pub const COLLECTED_FILE: &str = "collected.csv";
pub const COLLECTED_META_FILE: &str = "collected.meta.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const RUN_CONFIG_FILE: &str = "run.toml";

/// Writes the road network and its region partition.
pub fn net_gen(cfg: &RunConfig, out: &Path) -> anyhow::Result<String> {
    let exp = Experiment::new(cfg.clone())?;
    let city = &exp.city;
    write_atomic(&out.join("nodes.csv"), |w| Ok(city.graph.write_nodes_csv(w)?))?;
    write_atomic(&out.join("links.csv"), |w| Ok(city.graph.write_links_csv(w)?))?;
    write_atomic(&out.join("regions.csv"), |w| Ok(city.partition.write_csv(w)?))?;
    let mut msg = format!(
        "{} nodes, {} links, {} regions, diameter {:.2} km\n",
        city.graph.node_count(),
        city.graph.links().len(),
        city.partition.region_count(),
        city.dist.diameter()
    );
    for r in 0..city.partition.region_count() {
        writeln!(msg, "  region {r}: {} nodes", city.partition.members(r).len()).unwrap();
    }
    Ok(msg)
}

/// Metadata stored beside a collected-data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionMeta {
    pub windows: usize,
    pub t_upper_s: f64,
    pub regions: usize,
    pub seed: u64,
}

/// Rank of the stacked input and demand Hankel matrix at the order the
/// controller needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationCheck {
    pub order: usize,
    pub rows: usize,
    pub rank: usize,
}

impl ExcitationCheck {
    pub fn of(data: &CollectedData, order: usize) -> anyhow::Result<Self> {
        let h = build_hankel(&data.u.stack(&data.w)?, order)?;
        Ok(ExcitationCheck {
            order,
            rows: h.nrows(),
            rank: numerical_rank(&h),
        })
    }

    pub fn message(&self) -> String {
        let mut msg = format!(
            "excitation check: rank {} of {} rows at order {}",
            self.rank, self.rows, self.order
        );
        if self.rank < self.rows {
            // origin and destination counts of one window always share a sum
            write!(msg, " (deficit {}", self.rows - self.rank).unwrap();
            if self.rows - self.rank == self.order {
                msg.push_str(", exactly the demand-conservation identity");
            }
            msg.push(')');
        }
        msg
    }
}

pub fn collect(cfg: &RunConfig, out: &Path) -> anyhow::Result<String> {
    let exp = Experiment::new(cfg.clone())?;
    let data = exp.collect()?;
    let path = out.join(COLLECTED_FILE);
    write_atomic(&path, |w| Ok(data.write_csv(w)?))?;
    let meta = CollectionMeta {
        windows: data.len(),
        t_upper_s: cfg.scenario.t_upper_s,
        regions: cfg.network.regions,
        seed: cfg.controller.collection_seed,
    };
    write_text(&out.join(COLLECTED_META_FILE), &toml::to_string_pretty(&meta)?)?;
    let c = &cfg.controller;
    let check = ExcitationCheck::of(&data, c.t_ini + c.horizon + cfg.n_assumed())?;
    Ok(format!("{} windows written to {}\n{}\n", data.len(), path.display(), check.message()))
}

/// Runs every configured seed and writes metrics, series, a summary and
/// the materialized configuration.
pub fn run(cfg: &RunConfig, out: &Path) -> anyhow::Result<String> {
    if cfg.policy.uses_upper() && cfg.controller.data.is_none() {
        return Err(config_error(format!(
            "policy {} needs collected data: run the `collect` subcommand and set controller.data",
            cfg.policy
        )));
    }
    let exp = Experiment::from_config(cfg.clone())?;
    let outcomes: Vec<RunOutcome> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            exp.run_seed(cfg.policy, seed, cfg.controller.forecast)
                .with_context(|| format!("seed {seed}"))
        })
        .collect::<anyhow::Result<_>>()?;

    let rows: Vec<_> = outcomes.iter().map(|o| o.report.row()).collect();
    write_atomic(&out.join(METRICS_FILE), |w| Ok(write_metrics_csv(&rows, w)?))?;
    for o in &outcomes {
        let path = out.join("series").join(format!("seed_{}.csv", o.report.seed));
        write_atomic(&path, |w| Ok(write_series_csv(&o.series, w)?))?;
    }
    let summary = summarize(cfg, &outcomes);
    write_text(&out.join(SUMMARY_FILE), &summary)?;
    write_text(&out.join(RUN_CONFIG_FILE), &render_config(cfg))?;
    Ok(summary)
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs
        .into_iter()
        .filter(|x| x.is_finite())
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn summarize(cfg: &RunConfig, outcomes: &[RunOutcome]) -> String {
    let s = &cfg.scenario;
    let mut out = format!(
        "policy {}  fleet {}  {:.1} h  rate {}/s  regions {}\n\n",
        cfg.policy,
        s.fleet_size,
        s.duration_s / 3600.0,
        s.request_rate,
        cfg.network.regions
    );
    writeln!(out, "{:>6} {:>8} {:>9} {:>9} {:>10} {:>7} {:>7}", "seed", "issued", "answer%", "wait s", "rebal km", "VUR%", "fallbk").unwrap();
    let line = |out: &mut String, label: &str, r: &[&MetricsReport], fallbacks: f64| {
        writeln!(
            out,
            "{:>6} {:>8.0} {:>9.2} {:>9.1} {:>10.2} {:>7.2} {:>7.1}",
            label,
            mean(r.iter().map(|m| m.issued as f64)),
            100.0 * mean(r.iter().map(|m| m.answer_rate)),
            mean(r.iter().map(|m| m.avg_wait_s)),
            mean(r.iter().map(|m| m.rebalance_km)),
            100.0 * mean(r.iter().map(|m| m.vur)),
            fallbacks,
        )
        .unwrap();
    };
    for o in outcomes {
        line(&mut out, &o.report.seed.to_string(), &[&o.report], o.fallbacks as f64);
    }
    let all: Vec<&MetricsReport> = outcomes.iter().map(|o| &o.report).collect();
    line(&mut out, "mean", &all, mean(outcomes.iter().map(|o| o.fallbacks as f64)));
    out
}

/// Directory a subcommand writes to: the flag, else the configured one.
pub fn out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.clone())
}
