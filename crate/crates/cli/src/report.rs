use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use amod_core::simulator::{read_metrics_csv, MetricsRow};
use anyhow::Context;

use crate::commands::{mean, METRICS_FILE, RUN_CONFIG_FILE};
use crate::config::{config_error, parse_config};

/// Metrics of one run directory or CSV file.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub source: PathBuf,
    pub rows: Vec<MetricsRow>,
    /// From the sibling run configuration, when there is one.
    pub fleet_size: Option<usize>,
}

pub fn load_metrics(path: &Path) -> anyhow::Result<RunMetrics> {
    let csv = if path.is_dir() { path.join(METRICS_FILE) } else { path.to_path_buf() };
    let file = std::fs::File::open(&csv).map_err(|e| config_error(format!("cannot open {}: {e}", csv.display())))?;
    let rows = read_metrics_csv(std::io::BufReader::new(file)).with_context(|| format!("reading {}", csv.display()))?;
    let run_toml = csv.parent().unwrap_or(Path::new(".")).join(RUN_CONFIG_FILE);
    let fleet_size = std::fs::read_to_string(&run_toml)
        .ok()
        .and_then(|t| parse_config(&t).ok())
        .map(|c| c.scenario.fleet_size);
    Ok(RunMetrics {
        source: csv,
        rows,
        fleet_size,
    })
}

/// One seed-averaged line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub policy: String,
    pub answer_rate_pct: f64,
    pub avg_wait_s: f64,
    pub rebalance_km: f64,
    pub vur_pct: f64,
    pub runs: usize,
    pub fleet_sizes: Vec<usize>,
}

/// Groups rows by policy in order of first appearance.
pub fn build_report(inputs: &[RunMetrics]) -> anyhow::Result<Vec<ReportRow>> {
    let mut order: Vec<String> = Vec::new();
    for m in inputs {
        for r in &m.rows {
            if !order.contains(&r.policy) {
                order.push(r.policy.clone());
            }
        }
    }
    if order.is_empty() {
        return Err(config_error("no metrics rows to report"));
    }
    Ok(order
        .into_iter()
        .map(|policy| {
            let mut fleet_sizes = Vec::new();
            let mut rows = Vec::new();
            for m in inputs {
                let mine: Vec<&MetricsRow> = m.rows.iter().filter(|r| r.policy == policy).collect();
                if let (Some(f), false) = (m.fleet_size, mine.is_empty()) {
                    if !fleet_sizes.contains(&f) {
                        fleet_sizes.push(f);
                    }
                }
                rows.extend(mine);
            }
            fleet_sizes.sort_unstable();
            ReportRow {
                answer_rate_pct: 100.0 * mean(rows.iter().map(|r| r.answer_rate)),
                avg_wait_s: mean(rows.iter().map(|r| r.avg_wait_s)),
                rebalance_km: mean(rows.iter().map(|r| r.rebalance_km)),
                vur_pct: 100.0 * mean(rows.iter().map(|r| r.vur)),
                runs: rows.len(),
                fleet_sizes,
                policy,
            }
        })
        .collect())
}

fn mixed_fleets(rows: &[ReportRow]) -> bool {
    let mut all: Vec<usize> = rows.iter().flat_map(|r| r.fleet_sizes.iter().copied()).collect();
    all.sort_unstable();
    all.dedup();
    all.len() > 1 || rows.iter().any(|r| r.fleet_sizes.len() > 1)
}

fn fleet_label(r: &ReportRow) -> String {
    if r.fleet_sizes.is_empty() {
        "?".into()
    } else {
        r.fleet_sizes.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("/")
    }
}

pub fn render_table(rows: &[ReportRow]) -> String {
    let mixed = mixed_fleets(rows);
    let mut out = format!(
        "{:<14} {:>15} {:>16} {:>24} {:>8} {:>5} {:>7}\n",
        "policy", "answer rate (%)", "waiting time (s)", "rebalancing distance (km)", "VUR (%)", "runs", "fleet"
    );
    for r in rows {
        writeln!(
            out,
            "{:<14} {:>15.2} {:>16.1} {:>24.2} {:>8.2} {:>5} {:>7}",
            r.policy,
            r.answer_rate_pct,
            r.avg_wait_s,
            r.rebalance_km,
            r.vur_pct,
            r.runs,
            format!("{}{}", fleet_label(r), if mixed { "*" } else { "" }),
        )
        .unwrap();
    }
    if mixed {
        out.push_str("* rows come from runs with different fleet sizes and are not directly comparable\n");
    }
    out
}

pub fn write_report_csv(rows: &[ReportRow], out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let mixed = mixed_fleets(rows);
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "answer_rate_pct",
        "avg_wait_s",
        "rebalance_km",
        "vur_pct",
        "runs",
        "fleet_size",
        "mixed_fleet",
    ])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            format!("{:.4}", r.answer_rate_pct),
            format!("{:.4}", r.avg_wait_s),
            format!("{:.4}", r.rebalance_km),
            format!("{:.4}", r.vur_pct),
            r.runs.to_string(),
            fleet_label(r),
            mixed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(policy: &str, seeds: u64, ar: f64, fleet: Option<usize>) -> RunMetrics {
        RunMetrics {
            source: PathBuf::new(),
            rows: (0..seeds)
                .map(|seed| MetricsRow {
                    policy: policy.into(),
                    seed,
                    answer_rate: ar,
                    avg_wait_s: 60.0,
                    rebalance_km: 0.0,
                    vur: 0.4,
                })
                .collect(),
            fleet_size: fleet,
        }
    }

    #[test]
    fn four_policies_give_four_rows() {
        let inputs: Vec<RunMetrics> = ["hierarchical", "upper_only", "lower_only", "no_control"]
            .iter()
            .map(|p| metrics(p, 3, 0.5, Some(60)))
            .collect();
        let rows = build_report(&inputs).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].policy, "hierarchical");
        assert_eq!(rows[3].runs, 3);
        let table = render_table(&rows);
        let header = table.lines().next().unwrap();
        let cols = ["answer rate", "waiting time", "rebalancing distance", "VUR"];
        let pos: Vec<usize> = cols.iter().map(|c| header.find(c).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(!table.contains('*'));
    }

    #[test]
    fn mixed_fleets_are_flagged() {
        let rows = build_report(&[metrics("a", 1, 0.5, Some(60)), metrics("b", 1, 0.5, Some(40))]).unwrap();
        assert!(render_table(&rows).contains("different fleet sizes"));
    }

    #[test]
    fn seeds_are_averaged() {
        let rows = build_report(&[metrics("a", 2, 0.5, None), metrics("a", 2, 0.7, None)]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].answer_rate_pct - 60.0).abs() < 1e-9);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(build_report(&[]).is_err());
    }
}
