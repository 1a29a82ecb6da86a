use std::fmt;
use std::path::Path;
use std::str::FromStr;

use amod_core::experiment::{Experiment, RunConfig};
use amod_core::policies::ForecastNoise;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::mean;
use crate::config::config_error;
use crate::output::write_atomic;

pub const SWEEP_FILE: &str = "sweep.csv";
pub const BANDS_FILE: &str = "sweep_bands.csv";
pub const PERCENTILES: [f64; 4] = [25.0, 50.0, 75.0, 90.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Rebalancing-cost weight of the upper layer.
    Alpha,
    /// Forecast noise variance per OD entry.
    Sigma2,
    /// Forecast noise given as a signal-to-noise ratio in dB.
    SnrDb,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Sigma2 => "sigma2",
            SweepParam::SnrDb => "snr_db",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        [SweepParam::Alpha, SweepParam::Sigma2, SweepParam::SnrDb]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| config_error(format!("unknown sweep parameter {s:?}; use alpha, sigma2 or snr_db")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: RunConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.values.is_empty() {
            return Err(config_error("sweep value list is empty"));
        }
        for &v in &self.values {
            let ok = match self.param {
                SweepParam::SnrDb => v.is_finite(),
                _ => v.is_finite() && v >= 0.0,
            };
            if !ok {
                return Err(config_error(format!("invalid {} value {v}", self.param)));
            }
        }
        if !self.base.policy.uses_upper() {
            return Err(config_error(format!(
                "sweeping {} needs an upper-layer policy, not {}",
                self.param, self.base.policy
            )));
        }
        Ok(())
    }

    fn noise(&self, value: f64) -> ForecastNoise {
        match self.param {
            SweepParam::Alpha => self.base.controller.forecast,
            SweepParam::Sigma2 => ForecastNoise::Variance(value),
            SweepParam::SnrDb => ForecastNoise::SnrDb(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub answer_rate: f64,
    pub avg_wait_s: f64,
    pub rebalance_km: f64,
    pub vur: f64,
    /// Input-weighted cost of the commanded transfers.
    pub rebalance_cost: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `(value, seed, error)` for every point that did not finish.
    pub failures: Vec<(f64, u64, String)>,
}

pub fn run_sweep(spec: &SweepSpec) -> anyhow::Result<SweepResult> {
    spec.validate()?;
    let base = Experiment::from_config(spec.base.clone())?;
    let experiments: Vec<Result<Experiment, String>> = spec
        .values
        .iter()
        .map(|&v| match spec.param {
            SweepParam::Alpha => base.with_alpha(v).map_err(|e| e.to_string()),
            _ => Ok(base.clone()),
        })
        .collect();
    let points: Vec<(usize, u64)> = (0..spec.values.len())
        .flat_map(|i| spec.base.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<Result<SweepRow, String>> = points
        .par_iter()
        .map(|&(i, seed)| {
            let value = spec.values[i];
            let exp = experiments[i].as_ref().map_err(Clone::clone)?;
            let o = exp
                .run_seed(spec.base.policy, seed, spec.noise(value))
                .map_err(|e| e.to_string())?;
            Ok(SweepRow {
                value,
                seed,
                answer_rate: o.report.answer_rate,
                avg_wait_s: o.report.avg_wait_s,
                rebalance_km: o.report.rebalance_km,
                vur: o.report.vur,
                rebalance_cost: o.planned_cost,
            })
        })
        .collect();
    let mut result = SweepResult::default();
    for (&(i, seed), o) in points.iter().zip(outcomes) {
        match o {
            Ok(row) => result.rows.push(row),
            Err(e) => result.failures.push((spec.values[i], seed, e)),
        }
    }
    Ok(result)
}

/// Linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

type Metric = (&'static str, fn(&SweepRow) -> f64);

const METRICS: [Metric; 5] = [
    ("answer_rate", |r| r.answer_rate),
    ("avg_wait_s", |r| r.avg_wait_s),
    ("rebalance_km", |r| r.rebalance_km),
    ("vur", |r| r.vur),
    ("rebalance_cost", |r| r.rebalance_cost),
];

fn fixed(v: f64) -> String {
    format!("{v:.9}")
}

/// Distinct values in the order they were requested.
fn distinct(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Per-run rows followed by one `mean` row per value.
pub fn write_sweep_csv(values: &[f64], rows: &[SweepRow], out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["param_value", "seed"];
    header.extend(METRICS.iter().map(|m| m.0));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.value.to_string(), r.seed.to_string()];
        rec.extend(METRICS.iter().map(|m| fixed(m.1(r))));
        w.write_record(&rec)?;
    }
    for v in distinct(values) {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.value == v).collect();
        if group.is_empty() {
            continue;
        }
        let mut rec = vec![v.to_string(), "mean".to_string()];
        rec.extend(METRICS.iter().map(|m| fixed(mean(group.iter().map(|r| m.1(r))))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bands_csv(values: &[f64], rows: &[SweepRow], out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param_value", "metric", "p25", "p50", "p75", "p90"])?;
    for v in distinct(values) {
        for (name, get) in METRICS {
            let mut xs: Vec<f64> = rows.iter().filter(|r| r.value == v).map(get).filter(|x| x.is_finite()).collect();
            if xs.is_empty() {
                continue;
            }
            xs.sort_by(f64::total_cmp);
            let mut rec = vec![v.to_string(), name.to_string()];
            rec.extend(PERCENTILES.iter().map(|&p| fixed(percentile(&xs, p))));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_outputs(spec: &SweepSpec, result: &SweepResult, out: &Path) -> anyhow::Result<()> {
    write_atomic(&out.join(SWEEP_FILE), |w| write_sweep_csv(&spec.values, &result.rows, w))?;
    write_atomic(&out.join(BANDS_FILE), |w| write_bands_csv(&spec.values, &result.rows, w))?;
    Ok(())
}
