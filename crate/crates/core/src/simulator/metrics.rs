use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::city::City;
use super::config::ScenarioConfig;
use super::request::{Request, RequestStatus};
use super::vehicle::Vehicle;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptySample {
    pub t_s: f64,
    pub region: usize,
    #[serde(rename = "empty_vehicles")]
    pub empty: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub policy: String,
    pub seed: u64,
    pub fleet_size: usize,
    pub issued: usize,
    pub answered: usize,
    pub cancelled: usize,
    pub pending: usize,
    pub answer_rate: f64,
    /// Mean issue-to-pickup time over picked-up requests; NaN when none.
    pub avg_wait_s: f64,
    pub rebalance_km: f64,
    pub vur: f64,
    pub region_issued: Vec<usize>,
    pub region_answer_rate: Vec<f64>,
    pub shortfall: usize,
}

impl MetricsReport {
    pub fn compute(
        policy: &str,
        config: &ScenarioConfig,
        city: &City,
        issued: &[Request],
        vehicles: &[Vehicle],
        shortfall: usize,
    ) -> Result<Self> {
        if issued.is_empty() {
            return Err(Error::Undefined("answer rate with no issued requests".into()));
        }
        let r = city.regions();
        let mut region_issued = vec![0usize; r];
        let mut region_answered = vec![0usize; r];
        let (mut answered, mut cancelled, mut pending) = (0, 0, 0);
        let (mut wait, mut picked) = (0.0, 0usize);
        for q in issued {
            let region = city.region_of(q.origin);
            region_issued[region] += 1;
            match q.status {
                RequestStatus::Matched | RequestStatus::Completed => {
                    answered += 1;
                    region_answered[region] += 1;
                }
                RequestStatus::Cancelled => cancelled += 1,
                RequestStatus::Pending => pending += 1,
            }
            if let Some(t) = q.t_pickup {
                wait += t - q.t_issue;
                picked += 1;
            }
        }
        let busy: f64 = vehicles.iter().map(|v| v.busy_time_s).sum();
        Ok(MetricsReport {
            policy: policy.to_string(),
            seed: config.seed,
            fleet_size: config.fleet_size,
            issued: issued.len(),
            answered,
            cancelled,
            pending,
            answer_rate: answered as f64 / issued.len() as f64,
            avg_wait_s: if picked > 0 { wait / picked as f64 } else { f64::NAN },
            rebalance_km: vehicles.iter().map(|v| v.odometer_rebalance_km).sum(),
            vur: busy / (config.fleet_size as f64 * config.duration_s),
            region_answer_rate: region_answered
                .iter()
                .zip(&region_issued)
                .map(|(&a, &n)| if n > 0 { a as f64 / n as f64 } else { f64::NAN })
                .collect(),
            region_issued,
            shortfall,
        })
    }

    pub fn row(&self) -> MetricsRow {
        MetricsRow {
            policy: self.policy.clone(),
            seed: self.seed,
            answer_rate: self.answer_rate,
            avg_wait_s: self.avg_wait_s,
            rebalance_km: self.rebalance_km,
            vur: self.vur,
        }
    }
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: String,
    pub seed: u64,
    pub answer_rate: f64,
    pub avg_wait_s: f64,
    pub rebalance_km: f64,
    pub vur: f64,
}

// Fixed precision so repeated runs produce identical bytes.
fn fixed(v: f64) -> String {
    format!("{v:.9}")
}

pub fn write_metrics_csv(rows: &[MetricsRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "seed", "answer_rate", "avg_wait_s", "rebalance_km", "vur"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.seed.to_string(),
            fixed(r.answer_rate),
            fixed(r.avg_wait_s),
            fixed(r.rebalance_km),
            fixed(r.vur),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(input: impl Read) -> Result<Vec<MetricsRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn write_series_csv(series: &[EmptySample], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "region", "empty_vehicles"])?;
    for s in series {
        w.write_record([format!("{:.1}", s.t_s), s.region.to_string(), s.empty.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
