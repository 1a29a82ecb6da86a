use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::city::City;
use super::config::ScenarioConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Pending,
    Matched,
    Cancelled,
    Completed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: usize,
    pub t_issue: f64,
    pub origin: usize,
    pub destination: usize,
    pub status: RequestStatus,
    pub t_matched: Option<f64>,
    pub t_pickup: Option<f64>,
    pub t_dropoff: Option<f64>,
}

impl Request {
    pub fn new(id: usize, t_issue: f64, origin: usize, destination: usize) -> Self {
        Request {
            id,
            t_issue,
            origin,
            destination,
            status: RequestStatus::Pending,
            t_matched: None,
            t_pickup: None,
            t_dropoff: None,
        }
    }

    pub fn answered(&self) -> bool {
        matches!(self.status, RequestStatus::Matched | RequestStatus::Completed)
    }
}

/// Poisson arrivals over `[0, until_s)` at `config.request_rate`. Origin and
/// destination regions are drawn independently from the marginals, then a
/// node inside each from the node density. A destination node equal to the
/// origin is redrawn.
pub fn generate_requests(config: &ScenarioConfig, city: &City, until_s: f64, rng: &mut impl Rng) -> Result<Vec<Request>> {
    if config.regions() != city.regions() {
        return Err(Error::Config(format!(
            "scenario has {} regions, network partition has {}",
            config.regions(),
            city.regions()
        )));
    }
    if config.request_rate == 0.0 {
        return Ok(Vec::new());
    }
    if city.graph.node_count() < 2 {
        return Err(Error::Config("requests need at least two nodes".into()));
    }
    let gap = Exp::new(config.request_rate).map_err(|e| Error::Config(e.to_string()))?;
    let origin_region = WeightedIndex::new(&config.origin_marginals).map_err(|e| Error::Config(e.to_string()))?;
    let dest_region = WeightedIndex::new(&config.dest_marginals).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= until_s {
            return Ok(out);
        }
        let origin = city.sampler(origin_region.sample(rng)).sample(rng);
        let mut region = dest_region.sample(rng);
        let mut destination = city.sampler(region).sample(rng);
        let mut attempts = 0;
        while destination == origin {
            attempts += 1;
            // a one-node region can never yield a distinct node
            if attempts % 32 == 0 {
                region = dest_region.sample(rng);
            }
            destination = city.sampler(region).sample(rng);
        }
        out.push(Request::new(out.len(), t, origin, destination));
    }
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    id: usize,
    t_issue_s: f64,
    origin_node: usize,
    dest_node: usize,
}

pub fn write_trace(requests: &[Request], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in requests {
        w.serialize(TraceRow {
            id: r.id,
            t_issue_s: r.t_issue,
            origin_node: r.origin,
            dest_node: r.destination,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace, sorts it by issue time and checks node ids against
/// `nodes`. Ids are kept as given.
pub fn read_trace(input: impl Read, nodes: usize) -> Result<Vec<Request>> {
    let mut out = Vec::new();
    for (line, row) in csv::Reader::from_reader(input).deserialize::<TraceRow>().enumerate() {
        let row = row?;
        if row.origin_node >= nodes || row.dest_node >= nodes {
            return Err(Error::Config(format!(
                "trace row {} references a node outside 0..{nodes}",
                line + 1
            )));
        }
        if !(row.t_issue_s >= 0.0) {
            return Err(Error::Config(format!("trace row {} has a negative issue time", line + 1)));
        }
        out.push(Request::new(row.id, row.t_issue_s, row.origin_node, row.dest_node));
    }
    out.sort_by(|a, b| a.t_issue.total_cmp(&b.t_issue).then(a.id.cmp(&b.id)));
    Ok(out)
}
