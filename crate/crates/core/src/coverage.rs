//! Intra-regional positioning by coverage control on the road graph.
//!
//! Idle vehicles partition the scoped nodes into r-limited Voronoi cells by
//! shortest-path distance and each vehicle heads for the demand-weighted
//! centroid of its own cell.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{DemandDensity, DistanceMatrix};

pub const DEFAULT_RADIUS_KM: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    /// Service radius in kilometres.
    pub radius_km: f64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            radius_km: DEFAULT_RADIUS_KM,
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_km > 0.0) || !self.radius_km.is_finite() {
            return Err(Error::Config(format!(
                "coverage radius must be positive, got {}",
                self.radius_km
            )));
        }
        Ok(())
    }
}

/// A vehicle snapped to its nearest node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VehicleAt {
    pub id: usize,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoronoiCell {
    pub owner: usize,
    pub owner_node: usize,
    /// Member nodes in increasing id order.
    pub nodes: Vec<usize>,
}

/// r-limited graph Voronoi partition of `scope`. One cell per vehicle, in
/// the order of `vehicles`. A node goes to the vehicle with the smallest
/// distance to it (lowest vehicle id on ties) when that distance is at most
/// `r`; farther nodes belong to no cell. A vehicle sharing its node with a
/// lower-id vehicle can end up with an empty cell.
pub fn graph_voronoi(dist: &DistanceMatrix, vehicles: &[VehicleAt], r: f64, scope: &[usize]) -> Vec<VoronoiCell> {
    let mut cells: Vec<VoronoiCell> = vehicles
        .iter()
        .map(|v| VoronoiCell {
            owner: v.id,
            owner_node: v.node,
            nodes: Vec::new(),
        })
        .collect();
    let mut scope = scope.to_vec();
    scope.sort_unstable();
    scope.dedup();
    for &q in &scope {
        let best = vehicles
            .iter()
            .enumerate()
            .map(|(i, v)| (dist.dist(v.node, q), v.id, i))
            .filter(|&(d, _, _)| d <= r)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, _, i)) = best {
            cells[i].nodes.push(q);
        }
    }
    cells
}

fn weighted_cost(cell: &VoronoiCell, phi: &DemandDensity, dist: &DistanceMatrix, p: usize) -> f64 {
    cell.nodes.iter().map(|&q| phi.weight(q) * dist.dist(p, q)).sum()
}

/// The cell node minimising `Σ φ(q)·dist(p, q)` over the cell. The owner's
/// own node wins ties, so a vehicle only moves for a strict improvement;
/// other ties go to the lowest node id. `None` for an empty cell.
pub fn cell_centroid(cell: &VoronoiCell, phi: &DemandDensity, dist: &DistanceMatrix) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &p in &cell.nodes {
        let cost = weighted_cost(cell, phi, dist, p);
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, p));
        }
    }
    let (cost, node) = best?;
    if cell.nodes.binary_search(&cell.owner_node).is_ok() && weighted_cost(cell, phi, dist, cell.owner_node) <= cost {
        return Some(cell.owner_node);
    }
    Some(node)
}

/// Target node per idle vehicle, in the order given. Vehicles with an
/// empty cell keep their node.
pub fn coverage_step(
    idle: &[VehicleAt],
    dist: &DistanceMatrix,
    phi: &DemandDensity,
    config: &CoverageConfig,
    scope: &[usize],
) -> Vec<(usize, usize)> {
    if idle.is_empty() {
        return Vec::new();
    }
    graph_voronoi(dist, idle, config.radius_km, scope)
        .iter()
        .map(|cell| (cell.owner, cell_centroid(cell, phi, dist).unwrap_or(cell.owner_node)))
        .collect()
}

/// `Σ_q φ(q)·min(min_i dist(node_i, q), r)` over `scope`.
pub fn coverage_objective(vehicle_nodes: &[usize], phi: &DemandDensity, dist: &DistanceMatrix, r: f64, scope: &[usize]) -> f64 {
    scope
        .iter()
        .map(|&q| {
            let nearest = vehicle_nodes.iter().map(|&v| dist.dist(v, q)).fold(r, f64::min);
            phi.weight(q) * nearest
        })
        .sum()
}

/// Partition dump with one row per vehicle.
pub struct PartitionDump<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> PartitionDump<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["step", "vehicle_id", "node_id", "cell_size", "centroid_node", "objective"])?;
        Ok(PartitionDump { writer })
    }

    pub fn write_step(
        &mut self,
        step: usize,
        cells: &[VoronoiCell],
        phi: &DemandDensity,
        dist: &DistanceMatrix,
        r: f64,
        scope: &[usize],
    ) -> Result<()> {
        let nodes: Vec<usize> = cells.iter().map(|c| c.owner_node).collect();
        let objective = coverage_objective(&nodes, phi, dist, r, scope);
        for cell in cells {
            let centroid = cell_centroid(cell, phi, dist).unwrap_or(cell.owner_node);
            self.writer.write_record([
                step.to_string(),
                cell.owner.to_string(),
                cell.owner_node.to_string(),
                cell.nodes.len().to_string(),
                centroid.to_string(),
                format!("{objective:.9}"),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}
