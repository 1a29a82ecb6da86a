use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RoadGraph;
use crate::error::{Error, Result};
use crate::rng::seeded;

const MAX_ITERATIONS: usize = 100;

/// Assignment of every node to one of `R` non-empty regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    assignment: Vec<usize>,
    seeds: Vec<(f64, f64)>,
    members: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRecord {
    node_id: usize,
    region_id: usize,
}

impl RegionPartition {
    pub fn from_assignment(graph: &RoadGraph, assignment: Vec<usize>) -> Result<Self> {
        if assignment.len() != graph.node_count() {
            return Err(Error::Config(format!(
                "partition covers {} nodes, graph has {}",
                assignment.len(),
                graph.node_count()
            )));
        }
        let regions = assignment.iter().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); regions];
        for (node, &r) in assignment.iter().enumerate() {
            members[r].push(node);
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::Config(format!("region {empty} has no nodes")));
        }
        let seeds = members
            .iter()
            .map(|m| centroid(graph, m.iter().copied()))
            .collect();
        Ok(RegionPartition {
            assignment,
            seeds,
            members,
        })
    }

    pub fn region_count(&self) -> usize {
        self.members.len()
    }

    pub fn region_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self, region: usize) -> &[usize] {
        &self.members[region]
    }

    pub fn seeds(&self) -> &[(f64, f64)] {
        &self.seeds
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (node_id, &region_id) in self.assignment.iter().enumerate() {
            w.serialize(PartitionRecord { node_id, region_id })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(graph: &RoadGraph, input: impl Read) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let mut assignment = vec![usize::MAX; graph.node_count()];
        for rec in reader.deserialize() {
            let rec: PartitionRecord = rec?;
            if rec.node_id >= assignment.len() {
                return Err(Error::Config(format!("partition names unknown node {}", rec.node_id)));
            }
            assignment[rec.node_id] = rec.region_id;
        }
        if assignment.contains(&usize::MAX) {
            return Err(Error::Config("partition does not cover every node".into()));
        }
        RegionPartition::from_assignment(graph, assignment)
    }
}

fn centroid(graph: &RoadGraph, nodes: impl Iterator<Item = usize>) -> (f64, f64) {
    let (mut sx, mut sy, mut count) = (0.0, 0.0, 0usize);
    for v in nodes {
        let n = graph.node(v);
        sx += n.x;
        sy += n.y;
        count += 1;
    }
    (sx / count as f64, sy / count as f64)
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Lloyd's K-means on node coordinates with k-means++ seeding.
///
/// Regions are relabelled in lexicographic order of their final centroid
/// (x, then y) so labels do not depend on the random initialisation order.
pub fn kmeans_partition(graph: &RoadGraph, regions: usize, seed: u64) -> Result<RegionPartition> {
    let n = graph.node_count();
    if regions == 0 || regions > n {
        return Err(Error::Config(format!(
            "cannot split {n} nodes into {regions} regions"
        )));
    }
    let points: Vec<(f64, f64)> = graph.nodes().iter().map(|p| (p.x, p.y)).collect();
    let mut rng = seeded(seed, 0);

    let mut centers = Vec::with_capacity(regions);
    centers.push(points[rng.random_range(0..n)]);
    let mut nearest: Vec<f64> = points.iter().map(|&p| sq_dist(p, centers[0])).collect();
    while centers.len() < regions {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick]);
        for (d, &p) in nearest.iter_mut().zip(&points) {
            *d = d.min(sq_dist(p, points[pick]));
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, &p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, &center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }

        // Re-seed empty clusters with the node farthest from its own centre.
        let mut counts = vec![0usize; regions];
        for &a in &assignment {
            counts[a] += 1;
        }
        for c in 0..regions {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&a, &b| {
                    let da = sq_dist(points[a], centers[assignment[a]]);
                    let db = sq_dist(points[b], centers[assignment[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("regions <= nodes guarantees a donor cluster");
            counts[assignment[far]] -= 1;
            assignment[far] = c;
            counts[c] = 1;
            centers[c] = points[far];
            changed = true;
        }

        let mut sums = vec![(0.0, 0.0); regions];
        for (i, &a) in assignment.iter().enumerate() {
            sums[a].0 += points[i].0;
            sums[a].1 += points[i].1;
        }
        for c in 0..regions {
            centers[c] = (sums[c].0 / counts[c] as f64, sums[c].1 / counts[c] as f64);
        }
        if !changed {
            break;
        }
    }

    let mut order: Vec<usize> = (0..regions).collect();
    order.sort_by(|&a, &b| {
        centers[a]
            .0
            .total_cmp(&centers[b].0)
            .then(centers[a].1.total_cmp(&centers[b].1))
    });
    let mut relabel = vec![0; regions];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let assignment = assignment.into_iter().map(|a| relabel[a]).collect();
    RegionPartition::from_assignment(graph, assignment)
}
