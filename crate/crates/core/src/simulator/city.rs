use crate::error::{Error, Result};
use crate::network::{
    all_pairs_shortest_paths, central_node, kmeans_partition, nearest_node_in_region, transfer_lengths, DemandDensity,
    DistanceMatrix, RegionPartition, RegionSampler, RoadGraph, DEFAULT_NODE_LIMIT,
};

/// Immutable road network with its derived tables. Shared read-only by
/// every run on the same map.
#[derive(Debug, Clone)]
pub struct City {
    pub graph: RoadGraph,
    pub dist: DistanceMatrix,
    pub partition: RegionPartition,
    pub density: DemandDensity,
    samplers: Vec<RegionSampler>,
    /// `nearest[J][v]`: nearest node of region `J` from node `v`.
    nearest: Vec<Vec<usize>>,
    transfer: Vec<Vec<f64>>,
}

impl City {
    pub fn new(graph: RoadGraph, partition: RegionPartition, density: DemandDensity) -> Result<Self> {
        let n = graph.node_count();
        if n > DEFAULT_NODE_LIMIT {
            return Err(Error::Config(format!(
                "graph has {n} nodes, above the dense-matrix limit of {DEFAULT_NODE_LIMIT}"
            )));
        }
        if partition.assignment().len() != n || density.weights().len() != n {
            return Err(Error::Dimension("partition or density does not match the graph".into()));
        }
        let dist = all_pairs_shortest_paths(&graph);
        let r = partition.region_count();
        let samplers = (0..r).map(|j| RegionSampler::new(&density, partition.members(j))).collect();
        let nearest = (0..r)
            .map(|j| (0..n).map(|v| nearest_node_in_region(&dist, &partition, v, j)).collect())
            .collect();
        let transfer = transfer_lengths(&dist, &partition);
        Ok(City {
            graph,
            dist,
            partition,
            density,
            samplers,
            nearest,
            transfer,
        })
    }

    /// K-means regions over `graph` with one demand hotspot at the central
    /// node of each region, weighted by `marginals`.
    pub fn with_hotspots(
        graph: RoadGraph,
        regions: usize,
        marginals: &[f64],
        sigma_km: f64,
        partition_seed: u64,
    ) -> Result<Self> {
        let partition = kmeans_partition(&graph, regions, partition_seed)?;
        let hubs: Vec<usize> = (0..regions).map(|j| central_node(&graph, &partition, j)).collect();
        let density = DemandDensity::hotspot_mixture(&graph, &partition, marginals, &hubs, sigma_km)?;
        City::new(graph, partition, density)
    }

    pub fn regions(&self) -> usize {
        self.partition.region_count()
    }

    pub fn region_of(&self, node: usize) -> usize {
        self.partition.region_of(node)
    }

    pub fn sampler(&self, region: usize) -> &RegionSampler {
        &self.samplers[region]
    }

    pub fn nearest_in_region(&self, from: usize, region: usize) -> usize {
        self.nearest[region][from]
    }

    /// Mean relocation trip length between regions, in km.
    pub fn transfer_lengths(&self) -> &[Vec<f64>] {
        &self.transfer
    }
}
