//! Road network, all-pairs shortest paths, region partitioning and demand
//! densities.

mod density;
mod graph;
mod partition;
mod paths;

pub use density::{central_node, regional_marginals, DemandDensity, RegionSampler, DENSITY_FLOOR};
pub(crate) use density::check_distribution;
pub use graph::{Link, Node, RoadGraph};
pub use partition::{kmeans_partition, RegionPartition};
pub use paths::DistanceMatrix;

/// Default cap on node count for the dense distance matrices.
pub const DEFAULT_NODE_LIMIT: usize = 2000;

/// Generates a `rows × cols` lattice; see [`RoadGraph::grid`].
pub fn generate_grid_network(rows: usize, cols: usize, spacing_km: f64) -> crate::Result<RoadGraph> {
    RoadGraph::grid(rows, cols, spacing_km)
}

pub fn all_pairs_shortest_paths(graph: &RoadGraph) -> DistanceMatrix {
    DistanceMatrix::floyd_warshall(graph)
}

/// Nearest node of `region` from `from`, by shortest-path distance. Ties
/// go to the lower node id.
pub fn nearest_node_in_region(
    dist: &DistanceMatrix,
    partition: &RegionPartition,
    from: usize,
    region: usize,
) -> usize {
    *partition
        .members(region)
        .iter()
        .min_by(|&&a, &&b| dist.dist(from, a).total_cmp(&dist.dist(from, b)).then(a.cmp(&b)))
        .expect("regions are non-empty")
}

/// Average relocation trip length between regions: entry `(I, J)` is the
/// mean over nodes of `I` of the distance to the nearest node of `J`.
/// Diagonal entries are zero.
pub fn transfer_lengths(dist: &DistanceMatrix, partition: &RegionPartition) -> Vec<Vec<f64>> {
    let r = partition.region_count();
    let mut out = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in 0..r {
            if i == j {
                continue;
            }
            let members = partition.members(i);
            let total: f64 = members
                .iter()
                .map(|&v| dist.dist(v, nearest_node_in_region(dist, partition, v, j)))
                .sum();
            out[i][j] = total / members.len() as f64;
        }
    }
    out
}
