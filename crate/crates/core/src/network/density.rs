use rand::Rng;

use super::{RegionPartition, RoadGraph};
use crate::error::{Error, Result};

/// Floor weight applied to every node before regional normalisation.
pub const DENSITY_FLOOR: f64 = 1e-6;

/// Node-level demand weights, normalised to sum to one over the graph.
#[derive(Debug, Clone)]
pub struct DemandDensity {
    phi: Vec<f64>,
}

impl DemandDensity {
    pub fn uniform(nodes: usize) -> Self {
        DemandDensity {
            phi: vec![1.0 / nodes as f64; nodes],
        }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("density weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("density weights sum to zero".into()));
        }
        Ok(DemandDensity {
            phi: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Per-region Gaussian kernel around one hotspot node per region,
    /// truncated at three standard deviations and floored, then scaled so
    /// region `I` carries mass `marginals[I]`.
    pub fn hotspot_mixture(
        graph: &RoadGraph,
        partition: &RegionPartition,
        marginals: &[f64],
        hotspots: &[usize],
        sigma_km: f64,
    ) -> Result<Self> {
        let regions = partition.region_count();
        if marginals.len() != regions || hotspots.len() != regions {
            return Err(Error::Config(format!(
                "need one marginal and one hotspot per region ({regions}), got {} and {}",
                marginals.len(),
                hotspots.len()
            )));
        }
        if !(sigma_km > 0.0) {
            return Err(Error::Config("hotspot kernel width must be positive".into()));
        }
        check_distribution(marginals, "regional marginals")?;
        let mut phi = vec![0.0; graph.node_count()];
        for region in 0..regions {
            let hub = graph.node(hotspots[region]);
            let members = partition.members(region);
            let mut shape: Vec<f64> = members
                .iter()
                .map(|&v| {
                    let p = graph.node(v);
                    let d = ((p.x - hub.x).powi(2) + (p.y - hub.y).powi(2)).sqrt();
                    let k = if d <= 3.0 * sigma_km {
                        (-0.5 * (d / sigma_km).powi(2)).exp()
                    } else {
                        0.0
                    };
                    k.max(DENSITY_FLOOR)
                })
                .collect();
            let total: f64 = shape.iter().sum();
            for w in &mut shape {
                *w *= marginals[region] / total;
            }
            for (&v, w) in members.iter().zip(shape) {
                phi[v] = w;
            }
        }
        let total: f64 = phi.iter().sum();
        phi.iter_mut().for_each(|w| *w /= total);
        Ok(DemandDensity { phi })
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.phi[node]
    }

    pub fn weights(&self) -> &[f64] {
        &self.phi
    }
}

pub(crate) fn check_distribution(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Config(format!("{what} must be nonnegative")));
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("{what} must sum to 1, got {total}")));
    }
    Ok(())
}

/// Probability mass of each region under `density`.
pub fn regional_marginals(density: &DemandDensity, partition: &RegionPartition) -> Vec<f64> {
    (0..partition.region_count())
        .map(|r| partition.members(r).iter().map(|&v| density.weight(v)).sum())
        .collect()
}

/// The node of `region` closest (Euclidean) to the region's seed point.
pub fn central_node(graph: &RoadGraph, partition: &RegionPartition, region: usize) -> usize {
    let (cx, cy) = partition.seeds()[region];
    *partition
        .members(region)
        .iter()
        .min_by(|&&a, &&b| {
            let pa = graph.node(a);
            let pb = graph.node(b);
            let da = (pa.x - cx).powi(2) + (pa.y - cy).powi(2);
            let db = (pb.x - cx).powi(2) + (pb.y - cy).powi(2);
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("regions are non-empty")
}

/// Inverse-CDF sampler over the nodes of one region, using the density
/// restricted to that region and renormalised (uniform when the region
/// carries no mass).
#[derive(Debug, Clone)]
pub struct RegionSampler {
    nodes: Vec<usize>,
    cumulative: Vec<f64>,
}

impl RegionSampler {
    pub fn new(density: &DemandDensity, members: &[usize]) -> Self {
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = members
            .iter()
            .map(|&v| {
                acc += density.weight(v);
                acc
            })
            .collect();
        if !(acc > 0.0) {
            cumulative = (1..=members.len()).map(|i| i as f64).collect();
        }
        RegionSampler {
            nodes: members.to_vec(),
            cumulative,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("region sampler over empty region");
        let target = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        self.nodes[idx.min(self.nodes.len() - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::kmeans_partition;
    use crate::rng::seeded;

    #[test]
    fn uniform_marginals_on_equal_regions() {
        let g = RoadGraph::grid(5, 2, 1.0).unwrap();
        // five horizontal strips of two nodes each
        let assignment = (0..10).map(|v| v / 2).collect();
        let p = RegionPartition::from_assignment(&g, assignment).unwrap();
        let m = regional_marginals(&DemandDensity::uniform(10), &p);
        for v in &m {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn point_mass_is_one_hot() {
        let g = RoadGraph::grid(4, 4, 1.0).unwrap();
        let p = kmeans_partition(&g, 4, 2).unwrap();
        let mut w = vec![0.0; 16];
        w[5] = 1.0;
        let m = regional_marginals(&DemandDensity::from_weights(w).unwrap(), &p);
        let hot = p.region_of(5);
        for (r, v) in m.iter().enumerate() {
            assert_eq!(*v, if r == hot { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn hotspot_mixture_hits_target_marginals() {
        let g = RoadGraph::grid(15, 15, 0.3).unwrap();
        let p = kmeans_partition(&g, 5, 7).unwrap();
        let target = [0.06, 0.35, 0.22, 0.29, 0.08];
        let hubs: Vec<usize> = (0..5).map(|r| central_node(&g, &p, r)).collect();
        let d = DemandDensity::hotspot_mixture(&g, &p, &target, &hubs, 0.5).unwrap();
        let m = regional_marginals(&d, &p);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in m.iter().zip(target) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(d.weights().iter().all(|&w| w > 0.0));
        // the hub is the heaviest node of its region
        for r in 0..5 {
            let heaviest = p.members(r).iter().copied().max_by(|&a, &b| d.weight(a).total_cmp(&d.weight(b))).unwrap();
            assert_eq!(heaviest, hubs[r]);
        }
    }

    #[test]
    fn sampler_stays_in_region() {
        let g = RoadGraph::grid(6, 6, 1.0).unwrap();
        let p = kmeans_partition(&g, 3, 4).unwrap();
        let d = DemandDensity::uniform(36);
        let mut rng = seeded(1, 0);
        for r in 0..3 {
            let s = RegionSampler::new(&d, p.members(r));
            for _ in 0..200 {
                assert_eq!(p.region_of(s.sample(&mut rng)), r);
            }
        }
    }
}
