//! Browser playground: graph Voronoi cells, Lloyd coverage steps and short
//! fleet simulations on a grid city.

use amod_core::coverage::{coverage_objective, coverage_step, graph_voronoi, CoverageConfig, VehicleAt};
use amod_core::experiment::{Experiment, NetworkConfig, NetworkSource, RunConfig};
use amod_core::policies::{ForecastNoise, PolicyKind};
use amod_core::simulator::ScenarioConfig;
use rand::Rng;
use wasm_bindgen::prelude::*;

const SPACING_KM: f64 = 0.4;

#[wasm_bindgen]
pub struct Playground {
    exp: Experiment,
    vehicles: Vec<usize>,
}

#[wasm_bindgen]
impl Playground {
    /// A square grid city with five demand regions.
    #[wasm_bindgen(constructor)]
    pub fn new(side: usize, fleet: usize, seed: u64) -> Result<Playground, String> {
        let cfg = RunConfig {
            network: NetworkConfig {
                source: NetworkSource::Grid {
                    rows: side,
                    cols: side,
                    spacing_km: SPACING_KM,
                },
                ..NetworkConfig::default()
            },
            scenario: ScenarioConfig {
                fleet_size: fleet,
                duration_s: 3600.0,
                ..ScenarioConfig::default()
            },
            seeds: vec![seed],
            ..RunConfig::default()
        };
        let exp = Experiment::new(cfg).map_err(|e| e.to_string())?;
        let mut p = Playground { exp, vehicles: Vec::new() };
        p.scatter(seed);
        Ok(p)
    }

    pub fn node_count(&self) -> usize {
        self.exp.city.graph.node_count()
    }

    /// Node coordinates in kilometres, `x0, y0, x1, y1, ...`.
    pub fn node_xy(&self) -> Vec<f64> {
        self.exp.city.graph.nodes().iter().flat_map(|n| [n.x, n.y]).collect()
    }

    pub fn node_regions(&self) -> Vec<u32> {
        self.exp.city.partition.assignment().iter().map(|&r| r as u32).collect()
    }

    pub fn density(&self) -> Vec<f64> {
        self.exp.city.density.weights().to_vec()
    }

    pub fn vehicles(&self) -> Vec<u32> {
        self.vehicles.iter().map(|&v| v as u32).collect()
    }

    pub fn radius(&self) -> f64 {
        self.exp.config.coverage.radius_km
    }

    pub fn set_radius(&mut self, radius_km: f64) -> Result<(), String> {
        let cfg = CoverageConfig { radius_km };
        cfg.validate().map_err(|e| e.to_string())?;
        self.exp.config.coverage = cfg;
        Ok(())
    }

    /// Puts every vehicle on a uniformly drawn node.
    pub fn scatter(&mut self, seed: u64) {
        let mut rng = amod_core::rng::seeded(seed, 7);
        let n = self.node_count();
        self.vehicles = (0..self.exp.config.scenario.fleet_size).map(|_| rng.random_range(0..n)).collect();
    }

    /// Owning vehicle per node, or -1 outside every cell. Cells never
    /// cross region borders.
    pub fn cells(&self) -> Vec<i32> {
        let city = &self.exp.city;
        let mut owner = vec![-1; self.node_count()];
        for region in 0..city.partition.region_count() {
            let scope = city.partition.members(region);
            for cell in graph_voronoi(&city.dist, &self.in_region(region), self.radius(), scope) {
                for q in cell.nodes {
                    owner[q] = cell.owner as i32;
                }
            }
        }
        owner
    }

    /// Moves every vehicle to the centroid of its cell and returns the new
    /// coverage cost.
    pub fn lloyd_step(&mut self) -> f64 {
        let city = self.exp.city.clone();
        for region in 0..city.partition.region_count() {
            let idle = self.in_region(region);
            let scope = city.partition.members(region);
            for (id, node) in coverage_step(&idle, &city.dist, &city.density, &self.exp.config.coverage, scope) {
                self.vehicles[id] = node;
            }
        }
        self.objective()
    }

    /// Summed per-region coverage cost of the current positions.
    pub fn objective(&self) -> f64 {
        let city = &self.exp.city;
        (0..city.partition.region_count())
            .map(|region| {
                let nodes: Vec<usize> = self.in_region(region).iter().map(|v| v.node).collect();
                coverage_objective(&nodes, &city.density, &city.dist, self.radius(), city.partition.members(region))
            })
            .sum()
    }

    /// One simulated hour with `policy` (`no_control`, `lower_only` or
    /// `lp_rebalance`); returns the headline metrics as JSON.
    pub fn simulate(&self, policy: &str, seed: u64, request_rate: f64) -> Result<String, String> {
        let kind: PolicyKind = policy.parse().map_err(|e: amod_core::Error| e.to_string())?;
        if kind.uses_upper() || kind == PolicyKind::RandomCollect {
            return Err(format!("{policy} is not available in the playground"));
        }
        let mut exp = self.exp.clone();
        exp.config.scenario.request_rate = request_rate;
        exp.config.scenario.validate().map_err(|e| e.to_string())?;
        let out = exp.run_seed(kind, seed, ForecastNoise::Exact).map_err(|e| e.to_string())?;
        let r = &out.report;
        Ok(serde_json::json!({
            "policy": r.policy,
            "issued": r.issued,
            "answered": r.answered,
            "answer_rate": r.answer_rate,
            "avg_wait_s": if r.avg_wait_s.is_finite() { Some(r.avg_wait_s) } else { None },
            "rebalance_km": r.rebalance_km,
            "vur": r.vur,
            "region_answer_rate": r.region_answer_rate,
        })
        .to_string())
    }
}

impl Playground {
    fn in_region(&self, region: usize) -> Vec<VehicleAt> {
        self.vehicles
            .iter()
            .enumerate()
            .filter(|&(_, &node)| self.exp.city.partition.region_of(node) == region)
            .map(|(id, &node)| VehicleAt { id, node })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lloyd_steps_never_raise_the_cost() {
        let mut p = Playground::new(10, 12, 3).unwrap();
        let mut last = p.objective();
        for _ in 0..10 {
            let next = p.lloyd_step();
            assert!(next <= last + 1e-9);
            last = next;
        }
    }

    #[test]
    fn cells_stay_inside_regions() {
        let p = Playground::new(10, 12, 1).unwrap();
        let regions = p.node_regions();
        let vehicles = p.vehicles();
        for (q, &owner) in p.cells().iter().enumerate() {
            if owner >= 0 {
                assert_eq!(regions[q], regions[vehicles[owner as usize] as usize]);
            }
        }
    }

    #[test]
    fn simulation_returns_metrics() {
        let p = Playground::new(8, 10, 0).unwrap();
        let json: serde_json::Value = serde_json::from_str(&p.simulate("no_control", 0, 0.05).unwrap()).unwrap();
        assert_eq!(json["policy"], "no_control");
        assert_eq!(json["rebalance_km"], 0.0);
        assert!(p.simulate("hierarchical", 0, 0.05).is_err());
        assert!(p.simulate("nope", 0, 0.05).is_err());
    }

    #[test]
    fn bad_radius_is_rejected() {
        let mut p = Playground::new(6, 4, 0).unwrap();
        assert!(p.set_radius(-1.0).is_err());
        assert!(p.set_radius(0.8).is_ok());
    }
}
