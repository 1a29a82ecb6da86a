use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::check_distribution;

/// Scenario parameters. Durations are in seconds, speed in km/h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub fleet_size: usize,
    pub duration_s: f64,
    /// Poisson request rate over the whole city, per second.
    pub request_rate: f64,
    pub origin_marginals: Vec<f64>,
    pub dest_marginals: Vec<f64>,
    pub speed_kmh: f64,
    /// Lower-layer period.
    pub t_lower_s: f64,
    /// Upper-layer period.
    pub t_upper_s: f64,
    /// Time a request stays in the matching pool.
    pub t_match_s: f64,
    /// Longest admissible wait from issue to pickup.
    pub t_wait_s: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            fleet_size: 60,
            duration_s: 3.0 * 3600.0,
            request_rate: 0.12,
            origin_marginals: vec![0.06, 0.35, 0.22, 0.29, 0.08],
            dest_marginals: vec![0.16, 0.28, 0.17, 0.27, 0.12],
            speed_kmh: 30.0,
            t_lower_s: 30.0,
            t_upper_s: 600.0,
            t_match_s: 60.0,
            t_wait_s: 240.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn regions(&self) -> usize {
        self.origin_marginals.len()
    }

    /// Number of lower-layer ticks in the run.
    pub fn ticks(&self) -> usize {
        (self.duration_s / self.t_lower_s).round() as usize
    }

    /// Lower-layer ticks per upper-layer step.
    pub fn ticks_per_window(&self) -> usize {
        (self.t_upper_s / self.t_lower_s).round() as usize
    }

    pub fn windows(&self) -> usize {
        (self.duration_s / self.t_upper_s).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        check_distribution(&self.origin_marginals, "origin marginals")?;
        check_distribution(&self.dest_marginals, "destination marginals")?;
        if self.origin_marginals.len() != self.dest_marginals.len() {
            return Err(Error::Config("origin and destination marginals differ in length".into()));
        }
        for (name, v) in [
            ("duration_s", self.duration_s),
            ("speed_kmh", self.speed_kmh),
            ("t_lower_s", self.t_lower_s),
            ("t_upper_s", self.t_upper_s),
            ("t_match_s", self.t_match_s),
            ("t_wait_s", self.t_wait_s),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.request_rate >= 0.0) || !self.request_rate.is_finite() {
            return Err(Error::Config(format!("request_rate must be nonnegative, got {}", self.request_rate)));
        }
        let ratio = self.t_upper_s / self.t_lower_s;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::Config("t_upper_s must be a multiple of t_lower_s".into()));
        }
        let ticks = self.duration_s / self.t_lower_s;
        if (ticks - ticks.round()).abs() > 1e-9 {
            return Err(Error::Config("duration_s must be a multiple of t_lower_s".into()));
        }
        if self.fleet_size == 0 {
            return Err(Error::Config("fleet_size must be positive".into()));
        }
        Ok(())
    }
}
