//! End-to-end experiment setup shared by the command line and the tests:
//! one configuration describes the network, the demand, both control
//! layers and the scenario.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coverage::CoverageConfig;
use crate::deepc::{
    flatten_transfer_weights, CollectedData, DeepcModel, DeepcParams, DEFAULT_ALPHA, DEFAULT_LAMBDA_G,
    DEFAULT_LAMBDA_Y,
};
use crate::error::{Error, Result};
use crate::network::RoadGraph;
use crate::policies::{collect_data_run, DeepcUpper, ForecastNoise, PolicyContext, PolicyKind, DEFAULT_LP_PERIOD_S};
use crate::qp::QpSettings;
use crate::rng::seeded;
use crate::simulator::{generate_requests, City, EmptySample, MetricsReport, ScenarioConfig, Simulation, STREAM_REQUESTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    Grid { rows: usize, cols: usize, spacing_km: f64 },
    Files { nodes: PathBuf, links: PathBuf },
}

impl Default for NetworkSource {
    fn default() -> Self {
        NetworkSource::Grid {
            rows: 15,
            cols: 15,
            spacing_km: 0.4,
        }
    }
}

impl NetworkSource {
    pub fn load(&self) -> Result<RoadGraph> {
        match self {
            NetworkSource::Grid { rows, cols, spacing_km } => RoadGraph::grid(*rows, *cols, *spacing_km),
            NetworkSource::Files { nodes, links } => RoadGraph::load(nodes, links),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub source: NetworkSource,
    pub regions: usize,
    pub partition_seed: u64,
    /// Width of the demand kernel around each region's hotspot.
    pub hotspot_sigma_km: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            source: NetworkSource::default(),
            regions: 5,
            partition_seed: 0,
            hotspot_sigma_km: 0.6,
        }
    }
}

/// Controller hyperparameters and the data it is built from. The output
/// weight is the origin marginal vector and the input weight the mean
/// transfer lengths of the network, so neither appears here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub t_ini: usize,
    pub horizon: usize,
    pub lambda_g: f64,
    pub lambda_y: f64,
    pub alpha: f64,
    pub budget_steps: usize,
    /// State dimension assumed by the excitation check; defaults to 2R.
    pub n_assumed: Option<usize>,
    /// Collection length in upper-layer windows.
    pub collection_windows: usize,
    pub collection_seed: u64,
    /// Collected-data CSV written by `collect` and read by the upper
    /// policies.
    pub data: Option<PathBuf>,
    pub forecast: ForecastNoise,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            t_ini: 3,
            horizon: 3,
            lambda_g: DEFAULT_LAMBDA_G,
            lambda_y: DEFAULT_LAMBDA_Y,
            alpha: DEFAULT_ALPHA,
            budget_steps: 1,
            n_assumed: None,
            collection_windows: 3000,
            collection_seed: 1000,
            data: None,
            forecast: ForecastNoise::Exact,
            tol: QpSettings::default().tol,
            max_iter: QpSettings::default().max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub coverage: CoverageConfig,
    pub controller: ControllerConfig,
    pub scenario: ScenarioConfig,
    pub policy: PolicyKind,
    pub lp_period_s: f64,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            network: NetworkConfig::default(),
            coverage: CoverageConfig::default(),
            controller: ControllerConfig::default(),
            scenario: ScenarioConfig::default(),
            policy: PolicyKind::Hierarchical,
            lp_period_s: DEFAULT_LP_PERIOD_S,
            seeds: (0..10).collect(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.network.regions != self.scenario.regions() {
            return Err(Error::Config(format!(
                "network has {} regions but the demand marginals have {}",
                self.network.regions,
                self.scenario.regions()
            )));
        }
        if let NetworkSource::Files { nodes, links } = &self.network.source {
            for p in [nodes, links] {
                if !p.exists() {
                    return Err(Error::Config(format!("network file {} does not exist", p.display())));
                }
            }
        }
        if let Some(p) = &self.controller.data {
            if self.policy.uses_upper() && !p.exists() {
                return Err(Error::Config(format!(
                    "collected data {} does not exist; run the `collect` subcommand first",
                    p.display()
                )));
            }
        }
        if !(self.lp_period_s > 0.0) {
            return Err(Error::Config("lp_period_s must be positive".into()));
        }
        self.scenario.validate()?;
        self.coverage.validate()?;
        Ok(())
    }

    pub fn n_assumed(&self) -> usize {
        self.controller.n_assumed.unwrap_or(2 * self.network.regions)
    }

    pub fn qp_settings(&self) -> QpSettings {
        QpSettings {
            tol: self.controller.tol,
            max_iter: self.controller.max_iter,
        }
    }
}

/// Outputs of one seeded run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: MetricsReport,
    pub series: Vec<EmptySample>,
    /// Input-weighted cost of the commanded transfers; zero without an
    /// upper layer.
    pub planned_cost: f64,
    /// Upper-layer steps that fell back to keeping vehicles in place.
    pub fallbacks: usize,
}

/// A configured city with its controller, ready to run seeds.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub city: Arc<City>,
    upper: Option<(Arc<DeepcModel>, Arc<CollectedData>)>,
}

impl Experiment {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let graph = config.network.source.load()?;
        let city = City::with_hotspots(
            graph,
            config.network.regions,
            &config.scenario.origin_marginals,
            config.network.hotspot_sigma_km,
            config.network.partition_seed,
        )?;
        Ok(Experiment {
            config,
            city: Arc::new(city),
            upper: None,
        })
    }

    /// Like [`Experiment::new`], also loading `controller.data` when set.
    pub fn from_config(config: RunConfig) -> Result<Self> {
        let data = config.controller.data.clone();
        let exp = Experiment::new(config)?;
        match data {
            Some(path) => exp.with_data(load_collected(&path)?),
            None => Ok(exp),
        }
    }

    /// Request trace for `seed`, running one horizon past the end of the
    /// scenario so the last forecasts have something to look at.
    pub fn requests(&self, scenario: &ScenarioConfig) -> Result<Vec<crate::simulator::Request>> {
        let mut rng = seeded(scenario.seed, STREAM_REQUESTS);
        let until = scenario.duration_s + self.config.controller.horizon as f64 * scenario.t_upper_s;
        generate_requests(scenario, &self.city, until, &mut rng)
    }

    /// Runs the excitation policy for the configured number of windows.
    pub fn collect(&self) -> Result<CollectedData> {
        let mut scenario = self.config.scenario.clone();
        scenario.seed = self.config.controller.collection_seed;
        scenario.duration_s = self.config.controller.collection_windows as f64 * scenario.t_upper_s;
        let requests = self.requests(&scenario)?;
        collect_data_run(
            self.city.clone(),
            &scenario,
            self.config.coverage,
            requests,
            self.config.controller.collection_windows,
        )
    }

    pub fn deepc_params(&self) -> DeepcParams {
        let c = &self.config.controller;
        DeepcParams {
            t_ini: c.t_ini,
            horizon: c.horizon,
            lambda_g: c.lambda_g,
            lambda_y: c.lambda_y,
            alpha: c.alpha,
            q_weight: self.config.scenario.origin_marginals.clone(),
            r_weight: flatten_transfer_weights(self.city.transfer_lengths()),
            budget_steps: c.budget_steps,
        }
    }

    /// Builds the controller from `data`.
    pub fn with_data(mut self, data: CollectedData) -> Result<Self> {
        let r = self.config.network.regions;
        if data.u.dim() != r * r || data.w.dim() != 2 * r || data.y.dim() != r {
            return Err(Error::Dimension(format!(
                "collected data does not describe a {r}-region city"
            )));
        }
        let c = &self.config.controller;
        let hankels = data.hankels(c.t_ini, c.horizon, Some(self.n_assumed()))?;
        let model = DeepcModel::new(hankels, self.deepc_params(), self.config.qp_settings())?;
        self.upper = Some((Arc::new(model), Arc::new(data)));
        Ok(self)
    }

    fn n_assumed(&self) -> usize {
        self.config.n_assumed()
    }

    /// The same experiment with a different trade-off weight; the data and
    /// Hankel matrices are reused.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut next = self.clone();
        next.config.controller.alpha = alpha;
        if let Some((model, data)) = &self.upper {
            let mut params = model.params().clone();
            params.alpha = alpha;
            let rebuilt = DeepcModel::new(model.hankels().clone(), params, self.config.qp_settings())?;
            next.upper = Some((Arc::new(rebuilt), data.clone()));
        }
        Ok(next)
    }

    pub fn model(&self) -> Option<&Arc<DeepcModel>> {
        self.upper.as_ref().map(|(m, _)| m)
    }

    pub fn policy(&self, kind: PolicyKind, seed: u64, noise: ForecastNoise) -> Result<PolicyContext> {
        let upper = || -> Result<DeepcUpper> {
            let (model, data) = self.upper.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "policy {kind} needs collected data: run the `collect` subcommand and set controller.data"
                ))
            })?;
            DeepcUpper::new(model.clone(), data, noise, seed)
        };
        let cov = self.config.coverage;
        match kind {
            PolicyKind::NoControl => Ok(PolicyContext::no_control()),
            PolicyKind::LowerOnly => PolicyContext::lower_only(cov, &self.city),
            PolicyKind::UpperOnly => Ok(PolicyContext::upper_only(upper()?)),
            PolicyKind::Hierarchical => PolicyContext::hierarchical(upper()?, cov, &self.city),
            PolicyKind::LpRebalance => PolicyContext::lp_rebalance(self.config.lp_period_s),
            PolicyKind::RandomCollect => PolicyContext::random_collect(cov, &self.city, seed),
        }
    }

    /// One seeded run of `kind` with the given forecast noise.
    pub fn run_seed(&self, kind: PolicyKind, seed: u64, noise: ForecastNoise) -> Result<RunOutcome> {
        let mut scenario = self.config.scenario.clone();
        scenario.seed = seed;
        let requests = self.requests(&scenario)?;
        let mut policy = self.policy(kind, seed, noise)?;
        let mut sim = Simulation::new(self.city.clone(), scenario, requests)?;
        let report = sim.run(&mut policy)?;
        let fallbacks = policy
            .upper()
            .map_or(0, |u| u.controller().diagnostics().iter().filter(|d| d.fallback).count());
        Ok(RunOutcome {
            report,
            series: sim.empty_series().to_vec(),
            planned_cost: policy.planned_rebalance_cost(),
            fallbacks,
        })
    }
}

/// Loads the collected data named in the configuration, if any.
pub fn load_collected(path: &Path) -> Result<CollectedData> {
    let file = std::fs::File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    CollectedData::read_csv(std::io::BufReader::new(file))
}
