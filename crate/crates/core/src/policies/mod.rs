//! Rebalancing strategies driven through the simulator's policy interface,
//! plus the random excitation policy used to collect controller data.

mod assignment;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

pub use assignment::{assignment_cost, hungarian};

use crate::coverage::{coverage_step, CoverageConfig};
use crate::deepc::{
    noise_variance_for_snr, perturb_forecast, CollectedData, ControlCommand, DeepcController, DeepcModel, SignalSeries,
};
use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};
use crate::simulator::{
    City, LowerAction, Policy, Request, ScenarioConfig, Simulation, VehicleStatus, STREAM_COLLECTION,
    STREAM_FORECAST,
};

pub const DEFAULT_LP_PERIOD_S: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    NoControl,
    LowerOnly,
    UpperOnly,
    Hierarchical,
    LpRebalance,
    RandomCollect,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::NoControl,
        PolicyKind::LowerOnly,
        PolicyKind::UpperOnly,
        PolicyKind::Hierarchical,
        PolicyKind::LpRebalance,
        PolicyKind::RandomCollect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::NoControl => "no_control",
            PolicyKind::LowerOnly => "lower_only",
            PolicyKind::UpperOnly => "upper_only",
            PolicyKind::Hierarchical => "hierarchical",
            PolicyKind::LpRebalance => "lp_rebalance",
            PolicyKind::RandomCollect => "random_collect",
        }
    }

    pub fn uses_upper(self) -> bool {
        matches!(self, PolicyKind::UpperOnly | PolicyKind::Hierarchical)
    }

    pub fn uses_lower(self) -> bool {
        matches!(self, PolicyKind::LowerOnly | PolicyKind::Hierarchical | PolicyKind::RandomCollect)
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

/// How the controller's demand forecast is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastNoise {
    #[default]
    Exact,
    /// Per-entry Gaussian noise with this variance.
    Variance(f64),
    /// Noise variance chosen to give this signal-to-noise ratio over the
    /// run's true demand.
    SnrDb(f64),
}

/// Upper layer: the predictive controller fed with window measurements.
#[derive(Debug, Clone)]
pub struct DeepcUpper {
    controller: DeepcController,
    noise: ForecastNoise,
    sigma2: Option<f64>,
    rng: SimRng,
    commands: Vec<ControlCommand>,
}

impl DeepcUpper {
    pub fn new(model: Arc<DeepcModel>, history: &CollectedData, noise: ForecastNoise, seed: u64) -> Result<Self> {
        if let ForecastNoise::Variance(s) = noise {
            if !(s >= 0.0) {
                return Err(Error::Config(format!("forecast noise variance must be nonnegative, got {s}")));
            }
        }
        Ok(DeepcUpper {
            controller: DeepcController::new(model, history)?,
            noise,
            sigma2: None,
            rng: seeded(seed, STREAM_FORECAST),
            commands: Vec::new(),
        })
    }

    fn sigma2(&mut self, sim: &Simulation) -> Result<f64> {
        if let Some(s) = self.sigma2 {
            return Ok(s);
        }
        let s = match self.noise {
            ForecastNoise::Exact => 0.0,
            ForecastNoise::Variance(s) => s,
            ForecastNoise::SnrDb(db) => noise_variance_for_snr(&sim.future_od(0, sim.config().windows()), db)?,
        };
        self.sigma2 = Some(s);
        Ok(s)
    }

    fn step(&mut self, sim: &Simulation) -> Result<ControlCommand> {
        if !self.commands.is_empty() {
            let last = sim
                .windows()
                .last()
                .ok_or_else(|| Error::Invariant("no closed window to observe".into()))?;
            self.controller.observe(&last.disturbance(), &last.answered)?;
        }
        let sigma2 = self.sigma2(sim)?;
        let horizon = self.controller.model().params().horizon;
        let truth = sim.future_od(sim.window_index(), horizon);
        let forecast = perturb_forecast(&truth, sigma2, &mut self.rng);
        let command = self.controller.step(&forecast, &sim.empty_counts());
        self.commands.push(command.clone());
        Ok(command)
    }

    pub fn controller(&self) -> &DeepcController {
        &self.controller
    }

    /// Commands issued so far, one per window.
    pub fn commands(&self) -> &[ControlCommand] {
        &self.commands
    }

    /// Noise variance in use once the first window has been planned.
    pub fn noise_variance(&self) -> Option<f64> {
        self.sigma2
    }
}

/// Lower layer: coverage control inside every region.
#[derive(Debug, Clone)]
struct CoverageLayer {
    config: CoverageConfig,
    scopes: Vec<Vec<usize>>,
}

impl CoverageLayer {
    fn new(config: CoverageConfig, city: &City) -> Result<Self> {
        config.validate()?;
        let scopes = (0..city.regions()).map(|j| city.partition.members(j).to_vec()).collect();
        Ok(CoverageLayer { config, scopes })
    }

    fn targets(&self, sim: &Simulation) -> Vec<(usize, usize)> {
        let city = sim.city();
        let mut out = Vec::new();
        for (region, scope) in self.scopes.iter().enumerate() {
            let idle = sim.idle_in_region(region);
            out.extend(coverage_step(&idle, &city.dist, &city.density, &self.config, scope));
        }
        out
    }
}

/// Repositions idle vehicles toward unserved requests by minimum travel
/// time assignment.
#[derive(Debug, Clone)]
struct LpLayer {
    period_s: f64,
    next_s: f64,
    /// Requests that already have a vehicle on the way.
    targeted: BTreeSet<usize>,
}

impl LpLayer {
    fn dispatch(&mut self, sim: &Simulation) -> Vec<(usize, usize)> {
        if sim.now() + 1e-9 < self.next_s {
            return Vec::new();
        }
        self.next_s += self.period_s;
        let waiting: BTreeSet<usize> = sim.pending().map(|q| q.id).collect();
        self.targeted.retain(|id| waiting.contains(id));
        let requests: Vec<&Request> = sim.pending().filter(|q| !self.targeted.contains(&q.id)).collect();
        let idle: Vec<usize> = sim
            .vehicles()
            .iter()
            .filter(|v| v.status == VehicleStatus::Idle)
            .map(|v| v.id)
            .collect();
        if requests.is_empty() || idle.is_empty() {
            return Vec::new();
        }
        let cost: Vec<Vec<f64>> = idle
            .iter()
            .map(|&v| requests.iter().map(|q| sim.eta_s(v, q.origin)).collect())
            .collect();
        hungarian(&cost)
            .into_iter()
            .map(|(i, j)| {
                self.targeted.insert(requests[j].id);
                (idle[i], requests[j].origin)
            })
            .collect()
    }
}

/// Random transfer ratios for data collection, with a record of what was
/// commanded.
#[derive(Debug, Clone)]
struct Excitation {
    rng: SimRng,
    inputs: Vec<Vec<f64>>,
}

impl Excitation {
    fn command(&mut self, e: &[u32]) -> ControlCommand {
        let r = e.len();
        let mut u_float = vec![vec![0.0; r]; r];
        let mut u_int = vec![vec![0; r]; r];
        let mut theta = vec![vec![0.0; r]; r];
        for i in 0..r {
            // symmetric Dirichlet(1): normalised unit exponentials
            let draws: Vec<f64> = (0..r).map(|_| self.rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = draws.iter().sum();
            let mut moved = 0;
            for j in 0..r {
                theta[i][j] = draws[j] / total;
                u_float[i][j] = theta[i][j] * e[i] as f64;
                if j != i {
                    u_int[i][j] = u_float[i][j].floor() as u32;
                    moved += u_int[i][j];
                }
            }
            u_int[i][i] = e[i] - moved;
        }
        let command = ControlCommand { u_float, u_int, theta };
        self.inputs.push(command.applied_input());
        command
    }
}

/// One policy instance for one run. The parts present depend on the kind:
/// the predictive controller for the upper policies, coverage for the
/// policies with a lower layer.
#[derive(Debug, Clone)]
pub struct PolicyContext {
    kind: PolicyKind,
    upper: Option<DeepcUpper>,
    coverage: Option<CoverageLayer>,
    lp: Option<LpLayer>,
    excitation: Option<Excitation>,
}

impl PolicyContext {
    pub fn no_control() -> Self {
        PolicyContext {
            kind: PolicyKind::NoControl,
            upper: None,
            coverage: None,
            lp: None,
            excitation: None,
        }
    }

    pub fn lower_only(config: CoverageConfig, city: &City) -> Result<Self> {
        Ok(PolicyContext {
            kind: PolicyKind::LowerOnly,
            coverage: Some(CoverageLayer::new(config, city)?),
            ..Self::no_control()
        })
    }

    pub fn upper_only(upper: DeepcUpper) -> Self {
        PolicyContext {
            kind: PolicyKind::UpperOnly,
            upper: Some(upper),
            ..Self::no_control()
        }
    }

    pub fn hierarchical(upper: DeepcUpper, config: CoverageConfig, city: &City) -> Result<Self> {
        Ok(PolicyContext {
            kind: PolicyKind::Hierarchical,
            upper: Some(upper),
            coverage: Some(CoverageLayer::new(config, city)?),
            ..Self::no_control()
        })
    }

    pub fn lp_rebalance(period_s: f64) -> Result<Self> {
        if !(period_s > 0.0) {
            return Err(Error::Config(format!("assignment period must be positive, got {period_s}")));
        }
        Ok(PolicyContext {
            kind: PolicyKind::LpRebalance,
            lp: Some(LpLayer {
                period_s,
                next_s: 0.0,
                targeted: BTreeSet::new(),
            }),
            ..Self::no_control()
        })
    }

    pub fn random_collect(config: CoverageConfig, city: &City, seed: u64) -> Result<Self> {
        Ok(PolicyContext {
            kind: PolicyKind::RandomCollect,
            coverage: Some(CoverageLayer::new(config, city)?),
            excitation: Some(Excitation {
                rng: seeded(seed, STREAM_COLLECTION),
                inputs: Vec::new(),
            }),
            ..Self::no_control()
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    /// Switches the lower layer off; the rest of the policy is unchanged.
    pub fn without_lower(mut self) -> Self {
        self.coverage = None;
        self
    }

    pub fn upper(&self) -> Option<&DeepcUpper> {
        self.upper.as_ref()
    }

    /// Inputs commanded by the excitation policy, one per window.
    pub fn recorded_inputs(&self) -> &[Vec<f64>] {
        self.excitation.as_ref().map_or(&[], |e| e.inputs.as_slice())
    }

    /// Input-weighted cost of the transfers commanded by the upper layer.
    pub fn planned_rebalance_cost(&self) -> f64 {
        self.upper.as_ref().map_or(0.0, |u| u.controller.rebalance_cost())
    }
}

impl Policy for PolicyContext {
    fn name(&self) -> String {
        self.kind.name().to_string()
    }

    fn upper_step(&mut self, sim: &Simulation) -> Result<Option<ControlCommand>> {
        if let Some(upper) = self.upper.as_mut() {
            return upper.step(sim).map(Some);
        }
        if let Some(ex) = self.excitation.as_mut() {
            return Ok(Some(ex.command(&sim.empty_counts())));
        }
        Ok(None)
    }

    fn lower_step(&mut self, sim: &Simulation) -> LowerAction {
        let mut action = LowerAction::default();
        if let Some(cov) = &self.coverage {
            action.targets = cov.targets(sim);
        }
        if let Some(lp) = self.lp.as_mut() {
            action.dispatch = lp.dispatch(sim);
        }
        action
    }
}

/// Runs the excitation policy for `windows` upper-layer steps and returns
/// the commanded inputs with the measured demand and answered requests.
/// `requests` must cover `windows · T_u` seconds.
pub fn collect_data_run(
    city: Arc<City>,
    scenario: &ScenarioConfig,
    coverage: CoverageConfig,
    requests: Vec<Request>,
    windows: usize,
) -> Result<CollectedData> {
    if windows == 0 {
        return Err(Error::Config("collection needs at least one window".into()));
    }
    let mut config = scenario.clone();
    config.duration_s = windows as f64 * config.t_upper_s;
    let mut policy = PolicyContext::random_collect(coverage, &city, config.seed)?;
    let mut sim = Simulation::new(city, config, requests)?;
    sim.run(&mut policy)?;
    let inputs = policy.excitation.take().expect("collection policy").inputs;
    let measured = sim.windows();
    if inputs.len() != windows || measured.len() != windows {
        return Err(Error::Invariant(format!(
            "collected {} inputs and {} windows, expected {windows}",
            inputs.len(),
            measured.len()
        )));
    }
    let w: Vec<Vec<f64>> = measured.iter().map(|m| m.disturbance()).collect();
    let y: Vec<Vec<f64>> = measured.iter().map(|m| m.answered.clone()).collect();
    CollectedData::new(SignalSeries::new(&inputs)?, SignalSeries::new(&w)?, SignalSeries::new(&y)?)
}
