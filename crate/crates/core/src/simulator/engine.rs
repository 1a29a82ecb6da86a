use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::city::City;
use super::config::ScenarioConfig;
use super::metrics::{EmptySample, MetricsReport};
use super::request::{Request, RequestStatus};
use super::vehicle::{Vehicle, VehicleStatus};
use crate::coverage::VehicleAt;
use crate::deepc::ControlCommand;
use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};

/// Stream ids derived from the scenario seed.
pub const STREAM_REQUESTS: u64 = 0;
pub const STREAM_DISPATCH: u64 = 1;
pub const STREAM_PLACEMENT: u64 = 2;
pub const STREAM_FORECAST: u64 = 3;
pub const STREAM_COLLECTION: u64 = 4;

/// Regional counts over one upper-layer window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMeasurement {
    pub index: usize,
    /// Empty vehicles per region at the start of the window.
    pub empty: Vec<u32>,
    /// Requests issued during the window, by origin region.
    pub origin: Vec<f64>,
    /// Requests issued during the window, by destination region.
    pub dest: Vec<f64>,
    /// Requests matched during the window, by origin region.
    pub answered: Vec<f64>,
}

impl WindowMeasurement {
    /// Disturbance sample: origin counts followed by destination counts.
    pub fn disturbance(&self) -> Vec<f64> {
        [self.origin.as_slice(), self.dest.as_slice()].concat()
    }
}

/// What a policy asks of the lower layer on one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LowerAction {
    /// `(vehicle id, node)`: idle vehicles drive there and stay idle.
    pub targets: Vec<(usize, usize)>,
    /// `(vehicle id, node)`: idle vehicles relocate there.
    pub dispatch: Vec<(usize, usize)>,
}

/// A rebalancing strategy. Policies read the simulation and return
/// actions; only the simulation mutates its state.
pub trait Policy {
    fn name(&self) -> String;

    /// Called at every upper-layer boundary, after arrivals and before
    /// matching. `None` keeps every empty vehicle where it is.
    fn upper_step(&mut self, _sim: &Simulation) -> Result<Option<ControlCommand>> {
        Ok(None)
    }

    /// Called every lower-layer tick, after matching.
    fn lower_step(&mut self, _sim: &Simulation) -> LowerAction {
        LowerAction::default()
    }
}

/// Single-threaded fleet simulation at a fixed lower-layer tick. Within a
/// tick: movement and arrivals, request release, the upper command on
/// window boundaries, matching, then lower-layer targets.
#[derive(Debug, Clone)]
pub struct Simulation {
    city: Arc<City>,
    config: ScenarioConfig,
    now: f64,
    vehicles: Vec<Vehicle>,
    requests: Vec<Request>,
    released: usize,
    pool: Vec<usize>,
    theta: Option<Vec<Vec<f64>>>,
    rng: SimRng,
    /// Request counts by issue window, over the whole trace.
    od: Vec<Vec<Vec<f64>>>,
    windows: Vec<WindowMeasurement>,
    open: Option<WindowMeasurement>,
    series: Vec<EmptySample>,
    shortfall: usize,
    relocations: usize,
}

impl Simulation {
    /// Places the fleet uniformly at random over the nodes. `requests` may
    /// extend past the run; later ones only feed forecasts.
    pub fn new(city: Arc<City>, config: ScenarioConfig, mut requests: Vec<Request>) -> Result<Self> {
        config.validate()?;
        if config.regions() != city.regions() {
            return Err(Error::Config(format!(
                "scenario has {} regions, network partition has {}",
                config.regions(),
                city.regions()
            )));
        }
        let n = city.graph.node_count();
        if requests.iter().any(|r| r.origin >= n || r.destination >= n) {
            return Err(Error::Config("request references a node outside the graph".into()));
        }
        requests.sort_by(|a, b| a.t_issue.total_cmp(&b.t_issue).then(a.id.cmp(&b.id)));
        let mut placement = seeded(config.seed, STREAM_PLACEMENT);
        let vehicles = (0..config.fleet_size)
            .map(|id| Vehicle::parked(id, placement.random_range(0..n)))
            .collect();

        let r = city.regions();
        let last = requests.last().map_or(0.0, |q| q.t_issue);
        let span = ((last / config.t_upper_s).floor() as usize + 1).max(config.windows());
        let mut od = vec![vec![vec![0.0; r]; r]; span];
        for q in &requests {
            let k = (q.t_issue / config.t_upper_s).floor() as usize;
            od[k][city.region_of(q.origin)][city.region_of(q.destination)] += 1.0;
        }
        let rng = seeded(config.seed, STREAM_DISPATCH);
        Ok(Simulation {
            city,
            config,
            now: 0.0,
            vehicles,
            requests,
            released: 0,
            pool: Vec::new(),
            theta: None,
            rng,
            od,
            windows: Vec::new(),
            open: None,
            series: Vec::new(),
            shortfall: 0,
            relocations: 0,
        })
    }

    pub fn city(&self) -> &City {
        &self.city
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn vehicles_mut(&mut self) -> &mut [Vehicle] {
        &mut self.vehicles
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    /// Requests released and still waiting, in issue order.
    pub fn pending(&self) -> impl Iterator<Item = &Request> + '_ {
        self.pool.iter().map(|&i| &self.requests[i])
    }

    pub fn windows(&self) -> &[WindowMeasurement] {
        &self.windows
    }

    /// Index of the window currently open.
    pub fn window_index(&self) -> usize {
        (self.now / self.config.t_upper_s + 1e-9).floor() as usize
    }

    pub fn theta(&self) -> Option<&[Vec<f64>]> {
        self.theta.as_deref()
    }

    pub fn empty_series(&self) -> &[EmptySample] {
        &self.series
    }

    /// Vehicles a command asked to move that were not available.
    pub fn shortfall(&self) -> usize {
        self.shortfall
    }

    /// Inter-regional relocations started so far.
    pub fn relocations(&self) -> usize {
        self.relocations
    }

    pub fn region_of_vehicle(&self, v: &Vehicle) -> usize {
        self.city.region_of(v.snapped_node(&self.city.dist))
    }

    /// Empty vehicles per region.
    pub fn empty_counts(&self) -> Vec<u32> {
        let mut e = vec![0; self.city.regions()];
        for v in self.vehicles.iter().filter(|v| v.status.is_empty()) {
            e[self.region_of_vehicle(v)] += 1;
        }
        e
    }

    /// Idle vehicles of `region`, snapped to their nearest node.
    pub fn idle_in_region(&self, region: usize) -> Vec<VehicleAt> {
        self.vehicles
            .iter()
            .filter(|v| v.status == VehicleStatus::Idle)
            .map(|v| VehicleAt {
                id: v.id,
                node: v.snapped_node(&self.city.dist),
            })
            .filter(|v| self.city.region_of(v.node) == region)
            .collect()
    }

    /// Travel time of vehicle `id` to `node`, in seconds.
    pub fn eta_s(&self, id: usize, node: usize) -> f64 {
        self.vehicles[id].route_to(&self.city.dist, node).0 / self.speed_km_s()
    }

    /// True origin-destination counts for `count` windows from `from`;
    /// zero beyond the trace.
    pub fn future_od(&self, from: usize, count: usize) -> Vec<Vec<Vec<f64>>> {
        let r = self.city.regions();
        (from..from + count)
            .map(|k| self.od.get(k).cloned().unwrap_or_else(|| vec![vec![0.0; r]; r]))
            .collect()
    }

    fn speed_km_s(&self) -> f64 {
        self.config.speed_kmh / 3600.0
    }

    /// Runs to the end of the scenario and reports.
    pub fn run(&mut self, policy: &mut dyn Policy) -> Result<MetricsReport> {
        let ticks = self.config.ticks();
        let per_window = self.config.ticks_per_window();
        let dt = self.config.t_lower_s;
        for k in 0..=ticks {
            if k > 0 {
                self.advance(dt);
            }
            self.release_requests();
            let last = k == ticks;
            if !last && k % per_window == 0 {
                self.open_window();
                let command = policy.upper_step(self)?;
                self.apply_upper_command(command.as_ref());
            }
            self.match_requests();
            if !last {
                let action = policy.lower_step(self);
                self.apply_lower_action(&action);
            }
            self.record_series();
        }
        self.close_window();
        self.metrics(&policy.name())
    }

    /// Moves every vehicle for `dt` seconds and fires arrival events in
    /// time order per vehicle.
    pub fn advance(&mut self, dt: f64) {
        let speed = self.speed_km_s();
        let dist = &self.city.dist;
        let mut emptied = Vec::new();
        for v in self.vehicles.iter_mut() {
            let mut left = dt;
            let mut t = self.now;
            while left > 0.0 && !v.path.is_empty() {
                let next = v.path[0];
                let len = dist.dist(v.node, next);
                let remaining = (len - v.offset_km).max(0.0);
                let reach = left * speed;
                let arrived = reach >= remaining - 1e-12;
                let (km, used) = if arrived {
                    (remaining, (remaining / speed).min(left))
                } else {
                    (reach, left)
                };
                if v.status.is_busy() {
                    v.odometer_service_km += km;
                    v.busy_time_s += used;
                } else {
                    v.odometer_rebalance_km += km;
                }
                left -= used;
                t += used;
                if !arrived {
                    v.offset_km += km;
                    break;
                }
                v.node = next;
                v.path.pop_front();
                v.offset_km = 0.0;
                v.completed_km += len;
                if !v.path.is_empty() {
                    continue;
                }
                match v.status {
                    VehicleStatus::ToPickup => {
                        let req = &mut self.requests[v.request.expect("assigned request")];
                        req.t_pickup = Some(t);
                        v.status = VehicleStatus::Occupied;
                        v.path = dist.shortest_path(v.node, req.destination).into_iter().skip(1).collect();
                    }
                    VehicleStatus::Occupied => {
                        let req = &mut self.requests[v.request.take().expect("assigned request")];
                        req.t_dropoff = Some(t);
                        req.status = RequestStatus::Completed;
                        v.status = VehicleStatus::Idle;
                        emptied.push(v.id);
                    }
                    VehicleStatus::Relocating => v.status = VehicleStatus::Idle,
                    VehicleStatus::Idle => {}
                }
            }
        }
        self.now += dt;
        if self.theta.is_some() {
            for id in emptied {
                self.redirect_emptied(id);
            }
        }
    }

    /// Sends a vehicle that just dropped off elsewhere with the transfer
    /// ratios of its region.
    fn redirect_emptied(&mut self, id: usize) {
        let theta = self.theta.as_ref().expect("checked by caller");
        let from = self.region_of_vehicle(&self.vehicles[id]);
        let row = &theta[from];
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut to = from;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                to = j;
                break;
            }
        }
        if to != from {
            self.relocate(id, to);
        }
    }

    fn relocate(&mut self, id: usize, region: usize) {
        let v = &self.vehicles[id];
        let target = self.city.nearest_in_region(v.snapped_node(&self.city.dist), region);
        let (_, path) = v.route_to(&self.city.dist, target);
        let v = &mut self.vehicles[id];
        v.path = path;
        v.status = VehicleStatus::Relocating;
        self.relocations += 1;
    }

    /// Moves requests issued by now into the matching pool.
    pub fn release_requests(&mut self) {
        while self.released < self.requests.len() {
            let t = self.requests[self.released].t_issue;
            if t > self.now + 1e-9 || t >= self.config.duration_s {
                break;
            }
            self.pool.push(self.released);
            self.released += 1;
        }
    }

    fn open_window(&mut self) {
        self.close_window();
        let r = self.city.regions();
        self.open = Some(WindowMeasurement {
            index: self.window_index(),
            empty: self.empty_counts(),
            origin: vec![0.0; r],
            dest: vec![0.0; r],
            answered: vec![0.0; r],
        });
    }

    fn close_window(&mut self) {
        if let Some(mut w) = self.open.take() {
            if let Some(od) = self.od.get(w.index) {
                for (i, row) in od.iter().enumerate() {
                    for (j, &c) in row.iter().enumerate() {
                        w.origin[i] += c;
                        w.dest[j] += c;
                    }
                }
            }
            self.windows.push(w);
        }
    }

    /// Starts the commanded inter-regional transfers and stores the
    /// transfer ratios for vehicles that become empty later in the window.
    /// Moving vehicles are picked uniformly among the empty ones of each
    /// region; a region short of vehicles sends what it has.
    pub fn apply_upper_command(&mut self, command: Option<&ControlCommand>) {
        let Some(cmd) = command else {
            self.theta = None;
            return;
        };
        let r = self.city.regions();
        if cmd.regions() != r {
            log::warn!("ignoring a {}-region command on a {r}-region city", cmd.regions());
            self.theta = None;
            return;
        }
        let mut pools: Vec<Vec<usize>> = vec![Vec::new(); r];
        for v in self.vehicles.iter().filter(|v| v.status.is_empty()) {
            pools[self.region_of_vehicle(v)].push(v.id);
        }
        for (i, pool) in pools.iter_mut().enumerate() {
            pool.shuffle(&mut self.rng);
            let mut take = pool.iter();
            for j in (0..r).filter(|&j| j != i) {
                for _ in 0..cmd.u_int[i][j] {
                    match take.next() {
                        Some(&id) => self.relocate(id, j),
                        None => self.shortfall += 1,
                    }
                }
            }
        }
        self.theta = Some(cmd.theta.clone());
    }

    /// Greedy matching in issue order: each waiting request takes the empty
    /// vehicle with the smallest travel time if it can still be reached
    /// within the wait limit. Requests older than the pool lifetime are
    /// cancelled.
    pub fn match_requests(&mut self) {
        let speed = self.speed_km_s();
        let pool = std::mem::take(&mut self.pool);
        for ri in pool {
            let age = self.now - self.requests[ri].t_issue;
            if age > self.config.t_match_s + 1e-9 {
                self.requests[ri].status = RequestStatus::Cancelled;
                continue;
            }
            let origin = self.requests[ri].origin;
            let best = self
                .vehicles
                .iter()
                .filter(|v| v.status.is_empty())
                .map(|v| (v.route_to(&self.city.dist, origin).0 / speed, v.id))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match best {
                Some((eta, id)) if age + eta <= self.config.t_wait_s + 1e-9 => self.assign(ri, id),
                _ => self.pool.push(ri),
            }
        }
    }

    fn assign(&mut self, ri: usize, id: usize) {
        let now = self.now;
        let dist = &self.city.dist;
        let req = &mut self.requests[ri];
        req.status = RequestStatus::Matched;
        req.t_matched = Some(now);
        if let Some(w) = self.open.as_mut() {
            w.answered[self.city.region_of(req.origin)] += 1.0;
        }
        let v = &mut self.vehicles[id];
        v.request = Some(ri);
        let (_, path) = v.route_to(dist, req.origin);
        if path.is_empty() {
            req.t_pickup = Some(now);
            v.status = VehicleStatus::Occupied;
            v.path = dist.shortest_path(v.node, req.destination).into_iter().skip(1).collect();
        } else {
            v.status = VehicleStatus::ToPickup;
            v.path = path;
        }
    }

    /// Installs coverage targets and lower-layer dispatches. Entries for
    /// vehicles that are no longer idle are skipped.
    pub fn apply_lower_action(&mut self, action: &LowerAction) {
        for &(id, node) in &action.targets {
            let Some(v) = self.vehicles.get(id) else { continue };
            if v.status != VehicleStatus::Idle {
                continue;
            }
            let (_, path) = v.route_to(&self.city.dist, node);
            self.vehicles[id].path = path;
        }
        for &(id, node) in &action.dispatch {
            let Some(v) = self.vehicles.get(id) else { continue };
            if v.status != VehicleStatus::Idle {
                continue;
            }
            let (_, path) = v.route_to(&self.city.dist, node);
            let v = &mut self.vehicles[id];
            if !path.is_empty() {
                v.status = VehicleStatus::Relocating;
            }
            v.path = path;
        }
    }

    fn record_series(&mut self) {
        let t = self.now;
        for (region, count) in self.empty_counts().into_iter().enumerate() {
            self.series.push(EmptySample { t_s: t, region, empty: count });
        }
    }

    /// Counts by request status over the requests issued so far:
    /// `(answered, cancelled, pending)`.
    pub fn request_accounting(&self) -> (usize, usize, usize) {
        let mut out = (0, 0, 0);
        for r in &self.requests[..self.released] {
            match r.status {
                RequestStatus::Matched | RequestStatus::Completed => out.0 += 1,
                RequestStatus::Cancelled => out.1 += 1,
                RequestStatus::Pending => out.2 += 1,
            }
        }
        out
    }

    /// Requests released so far.
    pub fn issued(&self) -> usize {
        self.released
    }

    pub fn metrics(&self, policy: &str) -> Result<MetricsReport> {
        MetricsReport::compute(policy, &self.config, &self.city, &self.requests[..self.released], &self.vehicles, self.shortfall)
    }
}
