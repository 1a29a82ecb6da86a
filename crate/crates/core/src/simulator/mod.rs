//! Discrete-time fleet simulation: Poisson requests, vehicles moving along
//! shortest paths, pool-based matching, command application and metrics.

mod city;
mod config;
mod engine;
mod metrics;
mod request;
mod vehicle;

pub use city::City;
pub use config::ScenarioConfig;
pub use engine::{
    LowerAction, Policy, Simulation, WindowMeasurement, STREAM_COLLECTION, STREAM_DISPATCH, STREAM_FORECAST,
    STREAM_PLACEMENT, STREAM_REQUESTS,
};
pub use metrics::{read_metrics_csv, write_metrics_csv, write_series_csv, EmptySample, MetricsReport, MetricsRow};
pub use request::{generate_requests, read_trace, write_trace, Request, RequestStatus};
pub use vehicle::{Vehicle, VehicleStatus};
