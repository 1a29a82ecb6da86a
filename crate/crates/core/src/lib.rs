//! Mobility-on-demand fleet simulation with hierarchical empty-vehicle
//! rebalancing: a data-driven predictive controller for inter-regional
//! transfers and a graph Voronoi coverage controller for positioning
//! inside each region.

pub mod coverage;
pub mod deepc;
pub mod error;
pub mod experiment;
pub mod network;
pub mod policies;
pub mod qp;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
