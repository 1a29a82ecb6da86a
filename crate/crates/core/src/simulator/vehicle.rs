use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::network::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleStatus {
    Idle,
    Relocating,
    ToPickup,
    Occupied,
}

impl VehicleStatus {
    /// Idle and relocating vehicles are both empty and can be matched.
    pub fn is_empty(self) -> bool {
        matches!(self, VehicleStatus::Idle | VehicleStatus::Relocating)
    }

    pub fn is_busy(self) -> bool {
        !self.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    /// Last node reached.
    pub node: usize,
    /// Nodes still to visit; the front is the end of the current link.
    pub path: VecDeque<usize>,
    /// Distance covered on the current link.
    pub offset_km: f64,
    pub status: VehicleStatus,
    /// Index of the assigned request while heading to a pickup or carrying
    /// a passenger.
    pub request: Option<usize>,
    pub odometer_rebalance_km: f64,
    pub odometer_service_km: f64,
    pub busy_time_s: f64,
    /// Length of the links fully traversed so far.
    pub completed_km: f64,
}

impl Vehicle {
    pub fn parked(id: usize, node: usize) -> Self {
        Vehicle {
            id,
            node,
            path: VecDeque::new(),
            offset_km: 0.0,
            status: VehicleStatus::Idle,
            request: None,
            odometer_rebalance_km: 0.0,
            odometer_service_km: 0.0,
            busy_time_s: 0.0,
            completed_km: 0.0,
        }
    }

    pub fn is_moving(&self) -> bool {
        !self.path.is_empty()
    }

    /// Nearest node along the current link.
    pub fn snapped_node(&self, dist: &DistanceMatrix) -> usize {
        match self.path.front() {
            Some(&next) if 2.0 * self.offset_km > dist.dist(self.node, next) => next,
            _ => self.node,
        }
    }

    /// Distance and node sequence to `target`. A vehicle part-way along a
    /// link finishes it first.
    pub fn route_to(&self, dist: &DistanceMatrix, target: usize) -> (f64, VecDeque<usize>) {
        let (start, lead) = match self.path.front() {
            Some(&next) => (next, (dist.dist(self.node, next) - self.offset_km).max(0.0)),
            None => (self.node, 0.0),
        };
        let mut path: VecDeque<usize> = dist.shortest_path(start, target).into();
        if self.path.is_empty() {
            path.pop_front();
        }
        (lead + dist.dist(start, target), path)
    }
}
