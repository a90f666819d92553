//! Per-step feasibility: movement bounds, boundary containment, and
//! collision clearances, evaluated as one total predicate.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::CoreError;
use crate::geom::{Obstacle, Pose, Region};

/// How far one step may move a UAV.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepLimits {
    pub max_xy_step: f64,
    pub max_yaw_step: f64,
}

impl Default for StepLimits {
    fn default() -> Self {
        Self {
            max_xy_step: 3.5,
            max_yaw_step: PI / 18.0,
        }
    }
}

impl StepLimits {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.max_xy_step <= 0.0 || self.max_yaw_step <= 0.0 {
            return Err(CoreError::InvalidConfig("step limits must be positive".into()));
        }
        Ok(())
    }
}

/// Minimum distances that keep the swarm safe.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClearanceRule {
    pub min_uav_separation_xy: f64,
    pub min_obstacle_clearance: f64,
}

impl Default for ClearanceRule {
    fn default() -> Self {
        Self {
            min_uav_separation_xy: 5.0,
            min_obstacle_clearance: 2.0,
        }
    }
}

impl ClearanceRule {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.min_uav_separation_xy < 0.0 || self.min_obstacle_clearance < 0.0 {
            return Err(CoreError::InvalidConfig("clearances must be non-negative".into()));
        }
        Ok(())
    }
}

/// True when moving from `current` to `candidate` respects all constraints:
/// per-axis step bounds, region containment, separation from the other
/// UAVs' current positions, and obstacle clearance at flight altitude.
///
/// Peers are checked at their current poses, not their simultaneous
/// candidates; the caller is expected to audit post-step separation.
#[allow(clippy::too_many_arguments)]
pub fn feasible(
    candidate: &Pose,
    current: &Pose,
    others: &[Pose],
    region: &Region,
    limits: &StepLimits,
    clearance: &ClearanceRule,
    obstacles: &[Obstacle],
    altitude: f64,
) -> bool {
    let dx = (candidate.x - current.x).abs();
    let dy = (candidate.y - current.y).abs();
    let dyaw = candidate.yaw_delta(current).abs();
    if dx > limits.max_xy_step || dy > limits.max_xy_step || dyaw > limits.max_yaw_step {
        return false;
    }
    if !region.contains(&candidate.xy()) {
        return false;
    }
    if others
        .iter()
        .any(|o| candidate.xy_distance(o) < clearance.min_uav_separation_xy)
    {
        return false;
    }
    let p = Point3::new(candidate.x, candidate.y, altitude);
    obstacles
        .iter()
        .all(|o| o.distance_to(&p) >= clearance.min_obstacle_clearance)
}
