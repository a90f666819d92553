//! Step-by-step run records and end-of-run summaries.
//!
//! Records serialize one-per-line (JSON lines); the schema is documented
//! in docs/record-schema.md and kept stable by the tests here.

use serde::{Deserialize, Serialize};

use crate::constraints::{ClearanceRule, StepLimits};
use crate::error::CoreError;
use crate::geom::{Pose, Region};

/// Constraint-audit counters for one arrival state. Populated by the
/// engine after every move so downstream analysis can prove safety.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationCounts {
    /// UAVs whose last move exceeded a per-axis step bound.
    pub step_bound: usize,
    /// UAVs outside the operational region.
    pub region: usize,
    /// Unordered UAV pairs closer than the separation minimum.
    pub separation: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.step_bound + self.region + self.separation
    }
}

impl std::ops::AddAssign for ViolationCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.step_bound += rhs.step_bound;
        self.region += rhs.region;
        self.separation += rhs.separation;
    }
}

/// Slack for float round-trip error when auditing positions that were
/// produced by clamping to the exact bound.
const AUDIT_SLACK: f64 = 1e-9;

/// Audit an arrival state against the constraint set. `prev` is None for
/// the initial state, which has no incoming move to check.
pub fn count_violations(
    prev: Option<&[Pose]>,
    poses: &[Pose],
    region: &Region,
    limits: &StepLimits,
    clearance: &ClearanceRule,
) -> ViolationCounts {
    let mut v = ViolationCounts::default();
    if let Some(prev) = prev {
        for (p, q) in prev.iter().zip(poses) {
            let moved_too_far = (q.x - p.x).abs() > limits.max_xy_step + AUDIT_SLACK
                || (q.y - p.y).abs() > limits.max_xy_step + AUDIT_SLACK
                || q.yaw_delta(p).abs() > limits.max_yaw_step + AUDIT_SLACK;
            if moved_too_far {
                v.step_bound += 1;
            }
        }
    }
    for p in poses {
        if !region.contains(&p.xy()) {
            v.region += 1;
        }
    }
    for i in 0..poses.len() {
        for j in (i + 1)..poses.len() {
            if poses[i].xy_distance(&poses[j]) < clearance.min_uav_separation_xy - AUDIT_SLACK {
                v.separation += 1;
            }
        }
    }
    v
}

/// Per-UAV slice of one step record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UavStepInfo {
    pub pose: Pose,
    /// Broadcast contribution received this step; absent at step 0.
    pub delta: Option<f64>,
    /// Running local objective after folding in this step's delta.
    pub local_objective: f64,
    /// Index of the adopted candidate (0 = stay); absent when no decision
    /// was made this step (step 0, terminal step, failure, or nothing
    /// feasible).
    pub chosen_index: Option<usize>,
    /// Candidates rejected by the feasibility filter; absent when no
    /// decision was made.
    pub rejected_count: Option<usize>,
    pub failed: bool,
}

/// One line of the run log: the swarm's arrival state at step `step`, the
/// contributions computed there, and the decision taken there (when one
/// was taken).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// Situational-awareness objective at this step's poses.
    pub global_objective: f64,
    /// Number of unique objects after dedup.
    pub unique_objects: usize,
    /// Objective evaluations attributable to this step.
    pub objective_evaluations: usize,
    pub uavs: Vec<UavStepInfo>,
    pub violations: ViolationCounts,
    /// Wall-clock duration of the step in milliseconds. Only emitted when
    /// timing is explicitly enabled; timing would otherwise break
    /// byte-for-byte reproducibility of record files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl StepRecord {
    pub fn poses(&self) -> Vec<Pose> {
        self.uavs.iter().map(|u| u.pose).collect()
    }
}

/// End-of-run statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub n_uavs: usize,
    /// Highest step index in the record stream.
    pub last_step: u64,
    /// Mean objective over the trailing window (last 100 records, or the
    /// whole run when shorter; see `whole_run_fallback`).
    pub converged_value: f64,
    /// Records contributing to `converged_value`.
    pub converged_window: usize,
    pub whole_run_fallback: bool,
    /// Mean objective over records with step >= 150, the alternative
    /// convergence statistic; absent for short runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_after_150: Option<f64>,
    pub mean_objective: f64,
    pub final_poses: Vec<Pose>,
    /// Per-UAV centroid of the trailing-window positions.
    pub uav_centroids: Vec<(f64, f64)>,
    /// Per-UAV root-mean-square distance to the centroid over the same
    /// window; small values mean the UAV has settled.
    pub uav_dispersion: Vec<f64>,
    pub objective_evaluations_total: usize,
    pub violation_totals: ViolationCounts,
}

/// Deterministic statistics over a complete record stream.
pub fn summarize(records: &[StepRecord]) -> Result<RunSummary, CoreError> {
    if records.is_empty() {
        return Err(CoreError::Infeasible("cannot summarize an empty record stream".into()));
    }
    let n_uavs = records[0].uavs.len();
    if records.iter().any(|r| r.uavs.len() != n_uavs) {
        return Err(CoreError::Integrity("records disagree on swarm size".into()));
    }
    let window = records.len().min(100);
    let tail = &records[records.len() - window..];
    let whole_run_fallback = records.len() < 100;

    let mean = |rs: &[StepRecord]| {
        rs.iter().map(|r| r.global_objective).sum::<f64>() / rs.len() as f64
    };
    let converged_value = mean(tail);
    let mean_objective = mean(records);
    let after_150: Vec<StepRecord> = records.iter().filter(|r| r.step >= 150).cloned().collect();
    let mean_after_150 = if after_150.is_empty() {
        None
    } else {
        Some(mean(&after_150))
    };

    let mut uav_centroids = Vec::with_capacity(n_uavs);
    let mut uav_dispersion = Vec::with_capacity(n_uavs);
    for i in 0..n_uavs {
        let xs: Vec<(f64, f64)> = tail.iter().map(|r| (r.uavs[i].pose.x, r.uavs[i].pose.y)).collect();
        let n = xs.len() as f64;
        let cx = xs.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = xs.iter().map(|p| p.1).sum::<f64>() / n;
        let ms = xs
            .iter()
            .map(|p| (p.0 - cx).powi(2) + (p.1 - cy).powi(2))
            .sum::<f64>()
            / n;
        uav_centroids.push((cx, cy));
        uav_dispersion.push(ms.sqrt());
    }

    let mut violation_totals = ViolationCounts::default();
    for r in records {
        violation_totals.step_bound += r.violations.step_bound;
        violation_totals.region += r.violations.region;
        violation_totals.separation += r.violations.separation;
    }

    Ok(RunSummary {
        seed: None,
        n_uavs,
        last_step: records.last().unwrap().step,
        converged_value,
        converged_window: window,
        whole_run_fallback,
        mean_after_150,
        mean_objective,
        final_poses: records.last().unwrap().poses(),
        uav_centroids,
        uav_dispersion,
        objective_evaluations_total: records.iter().map(|r| r.objective_evaluations).sum(),
        violation_totals,
    })
}
