//! Swarm coordination: per-UAV contribution estimates from cached
//! measurements, and the per-step engine that alternates the coordinator
//! broadcast with the agents' decisions.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::agent::{Agent, Decision, DecisionContext, StepSchedule};
use crate::awareness::{deduplicate, objective_of};
use crate::constraints::{feasible, ClearanceRule, StepLimits};
use crate::error::CoreError;
use crate::geom::{AltitudeAssignment, CameraModel, Obstacle, Pose, Region};
use crate::perception::{sense_swarm, MeasurementSet, SensorNoise};
use crate::record::{count_violations, StepRecord, UavStepInfo};
use crate::rng::{self, Domain};
use crate::world::{drift_objects, World};

/// Everything the coordinator caches between steps: poses and measurement
/// sets for the current and previous step, plus the current objective.
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub step: u64,
    pub poses: Vec<Pose>,
    pub prev_poses: Vec<Pose>,
    pub measurements: Vec<MeasurementSet>,
    pub prev_measurements: Vec<MeasurementSet>,
    pub global_objective: f64,
}

impl SwarmState {
    fn validate(&self) -> Result<(), CoreError> {
        let n = self.poses.len();
        if self.prev_poses.len() != n
            || self.measurements.len() != n
            || self.prev_measurements.len() != n
        {
            return Err(CoreError::Integrity(
                "swarm state caches disagree on swarm size".into(),
            ));
        }
        if self.step < 1 {
            return Err(CoreError::Integrity(
                "contributions need one completed step of history".into(),
            ));
        }
        Ok(())
    }
}

/// Per-UAV objective contributions for one step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContributionVector {
    pub values: Vec<f64>,
    /// Objective evaluations consumed: one per UAV plus the shared
    /// current-step evaluation.
    pub objective_evaluations: usize,
}

/// Movement between two poses in step-limit units: each dimension is
/// divided by its per-step bound, so a maximal move along any single
/// dimension scores 1.
pub fn scaled_pose_distance(a: &Pose, b: &Pose, limits: &StepLimits) -> f64 {
    let dx = (a.x - b.x) / limits.max_xy_step;
    let dy = (a.y - b.y) / limits.max_xy_step;
    let dyaw = a.yaw_delta(b) / limits.max_yaw_step;
    (dx * dx + dy * dy + dyaw * dyaw).sqrt()
}

const ZERO_STEP_GUARD: f64 = 1e-9;

/// Finite-difference contributions from an already-known current objective
/// and a per-UAV "objective with UAV i rolled back" evaluator.
///
/// `objective_without` is invoked exactly once per UAV even when the guard
/// zeroes the quotient, so the evaluation count is always n + 1 (the +1
/// being the caller's evaluation of `objective_now`).
pub fn contributions_with(
    objective_now: f64,
    scaled_distances: &[f64],
    mut objective_without: impl FnMut(usize) -> f64,
) -> ContributionVector {
    let values = scaled_distances
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let without = objective_without(i);
            if d < ZERO_STEP_GUARD {
                0.0
            } else {
                (objective_now - without) / d
            }
        })
        .collect();
    ContributionVector {
        values,
        objective_evaluations: scaled_distances.len() + 1,
    }
}

/// Per-UAV contributions from the cached measurement sets: UAV i's value
/// is the objective drop caused by replacing its current measurements with
/// its previous ones, normalized by how far it moved. No new sensing
/// happens here.
pub fn compute_contributions(
    state: &SwarmState,
    limits: &StepLimits,
    dedup_epsilon: f64,
) -> Result<ContributionVector, CoreError> {
    state.validate()?;
    let distances: Vec<f64> = state
        .poses
        .iter()
        .zip(&state.prev_poses)
        .map(|(now, prev)| scaled_pose_distance(now, prev, limits))
        .collect();
    let mut swapped = state.measurements.to_vec();
    Ok(contributions_with(state.global_objective, &distances, |i| {
        swapped[i] = state.prev_measurements[i].clone();
        let value = objective_of(&swapped, dedup_epsilon);
        swapped[i] = state.measurements[i].clone();
        value
    }))
}

/// Simulated decision-layer outage: the UAV holds its pose and receives no
/// contributions while `from_step..=to_step` covers the current step. Its
/// camera keeps running.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FailureWindow {
    pub uav: usize,
    pub from_step: u64,
    pub to_step: u64,
}

/// Static per-run knobs for the engine.
#[derive(Debug, Clone)]
pub struct EngineParams {
    pub dedup_epsilon: f64,
    pub schedule: StepSchedule,
    /// Perturbations sampled per decision (the stay candidate is extra).
    pub perturbations: usize,
    pub limits: StepLimits,
    pub clearance: ClearanceRule,
    pub camera: CameraModel,
    pub altitudes: AltitudeAssignment,
    pub noise: SensorNoise,
    pub n_steps: u64,
    /// Per-step random-walk sigma for world objects; 0 disables drift.
    pub drift_sigma: f64,
    pub failures: Vec<FailureWindow>,
    /// Attach wall-clock timings to records. Off by default because it
    /// breaks byte-for-byte output reproducibility.
    pub emit_timing: bool,
}

/// Drives one run: owns the world (objects may drift) and the master seed,
/// and advances (SwarmState, agents) one step at a time.
pub struct Engine {
    world: World,
    params: EngineParams,
    master: u64,
}

/// Joint rejection sampling of feasible, mutually separated start poses.
pub fn sample_initial_poses(
    n: usize,
    region: &Region,
    clearance: &ClearanceRule,
    obstacles: &[Obstacle],
    altitudes: &AltitudeAssignment,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<Pose>, CoreError> {
    let (min, max) = region.bounding_box();
    let center_x = 0.5 * (min.x + max.x);
    let center_y = 0.5 * (min.y + max.y);
    let mut poses: Vec<Pose> = Vec::with_capacity(n);
    for i in 0..n {
        let mut placed = false;
        for _ in 0..10_000 {
            let x = rng.random_range(min.x..max.x);
            let y = rng.random_range(min.y..max.y);
            // Start cameras aimed into the task area (toward the region
            // center, with jitter). A UAV that spawns staring at empty space
            // outside the region collects no detections, so its objective
            // trace is flat and the optimizer has no signal to recover from.
            let inward = (center_y - y).atan2(center_x - x);
            let jitter = rng.random_range(-std::f64::consts::FRAC_PI_4..std::f64::consts::FRAC_PI_4);
            let candidate = Pose::new(x, y, inward + jitter);
            // Zero-step feasibility doubles as the containment, separation,
            // and clearance check.
            let ok = feasible(
                &candidate,
                &candidate,
                &poses,
                region,
                &StepLimits::default(),
                clearance,
                obstacles,
                altitudes.altitude_of(i),
            );
            if ok {
                poses.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CoreError::Infeasible(format!(
                "could not place UAV {i} in the region with the given clearances"
            )));
        }
    }
    Ok(poses)
}

impl Engine {
    pub fn new(world: World, params: EngineParams, master: u64) -> Self {
        Self {
            world,
            params,
            master,
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    fn failed(&self, uav: usize, step: u64) -> bool {
        self.params
            .failures
            .iter()
            .any(|w| w.uav == uav && (w.from_step..=w.to_step).contains(&step))
    }

    fn sense_all(&self, poses: &[Pose], step: u64) -> Vec<MeasurementSet> {
        sense_swarm(
            &self.world,
            poses,
            &self.params.altitudes,
            &self.params.camera,
            &self.params.noise,
            self.master,
            step,
        )
    }

    fn apply_drift(&mut self, step: u64) {
        drift_objects(&mut self.world, self.params.drift_sigma, self.master, step);
    }

    fn uav_info(
        &self,
        poses: &[Pose],
        step: u64,
        agents: &[Agent],
        deltas: Option<&[f64]>,
        decisions: Option<&[Decision]>,
    ) -> Vec<UavStepInfo> {
        (0..poses.len())
            .map(|i| {
                let failed = self.failed(i, step);
                let decision = decisions.map(|d| d[i]);
                UavStepInfo {
                    pose: poses[i],
                    delta: match deltas {
                        Some(values) if !failed => Some(values[i]),
                        _ => None,
                    },
                    local_objective: agents[i].local_objective(),
                    chosen_index: decision.and_then(|d| d.chosen_index),
                    rejected_count: decision
                        .filter(|_| !failed)
                        .map(|d| d.rejected_count),
                    failed,
                }
            })
            .collect()
    }

    /// Place the swarm, sense the initial state, seed the estimators, and
    /// perform one random feasible move per UAV so the first contribution
    /// computation has a pose pair to difference. Returns the state at
    /// step 1 and the step-0 record.
    pub fn bootstrap(&mut self, agents: &mut [Agent]) -> Result<(SwarmState, StepRecord), CoreError> {
        let t0 = Instant::now();
        let n = agents.len();
        let mut init_rng = rng::stream(self.master, Domain::InitialPoses, 0, 0);
        let poses0 = sample_initial_poses(
            n,
            &self.world.region,
            &self.params.clearance,
            &self.world.obstacles,
            &self.params.altitudes,
            &mut init_rng,
        )?;
        let m0 = self.sense_all(&poses0, 0);
        let j0 = objective_of(&m0, self.params.dedup_epsilon);
        for (i, agent) in agents.iter_mut().enumerate() {
            if !self.failed(i, 0) {
                agent.record(poses0[i], 0.0);
            }
        }

        let record = StepRecord {
            step: 0,
            global_objective: j0,
            unique_objects: deduplicate(&m0, self.params.dedup_epsilon).len(),
            objective_evaluations: 1,
            uavs: self.uav_info(&poses0, 0, agents, None, None),
            violations: count_violations(
                None,
                &poses0,
                &self.world.region,
                &self.params.limits,
                &self.params.clearance,
            ),
            wall_time_ms: self
                .params
                .emit_timing
                .then(|| t0.elapsed().as_secs_f64() * 1e3),
        };

        let alpha0 = self.params.schedule.alpha(0);
        let mut poses1 = Vec::with_capacity(n);
        for i in 0..n {
            if self.failed(i, 0) {
                poses1.push(poses0[i]);
                continue;
            }
            let mut rng = rng::stream(self.master, Domain::Bootstrap, 0, i as u64);
            let others: Vec<Pose> = without(&poses0, i);
            let candidates = crate::agent::sample_perturbations(
                &poses0[i],
                self.params.perturbations,
                alpha0,
                &self.params.limits,
                &mut rng,
            );
            // First feasible non-stay candidate; stay as a last resort.
            let chosen = candidates[1..]
                .iter()
                .find(|c| {
                    feasible(
                        c,
                        &poses0[i],
                        &others,
                        &self.world.region,
                        &self.params.limits,
                        &self.params.clearance,
                        &self.world.obstacles,
                        self.params.altitudes.altitude_of(i),
                    )
                })
                .copied()
                .unwrap_or(poses0[i]);
            poses1.push(chosen);
        }

        self.apply_drift(1);
        let m1 = self.sense_all(&poses1, 1);
        let j1 = objective_of(&m1, self.params.dedup_epsilon);
        let state = SwarmState {
            step: 1,
            poses: poses1,
            prev_poses: poses0,
            measurements: m1,
            prev_measurements: m0,
            global_objective: j1,
        };
        Ok((state, record))
    }

    /// One full step at k = state.step: broadcast contributions, let every
    /// agent decide, apply all moves simultaneously, sense at the new
    /// poses, and roll the caches. Returns the state at k + 1 and the
    /// record for step k.
    pub fn step_swarm(
        &mut self,
        state: SwarmState,
        agents: &mut [Agent],
    ) -> Result<(SwarmState, StepRecord), CoreError> {
        let t0 = Instant::now();
        let k = state.step;
        let contrib = compute_contributions(&state, &self.params.limits, self.params.dedup_epsilon)?;
        for (i, agent) in agents.iter_mut().enumerate() {
            if !self.failed(i, k) {
                agent.record(state.poses[i], contrib.values[i]);
            }
        }

        let alpha = self.params.schedule.alpha(k);
        let poses = &state.poses;
        let decisions: Vec<Decision> = agents
            .par_iter_mut()
            .enumerate()
            .map(|(i, agent)| {
                if self.failed(i, k) {
                    return Decision {
                        pose: poses[i],
                        chosen_index: None,
                        rejected_count: 0,
                    };
                }
                let others = without(poses, i);
                let ctx = DecisionContext {
                    region: &self.world.region,
                    limits: &self.params.limits,
                    clearance: &self.params.clearance,
                    obstacles: &self.world.obstacles,
                    altitude: self.params.altitudes.altitude_of(i),
                    alpha,
                    m: self.params.perturbations,
                };
                let mut rng = rng::stream(self.master, Domain::Perturbation, k, i as u64);
                agent.decide(&poses[i], &others, &ctx, &mut rng)
            })
            .collect();

        let record = StepRecord {
            step: k,
            global_objective: state.global_objective,
            unique_objects: deduplicate(&state.measurements, self.params.dedup_epsilon).len(),
            objective_evaluations: contrib.objective_evaluations,
            uavs: self.uav_info(&state.poses, k, agents, Some(&contrib.values), Some(&decisions)),
            violations: count_violations(
                Some(&state.prev_poses),
                &state.poses,
                &self.world.region,
                &self.params.limits,
                &self.params.clearance,
            ),
            wall_time_ms: self
                .params
                .emit_timing
                .then(|| t0.elapsed().as_secs_f64() * 1e3),
        };

        let new_poses: Vec<Pose> = decisions.iter().map(|d| d.pose).collect();
        self.apply_drift(k + 1);
        let measurements = self.sense_all(&new_poses, k + 1);
        let global_objective = objective_of(&measurements, self.params.dedup_epsilon);
        let next = SwarmState {
            step: k + 1,
            poses: new_poses,
            prev_poses: state.poses,
            measurements,
            prev_measurements: state.measurements,
            global_objective,
        };
        Ok((next, record))
    }

    /// Terminal record at k = state.step: contributions are computed and
    /// delivered (keeping every agent's local objective complete), but no
    /// decision follows.
    pub fn final_record(
        &self,
        state: &SwarmState,
        agents: &mut [Agent],
    ) -> Result<StepRecord, CoreError> {
        let t0 = Instant::now();
        let k = state.step;
        let contrib = compute_contributions(state, &self.params.limits, self.params.dedup_epsilon)?;
        for (i, agent) in agents.iter_mut().enumerate() {
            if !self.failed(i, k) {
                agent.record(state.poses[i], contrib.values[i]);
            }
        }
        Ok(StepRecord {
            step: k,
            global_objective: state.global_objective,
            unique_objects: deduplicate(&state.measurements, self.params.dedup_epsilon).len(),
            objective_evaluations: contrib.objective_evaluations,
            uavs: self.uav_info(&state.poses, k, agents, Some(&contrib.values), None),
            violations: count_violations(
                Some(&state.prev_poses),
                &state.poses,
                &self.world.region,
                &self.params.limits,
                &self.params.clearance,
            ),
            wall_time_ms: self
                .params
                .emit_timing
                .then(|| t0.elapsed().as_secs_f64() * 1e3),
        })
    }
}

fn without(poses: &[Pose], i: usize) -> Vec<Pose> {
    poses
        .iter()
        .enumerate()
        .filter_map(|(j, p)| (j != i).then_some(*p))
        .collect()
}
