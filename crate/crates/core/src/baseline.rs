//! Centralized semi-exhaustive search: at every step, sample a batch of
//! joint swarm configurations, physically evaluate each one, keep the
//! best. The expensive-but-strong reference the optimizer is measured
//! against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::perturb_pose;
use crate::awareness::objective_of;
use crate::constraints::feasible;
use crate::coordinator::EngineParams;
use crate::geom::Pose;
use crate::perception::{sense, MeasurementSet, SensorNoise};
use crate::rng::{self, Domain, StreamKey};
use crate::world::World;

/// One jointly sampled swarm configuration and its evaluated objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointCandidate {
    pub poses: Vec<Pose>,
    pub evaluated_objective: f64,
}

const PER_UAV_RETRIES: usize = 20;

/// Sample `n_candidates` joint configurations around `poses`. Candidate 0
/// is always the current configuration. Within a candidate, each UAV's
/// perturbation must be feasible against the current swarm and keep
/// separation from the peers already placed in the same candidate; a UAV
/// that cannot find such a step stays put.
pub fn generate_joint_candidates(
    world: &World,
    poses: &[Pose],
    n_candidates: usize,
    alpha: f64,
    params: &EngineParams,
    master: u64,
    step: u64,
) -> Vec<Vec<Pose>> {
    let n = poses.len();
    let mut rng = rng::stream(master, Domain::BaselineCandidates, step, 0);
    let mut candidates = Vec::with_capacity(n_candidates);
    candidates.push(poses.to_vec());
    for _ in 1..n_candidates {
        let mut joint: Vec<Pose> = Vec::with_capacity(n);
        for i in 0..n {
            let others: Vec<Pose> = poses
                .iter()
                .enumerate()
                .filter_map(|(j, p)| (j != i).then_some(*p))
                .collect();
            let mut accepted = poses[i];
            for _ in 0..PER_UAV_RETRIES {
                let cand = perturb_pose(&poses[i], alpha, &params.limits, &mut rng);
                let ok = feasible(
                    &cand,
                    &poses[i],
                    &others,
                    &world.region,
                    &params.limits,
                    &params.clearance,
                    &world.obstacles,
                    params.altitudes.altitude_of(i),
                ) && joint
                    .iter()
                    .all(|placed| cand.xy_distance(placed) >= params.clearance.min_uav_separation_xy);
                if ok {
                    accepted = cand;
                    break;
                }
            }
            joint.push(accepted);
        }
        candidates.push(joint);
    }
    candidates
}

/// Noise-free objective of one joint configuration: pure geometry, no
/// dropout, no measurement noise, so ranking candidates never depends on
/// noise draws.
pub fn evaluate_candidate(world: &World, poses: &[Pose], params: &EngineParams) -> f64 {
    let measurements: Vec<MeasurementSet> = poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            sense(
                world,
                i,
                pose,
                &params.altitudes,
                &params.camera,
                &SensorNoise::NONE,
                // Noise is zeroed, so the stream choice cannot matter.
                &StreamKey::new(0, Domain::Sense, 0, i as u64),
            )
        })
        .collect();
    objective_of(&measurements, params.dedup_epsilon)
}

/// Evaluate all candidates and pick the argmax; ties resolve to the
/// lowest index, so the current configuration (index 0) wins unless a
/// candidate is strictly better.
pub fn best_candidate(world: &World, candidates: &[Vec<Pose>], params: &EngineParams) -> (usize, Vec<JointCandidate>) {
    let evaluated: Vec<JointCandidate> = candidates
        .par_iter()
        .map(|poses| JointCandidate {
            poses: poses.clone(),
            evaluated_objective: evaluate_candidate(world, poses, params),
        })
        .collect();
    let mut best = 0;
    for (i, c) in evaluated.iter().enumerate() {
        if c.evaluated_objective > evaluated[best].evaluated_objective {
            best = i;
        }
    }
    (best, evaluated)
}

/// One baseline step: returns the chosen configuration and the number of
/// full sensing evaluations spent choosing it.
#[allow(clippy::too_many_arguments)]
pub fn semi_exhaustive_step(
    world: &World,
    poses: &[Pose],
    n_candidates: usize,
    alpha: f64,
    params: &EngineParams,
    master: u64,
    step: u64,
) -> (Vec<Pose>, usize) {
    let candidates = generate_joint_candidates(world, poses, n_candidates, alpha, params, master, step);
    let (best, evaluated) = best_candidate(world, &candidates, params);
    (evaluated[best].poses.clone(), evaluated.len())
}
