//! Deterministic multi-UAV surveillance simulator and optimizer.
//!
//! A swarm of camera-carrying UAVs monitors a bounded region and tries to
//! maximize situational awareness: the number of uniquely detected ground
//! objects weighted by the best detection confidence each one gets. The
//! objective is only available as a scalar after sensing, so each UAV
//! learns a local surrogate of its own contribution from coordinator
//! broadcasts and moves to the surrogate's constrained argmax. A
//! semi-exhaustive joint-search baseline provides the reference point at a
//! much larger evaluation budget.
//!
//! Everything is seeded: worlds, initial placements, perturbations, and
//! sensor noise all derive from per-purpose counter-based RNG streams, so
//! a run is reproducible bit-for-bit regardless of thread count.

pub mod agent;
pub mod awareness;
pub mod baseline;
pub mod constraints;
pub mod coordinator;
pub mod error;
pub mod geom;
pub mod harness;
pub mod perception;
pub mod record;
pub mod rng;
pub mod world;

pub use agent::{Agent, Decision, DecisionContext, Estimator, FeatureMap, StepSchedule};
pub use awareness::{
    build_confidence_matrix, deduplicate, objective, objective_of, ConfidenceMatrix, UniqueObject,
};
pub use baseline::semi_exhaustive_step;
pub use constraints::{feasible, ClearanceRule, StepLimits};
pub use coordinator::{
    compute_contributions, contributions_with, sample_initial_poses, scaled_pose_distance,
    ContributionVector, Engine, EngineParams, FailureWindow, SwarmState,
};
pub use error::CoreError;
pub use geom::{
    in_frustum, line_of_sight, wrap_angle, AltitudeAssignment, CameraModel, Obstacle, Pose, Region,
};
pub use harness::{
    compare, compare_modes, run, run_with, summarize_file, sweep, with_thread_pool,
    ComparisonReport, ExperimentConfig, Mode, RunOutput, SizeAggregate,
};
pub use perception::{confidence_model, sense, sense_swarm, Detection, MeasurementSet, SensorNoise};
pub use record::{count_violations, summarize, RunSummary, StepRecord, UavStepInfo, ViolationCounts};
pub use world::{
    drift_objects, generate_world, region_preset, Layout, World, WorldObject, WorldSpec,
};
