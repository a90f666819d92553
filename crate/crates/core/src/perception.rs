//! Synthetic sensing: maps a UAV pose to the set of noisy detections its
//! camera would produce against the ground-truth world.

use nalgebra::Point3;
use rand::Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{in_frustum, line_of_sight, AltitudeAssignment, CameraModel, Pose};
use crate::rng::{Domain, StreamKey};
use crate::world::{ObjectClass, World};

/// One noisy observation of one world object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    pub estimated_position: Point3<f64>,
    pub confidence: f64,
    pub class_label: ObjectClass,
    /// Index of the observing UAV.
    pub detector: usize,
    /// Ground-truth object id, carried for test oracles only. Optimization
    /// and dedup logic must never read it.
    pub true_id: u64,
}

/// Everything one UAV reports at one step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub uav: usize,
    pub step: u64,
    pub detections: Vec<Detection>,
}

impl MeasurementSet {
    pub fn empty(uav: usize, step: u64) -> Self {
        Self {
            uav,
            step,
            detections: Vec::new(),
        }
    }
}

/// Detector imperfection knobs. Zeroing everything makes sensing a pure
/// function of geometry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensorNoise {
    pub position_sigma: f64,
    pub confidence_sigma: f64,
    pub dropout_probability: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            position_sigma: 0.5,
            confidence_sigma: 0.05,
            dropout_probability: 0.05,
        }
    }
}

impl SensorNoise {
    pub const NONE: SensorNoise = SensorNoise {
        position_sigma: 0.0,
        confidence_sigma: 0.0,
        dropout_probability: 0.0,
    };

    pub fn validate(&self) -> Result<(), crate::error::CoreError> {
        if self.position_sigma < 0.0
            || self.confidence_sigma < 0.0
            || !(0.0..1.0).contains(&self.dropout_probability)
        {
            return Err(crate::error::CoreError::InvalidConfig(
                "sensor noise sigmas must be >= 0 and dropout must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Geometric stand-in for a detector's confidence: peak quality scaled down
/// linearly with distance and by the cosine of the viewing angle off the
/// optical axis. Zero at and beyond max_range.
pub fn confidence_model(
    distance: f64,
    off_axis_angle: f64,
    base_quality: f64,
    max_range: f64,
) -> f64 {
    let falloff = (1.0 - distance / max_range).max(0.0);
    (base_quality * falloff * off_axis_angle.cos()).clamp(0.0, 1.0)
}

/// Produce the measurement set for one UAV at one step.
///
/// An object is detected when it is inside the camera frustum, has a clear
/// line of sight to the camera, and survives the dropout coin-flip. The
/// reported position and confidence carry Gaussian noise drawn from a
/// per-object fork of `key`, so one object's draws never depend on which
/// other objects happen to be visible.
pub fn sense(
    world: &World,
    uav: usize,
    pose: &Pose,
    altitudes: &AltitudeAssignment,
    cam: &CameraModel,
    noise: &SensorNoise,
    key: &StreamKey,
) -> MeasurementSet {
    let altitude = altitudes.altitude_of(uav);
    let camera_pos = Point3::new(pose.x, pose.y, altitude);
    let axis = cam.axis(pose.yaw);
    let pos_noise = Normal::new(0.0, noise.position_sigma).expect("sigma is non-negative");
    let conf_noise = Normal::new(0.0, noise.confidence_sigma).expect("sigma is non-negative");

    let mut detections = Vec::new();
    for obj in &world.objects {
        if !in_frustum(pose, altitude, cam, &obj.position) {
            continue;
        }
        if !line_of_sight(&camera_pos, &obj.position, &world.obstacles) {
            continue;
        }
        let mut rng = key.fork(obj.id);
        if rng.random_bool(noise.dropout_probability) {
            continue;
        }
        let v = obj.position - camera_pos;
        let distance = v.norm();
        let off_axis = if distance == 0.0 {
            0.0
        } else {
            (v.dot(&axis) / distance).clamp(-1.0, 1.0).acos()
        };
        let clean = confidence_model(distance, off_axis, obj.base_quality, cam.max_range);
        let estimated_position = Point3::new(
            obj.position.x + rng.sample(pos_noise),
            obj.position.y + rng.sample(pos_noise),
            obj.position.z + rng.sample(pos_noise),
        );
        detections.push(Detection {
            estimated_position,
            confidence: (clean + rng.sample(conf_noise)).clamp(0.0, 1.0),
            class_label: obj.class_label,
            detector: uav,
            true_id: obj.id,
        });
    }
    MeasurementSet {
        uav,
        step: key.step(),
        detections,
    }
}

/// Run `sense` for every UAV in the swarm at one step.
///
/// Each UAV gets its own RNG stream keyed by `(master, step, uav)`, so the
/// result is independent of evaluation order; the parallel map preserves
/// index order.
pub fn sense_swarm(
    world: &World,
    poses: &[Pose],
    altitudes: &AltitudeAssignment,
    cam: &CameraModel,
    noise: &SensorNoise,
    master: u64,
    step: u64,
) -> Vec<MeasurementSet> {
    poses
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let key = StreamKey::new(master, Domain::Sense, step, i as u64);
            sense(world, i, pose, altitudes, cam, noise, &key)
        })
        .collect()
}
