//! The situational-awareness objective: merge the swarm's detections into
//! unique objects, build the per-UAV confidence matrix, sum column maxima.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::perception::MeasurementSet;
use crate::world::ObjectClass;

pub const DEFAULT_DEDUP_EPSILON: f64 = 2.5;

/// A cluster of detections judged to be the same physical object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniqueObject {
    /// Position reported by the highest-confidence member.
    pub representative_position: Point3<f64>,
    pub class_label: ObjectClass,
    /// (uav, detection index) pairs merged into this object, sorted.
    pub members: Vec<(usize, usize)>,
}

/// n_uavs x n_unique matrix; entry (i, j) is UAV i's best confidence on
/// unique object j, 0 when i did not detect it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceMatrix {
    pub n_uavs: usize,
    pub entries: Vec<Vec<f64>>,
}

impl ConfidenceMatrix {
    pub fn n_objects(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }
}

/// Greedy merge in descending confidence order: the highest-confidence
/// unclaimed detection seeds a cluster and claims every unclaimed
/// same-class detection within `dedup_epsilon` of it. Lower-confidence
/// duplicates are thereby discarded in favor of the seed. Ties in
/// confidence break by (uav, detection index).
///
/// Zero-confidence detections carry no information and are dropped, so
/// every resulting unique object was positively detected by someone.
pub fn deduplicate(measurements: &[MeasurementSet], dedup_epsilon: f64) -> Vec<UniqueObject> {
    assert!(dedup_epsilon > 0.0, "dedup_epsilon must be positive");
    let mut flat: Vec<(usize, usize, &crate::perception::Detection)> = Vec::new();
    for ms in measurements {
        for (idx, det) in ms.detections.iter().enumerate() {
            if det.confidence > 0.0 {
                flat.push((ms.uav, idx, det));
            }
        }
    }
    let mut order: Vec<usize> = (0..flat.len()).collect();
    order.sort_by(|&a, &b| {
        let (ua, ia, da) = flat[a];
        let (ub, ib, db) = flat[b];
        db.confidence
            .total_cmp(&da.confidence)
            .then(ua.cmp(&ub))
            .then(ia.cmp(&ib))
    });

    let mut claimed = vec![false; flat.len()];
    let mut unique = Vec::new();
    for &seed_idx in &order {
        if claimed[seed_idx] {
            continue;
        }
        let (_, _, seed) = flat[seed_idx];
        let mut members = Vec::new();
        for (i, &(uav, idx, det)) in flat.iter().enumerate() {
            if claimed[i]
                || det.class_label != seed.class_label
                || (det.estimated_position - seed.estimated_position).norm() > dedup_epsilon
            {
                continue;
            }
            claimed[i] = true;
            members.push((uav, idx));
        }
        members.sort_unstable();
        unique.push(UniqueObject {
            representative_position: seed.estimated_position,
            class_label: seed.class_label,
            members,
        });
    }
    unique
}

/// Entry (i, j) is the best confidence among UAV i's member detections of
/// unique object j. Errors if a member pair does not refer back into
/// `measurements`.
pub fn build_confidence_matrix(
    unique: &[UniqueObject],
    measurements: &[MeasurementSet],
) -> Result<ConfidenceMatrix, CoreError> {
    let n_uavs = measurements.len();
    let mut entries = vec![vec![0.0f64; unique.len()]; n_uavs];
    for (j, obj) in unique.iter().enumerate() {
        for &(uav, idx) in &obj.members {
            let det = measurements
                .iter()
                .find(|ms| ms.uav == uav)
                .and_then(|ms| ms.detections.get(idx))
                .ok_or_else(|| {
                    CoreError::Integrity(format!(
                        "unique object {j} references missing detection ({uav}, {idx})"
                    ))
                })?;
            if uav >= n_uavs {
                return Err(CoreError::Integrity(format!(
                    "unique object {j} references UAV {uav} outside the swarm"
                )));
            }
            entries[uav][j] = entries[uav][j].max(det.confidence);
        }
    }
    Ok(ConfidenceMatrix { n_uavs, entries })
}

/// Total situational awareness: sum over unique objects of the best
/// confidence any UAV achieved on that object.
pub fn objective(c: &ConfidenceMatrix) -> f64 {
    let n_objects = c.n_objects();
    (0..n_objects)
        .map(|j| {
            c.entries
                .iter()
                .map(|row| row[j])
                .fold(0.0f64, f64::max)
        })
        .sum()
}

/// Convenience composition used by the optimizer and baseline.
pub fn objective_of(measurements: &[MeasurementSet], dedup_epsilon: f64) -> f64 {
    let unique = deduplicate(measurements, dedup_epsilon);
    let c = build_confidence_matrix(&unique, measurements)
        .expect("members produced by deduplicate always refer back into measurements");
    objective(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::Detection;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn det(x: f64, y: f64, conf: f64, class: ObjectClass, uav: usize) -> Detection {
        Detection {
            estimated_position: Point3::new(x, y, 0.0),
            confidence: conf,
            class_label: class,
            detector: uav,
            true_id: 0,
        }
    }

    fn set(uav: usize, detections: Vec<Detection>) -> MeasurementSet {
        MeasurementSet {
            uav,
            step: 0,
            detections,
        }
    }

    #[test]
    fn lower_confidence_duplicate_discarded() {
        let measurements = vec![
            set(0, vec![det(0.0, 0.0, 0.6, ObjectClass::Vehicle, 0)]),
            set(1, vec![det(0.3, 0.0, 0.9, ObjectClass::Vehicle, 1)]),
        ];
        let unique = deduplicate(&measurements, 2.5);
        assert_eq!(unique.len(), 1);
        assert_eq!(unique[0].representative_position, Point3::new(0.3, 0.0, 0.0));
        assert_eq!(unique[0].members, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn empty_input_empty_output() {
        assert!(deduplicate(&[], 2.5).is_empty());
        let empty = vec![set(0, vec![]), set(1, vec![])];
        assert!(deduplicate(&empty, 2.5).is_empty());
        assert_relative_eq!(objective_of(&empty, 2.5), 0.0);
    }

    #[test]
    fn classes_never_merge() {
        let measurements = vec![set(
            0,
            vec![
                det(0.0, 0.0, 0.9, ObjectClass::Vehicle, 0),
                det(0.1, 0.0, 0.8, ObjectClass::Person, 0),
            ],
        )];
        assert_eq!(deduplicate(&measurements, 2.5).len(), 2);
    }

    /// Independent oracle: repeated linear scan for the best unclaimed
    /// detection instead of a pre-sorted pass.
    fn dedup_oracle(measurements: &[MeasurementSet], eps: f64) -> Vec<UniqueObject> {
        let mut pool: Vec<(usize, usize, Detection)> = measurements
            .iter()
            .flat_map(|ms| {
                ms.detections
                    .iter()
                    .cloned()
                    .enumerate()
                    .map(move |(i, d)| (ms.uav, i, d))
            })
            .filter(|(_, _, d)| d.confidence > 0.0)
            .collect();
        let mut out = Vec::new();
        while !pool.is_empty() {
            let mut best = 0;
            for i in 1..pool.len() {
                let (bu, bi, ref bd) = pool[best];
                let (cu, ci, ref cd) = pool[i];
                let better = cd.confidence > bd.confidence
                    || (cd.confidence == bd.confidence && (cu, ci) < (bu, bi));
                if better {
                    best = i;
                }
            }
            let (_, _, seed) = pool[best].clone();
            let mut members: Vec<(usize, usize)> = Vec::new();
            pool.retain(|(u, i, d)| {
                let merge = d.class_label == seed.class_label
                    && (d.estimated_position - seed.estimated_position).norm() <= eps;
                if merge {
                    members.push((*u, *i));
                }
                !merge
            });
            members.sort_unstable();
            out.push(UniqueObject {
                representative_position: seed.estimated_position,
                class_label: seed.class_label,
                members,
            });
        }
        out
    }

    #[test]
    fn greedy_dedup_matches_linear_scan_oracle() {
        let mut rng = crate::rng::stream(17, crate::rng::Domain::World, 4, 0);
        for _ in 0..60 {
            let n_uavs = rng.random_range(1..4usize);
            let measurements: Vec<MeasurementSet> = (0..n_uavs)
                .map(|u| {
                    let k = rng.random_range(0..6usize);
                    set(
                        u,
                        (0..k)
                            .map(|_| {
                                let class = if rng.random_bool(0.5) {
                                    ObjectClass::Vehicle
                                } else {
                                    ObjectClass::Person
                                };
                                det(
                                    rng.random_range(-5.0..5.0),
                                    rng.random_range(-5.0..5.0),
                                    // Quantized so confidence ties actually occur.
                                    (rng.random_range(0..10) as f64) / 10.0,
                                    class,
                                    u,
                                )
                            })
                            .collect(),
                    )
                })
                .collect();
            let got = deduplicate(&measurements, 2.5);
            let want = dedup_oracle(&measurements, 2.5);
            assert_eq!(
                serde_json::to_string(&got).unwrap(),
                serde_json::to_string(&want).unwrap()
            );
        }
    }

    #[test]
    fn matrix_single_detector_column() {
        let measurements = vec![
            set(0, vec![]),
            set(1, vec![]),
            set(2, vec![det(1.0, 1.0, 0.7, ObjectClass::Person, 2)]),
            set(3, vec![]),
        ];
        let unique = deduplicate(&measurements, 2.5);
        let c = build_confidence_matrix(&unique, &measurements).unwrap();
        assert_eq!(c.n_uavs, 4);
        assert_eq!(c.n_objects(), 1);
        let col: Vec<f64> = c.entries.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![0.0, 0.0, 0.7, 0.0]);
    }

    #[test]
    fn matrix_two_detectors_share_a_column() {
        let measurements = vec![
            set(0, vec![]),
            set(1, vec![det(0.0, 0.0, 0.9, ObjectClass::Vehicle, 1)]),
            set(2, vec![]),
            set(3, vec![det(0.5, 0.0, 0.6, ObjectClass::Vehicle, 3)]),
        ];
        let unique = deduplicate(&measurements, 2.5);
        assert_eq!(unique.len(), 1);
        let c = build_confidence_matrix(&unique, &measurements).unwrap();
        assert_relative_eq!(c.entries[1][0], 0.9);
        assert_relative_eq!(c.entries[3][0], 0.6);
        assert_relative_eq!(c.entries[0][0], 0.0);
        assert_relative_eq!(objective(&c), 0.9);
    }

    #[test]
    fn matrix_rejects_dangling_members() {
        let measurements = vec![set(0, vec![det(0.0, 0.0, 0.5, ObjectClass::Person, 0)])];
        let bogus = vec![UniqueObject {
            representative_position: Point3::new(0.0, 0.0, 0.0),
            class_label: ObjectClass::Person,
            members: vec![(0, 3)],
        }];
        assert!(build_confidence_matrix(&bogus, &measurements).is_err());
    }

    #[test]
    fn objective_examples() {
        let empty = ConfidenceMatrix {
            n_uavs: 3,
            entries: vec![vec![]; 3],
        };
        assert_relative_eq!(objective(&empty), 0.0);

        let c = ConfidenceMatrix {
            n_uavs: 2,
            entries: vec![vec![0.9, 0.2], vec![0.1, 0.8]],
        };
        assert_relative_eq!(objective(&c), 1.7);
    }

    #[test]
    fn objective_matches_naive_loop_on_random_matrices() {
        let mut rng = crate::rng::stream(23, crate::rng::Domain::World, 5, 0);
        for _ in 0..100 {
            let (n, b) = (5, 40);
            let entries: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..b).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let c = ConfidenceMatrix { n_uavs: n, entries: entries.clone() };
            let mut naive = 0.0;
            for j in 0..b {
                let mut best = 0.0f64;
                for row in &entries {
                    if row[j] > best {
                        best = row[j];
                    }
                }
                naive += best;
            }
            assert_relative_eq!(objective(&c), naive, max_relative = 1e-15);
        }
    }

    #[test]
    fn far_apart_detections_sum_their_confidences() {
        let vals = [0.3, 0.55, 0.7, 0.45];
        let measurements = vec![set(
            0,
            vals.iter()
                .enumerate()
                .map(|(i, &v)| det(i as f64 * 50.0, 0.0, v, ObjectClass::Vehicle, 0))
                .collect(),
        )];
        assert_relative_eq!(objective_of(&measurements, 2.5), vals.iter().sum::<f64>());
    }

    #[test]
    fn shared_object_scores_best_confidence() {
        let measurements: Vec<MeasurementSet> = (0..4)
            .map(|u| set(u, vec![det(0.0, 0.1 * u as f64, 0.4 + 0.1 * u as f64, ObjectClass::Person, u)]))
            .collect();
        assert_relative_eq!(objective_of(&measurements, 2.5), 0.7);
    }

    #[test]
    fn adding_far_detection_never_decreases_objective() {
        let mut rng = crate::rng::stream(31, crate::rng::Domain::World, 6, 0);
        for _ in 0..50 {
            let base: Vec<MeasurementSet> = (0..3)
                .map(|u| {
                    set(
                        u,
                        (0..rng.random_range(0..5usize))
                            .map(|_| {
                                det(
                                    rng.random_range(-10.0..10.0),
                                    rng.random_range(-10.0..10.0),
                                    rng.random_range(0.05..1.0),
                                    ObjectClass::Vehicle,
                                    u,
                                )
                            })
                            .collect(),
                    )
                })
                .collect();
            let before = objective_of(&base, 2.5);
            // A new detection farther than epsilon from everything.
            let mut extended = base.clone();
            extended[0]
                .detections
                .push(det(500.0, 500.0, rng.random_range(0.05..1.0), ObjectClass::Vehicle, 0));
            let after = objective_of(&extended, 2.5);
            assert!(after >= before, "objective dropped from {before} to {after}");
        }
    }

    #[test]
    fn permutation_of_uavs_preserves_objective() {
        let measurements = vec![
            set(0, vec![det(0.0, 0.0, 0.8, ObjectClass::Vehicle, 0)]),
            set(1, vec![det(0.4, 0.0, 0.6, ObjectClass::Vehicle, 1)]),
            set(2, vec![det(9.0, 9.0, 0.5, ObjectClass::Person, 2)]),
        ];
        let mut swapped = vec![measurements[2].clone(), measurements[0].clone(), measurements[1].clone()];
        // Relabel so uav fields match positions after the shuffle.
        for (i, ms) in swapped.iter_mut().enumerate() {
            ms.uav = i;
            for d in &mut ms.detections {
                d.detector = i;
            }
        }
        assert_relative_eq!(objective_of(&measurements, 2.5), objective_of(&swapped, 2.5));
    }

    #[test]
    fn duplicate_swarms_collapse() {
        let one = vec![set(0, vec![det(0.0, 0.0, 0.8, ObjectClass::Vehicle, 0)])];
        let four: Vec<MeasurementSet> = (0..4)
            .map(|u| set(u, vec![det(0.0, 0.0, 0.8, ObjectClass::Vehicle, u)]))
            .collect();
        assert_relative_eq!(objective_of(&one, 2.5), objective_of(&four, 2.5));
    }
}
