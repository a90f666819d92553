//! Synthetic operational worlds: objects of interest, box obstacles, and
//! region presets, all generated deterministically from a seed.

use nalgebra::{Point2, Point3};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::geom::{Obstacle, Region};
use crate::rng::{self, Domain};

/// Object category; detections only merge within a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Person,
    Vehicle,
    Structure,
}

impl ObjectClass {
    /// Base detectability range for the class: how well an ideal,
    /// close-up, on-axis view scores.
    fn quality_range(self) -> (f64, f64) {
        match self {
            ObjectClass::Person => (0.55, 0.75),
            ObjectClass::Vehicle => (0.70, 0.90),
            ObjectClass::Structure => (0.80, 0.95),
        }
    }
}

/// Ground-truth object. The optimizer never sees these directly; it only
/// receives noisy detections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldObject {
    /// Ground-truth identity, for test oracles only.
    pub id: u64,
    pub class_label: ObjectClass,
    /// z = 0 for all ground objects.
    pub position: Point3<f64>,
    /// Peak detection confidence for an ideal view, in (0, 1].
    pub base_quality: f64,
}

/// Centerline of one straight road, ground level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoadSegment {
    pub a: Point2<f64>,
    pub b: Point2<f64>,
}

impl RoadSegment {
    pub fn distance_to(&self, p: &Point2<f64>) -> f64 {
        let d = self.b - self.a;
        let len2 = d.norm_squared();
        if len2 == 0.0 {
            return (p - self.a).norm();
        }
        let t = ((p - self.a).dot(&d) / len2).clamp(0.0, 1.0);
        (p - (self.a + d * t)).norm()
    }

    pub fn point_at(&self, t: f64) -> Point2<f64> {
        self.a + (self.b - self.a) * t
    }
}

/// How objects are scattered over the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Uniform,
    RoadGrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldSpec {
    pub region: Region,
    pub n_objects: usize,
    pub n_obstacles: usize,
    pub layout: Layout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct World {
    pub region: Region,
    pub objects: Vec<WorldObject>,
    pub obstacles: Vec<Obstacle>,
    /// Road centerlines when layout was `RoadGrid`, empty otherwise.
    pub roads: Vec<RoadSegment>,
    pub rng_seed: u64,
}

/// Named operational-area presets.
pub fn region_preset(name: &str) -> Result<Region, CoreError> {
    match name {
        "area1" => Region::circle(0.0, 0.0, 70.0),
        // L-shaped lots: a base rectangle plus a column on the left, with the
        // column height solved so the total area lands on the target exactly.
        "area2" => {
            let (a, b, c) = (240.0, 110.0, 100.0);
            let d = b + (37_892.3 - a * b) / c;
            l_shape(a, b, c, d)
        }
        "area3" => {
            let (a, b, c) = (280.0, 150.0, 120.0);
            let d = b + (56_894.9 - a * b) / c;
            l_shape(a, b, c, d)
        }
        other => Err(CoreError::InvalidConfig(format!(
            "unknown region preset {other:?}; expected area1, area2, or area3"
        ))),
    }
}

/// CCW L-shape of width `a`, base height `b`, left-column width `c`, total
/// height `d`, translated so its bounding box is centered on the origin.
fn l_shape(a: f64, b: f64, c: f64, d: f64) -> Result<Region, CoreError> {
    let (ox, oy) = (a / 2.0, d / 2.0);
    Region::polygon(vec![
        Point2::new(0.0 - ox, 0.0 - oy),
        Point2::new(a - ox, 0.0 - oy),
        Point2::new(a - ox, b - oy),
        Point2::new(c - ox, b - oy),
        Point2::new(c - ox, d - oy),
        Point2::new(0.0 - ox, d - oy),
    ])
}

const ROAD_SPACING: f64 = 40.0;
const ROAD_JITTER_SIGMA: f64 = 1.5;
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

pub fn generate_world(spec: &WorldSpec, seed: u64) -> Result<World, CoreError> {
    spec.region.validate()?;
    let mut rng = rng::stream(seed, Domain::World, 0, 0);
    let (bb_min, bb_max) = spec.region.bounding_box();

    let roads = match spec.layout {
        Layout::Uniform => Vec::new(),
        Layout::RoadGrid => {
            let mut roads = Vec::new();
            let off_x = rng.random_range(0.0..ROAD_SPACING);
            let off_y = rng.random_range(0.0..ROAD_SPACING);
            let mut x = bb_min.x + off_x;
            while x < bb_max.x {
                roads.push(RoadSegment {
                    a: Point2::new(x, bb_min.y),
                    b: Point2::new(x, bb_max.y),
                });
                x += ROAD_SPACING;
            }
            let mut y = bb_min.y + off_y;
            while y < bb_max.y {
                roads.push(RoadSegment {
                    a: Point2::new(bb_min.x, y),
                    b: Point2::new(bb_max.x, y),
                });
                y += ROAD_SPACING;
            }
            if roads.is_empty() {
                return Err(CoreError::WorldGeneration(
                    "region too small for the road grid".into(),
                ));
            }
            roads
        }
    };

    // Obstacles first so object placement can avoid them. Footprints keep
    // clear of road centerlines so streets stay observable.
    let mut obstacles = Vec::with_capacity(spec.n_obstacles);
    let mut attempts = 0;
    while obstacles.len() < spec.n_obstacles {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(CoreError::WorldGeneration(format!(
                "could not place {} obstacles inside the region",
                spec.n_obstacles
            )));
        }
        let cx = rng.random_range(bb_min.x..bb_max.x);
        let cy = rng.random_range(bb_min.y..bb_max.y);
        let hx: f64 = rng.random_range(3.0..8.0);
        let hy: f64 = rng.random_range(3.0..8.0);
        let height = rng.random_range(6.0..18.0);
        let center = Point2::new(cx, cy);
        if !spec.region.contains(&center) {
            continue;
        }
        let clear_of_roads = roads
            .iter()
            .all(|r| r.distance_to(&center) > hx.max(hy) + 4.0);
        if !clear_of_roads {
            continue;
        }
        obstacles.push(Obstacle::new(
            Point3::new(cx - hx, cy - hy, 0.0),
            Point3::new(cx + hx, cy + hy, height),
        )?);
    }

    let lateral = Normal::new(0.0, ROAD_JITTER_SIGMA).expect("sigma is positive");
    let mut objects = Vec::with_capacity(spec.n_objects);
    let mut attempts = 0;
    while objects.len() < spec.n_objects {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(CoreError::WorldGeneration(format!(
                "could not place {} objects inside the region",
                spec.n_objects
            )));
        }
        let p = match spec.layout {
            Layout::Uniform => Point2::new(
                rng.random_range(bb_min.x..bb_max.x),
                rng.random_range(bb_min.y..bb_max.y),
            ),
            Layout::RoadGrid => {
                let road = roads[rng.random_range(0..roads.len())];
                let on_road = road.point_at(rng.random_range(0.0..1.0));
                Point2::new(on_road.x + rng.sample(lateral), on_road.y + rng.sample(lateral))
            }
        };
        if !spec.region.contains(&p) {
            continue;
        }
        // Objects inside an obstacle footprint would be permanently hidden.
        let buried = obstacles.iter().any(|o| {
            p.x > o.min.x - 0.5 && p.x < o.max.x + 0.5 && p.y > o.min.y - 0.5 && p.y < o.max.y + 0.5
        });
        if buried {
            continue;
        }
        let class_label = {
            let u: f64 = rng.random_range(0.0..1.0);
            if u < 0.45 {
                ObjectClass::Person
            } else if u < 0.80 {
                ObjectClass::Vehicle
            } else {
                ObjectClass::Structure
            }
        };
        let (q_lo, q_hi) = class_label.quality_range();
        objects.push(WorldObject {
            id: objects.len() as u64,
            class_label,
            position: Point3::new(p.x, p.y, 0.0),
            base_quality: rng.random_range(q_lo..q_hi),
        });
    }

    Ok(World {
        region: spec.region.clone(),
        objects,
        obstacles,
        roads,
        rng_seed: seed,
    })
}

/// Apply one step of Gaussian random-walk drift to every object's ground
/// position. Each object draws from its own substream keyed by `(master,
/// step, id)`, so drift is reproducible regardless of object count or
/// iteration order. A sigma of zero leaves the world untouched without
/// consuming any randomness.
pub fn drift_objects(world: &mut World, sigma: f64, master: u64, step: u64) {
    if sigma == 0.0 {
        return;
    }
    let walk = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    for obj in &mut world.objects {
        let mut rng = rng::substream(master, Domain::Drift, step, 0, obj.id);
        obj.position.x += rng.sample(walk);
        obj.position.y += rng.sample(walk);
    }
}
