//! Poses, camera geometry, obstacles, and region boundaries.
//!
//! Everything here is pure geometry: total functions over immutable values,
//! shared freely across threads.

use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::CoreError;

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = a - two_pi * ((a + PI) / two_pi).floor();
    // floor() rounding can land exactly on +pi for inputs just below the seam
    if w >= PI {
        w - two_pi
    } else {
        w
    }
}

/// One UAV's decision variables: planar position plus heading.
///
/// The yaw is stored normalized to `[-pi, pi)`; constructing a pose
/// normalizes it, so normalizing twice is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn xy(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    /// Planar distance between two poses.
    pub fn xy_distance(&self, other: &Pose) -> f64 {
        (self.xy() - other.xy()).norm()
    }

    /// Smallest signed yaw change from `other` to `self`, wrap-aware.
    pub fn yaw_delta(&self, other: &Pose) -> f64 {
        wrap_angle(self.yaw - other.yaw)
    }
}

/// Fixed per-UAV operating heights: UAV `i` flies at `base + i * increment`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AltitudeAssignment {
    pub base_altitude: f64,
    pub increment: f64,
}

impl Default for AltitudeAssignment {
    fn default() -> Self {
        Self {
            base_altitude: 14.0,
            increment: 0.5,
        }
    }
}

impl AltitudeAssignment {
    pub fn new(base_altitude: f64, increment: f64) -> Result<Self, CoreError> {
        if base_altitude <= 0.0 || increment <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "altitudes must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self {
            base_altitude,
            increment,
        })
    }

    pub fn altitude_of(&self, uav: usize) -> f64 {
        self.base_altitude + uav as f64 * self.increment
    }
}

/// Forward-mounted camera: pitched below the horizon, symmetric fields of
/// view about the optical axis, finite range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraModel {
    /// Pitch of the optical axis in radians; negative looks down.
    pub pitch: f64,
    pub horizontal_fov: f64,
    pub vertical_fov: f64,
    pub max_range: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            pitch: -PI / 4.0,
            horizontal_fov: PI / 2.0,
            vertical_fov: PI / 3.0,
            max_range: 60.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), CoreError> {
        let fov_ok = |f: f64| f > 0.0 && f < PI;
        if !fov_ok(self.horizontal_fov) || !fov_ok(self.vertical_fov) || self.max_range <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "camera fov must lie in (0, pi) and max_range must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Unit vector of the optical axis for a given yaw: yaw about +z,
    /// then pitch about the camera's right axis.
    pub fn axis(&self, yaw: f64) -> Vector3<f64> {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        Vector3::new(cp * cy, cp * sy, sp)
    }
}

/// True when `point` lies inside the camera frustum of a UAV at `pose`
/// flying at `altitude`.
pub fn in_frustum(pose: &Pose, altitude: f64, cam: &CameraModel, point: &Point3<f64>) -> bool {
    let origin = Point3::new(pose.x, pose.y, altitude);
    let v = point - origin;
    let range = v.norm();
    if range > cam.max_range {
        return false;
    }
    let forward = cam.axis(pose.yaw);
    // Right axis is horizontal and unaffected by pitch.
    let (sy, cy) = pose.yaw.sin_cos();
    let right = Vector3::new(sy, -cy, 0.0);
    let up = right.cross(&forward);

    let vf = v.dot(&forward);
    if vf <= 0.0 {
        return range == 0.0; // the camera origin itself counts as visible
    }
    let va = v.dot(&right).atan2(vf).abs();
    let ve = v.dot(&up).atan2(vf).abs();
    va <= cam.horizontal_fov / 2.0 && ve <= cam.vertical_fov / 2.0
}

/// Axis-aligned box obstacle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Obstacle {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Obstacle {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Result<Self, CoreError> {
        if min.x > max.x || min.y > max.y || min.z > max.z {
            return Err(CoreError::InvalidConfig(
                "obstacle min corner must be componentwise <= max corner".into(),
            ));
        }
        Ok(Self { min, max })
    }

    /// True when `p` lies strictly inside the box.
    pub fn contains_open(&self, p: &Point3<f64>) -> bool {
        p.x > self.min.x
            && p.x < self.max.x
            && p.y > self.min.y
            && p.y < self.max.y
            && p.z > self.min.z
            && p.z < self.max.z
    }

    /// Euclidean distance from `p` to the box (zero inside or on it).
    pub fn distance_to(&self, p: &Point3<f64>) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        let dz = (self.min.z - p.z).max(0.0).max(p.z - self.max.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Slab test against the *open* box: a segment that only grazes a face,
    /// edge, or corner does not intersect.
    pub fn segment_intersects(&self, a: &Point3<f64>, b: &Point3<f64>) -> bool {
        let d = b - a;
        let mut t_enter = 0.0f64;
        let mut t_exit = 1.0f64;
        for axis in 0..3 {
            let (o, dd, lo, hi) = (a[axis], d[axis], self.min[axis], self.max[axis]);
            if dd == 0.0 {
                // Parallel to this slab: must start strictly inside it.
                if o <= lo || o >= hi {
                    return false;
                }
            } else {
                let inv = 1.0 / dd;
                let (t1, t2) = ((lo - o) * inv, (hi - o) * inv);
                let (near, far) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                t_enter = t_enter.max(near);
                t_exit = t_exit.min(far);
                if t_enter >= t_exit {
                    return false;
                }
            }
        }
        true
    }
}

/// True when the open segment `a`-`b` is not blocked by any obstacle.
pub fn line_of_sight(a: &Point3<f64>, b: &Point3<f64>, obstacles: &[Obstacle]) -> bool {
    obstacles.iter().all(|o| !o.segment_intersects(a, b))
}

/// Operational area boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Circle {
        center: Point2<f64>,
        radius: f64,
    },
    /// Simple polygon, vertices in counterclockwise order.
    Polygon {
        vertices: Vec<Point2<f64>>,
    },
}

impl Region {
    pub fn circle(cx: f64, cy: f64, radius: f64) -> Result<Self, CoreError> {
        if radius <= 0.0 {
            return Err(CoreError::InvalidConfig("circle radius must be positive".into()));
        }
        Ok(Region::Circle {
            center: Point2::new(cx, cy),
            radius,
        })
    }

    pub fn polygon(vertices: Vec<Point2<f64>>) -> Result<Self, CoreError> {
        if vertices.len() < 3 {
            return Err(CoreError::InvalidConfig(
                "polygon needs at least 3 vertices".into(),
            ));
        }
        if polygon_self_intersects(&vertices) {
            return Err(CoreError::InvalidConfig("polygon must be simple".into()));
        }
        if shoelace_area(&vertices) <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "polygon vertices must be counterclockwise".into(),
            ));
        }
        Ok(Region::Polygon { vertices })
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        match self {
            Region::Circle { radius, .. } if *radius <= 0.0 => Err(CoreError::InvalidConfig(
                "circle radius must be positive".into(),
            )),
            Region::Polygon { vertices } => {
                Self::polygon(vertices.clone()).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// True when `p` is inside the region; boundary points count as inside.
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        match self {
            Region::Circle { center, radius } => (p - center).norm() <= *radius,
            Region::Polygon { vertices } => {
                if point_on_polygon_boundary(p, vertices) {
                    return true;
                }
                // Even-odd crossing count.
                let mut inside = false;
                let n = vertices.len();
                let mut j = n - 1;
                for i in 0..n {
                    let (vi, vj) = (vertices[i], vertices[j]);
                    if (vi.y > p.y) != (vj.y > p.y) {
                        let x_cross = (vj.x - vi.x) * (p.y - vi.y) / (vj.y - vi.y) + vi.x;
                        if p.x < x_cross {
                            inside = !inside;
                        }
                    }
                    j = i;
                }
                inside
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point2<f64>, Point2<f64>) {
        match self {
            Region::Circle { center, radius } => (
                Point2::new(center.x - radius, center.y - radius),
                Point2::new(center.x + radius, center.y + radius),
            ),
            Region::Polygon { vertices } => {
                let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
                let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for v in vertices {
                    min.x = min.x.min(v.x);
                    min.y = min.y.min(v.y);
                    max.x = max.x.max(v.x);
                    max.y = max.y.max(v.y);
                }
                (min, max)
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Region::Circle { radius, .. } => PI * radius * radius,
            Region::Polygon { vertices } => shoelace_area(vertices),
        }
    }
}

/// Signed area; positive for counterclockwise vertex order.
pub fn shoelace_area(vertices: &[Point2<f64>]) -> f64 {
    let n = vertices.len();
    let mut sum = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        sum += a.x * b.y - b.x * a.y;
    }
    sum / 2.0
}

fn point_on_polygon_boundary(p: &Point2<f64>, vertices: &[Point2<f64>]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
        {
            return true;
        }
    }
    false
}

fn segments_properly_intersect(
    a: Point2<f64>,
    b: Point2<f64>,
    c: Point2<f64>,
    d: Point2<f64>,
) -> bool {
    let orient = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>| {
        (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    };
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn polygon_self_intersects(vertices: &[Point2<f64>]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 1)..n {
            // Adjacent edges share a vertex; skip them.
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}
