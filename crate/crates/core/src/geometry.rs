//! Planar points, poses and the few convex-geometry helpers shared by the
//! sensor model, the internal simulator and the ground-truth executor.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn bearing(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn mirrored(self) -> Point2 {
        Point2::new(self.x, -self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Position plus heading. The heading is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Point2,
    pub heading: f64,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Point2::ORIGIN,
        heading: 0.0,
    };

    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    pub fn direction(&self) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        Point2::new(c, s)
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn transform_point(&self, local: Point2) -> Point2 {
        self.position + local.rotated(self.heading)
    }

    /// Maps a parent-frame point into this pose's ego frame.
    pub fn inverse_transform_point(&self, world: Point2) -> Point2 {
        (world - self.position).rotated(-self.heading)
    }

    /// Composes `self ∘ local`: `local` is a pose in this pose's frame.
    pub fn compose(&self, local: &Pose) -> Pose {
        Pose::new_unwrapped(
            self.transform_point(local.position),
            self.heading + local.heading,
        )
    }

    /// Expresses `other` (parent frame) relative to this pose.
    pub fn relative(&self, other: &Pose) -> Pose {
        Pose::new_unwrapped(
            self.inverse_transform_point(other.position),
            other.heading - self.heading,
        )
    }

    fn new_unwrapped(position: Point2, heading: f64) -> Pose {
        Pose {
            position,
            heading: normalize_angle(heading),
        }
    }

    /// Reflection across the x axis of the frame the pose lives in.
    pub fn mirrored(&self) -> Pose {
        Pose::new_unwrapped(self.position.mirrored(), -self.heading)
    }
}

/// Rectangular robot outline, centred on the pose and aligned with the heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub half_width: f64,
    pub half_length: f64,
}

impl Footprint {
    pub fn new(half_width: f64, half_length: f64) -> crate::Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(crate::error::invalid("half_width", "must be > 0"));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(crate::error::invalid("half_length", "must be > 0"));
        }
        Ok(Self {
            half_width,
            half_length,
        })
    }

    /// Radius of the disc swept by the footprint rotating about its centre.
    pub fn circumradius(&self) -> f64 {
        self.half_width.hypot(self.half_length)
    }

    /// Corners in counter-clockwise order, in the parent frame of `pose`.
    pub fn corners(&self, pose: &Pose, inflation: f64) -> [Point2; 4] {
        let hl = self.half_length + inflation;
        let hw = self.half_width + inflation;
        [
            pose.transform_point(Point2::new(hl, hw)),
            pose.transform_point(Point2::new(-hl, hw)),
            pose.transform_point(Point2::new(-hl, -hw)),
            pose.transform_point(Point2::new(hl, -hw)),
        ]
    }
}

impl Default for Footprint {
    fn default() -> Self {
        Self {
            half_width: 0.075,
            half_length: 0.1,
        }
    }
}

/// Closed convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Accepts either winding; rejects degenerate or non-convex input.
    pub fn new(mut vertices: Vec<Point2>) -> crate::Result<Self> {
        use crate::error::invalid;
        if vertices.len() < 3 {
            return Err(invalid("obstacles", "polygon needs at least 3 vertices"));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(invalid("obstacles", "non-finite vertex"));
        }
        let area2: f64 = (0..vertices.len())
            .map(|i| vertices[i].cross(vertices[(i + 1) % vertices.len()]))
            .sum();
        if area2.abs() < 1e-12 {
            return Err(invalid("obstacles", "polygon vertices are collinear"));
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) < -1e-12 {
                return Err(invalid("obstacles", "polygon is not convex"));
            }
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(min: Point2, max: Point2) -> crate::Result<Self> {
        Self::new(vec![
            min,
            Point2::new(max.x, min.y),
            max,
            Point2::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn translated(&self, offset: Point2) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&v| v * factor).collect(),
        }
    }

    /// Closed containment (boundary counts as inside).
    pub fn contains(&self, p: Point2) -> bool {
        self.edges().all(|(a, b)| (b - a).cross(p - a) >= 0.0)
    }

    /// Strict interior containment.
    pub fn contains_strict(&self, p: Point2) -> bool {
        self.edges().all(|(a, b)| (b - a).cross(p - a) > 0.0)
    }

    pub fn distance_to_boundary(&self, p: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Separating-axis overlap test against another convex polygon given by
    /// its counter-clockwise vertices.
    pub fn overlaps(&self, other: &[Point2]) -> bool {
        !(has_separating_edge(&self.vertices, other) || has_separating_edge(other, &self.vertices))
    }
}

fn has_separating_edge(poly: &[Point2], other: &[Point2]) -> bool {
    let n = poly.len();
    (0..n).any(|i| {
        let a = poly[i];
        let edge = poly[(i + 1) % n] - a;
        other.iter().all(|&p| edge.cross(p - a) < 0.0)
    })
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Intersection of two closed segments, if they cross.
pub fn segment_intersection(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> Option<Point2> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = (q0 - p0).cross(s) / denom;
    let u = (q0 - p0).cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(p0 + r * t)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_wraps_into_half_open_interval() {
        assert_abs_diff_eq!(normalize_angle(PI), PI);
        assert_abs_diff_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(-5.0 * PI), PI, epsilon = 1e-12);
    }

    #[test]
    fn transform_round_trip() {
        let pose = Pose::new(1.0, -2.0, 0.7);
        let p = Point2::new(0.3, 0.4);
        let back = pose.inverse_transform_point(pose.transform_point(p));
        assert_abs_diff_eq!(back.x, p.x, epsilon = 1e-12);
        assert_abs_diff_eq!(back.y, p.y, epsilon = 1e-12);

        let other = Pose::new(-0.5, 0.25, -2.0);
        let rel = pose.relative(&other);
        let again = pose.compose(&rel);
        assert_abs_diff_eq!(again.position.x, other.position.x, epsilon = 1e-12);
        assert_abs_diff_eq!(again.heading, other.heading, epsilon = 1e-12);
    }

    #[test]
    fn polygon_rejects_degenerate_and_concave() {
        let collinear = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ];
        assert!(ConvexPolygon::new(collinear).is_err());
        let concave = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(ConvexPolygon::new(concave).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let cw = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        let poly = ConvexPolygon::new(cw).unwrap();
        assert!(poly.contains(Point2::new(0.2, 0.2)));
        assert!(!poly.contains(Point2::new(0.8, 0.8)));
    }

    #[test]
    fn sat_overlap() {
        let a = ConvexPolygon::rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)).unwrap();
        let fp = Footprint::default();
        assert!(a.overlaps(&fp.corners(&Pose::new(1.05, 0.5, 0.0), 0.0)));
        assert!(!a.overlaps(&fp.corners(&Pose::new(1.2, 0.5, 0.0), 0.0)));
        // rotated footprint near a corner, separated only along a footprint axis
        assert!(!a.overlaps(&fp.corners(&Pose::new(1.12, 1.12, PI / 4.0), 0.0)));
    }
}
