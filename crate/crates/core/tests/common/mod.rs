#![allow(dead_code)]

use clplan::geometry::{point_segment_distance, ConvexPolygon, Footprint, Point2, Pose};
use clplan::world::{LidarModel, Scenario};
use rand::Rng;

/// Random cluttered scenario: the robot at an arbitrary pose, the goal
/// somewhere ahead of it, and up to `max_boxes` rotated rectangles between
/// them that keep clear of the start footprint and the goal.
pub fn random_scenario<R: Rng>(rng: &mut R, max_boxes: usize) -> Scenario {
    let footprint = Footprint::default();
    let start = Pose::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    );
    let goal_local =
        Point2::new(rng.random_range(0.5..1.5), 0.0).rotated(rng.random_range(-1.2..1.2));
    let goal = start.transform_point(goal_local);
    let keep_out = footprint.circumradius() + 0.06;
    let mut obstacles = Vec::new();
    let count = rng.random_range(0..=max_boxes);
    while obstacles.len() < count {
        let centre = Point2::new(rng.random_range(0.1..1.6), rng.random_range(-0.8..0.8));
        let (hx, hy) = (rng.random_range(0.02..0.2), rng.random_range(0.02..0.2));
        let spin = rng.random_range(0.0..std::f64::consts::PI);
        let corners: Vec<Point2> = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
            .into_iter()
            .map(|(x, y)| start.transform_point(centre + Point2::new(x, y).rotated(spin)))
            .collect();
        let poly = ConvexPolygon::new(corners).expect("rectangle is convex");
        let near = |p: Point2, r: f64| {
            poly.contains(p)
                || poly
                    .edges()
                    .any(|(a, b)| point_segment_distance(p, a, b) < r)
        };
        if near(start.position, keep_out) || near(goal, 0.02) {
            continue;
        }
        obstacles.push(poly);
    }
    let lidar = LidarModel {
        beam_count: 180,
        ..LidarModel::default()
    };
    Scenario::new(start, footprint, goal, obstacles, lidar).expect("generated scenario is valid")
}
