use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ExecutionConfig, ExecutionTrace, Recorder};
use crate::geometry::Point2;
use crate::world::{ray_cast_scan, Scenario};

/// Single always-on goal-seeking controller with one-loop-ahead obstacle
/// detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactiveParams {
    /// m/s
    pub linear_speed: f64,
    /// rad/s
    pub angular_speed: f64,
    /// Detection range beyond the robot's front edge, m.
    pub lookahead: f64,
    /// Lateral margin added to the footprint half-width for detection, m.
    pub clearance: f64,
    /// Goal bearing above which the robot rotates in place before driving, rad.
    pub align_threshold: f64,
    /// Proportional steering gain while driving, 1/s.
    pub steering_gain: f64,
    /// Give up after this long without getting 1 cm closer to the goal, s.
    pub stuck_timeout: f64,
    /// s
    pub time_budget: f64,
}

impl Default for ReactiveParams {
    fn default() -> Self {
        Self {
            linear_speed: 0.2,
            angular_speed: 1.0,
            lookahead: 0.3,
            clearance: 0.05,
            align_threshold: 0.3,
            steering_gain: 2.0,
            stuck_timeout: 5.0,
            time_budget: 60.0,
        }
    }
}

const PROGRESS_STEP: f64 = 0.01;

/// Drives toward the goal, rotating away from whatever enters the corridor
/// ahead until it clears. Never simulates ahead.
pub fn reactive_baseline<R: Rng + ?Sized>(
    scenario: &Scenario,
    params: &ReactiveParams,
    config: &ExecutionConfig,
    rng: &mut R,
) -> ExecutionTrace {
    let dt = config.time_step;
    let fp = scenario.footprint;
    let reach = fp.half_length + params.lookahead;
    let half_width = fp.half_width + params.clearance;
    let mut rec = Recorder::new(scenario, dt);
    let mut avoiding: Option<f64> = None;
    let mut best = rec.pose.position.distance(scenario.goal);
    let mut last_progress = 0.0;

    while rec.t < params.time_budget {
        let goal = rec.pose.inverse_transform_point(scenario.goal);
        let distance = goal.norm();
        if distance <= config.goal_radius {
            break;
        }
        if distance < best - PROGRESS_STEP {
            best = distance;
            last_progress = rec.t;
        } else if rec.t - last_progress > params.stuck_timeout {
            break;
        }
        // a robot driven into an obstacle has no usable scan
        let Ok(scan) = ray_cast_scan(scenario, &rec.pose, rng) else {
            break;
        };
        let blocking: Vec<Point2> = scan
            .points
            .iter()
            .copied()
            .filter(|p| p.x > 0.0 && p.x <= reach && p.y.abs() <= half_width)
            .collect();

        let command = if blocking.is_empty() {
            avoiding = None;
            let bearing = goal.bearing();
            if bearing.abs() > params.align_threshold {
                (0.0, params.angular_speed.copysign(bearing))
            } else {
                let w = (params.steering_gain * bearing)
                    .clamp(-params.angular_speed, params.angular_speed);
                (params.linear_speed.min(distance / dt), w)
            }
        } else {
            let direction = *avoiding.get_or_insert_with(|| {
                let n = blocking.len() as f64;
                let centroid = blocking.iter().fold(Point2::ORIGIN, |acc, &p| acc + p) * (1.0 / n);
                // turn away from the obstacle; dead ahead defaults to the left
                if centroid.y > 0.0 {
                    -1.0
                } else {
                    1.0
                }
            });
            (0.0, direction * params.angular_speed)
        };
        let (v, w) = config.noise.perturb(command, rng);
        rec.step(v, w);
    }
    rec.finish(config.goal_radius, config.noise)
}
