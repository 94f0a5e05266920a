//! Ground-truth scenarios, the synthetic LiDAR and task-corridor filtering of
//! the ego-centric point cloud.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ConvexPolygon, Footprint, Point2, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarModel {
    pub beam_count: usize,
    pub max_range: f64,
    pub angular_span: f64,
    pub range_noise_sd: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            beam_count: 360,
            max_range: 4.0,
            angular_span: 2.0 * PI,
            range_noise_sd: 0.0,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<()> {
        if self.beam_count == 0 {
            return Err(invalid("beams", "must be >= 1"));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(invalid("max_range", "must be > 0"));
        }
        if !(self.angular_span > 0.0 && self.angular_span <= 2.0 * PI + 1e-12) {
            return Err(invalid("span", "must be in (0, 2pi]"));
        }
        if !(self.range_noise_sd >= 0.0 && self.range_noise_sd.is_finite()) {
            return Err(invalid("noise_sd", "must be >= 0"));
        }
        Ok(())
    }

    /// Beam bearings in the sensor frame, centred on the heading.
    pub fn bearings(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.beam_count as f64;
        (0..self.beam_count)
            .map(move |i| -self.angular_span / 2.0 + (i as f64 + 0.5) * self.angular_span / n)
    }
}

/// Ground-truth world the robot lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub robot_start: Pose,
    pub footprint: Footprint,
    pub goal: Point2,
    pub obstacles: Vec<ConvexPolygon>,
    pub lidar: LidarModel,
}

impl Scenario {
    pub fn new(
        robot_start: Pose,
        footprint: Footprint,
        goal: Point2,
        obstacles: Vec<ConvexPolygon>,
        lidar: LidarModel,
    ) -> Result<Self> {
        let scenario = Self {
            robot_start,
            footprint,
            goal,
            obstacles,
            lidar,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        Footprint::new(self.footprint.half_width, self.footprint.half_length)?;
        self.lidar.validate()?;
        if !self.goal.is_finite() {
            return Err(invalid("goal", "non-finite coordinates"));
        }
        if !self.robot_start.position.is_finite() || !self.robot_start.heading.is_finite() {
            return Err(invalid("robot", "non-finite pose"));
        }
        if self.obstacles.iter().any(|o| o.contains_strict(self.goal)) {
            return Err(invalid("goal", "lies inside an obstacle"));
        }
        Ok(())
    }

    /// Goal expressed in the robot's starting ego frame.
    pub fn goal_in_start_frame(&self) -> Point2 {
        self.robot_start.inverse_transform_point(self.goal)
    }

    pub fn start_goal_distance(&self) -> f64 {
        self.robot_start.position.distance(self.goal)
    }

    /// Shifts every obstacle independently by a uniform offset in
    /// `[-amount, amount]` along each axis.
    pub fn jittered<R: Rng + ?Sized>(&self, amount: f64, rng: &mut R) -> Scenario {
        let mut out = self.clone();
        if amount > 0.0 {
            out.obstacles = self
                .obstacles
                .iter()
                .map(|o| {
                    let dx = rng.random_range(-amount..=amount);
                    let dy = rng.random_range(-amount..=amount);
                    o.translated(Point2::new(dx, dy))
                })
                .collect();
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serialises")
    }

    /// The bundled overtaking benchmark: a wide box straight between the
    /// robot and a goal 1 m ahead, plus a wall closing off the left detour.
    pub fn overtaking() -> Scenario {
        Self::from_json_str(include_str!("../scenarios/overtaking.json"))
            .expect("bundled scenario is valid")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotEntry {
    x: f64,
    y: f64,
    theta: f64,
    half_width: f64,
    half_length: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalEntry {
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LidarEntry {
    beams: usize,
    max_range: f64,
    span: f64,
    noise_sd: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    robot: RobotEntry,
    goal: GoalEntry,
    #[serde(default)]
    obstacles: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    lidar: Option<LidarEntry>,
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(file: ScenarioFile) -> Result<Self> {
        let footprint = Footprint::new(file.robot.half_width, file.robot.half_length)?;
        let obstacles = file
            .obstacles
            .into_iter()
            .map(|poly| {
                ConvexPolygon::new(poly.into_iter().map(|[x, y]| Point2::new(x, y)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let lidar = file
            .lidar
            .map(|l| LidarModel {
                beam_count: l.beams,
                max_range: l.max_range,
                angular_span: l.span,
                range_noise_sd: l.noise_sd,
            })
            .unwrap_or_default();
        Scenario::new(
            Pose::new(file.robot.x, file.robot.y, file.robot.theta),
            footprint,
            Point2::new(file.goal.x, file.goal.y),
            obstacles,
            lidar,
        )
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            robot: RobotEntry {
                x: s.robot_start.position.x,
                y: s.robot_start.position.y,
                theta: s.robot_start.heading,
                half_width: s.footprint.half_width,
                half_length: s.footprint.half_length,
            },
            goal: GoalEntry {
                x: s.goal.x,
                y: s.goal.y,
            },
            obstacles: s
                .obstacles
                .iter()
                .map(|o| o.vertices().iter().map(|v| [v.x, v.y]).collect())
                .collect(),
            lidar: Some(LidarEntry {
                beams: s.lidar.beam_count,
                max_range: s.lidar.max_range,
                span: s.lidar.angular_span,
                noise_sd: s.lidar.range_noise_sd,
            }),
        }
    }
}

/// LiDAR returns in the robot's ego frame (robot at origin facing +x).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point2>,
}

impl PointCloud {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Re-expresses the cloud in the ego frame of `pose`, where `pose` is
    /// given in the cloud's current frame.
    pub fn to_frame(&self, pose: &Pose) -> PointCloud {
        PointCloud::new(
            self.points
                .iter()
                .map(|&p| pose.inverse_transform_point(p))
                .collect(),
        )
    }
}

/// Distance along a ray from `origin` in direction `dir` (unit) to the first
/// edge of `poly`, if any.
fn ray_polygon_hit(origin: Point2, dir: Point2, poly: &ConvexPolygon) -> Option<f64> {
    poly.edges()
        .filter_map(|(a, b)| {
            let edge = b - a;
            let denom = dir.cross(edge);
            if denom.abs() < 1e-15 {
                return None;
            }
            let w = a - origin;
            let t = w.cross(edge) / denom;
            let u = w.cross(dir) / denom;
            (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
        })
        .fold(None, |best: Option<f64>, t| {
            Some(best.map_or(t, |b| b.min(t)))
        })
}

/// Unit beam directions (sensor frame) paired with the range of their first
/// hit, for beams that hit something within `max_range`.
fn cast_beams(scenario: &Scenario, pose: &Pose) -> Result<Vec<(Point2, f64)>> {
    if scenario
        .obstacles
        .iter()
        .any(|o| o.contains_strict(pose.position))
    {
        return Err(Error::SensorOccluded);
    }
    let lidar = &scenario.lidar;
    Ok(lidar
        .bearings()
        .filter_map(|bearing| {
            let local_dir = Point2::new(bearing.cos(), bearing.sin());
            let dir = local_dir.rotated(pose.heading);
            let hit = scenario
                .obstacles
                .iter()
                .filter_map(|o| ray_polygon_hit(pose.position, dir, o))
                .fold(f64::INFINITY, f64::min);
            (hit <= lidar.max_range).then_some((local_dir, hit))
        })
        .collect())
}

/// Synthesises one scan of the ground-truth world from `pose`.
///
/// Beams that hit nothing within range produce no point. Range noise is drawn
/// from `rng` only when the model has a positive noise level.
pub fn ray_cast_scan<R: Rng + ?Sized>(
    scenario: &Scenario,
    pose: &Pose,
    rng: &mut R,
) -> Result<PointCloud> {
    let beams = cast_beams(scenario, pose)?;
    let lidar = &scenario.lidar;
    if lidar.range_noise_sd == 0.0 {
        return Ok(PointCloud::new(
            beams.into_iter().map(|(d, r)| d * r).collect(),
        ));
    }
    let noise = Normal::new(0.0, lidar.range_noise_sd).expect("finite sd");
    Ok(PointCloud::new(
        beams
            .into_iter()
            .map(|(d, r)| d * (r + noise.sample(rng)).clamp(0.0, lidar.max_range))
            .collect(),
    ))
}

/// Noise-free scan; ignores the model's noise level.
pub fn scan_noiseless(scenario: &Scenario, pose: &Pose) -> Result<PointCloud> {
    Ok(PointCloud::new(
        cast_beams(scenario, pose)?
            .into_iter()
            .map(|(d, r)| d * r)
            .collect(),
    ))
}

/// Region of the ego frame a task may sweep; points outside it are not "in
/// the way" of the task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TaskCorridor {
    /// Rectangle around the centreline that leaves `origin` along its heading
    /// for `length`, extended by `end_margin` beyond both ends.
    Strip {
        origin: Pose,
        length: f64,
        half_width: f64,
        end_margin: f64,
    },
    /// Disc swept by a footprint rotating in place.
    Disc { centre: Point2, radius: f64 },
}

impl TaskCorridor {
    pub fn contains(&self, p: Point2) -> bool {
        match *self {
            TaskCorridor::Strip {
                origin,
                length,
                half_width,
                end_margin,
            } => {
                let local = origin.inverse_transform_point(p);
                local.x >= -end_margin
                    && local.x <= length + end_margin
                    && local.y.abs() <= half_width
            }
            TaskCorridor::Disc { centre, radius } => p.distance(centre) <= radius,
        }
    }
}

/// Keeps the points that fall inside `corridor`, preserving order.
pub fn resample_pointcloud(cloud: &PointCloud, corridor: &TaskCorridor) -> PointCloud {
    PointCloud::new(
        cloud
            .points
            .iter()
            .copied()
            .filter(|&p| corridor.contains(p))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(len: f64, half_width: f64) -> TaskCorridor {
        TaskCorridor::Strip {
            origin: Pose::IDENTITY,
            length: len,
            half_width,
            end_margin: 0.0,
        }
    }

    #[test]
    fn empty_world_scans_empty() {
        let s = Scenario::new(
            Pose::IDENTITY,
            Footprint::default(),
            Point2::new(1.0, 0.0),
            vec![],
            LidarModel::default(),
        )
        .unwrap();
        let cloud = scan_noiseless(&s, &Pose::new(0.3, -0.2, 1.0)).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn single_beam_hits_wall_ahead() {
        let wall = ConvexPolygon::rectangle(Point2::new(0.5, -1.0), Point2::new(0.6, 1.0)).unwrap();
        let lidar = LidarModel {
            beam_count: 1,
            ..LidarModel::default()
        };
        let s = Scenario::new(
            Pose::IDENTITY,
            Footprint::default(),
            Point2::new(1.0, 2.0),
            vec![wall],
            lidar,
        )
        .unwrap();
        let cloud = scan_noiseless(&s, &Pose::IDENTITY).unwrap();
        assert_eq!(cloud.points, vec![Point2::new(0.5, 0.0)]);
    }

    #[test]
    fn occluded_sensor_is_an_error() {
        let s = Scenario::overtaking();
        assert_eq!(
            scan_noiseless(&s, &Pose::new(0.5, 0.0, 0.0)),
            Err(Error::SensorOccluded)
        );
    }

    #[test]
    fn resample_examples() {
        let k = strip(1.0, 0.125);
        assert!(resample_pointcloud(&PointCloud::default(), &k).is_empty());
        let far = PointCloud::new(vec![Point2::new(0.5, 5.0)]);
        assert!(resample_pointcloud(&far, &k).is_empty());
        let cloud = PointCloud::new(vec![
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.10),
            Point2::new(0.5, 0.20),
        ]);
        assert_eq!(
            resample_pointcloud(&cloud, &k).points,
            vec![Point2::new(0.5, 0.0), Point2::new(0.5, 0.10)]
        );
    }

    #[test]
    fn noisy_scan_stays_in_range() {
        let mut s = Scenario::overtaking();
        s.lidar.range_noise_sd = 0.5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cloud = ray_cast_scan(&s, &Pose::IDENTITY, &mut rng).unwrap();
        assert!(!cloud.is_empty());
        assert!(cloud
            .points
            .iter()
            .all(|p| p.norm() <= s.lidar.max_range + 1e-12));
    }

    #[test]
    fn parser_rejects_unknown_keys_and_bad_values() {
        let err = Scenario::from_json_str(
            r#"{"robot":{"x":0,"y":0,"theta":0,"half_width":0.1,"half_length":0.1,"colour":1},"goal":{"x":1,"y":0}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");

        let err = Scenario::from_json_str(
            r#"{"robot":{"x":0,"y":0,"theta":0,"half_width":0.0,"half_length":0.1},"goal":{"x":1,"y":0}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("half_width"), "{err}");

        let err = Scenario::from_json_str(
            r#"{"robot":{"x":0,"y":0,"theta":0,"half_width":0.1,"half_length":0.1},"goal":{"x":1,"y":0},
                "obstacles":[[[0.9,-0.1],[1.1,-0.1],[1.1,0.1],[0.9,0.1]]]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("goal"), "{err}");
    }

    #[test]
    fn scenario_json_round_trip() {
        let s = Scenario::overtaking();
        assert_eq!(Scenario::from_json_str(&s.to_json_string()).unwrap(), s);
    }

    use rand::SeedableRng;
}
