//! The supervisor that explores task sequences in simulation and extracts
//! a plan from them.
//!
//! Each [`State`] pairs one task with the disturbances around it: the one it
//! is contingent on and, if the simulation hit something, the one that
//! interrupted it. States form a tree (the cognitive map) grown best-first:
//! the cheapest open state is expanded into three branches (straight,
//! left-then-straight, right-then-straight), each simulated until it
//! completes or is interrupted. Only uninterrupted straight tasks that made
//! progress stay open for further expansion.

mod export;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

pub use export::{
    parse_map_dot, read_plan_json, write_map_dot, write_plan_json, MapEdgeRecord, MapNodeRecord,
    MapRecord,
};

use crate::core_sim::{CoreKnowledge, EngineConfig, KinematicEngine, SimulationResult};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Footprint, Point2, Pose};
use crate::tasks::{BehaviourKind, Disturbance, DisturbanceKind, Task, TaskParams};
use crate::world::{PointCloud, Scenario};

pub type StateId = usize;

/// Straight tasks shorter than this made no progress and are not expanded.
pub const MIN_PROGRESS: f64 = 1e-6;

/// Branches tried from every expanded state, in creation order.
pub const BRANCHES: [&[BehaviourKind]; 3] = [
    &[BehaviourKind::Straight],
    &[BehaviourKind::LeftTurn, BehaviourKind::Straight],
    &[BehaviourKind::RightTurn, BehaviourKind::Straight],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ChiSign {
    /// Distance to the goal counts as cost; the cheapest state is preferred.
    #[default]
    Positive,
    /// Negated distance, preferring the state with the largest total.
    PaperNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// The overall goal, in the planning root frame.
    pub goal: Disturbance,
    pub goal_radius: f64,
    /// Length that normalises both cost terms.
    pub norm_length: f64,
    pub max_expansions: usize,
    pub chi_sign: ChiSign,
    /// States this many expansions deep are recorded but never expanded.
    pub max_depth: Option<usize>,
    /// Stop as soon as a state ends within `goal_radius` of the goal.
    pub stop_at_goal: bool,
}

impl PlannerConfig {
    pub fn new(goal: Point2) -> Self {
        let distance = goal.norm();
        Self {
            goal: Disturbance::goal(goal),
            goal_radius: 0.05,
            norm_length: if distance > 0.0 { distance } else { 1.0 },
            max_expansions: 1000,
            chi_sign: ChiSign::Positive,
            max_depth: None,
            stop_at_goal: true,
        }
    }

    /// Goal and normalisation taken from the scenario's start configuration.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::new(scenario.goal_in_start_frame())
    }

    pub fn validate(&self) -> Result<()> {
        if self.goal.kind != DisturbanceKind::Goal || !self.goal.location.is_finite() {
            return Err(invalid("goal", "must be a finite goal disturbance"));
        }
        if self.goal_radius.is_nan() || self.goal_radius <= 0.0 {
            return Err(invalid("goal_radius", "must be > 0"));
        }
        if !(self.norm_length > 0.0 && self.norm_length.is_finite()) {
            return Err(invalid("norm_length", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub gamma: f64,
    pub chi: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub id: StateId,
    /// Task with its start pose in the planning root frame and its
    /// contingent disturbance in that start pose's ego frame.
    pub task: Task,
    pub sim: SimulationResult,
    /// Where the task ends, in the planning root frame.
    pub end_pose: Pose,
    pub parent: Option<StateId>,
    /// Number of expansions between the root and this state.
    pub depth: usize,
    pub cost: Cost,
    pub expanded: bool,
}

impl State {
    pub fn contingent(&self) -> Disturbance {
        self.task.contingent
    }

    pub fn interrupting(&self) -> Disturbance {
        self.sim.interrupting
    }

    pub fn interrupted(&self) -> bool {
        self.sim.interrupted()
    }

    pub fn world_pose(&self) -> Pose {
        self.task.start_pose
    }

    /// Uninterrupted straight task that moved the robot.
    pub fn is_open_terminal(&self) -> bool {
        self.task.kind == BehaviourKind::Straight
            && !self.interrupted()
            && self.sim.distance_travelled > MIN_PROGRESS
    }
}

/// Past cost: normalised distance covered before the interruption, zero for
/// uninterrupted tasks.
pub fn gamma(q: &State, cfg: &PlannerConfig) -> f64 {
    if q.interrupted() {
        q.sim.distance_travelled / cfg.norm_length
    } else {
        0.0
    }
}

/// Heuristic future cost: normalised distance from the task's end to the goal.
pub fn chi(q: &State, cfg: &PlannerConfig) -> f64 {
    let d = q.end_pose.position.distance(cfg.goal.location) / cfg.norm_length;
    match cfg.chi_sign {
        ChiSign::Positive => d,
        ChiSign::PaperNegative => -d,
    }
}

pub fn phi(q: &State, cfg: &PlannerConfig) -> f64 {
    gamma(q, cfg) + chi(q, cfg)
}

/// Value minimised when choosing states; the negated convention picks
/// the largest total instead.
pub fn selection_key(phi: f64, cfg: &PlannerConfig) -> f64 {
    match cfg.chi_sign {
        ChiSign::Positive => phi,
        ChiSign::PaperNegative => -phi,
    }
}

/// Orders states by selection key, ties broken by lower id.
pub fn compare_states(a: (f64, StateId), b: (f64, StateId)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueKey {
    key: f64,
    id: StateId,
}

impl Eq for QueueKey {}

impl PartialOrd for QueueKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueKey {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_states((self.key, self.id), (other.key, other.id))
    }
}

/// Snapshot taken each time a state is chosen for expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub expanded: StateId,
    /// Queue members (including the chosen one) with their selection keys.
    pub queue: Vec<(StateId, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GoalReached(StateId),
    QueueExhausted,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognitiveMap {
    pub states: Vec<State>,
    pub transitions: Vec<(StateId, StateId)>,
    pub guard_flags: Vec<u8>,
    pub root: StateId,
    pub expansions: Vec<ExpansionRecord>,
    pub termination: Termination,
}

impl CognitiveMap {
    fn new() -> Self {
        Self {
            states: Vec::new(),
            transitions: Vec::new(),
            guard_flags: Vec::new(),
            root: 0,
            expansions: Vec::new(),
            termination: Termination::QueueExhausted,
        }
    }

    pub fn state(&self, id: StateId) -> &State {
        &self.states[id]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn budget_exhausted(&self) -> bool {
        self.termination == Termination::BudgetExhausted
    }

    pub fn children(&self, id: StateId) -> impl Iterator<Item = StateId> + '_ {
        self.transitions
            .iter()
            .filter(move |(a, _)| *a == id)
            .map(|&(_, b)| b)
    }

    /// Root-to-`id` chain of state ids.
    pub fn path_to(&self, id: StateId) -> Vec<StateId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.states[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Kinds of the tasks from the root (excluded) to `id`.
    pub fn signature(&self, id: StateId) -> String {
        self.path_to(id)
            .into_iter()
            .skip(1)
            .map(|s| self.states[s].task.kind.label())
            .collect()
    }

    fn push(&mut self, state: State) -> StateId {
        let id = state.id;
        if let Some(parent) = state.parent {
            self.transitions.push((parent, id));
            self.guard_flags.push(0);
        }
        self.states.push(state);
        id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub state: StateId,
    pub kind: BehaviourKind,
    pub params: TaskParams,
    /// Planned start and end poses in the planning root frame.
    pub start: Pose,
    pub end: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub states: Vec<StateId>,
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn terminal(&self) -> StateId {
        *self.states.last().expect("plans are never empty")
    }

    /// Behaviour labels after the root, e.g. `"RSLS"`.
    pub fn signature(&self) -> String {
        self.steps.iter().skip(1).map(|s| s.kind.label()).collect()
    }
}

/// Builds cognitive maps and extracts plans.
#[derive(Debug, Clone)]
pub struct Configurator<E = KinematicEngine> {
    pub cfg: PlannerConfig,
    pub task_params: TaskParams,
    pub engine: E,
}

impl Configurator<KinematicEngine> {
    pub fn new(
        cfg: PlannerConfig,
        task_params: TaskParams,
        footprint: Footprint,
        engine: EngineConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        task_params.validate()?;
        engine.validate()?;
        Ok(Self {
            cfg,
            task_params,
            engine: KinematicEngine {
                footprint,
                config: engine,
            },
        })
    }

    pub fn for_scenario(scenario: &Scenario) -> Result<Self> {
        Self::new(
            PlannerConfig::for_scenario(scenario),
            TaskParams::default(),
            scenario.footprint,
            EngineConfig::default(),
        )
    }
}

impl<E: CoreKnowledge> Configurator<E> {
    /// Disturbance injected into the task that follows `parent`: the goal,
    /// seen from where the parent task ended. Undefined after an interruption.
    pub fn reset(&self, parent: &State) -> Result<Disturbance> {
        if parent.interrupted() {
            return Err(Error::ResetUndefined(parent.id));
        }
        Ok(Disturbance::goal(
            parent
                .end_pose
                .inverse_transform_point(self.cfg.goal.location),
        ))
    }

    /// The root task is contingent on the goal itself.
    pub fn reset_root(&self) -> Disturbance {
        self.cfg.goal
    }

    /// The task running when planning starts: straight towards the goal,
    /// observed at the planning instant, so it covers no distance.
    pub fn root_task(&self) -> Task {
        Task {
            kind: BehaviourKind::Straight,
            contingent: self.reset_root(),
            start_pose: Pose::IDENTITY,
            params: TaskParams {
                max_travel: 0.0,
                ..self.task_params
            },
        }
    }

    fn simulate_state(
        &self,
        cloud: &PointCloud,
        task: Task,
        id: StateId,
        parent: Option<StateId>,
        depth: usize,
    ) -> Result<State> {
        let local_cloud = cloud.to_frame(&task.start_pose);
        let sim = self.engine.predict(&local_cloud, &task)?;
        let mut state = State {
            id,
            task,
            sim,
            end_pose: task.start_pose.compose(&sim.end_pose),
            parent,
            depth,
            cost: Cost {
                gamma: 0.0,
                chi: 0.0,
                phi: 0.0,
            },
            expanded: false,
        };
        state.cost = Cost {
            gamma: gamma(&state, &self.cfg),
            chi: chi(&state, &self.cfg),
            phi: phi(&state, &self.cfg),
        };
        Ok(state)
    }

    pub fn selection_key(&self, q: &State) -> f64 {
        selection_key(q.cost.phi, &self.cfg)
    }

    pub fn reached_goal(&self, q: &State) -> bool {
        q.end_pose.position.distance(self.cfg.goal.location) <= self.cfg.goal_radius
    }

    /// Simulates the three branches out of `q_e`, adding every created state
    /// to `map`. Returns the open branch terminals.
    pub fn expand(
        &self,
        map: &mut CognitiveMap,
        q_e: StateId,
        cloud: &PointCloud,
    ) -> Result<Vec<StateId>> {
        let origin = &map.states[q_e];
        if origin.interrupted() {
            return Err(Error::ExpandInterrupted(q_e));
        }
        if origin.expanded {
            return Err(Error::AlreadyExpanded(q_e));
        }
        let depth = origin.depth + 1;
        map.states[q_e].expanded = true;
        let mut frontier = Vec::new();
        for branch in BRANCHES {
            let mut parent = q_e;
            for &kind in branch {
                let p = &map.states[parent];
                let task = Task::new(kind, self.reset(p)?, p.end_pose, self.task_params)?;
                let state =
                    self.simulate_state(cloud, task, map.states.len(), Some(parent), depth)?;
                let interrupted = state.interrupted();
                parent = map.push(state);
                if interrupted {
                    break;
                }
            }
            if map.states[parent].is_open_terminal() {
                frontier.push(parent);
            }
        }
        Ok(frontier)
    }

    /// Grows the cognitive map best-first from the robot's current pose.
    /// `cloud` is the scan in the planning root frame.
    pub fn build_cognitive_map(&self, cloud: &PointCloud) -> Result<CognitiveMap> {
        let mut map = CognitiveMap::new();
        let root = self.simulate_state(cloud, self.root_task(), 0, None, 0)?;
        if self.cfg.stop_at_goal && self.reached_goal(&root) {
            map.push(root);
            map.termination = Termination::GoalReached(0);
            return Ok(map);
        }
        let root_key = self.selection_key(&root);
        map.root = map.push(root);

        let mut queue = BinaryHeap::new();
        queue.push(Reverse(QueueKey {
            key: root_key,
            id: 0,
        }));
        let max_depth = self.cfg.max_depth.unwrap_or(usize::MAX);
        map.termination = Termination::QueueExhausted;
        while let Some(Reverse(QueueKey { id: q_e, .. })) = queue.peek().copied() {
            if map.expansions.len() >= self.cfg.max_expansions {
                map.termination = Termination::BudgetExhausted;
                break;
            }
            let mut snapshot: Vec<(StateId, f64)> =
                queue.iter().map(|Reverse(k)| (k.id, k.key)).collect();
            snapshot.sort_by(|a, b| compare_states((a.1, a.0), (b.1, b.0)));
            map.expansions.push(ExpansionRecord {
                expanded: q_e,
                queue: snapshot,
            });
            queue.pop();

            let frontier = self.expand(&mut map, q_e, cloud)?;
            let mut reached = None;
            for f in frontier {
                let state = &map.states[f];
                if reached.is_none() && self.cfg.stop_at_goal && self.reached_goal(state) {
                    reached = Some(f);
                }
                if state.depth < max_depth {
                    queue.push(Reverse(QueueKey {
                        key: self.selection_key(state),
                        id: f,
                    }));
                }
            }
            if let Some(f) = reached {
                map.termination = Termination::GoalReached(f);
                break;
            }
        }
        Ok(map)
    }

    /// Picks the cheapest open terminal and marks the transitions leading to
    /// it. A robot already at the goal gets the root-only plan.
    pub fn extract_plan(&self, map: &mut CognitiveMap) -> Result<Plan> {
        let best = map
            .states
            .iter()
            .filter(|s| s.parent.is_some() && s.is_open_terminal())
            .map(|s| (self.selection_key(s), s.id))
            .min_by(|a, b| compare_states(*a, *b))
            .map(|(_, id)| id);
        let terminal = match best {
            Some(id) => id,
            None if self.reached_goal(&map.states[map.root]) => map.root,
            None => return Err(Error::NoViablePlan),
        };
        let path = map.path_to(terminal);
        map.guard_flags.iter_mut().for_each(|g| *g = 0);
        for pair in path.windows(2) {
            let idx = map
                .transitions
                .iter()
                .position(|&(a, b)| a == pair[0] && b == pair[1])
                .expect("path follows transitions");
            map.guard_flags[idx] = 1;
        }
        let steps = path
            .iter()
            .map(|&id| {
                let s = &map.states[id];
                PlanStep {
                    state: id,
                    kind: s.task.kind,
                    params: s.task.params,
                    start: s.task.start_pose,
                    end: s.end_pose,
                }
            })
            .collect();
        Ok(Plan {
            states: path,
            steps,
        })
    }
}
