//! Motion planning: plugin registry, the RRT planner, request adapters, time
//! parameterization and the high-level [`Pipeline`] facade.

pub mod adapters;
pub mod registry;
pub mod rrt;
pub mod trajectory;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{AllowedCollisionMatrix, CollisionFlags, PlanningSceneWorld, StateValidator, DEFAULT_RESOLUTION_FRACTION};
use crate::kinematics::{
    check_limits, default_positions, indexed_rng, sample_variables, space_extent, IkParams, JointGroup, KinematicsError,
    RobotState,
};
use crate::model::RobotModel;
use crate::pose::Pose;
use crate::srdf::{effective_model, resolve_group, SemanticError, SemanticModel};

pub use adapters::{Adapter, FixStartBounds, TimeParameterization, START_CLAMP_TOLERANCE};
pub use registry::{DlsSolver, IkSolver, Plugin, PluginKind, PluginRegistry};
pub use rrt::{Rrt, DEFAULT_GOAL_BIAS};
pub use trajectory::{time_parameterize, Segment, Trajectory, TrajectoryPoint};

pub type ParamMap = BTreeMap<String, f64>;

pub const DEFAULT_MAX_VELOCITY: f64 = 1.0;
pub const DEFAULT_MAX_ACCELERATION: f64 = 1.0;
pub const DEFAULT_TIME_BUDGET: f64 = 5.0;
pub const DEFAULT_GOAL_TOLERANCE: f64 = 1e-3;
/// Number of IK solutions tried for a pose goal before giving up on a collision-free one.
pub const POSE_GOAL_ATTEMPTS: u64 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid velocity/acceleration limits for `{0}`")]
    InvalidLimits(String),
    #[error("start state out of bounds: {0}")]
    StartOutOfBounds(String),
    #[error("start state is in collision ({first} / {second})")]
    StartInCollision { first: String, second: String },
    #[error("goal state is in collision ({first} / {second})")]
    GoalInCollision { first: String, second: String },
    #[error("no collision-free IK solution for group `{0}`")]
    IkFailed(String),
    #[error("no path found within {budget_s} s")]
    Timeout { budget_s: f64, checks_performed: u64 },
    #[error("no {kind} plugin named `{name}`")]
    UnknownPlugin { kind: PluginKind, name: String },
    #[error("{kind} plugin `{name}` is already registered")]
    DuplicatePlugin { kind: PluginKind, name: String },
    #[error("group `{group}` has no pose named `{name}`")]
    UnknownPose { group: String, name: String },
    #[error("{0}")]
    Semantic(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

impl From<SemanticError> for PlanError {
    fn from(e: SemanticError) -> Self {
        PlanError::Semantic(e.to_string())
    }
}

/// Velocity and acceleration limits of one joint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionLimits {
    pub max_velocity: f64,
    pub max_acceleration: f64,
}

/// Per-joint motion limits, keyed by joint name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointLimitsTable {
    pub joints: BTreeMap<String, MotionLimits>,
}

impl JointLimitsTable {
    /// URDF velocity (or `default_velocity`) times `velocity_scaling`, and
    /// `default_acceleration`, for every active joint.
    pub fn from_model(
        model: &RobotModel,
        velocity_scaling: f64,
        default_velocity: f64,
        default_acceleration: f64,
    ) -> JointLimitsTable {
        let joints = model
            .active_joints()
            .iter()
            .map(|name| {
                let j = model.joint(name).expect("active joint exists");
                let v = j.max_velocity().unwrap_or(default_velocity) * velocity_scaling;
                (
                    name.clone(),
                    MotionLimits {
                        max_velocity: v,
                        max_acceleration: default_acceleration,
                    },
                )
            })
            .collect();
        JointLimitsTable { joints }
    }

    /// (vmax, amax) per group variable, in group order.
    pub fn for_group(&self, model: &RobotModel, group: &JointGroup) -> Result<(Vec<f64>, Vec<f64>), PlanError> {
        let mut v = Vec::with_capacity(group.dof());
        let mut a = Vec::with_capacity(group.dof());
        for &i in group.variables() {
            let joint = &model.joints()[model.variables()[i].joint].name;
            let l = self
                .joints
                .get(joint)
                .ok_or_else(|| PlanError::InvalidLimits(joint.clone()))?;
            v.push(l.max_velocity);
            a.push(l.max_acceleration);
        }
        Ok((v, a))
    }
}

/// Immutable snapshot everything in a plan call reads from.
#[derive(Clone, Debug)]
pub struct PlanningScene {
    /// The robot model with the semantic virtual joint applied.
    pub model: RobotModel,
    pub semantic: SemanticModel,
    pub acm: AllowedCollisionMatrix,
    pub world: PlanningSceneWorld,
    pub limits: JointLimitsTable,
}

impl PlanningScene {
    /// Scene with the semantic model's disabled pairs as ACM, an empty world and
    /// default motion limits.
    pub fn new(model: &RobotModel, semantic: SemanticModel) -> Result<PlanningScene, PlanError> {
        let model = effective_model(model, &semantic)?;
        let limits = JointLimitsTable::from_model(&model, 1.0, DEFAULT_MAX_VELOCITY, DEFAULT_MAX_ACCELERATION);
        Ok(PlanningScene {
            acm: semantic.disabled_pairs.clone(),
            model,
            semantic,
            world: PlanningSceneWorld::new(),
            limits,
        })
    }

    pub fn with_world(mut self, world: PlanningSceneWorld) -> Self {
        self.world = world;
        self
    }

    pub fn with_acm(mut self, acm: AllowedCollisionMatrix) -> Self {
        self.acm = acm;
        self
    }

    pub fn with_limits(mut self, limits: JointLimitsTable) -> Self {
        self.limits = limits;
        self
    }

    pub fn group(&self, name: &str) -> Result<JointGroup, PlanError> {
        Ok(resolve_group(&self.model, &self.semantic, name)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Goal {
    /// Joint-space target; unspecified variables keep their start values.
    Joint {
        state: RobotState,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    /// World pose of the group's tip link, resolved through IK before planning.
    Pose { pose: PoseTarget },
}

fn default_tolerance() -> f64 {
    DEFAULT_GOAL_TOLERANCE
}

/// Position plus `[x, y, z, w]` quaternion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseTarget {
    pub xyz: [f64; 3],
    pub quaternion: [f64; 4],
}

impl From<Pose> for PoseTarget {
    fn from(p: Pose) -> Self {
        let q = p.rotation.quaternion();
        PoseTarget {
            xyz: p.xyz(),
            quaternion: [q.i, q.j, q.k, q.w],
        }
    }
}

impl PoseTarget {
    pub fn to_pose(&self) -> Result<Pose, PlanError> {
        let [x, y, z, w] = self.quaternion;
        let n = (x * x + y * y + z * z + w * w).sqrt();
        if !(n > 1e-9 && n.is_finite()) || self.xyz.iter().any(|v| !v.is_finite()) {
            return Err(PlanError::InvalidRequest("pose target is not a finite rigid transform".into()));
        }
        Ok(Pose::new(
            nalgebra::Vector3::from(self.xyz),
            nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z)),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub group: String,
    /// Overlaid onto the model's default positions.
    #[serde(default)]
    pub start: RobotState,
    pub goal: Goal,
    #[serde(default = "default_budget")]
    pub time_budget: f64,
    #[serde(default = "default_planner")]
    pub planner: String,
    #[serde(default)]
    pub params: ParamMap,
    #[serde(default = "default_resolution")]
    pub resolution_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_budget() -> f64 {
    DEFAULT_TIME_BUDGET
}

fn default_planner() -> String {
    "rrt".to_string()
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION_FRACTION
}

impl PlanRequest {
    pub fn new(group: impl Into<String>, goal: Goal) -> PlanRequest {
        PlanRequest {
            group: group.into(),
            start: RobotState::new(),
            goal,
            time_budget: DEFAULT_TIME_BUDGET,
            planner: default_planner(),
            params: ParamMap::new(),
            resolution_fraction: DEFAULT_RESOLUTION_FRACTION,
            seed: 0,
        }
    }

    pub fn joint_goal(group: impl Into<String>, state: RobotState) -> PlanRequest {
        PlanRequest::new(
            group,
            Goal::Joint {
                state,
                tolerance: DEFAULT_GOAL_TOLERANCE,
            },
        )
    }

    pub fn with_start(mut self, start: RobotState) -> Self {
        self.start = start;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, seconds: f64) -> Self {
        self.time_budget = seconds;
        self
    }
}

/// Group waypoints; `joints` names the variable columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub joints: Vec<String>,
    pub waypoints: Vec<Vec<f64>>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn states(&self) -> Vec<RobotState> {
        self.waypoints
            .iter()
            .map(|w| self.joints.iter().cloned().zip(w.iter().copied()).collect())
            .collect()
    }

    /// Sum of joint-space distances between consecutive waypoints.
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| crate::kinematics::distance(&w[0], &w[1]))
            .sum()
    }

    /// Full model vectors: `base` with the group columns replaced.
    pub fn full_states(&self, group: &JointGroup, base: &[f64]) -> Vec<Vec<f64>> {
        self.waypoints
            .iter()
            .map(|w| {
                let mut q = base.to_vec();
                group.insert(&mut q, w);
                q
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResponse {
    pub group: String,
    pub path: Path,
    pub trajectory: Option<Trajectory>,
    /// Narrow-phase checks spent on start/goal validation and planning.
    pub checks_performed: u64,
    pub solve_time_s: f64,
    /// Set when an adapter changed the start state.
    pub start_adjusted: bool,
    /// The full start vector actually planned from.
    pub start: Vec<f64>,
}

/// What a planner sees. All vectors are full model variable vectors.
pub struct PlanContext<'a> {
    pub model: &'a RobotModel,
    pub group: &'a JointGroup,
    pub validator: &'a dyn StateValidator,
    pub start: &'a [f64],
    pub goal: &'a [f64],
    pub goal_tolerance: f64,
    /// Diameter of the group's configuration box.
    pub extent: f64,
    /// Collision resolution step (fraction of the extent).
    pub resolution_step: f64,
    /// Step used to validate edges; half the resolution step, so that returned
    /// paths also pass validation at the finer level.
    pub edge_check_step: f64,
    pub seed: u64,
    pub deadline: Instant,
    pub budget_s: f64,
}

impl PlanContext<'_> {
    pub fn expired(&self) -> bool {
        Instant::now() >= self.deadline
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlannerOutput {
    /// Full model vectors from start to goal.
    pub path: Vec<Vec<f64>>,
    pub checks_performed: u64,
    pub iterations: u64,
    pub tree_size: usize,
}

pub trait Planner: Send + Sync {
    fn solve(&self, ctx: &PlanContext) -> Result<PlannerOutput, PlanError>;
}

/// Plugin selection and defaults used by [`Pipeline`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub collision_checker: String,
    /// Adapter chain, in execution order.
    pub adapters: Vec<String>,
    /// IK solver per group; groups not listed use `default_ik_solver`.
    pub ik_solvers: BTreeMap<String, String>,
    pub default_ik_solver: String,
    pub ik_params: IkParams,
    pub goal_tolerance: f64,
    pub resolution_fraction: f64,
    pub time_budget: f64,
    pub planner: String,
    pub planner_params: ParamMap,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            collision_checker: "native".into(),
            adapters: vec!["fix_start_bounds".into(), "time_parameterization".into()],
            ik_solvers: BTreeMap::new(),
            default_ik_solver: "dls".into(),
            ik_params: IkParams::default(),
            goal_tolerance: DEFAULT_GOAL_TOLERANCE,
            resolution_fraction: DEFAULT_RESOLUTION_FRACTION,
            time_budget: DEFAULT_TIME_BUDGET,
            planner: default_planner(),
            planner_params: ParamMap::new(),
        }
    }
}

/// Named group pose, explicit joint values, or tip-link pose.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Named(String),
    State(RobotState),
    Pose(Pose),
}

/// High-level entry point: goal resolution, adapters, planning and timing.
#[derive(Clone)]
pub struct Pipeline {
    pub registry: PluginRegistry,
    pub config: PipelineConfig,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            registry: PluginRegistry::with_defaults(),
            config: PipelineConfig::default(),
        }
    }
}

fn first_contact(v: &dyn StateValidator, q: &[f64]) -> (Option<(String, String)>, u64) {
    let r = v.check(q, CollisionFlags::boolean_only());
    let c = r.contacts.first().map(|c| (c.first.clone(), c.second.clone()));
    match (r.in_collision, c) {
        (false, _) => (None, r.checks_performed),
        (true, Some(c)) => (Some(c), r.checks_performed),
        (true, None) => (Some((String::new(), String::new())), r.checks_performed),
    }
}

impl Pipeline {
    pub fn new(registry: PluginRegistry, config: PipelineConfig) -> Pipeline {
        Pipeline { registry, config }
    }

    pub fn plan(&self, scene: &PlanningScene, req: &PlanRequest) -> Result<PlanResponse, PlanError> {
        let began = Instant::now();
        if !(req.time_budget > 0.0 && req.time_budget.is_finite()) {
            return Err(PlanError::InvalidRequest(format!("time budget must be positive, got {}", req.time_budget)));
        }
        if !(req.resolution_fraction > 0.0 && req.resolution_fraction < 1.0) {
            return Err(PlanError::InvalidRequest(format!(
                "resolution fraction must be in (0, 1), got {}",
                req.resolution_fraction
            )));
        }
        let model = &scene.model;
        let group = scene.group(&req.group)?;
        let planner = self.registry.planner(&req.planner, &req.params)?;
        let adapters = self
            .config
            .adapters
            .iter()
            .map(|n| self.registry.adapter(n))
            .collect::<Result<Vec<_>, _>>()?;
        let validator = self.registry.collision_checker(&self.config.collision_checker, scene)?;

        let mut start = req
            .start
            .overlay(model, &default_positions(model))
            .map_err(|e| PlanError::InvalidRequest(e.to_string()))?;
        let original = start.clone();
        for a in &adapters {
            a.adjust_start(scene, &group, &mut start)?;
        }
        check_limits(model, &start).map_err(|e| PlanError::StartOutOfBounds(e.to_string()))?;

        let joint_goal = match &req.goal {
            Goal::Joint { state, tolerance } => {
                if !(*tolerance >= 0.0 && tolerance.is_finite()) {
                    return Err(PlanError::InvalidRequest(format!("goal tolerance must be nonnegative, got {tolerance}")));
                }
                let q = state
                    .overlay(model, &start)
                    .map_err(|e| PlanError::InvalidRequest(e.to_string()))?;
                if let Some(i) = (0..q.len()).find(|&i| q[i] != start[i] && !group.variables().contains(&i)) {
                    return Err(PlanError::InvalidRequest(format!(
                        "goal sets `{}`, which is not in group `{}`",
                        model.variables()[i].name,
                        group.name
                    )));
                }
                check_limits(model, &q).map_err(|e| PlanError::InvalidRequest(format!("goal: {e}")))?;
                Some((q, *tolerance))
            }
            Goal::Pose { .. } => None,
        };

        let mut checks = 0;
        let (hit, n) = first_contact(validator.as_ref(), &start);
        checks += n;
        if let Some((first, second)) = hit {
            return Err(PlanError::StartInCollision { first, second });
        }
        let (goal, tolerance) = match (joint_goal, &req.goal) {
            (Some(g), _) => g,
            (None, Goal::Pose { pose }) => {
                let target = pose.to_pose()?;
                let (q, n) = self.resolve_pose_goal(scene, &group, validator.as_ref(), &target, &start, req.seed)?;
                checks += n;
                (q, 0.0)
            }
            (None, Goal::Joint { .. }) => unreachable!("joint goals resolved above"),
        };
        let (hit, n) = first_contact(validator.as_ref(), &goal);
        checks += n;
        if let Some((first, second)) = hit {
            return Err(PlanError::GoalInCollision { first, second });
        }

        let extent = space_extent(model, &group)?;
        let step = req.resolution_fraction * extent;
        let ctx = PlanContext {
            model,
            group: &group,
            validator: validator.as_ref(),
            start: &start,
            goal: &goal,
            goal_tolerance: tolerance,
            extent,
            resolution_step: step,
            edge_check_step: 0.5 * step,
            seed: req.seed,
            deadline: began + Duration::from_secs_f64(req.time_budget),
            budget_s: req.time_budget,
        };
        let out = match planner.solve(&ctx) {
            Err(PlanError::Timeout { budget_s, checks_performed }) => {
                return Err(PlanError::Timeout {
                    budget_s,
                    checks_performed: checks_performed + checks,
                })
            }
            r => r?,
        };
        let mut response = PlanResponse {
            group: group.name.clone(),
            path: Path {
                joints: group.variable_names(model).into_iter().map(str::to_string).collect(),
                waypoints: out.path.iter().map(|q| group.extract(q)).collect(),
            },
            trajectory: None,
            checks_performed: checks + out.checks_performed,
            solve_time_s: 0.0,
            start_adjusted: start != original,
            start,
        };
        for a in &adapters {
            a.process_result(scene, &group, &mut response)?;
        }
        response.solve_time_s = began.elapsed().as_secs_f64();
        Ok(response)
    }

    /// IK for the group tip; retries from random seeds until the solution is
    /// collision-free. Returns the goal vector and the checks spent.
    fn resolve_pose_goal(
        &self,
        scene: &PlanningScene,
        group: &JointGroup,
        validator: &dyn StateValidator,
        target: &Pose,
        start: &[f64],
        seed: u64,
    ) -> Result<(Vec<f64>, u64), PlanError> {
        let model = &scene.model;
        let name = self
            .config
            .ik_solvers
            .get(&group.name)
            .unwrap_or(&self.config.default_ik_solver);
        let solver = self.registry.ik_solver(name)?;
        let mut checks = 0;
        for attempt in 0..POSE_GOAL_ATTEMPTS {
            let mut q0 = start.to_vec();
            if attempt > 0 {
                let mut rng = indexed_rng(seed, attempt);
                sample_variables(model, group.variables(), &mut rng, &mut q0)?;
            }
            let params = IkParams {
                seed: seed.wrapping_add(attempt),
                ..self.config.ik_params
            };
            let seed_state = RobotState::from_vector(model, &q0);
            let Some(sol) = solver.solve(model, group, target, &seed_state, &params)? else {
                continue;
            };
            let q = sol.to_vector(model)?;
            let r = validator.check(&q, CollisionFlags::boolean_only());
            checks += r.checks_performed;
            if !r.in_collision {
                return Ok((q, checks));
            }
        }
        Err(PlanError::IkFailed(group.name.clone()))
    }

    /// Goal for a target; named poses resolve through the scene's semantic model.
    pub fn goal(&self, scene: &PlanningScene, group: &str, target: &Target) -> Result<Goal, PlanError> {
        Ok(match target {
            Target::Named(name) => {
                let s = scene.semantic.group_state(group, name).ok_or_else(|| PlanError::UnknownPose {
                    group: group.to_string(),
                    name: name.clone(),
                })?;
                Goal::Joint {
                    state: s.values.clone(),
                    tolerance: self.config.goal_tolerance,
                }
            }
            Target::State(s) => Goal::Joint {
                state: s.clone(),
                tolerance: self.config.goal_tolerance,
            },
            Target::Pose(p) => Goal::Pose { pose: (*p).into() },
        })
    }

    /// Request carrying this pipeline's budget, planner and resolution.
    pub fn request(&self, group: &str, start: &RobotState, goal: Goal, seed: u64) -> PlanRequest {
        PlanRequest {
            group: group.to_string(),
            start: start.clone(),
            goal,
            time_budget: self.config.time_budget,
            planner: self.config.planner.clone(),
            params: self.config.planner_params.clone(),
            resolution_fraction: self.config.resolution_fraction,
            seed,
        }
    }

    /// Plans from `start` (overlaid on defaults) to a named pose or a tip pose and
    /// returns the timed trajectory.
    pub fn plan_to(
        &self,
        scene: &PlanningScene,
        group: &str,
        target: &Target,
        start: &RobotState,
        seed: u64,
    ) -> Result<Trajectory, PlanError> {
        let req = self.request(group, start, self.goal(scene, group, target)?, seed);
        self.timed(scene, &self.plan(scene, &req)?)
    }

    /// The response's trajectory, or its path timed under the scene limits when the
    /// adapter chain did not time it.
    pub fn timed(&self, scene: &PlanningScene, response: &PlanResponse) -> Result<Trajectory, PlanError> {
        match &response.trajectory {
            Some(t) => Ok(t.clone()),
            None => {
                let g = scene.group(&response.group)?;
                let (v, a) = scene.limits.for_group(&scene.model, &g)?;
                time_parameterize(&response.path.joints, &response.path.waypoints, &v, &a)
            }
        }
    }
}
