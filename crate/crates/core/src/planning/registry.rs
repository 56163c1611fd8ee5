use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::adapters::{Adapter, FixStartBounds, TimeParameterization};
use super::rrt::Rrt;
use super::{ParamMap, PlanError, Planner, PlanningScene};
use crate::collision::{NativeCollisionChecker, StateValidator};
use crate::kinematics::{solve_ik, IkParams, JointGroup, KinematicsError, RobotState};
use crate::model::RobotModel;
use crate::pose::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PluginKind {
    Planner,
    IkSolver,
    CollisionChecker,
    Adapter,
}

impl fmt::Display for PluginKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PluginKind::Planner => "planner",
            PluginKind::IkSolver => "ik_solver",
            PluginKind::CollisionChecker => "collision_checker",
            PluginKind::Adapter => "adapter",
        })
    }
}

pub trait IkSolver: Send + Sync {
    fn solve(
        &self,
        model: &RobotModel,
        group: &JointGroup,
        target: &Pose,
        seed: &RobotState,
        params: &IkParams,
    ) -> Result<Option<RobotState>, KinematicsError>;
}

/// Damped-least-squares solver.
pub struct DlsSolver;

impl IkSolver for DlsSolver {
    fn solve(
        &self,
        model: &RobotModel,
        group: &JointGroup,
        target: &Pose,
        seed: &RobotState,
        params: &IkParams,
    ) -> Result<Option<RobotState>, KinematicsError> {
        solve_ik(model, group, target, seed, params)
    }
}

pub type PlannerFactory = Arc<dyn Fn(&ParamMap) -> Result<Box<dyn Planner>, PlanError> + Send + Sync>;
pub type IkFactory = Arc<dyn Fn() -> Box<dyn IkSolver> + Send + Sync>;
pub type CheckerFactory = Arc<dyn for<'a> Fn(&'a PlanningScene) -> Box<dyn StateValidator + 'a> + Send + Sync>;
pub type AdapterFactory = Arc<dyn Fn() -> Box<dyn Adapter> + Send + Sync>;

#[derive(Clone)]
pub enum Plugin {
    Planner(PlannerFactory),
    IkSolver(IkFactory),
    CollisionChecker(CheckerFactory),
    Adapter(AdapterFactory),
}

impl Plugin {
    pub fn kind(&self) -> PluginKind {
        match self {
            Plugin::Planner(_) => PluginKind::Planner,
            Plugin::IkSolver(_) => PluginKind::IkSolver,
            Plugin::CollisionChecker(_) => PluginKind::CollisionChecker,
            Plugin::Adapter(_) => PluginKind::Adapter,
        }
    }

    pub fn planner(f: impl Fn(&ParamMap) -> Result<Box<dyn Planner>, PlanError> + Send + Sync + 'static) -> Plugin {
        Plugin::Planner(Arc::new(f))
    }

    pub fn ik_solver(f: impl Fn() -> Box<dyn IkSolver> + Send + Sync + 'static) -> Plugin {
        Plugin::IkSolver(Arc::new(f))
    }

    pub fn collision_checker(
        f: impl for<'a> Fn(&'a PlanningScene) -> Box<dyn StateValidator + 'a> + Send + Sync + 'static,
    ) -> Plugin {
        Plugin::CollisionChecker(Arc::new(f))
    }

    pub fn adapter(f: impl Fn() -> Box<dyn Adapter> + Send + Sync + 'static) -> Plugin {
        Plugin::Adapter(Arc::new(f))
    }
}

/// Factories keyed by (kind, name). Build it up front, then share it read-only.
#[derive(Clone, Default)]
pub struct PluginRegistry {
    plugins: BTreeMap<(PluginKind, String), Plugin>,
}

impl PluginRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry with the built-in planner `rrt`, IK solver `dls`, collision checker
    /// `native` and adapters `fix_start_bounds` and `time_parameterization`.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register("rrt", Plugin::planner(|p| Ok(Box::new(Rrt::from_params(p)?))))
            .expect("fresh registry");
        r.register("dls", Plugin::ik_solver(|| Box::new(DlsSolver)))
            .expect("fresh registry");
        r.register(
            "native",
            Plugin::collision_checker(|scene| {
                Box::new(NativeCollisionChecker::new(&scene.model, &scene.acm, &scene.world))
            }),
        )
        .expect("fresh registry");
        r.register("fix_start_bounds", Plugin::adapter(|| Box::new(FixStartBounds::default())))
            .expect("fresh registry");
        r.register("time_parameterization", Plugin::adapter(|| Box::new(TimeParameterization)))
            .expect("fresh registry");
        r
    }

    pub fn register(&mut self, name: &str, plugin: Plugin) -> Result<(), PlanError> {
        let key = (plugin.kind(), name.to_string());
        if self.plugins.contains_key(&key) {
            return Err(PlanError::DuplicatePlugin {
                kind: key.0,
                name: key.1,
            });
        }
        self.plugins.insert(key, plugin);
        Ok(())
    }

    pub fn names(&self, kind: PluginKind) -> Vec<&str> {
        self.plugins
            .keys()
            .filter(|(k, _)| *k == kind)
            .map(|(_, n)| n.as_str())
            .collect()
    }

    fn lookup(&self, kind: PluginKind, name: &str) -> Result<&Plugin, PlanError> {
        self.plugins
            .get(&(kind, name.to_string()))
            .ok_or_else(|| PlanError::UnknownPlugin {
                kind,
                name: name.to_string(),
            })
    }

    pub fn planner(&self, name: &str, params: &ParamMap) -> Result<Box<dyn Planner>, PlanError> {
        match self.lookup(PluginKind::Planner, name)? {
            Plugin::Planner(f) => f(params),
            _ => unreachable!("keyed by kind"),
        }
    }

    pub fn ik_solver(&self, name: &str) -> Result<Box<dyn IkSolver>, PlanError> {
        match self.lookup(PluginKind::IkSolver, name)? {
            Plugin::IkSolver(f) => Ok(f()),
            _ => unreachable!("keyed by kind"),
        }
    }

    pub fn collision_checker<'a>(
        &self,
        name: &str,
        scene: &'a PlanningScene,
    ) -> Result<Box<dyn StateValidator + 'a>, PlanError> {
        match self.lookup(PluginKind::CollisionChecker, name)? {
            Plugin::CollisionChecker(f) => Ok(f(scene)),
            _ => unreachable!("keyed by kind"),
        }
    }

    pub fn adapter(&self, name: &str) -> Result<Box<dyn Adapter>, PlanError> {
        match self.lookup(PluginKind::Adapter, name)? {
            Plugin::Adapter(f) => Ok(f()),
            _ => unreachable!("keyed by kind"),
        }
    }
}
