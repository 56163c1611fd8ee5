use super::{time_parameterize, PlanError, PlanResponse, PlanningScene};
use crate::kinematics::JointGroup;
use crate::model::VariableBounds;

/// Largest limit violation in a start state that is silently clamped.
pub const START_CLAMP_TOLERANCE: f64 = 1e-6;

/// Pre/post-processing stage around a planner. Both hooks default to no-ops.
pub trait Adapter: Send + Sync {
    /// Runs before planning on the full start vector.
    fn adjust_start(&self, _scene: &PlanningScene, _group: &JointGroup, _start: &mut Vec<f64>) -> Result<(), PlanError> {
        Ok(())
    }

    /// Runs after a successful plan.
    fn process_result(
        &self,
        _scene: &PlanningScene,
        _group: &JointGroup,
        _response: &mut PlanResponse,
    ) -> Result<(), PlanError> {
        Ok(())
    }
}

/// Clamps start values that lie within `tolerance` beyond a joint limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixStartBounds {
    pub tolerance: f64,
}

impl Default for FixStartBounds {
    fn default() -> Self {
        FixStartBounds {
            tolerance: START_CLAMP_TOLERANCE,
        }
    }
}

impl Adapter for FixStartBounds {
    fn adjust_start(&self, scene: &PlanningScene, _group: &JointGroup, start: &mut Vec<f64>) -> Result<(), PlanError> {
        for (v, x) in scene.model.variables().iter().zip(start.iter_mut()) {
            let VariableBounds::Interval(lo, hi) = v.bounds else {
                continue;
            };
            let excess = (lo - *x).max(*x - hi);
            if excess <= 0.0 {
                continue;
            }
            if excess > self.tolerance {
                return Err(PlanError::StartOutOfBounds(format!(
                    "`{}` = {} is {excess:e} outside [{lo}, {hi}]",
                    v.name, x
                )));
            }
            *x = x.clamp(lo, hi);
        }
        Ok(())
    }
}

/// Times the path with the scene's per-joint limits.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimeParameterization;

impl Adapter for TimeParameterization {
    fn process_result(&self, scene: &PlanningScene, group: &JointGroup, response: &mut PlanResponse) -> Result<(), PlanError> {
        let (v, a) = scene.limits.for_group(&scene.model, group)?;
        response.trajectory = Some(time_parameterize(&response.path.joints, &response.path.waypoints, &v, &a)?);
        Ok(())
    }
}
