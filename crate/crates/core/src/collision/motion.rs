use serde::{Deserialize, Serialize};

use super::checker::{CollisionFlags, NativeCollisionChecker, StateValidator};
use super::{AllowedCollisionMatrix, CollisionError, PlanningSceneWorld};
use crate::kinematics::{space_extent, JointGroup, RobotState};
use crate::model::RobotModel;

/// Default collision-checking resolution as a fraction of the space extent.
pub const DEFAULT_RESOLUTION_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionCheck {
    pub valid: bool,
    /// Interpolation parameter of the first failing state, shallowest bisection depth first.
    pub first_invalid_t: Option<f64>,
    pub states_checked: usize,
    pub checks_performed: u64,
}

/// Interpolation parameters visited by recursive bisection of [0, 1]: the two
/// endpoints, then midpoints level by level (ascending within a level), until
/// neighbouring parameters are at most `step` apart for a segment of length `length`.
pub fn bisection_schedule(length: f64, step: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    if length <= 0.0 {
        return out;
    }
    out.push(1.0);
    let mut depth = 0u32;
    while length / 2f64.powi(depth as i32) > step {
        depth += 1;
        let denom = 2f64.powi(depth as i32);
        let count = 1u64 << (depth - 1);
        for i in 0..count {
            out.push((2 * i + 1) as f64 / denom);
        }
    }
    out
}

/// Checks the straight joint-space segment `from → to`; `step` is the resolution in
/// joint-space distance over the group variables. With `skip_start` the state at
/// t = 0 is assumed valid.
pub fn validate_segment(
    validator: &dyn StateValidator,
    group: &JointGroup,
    from: &[f64],
    to: &[f64],
    step: f64,
    skip_start: bool,
) -> MotionCheck {
    let length = group.distance(from, to);
    let mut q = from.to_vec();
    let mut out = MotionCheck {
        valid: true,
        first_invalid_t: None,
        states_checked: 0,
        checks_performed: 0,
    };
    for t in bisection_schedule(length, step) {
        if skip_start && t == 0.0 {
            continue;
        }
        for (i, x) in q.iter_mut().enumerate() {
            *x = from[i] + t * (to[i] - from[i]);
        }
        let r = validator.check(&q, CollisionFlags::boolean_only());
        out.states_checked += 1;
        out.checks_performed += r.checks_performed;
        if r.in_collision {
            out.valid = false;
            out.first_invalid_t = Some(t);
            break;
        }
    }
    out
}

/// Validates a straight motion at `resolution_fraction` of the group's space extent.
pub fn validate_motion(
    model: &RobotModel,
    group: &JointGroup,
    from: &RobotState,
    to: &RobotState,
    acm: &AllowedCollisionMatrix,
    world: &PlanningSceneWorld,
    resolution_fraction: f64,
) -> Result<MotionCheck, CollisionError> {
    if !(resolution_fraction > 0.0 && resolution_fraction < 1.0) {
        return Err(CollisionError::InvalidResolution(resolution_fraction));
    }
    let a = from.to_vector(model)?;
    let b = to.to_vector(model)?;
    let step = resolution_fraction * space_extent(model, group)?;
    let checker = NativeCollisionChecker::new(model, acm, world);
    Ok(validate_segment(&checker, group, &a, &b, step, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_levels() {
        assert_eq!(bisection_schedule(0.0, 0.1), vec![0.0]);
        assert_eq!(bisection_schedule(0.1, 0.1), vec![0.0, 1.0]);
        assert_eq!(bisection_schedule(0.2, 0.1), vec![0.0, 1.0, 0.5]);
        assert_eq!(bisection_schedule(0.35, 0.1), vec![0.0, 1.0, 0.5, 0.25, 0.75]);
        assert_eq!(bisection_schedule(0.45, 0.1).len(), 9);
    }

    #[test]
    fn finer_schedules_contain_coarser_ones() {
        for (len, fine, coarse) in [(3.0, 0.01, 0.05), (1.7, 0.2, 0.3), (10.0, 0.001, 0.9)] {
            let f = bisection_schedule(len, fine);
            for t in bisection_schedule(len, coarse) {
                assert!(f.contains(&t));
            }
        }
    }
}
