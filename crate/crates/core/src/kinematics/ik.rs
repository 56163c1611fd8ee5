use nalgebra::{DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};

use super::{check_tip, enforce_bounds, indexed_rng, jacobian_at, link_poses, sample_variables, JointGroup, KinematicsError, RobotState};
use crate::model::RobotModel;
use crate::pose::Pose;

/// Damped-least-squares solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IkParams {
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for IkParams {
    fn default() -> Self {
        IkParams {
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
            max_iterations: 200,
            damping: 0.1,
            restarts: 10,
            seed: 0,
        }
    }
}

impl IkParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |m: &str| Err(KinematicsError::InvalidParams(m.to_string()));
        if !(self.position_tolerance > 0.0 && self.orientation_tolerance > 0.0) {
            return bad("IK tolerances must be positive");
        }
        if self.max_iterations < 1 {
            return bad("IK needs at least one iteration");
        }
        if !(self.damping > 0.0) {
            return bad("IK damping must be positive");
        }
        Ok(())
    }
}

// Largest joint step per iteration, in rad or m.
const MAX_STEP: f64 = 0.5;
// Iterations without a 0.1% error reduction before a restart.
const STALL_ITERATIONS: usize = 20;

/// Solves for a group state placing the group's tip link at `target`.
///
/// Returns `Ok(None)` when no solution is found within the iteration and restart
/// budget. Joints outside the group keep their seed values.
pub fn solve_ik(
    model: &RobotModel,
    group: &JointGroup,
    target: &Pose,
    seed: &RobotState,
    params: &IkParams,
) -> Result<Option<RobotState>, KinematicsError> {
    params.validate()?;
    if !group.is_chain {
        return Err(KinematicsError::NotAChain(group.name.clone()));
    }
    let tip_name = group
        .tip_link
        .as_deref()
        .ok_or_else(|| KinematicsError::NotAChain(group.name.clone()))?;
    let tip = model
        .link_index(tip_name)
        .ok_or_else(|| KinematicsError::UnknownLink(tip_name.to_string()))?;
    check_tip(model, group, tip)?;
    let start = seed.to_vector(model)?;

    let lambda2 = params.damping * params.damping;
    for attempt in 0..=params.restarts {
        let mut q = start.clone();
        if attempt > 0 {
            let mut rng = indexed_rng(params.seed, attempt as u64);
            sample_variables(model, group.variables(), &mut rng, &mut q)?;
        }
        let mut best = f64::INFINITY;
        let mut stalled = 0;
        for _ in 0..params.max_iterations {
            let poses = link_poses(model, &q);
            let current = poses[tip];
            let (dp, dr) = current.error_to(target);
            if dp <= params.position_tolerance && dr <= params.orientation_tolerance {
                return Ok(Some(RobotState::from_vector(model, &q)));
            }
            let e_lin = target.translation - current.translation;
            let e_ang = (target.rotation * current.rotation.inverse()).scaled_axis();
            let err = Vector6::new(e_lin.x, e_lin.y, e_lin.z, e_ang.x, e_ang.y, e_ang.z);

            let jac = jacobian_at(model, group, &q, tip, &poses);
            let mut jjt: DMatrix<f64> = &jac * jac.transpose();
            for i in 0..6 {
                jjt[(i, i)] += lambda2;
            }
            let Some(chol) = jjt.cholesky() else { break };
            let y = chol.solve(&DVector::from_column_slice(err.as_slice()));
            let mut dq = jac.transpose() * y;
            let m = dq.amax();
            if m > MAX_STEP {
                dq *= MAX_STEP / m;
            }
            for (k, &vi) in group.variables().iter().enumerate() {
                q[vi] += dq[k];
            }
            enforce_bounds(model, &mut q);

            let norm = err.norm();
            if norm < best * (1.0 - 1e-3) {
                best = norm;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STALL_ITERATIONS {
                    break;
                }
            }
        }
        // the last update of the loop has not been checked yet
        let current = link_poses(model, &q)[tip];
        let (dp, dr) = current.error_to(target);
        if dp <= params.position_tolerance && dr <= params.orientation_tolerance {
            return Ok(Some(RobotState::from_vector(model, &q)));
        }
    }
    Ok(None)
}
