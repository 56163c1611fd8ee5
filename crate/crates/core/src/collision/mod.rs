//! Collision geometry tests, the allowed collision matrix, world objects and
//! state/motion validation.

pub mod acm;
pub mod checker;
pub mod motion;
pub mod narrow;
pub mod world;

use thiserror::Error;

pub use acm::{AcmEntry, AcmError, AcmReason, AllowedCollisionMatrix, LinkPair, PairStats};
pub use checker::{
    check_state, links_intersect, CollisionFlags, CollisionResult, Contact, ContactKind,
    NativeCollisionChecker, StateValidator,
};
pub use motion::{validate_motion, validate_segment, MotionCheck, DEFAULT_RESOLUTION_FRACTION};
pub use narrow::shapes_intersect;
pub use world::{PlanningSceneWorld, SceneError, WorldObject};

use crate::kinematics::KinematicsError;

#[derive(Debug, Error)]
pub enum CollisionError {
    #[error("collision-checking resolution must lie in (0, 1), got {0}")]
    InvalidResolution(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
