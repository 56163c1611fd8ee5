//! Robot setup and planning toolkit.
//!
//! Turns a URDF robot description into a validated semantic configuration
//! (self-collision matrix, planning groups, named poses, end effectors), generates
//! a tuned configuration bundle, plans collision-free motions and benchmarks
//! planners over parameter sweeps.

pub mod acm_gen;
pub mod bench;
pub mod collision;
pub mod conf;
pub mod confgen;
pub mod fixtures;
pub mod kinematics;
pub mod model;
pub mod planning;
pub mod pose;
pub mod report;
pub mod shape;
pub mod srdf;

pub use kinematics::{JointGroup, RobotState};
pub use model::RobotModel;
pub use pose::Pose;
