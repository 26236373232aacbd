//! Quality-diversity grasp repertoires: generation in a kinematic micro-simulator,
//! robustness scoring under domain randomization, and rigid re-targeting of archived
//! trajectories to observed object poses.
//!
//! Geometry, collision, kinematics and adaptation are generic over [`Real`]
//! (`f32` or `f64`); simulation, search and persistence run in `f64`. The aliases
//! below name the `f64` instantiations used throughout.

pub mod adaptation;
pub mod cli;
pub mod collision;
pub mod error;
pub mod fixtures;
pub mod grasp_sim;
pub mod gripper;
pub mod kinematics;
pub mod persistence;
pub mod qd;
pub mod quality;
pub mod scalar;
pub mod scene;
pub mod se3;
pub mod workspace;

pub use error::{Error, Result};
pub use scalar::Real;

pub type RigidTransform = se3::Transform<f64>;
pub type RigidTransformF32 = se3::Transform<f32>;
pub type EndEffectorState = se3::EulerPose<f64>;
pub type Shape = collision::Primitive<f64>;
pub type RobotModel = kinematics::Robot<f64>;
pub type JointConfiguration = kinematics::Joints<f64>;
pub type ObjectModel = scene::Object<f64>;
pub type SceneModel = scene::Scene<f64>;
pub type Frames = adaptation::AdaptationFrames<f64>;
