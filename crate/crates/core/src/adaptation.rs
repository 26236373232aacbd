//! Re-targeting trajectories from the simulated object pose to an observed one, and
//! the kinematic/collision feasibility filter applied to the result.
//!
//! With `W` the world (= robot base), `C` the camera, `O` the observed object and
//! `O_sim` the object pose used during generation, a waypoint `e` becomes
//!
//! ```text
//! e' = world_from_camera * camera_from_object * inverse(world_from_object_sim) * e
//! ```
//!
//! so the gripper pose relative to `O` after adaptation equals its pose relative to
//! `O_sim` before.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grasp_sim::{SimConfig, Trajectory};
use crate::kinematics::{max_joint_jump, Joints, Robot};
use crate::quality::RankedElite;
use crate::scalar::Real;
use crate::scene::{first_collision, robot_bodies, Collision, FingerState, Scene};
use crate::se3::{EulerPose, InvalidTransform, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AdaptationFrames<T: Real> {
    pub world_from_camera: Transform<T>,
    pub camera_from_object: Transform<T>,
    pub world_from_object_sim: Transform<T>,
}

impl<T: Real> AdaptationFrames<T> {
    pub fn identity() -> Self {
        Self {
            world_from_camera: Transform::identity(),
            camera_from_object: Transform::identity(),
            world_from_object_sim: Transform::identity(),
        }
    }

    /// Frames for an object observed at `world_from_object` by a camera at
    /// `world_from_camera`.
    pub fn observed(
        world_from_camera: Transform<T>,
        world_from_object: &Transform<T>,
        world_from_object_sim: Transform<T>,
    ) -> Self {
        Self {
            camera_from_object: world_from_camera.invert().compose(world_from_object),
            world_from_camera,
            world_from_object_sim,
        }
    }

    /// Observed object pose in the world.
    pub fn world_from_object(&self) -> Transform<T> {
        self.world_from_camera.compose(&self.camera_from_object)
    }

    /// Frames mapping the adapted trajectory back onto the simulated pose.
    pub fn reversed(&self) -> Self {
        Self::observed(self.world_from_camera, &self.world_from_object_sim, self.world_from_object())
    }

    pub fn validate(&self) -> Result<(), InvalidTransform> {
        self.world_from_camera.validate()?;
        self.camera_from_object.validate()?;
        self.world_from_object_sim.validate()
    }

    /// The rigid map applied to every waypoint.
    pub fn correction(&self) -> Transform<T> {
        self.world_from_camera
            .compose(&self.camera_from_object)
            .compose(&self.world_from_object_sim.invert())
    }
}

pub fn adapt_state<T: Real>(state: &EulerPose<T>, frames: &AdaptationFrames<T>) -> EulerPose<T> {
    let h = frames
        .world_from_camera
        .compose(&frames.camera_from_object)
        .compose(&frames.world_from_object_sim.invert())
        .compose(&state.to_transform());
    EulerPose::from_transform(&h)
}

/// Applies [`adapt_state`] to every waypoint; the gripper timeline is unchanged.
pub fn adapt_trajectory(traj: &Trajectory, frames: &AdaptationFrames<f64>) -> Trajectory {
    let correction = frames.correction();
    Trajectory {
        states: traj
            .states
            .iter()
            .map(|s| EulerPose::from_transform(&correction.compose(&s.to_transform())))
            .collect(),
        gripper: traj.gripper,
    }
}

pub fn adapt_all(trajs: &[Trajectory], frames: &AdaptationFrames<f64>) -> Vec<Trajectory> {
    trajs.par_iter().map(|t| adapt_trajectory(t, frames)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "cause")]
pub enum FilterCause {
    Ik {
        position_error: f64,
        orientation_error: f64,
    },
    JointJump {
        jump: f64,
    },
    Collision {
        collision: Collision,
    },
}

impl FilterCause {
    pub fn name(&self) -> &'static str {
        match self {
            FilterCause::Ik { .. } => "ik",
            FilterCause::JointJump { .. } => "joint_jump",
            FilterCause::Collision { .. } => "collision",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub accepted: bool,
    pub failing_waypoint: Option<usize>,
    pub cause: Option<FilterCause>,
    /// IK solutions up to (excluding) the failing waypoint.
    pub joint_path: Vec<Joints<f64>>,
}

/// IK solvability with a bounded joint jump, and no collision of the open gripper
/// along the solved path (the target object is ignored from closure onwards).
pub fn filter_trajectory(
    traj: &Trajectory,
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    cfg: &SimConfig,
) -> FilterReport {
    let open = FingerState::open(robot, traj.gripper.aperture);
    let mut seed = robot.home();
    let mut path: Vec<Joints<f64>> = Vec::with_capacity(traj.len());
    let fail = |k: usize, cause: FilterCause, path: Vec<Joints<f64>>| FilterReport {
        accepted: false,
        failing_waypoint: Some(k),
        cause: Some(cause),
        joint_path: path,
    };
    for (k, state) in traj.states.iter().enumerate() {
        let q = match robot.inverse_kinematics(&state.to_transform(), &seed, &cfg.ik) {
            Ok(Ok(q)) => q,
            Ok(Err(u)) => {
                let cause = FilterCause::Ik {
                    position_error: u.position_error,
                    orientation_error: u.orientation_error,
                };
                return fail(k, cause, path);
            }
            Err(_) => unreachable!("home configuration matches the robot"),
        };
        if k > 0 {
            let jump = max_joint_jump(&[seed.clone(), q.clone()]);
            if jump > cfg.max_step {
                return fail(k, FilterCause::JointJump { jump }, path);
            }
        }
        let frames = robot.link_frames(&q).expect("length checked");
        let bodies = robot_bodies(robot, &frames, &open);
        if let Some(c) = first_collision(robot, &bodies, scene, k >= traj.gripper.close_step) {
            return fail(k, FilterCause::Collision { collision: c }, path);
        }
        seed = q.clone();
        path.push(q);
    }
    FilterReport {
        accepted: true,
        failing_waypoint: None,
        cause: None,
        joint_path: path,
    }
}

/// Deployment scenario: any combination of filters, then truncation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub top_k: Option<usize>,
    /// Object-frame box the descriptor must lie in.
    pub descriptor_region: Option<([f64; 3], [f64; 3])>,
    pub min_robustness: Option<f64>,
}

/// Filters a ranked list, keeping rank order.
pub fn select_grasps<'a>(ranked: &'a [RankedElite], scenario: &Scenario) -> Vec<&'a RankedElite> {
    let inside = |d: &[f64; 3]| {
        scenario
            .descriptor_region
            .is_none_or(|(lo, hi)| (0..3).all(|i| lo[i] <= d[i] && d[i] <= hi[i]))
    };
    ranked
        .iter()
        .filter(|r| inside(&r.elite.descriptor))
        .filter(|r| scenario.min_robustness.is_none_or(|m| r.quality.robustness >= m))
        .take(scenario.top_k.unwrap_or(usize::MAX))
        .collect()
}
