//! Bundled robots, scenes and run configurations.

use nalgebra::Vector3;

use crate::collision::Primitive;
use crate::gripper::{Finger, Gripper, Synergy};
use crate::kinematics::{Joint, Link, Robot};
use crate::persistence::RunConfig;
use crate::scene::Scene;
use crate::se3::Transform;

pub const DESK4: &str = include_str!("../data/robots/desk4.json");
pub const FR3_LIKE: &str = include_str!("../data/robots/fr3_like.json");
pub const UR5_LIKE: &str = include_str!("../data/robots/ur5_like.json");
pub const PINCH_BOX_SCENE: &str = include_str!("../data/scenes/pinch_box.json");
pub const YCB_DESK_SCENE: &str = include_str!("../data/scenes/ycb_desk.json");
pub const PINCH_BOX_CONFIG: &str = include_str!("../data/configs/pinch_box.json");

fn parse<T: serde::de::DeserializeOwned>(name: &str, text: &str) -> T {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("bundled {name} is malformed: {e}"))
}

/// Four-joint SCARA-style desk arm with a downward-pointing parallel gripper.
pub fn desk_arm() -> Robot<f64> {
    parse("desk4", DESK4)
}

/// Seven-joint chain with Franka-like proportions.
pub fn fr3_like() -> Robot<f64> {
    parse("fr3_like", FR3_LIKE)
}

/// Six-joint chain with UR5-like proportions.
pub fn ur5_like() -> Robot<f64> {
    parse("ur5_like", UR5_LIKE)
}

/// A 4 cm cube on the table in front of the desk arm.
pub fn pinch_box_scene() -> Scene<f64> {
    parse("pinch_box scene", PINCH_BOX_SCENE)
}

/// Five primitive stand-ins for common household objects; the target is the
/// pudding box.
pub fn ycb_desk_scene() -> Scene<f64> {
    parse("ycb_desk scene", YCB_DESK_SCENE)
}

/// The pinch-box scene with the cube moved far outside any workspace.
pub fn empty_table() -> Scene<f64> {
    let s = pinch_box_scene();
    s.with_target_pose(Transform::from_translation(Vector3::new(5.0, 5.0, 0.02)))
}

pub fn pinch_box_config() -> RunConfig {
    parse("pinch_box config", PINCH_BOX_CONFIG)
}

/// Chain without collision geometry and with unit link masses, for kinematic tests.
pub fn bare_robot(joints: Vec<Joint<f64>>, end_effector_offset: Transform<f64>) -> Robot<f64> {
    let n = joints.len();
    let pad = Primitive::cuboid(Vector3::new(0.005, 0.005, 0.005), Transform::identity());
    Robot {
        name: "bare".into(),
        joints,
        links: vec![Link::default(); n + 1],
        end_effector_offset,
        gripper: Gripper {
            palm: Vec::new(),
            fingers: [1.0, -1.0]
                .into_iter()
                .map(|s| Finger {
                    name: if s > 0.0 { "left" } else { "right" }.into(),
                    shape: pad.clone(),
                    mount: Vector3::zeros(),
                    open_direction: Vector3::new(0.0, s, 0.0),
                    synergies: vec![Synergy::Parallel],
                })
                .collect(),
            max_aperture: 0.05,
        },
        gravity: Vector3::new(0.0, 0.0, -9.81),
        self_collision_exclusions: Vec::new(),
        table_exclusions: vec![0],
    }
}
