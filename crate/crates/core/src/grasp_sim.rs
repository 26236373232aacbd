//! Deterministic open-loop roll-out of a grasp trajectory: IK tracking, gripper
//! closure, contact extraction, a quasi-static grasp predicate, and torque traces.

use std::fmt::Write as _;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::collision::{distance_placed, Primitive, Separation};
use crate::gripper::Synergy;
use crate::kinematics::{max_joint_jump, IkConfig, Joints, LengthMismatch, Robot};
use crate::quality::NoiseSample;
use crate::scalar::Real;
use crate::scene::{first_collision, robot_bodies, Body, Collision, FingerState, Scene, CONTACT_MARGIN};
use crate::se3::{EulerPose, Transform};

pub const MAX_WAYPOINTS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperCommand {
    /// Waypoint index at which closure begins.
    pub close_step: usize,
    pub synergy: Synergy,
    /// Opening width before closure (m).
    pub aperture: f64,
}

/// End-effector waypoints plus the gripper timeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<EulerPose<f64>>,
    pub gripper: GripperCommand,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.states.len();
        if !(2..=MAX_WAYPOINTS).contains(&n) {
            return Err(format!("trajectory needs 2..=1024 waypoints, has {n}"));
        }
        if let Some(i) = self.states.iter().position(|s| !s.is_finite()) {
            return Err(format!("waypoint {i} is not finite"));
        }
        if self.gripper.close_step >= n {
            return Err(format!(
                "close_step {} outside trajectory of {n} waypoints",
                self.gripper.close_step
            ));
        }
        if !(self.gripper.aperture > 0.0) {
            return Err("gripper aperture must be positive".into());
        }
        Ok(())
    }
}

/// A finger touching the target object. Point and normal are in the object frame;
/// the normal points from the object toward the finger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub body: usize,
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub ik: IkConfig,
    /// Largest joint change allowed between consecutive waypoints (rad or m).
    pub max_step: f64,
    pub contact_margin: f64,
    pub closure_substeps: usize,
    pub lift_height: f64,
    pub opposition_angle_deg: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            ik: IkConfig::default(),
            max_step: 0.5,
            contact_margin: CONTACT_MARGIN,
            closure_substeps: 20,
            lift_height: 0.05,
            opposition_angle_deg: 60.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Failure {
    Unreachable {
        step: usize,
        position_error: f64,
        orientation_error: f64,
    },
    JointJump {
        step: usize,
        jump: f64,
    },
    Collision {
        step: usize,
        collision: Collision,
    },
    /// The carried object hit the table or another object.
    ObjectCollision {
        step: usize,
    },
    NoGrasp,
    LiftFailed,
    TooFewContacts,
}

impl Failure {
    pub fn step(&self) -> Option<usize> {
        match *self {
            Failure::Unreachable { step, .. }
            | Failure::JointJump { step, .. }
            | Failure::Collision { step, .. }
            | Failure::ObjectCollision { step } => Some(step),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub success: bool,
    pub failure: Option<Failure>,
    pub joint_path: Vec<Joints<f64>>,
    pub contacts: Vec<Vec<Contact>>,
    pub object_pose_path: Vec<Transform<f64>>,
    pub torque_path: Vec<Vec<f64>>,
    pub grasp_start_step: usize,
    /// First step at which the opposition and span conditions held.
    pub grasp_end_step: Option<usize>,
}

impl GraspOutcome {
    pub fn steps(&self) -> usize {
        self.joint_path.len()
    }

    /// First contact of the episode (lowest body id at the earliest touching step).
    pub fn first_contact(&self) -> Option<&Contact> {
        self.contacts.iter().find_map(|c| c.first())
    }

    pub fn final_contacts(&self) -> &[Contact] {
        self.contacts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Inputs of the grasp predicate, all expressed in the object frame.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspState {
    pub contacts: Vec<Contact>,
    pub center_of_mass: Vector3<f64>,
    /// Contact gaps recomputed after the lift, one per contact.
    pub lift_gaps: Vec<f64>,
    /// Whether the lifted object stays clear of the table and other objects.
    pub lift_clear: bool,
    pub margin: f64,
}

/// Index pair of the most opposed contact normals, if they oppose within `angle_deg`.
pub fn opposed_pair(contacts: &[Contact], angle_deg: f64) -> Option<(usize, usize)> {
    let threshold = -angle_deg.to_radians().cos();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..contacts.len() {
        for j in i + 1..contacts.len() {
            let d = contacts[i].normal.dot(&contacts[j].normal);
            if d <= threshold && best.is_none_or(|b| d < b.0) {
                best = Some((d, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}

/// Opposition (a) and center-of-mass span (b).
pub fn holds_object(contacts: &[Contact], com: &Vector3<f64>, angle_deg: f64) -> bool {
    let Some((i, j)) = opposed_pair(contacts, angle_deg) else {
        return false;
    };
    let axis = contacts[i].normal - contacts[j].normal;
    let norm = axis.norm();
    if norm == 0.0 {
        return false;
    }
    let axis = axis / norm;
    let (a, b) = (contacts[i].point.dot(&axis), contacts[j].point.dot(&axis));
    let c = com.dot(&axis);
    a.min(b) <= c && c <= a.max(b)
}

/// Opposition (a), span (b), and the lift check (c).
pub fn grasp_success(state: &GraspState, angle_deg: f64) -> bool {
    state.contacts.len() >= 2
        && holds_object(&state.contacts, &state.center_of_mass, angle_deg)
        && state.lift_clear
        && state.lift_gaps.len() == state.contacts.len()
        && state.lift_gaps.iter().all(|g| *g <= state.margin)
}

/// Joint torques holding the arm (link masses at link origins) and a payload at the
/// end effector against gravity.
pub fn quasi_static_torques<T: Real>(
    robot: &Robot<T>,
    q: &Joints<T>,
    payload_mass: T,
) -> Result<Vec<T>, LengthMismatch> {
    let frames = robot.link_frames(q)?;
    let ee = frames[robot.dof()].compose(&robot.end_effector_offset).translation;
    Ok(torques_at(robot, &frames, &ee, payload_mass))
}

fn torques_at<T: Real>(
    robot: &Robot<T>,
    frames: &[Transform<T>],
    payload_point: &Vector3<T>,
    payload_mass: T,
) -> Vec<T> {
    let n = robot.dof();
    let g = robot.gravity;
    let mut tau = nalgebra::DVector::<T>::zeros(n);
    let mut add = |point: &Vector3<T>, upto: usize, mass: T| {
        if mass == T::zero() {
            return;
        }
        let f = g * mass;
        let w = Vector6::new(f.x, f.y, f.z, T::zero(), T::zero(), T::zero());
        tau -= robot.jacobian_at(frames, point, upto).transpose() * w;
    };
    for i in 1..=n {
        add(&frames[i].translation, i, robot.link_mass(i));
    }
    add(payload_point, n, payload_mass);
    tau.iter().copied().collect()
}

struct Episode<'a> {
    robot: &'a Robot<f64>,
    scene: Scene<f64>,
    target_shapes: Vec<Primitive<f64>>,
    cfg: &'a SimConfig,
    margin: f64,
    aperture: f64,
    synergy: Synergy,
}

impl Episode<'_> {
    fn finger_shape(&self, ee: &Transform<f64>, fingers: &FingerState<f64>, f: usize) -> Primitive<f64> {
        let pose = ee.compose(&self.robot.gripper.finger_frame(f, fingers.aperture, fingers.closed[f]));
        self.robot.gripper.fingers[f].shape.transformed(&pose)
    }

    fn nearest(&self, shape: &Primitive<f64>, target: &[Primitive<f64>]) -> Separation<f64> {
        target
            .iter()
            .map(|t| distance_placed(t, shape))
            .reduce(|a, b| if b.distance < a.distance { b } else { a })
            .expect("objects have at least one shape")
    }

    /// Conservative advancement of the moving fingers until contact or full travel.
    fn close(&self, ee: &Transform<f64>, fingers: &mut FingerState<f64>, target: &[Primitive<f64>]) {
        let travel = fingers.aperture * 0.5;
        let step = travel / self.cfg.closure_substeps.max(1) as f64;
        let moving: Vec<usize> = (0..fingers.closed.len())
            .filter(|f| self.robot.gripper.finger_moves(*f, self.synergy))
            .collect();
        let mut done = vec![false; fingers.closed.len()];
        for _ in 0..2 * self.cfg.closure_substeps.max(1) {
            let mut advanced = false;
            for &f in &moving {
                if done[f] {
                    continue;
                }
                let d = self.nearest(&self.finger_shape(ee, fingers, f), target).distance;
                if d <= self.margin || fingers.closed[f] >= travel {
                    done[f] = true;
                    continue;
                }
                let adv = step.min(d - 0.5 * self.margin).min(travel - fingers.closed[f]);
                fingers.closed[f] += adv;
                advanced = true;
            }
            if !advanced {
                break;
            }
        }
    }

    fn contacts(
        &self,
        ee: &Transform<f64>,
        fingers: &FingerState<f64>,
        object_pose: &Transform<f64>,
        target: &[Primitive<f64>],
    ) -> Vec<Contact> {
        let inv = object_pose.invert();
        (0..fingers.closed.len())
            .filter_map(|f| {
                let s = self.nearest(&self.finger_shape(ee, fingers, f), target);
                (s.distance <= self.margin).then(|| Contact {
                    point: inv.transform_point(&s.witness_a),
                    normal: inv.transform_vector(&s.normal),
                    body: self.robot.finger_body(f),
                    gap: s.distance,
                })
            })
            .collect()
    }

    fn object_clear(&self, shapes: &[Primitive<f64>]) -> bool {
        let hits = |a: &[Primitive<f64>], b: &[Primitive<f64>]| {
            a.iter().any(|x| b.iter().any(|y| distance_placed(x, y).distance < 0.0))
        };
        if hits(shapes, std::slice::from_ref(&self.scene.table)) {
            return false;
        }
        !self
            .scene
            .objects
            .iter()
            .enumerate()
            .any(|(k, o)| k != self.scene.target && hits(shapes, &o.world_shapes()))
    }

    fn fingers_collide(&self, bodies: &[Body<f64>]) -> Option<Collision> {
        let first_finger = self.robot.finger_body(0);
        let fingers: Vec<Body<f64>> = bodies
            .iter()
            .filter(|b| b.id >= first_finger)
            .cloned()
            .collect();
        // finger pairs are always excluded, so this only reports table and objects
        first_collision(self.robot, &fingers, &self.scene, true)
    }
}

/// Rolls a trajectory out open-loop against the scene, optionally under a noise sample.
pub fn rollout(
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    traj: &Trajectory,
    noise: Option<&NoiseSample>,
    cfg: &SimConfig,
) -> GraspOutcome {
    let n = traj.len();
    let base = scene.target_object();
    let mut object_pose = match noise {
        Some(s) => base.pose.compose(&s.object_offset),
        None => base.pose,
    };
    let (mass, com, margin) = match noise {
        Some(s) => (
            base.mass * (1.0 + s.mass_rel).max(0.0),
            base.center_of_mass + s.com_offset,
            (cfg.contact_margin + s.margin_offset).max(1e-5),
        ),
        None => (base.mass, base.center_of_mass, cfg.contact_margin),
    };
    let ep = Episode {
        robot,
        scene: scene.with_target_pose(object_pose),
        target_shapes: base.shapes.clone(),
        cfg,
        margin,
        aperture: traj.gripper.aperture,
        synergy: traj.gripper.synergy,
    };
    let close_step = traj.gripper.close_step;
    let mut out = GraspOutcome {
        success: false,
        failure: None,
        joint_path: Vec::with_capacity(n),
        contacts: Vec::with_capacity(n),
        object_pose_path: Vec::with_capacity(n),
        torque_path: Vec::with_capacity(n),
        grasp_start_step: close_step,
        grasp_end_step: None,
    };
    let open = FingerState::open(robot, ep.aperture);
    let mut fingers = open.clone();
    let mut seed = robot.home();
    let mut attached: Option<Transform<f64>> = None;
    let dof = robot.dof();

    for k in 0..n {
        let target = traj.states[k].to_transform();
        let q_ik = match robot.inverse_kinematics(&target, &seed, &cfg.ik) {
            Ok(Ok(q)) => q,
            Ok(Err(u)) => {
                out.failure = Some(Failure::Unreachable {
                    step: k,
                    position_error: u.position_error,
                    orientation_error: u.orientation_error,
                });
                return out;
            }
            Err(_) => unreachable!("home configuration matches the robot"),
        };
        if k > 0 {
            let jump = max_joint_jump(&[seed.clone(), q_ik.clone()]);
            if jump > cfg.max_step {
                out.failure = Some(Failure::JointJump { step: k, jump });
                return out;
            }
        }
        seed = q_ik;
        let q = match noise.and_then(|s| s.joint_offsets.get(k)) {
            Some(d) => robot.clamp(&Joints(seed.0.iter().zip(d).map(|(a, b)| a + b).collect())),
            None => seed.clone(),
        };
        let frames = robot.link_frames(&q).expect("length checked");
        let ee = frames[dof].compose(&robot.end_effector_offset);
        let closing = k >= close_step;

        let mut failure = None;
        let open_bodies = robot_bodies(robot, &frames, &open);
        if let Some(c) = first_collision(robot, &open_bodies, &ep.scene, closing) {
            failure = Some(Failure::Collision { step: k, collision: c });
        }
        if failure.is_none() && closing {
            if attached.is_none() {
                ep.close(&ee, &mut fingers, &ep.scene.target_object().shapes_at(&object_pose));
            }
            let bodies = robot_bodies(robot, &frames, &fingers);
            if let Some(c) = ep.fingers_collide(&bodies) {
                failure = Some(Failure::Collision { step: k, collision: c });
            }
        }
        if let Some(rel) = attached {
            object_pose = ee.compose(&rel);
            if failure.is_none() && !ep.object_clear(&base.shapes_at(&object_pose)) {
                failure = Some(Failure::ObjectCollision { step: k });
            }
        }
        let target_world = base.shapes_at(&object_pose);
        let finger_state = if closing { &fingers } else { &open };
        let contacts = ep.contacts(&ee, finger_state, &object_pose, &target_world);
        if closing && attached.is_none() && holds_object(&contacts, &com, cfg.opposition_angle_deg) {
            attached = Some(ee.invert().compose(&object_pose));
            out.grasp_end_step = Some(k);
        }
        let payload = if attached.is_some() { mass } else { 0.0 };
        out.torque_path.push(torques_at(robot, &frames, &ee.translation, payload));
        out.joint_path.push(q);
        out.contacts.push(contacts);
        out.object_pose_path.push(object_pose);
        if failure.is_some() {
            out.failure = failure;
            return out;
        }
        if k + 1 == n {
            let state = ep.lift_state(&ee, &fingers, &object_pose, out.final_contacts(), com);
            out.success = attached.is_some() && grasp_success(&state, cfg.opposition_angle_deg);
            if !out.success {
                out.failure = Some(if attached.is_none() {
                    Failure::NoGrasp
                } else if state.contacts.len() < 2 {
                    Failure::TooFewContacts
                } else {
                    Failure::LiftFailed
                });
            }
        }
    }
    out
}

impl Episode<'_> {
    /// Grasp predicate inputs after lifting gripper and object by the lift height.
    fn lift_state(
        &self,
        ee: &Transform<f64>,
        fingers: &FingerState<f64>,
        object_pose: &Transform<f64>,
        contacts: &[Contact],
        com: Vector3<f64>,
    ) -> GraspState {
        let lift = Transform::from_translation(Vector3::new(0.0, 0.0, self.cfg.lift_height));
        let lifted_ee = lift.compose(ee);
        let lifted_obj = lift.compose(object_pose);
        let shapes = self.target_shapes.iter().map(|s| s.transformed(&lifted_obj)).collect::<Vec<_>>();
        let lift_gaps = contacts
            .iter()
            .map(|c| {
                let f = c.body - self.robot.finger_body(0);
                self.nearest(&self.finger_shape(&lifted_ee, fingers, f), &shapes).distance
            })
            .collect();
        GraspState {
            contacts: contacts.to_vec(),
            center_of_mass: com,
            lift_gaps,
            lift_clear: self.object_clear(&shapes),
            margin: self.margin,
        }
    }
}

/// One row per executed step: joints, end-effector state, object state, torques and
/// contact count.
pub fn export_trace(robot: &Robot<f64>, outcome: &GraspOutcome) -> String {
    let dof = robot.dof();
    let mut s = String::from("step");
    for i in 0..dof {
        let _ = write!(s, ",q{i}");
    }
    for p in ["ee", "obj"] {
        for c in ["x", "y", "z", "roll", "pitch", "yaw"] {
            let _ = write!(s, ",{p}_{c}");
        }
    }
    for i in 0..dof {
        let _ = write!(s, ",tau{i}");
    }
    s.push_str(",contacts\n");
    for k in 0..outcome.steps() {
        let _ = write!(s, "{k}");
        let q = &outcome.joint_path[k];
        for v in &q.0 {
            let _ = write!(s, ",{v}");
        }
        let ee = robot.forward_kinematics(q).expect("recorded joints match the robot");
        for pose in [ee, outcome.object_pose_path[k]] {
            for v in EulerPose::from_transform(&pose).to_array() {
                let _ = write!(s, ",{v}");
            }
        }
        for v in &outcome.torque_path[k] {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{}", outcome.contacts[k].len());
    }
    s
}
