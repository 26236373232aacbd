//! Serial-chain robot model: forward kinematics, geometric Jacobian,
//! damped-least-squares inverse kinematics and the joint-jump check.

use std::fmt;

use nalgebra::{Matrix6, Matrix6xX, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::collision::Primitive;
use crate::gripper::Gripper;
use crate::scalar::{lit, Real};
use crate::se3::{exp_so3, log_so3, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Joint<T: Real> {
    pub name: String,
    pub kind: JointKind,
    /// Unit axis in the joint frame.
    pub axis: Vector3<T>,
    /// Joint frame relative to the parent link frame, before the joint motion.
    pub origin: Transform<T>,
    /// `[lo, hi]` in rad or m.
    pub limits: [T; 2],
}

impl<T: Real> Joint<T> {
    pub fn motion(&self, q: T) -> Transform<T> {
        match self.kind {
            JointKind::Revolute => Transform::from_rotation(exp_so3(&(self.axis * q))),
            JointKind::Prismatic => Transform::from_translation(self.axis * q),
        }
    }
}

/// Rigid body attached to a joint frame. Link 0 is the fixed base.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Link<T: Real> {
    /// Lumped at the link origin; defaults to 1 kg when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<T>,
    #[serde(default)]
    pub shapes: Vec<Primitive<T>>,
}

/// Kinematic and collision description of a fixed-base serial manipulator. The base
/// frame coincides with the world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Robot<T: Real> {
    pub name: String,
    pub joints: Vec<Joint<T>>,
    /// `joints.len() + 1` entries; entry `i` rides on joint `i`'s frame (entry 0: base).
    pub links: Vec<Link<T>>,
    pub end_effector_offset: Transform<T>,
    pub gripper: Gripper<T>,
    pub gravity: Vector3<T>,
    /// Extra body pairs never checked for self-collision. Body ids: 0 base,
    /// `1..=n` links, `n+1` palm, `n+2+f` finger `f`.
    #[serde(default)]
    pub self_collision_exclusions: Vec<[usize; 2]>,
    /// Bodies never checked against the table.
    #[serde(default = "default_table_exclusions")]
    pub table_exclusions: Vec<usize>,
}

fn default_table_exclusions() -> Vec<usize> {
    vec![0]
}

pub const MIN_JOINTS: usize = 2;
pub const MAX_JOINTS: usize = 12;
pub const DEFAULT_LINK_MASS: f64 = 1.0;

/// Joint values (rad or m), one per joint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct Joints<T: Real>(pub Vec<T>);

impl<T: Real> Joints<T> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn within_limits(&self, robot: &Robot<T>) -> bool {
        self.0.len() == robot.dof()
            && self
                .0
                .iter()
                .zip(&robot.joints)
                .all(|(q, j)| *q >= j.limits[0] && *q <= j.limits[1])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthMismatch {
    pub expected: usize,
    pub got: usize,
}

impl fmt::Display for LengthMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "joint vector has {} entries, robot has {} joints",
            self.got, self.expected
        )
    }
}

impl std::error::Error for LengthMismatch {}

/// Why an inverse-kinematics query failed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unreachable<T: Real> {
    pub position_error: T,
    pub orientation_error: T,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkConfig {
    pub damping: f64,
    /// Largest per-joint update per iteration.
    pub step_clamp: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            damping: 1e-2,
            step_clamp: 0.2,
            max_iterations: 300,
            position_tolerance: 1e-4,
            orientation_tolerance: 1e-3,
        }
    }
}

impl<T: Real> Robot<T> {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.dof();
        if !(MIN_JOINTS..=MAX_JOINTS).contains(&n) {
            return Err(format!("robot must have 2..=12 joints, has {n}"));
        }
        if self.links.len() != n + 1 {
            return Err(format!("robot needs {} links, has {}", n + 1, self.links.len()));
        }
        for j in &self.joints {
            if (j.axis.norm() - T::one()).abs() > lit(1e-9) {
                return Err(format!("joint {} axis is not unit length", j.name));
            }
            if !(j.limits[0] < j.limits[1]) {
                return Err(format!("joint {} limits are not increasing", j.name));
            }
            j.origin.validate().map_err(|e| format!("joint {}: {e}", j.name))?;
        }
        for l in &self.links {
            for s in &l.shapes {
                s.validate()?;
            }
        }
        self.end_effector_offset
            .validate()
            .map_err(|e| format!("end effector offset: {e}"))?;
        self.gripper.validate()
    }

    fn check_len(&self, q: &Joints<T>) -> Result<(), LengthMismatch> {
        if q.len() == self.dof() {
            Ok(())
        } else {
            Err(LengthMismatch {
                expected: self.dof(),
                got: q.len(),
            })
        }
    }

    /// All-zero configuration clamped into the limits.
    pub fn home(&self) -> Joints<T> {
        self.clamp(&Joints::zeros(self.dof()))
    }

    pub fn clamp(&self, q: &Joints<T>) -> Joints<T> {
        Joints(
            q.0.iter()
                .zip(&self.joints)
                .map(|(v, j)| v.clamp(j.limits[0], j.limits[1]))
                .collect(),
        )
    }

    pub fn link_mass(&self, link: usize) -> T {
        self.links[link].mass.unwrap_or_else(|| lit(DEFAULT_LINK_MASS))
    }

    /// Frames of the base and of every joint after its motion (`dof + 1` entries).
    pub fn link_frames(&self, q: &Joints<T>) -> Result<Vec<Transform<T>>, LengthMismatch> {
        self.check_len(q)?;
        let mut frames = Vec::with_capacity(self.dof() + 1);
        let mut current = Transform::identity();
        frames.push(current);
        for (j, v) in self.joints.iter().zip(&q.0) {
            current = current.compose(&j.origin).compose(&j.motion(*v));
            frames.push(current);
        }
        Ok(frames)
    }

    /// End-effector pose in the base (= world) frame.
    pub fn forward_kinematics(&self, q: &Joints<T>) -> Result<Transform<T>, LengthMismatch> {
        let frames = self.link_frames(q)?;
        Ok(frames[self.dof()].compose(&self.end_effector_offset))
    }

    /// Geometric Jacobian of the end-effector origin: rows 0..3 linear, 3..6 angular.
    pub fn jacobian(&self, q: &Joints<T>) -> Result<Matrix6xX<T>, LengthMismatch> {
        let frames = self.link_frames(q)?;
        let ee = frames[self.dof()].compose(&self.end_effector_offset).translation;
        Ok(self.jacobian_at(&frames, &ee, self.dof()))
    }

    /// Jacobian of a point rigidly attached to link `upto` (joints past it do not move it).
    pub(crate) fn jacobian_at(
        &self,
        frames: &[Transform<T>],
        point: &Vector3<T>,
        upto: usize,
    ) -> Matrix6xX<T> {
        let mut jac = Matrix6xX::zeros(self.dof());
        for (i, joint) in self.joints.iter().enumerate().take(upto) {
            let frame = &frames[i + 1];
            let axis = frame.rotation * joint.axis;
            let col: Vector6<T> = match joint.kind {
                JointKind::Revolute => {
                    let lin = axis.cross(&(point - frame.translation));
                    Vector6::new(lin.x, lin.y, lin.z, axis.x, axis.y, axis.z)
                }
                JointKind::Prismatic => {
                    Vector6::new(axis.x, axis.y, axis.z, T::zero(), T::zero(), T::zero())
                }
            };
            jac.set_column(i, &col);
        }
        jac
    }

    /// Damped-least-squares IK with per-iteration joint clamping.
    pub fn inverse_kinematics(
        &self,
        target: &Transform<T>,
        seed: &Joints<T>,
        cfg: &IkConfig,
    ) -> Result<Result<Joints<T>, Unreachable<T>>, LengthMismatch> {
        self.check_len(seed)?;
        let tol_p: T = lit(cfg.position_tolerance);
        let tol_r: T = lit(cfg.orientation_tolerance);
        let (tight_p, tight_r) = (tol_p * lit(1e-2), tol_r * lit(1e-2));
        let lambda2: T = lit(cfg.damping * cfg.damping);
        let step_clamp: T = lit(cfg.step_clamp);

        let mut q = self.clamp(seed);
        let mut iterations = 0;
        let (mut err_p, mut err_r);
        loop {
            let frames = self.link_frames(&q)?;
            let pose = frames[self.dof()].compose(&self.end_effector_offset);
            let dp = target.translation - pose.translation;
            let dr = log_so3(&(target.rotation * pose.rotation.transpose()));
            err_p = dp.norm();
            err_r = dr.norm();
            if (err_p <= tight_p && err_r <= tight_r) || iterations >= cfg.max_iterations {
                break;
            }
            let e = Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z);
            let jac = self.jacobian_at(&frames, &pose.translation, self.dof());
            let a: Matrix6<T> = &jac * jac.transpose() + Matrix6::identity() * lambda2;
            let Some(chol) = a.cholesky() else { break };
            let mut dq = jac.transpose() * chol.solve(&e);
            let biggest = dq.amax();
            if biggest > step_clamp {
                dq *= step_clamp / biggest;
            }
            let next = self.clamp(&Joints(q.0.iter().zip(dq.iter()).map(|(a, b)| *a + *b).collect()));
            iterations += 1;
            if next == q {
                break;
            }
            q = next;
        }
        if err_p <= tol_p && err_r <= tol_r {
            Ok(Ok(q))
        } else {
            Ok(Err(Unreachable {
                position_error: err_p,
                orientation_error: err_r,
                iterations,
            }))
        }
    }

    /// Conservative bound on how far any gripper point can get from the base origin.
    pub fn max_reach(&self) -> T {
        let chain = self.joints.iter().fold(T::zero(), |acc, j| {
            let travel = match j.kind {
                JointKind::Prismatic => j.limits[0].abs().max(j.limits[1].abs()),
                JointKind::Revolute => T::zero(),
            };
            acc + j.origin.translation.norm() + travel
        });
        chain + self.end_effector_offset.translation.norm() + self.gripper.extent()
    }

    /// Body id of the palm; fingers follow it.
    pub fn palm_body(&self) -> usize {
        self.dof() + 1
    }

    pub fn finger_body(&self, finger: usize) -> usize {
        self.dof() + 2 + finger
    }

    /// Whether two bodies are skipped by self-collision checks.
    pub fn excluded_pair(&self, a: usize, b: usize) -> bool {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let n = self.dof();
        if lo == hi || hi == lo + 1 {
            return true;
        }
        let gripper_body = |x: usize| x > n;
        // Gripper parts touch each other and the last link by construction.
        if gripper_body(hi) && (gripper_body(lo) || lo == n) {
            return true;
        }
        self.self_collision_exclusions
            .iter()
            .any(|p| (p[0] == lo && p[1] == hi) || (p[0] == hi && p[1] == lo))
    }
}

/// Returns `true` iff no joint moves more than `max_step` between consecutive
/// configurations.
pub fn check_joint_jump<T: Real>(qs: &[Joints<T>], max_step: T) -> bool {
    max_joint_jump(qs) <= max_step
}

/// Largest per-joint change between consecutive configurations (0 for fewer than two).
pub fn max_joint_jump<T: Real>(qs: &[Joints<T>]) -> T {
    qs.windows(2)
        .flat_map(|w| w[0].0.iter().zip(&w[1].0).map(|(a, b)| (*a - *b).abs()))
        .fold(T::zero(), |a, b| a.max(b))
}
