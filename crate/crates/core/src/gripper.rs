//! Gripper geometry: palm shapes plus fingers that slide along fixed closing
//! directions. Parallel jaws and multi-finger synergies share one model.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::collision::Primitive;
use crate::scalar::{lit, Real};
use crate::se3::Transform;

/// Closure primitive: which fingers move when the gripper closes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Synergy {
    Parallel,
    ThumbIndex,
    ThumbMid,
    ThumbIndexMid,
    AllHand,
}

impl Synergy {
    pub const ALL: [Synergy; 5] = [
        Synergy::Parallel,
        Synergy::ThumbIndex,
        Synergy::ThumbMid,
        Synergy::ThumbIndexMid,
        Synergy::AllHand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Synergy::Parallel => "parallel",
            Synergy::ThumbIndex => "thumb_index",
            Synergy::ThumbMid => "thumb_mid",
            Synergy::ThumbIndexMid => "thumb_index_mid",
            Synergy::AllHand => "all_hand",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Finger<T: Real> {
    pub name: String,
    /// Shape in the finger frame. The frame origin sits on the contact face.
    pub shape: Primitive<T>,
    /// Finger frame origin in the end-effector frame when fully closed.
    pub mount: Vector3<T>,
    /// Unit direction (end-effector frame) the finger moves along when opening.
    pub open_direction: Vector3<T>,
    pub synergies: Vec<Synergy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Gripper<T: Real> {
    /// Palm shapes in the end-effector frame.
    #[serde(default)]
    pub palm: Vec<Primitive<T>>,
    pub fingers: Vec<Finger<T>>,
    /// Largest admissible opening width (m).
    pub max_aperture: T,
}

impl<T: Real> Gripper<T> {
    /// Synergies supported by at least one finger, in canonical order.
    pub fn synergies(&self) -> Vec<Synergy> {
        Synergy::ALL
            .into_iter()
            .filter(|s| self.fingers.iter().any(|f| f.synergies.contains(s)))
            .collect()
    }

    pub fn finger_moves(&self, finger: usize, synergy: Synergy) -> bool {
        self.fingers[finger].synergies.contains(&synergy)
    }

    /// Finger frame in the end-effector frame for a given opening `aperture` and
    /// closure travel `closed` (0 = open, `aperture / 2` = fully shut).
    pub fn finger_frame(&self, finger: usize, aperture: T, closed: T) -> Transform<T> {
        let f = &self.fingers[finger];
        let half = aperture * lit(0.5);
        Transform::from_translation(f.mount + f.open_direction * (half - closed))
    }

    /// Maximum distance from the end-effector origin to any gripper point.
    pub fn extent(&self) -> T {
        let palm = self
            .palm
            .iter()
            .filter_map(|s| s.extent_from_origin())
            .fold(T::zero(), |a, b| a.max(b));
        let open = self.max_aperture * lit(0.5);
        self.fingers.iter().fold(palm, |acc, f| {
            let pose = Transform::from_translation(f.mount + f.open_direction * open);
            let e = f
                .shape
                .transformed(&pose)
                .extent_from_origin()
                .unwrap_or(T::zero());
            let closed = f
                .shape
                .transformed(&Transform::from_translation(f.mount))
                .extent_from_origin()
                .unwrap_or(T::zero());
            acc.max(e).max(closed)
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.fingers.is_empty() {
            return Err("gripper has no fingers".into());
        }
        if !(self.max_aperture > T::zero()) {
            return Err("gripper max_aperture must be positive".into());
        }
        for s in &self.palm {
            s.validate()?;
        }
        for f in &self.fingers {
            f.shape.validate()?;
            if (f.open_direction.norm() - T::one()).abs() > lit(1e-9) {
                return Err(format!("finger {} open_direction is not unit", f.name));
            }
            if f.synergies.is_empty() {
                return Err(format!("finger {} belongs to no synergy", f.name));
            }
        }
        Ok(())
    }
}
