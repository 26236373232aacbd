//! Rigid transforms, Euler end-effector states and the few SO(3) helpers the rest
//! of the crate needs.
//!
//! Transforms are stored as an explicit rotation matrix plus translation. The
//! homogeneous form is only materialized on request, and inversion always uses the
//! closed form `(Rᵀ, −Rᵀt)`.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::{lit, Real};

/// Euler convention of every 6D end-effector state: intrinsic X-Y-Z, i.e.
/// `R = Rx(roll) · Ry(pitch) · Rz(yaw)`.
pub const EULER_CONVENTION: &str = "intrinsic-xyz";

/// Tolerance used when validating deserialized or user supplied rotations.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Rotation drift above which [`Transform::compose`] re-projects onto SO(3).
pub const DRIFT_THRESHOLD: f64 = 1e-12;

/// Homogeneous SE(3) transform. `a.compose(&b)` maps frame-b coordinates through `b`
/// and then `a`, exactly like the 4×4 product `A·B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Default for Transform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Transform<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform without checking the rotation.
    pub fn from_parts(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<T>) -> Self {
        Self {
            rotation,
            translation: Vector3::zeros(),
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<T>, angle: T) -> Self {
        let n = axis.norm();
        if n == T::zero() {
            return Self::identity();
        }
        Self::from_rotation(exp_so3(&(axis * (angle / n))))
    }

    /// Composition `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        };
        if out.rotation_drift() > drift_threshold::<T>() {
            out.rotation = orthonormalize(&out.rotation);
        }
        out
    }

    /// Closed-form inverse `(Rᵀ, −Rᵀt)`.
    pub fn invert(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * v
    }

    pub fn to_homogeneous(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Reads a homogeneous matrix; fails when the bottom row is not `[0,0,0,1]` or the
    /// rotation block is not a proper rotation within [`ORTHONORMAL_TOLERANCE`].
    pub fn from_homogeneous(m: &Matrix4<T>) -> Result<Self, InvalidTransform> {
        let (z, o) = (T::zero(), T::one());
        if m[(3, 0)] != z || m[(3, 1)] != z || m[(3, 2)] != z || m[(3, 3)] != o {
            return Err(InvalidTransform::BottomRow);
        }
        let t = Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        };
        t.validate()?;
        Ok(t)
    }

    /// Largest entry of `RᵀR − I`.
    pub fn rotation_drift(&self) -> T {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }

    pub fn validate(&self) -> Result<(), InvalidTransform> {
        let tol = lit::<T>(ORTHONORMAL_TOLERANCE);
        if !self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(InvalidTransform::NonFinite);
        }
        if self.rotation_drift() > tol {
            return Err(InvalidTransform::NotOrthonormal);
        }
        if (self.rotation.determinant() - T::one()).abs() > tol {
            return Err(InvalidTransform::NotProper);
        }
        Ok(())
    }

    /// Row-major 4×4 entries, the on-disk representation.
    pub fn to_row_major(&self) -> [T; 16] {
        let m = self.to_homogeneous();
        let mut out = [T::zero(); 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn from_row_major(v: &[T; 16]) -> Result<Self, InvalidTransform> {
        Self::from_homogeneous(&Matrix4::from_row_slice(v))
    }

    /// Largest absolute entry difference between the homogeneous forms.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        (self.rotation - other.rotation)
            .amax()
            .max((self.translation - other.translation).amax())
    }
}

impl<T: Real> Mul for Transform<T> {
    type Output = Transform<T>;
    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

impl<'a, T: Real> Mul<&'a Transform<T>> for &'a Transform<T> {
    type Output = Transform<T>;
    fn mul(self, rhs: &'a Transform<T>) -> Transform<T> {
        self.compose(rhs)
    }
}

/// Why a matrix was rejected as a rigid transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvalidTransform {
    BottomRow,
    NonFinite,
    NotOrthonormal,
    NotProper,
}

impl fmt::Display for InvalidTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            InvalidTransform::BottomRow => "bottom row is not [0, 0, 0, 1]",
            InvalidTransform::NonFinite => "non-finite entry",
            InvalidTransform::NotOrthonormal => "rotation block is not orthonormal",
            InvalidTransform::NotProper => "rotation block has determinant != +1",
        };
        f.write_str(msg)
    }
}

impl std::error::Error for InvalidTransform {}

impl<T: Real> Serialize for Transform<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Transform<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<T> = Vec::deserialize(d)?;
        let arr: [T; 16] = v
            .try_into()
            .map_err(|v: Vec<T>| D::Error::invalid_length(v.len(), &"16 row-major numbers"))?;
        Transform::from_row_major(&arr).map_err(D::Error::custom)
    }
}

fn drift_threshold<T: Real>() -> T {
    lit::<T>(DRIFT_THRESHOLD).max(T::default_epsilon() * lit(64.0))
}

/// Nearest rotation in the Frobenius sense (polar decomposition).
pub fn orthonormalize<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut r = u * v_t;
    if r.determinant() < T::zero() {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

pub fn rot_x<T: Real>(a: T) -> Matrix3<T> {
    let (s, c) = a.sin_cos();
    let (z, o) = (T::zero(), T::one());
    Matrix3::new(o, z, z, z, c, -s, z, s, c)
}

pub fn rot_y<T: Real>(a: T) -> Matrix3<T> {
    let (s, c) = a.sin_cos();
    let (z, o) = (T::zero(), T::one());
    Matrix3::new(c, z, s, z, o, z, -s, z, c)
}

pub fn rot_z<T: Real>(a: T) -> Matrix3<T> {
    let (s, c) = a.sin_cos();
    let (z, o) = (T::zero(), T::one());
    Matrix3::new(c, -s, z, s, c, z, z, z, o)
}

pub(crate) fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Exponential map from a rotation vector to a rotation matrix (Rodrigues).
pub fn exp_so3<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let theta = w.norm();
    if theta == T::zero() {
        return Matrix3::identity();
    }
    let k = skew(&(w / theta));
    let (s, c) = theta.sin_cos();
    Matrix3::identity() + k * s + k * k * (T::one() - c)
}

/// Logarithm map: rotation matrix to rotation vector, angle in `[0, π]`.
pub fn log_so3<T: Real>(r: &Matrix3<T>) -> Vector3<T> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    q.scaled_axis()
}

/// Geodesic angle between two rotations.
pub fn rotation_angle_between<T: Real>(a: &Matrix3<T>, b: &Matrix3<T>) -> T {
    log_so3(&(a.transpose() * b)).norm()
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle<T: Real>(a: T) -> T {
    let pi = T::pi();
    if a > -pi && a <= pi {
        return a;
    }
    let two_pi = T::two_pi();
    let mut r = a % two_pi;
    if r <= -pi {
        r += two_pi;
    } else if r > pi {
        r -= two_pi;
    }
    r
}

/// End-effector state: Cartesian position plus intrinsic X-Y-Z Euler angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerPose<T: Real> {
    pub position: Vector3<T>,
    /// `(roll, pitch, yaw)` in radians, each in `(-π, π]`.
    pub orientation: Vector3<T>,
}

impl<T: Real> Default for EulerPose<T> {
    fn default() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: Vector3::zeros(),
        }
    }
}

impl<T: Real> EulerPose<T> {
    /// Builds a state, wrapping the angles into `(-π, π]`.
    pub fn new(position: Vector3<T>, orientation: Vector3<T>) -> Self {
        Self {
            position,
            orientation: orientation.map(normalize_angle),
        }
    }

    pub fn from_array(v: [T; 6]) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn to_array(&self) -> [T; 6] {
        let (p, o) = (&self.position, &self.orientation);
        [p.x, p.y, p.z, o.x, o.y, o.z]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn rotation(&self) -> Matrix3<T> {
        euler_to_rotation(&self.orientation)
    }

    pub fn to_transform(&self) -> Transform<T> {
        Transform::from_parts(self.rotation(), self.position)
    }

    pub fn from_transform(h: &Transform<T>) -> Self {
        Self {
            position: h.translation,
            orientation: rotation_to_euler(&h.rotation),
        }
    }
}

impl<T: Real> Serialize for EulerPose<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for EulerPose<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[T; 6]>::deserialize(d)?;
        if !v.iter().all(|x| x.is_finite()) {
            return Err(D::Error::custom("non-finite end-effector state"));
        }
        // Stored values are already normalized; keep them bit-exact.
        Ok(Self {
            position: Vector3::new(v[0], v[1], v[2]),
            orientation: Vector3::new(v[3], v[4], v[5]),
        })
    }
}

/// `Rx(roll) · Ry(pitch) · Rz(yaw)`.
pub fn euler_to_rotation<T: Real>(rpy: &Vector3<T>) -> Matrix3<T> {
    rot_x(rpy.x) * rot_y(rpy.y) * rot_z(rpy.z)
}

/// Inverse of [`euler_to_rotation`] with pitch in `[-π/2, π/2]`. At gimbal lock roll
/// is set to zero and the remaining rotation folded into yaw.
pub fn rotation_to_euler<T: Real>(r: &Matrix3<T>) -> Vector3<T> {
    let cos_pitch = (r[(0, 0)] * r[(0, 0)] + r[(0, 1)] * r[(0, 1)]).sqrt();
    let pitch = r[(0, 2)].atan2(cos_pitch);
    let (roll, yaw) = if cos_pitch < lit(1e-10) {
        (T::zero(), r[(1, 0)].atan2(r[(1, 1)]))
    } else {
        ((-r[(1, 2)]).atan2(r[(2, 2)]), (-r[(0, 1)]).atan2(r[(0, 0)]))
    };
    Vector3::new(
        normalize_angle(roll),
        normalize_angle(pitch),
        normalize_angle(yaw),
    )
}

pub fn compose<T: Real>(a: &Transform<T>, b: &Transform<T>) -> Transform<T> {
    a.compose(b)
}

pub fn invert<T: Real>(h: &Transform<T>) -> Transform<T> {
    h.invert()
}

pub fn state_to_transform<T: Real>(s: &EulerPose<T>) -> Transform<T> {
    s.to_transform()
}

pub fn transform_to_state<T: Real>(h: &Transform<T>) -> EulerPose<T> {
    EulerPose::from_transform(h)
}
