//! Collision world: table, objects, frames, and robot collision queries.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::collision::{distance_placed, Primitive};
use crate::kinematics::{Joints, LengthMismatch, Robot};
use crate::scalar::{lit, Real};
use crate::se3::Transform;

/// Distance at or below which two shapes are in contact (m).
pub const CONTACT_MARGIN: f64 = 1e-3;
/// Default object density (kg/m³), applied to the vertex bounding-box volume.
pub const DEFAULT_DENSITY: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", try_from = "ObjectFile<T>", into = "ObjectFile<T>")]
pub struct Object<T: Real> {
    pub id: String,
    /// Shapes in the object frame.
    pub shapes: Vec<Primitive<T>>,
    /// Object-frame vertices used for mass properties only.
    pub vertices: Vec<Vector3<T>>,
    pub mass: T,
    pub center_of_mass: Vector3<T>,
    /// World-from-object pose.
    pub pose: Transform<T>,
}

/// On-disk object description: mass and center of mass are derived from the
/// vertices (or the shape bounds) when omitted.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
struct ObjectFile<T: Real> {
    id: String,
    shapes: Vec<Primitive<T>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vertices: Vec<Vector3<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    density: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center_of_mass: Option<Vector3<T>>,
    #[serde(default)]
    pose: Transform<T>,
}

impl<T: Real> TryFrom<ObjectFile<T>> for Object<T> {
    type Error = String;

    fn try_from(f: ObjectFile<T>) -> Result<Self, String> {
        let vertices = if f.vertices.is_empty() {
            shape_bound_corners(&f.shapes)
        } else {
            f.vertices
        };
        let density = f.density.unwrap_or_else(|| lit(DEFAULT_DENSITY));
        let (mass, com) = match (f.mass, f.center_of_mass) {
            (Some(m), Some(c)) => (m, c),
            (m, c) => {
                let (dm, dc) = object_mass_properties(&vertices, density)
                    .map_err(|e| format!("object {}: {e}", f.id))?;
                (m.unwrap_or(dm), c.unwrap_or(dc))
            }
        };
        let obj = Object {
            id: f.id,
            shapes: f.shapes,
            vertices,
            mass,
            center_of_mass: com,
            pose: f.pose,
        };
        obj.validate()?;
        Ok(obj)
    }
}

impl<T: Real> From<Object<T>> for ObjectFile<T> {
    fn from(o: Object<T>) -> Self {
        ObjectFile {
            id: o.id,
            shapes: o.shapes,
            vertices: o.vertices,
            density: None,
            mass: Some(o.mass),
            center_of_mass: Some(o.center_of_mass),
            pose: o.pose,
        }
    }
}

fn shape_bound_corners<T: Real>(shapes: &[Primitive<T>]) -> Vec<Vector3<T>> {
    let Some((lo, hi)) = bounds_of(shapes) else {
        return Vec::new();
    };
    (0..8)
        .map(|i| {
            Vector3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect()
}

fn bounds_of<T: Real>(shapes: &[Primitive<T>]) -> Option<(Vector3<T>, Vector3<T>)> {
    shapes
        .iter()
        .filter_map(|s| s.aabb())
        .reduce(|(a0, a1), (b0, b1)| (a0.inf(&b0), a1.sup(&b1)))
}

impl<T: Real> Object<T> {
    pub fn validate(&self) -> Result<(), String> {
        if self.shapes.is_empty() {
            return Err(format!("object {} has no shapes", self.id));
        }
        if !(self.mass > T::zero()) || !self.mass.is_finite() {
            return Err(format!("object {} mass must be positive", self.id));
        }
        if !self.center_of_mass.iter().all(|v| v.is_finite()) {
            return Err(format!("object {} center of mass is not finite", self.id));
        }
        for s in &self.shapes {
            s.validate()?;
            if matches!(s, Primitive::HalfSpace { .. }) {
                return Err(format!("object {} uses an unbounded shape", self.id));
            }
        }
        self.pose
            .validate()
            .map_err(|e| format!("object {} pose: {e}", self.id))
    }

    /// Object-frame axis-aligned bounds of the collision shapes.
    pub fn local_bounds(&self) -> (Vector3<T>, Vector3<T>) {
        bounds_of(&self.shapes).expect("validated objects have bounded shapes")
    }

    /// Largest distance from the object origin to any object point.
    pub fn bounding_radius(&self) -> T {
        self.shapes
            .iter()
            .filter_map(|s| s.extent_from_origin())
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn world_shapes(&self) -> Vec<Primitive<T>> {
        self.shapes_at(&self.pose)
    }

    pub fn shapes_at(&self, pose: &Transform<T>) -> Vec<Primitive<T>> {
        self.shapes.iter().map(|s| s.transformed(pose)).collect()
    }

    pub fn with_pose(&self, pose: Transform<T>) -> Self {
        Self {
            pose,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct DegenerateVertices(pub String);

/// Mass from density times the vertex bounding-box volume; center of mass is the
/// vertex mean.
pub fn object_mass_properties<T: Real>(
    vertices: &[Vector3<T>],
    density: T,
) -> Result<(T, Vector3<T>), DegenerateVertices> {
    if vertices.len() < 4 {
        return Err(DegenerateVertices(format!(
            "need at least 4 vertices, got {}",
            vertices.len()
        )));
    }
    let lo = vertices.iter().fold(vertices[0], |a, v| a.inf(v));
    let hi = vertices.iter().fold(vertices[0], |a, v| a.sup(v));
    let scale = (hi - lo).amax();
    let o = vertices[0];
    let mut spread = T::zero();
    for i in 1..vertices.len() {
        for j in i + 1..vertices.len() {
            let n = (vertices[i] - o).cross(&(vertices[j] - o));
            if n.norm() <= scale * scale * lit(1e-12) {
                continue;
            }
            let n = n.normalize();
            for v in vertices {
                spread = spread.max(n.dot(&(v - o)).abs());
            }
        }
    }
    if !(spread > scale * lit(1e-9)) {
        return Err(DegenerateVertices("vertices are coplanar".into()));
    }
    let count: T = lit(vertices.len() as f64);
    let com = vertices.iter().fold(Vector3::zeros(), |a, v| a + v) / count;
    let ext = hi - lo;
    Ok((density * ext.x * ext.y * ext.z, com))
}

/// Table, objects and the camera/simulation frames for one target object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Scene<T: Real> {
    pub table: Primitive<T>,
    pub objects: Vec<Object<T>>,
    /// Index of the target object in `objects`.
    #[serde(default)]
    pub target: usize,
    #[serde(default)]
    pub camera_pose: Transform<T>,
    /// Pose the repertoire was generated for.
    pub object_sim_pose: Transform<T>,
}

impl<T: Real> Scene<T> {
    pub fn validate(&self) -> Result<(), String> {
        if !matches!(self.table, Primitive::HalfSpace { .. }) {
            return Err("table must be a half_space".into());
        }
        self.table.validate()?;
        if self.target >= self.objects.len() {
            return Err(format!(
                "target index {} out of range ({} objects)",
                self.target,
                self.objects.len()
            ));
        }
        for o in &self.objects {
            o.validate()?;
        }
        self.camera_pose
            .validate()
            .map_err(|e| format!("camera pose: {e}"))?;
        self.object_sim_pose
            .validate()
            .map_err(|e| format!("object_sim_pose: {e}"))
    }

    pub fn target_object(&self) -> &Object<T> {
        &self.objects[self.target]
    }

    /// Copy with the target object moved to `pose`.
    pub fn with_target_pose(&self, pose: Transform<T>) -> Self {
        let mut s = self.clone();
        s.objects[self.target].pose = pose;
        s
    }

    /// Copy keeping only the target object, designated by id.
    pub fn select_target(&self, id: &str) -> Option<Self> {
        let idx = self.objects.iter().position(|o| o.id == id)?;
        let mut s = self.clone();
        s.target = idx;
        Some(s)
    }
}

/// A robot body with its shapes placed in the world frame.
#[derive(Clone, Debug)]
pub struct Body<T: Real> {
    pub id: usize,
    pub shapes: Vec<Primitive<T>>,
}

/// Opening state of the gripper: common aperture plus per-finger closure travel.
#[derive(Clone, Debug, PartialEq)]
pub struct FingerState<T: Real> {
    pub aperture: T,
    pub closed: Vec<T>,
}

impl<T: Real> FingerState<T> {
    pub fn open(robot: &Robot<T>, aperture: T) -> Self {
        Self {
            aperture,
            closed: vec![T::zero(); robot.gripper.fingers.len()],
        }
    }
}

/// Places every robot body (links, palm, fingers) in the world frame.
pub fn robot_bodies<T: Real>(
    robot: &Robot<T>,
    frames: &[Transform<T>],
    fingers: &FingerState<T>,
) -> Vec<Body<T>> {
    let n = robot.dof();
    let ee = frames[n].compose(&robot.end_effector_offset);
    let mut bodies: Vec<Body<T>> = robot
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| Body {
            id: i,
            shapes: l.shapes.iter().map(|s| s.transformed(&frames[i])).collect(),
        })
        .collect();
    bodies.push(Body {
        id: robot.palm_body(),
        shapes: robot.gripper.palm.iter().map(|s| s.transformed(&ee)).collect(),
    });
    for (f, finger) in robot.gripper.fingers.iter().enumerate() {
        let pose = ee.compose(&robot.gripper.finger_frame(f, fingers.aperture, fingers.closed[f]));
        bodies.push(Body {
            id: robot.finger_body(f),
            shapes: vec![finger.shape.transformed(&pose)],
        });
    }
    bodies
}

/// What a robot body penetrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "with")]
pub enum Collision {
    Table { body: usize },
    Object { body: usize, object: usize },
    SelfCollision { a: usize, b: usize },
}

fn penetrates<T: Real>(a: &[Primitive<T>], b: &[Primitive<T>]) -> bool {
    a.iter()
        .any(|x| b.iter().any(|y| distance_placed(x, y).distance < T::zero()))
}

/// First penetration among placed robot bodies and the scene, in a fixed order:
/// table, objects, self pairs.
pub fn first_collision<T: Real>(
    robot: &Robot<T>,
    bodies: &[Body<T>],
    scene: &Scene<T>,
    ignore_target: bool,
) -> Option<Collision> {
    let table = std::slice::from_ref(&scene.table);
    for b in bodies {
        if !robot.table_exclusions.contains(&b.id) && penetrates(&b.shapes, table) {
            return Some(Collision::Table { body: b.id });
        }
    }
    for (k, o) in scene.objects.iter().enumerate() {
        if ignore_target && k == scene.target {
            continue;
        }
        let shapes = o.world_shapes();
        for b in bodies {
            if penetrates(&b.shapes, &shapes) {
                return Some(Collision::Object {
                    body: b.id,
                    object: k,
                });
            }
        }
    }
    for (i, a) in bodies.iter().enumerate() {
        for b in &bodies[i + 1..] {
            if !robot.excluded_pair(a.id, b.id) && penetrates(&a.shapes, &b.shapes) {
                return Some(Collision::SelfCollision { a: a.id, b: b.id });
            }
        }
    }
    None
}

/// Whether the robot at `q`, gripper fully open, penetrates the table, an object
/// (the target only when `ignore_target` is false) or itself.
pub fn robot_collides<T: Real>(
    robot: &Robot<T>,
    q: &Joints<T>,
    scene: &Scene<T>,
    ignore_target: bool,
) -> Result<bool, LengthMismatch> {
    let frames = robot.link_frames(q)?;
    let fingers = FingerState::open(robot, robot.gripper.max_aperture);
    let bodies = robot_bodies(robot, &frames, &fingers);
    Ok(first_collision(robot, &bodies, scene, ignore_target).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::shape_distance;
    use crate::fixtures;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_corners(lo: f64, hi: f64) -> Vec<Vector3<f64>> {
        shape_bound_corners(&[Primitive::cuboid(
            Vector3::repeat((hi - lo) / 2.0),
            Transform::from_translation(Vector3::repeat((hi + lo) / 2.0)),
        )])
    }

    #[test]
    fn unit_cube_mass_properties() {
        let (m, c) = object_mass_properties(&cube_corners(0.0, 1.0), 1.5).unwrap();
        assert_eq!(m, 1.5);
        assert_eq!(c, Vector3::new(0.5, 0.5, 0.5));
    }

    #[test]
    fn symmetric_cloud_has_zero_com() {
        let (_, c) = object_mass_properties(&cube_corners(-0.3, 0.3), 1.5).unwrap();
        assert!(c.norm() < 1e-15);
    }

    #[test]
    fn degenerate_vertices_rejected() {
        let flat: Vec<_> = (0..6)
            .map(|i| Vector3::new(i as f64, (i * i) as f64, 0.0))
            .collect();
        assert!(object_mass_properties(&flat, 1.5).is_err());
        assert!(object_mass_properties(&flat[..3], 1.5).is_err());
    }

    #[test]
    fn random_cloud_com_is_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vector3<f64>> = (0..50)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let (_, c) = object_mass_properties(&pts, 1.5).unwrap();
        let mut sum = [0.0; 3];
        for p in &pts {
            for k in 0..3 {
                sum[k] += p[k];
            }
        }
        for k in 0..3 {
            assert!((c[k] - sum[k] / 50.0).abs() < 1e-15);
        }
    }

    #[test]
    fn stretched_arm_above_table_is_free() {
        let robot = fixtures::desk_arm();
        let scene = fixtures::empty_table();
        // shoulder at 0.3 m, elbow nearly straight, quill retracted
        assert!(!robot_collides(&robot, &robot.home(), &scene, false).unwrap());
    }

    #[test]
    fn end_effector_below_table_collides() {
        let robot = fixtures::desk_arm();
        let scene = fixtures::empty_table();
        // quill fully extended puts the fingertips near z = -0.085
        let q = Joints(vec![0.0, 1.0, 0.28, 0.0]);
        let ee = robot.forward_kinematics(&q).unwrap();
        assert!(ee.translation.z < 0.0);
        assert!(robot_collides(&robot, &q, &scene, false).unwrap());
    }

    fn exhaustive(robot: &Robot<f64>, q: &Joints<f64>, scene: &Scene<f64>) -> bool {
        let frames = robot.link_frames(q).unwrap();
        let bodies = robot_bodies(robot, &frames, &FingerState::open(robot, robot.gripper.max_aperture));
        let id = Transform::identity();
        let mut hit = false;
        for a in &bodies {
            for s in &a.shapes {
                if !robot.table_exclusions.contains(&a.id)
                    && shape_distance(s, &id, &scene.table, &id).distance < 0.0
                {
                    hit = true;
                }
                for o in &scene.objects {
                    for os in &o.shapes {
                        if shape_distance(s, &id, os, &o.pose).distance < 0.0 {
                            hit = true;
                        }
                    }
                }
                for b in &bodies {
                    if a.id < b.id && !robot.excluded_pair(a.id, b.id) {
                        for t in &b.shapes {
                            if shape_distance(s, &id, t, &id).distance < 0.0 {
                                hit = true;
                            }
                        }
                    }
                }
            }
        }
        hit
    }

    #[test]
    fn random_configurations_match_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scene = fixtures::pinch_box_scene();
        for robot in [fixtures::desk_arm(), fixtures::fr3_like(), fixtures::ur5_like()] {
            let mut hits = 0;
            for _ in 0..300 {
                let q = Joints(
                    robot
                        .joints
                        .iter()
                        .map(|j| rng.random_range(j.limits[0]..j.limits[1]))
                        .collect(),
                );
                let got = robot_collides(&robot, &q, &scene, false).unwrap();
                assert_eq!(got, exhaustive(&robot, &q, &scene));
                hits += got as usize;
            }
            assert!(hits > 0 && hits < 300, "{} hits {hits}", robot.name);
        }
    }

    fn inflate_robot(robot: &Robot<f64>, eps: f64) -> Robot<f64> {
        let mut r = robot.clone();
        for l in &mut r.links {
            for s in &mut l.shapes {
                *s = s.inflated(eps);
            }
        }
        for s in &mut r.gripper.palm {
            *s = s.inflated(eps);
        }
        for f in &mut r.gripper.fingers {
            f.shape = f.shape.inflated(eps);
        }
        r
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn inflation_never_removes_collisions(
            u in proptest::collection::vec(0.0f64..1.0, 4),
            eps in 0.0f64..0.02,
        ) {
            let robot = fixtures::desk_arm();
            let scene = fixtures::pinch_box_scene();
            let q = Joints(robot.joints.iter().zip(&u)
                .map(|(j, t)| j.limits[0] + t * (j.limits[1] - j.limits[0])).collect());
            if robot_collides(&robot, &q, &scene, false).unwrap() {
                let fat = inflate_robot(&robot, eps);
                prop_assert!(robot_collides(&fat, &q, &scene, false).unwrap());
            }
        }
    }

    #[test]
    fn object_file_derives_mass() {
        let json = r#"{"id":"cube","shapes":[{"type":"box","half_extents":[0.5,0.5,0.5]}]}"#;
        let o: Object<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(o.mass, 1.5);
        assert_eq!(o.center_of_mass, Vector3::zeros());
        let back: Object<f64> = serde_json::from_str(&serde_json::to_string(&o).unwrap()).unwrap();
        assert_eq!(back, o);
    }
}
