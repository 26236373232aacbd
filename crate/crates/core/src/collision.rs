//! Primitive shapes and exact signed distances between them.
//!
//! Every shape is reduced to a core (point, segment, box or half-space) plus a
//! radius, so sphere and capsule queries become point/segment queries. Box pairs use
//! closest-feature enumeration when separated and the separating-axis overlap when
//! penetrating.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::scalar::{lit, Real};
use crate::se3::Transform;

/// A primitive collision shape expressed in some body frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "type", rename_all = "snake_case")]
pub enum Primitive<T: Real> {
    Sphere {
        center: Vector3<T>,
        radius: T,
    },
    Capsule {
        p0: Vector3<T>,
        p1: Vector3<T>,
        radius: T,
    },
    Box {
        half_extents: Vector3<T>,
        #[serde(default)]
        pose: Transform<T>,
    },
    /// Solid region `{x : normal·x ≤ offset}`.
    HalfSpace {
        normal: Vector3<T>,
        offset: T,
    },
}

/// Signed distance plus witness points, both in the query frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Separation<T: Real> {
    /// Negative iff the shapes penetrate.
    pub distance: T,
    pub witness_a: Vector3<T>,
    pub witness_b: Vector3<T>,
    /// Unit vector pointing from `a` toward `b`; translating `b` along it increases
    /// the distance.
    pub normal: Vector3<T>,
}

impl<T: Real> Separation<T> {
    fn swapped(self) -> Self {
        Self {
            distance: self.distance,
            witness_a: self.witness_b,
            witness_b: self.witness_a,
            normal: -self.normal,
        }
    }
}

impl<T: Real> Primitive<T> {
    pub fn sphere(center: Vector3<T>, radius: T) -> Self {
        Primitive::Sphere { center, radius }
    }

    pub fn capsule(p0: Vector3<T>, p1: Vector3<T>, radius: T) -> Self {
        Primitive::Capsule { p0, p1, radius }
    }

    pub fn cuboid(half_extents: Vector3<T>, pose: Transform<T>) -> Self {
        Primitive::Box { half_extents, pose }
    }

    pub fn half_space(normal: Vector3<T>, offset: T) -> Self {
        Primitive::HalfSpace { normal, offset }
    }

    /// Checks radii, extents and normals.
    pub fn validate(&self) -> Result<(), String> {
        let ok = match self {
            Primitive::Sphere { radius, .. } | Primitive::Capsule { radius, .. } => {
                *radius > T::zero() && radius.is_finite()
            }
            Primitive::Box { half_extents, pose } => {
                half_extents.iter().all(|h| *h > T::zero() && h.is_finite())
                    && pose.validate().is_ok()
            }
            Primitive::HalfSpace { normal, offset } => {
                (normal.norm() - T::one()).abs() < lit(1e-9) && offset.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid primitive {self:?}"))
        }
    }

    /// Same shape expressed in the frame `pose` maps into.
    pub fn transformed(&self, pose: &Transform<T>) -> Self {
        match self {
            Primitive::Sphere { center, radius } => Primitive::Sphere {
                center: pose.transform_point(center),
                radius: *radius,
            },
            Primitive::Capsule { p0, p1, radius } => Primitive::Capsule {
                p0: pose.transform_point(p0),
                p1: pose.transform_point(p1),
                radius: *radius,
            },
            Primitive::Box { half_extents, pose: local } => Primitive::Box {
                half_extents: *half_extents,
                pose: pose.compose(local),
            },
            Primitive::HalfSpace { normal, offset } => {
                let n = pose.transform_vector(normal);
                Primitive::HalfSpace {
                    normal: n,
                    offset: *offset + n.dot(&pose.translation),
                }
            }
        }
    }

    /// Grows the shape by `eps` in every direction (half-spaces shift their boundary).
    pub fn inflated(&self, eps: T) -> Self {
        match self {
            Primitive::Sphere { center, radius } => Primitive::Sphere {
                center: *center,
                radius: *radius + eps,
            },
            Primitive::Capsule { p0, p1, radius } => Primitive::Capsule {
                p0: *p0,
                p1: *p1,
                radius: *radius + eps,
            },
            Primitive::Box { half_extents, pose } => Primitive::Box {
                half_extents: half_extents.add_scalar(eps),
                pose: *pose,
            },
            Primitive::HalfSpace { normal, offset } => Primitive::HalfSpace {
                normal: *normal,
                offset: *offset + eps,
            },
        }
    }

    /// Axis-aligned bounds in the shape's own frame; `None` for half-spaces.
    pub fn aabb(&self) -> Option<(Vector3<T>, Vector3<T>)> {
        match self {
            Primitive::Sphere { center, radius } => {
                Some((center.add_scalar(-*radius), center.add_scalar(*radius)))
            }
            Primitive::Capsule { p0, p1, radius } => Some((
                p0.inf(p1).add_scalar(-*radius),
                p0.sup(p1).add_scalar(*radius),
            )),
            Primitive::Box { half_extents, pose } => {
                let ext = pose.rotation.abs() * half_extents;
                Some((pose.translation - ext, pose.translation + ext))
            }
            Primitive::HalfSpace { .. } => None,
        }
    }

    /// Largest distance from the frame origin to any point of the shape.
    pub fn extent_from_origin(&self) -> Option<T> {
        match self {
            Primitive::Sphere { center, radius } => Some(center.norm() + *radius),
            Primitive::Capsule { p0, p1, radius } => Some(p0.norm().max(p1.norm()) + *radius),
            Primitive::Box { half_extents, pose } => Some(
                box_vertices(pose, half_extents)
                    .iter()
                    .map(|v| v.norm())
                    .fold(T::zero(), |a, b| a.max(b)),
            ),
            Primitive::HalfSpace { .. } => None,
        }
    }
}

/// Signed distance between `a` placed at `pose_a` and `b` placed at `pose_b`.
pub fn shape_distance<T: Real>(
    a: &Primitive<T>,
    pose_a: &Transform<T>,
    b: &Primitive<T>,
    pose_b: &Transform<T>,
) -> Separation<T> {
    distance_placed(&a.transformed(pose_a), &b.transformed(pose_b))
}

/// Signed distance between two shapes already expressed in a common frame.
pub fn distance_placed<T: Real>(a: &Primitive<T>, b: &Primitive<T>) -> Separation<T> {
    let (ca, ra) = Core::of(a);
    let (cb, rb) = Core::of(b);
    let core = if ca.rank() <= cb.rank() {
        core_distance(&ca, &cb)
    } else {
        core_distance(&cb, &ca).swapped()
    };
    Separation {
        distance: core.distance - ra - rb,
        witness_a: core.witness_a + core.normal * ra,
        witness_b: core.witness_b - core.normal * rb,
        normal: core.normal,
    }
}

enum Core<T: Real> {
    Point(Vector3<T>),
    Segment(Vector3<T>, Vector3<T>),
    Box(Transform<T>, Vector3<T>),
    HalfSpace(Vector3<T>, T),
}

impl<T: Real> Core<T> {
    fn of(p: &Primitive<T>) -> (Self, T) {
        match p {
            Primitive::Sphere { center, radius } => (Core::Point(*center), *radius),
            Primitive::Capsule { p0, p1, radius } => (Core::Segment(*p0, *p1), *radius),
            Primitive::Box { half_extents, pose } => (Core::Box(*pose, *half_extents), T::zero()),
            Primitive::HalfSpace { normal, offset } => {
                (Core::HalfSpace(*normal, *offset), T::zero())
            }
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Core::Point(_) => 0,
            Core::Segment(..) => 1,
            Core::Box(..) => 2,
            Core::HalfSpace(..) => 3,
        }
    }
}

fn fallback_normal<T: Real>() -> Vector3<T> {
    Vector3::z()
}

fn direction_or<T: Real>(v: Vector3<T>, fallback: Vector3<T>) -> Vector3<T> {
    let n = v.norm();
    if n > T::zero() {
        v / n
    } else {
        fallback
    }
}

fn sep_between_points<T: Real>(pa: Vector3<T>, pb: Vector3<T>) -> Separation<T> {
    let d = pb - pa;
    Separation {
        distance: d.norm(),
        witness_a: pa,
        witness_b: pb,
        normal: direction_or(d, fallback_normal()),
    }
}

/// `a.rank() <= b.rank()` is guaranteed by the caller.
fn core_distance<T: Real>(a: &Core<T>, b: &Core<T>) -> Separation<T> {
    match (a, b) {
        (Core::Point(p), Core::Point(q)) => sep_between_points(*p, *q),
        (Core::Point(p), Core::Segment(s0, s1)) => {
            let q = closest_on_segment(p, s0, s1);
            sep_between_points(*p, q)
        }
        (Core::Segment(a0, a1), Core::Segment(b0, b1)) => {
            let (pa, pb) = closest_segment_segment(a0, a1, b0, b1);
            sep_between_points(pa, pb)
        }
        (Core::Point(p), Core::Box(pose, h)) => point_box(p, pose, h).swapped(),
        (Core::Segment(s0, s1), Core::Box(pose, h)) => segment_box(s0, s1, pose, h).swapped(),
        (Core::Box(pa, ha), Core::Box(pb, hb)) => box_box(pa, ha, pb, hb),
        (Core::Point(p), Core::HalfSpace(n, o)) => {
            support_half_space(&[*p], n, *o).swapped()
        }
        (Core::Segment(s0, s1), Core::HalfSpace(n, o)) => {
            support_half_space(&[*s0, *s1], n, *o).swapped()
        }
        (Core::Box(pose, h), Core::HalfSpace(n, o)) => {
            support_half_space(&box_vertices(pose, h), n, *o).swapped()
        }
        (Core::HalfSpace(n1, o1), Core::HalfSpace(n2, o2)) => half_space_pair(n1, *o1, n2, *o2),
        _ => unreachable!("core pairs are ordered by rank"),
    }
}

pub(crate) fn closest_on_segment<T: Real>(
    p: &Vector3<T>,
    s0: &Vector3<T>,
    s1: &Vector3<T>,
) -> Vector3<T> {
    let d = s1 - s0;
    let len2 = d.norm_squared();
    if len2 == T::zero() {
        return *s0;
    }
    let t = ((p - s0).dot(&d) / len2).clamp(T::zero(), T::one());
    s0 + d * t
}

/// Closest points between segments `[p1,q1]` and `[p2,q2]`.
pub(crate) fn closest_segment_segment<T: Real>(
    p1: &Vector3<T>,
    q1: &Vector3<T>,
    p2: &Vector3<T>,
    q2: &Vector3<T>,
) -> (Vector3<T>, Vector3<T>) {
    let (zero, one) = (T::zero(), T::one());
    let eps = lit::<T>(1e-18);
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= eps && e <= eps {
        return (*p1, *p2);
    }
    if a <= eps {
        s = zero;
        t = (f / e).clamp(zero, one);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = zero;
            s = (-c / a).clamp(zero, one);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps * a * e {
                ((b * f - c * e) / denom).clamp(zero, one)
            } else {
                zero
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < zero {
                t0 = zero;
                s0 = (-c / a).clamp(zero, one);
            } else if t0 > one {
                t0 = one;
                s0 = ((b - c) / a).clamp(zero, one);
            }
            s = s0;
            t = t0;
        }
    }
    (p1 + d1 * s, p2 + d2 * t)
}

pub(crate) fn box_vertices<T: Real>(pose: &Transform<T>, h: &Vector3<T>) -> [Vector3<T>; 8] {
    let mut out = [Vector3::zeros(); 8];
    for (i, v) in out.iter_mut().enumerate() {
        let sx = if i & 1 == 0 { -h.x } else { h.x };
        let sy = if i & 2 == 0 { -h.y } else { h.y };
        let sz = if i & 4 == 0 { -h.z } else { h.z };
        *v = pose.transform_point(&Vector3::new(sx, sy, sz));
    }
    out
}

fn box_edges<T: Real>(v: &[Vector3<T>; 8]) -> [(Vector3<T>, Vector3<T>); 12] {
    const E: [(usize, usize); 12] = [
        (0, 1),
        (2, 3),
        (4, 5),
        (6, 7),
        (0, 2),
        (1, 3),
        (4, 6),
        (5, 7),
        (0, 4),
        (1, 5),
        (2, 6),
        (3, 7),
    ];
    E.map(|(i, j)| (v[i], v[j]))
}

/// Box (a) to point (b).
fn point_box<T: Real>(p: &Vector3<T>, pose: &Transform<T>, h: &Vector3<T>) -> Separation<T> {
    let local = pose.rotation.transpose() * (p - pose.translation);
    let clamped = Vector3::new(
        local.x.clamp(-h.x, h.x),
        local.y.clamp(-h.y, h.y),
        local.z.clamp(-h.z, h.z),
    );
    if clamped != local {
        let q = pose.transform_point(&clamped);
        return sep_between_points(q, *p);
    }
    // Inside: push out through the nearest face.
    let mut axis = 0;
    let mut depth = h.x - local.x.abs();
    for i in 1..3 {
        let d = h[i] - local[i].abs();
        if d < depth {
            depth = d;
            axis = i;
        }
    }
    let sign = if local[axis] < T::zero() { -T::one() } else { T::one() };
    let mut face = local;
    face[axis] = sign * h[axis];
    let mut n = Vector3::zeros();
    n[axis] = sign;
    Separation {
        distance: -depth,
        witness_a: pose.transform_point(&face),
        witness_b: *p,
        normal: pose.transform_vector(&n),
    }
}

/// Box (a) to segment (b).
fn segment_box<T: Real>(
    s0: &Vector3<T>,
    s1: &Vector3<T>,
    pose: &Transform<T>,
    h: &Vector3<T>,
) -> Separation<T> {
    // Inside test: g(t) = max_i |p_i(t)| - h_i is a max of six affine functions of t,
    // so its minimum over [0,1] sits at an endpoint or a pairwise crossing.
    let rt = pose.rotation.transpose();
    let a = rt * (s0 - pose.translation);
    let b = rt * (s1 - pose.translation) - a;
    let mut lines: Vec<(T, T)> = Vec::with_capacity(6);
    for i in 0..3 {
        for s in [T::one(), -T::one()] {
            lines.push((s * b[i], s * a[i] - h[i]));
        }
    }
    let g = |t: T| {
        lines
            .iter()
            .map(|(m, c)| *m * t + *c)
            .fold(-T::max_value().unwrap(), |x, y| x.max(y))
    };
    let mut best_t = T::zero();
    let mut best_g = g(T::zero());
    let mut consider = |t: T| {
        if t >= T::zero() && t <= T::one() {
            let v = g(t);
            if v < best_g {
                best_g = v;
                best_t = t;
            }
        }
    };
    consider(T::one());
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (m1, c1) = lines[i];
            let (m2, c2) = lines[j];
            if m1 != m2 {
                consider((c2 - c1) / (m1 - m2));
            }
        }
    }
    if best_g <= T::zero() {
        let p = s0 + (s1 - s0) * best_t;
        return point_box(&p, pose, h);
    }
    let mut best = point_box(s0, pose, h);
    let cand = point_box(s1, pose, h);
    if cand.distance < best.distance {
        best = cand;
    }
    for (e0, e1) in box_edges(&box_vertices(pose, h)) {
        let (pb, ps) = closest_segment_segment(&e0, &e1, s0, s1);
        let cand = sep_between_points(pb, ps);
        if cand.distance < best.distance {
            best = cand;
        }
    }
    best
}

fn box_box<T: Real>(
    pa: &Transform<T>,
    ha: &Vector3<T>,
    pb: &Transform<T>,
    hb: &Vector3<T>,
) -> Separation<T> {
    // Separating-axis scan: largest gap over the 15 candidate axes.
    let d = pb.translation - pa.translation;
    let mut axes: Vec<Vector3<T>> = Vec::with_capacity(15);
    for i in 0..3 {
        axes.push(pa.rotation.column(i).into_owned());
        axes.push(pb.rotation.column(i).into_owned());
    }
    for i in 0..3 {
        for j in 0..3 {
            let c = pa.rotation.column(i).cross(&pb.rotation.column(j));
            let n = c.norm();
            if n > lit(1e-9) {
                axes.push(c / n);
            }
        }
    }
    let radius = |pose: &Transform<T>, h: &Vector3<T>, l: &Vector3<T>| {
        (0..3).fold(T::zero(), |acc, i| {
            acc + h[i] * pose.rotation.column(i).dot(l).abs()
        })
    };
    let mut max_gap = -T::max_value().unwrap();
    let mut best_axis = Vector3::z();
    for l in &axes {
        let proj = d.dot(l);
        let gap = proj.abs() - radius(pa, ha, l) - radius(pb, hb, l);
        if gap > max_gap {
            max_gap = gap;
            best_axis = if proj < T::zero() { -l } else { *l };
        }
    }
    if max_gap > T::zero() {
        let va = box_vertices(pa, ha);
        let vb = box_vertices(pb, hb);
        let mut best: Option<Separation<T>> = None;
        let mut keep = |s: Separation<T>| {
            if best.is_none_or(|b| s.distance < b.distance) {
                best = Some(s);
            }
        };
        for v in &vb {
            keep(point_box(v, pa, ha));
        }
        for v in &va {
            keep(point_box(v, pb, hb).swapped());
        }
        let (ea, eb) = (box_edges(&va), box_edges(&vb));
        for (a0, a1) in &ea {
            for (b0, b1) in &eb {
                let (x, y) = closest_segment_segment(a0, a1, b0, b1);
                keep(sep_between_points(x, y));
            }
        }
        return best.expect("non-empty feature set");
    }
    // Penetrating: minimum translation along the least-overlap axis.
    let support = |verts: &[Vector3<T>; 8], dir: &Vector3<T>| {
        let mut best = verts[0];
        for v in verts.iter().skip(1) {
            if v.dot(dir) > best.dot(dir) {
                best = *v;
            }
        }
        best
    };
    let witness_a = support(&box_vertices(pa, ha), &best_axis);
    let witness_b = support(&box_vertices(pb, hb), &(-best_axis));
    Separation {
        distance: max_gap,
        witness_a,
        witness_b,
        normal: best_axis,
    }
}

/// Half-space (a) against the convex hull of `points` (b).
fn support_half_space<T: Real>(points: &[Vector3<T>], n: &Vector3<T>, o: T) -> Separation<T> {
    let mut best = points[0];
    for p in points.iter().skip(1) {
        if p.dot(n) < best.dot(n) {
            best = *p;
        }
    }
    let dist = best.dot(n) - o;
    Separation {
        distance: dist,
        witness_a: best - n * dist,
        witness_b: best,
        normal: *n,
    }
}

fn half_space_pair<T: Real>(n1: &Vector3<T>, o1: T, n2: &Vector3<T>, o2: T) -> Separation<T> {
    let anti = (n1 + n2).norm() < lit(1e-12);
    let distance = if anti {
        -(o1 + o2)
    } else {
        -T::max_value().unwrap()
    };
    Separation {
        distance,
        witness_a: n1 * o1,
        witness_b: n2 * o2,
        normal: -n1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::exp_so3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    fn id() -> Transform<f64> {
        Transform::identity()
    }

    #[test]
    fn two_spheres() {
        let a = Primitive::sphere(v(0.0, 0.0, 0.0), 1.0);
        let b = Primitive::sphere(v(3.0, 0.0, 0.0), 1.0);
        let s = shape_distance(&a, &id(), &b, &id());
        assert!((s.distance - 1.0).abs() < 1e-15);
        assert!((s.witness_a - v(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((s.witness_b - v(2.0, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(s.normal, v(1.0, 0.0, 0.0));
    }

    #[test]
    fn sphere_into_table() {
        let table = Primitive::half_space(v(0.0, 0.0, 1.0), 0.0);
        let s = Primitive::sphere(v(0.0, 0.0, 0.05), 0.1);
        let d = shape_distance(&s, &id(), &table, &id());
        assert!((d.distance + 0.05).abs() < 1e-15);
        assert!((d.normal - v(0.0, 0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn capsule_through_box_penetrates() {
        let b = Primitive::cuboid(v(0.1, 0.1, 0.1), id());
        let c = Primitive::capsule(v(-1.0, 0.0, 0.02), v(1.0, 0.0, 0.02), 0.01);
        let s = shape_distance(&c, &id(), &b, &id());
        assert!((s.distance - (-0.09)).abs() < 1e-12, "{}", s.distance);
    }

    #[test]
    fn box_box_face_contact_and_overlap() {
        let a = Primitive::cuboid(v(0.5, 0.5, 0.5), id());
        let b = Primitive::cuboid(v(0.5, 0.5, 0.5), Transform::from_translation(v(1.25, 0.1, 0.0)));
        let s = distance_placed(&a, &b);
        assert!((s.distance - 0.25).abs() < 1e-12);
        let b = Primitive::cuboid(v(0.5, 0.5, 0.5), Transform::from_translation(v(0.9, 0.0, 0.0)));
        let s = distance_placed(&a, &b);
        assert!((s.distance + 0.1).abs() < 1e-12);
        assert!((s.normal - v(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn box_half_space_support() {
        let table = Primitive::half_space(v(0.0, 0.0, 1.0), 0.0);
        let rot = Transform::from_parts(exp_so3(&v(0.0, std::f64::consts::FRAC_PI_4, 0.0)), v(0.0, 0.0, 1.0));
        let b = Primitive::cuboid(v(0.5, 0.5, 0.5), rot);
        let s = distance_placed(&b, &table);
        assert!((s.distance - (1.0 - 0.5 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn anti_parallel_half_spaces() {
        let a = Primitive::half_space(v(0.0, 0.0, 1.0), 0.0);
        let b = Primitive::half_space(v(0.0, 0.0, -1.0), -1.0);
        assert!((distance_placed(&a, &b).distance - 1.0).abs() < 1e-15);
    }

    fn random_pose(rng: &mut ChaCha8Rng, spread: f64) -> Transform<f64> {
        let w = v(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let t = v(
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
        );
        Transform::from_parts(exp_so3(&w), t)
    }

    /// Dense surface samples of a placed capsule or box.
    fn surface_samples(p: &Primitive<f64>, step: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        match p {
            Primitive::Capsule { p0, p1, radius } => {
                let axis = p1 - p0;
                let len = axis.norm();
                let dir = axis / len;
                let u = if dir.x.abs() < 0.9 { v(1.0, 0.0, 0.0) } else { v(0.0, 1.0, 0.0) };
                let e1 = dir.cross(&u).normalize();
                let e2 = dir.cross(&e1);
                let n_around = ((2.0 * std::f64::consts::PI * radius) / step).ceil() as usize + 8;
                let n_along = (len / step).ceil() as usize + 1;
                for i in 0..=n_along {
                    let c = p0 + axis * (i as f64 / n_along as f64);
                    for k in 0..n_around {
                        let a = 2.0 * std::f64::consts::PI * k as f64 / n_around as f64;
                        out.push(c + (e1 * a.cos() + e2 * a.sin()) * *radius);
                    }
                }
                let n_lat = (std::f64::consts::PI * radius / step).ceil() as usize + 4;
                for (end, sgn) in [(p0, -1.0), (p1, 1.0)] {
                    for j in 0..=n_lat {
                        let phi = std::f64::consts::FRAC_PI_2 * j as f64 / n_lat as f64;
                        for k in 0..n_around {
                            let a = 2.0 * std::f64::consts::PI * k as f64 / n_around as f64;
                            let radial = (e1 * a.cos() + e2 * a.sin()) * phi.cos();
                            out.push(end + (radial + dir * (sgn * phi.sin())) * *radius);
                        }
                    }
                }
            }
            Primitive::Box { half_extents: h, pose } => {
                let n = |len: f64| (2.0 * len / step).ceil() as usize + 1;
                for axis in 0..3 {
                    let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
                    for s in [-1.0, 1.0] {
                        for i in 0..=n(h[u]) {
                            for j in 0..=n(h[w]) {
                                let mut p = Vector3::zeros();
                                p[axis] = s * h[axis];
                                p[u] = -h[u] + 2.0 * h[u] * i as f64 / n(h[u]) as f64;
                                p[w] = -h[w] + 2.0 * h[w] * j as f64 / n(h[w]) as f64;
                                out.push(pose.transform_point(&p));
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }

    fn brute_force_distance(a: &Primitive<f64>, b: &Primitive<f64>, step: f64) -> f64 {
        let sa = surface_samples(a, step);
        let sb = surface_samples(b, step);
        let mut best = f64::INFINITY;
        for p in &sa {
            for q in &sb {
                best = best.min((p - q).norm_squared());
            }
        }
        best.sqrt()
    }

    #[test]
    fn capsule_box_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 12 {
            let cap = Primitive::capsule(v(-0.02, 0.0, 0.0), v(0.02, 0.0, 0.0), 0.01)
                .transformed(&random_pose(&mut rng, 0.06));
            let bx = Primitive::cuboid(v(0.02, 0.015, 0.01), random_pose(&mut rng, 0.06));
            let exact = distance_placed(&cap, &bx);
            if exact.distance < 0.003 {
                continue;
            }
            let oracle = brute_force_distance(&cap, &bx, 0.0012);
            assert!(
                (exact.distance - oracle).abs() < 2e-3,
                "exact {} oracle {}",
                exact.distance,
                oracle
            );
            assert!(exact.distance <= oracle + 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn box_box_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 12 {
            let a = Primitive::cuboid(v(0.02, 0.01, 0.015), random_pose(&mut rng, 0.05));
            let b = Primitive::cuboid(v(0.012, 0.02, 0.01), random_pose(&mut rng, 0.05));
            let exact = distance_placed(&a, &b);
            if exact.distance < 0.003 {
                continue;
            }
            let oracle = brute_force_distance(&a, &b, 0.0012);
            assert!((exact.distance - oracle).abs() < 2e-3, "exact {} oracle {}", exact.distance, oracle);
            assert!(exact.distance <= oracle + 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn witnesses_realize_distance_when_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = Primitive::cuboid(v(0.03, 0.02, 0.01), random_pose(&mut rng, 0.1));
            let b = Primitive::capsule(v(0.0, 0.0, -0.02), v(0.0, 0.0, 0.02), 0.01)
                .transformed(&random_pose(&mut rng, 0.1));
            let s = distance_placed(&a, &b);
            if s.distance > 0.0 {
                assert!(((s.witness_b - s.witness_a).norm() - s.distance).abs() < 1e-12);
            }
        }
    }

    fn arb_shape() -> impl Strategy<Value = Primitive<f64>> {
        let pose = (prop::array::uniform3(-3.0..3.0f64), prop::array::uniform3(-0.2..0.2f64))
            .prop_map(|(w, t)| Transform::from_parts(exp_so3(&Vector3::from(w)), Vector3::from(t)));
        prop_oneof![
            (prop::array::uniform3(-0.2..0.2f64), 0.01..0.1f64)
                .prop_map(|(c, r)| Primitive::sphere(Vector3::from(c), r)),
            (prop::array::uniform3(-0.2..0.2f64), prop::array::uniform3(-0.2..0.2f64), 0.01..0.05f64)
                .prop_map(|(a, b, r)| Primitive::capsule(Vector3::from(a), Vector3::from(b), r)),
            (prop::array::uniform3(0.01..0.1f64), pose)
                .prop_map(|(h, p)| Primitive::cuboid(Vector3::from(h), p)),
            (prop::array::uniform3(-1.0..1.0f64), -0.1..0.1f64).prop_filter_map("zero normal", |(n, o)| {
                let n = Vector3::from(n);
                (n.norm() > 0.1).then(|| Primitive::half_space(n.normalize(), o))
            }),
        ]
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in arb_shape(), b in arb_shape()) {
            prop_assume!(!matches!((&a, &b), (Primitive::HalfSpace{..}, Primitive::HalfSpace{..})));
            let ab = distance_placed(&a, &b);
            let ba = distance_placed(&b, &a);
            prop_assert!((ab.distance - ba.distance).abs() < 1e-12);
        }

        #[test]
        fn distance_is_rigidly_invariant(
            a in arb_shape(),
            b in arb_shape(),
            w in prop::array::uniform3(-3.0..3.0f64),
            t in prop::array::uniform3(-1.0..1.0f64),
        ) {
            prop_assume!(!matches!((&a, &b), (Primitive::HalfSpace{..}, Primitive::HalfSpace{..})));
            let g = Transform::from_parts(exp_so3(&Vector3::from(w)), Vector3::from(t));
            let d0 = distance_placed(&a, &b).distance;
            let d1 = shape_distance(&a, &g, &b, &g).distance;
            prop_assert!((d0 - d1).abs() < 1e-9, "{} vs {}", d0, d1);
        }

        #[test]
        fn inflation_never_increases_distance(a in arb_shape(), b in arb_shape(), eps in 0.0..0.05f64) {
            prop_assume!(!matches!((&a, &b), (Primitive::HalfSpace{..}, Primitive::HalfSpace{..})));
            let d0 = distance_placed(&a, &b).distance;
            let d1 = distance_placed(&a.inflated(eps), &b).distance;
            prop_assert!(d1 <= d0 + 1e-12);
        }
    }
}
