//! Domain-randomization noise, the trajectory quality vector, and fitness.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp_sim::{rollout, GraspOutcome, SimConfig, Trajectory};
use crate::kinematics::Robot;
use crate::qd::Elite;
use crate::scene::Scene;
use crate::se3::{exp_so3, log_so3, orthonormalize, Transform};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectPoseNoise {
    /// Per-axis position standard deviation (m).
    pub sigma_pos: f64,
    /// Per-axis rotation-vector standard deviation (rad).
    pub sigma_rot: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointNoise {
    /// Per-joint, per-waypoint standard deviation (rad or m).
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsNoise {
    pub sigma_mass_rel: f64,
    pub sigma_com: f64,
    pub sigma_contact_margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub object_pose: ObjectPoseNoise,
    pub joints: JointNoise,
    pub dynamics: DynamicsNoise,
    pub samples: usize,
    pub seed: u64,
}

impl NoiseSpec {
    /// Default deviations with the given sample count and seed.
    pub fn with_seed(samples: usize, seed: u64) -> Self {
        Self {
            object_pose: ObjectPoseNoise {
                sigma_pos: 0.005,
                sigma_rot: 0.02,
            },
            joints: JointNoise { sigma: 0.005 },
            dynamics: DynamicsNoise {
                sigma_mass_rel: 0.1,
                sigma_com: 0.002,
                sigma_contact_margin: 2e-4,
            },
            samples,
            seed,
        }
    }

    /// All deviations zero.
    pub fn zero(samples: usize, seed: u64) -> Self {
        Self {
            object_pose: ObjectPoseNoise {
                sigma_pos: 0.0,
                sigma_rot: 0.0,
            },
            joints: JointNoise { sigma: 0.0 },
            dynamics: DynamicsNoise {
                sigma_mass_rel: 0.0,
                sigma_com: 0.0,
                sigma_contact_margin: 0.0,
            },
            samples,
            seed,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let sigmas = [
            self.object_pose.sigma_pos,
            self.object_pose.sigma_rot,
            self.joints.sigma,
            self.dynamics.sigma_mass_rel,
            self.dynamics.sigma_com,
            self.dynamics.sigma_contact_margin,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err("noise deviations must be finite and non-negative".into());
        }
        if self.samples == 0 {
            return Err("noise samples must be at least 1".into());
        }
        Ok(())
    }
}

/// Concrete perturbation draws for one randomized roll-out.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSample {
    /// Applied in the object frame: `pose ∘ object_offset`.
    pub object_offset: Transform<f64>,
    /// One offset vector per waypoint.
    pub joint_offsets: Vec<Vec<f64>>,
    pub mass_rel: f64,
    pub com_offset: Vector3<f64>,
    pub margin_offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseFamily {
    ObjectPose,
    Joints,
    Dynamics,
}

impl NoiseSample {
    pub fn identity(n_waypoints: usize, dof: usize) -> Self {
        Self {
            object_offset: Transform::identity(),
            joint_offsets: vec![vec![0.0; dof]; n_waypoints],
            mass_rel: 0.0,
            com_offset: Vector3::zeros(),
            margin_offset: 0.0,
        }
    }

    /// Keeps only the draws of one family; the others become identity offsets.
    pub fn restricted(&self, family: NoiseFamily) -> Self {
        let mut s = Self::identity(0, 0);
        match family {
            NoiseFamily::ObjectPose => s.object_offset = self.object_offset,
            NoiseFamily::Joints => s.joint_offsets = self.joint_offsets.clone(),
            NoiseFamily::Dynamics => {
                s.mass_rel = self.mass_rel;
                s.com_offset = self.com_offset;
                s.margin_offset = self.margin_offset;
            }
        }
        s
    }
}

/// Zero-mean Gaussian draws, deterministic in `(spec.seed, index)`. Each index owns
/// its own stream of the run generator; draw order is object pose, dynamics, joints.
pub fn sample_noise(spec: &NoiseSpec, index: usize, n_waypoints: usize, dof: usize) -> NoiseSample {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let mut normal = |sigma: f64| sigma * rng.sample::<f64, _>(StandardNormal);
    let op = spec.object_pose;
    let t = Vector3::new(normal(op.sigma_pos), normal(op.sigma_pos), normal(op.sigma_pos));
    let w = Vector3::new(normal(op.sigma_rot), normal(op.sigma_rot), normal(op.sigma_rot));
    let d = spec.dynamics;
    let mass_rel = normal(d.sigma_mass_rel);
    let com_offset = Vector3::new(normal(d.sigma_com), normal(d.sigma_com), normal(d.sigma_com));
    let margin_offset = normal(d.sigma_contact_margin);
    let joint_offsets = (0..n_waypoints)
        .map(|_| (0..dof).map(|_| normal(spec.joints.sigma)).collect())
        .collect();
    NoiseSample {
        object_offset: Transform::from_parts(exp_so3(&w), t),
        joint_offsets,
        mass_rel,
        com_offset,
        margin_offset,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityVector {
    pub touch_var: f64,
    pub obj_s_var: f64,
    pub obj_pose_var: f64,
    pub obj_orient_var: f64,
    pub robustness_noise_joint: f64,
    pub robustness: f64,
    pub robustness_dynamics: f64,
    pub energy: f64,
    pub energy_grasp: f64,
    pub energy_post_grasp: f64,
    /// The unperturbed roll-out failed; robustness ratios are 0.
    pub nominal_failure: bool,
}

/// Which grasp event anchors the touch-variance window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TouchWindow {
    #[default]
    EndOfGrasp,
    BeginningOfGrasp,
}

/// Compensated (Neumaier) sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Trace of the (population) covariance of a point set; 0 for fewer than two points.
pub fn covariance_trace(points: &[Vector3<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mean = Vector3::new(
        neumaier_sum(points.iter().map(|p| p.x)),
        neumaier_sum(points.iter().map(|p| p.y)),
        neumaier_sum(points.iter().map(|p| p.z)),
    ) / n;
    neumaier_sum(points.iter().map(|p| (p - mean).norm_squared())) / n
}

/// Chordal mean: the rotation closest in Frobenius norm to the arithmetic mean.
pub fn chordal_mean(rotations: &[Matrix3<f64>]) -> Matrix3<f64> {
    let sum = rotations.iter().fold(Matrix3::zeros(), |a, r| a + r);
    orthonormalize(&sum)
}

fn window_energy(outcome: &GraspOutcome, from: Option<usize>) -> f64 {
    match from {
        Some(start) => neumaier_sum(
            outcome
                .torque_path
                .iter()
                .skip(start)
                .flat_map(|t| t.iter().map(|v| v.abs())),
        ),
        None => 0.0,
    }
}

/// Variance and energy metrics of a single roll-out (robustness fields left at 0).
pub fn outcome_metrics(outcome: &GraspOutcome, window: TouchWindow) -> QualityVector {
    let anchor = match window {
        TouchWindow::EndOfGrasp => outcome.grasp_end_step,
        TouchWindow::BeginningOfGrasp => Some(outcome.grasp_start_step),
    };
    let mut bodies: Vec<usize> = outcome.contacts.iter().flatten().map(|c| c.body).collect();
    bodies.sort_unstable();
    bodies.dedup();
    let touch_var = match anchor {
        Some(start) => neumaier_sum(bodies.iter().map(|b| {
            let pts: Vec<Vector3<f64>> = outcome
                .contacts
                .iter()
                .skip(start)
                .flat_map(|cs| cs.iter().filter(|c| c.body == *b).map(|c| c.point))
                .collect();
            covariance_trace(&pts)
        })),
        None => 0.0,
    };
    let positions: Vec<Vector3<f64>> = outcome.object_pose_path.iter().map(|p| p.translation).collect();
    let obj_pose_var = covariance_trace(&positions);
    let rotations: Vec<Matrix3<f64>> = outcome.object_pose_path.iter().map(|p| p.rotation).collect();
    let obj_orient_var = if rotations.len() < 2 {
        0.0
    } else {
        let mean = chordal_mean(&rotations).transpose();
        let dev: Vec<Vector3<f64>> = rotations.iter().map(|r| log_so3(&(mean * r))).collect();
        covariance_trace(&dev)
    };
    QualityVector {
        touch_var,
        obj_s_var: obj_pose_var + obj_orient_var,
        obj_pose_var,
        obj_orient_var,
        energy: window_energy(outcome, Some(0)),
        energy_grasp: window_energy(outcome, Some(outcome.grasp_start_step)),
        energy_post_grasp: window_energy(outcome, outcome.grasp_end_step),
        nominal_failure: !outcome.success,
        ..QualityVector::default()
    }
}

/// Fraction of successful roll-outs over `spec.samples` draws of one noise family.
pub fn success_ratio(
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    traj: &Trajectory,
    spec: &NoiseSpec,
    sim: &SimConfig,
    family: NoiseFamily,
) -> f64 {
    let hits: usize = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            let s = sample_noise(spec, i, traj.len(), robot.dof()).restricted(family);
            rollout(robot, scene, traj, Some(&s), sim).success as usize
        })
        .sum();
    hits as f64 / spec.samples as f64
}

/// All quality metrics of a trajectory: nominal-run variances and energies plus the
/// success ratio under each noise family.
pub fn compute_quality(
    traj: &Trajectory,
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    spec: &NoiseSpec,
    sim: &SimConfig,
    window: TouchWindow,
) -> Result<QualityVector> {
    spec.validate().map_err(Error::Contract)?;
    let nominal = rollout(robot, scene, traj, None, sim);
    Ok(quality_from_nominal(&nominal, traj, robot, scene, spec, sim, window))
}

pub(crate) fn quality_from_nominal(
    nominal: &GraspOutcome,
    traj: &Trajectory,
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    spec: &NoiseSpec,
    sim: &SimConfig,
    window: TouchWindow,
) -> QualityVector {
    let mut q = outcome_metrics(nominal, window);
    if nominal.success {
        let ratio = |f| success_ratio(robot, scene, traj, spec, sim, f);
        q.robustness = ratio(NoiseFamily::ObjectPose);
        q.robustness_noise_joint = ratio(NoiseFamily::Joints);
        q.robustness_dynamics = ratio(NoiseFamily::Dynamics);
    }
    q
}

/// Linear weights over the quality vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessWeights {
    pub touch_var: f64,
    pub obj_s_var: f64,
    pub obj_pose_var: f64,
    pub obj_orient_var: f64,
    pub robustness_noise_joint: f64,
    pub robustness: f64,
    pub robustness_dynamics: f64,
    pub energy: f64,
    pub energy_grasp: f64,
    pub energy_post_grasp: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self {
            touch_var: 0.0,
            obj_s_var: 0.0,
            obj_pose_var: 0.0,
            obj_orient_var: 0.0,
            robustness_noise_joint: 0.5,
            robustness: 0.5,
            robustness_dynamics: 0.0,
            energy: 0.0,
            energy_grasp: 0.0,
            energy_post_grasp: 0.0,
        }
    }
}

pub fn fitness(q: &QualityVector, w: &FitnessWeights) -> f64 {
    w.touch_var * q.touch_var
        + w.obj_s_var * q.obj_s_var
        + w.obj_pose_var * q.obj_pose_var
        + w.obj_orient_var * q.obj_orient_var
        + w.robustness_noise_joint * q.robustness_noise_joint
        + w.robustness * q.robustness
        + w.robustness_dynamics * q.robustness_dynamics
        + w.energy * q.energy
        + w.energy_grasp * q.energy_grasp
        + w.energy_post_grasp * q.energy_post_grasp
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedElite {
    pub cell: usize,
    pub elite: Elite,
    pub quality: QualityVector,
    pub fitness: f64,
}

/// Descending fitness, ties broken by ascending descriptor.
pub fn rank_order(a: &RankedElite, b: &RankedElite) -> Ordering {
    b.fitness.total_cmp(&a.fitness).then_with(|| {
        a.elite
            .descriptor
            .iter()
            .zip(&b.elite.descriptor)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Scores every elite with the same noise spec and sorts by fitness.
#[allow(clippy::too_many_arguments)]
pub fn rank_elites(
    elites: &[(usize, Elite)],
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    spec: &NoiseSpec,
    weights: &FitnessWeights,
    sim: &SimConfig,
    window: TouchWindow,
) -> Result<Vec<RankedElite>> {
    spec.validate().map_err(Error::Contract)?;
    let mut ranked = elites
        .par_iter()
        .map(|(cell, e)| {
            let nominal = rollout(robot, scene, &e.trajectory, None, sim);
            let quality = quality_from_nominal(&nominal, &e.trajectory, robot, scene, spec, sim, window);
            RankedElite {
                cell: *cell,
                elite: e.clone(),
                fitness: fitness(&quality, weights),
                quality,
            }
        })
        .collect::<Vec<_>>();
    ranked.sort_by(rank_order);
    Ok(ranked)
}

pub fn rank_repertoire(
    archive: &crate::qd::Archive,
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    spec: &NoiseSpec,
    weights: &FitnessWeights,
    sim: &SimConfig,
    window: TouchWindow,
) -> Result<Vec<RankedElite>> {
    let elites: Vec<(usize, Elite)> = archive.cells.iter().map(|(c, e)| (*c, e.clone())).collect();
    rank_elites(&elites, robot, scene, spec, weights, sim, window)
}

pub const QUALITY_COLUMNS: [&str; 11] = [
    "touch_var",
    "obj_s_var",
    "obj_pose_var",
    "obj_orient_var",
    "robustness_noise_joint",
    "robustness",
    "robustness_dynamics",
    "energy",
    "energy_grasp",
    "energy_post_grasp",
    "nominal_failure",
];

/// One headered row per ranked elite.
pub fn quality_table(ranked: &[RankedElite]) -> String {
    let mut s = String::from("rank,cell,fitness,descriptor_x,descriptor_y,descriptor_z");
    for c in QUALITY_COLUMNS {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (rank, r) in ranked.iter().enumerate() {
        let q = &r.quality;
        let d = &r.elite.descriptor;
        let _ = writeln!(
            s,
            "{rank},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cell,
            r.fitness,
            d[0],
            d[1],
            d[2],
            q.touch_var,
            q.obj_s_var,
            q.obj_pose_var,
            q.obj_orient_var,
            q.robustness_noise_joint,
            q.robustness,
            q.robustness_dynamics,
            q.energy,
            q.energy_grasp,
            q.energy_post_grasp,
            q.nominal_failure
        );
    }
    s
}
