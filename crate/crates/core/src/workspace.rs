//! Working-space feasibility grid: adapt a few repertoire trajectories to every
//! object pose of a regular grid and count the ones passing the feasibility filter.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptation::{adapt_trajectory, filter_trajectory, AdaptationFrames, FilterCause};
use crate::error::{Error, Result};
use crate::grasp_sim::{SimConfig, Trajectory};
use crate::kinematics::Robot;
use crate::scene::Scene;
use crate::se3::{rot_y, rot_z, Transform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub divisions: [usize; 3],
    /// Rotations applied to the simulated object orientation (translations ignored).
    pub orientations: Vec<Transform<f64>>,
    pub trajectories_per_pose: usize,
    pub seed: u64,
    /// Object height used when the grid has a single z layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resting_z: Option<f64>,
}

/// Two rotations about y (0°, 90°) times three about z (0°, 120°, 240°).
pub fn default_orientations() -> Vec<Transform<f64>> {
    let mut out = Vec::with_capacity(6);
    for b in [0.0, PI / 2.0] {
        for c in [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0] {
            out.push(Transform::from_rotation(rot_z(c) * rot_y(b)));
        }
    }
    out
}

impl GridSpec {
    /// 0.7 × 0.7 m box centred 0.45 m in front of the base, 50 × 50 positions.
    pub fn default_box(seed: u64, resting_z: f64) -> Self {
        Self {
            min: [0.1, -0.35, 0.0],
            max: [0.8, 0.35, 2.0 * resting_z.max(0.01)],
            divisions: [50, 50, 1],
            orientations: vec![Transform::identity()],
            trajectories_per_pose: 5,
            seed,
            resting_z: Some(resting_z),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.divisions.contains(&0) {
            return Err("grid divisions must be at least 1".into());
        }
        if (0..3).any(|i| !(self.min[i] < self.max[i])) {
            return Err("grid box min must be below max on every axis".into());
        }
        if self.orientations.is_empty() {
            return Err("grid needs at least one orientation".into());
        }
        if self.trajectories_per_pose == 0 {
            return Err("trajectories_per_pose must be at least 1".into());
        }
        for o in &self.orientations {
            o.validate().map_err(|e| format!("orientation: {e}"))?;
        }
        Ok(())
    }

    pub fn positions(&self) -> usize {
        self.divisions.iter().product()
    }

    pub fn pose_count(&self) -> usize {
        self.positions() * self.orientations.len()
    }

    fn center(&self, idx: [usize; 3]) -> Vector3<f64> {
        Vector3::from_fn(|a, _| {
            if a == 2 && self.divisions[2] == 1 {
                if let Some(z) = self.resting_z {
                    return z;
                }
            }
            let step = (self.max[a] - self.min[a]) / self.divisions[a] as f64;
            self.min[a] + step * (idx[a] as f64 + 0.5)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPose {
    pub cell: usize,
    pub orientation: usize,
    pub pose: Transform<f64>,
}

/// Cell-center poses, x slowest and orientation fastest.
pub fn grid_poses(spec: &GridSpec, object_sim_pose: &Transform<f64>) -> Vec<GridPose> {
    let [nx, ny, nz] = spec.divisions;
    let mut out = Vec::with_capacity(spec.pose_count());
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let cell = (i * ny + j) * nz + k;
                let p = spec.center([i, j, k]);
                for (o, r) in spec.orientations.iter().enumerate() {
                    out.push(GridPose {
                        cell,
                        orientation: o,
                        pose: Transform::from_parts(r.rotation * object_sim_pose.rotation, p),
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseResult {
    pub cell: usize,
    pub orientation: usize,
    pub position: [f64; 3],
    pub feasible_count: usize,
    /// Per sampled trajectory: `None` if feasible, otherwise the failing waypoint
    /// and cause.
    pub causes: Vec<Option<(usize, FilterCause)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Indices of the sampled trajectories in the input list.
    pub sampled: Vec<usize>,
    pub poses: Vec<PoseResult>,
}

impl GridResult {
    pub fn feasible_total(&self) -> usize {
        self.poses.iter().map(|p| p.feasible_count).sum()
    }

    /// Feasible count summed over orientations, per grid cell, in cell order.
    pub fn position_totals(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for p in &self.poses {
            match out.last_mut() {
                Some((c, n)) if *c == p.cell => *n += p.feasible_count,
                _ => out.push((p.cell, p.feasible_count)),
            }
        }
        out
    }
}

/// Indices of the trajectories evaluated at every pose. All of them when fewer than
/// `k` are available.
pub fn sample_trajectories(available: usize, k: usize, seed: u64) -> Vec<usize> {
    if available <= k {
        return (0..available).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, available, k).into_vec()
}

pub fn evaluate_grid(
    trajectories: &[Trajectory],
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    spec: &GridSpec,
    sim: &SimConfig,
) -> Result<GridResult> {
    if trajectories.is_empty() {
        return Err(Error::EmptyRepertoire);
    }
    spec.validate().map_err(Error::Config)?;
    let sampled = sample_trajectories(trajectories.len(), spec.trajectories_per_pose, spec.seed);
    let poses = grid_poses(spec, &scene.object_sim_pose)
        .into_par_iter()
        .map(|gp| {
            let frames = AdaptationFrames::observed(scene.camera_pose, &gp.pose, scene.object_sim_pose);
            let moved = scene.with_target_pose(gp.pose);
            let causes: Vec<Option<(usize, FilterCause)>> = sampled
                .iter()
                .map(|&i| {
                    let adapted = adapt_trajectory(&trajectories[i], &frames);
                    let rep = filter_trajectory(&adapted, robot, &moved, sim);
                    rep.failing_waypoint.zip(rep.cause)
                })
                .collect();
            PoseResult {
                cell: gp.cell,
                orientation: gp.orientation,
                position: gp.pose.translation.into(),
                feasible_count: causes.iter().filter(|c| c.is_none()).count(),
                causes,
            }
        })
        .collect();
    Ok(GridResult { sampled, poses })
}

pub const HEATMAP_HEADER: &str = "x,y,z,orientation_index,feasible_count,position_total";

/// One row per pose; `position_total` sums the feasible counts of all orientations at
/// the same position.
pub fn heatmap_csv(result: &GridResult) -> String {
    let totals = result.position_totals();
    let mut s = String::from(HEATMAP_HEADER);
    s.push('\n');
    let mut t = totals.iter().peekable();
    for p in &result.poses {
        while t.peek().is_some_and(|(c, _)| *c != p.cell) {
            t.next();
        }
        let total = t.peek().map_or(0, |(_, n)| *n);
        let [x, y, z] = p.position;
        let _ = writeln!(s, "{x},{y},{z},{},{},{total}", p.orientation, p.feasible_count);
    }
    s
}

pub fn export_heatmap(result: &GridResult, path: &Path) -> Result<()> {
    std::fs::write(path, heatmap_csv(result)).map_err(|e| Error::io(path, e))
}
