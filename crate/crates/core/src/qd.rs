//! MAP-Elites with a success gate on archive entry.
//!
//! Genomes are a handful of 6D control points plus a closure time and synergy,
//! decoded into dense waypoint trajectories. The descriptor is the first contact
//! point in the object frame. Each evaluation draws from its own stream of the run
//! generator, so batch parallelism never changes results.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grasp_sim::{rollout, Failure, GraspOutcome, GripperCommand, SimConfig, Trajectory};
use crate::gripper::Synergy;
use crate::kinematics::Robot;
use crate::quality::{fitness, outcome_metrics, success_ratio, FitnessWeights, NoiseFamily, NoiseSpec, QualityVector, TouchWindow};
use crate::scene::{Object, Scene};
use crate::se3::{exp_so3, log_so3, EulerPose};

pub const MIN_CONTROL_POINTS: usize = 2;
pub const MAX_CONTROL_POINTS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    /// Control points `[x, y, z, roll, pitch, yaw]`.
    pub waypoints: Vec<[f64; 6]>,
    pub close_fraction: f64,
    pub synergy: Synergy,
}

/// Per-gene search box. A gene with `lower == upper` is fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenomeBounds {
    pub lower: [f64; 6],
    pub upper: [f64; 6],
    pub close_fraction: [f64; 2],
}

impl GenomeBounds {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.lower.iter().zip(&self.upper).all(|(l, u)| l <= u && l.is_finite() && u.is_finite());
        let [c0, c1] = self.close_fraction;
        if !ok || !(0.0 <= c0 && c0 <= c1 && c1 <= 1.0) {
            return Err("genome bounds must satisfy lower <= upper and 0 <= close_fraction <= 1".into());
        }
        Ok(())
    }

    pub fn contains(&self, g: &Genome) -> bool {
        g.waypoints
            .iter()
            .all(|w| (0..6).all(|i| self.lower[i] <= w[i] && w[i] <= self.upper[i]))
            && self.close_fraction[0] <= g.close_fraction
            && g.close_fraction <= self.close_fraction[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationConfig {
    pub sigma_pos: f64,
    pub sigma_rot: f64,
    pub gene_probability: f64,
    pub sigma_close: f64,
    pub synergy_flip: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            sigma_pos: 0.02,
            sigma_rot: 0.1,
            gene_probability: 0.3,
            sigma_close: 0.05,
            synergy_flip: 0.05,
        }
    }
}

impl MutationConfig {
    /// Same operator with every deviation multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma_pos: self.sigma_pos * factor,
            sigma_rot: self.sigma_rot * factor,
            sigma_close: self.sigma_close * factor,
            synergy_flip: self.synergy_flip * factor,
            ..*self
        }
    }
}

impl Genome {
    pub fn validate(&self, bounds: &GenomeBounds) -> Result<(), String> {
        let k = self.waypoints.len();
        if !(MIN_CONTROL_POINTS..=MAX_CONTROL_POINTS).contains(&k) {
            return Err(format!("genome needs 2..=16 control points, has {k}"));
        }
        if !bounds.contains(self) {
            return Err("genome outside its search bounds".into());
        }
        Ok(())
    }

    pub fn random(bounds: &GenomeBounds, k: usize, synergies: &[Synergy], rng: &mut impl Rng) -> Self {
        let mut gene = |lo: f64, hi: f64| if lo < hi { rng.random_range(lo..=hi) } else { lo };
        let waypoints = (0..k)
            .map(|_| std::array::from_fn(|i| gene(bounds.lower[i], bounds.upper[i])))
            .collect();
        let close_fraction = gene(bounds.close_fraction[0], bounds.close_fraction[1]);
        let synergy = synergies[rng.random_range(0..synergies.len())];
        Genome {
            waypoints,
            close_fraction,
            synergy,
        }
    }
}

fn interpolate_orientation(a: &[f64; 6], b: &[f64; 6], t: f64) -> Vector3<f64> {
    let (ea, eb) = (Vector3::new(a[3], a[4], a[5]), Vector3::new(b[3], b[4], b[5]));
    if ea == eb {
        return ea;
    }
    let ra = EulerPose::new(Vector3::zeros(), ea).rotation();
    let rb = EulerPose::new(Vector3::zeros(), eb).rotation();
    let r = ra * exp_so3(&(log_so3(&(ra.transpose() * rb)) * t));
    crate::se3::rotation_to_euler(&r)
}

/// Piecewise-linear interpolation of the control points into `n` waypoints, with
/// orientations interpolated along the rotation geodesic.
pub fn decode(genome: &Genome, n: usize, aperture: f64) -> Trajectory {
    let k = genome.waypoints.len();
    let states = (0..n)
        .map(|i| {
            let s = if n > 1 { (i * (k - 1)) as f64 / (n - 1) as f64 } else { 0.0 };
            let j = (s.floor() as usize).min(k - 1);
            let t = s - j as f64;
            let a = &genome.waypoints[j];
            if t == 0.0 || j + 1 == k {
                return EulerPose::new(Vector3::new(a[0], a[1], a[2]), Vector3::new(a[3], a[4], a[5]));
            }
            let b = &genome.waypoints[j + 1];
            let p = Vector3::new(a[0], a[1], a[2]).lerp(&Vector3::new(b[0], b[1], b[2]), t);
            EulerPose::new(p, interpolate_orientation(a, b, t))
        })
        .collect();
    let close_step = (genome.close_fraction * (n - 1) as f64).round() as usize;
    Trajectory {
        states,
        gripper: GripperCommand {
            close_step: close_step.min(n - 1),
            synergy: genome.synergy,
            aperture,
        },
    }
}

/// Gaussian perturbation of each gene with probability `gene_probability`, clamped
/// into the bounds; occasional synergy change.
pub fn mutate(
    genome: &Genome,
    bounds: &GenomeBounds,
    cfg: &MutationConfig,
    synergies: &[Synergy],
    rng: &mut impl Rng,
) -> Genome {
    let mut g = genome.clone();
    for w in &mut g.waypoints {
        for (i, v) in w.iter_mut().enumerate() {
            let hit = rng.random_bool(cfg.gene_probability.clamp(0.0, 1.0));
            let z: f64 = rng.sample(StandardNormal);
            if hit {
                let sigma = if i < 3 { cfg.sigma_pos } else { cfg.sigma_rot };
                *v = (*v + sigma * z).clamp(bounds.lower[i], bounds.upper[i]);
            }
        }
    }
    let z: f64 = rng.sample(StandardNormal);
    g.close_fraction = (g.close_fraction + cfg.sigma_close * z).clamp(bounds.close_fraction[0], bounds.close_fraction[1]);
    let flip = rng.random_bool(cfg.synergy_flip.clamp(0.0, 1.0));
    let others: Vec<Synergy> = synergies.iter().copied().filter(|s| *s != g.synergy).collect();
    let pick = rng.random_range(0..others.len().max(1));
    if flip && !others.is_empty() {
        g.synergy = others[pick];
    }
    g
}

/// First gripper–object contact point in the object frame.
pub fn compute_descriptor(outcome: &GraspOutcome) -> Option<[f64; 3]> {
    outcome.first_contact().map(|c| [c.point.x, c.point.y, c.point.z])
}

/// Regular grid over a descriptor box; cells are numbered row-major (x slowest).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorGrid {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub cells: [usize; 3],
}

impl DescriptorGrid {
    /// Object bounding box inflated by `margin` on every side.
    pub fn for_object(object: &Object<f64>, cells: [usize; 3], margin: f64) -> Self {
        let (lo, hi) = object.local_bounds();
        Self {
            lower: [lo.x - margin, lo.y - margin, lo.z - margin],
            upper: [hi.x + margin, hi.y + margin, hi.z + margin],
            cells,
        }
    }

    pub fn total(&self) -> usize {
        self.cells.iter().product()
    }

    fn axis_cell(&self, d: f64, i: usize) -> usize {
        let span = self.upper[i] - self.lower[i];
        let c = ((d - self.lower[i]) / span * self.cells[i] as f64).floor();
        if c.is_nan() || c < 0.0 {
            0
        } else {
            (c as usize).min(self.cells[i] - 1)
        }
    }

    /// Cell of a descriptor; points outside the grid go to the nearest border cell.
    pub fn cell_index(&self, d: &[f64; 3]) -> usize {
        let [i, j, k] = std::array::from_fn(|a| self.axis_cell(d[a], a));
        (i * self.cells[1] + j) * self.cells[2] + k
    }

    pub fn cell_bounds(&self, index: usize) -> ([f64; 3], [f64; 3]) {
        let k = index % self.cells[2];
        let j = (index / self.cells[2]) % self.cells[1];
        let i = index / (self.cells[1] * self.cells[2]);
        let idx = [i, j, k];
        let lo = std::array::from_fn(|a| {
            self.lower[a] + (self.upper[a] - self.lower[a]) * idx[a] as f64 / self.cells[a] as f64
        });
        let hi = std::array::from_fn(|a| {
            self.lower[a] + (self.upper[a] - self.lower[a]) * (idx[a] + 1) as f64 / self.cells[a] as f64
        });
        (lo, hi)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cells.contains(&0) {
            return Err("descriptor grid needs at least one cell per axis".into());
        }
        if (0..3).any(|a| !(self.lower[a] < self.upper[a])) {
            return Err("descriptor grid bounds must be increasing".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub success: bool,
    pub steps: usize,
    pub final_contacts: usize,
    pub grasp_start_step: usize,
    pub grasp_end_step: Option<usize>,
    pub failure: Option<Failure>,
}

impl OutcomeSummary {
    pub fn of(o: &GraspOutcome) -> Self {
        Self {
            success: o.success,
            steps: o.steps(),
            final_contacts: o.final_contacts().len(),
            grasp_start_step: o.grasp_start_step,
            grasp_end_step: o.grasp_end_step,
            failure: o.failure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    pub genome: Genome,
    pub trajectory: Trajectory,
    pub fitness: f64,
    pub descriptor: [f64; 3],
    pub summary: OutcomeSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityVector>,
}

impl Elite {
    #[cfg(test)]
    pub(crate) fn placeholder(descriptor: [f64; 3], fitness: f64) -> Self {
        let genome = Genome {
            waypoints: vec![[0.0; 6]; 2],
            close_fraction: 0.5,
            synergy: Synergy::Parallel,
        };
        Self {
            trajectory: decode(&genome, 2, 0.05),
            genome,
            fitness,
            descriptor,
            summary: OutcomeSummary {
                success: true,
                steps: 2,
                final_contacts: 2,
                grasp_start_step: 1,
                grasp_end_step: Some(1),
                failure: None,
            },
            quality: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub grid: DescriptorGrid,
    pub cells: BTreeMap<usize, Elite>,
    pub eval_count: u64,
    pub seed: u64,
    pub config_hash: String,
}

impl Archive {
    pub fn new(grid: DescriptorGrid, seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            grid,
            cells: BTreeMap::new(),
            eval_count: 0,
            seed,
            config_hash: config_hash.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn coverage(&self) -> f64 {
        self.cells.len() as f64 / self.grid.total() as f64
    }

    pub fn best_fitness(&self) -> Option<f64> {
        self.cells.values().map(|e| e.fitness).reduce(f64::max)
    }

    pub fn mean_fitness(&self) -> Option<f64> {
        (!self.cells.is_empty())
            .then(|| self.cells.values().map(|e| e.fitness).sum::<f64>() / self.cells.len() as f64)
    }
}

/// A scored candidate awaiting insertion.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub elite: Elite,
    pub success: bool,
}

/// Cell-replacement rule: empty cell or strictly better fitness. With the success
/// gate on, unsuccessful candidates never enter.
pub fn archive_insert(archive: &mut Archive, candidate: Candidate, success_gate: bool) -> bool {
    if success_gate && !candidate.success {
        return false;
    }
    let cell = archive.grid.cell_index(&candidate.elite.descriptor);
    match archive.cells.get(&cell) {
        Some(inc) if candidate.elite.fitness <= inc.fitness => false,
        _ => {
            archive.cells.insert(cell, candidate.elite);
            true
        }
    }
}

/// Scores decoded trajectories.
pub trait Evaluator: Sync {
    fn evaluate(&self, traj: &Trajectory) -> Evaluation;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub success: bool,
    pub descriptor: Option<[f64; 3]>,
    pub fitness: f64,
    pub summary: OutcomeSummary,
}

/// Roll-out evaluator: descriptor from the nominal run, fitness from the quality
/// vector (noise families are only simulated when their weight is non-zero).
pub struct GraspEvaluator<'a> {
    pub robot: &'a Robot<f64>,
    pub scene: &'a Scene<f64>,
    pub noise: NoiseSpec,
    pub weights: FitnessWeights,
    pub sim: SimConfig,
    pub window: TouchWindow,
}

impl Evaluator for GraspEvaluator<'_> {
    fn evaluate(&self, traj: &Trajectory) -> Evaluation {
        let out = rollout(self.robot, self.scene, traj, None, &self.sim);
        let mut q = outcome_metrics(&out, self.window);
        if out.success {
            let families = [
                (NoiseFamily::ObjectPose, self.weights.robustness),
                (NoiseFamily::Joints, self.weights.robustness_noise_joint),
                (NoiseFamily::Dynamics, self.weights.robustness_dynamics),
            ];
            for (family, w) in families {
                if w == 0.0 {
                    continue;
                }
                let r = success_ratio(self.robot, self.scene, traj, &self.noise, &self.sim, family);
                match family {
                    NoiseFamily::ObjectPose => q.robustness = r,
                    NoiseFamily::Joints => q.robustness_noise_joint = r,
                    NoiseFamily::Dynamics => q.robustness_dynamics = r,
                }
            }
        }
        Evaluation {
            success: out.success,
            descriptor: compute_descriptor(&out),
            fitness: fitness(&q, &self.weights),
            summary: OutcomeSummary::of(&out),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QdConfig {
    pub budget: u64,
    pub batch: usize,
    /// Evaluations drawn as fresh random genomes before mutation starts (random
    /// sampling also continues while the archive is empty).
    pub init_random: u64,
    pub control_points: usize,
    pub waypoints: usize,
    /// Gripper opening; the robot's maximum when omitted.
    pub aperture: Option<f64>,
    pub bounds: GenomeBounds,
    pub grid_cells: [usize; 3],
    pub descriptor_margin: f64,
    pub mutation: MutationConfig,
    pub success_gate: bool,
}

impl Default for QdConfig {
    fn default() -> Self {
        Self {
            budget: 10_000,
            batch: 100,
            init_random: 100,
            control_points: 4,
            waypoints: 24,
            aperture: None,
            bounds: GenomeBounds {
                lower: [-0.5; 6],
                upper: [0.5; 6],
                close_fraction: [0.3, 0.8],
            },
            grid_cells: [10, 10, 10],
            descriptor_margin: 0.02,
            mutation: MutationConfig::default(),
            success_gate: true,
        }
    }
}

impl QdConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch == 0 {
            return Err("batch must be positive".into());
        }
        if self.budget > 0 && self.budget < self.batch as u64 {
            return Err("budget must be at least one batch".into());
        }
        if !(3..=MAX_CONTROL_POINTS).contains(&self.control_points) {
            return Err("control_points must be within 3..=16".into());
        }
        if !(2..=crate::grasp_sim::MAX_WAYPOINTS).contains(&self.waypoints) {
            return Err("waypoints must be within 2..=1024".into());
        }
        self.bounds.validate()?;
        if self.grid_cells.contains(&0) {
            return Err("grid_cells must be positive".into());
        }
        Ok(())
    }
}

/// Per-batch progress record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub eval_count: u64,
    pub coverage: f64,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub successes: u64,
}

impl fmt::Display for GenerationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            self.eval_count, self.coverage, self.best_fitness, self.mean_fitness, self.successes
        )
    }
}

pub const GENERATION_LOG_HEADER: &str = "eval_count\tcoverage\tbest_fitness\tmean_fitness\tsuccesses";

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub archive: Archive,
    pub log: Vec<GenerationLog>,
    pub successes: u64,
    /// Set when the run ended without any archived elite.
    pub diagnostic: Option<String>,
}

/// Generator for evaluation `index` of a run: one stream per evaluation.
pub fn candidate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Genome of evaluation `index` given the archive snapshot at batch start.
fn propose(
    snapshot: &[Genome],
    index: u64,
    cfg: &QdConfig,
    synergies: &[Synergy],
    seed: u64,
) -> Genome {
    let mut rng = candidate_rng(seed, index);
    if snapshot.is_empty() || index < cfg.init_random {
        Genome::random(&cfg.bounds, cfg.control_points, synergies, &mut rng)
    } else {
        let parent = &snapshot[rng.random_range(0..snapshot.len())];
        mutate(parent, &cfg.bounds, &cfg.mutation, synergies, &mut rng)
    }
}

/// Runs exactly `cfg.budget` evaluations and returns the archive and the batch log.
pub fn run_map_elites<E: Evaluator>(
    evaluator: &E,
    grid: DescriptorGrid,
    cfg: &QdConfig,
    synergies: &[Synergy],
    aperture: f64,
    seed: u64,
    config_hash: &str,
    mut progress: impl FnMut(&GenerationLog),
) -> RunReport {
    let mut archive = Archive::new(grid, seed, config_hash);
    let mut log = Vec::new();
    let mut successes = 0u64;
    while archive.eval_count < cfg.budget {
        let size = (cfg.budget - archive.eval_count).min(cfg.batch as u64);
        let snapshot: Vec<Genome> = archive.cells.values().map(|e| e.genome.clone()).collect();
        let start = archive.eval_count;
        let results: Vec<(Genome, Trajectory, Evaluation)> = (start..start + size)
            .into_par_iter()
            .map(|i| {
                let genome = propose(&snapshot, i, cfg, synergies, seed);
                let traj = decode(&genome, cfg.waypoints, aperture);
                let eval = evaluator.evaluate(&traj);
                (genome, traj, eval)
            })
            .collect();
        for (genome, trajectory, eval) in results {
            archive.eval_count += 1;
            successes += eval.success as u64;
            let Some(descriptor) = eval.descriptor else { continue };
            let candidate = Candidate {
                elite: Elite {
                    genome,
                    trajectory,
                    fitness: eval.fitness,
                    descriptor,
                    summary: eval.summary,
                    quality: None,
                },
                success: eval.success,
            };
            archive_insert(&mut archive, candidate, cfg.success_gate);
        }
        let entry = GenerationLog {
            eval_count: archive.eval_count,
            coverage: archive.coverage(),
            best_fitness: archive.best_fitness().unwrap_or(0.0),
            mean_fitness: archive.mean_fitness().unwrap_or(0.0),
            successes,
        };
        progress(&entry);
        log.push(entry);
    }
    let diagnostic = archive.is_empty().then(|| {
        format!(
            "no elite archived after {} evaluations ({} successful roll-outs)",
            archive.eval_count, successes
        )
    });
    RunReport {
        archive,
        log,
        successes,
        diagnostic,
    }
}

/// Grasp-repertoire run on a robot and scene with the roll-out evaluator.
#[allow(clippy::too_many_arguments)]
pub fn run_grasp_map_elites(
    robot: &Robot<f64>,
    scene: &Scene<f64>,
    cfg: &QdConfig,
    noise: &NoiseSpec,
    weights: &FitnessWeights,
    sim: &SimConfig,
    window: TouchWindow,
    seed: u64,
    config_hash: &str,
    progress: impl FnMut(&GenerationLog),
) -> RunReport {
    let evaluator = GraspEvaluator {
        robot,
        scene,
        noise: *noise,
        weights: *weights,
        sim: *sim,
        window,
    };
    let grid = DescriptorGrid::for_object(scene.target_object(), cfg.grid_cells, cfg.descriptor_margin);
    let aperture = cfg.aperture.unwrap_or(robot.gripper.max_aperture);
    run_map_elites(
        &evaluator,
        grid,
        cfg,
        &robot.gripper.synergies(),
        aperture,
        seed,
        config_hash,
        progress,
    )
}
