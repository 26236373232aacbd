//! Command-line front end: generate → score → select → adapt → grid-eval → export.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::adaptation::{adapt_trajectory, filter_trajectory, select_grasps, AdaptationFrames, Scenario};
use crate::error::{Error, Result};
use crate::grasp_sim::{export_trace, rollout};
use crate::kinematics::Robot;
use crate::persistence::{
    adapted_jsonl, load_config, load_repertoire_for, load_robot, load_scene, save_repertoire, write, AdaptedRecord,
    Repertoire, RunConfig,
};
use crate::qd::{run_grasp_map_elites, GENERATION_LOG_HEADER};
use crate::quality::{quality_table, rank_repertoire, RankedElite};
use crate::scene::Scene;
use crate::se3::{EulerPose, Transform};
use crate::workspace::{default_orientations, evaluate_grid, export_heatmap, GridSpec};

pub const WORKERS_ENV: &str = "GRASP_REPERTOIRE_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "grasp-repertoire", version, about = "Quality-diversity grasp repertoires")]
pub struct Cli {
    /// Worker threads (default: logical cores, or $GRASP_REPERTOIRE_WORKERS).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Models {
    #[arg(long)]
    pub robot: PathBuf,
    #[arg(long)]
    pub scene: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run MAP-Elites and save the repertoire.
    Generate {
        #[command(flatten)]
        models: Models,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Tab-separated per-batch log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score every elite under noise and write the ranked quality table.
    Score {
        #[command(flatten)]
        models: Models,
        #[arg(long)]
        repertoire: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keep the elites matching a deployment scenario.
    Select {
        #[command(flatten)]
        models: Models,
        #[arg(long)]
        repertoire: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        /// Object-frame box `x0,y0,z0,x1,y1,z1` the descriptor must lie in.
        #[arg(long, value_parser = parse_floats::<6>)]
        region: Option<[f64; 6]>,
        #[arg(long)]
        min_robustness: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-target every elite to an observed object pose and filter the result.
    Adapt {
        #[command(flatten)]
        models: Models,
        #[arg(long)]
        repertoire: PathBuf,
        /// JSON file with world_from_camera, camera_from_object and
        /// world_from_object_sim (16 row-major numbers or 6 pose numbers each).
        #[arg(long, conflicts_with = "object_pose")]
        frames: Option<PathBuf>,
        /// Observed object pose `x,y,z,roll,pitch,yaw` in the world, seen through the
        /// scene camera.
        #[arg(long, value_parser = parse_floats::<6>)]
        object_pose: Option<[f64; 6]>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feasible adaptations over a grid of object poses.
    GridEval {
        #[command(flatten)]
        models: Models,
        #[arg(long)]
        repertoire: PathBuf,
        /// `x0,y0,z0,x1,y1,z1`; the run configuration's grid when omitted.
        #[arg(long = "box", value_parser = parse_floats::<6>)]
        bounds: Option<[f64; 6]>,
        #[arg(long, value_parser = parse_ints::<3>)]
        div: Option<[usize; 3]>,
        #[arg(long, value_enum)]
        orient_set: Option<OrientSet>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one roll-out trace per elite.
    Export {
        #[command(flatten)]
        models: Models,
        #[arg(long)]
        repertoire: PathBuf,
        /// Only this archive cell.
        #[arg(long)]
        cell: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrientSet {
    /// The simulated orientation only.
    Identity,
    /// Two rotations about y times three about z.
    Six,
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_ints<const N: usize>(s: &str) -> std::result::Result<[usize; N], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("'{x}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<usize>| format!("expected {N} comma-separated integers, got {}", v.len()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FrameValue {
    Matrix([f64; 16]),
    Pose([f64; 6]),
}

impl FrameValue {
    fn transform(&self) -> Result<Transform<f64>> {
        match self {
            FrameValue::Matrix(m) => Ok(Transform::from_row_major(m)?),
            FrameValue::Pose(p) => Ok(EulerPose::from_array(*p).to_transform()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FramesFile {
    world_from_camera: FrameValue,
    camera_from_object: FrameValue,
    world_from_object_sim: FrameValue,
}

fn load_frames(path: &Path) -> Result<AdaptationFrames<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: FramesFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })?;
    Ok(AdaptationFrames {
        world_from_camera: f.world_from_camera.transform()?,
        camera_from_object: f.camera_from_object.transform()?,
        world_from_object_sim: f.world_from_object_sim.transform()?,
    })
}

fn models(m: &Models) -> Result<(Robot<f64>, Scene<f64>)> {
    Ok((load_robot(&m.robot)?, load_scene(&m.scene)?))
}

fn rank(rep: &Repertoire, robot: &Robot<f64>, scene: &Scene<f64>, samples: Option<usize>) -> Result<Vec<RankedElite>> {
    let c = &rep.config;
    let mut noise = c.noise;
    if let Some(s) = samples {
        noise.samples = s;
    }
    let scene = scene.with_target_pose(rep.object_sim_pose);
    rank_repertoire(&rep.archive, robot, &scene, &noise, &c.weights, &c.sim, c.touch_window)
}

fn generate(m: &Models, config: &Path, budget: Option<u64>, seed: Option<u64>, out: &Path, log: Option<&Path>) -> Result<()> {
    let (robot, scene) = models(m)?;
    let mut cfg: RunConfig = load_config(config)?;
    if let Some(b) = budget {
        cfg.qd.budget = b;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if cfg.qd.budget > 0 && cfg.qd.budget < cfg.qd.batch as u64 {
        cfg.qd.batch = cfg.qd.budget as usize;
    }
    cfg.validate()?;
    let hash = cfg.hash();
    eprintln!("{GENERATION_LOG_HEADER}");
    let report = run_grasp_map_elites(
        &robot,
        &scene,
        &cfg.qd,
        &cfg.noise,
        &cfg.weights,
        &cfg.sim,
        cfg.touch_window,
        cfg.seed,
        &hash,
        |g| eprintln!("{g}"),
    );
    if let Some(path) = log {
        let mut s = format!("{GENERATION_LOG_HEADER}\n");
        for g in &report.log {
            s.push_str(&format!("{g}\n"));
        }
        write(path, &s)?;
    }
    if let Some(d) = &report.diagnostic {
        eprintln!("warning: {d}");
    }
    eprintln!(
        "{} elites, coverage {:.4}, {} evaluations",
        report.archive.len(),
        report.archive.coverage(),
        report.archive.eval_count
    );
    save_repertoire(&Repertoire::new(&robot, &scene, cfg, report.archive), out)
}

fn run_command(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            models: m,
            config,
            budget,
            seed,
            out,
            log,
        } => generate(&m, &config, budget, seed, &out, log.as_deref()),
        Command::Score {
            models: m,
            repertoire,
            samples,
            out,
        } => {
            let (robot, scene) = models(&m)?;
            let rep = load_repertoire_for(&repertoire, &robot, &scene)?;
            if rep.archive.is_empty() {
                return Err(Error::EmptyRepertoire);
            }
            let table = quality_table(&rank(&rep, &robot, &scene, samples)?);
            match out {
                Some(p) => write(&p, &table),
                None => {
                    print!("{table}");
                    Ok(())
                }
            }
        }
        Command::Select {
            models: m,
            repertoire,
            top_k,
            region,
            min_robustness,
            samples,
            out,
        } => {
            let (robot, scene) = models(&m)?;
            let rep = load_repertoire_for(&repertoire, &robot, &scene)?;
            let ranked = rank(&rep, &robot, &scene, samples)?;
            let scenario = Scenario {
                top_k,
                descriptor_region: region.map(|r| ([r[0], r[1], r[2]], [r[3], r[4], r[5]])),
                min_robustness,
            };
            let chosen = select_grasps(&ranked, &scenario);
            eprintln!("selected {} of {} elites", chosen.len(), ranked.len());
            let mut sub = rep.clone();
            sub.archive.cells = chosen
                .iter()
                .map(|r| {
                    let mut e = r.elite.clone();
                    e.quality = Some(r.quality);
                    (r.cell, e)
                })
                .collect();
            save_repertoire(&sub, &out)
        }
        Command::Adapt {
            models: m,
            repertoire,
            frames,
            object_pose,
            out,
        } => {
            let (robot, scene) = models(&m)?;
            let rep = load_repertoire_for(&repertoire, &robot, &scene)?;
            if rep.archive.is_empty() {
                return Err(Error::EmptyRepertoire);
            }
            let frames = match (frames, object_pose) {
                (Some(p), _) => load_frames(&p)?,
                (None, Some(p)) => AdaptationFrames::observed(
                    scene.camera_pose,
                    &EulerPose::from_array(p).to_transform(),
                    rep.object_sim_pose,
                ),
                (None, None) => return Err(Error::Config("adapt needs --frames or --object-pose".into())),
            };
            frames.validate()?;
            let moved = scene.with_target_pose(frames.world_from_object());
            let records: Vec<AdaptedRecord> = {
                use rayon::prelude::*;
                let cells: Vec<_> = rep.archive.cells.iter().collect();
                cells
                    .par_iter()
                    .map(|(cell, e)| {
                        let trajectory = adapt_trajectory(&e.trajectory, &frames);
                        let report = filter_trajectory(&trajectory, &robot, &moved, &rep.config.sim);
                        AdaptedRecord {
                            cell: **cell,
                            report,
                            trajectory,
                        }
                    })
                    .collect()
            };
            let accepted = records.iter().filter(|r| r.report.accepted).count();
            eprintln!("accepted {accepted} of {} adapted trajectories", records.len());
            write(&out, &adapted_jsonl(&rep, &frames, &records))
        }
        Command::GridEval {
            models: m,
            repertoire,
            bounds,
            div,
            orient_set,
            k,
            seed,
            out,
        } => {
            let (robot, scene) = models(&m)?;
            let rep = load_repertoire_for(&repertoire, &robot, &scene)?;
            let mut spec = rep
                .config
                .grid
                .clone()
                .unwrap_or_else(|| GridSpec::default_box(rep.config.seed, rep.object_sim_pose.translation.z));
            if let Some(b) = bounds {
                spec.min = [b[0], b[1], b[2]];
                spec.max = [b[3], b[4], b[5]];
            }
            if let Some(d) = div {
                spec.divisions = d;
            }
            match orient_set {
                Some(OrientSet::Identity) => spec.orientations = vec![Transform::identity()],
                Some(OrientSet::Six) => spec.orientations = default_orientations(),
                None => {}
            }
            if let Some(k) = k {
                spec.trajectories_per_pose = k;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            let scene = scene.with_target_pose(rep.object_sim_pose);
            let result = evaluate_grid(&rep.trajectories(), &robot, &scene, &spec, &rep.config.sim)?;
            eprintln!(
                "{} poses, {} feasible adaptations",
                result.poses.len(),
                result.feasible_total()
            );
            export_heatmap(&result, &out)
        }
        Command::Export {
            models: m,
            repertoire,
            cell,
            out_dir,
        } => {
            let (robot, scene) = models(&m)?;
            let rep = load_repertoire_for(&repertoire, &robot, &scene)?;
            let scene = scene.with_target_pose(rep.object_sim_pose);
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let mut written = 0;
            for (c, e) in &rep.archive.cells {
                if cell.is_some_and(|x| x != *c) {
                    continue;
                }
                let outcome = rollout(&robot, &scene, &e.trajectory, None, &rep.config.sim);
                write(&out_dir.join(format!("trace_{c:04}.csv")), &export_trace(&robot, &outcome))?;
                written += 1;
            }
            if written == 0 {
                return Err(Error::EmptyRepertoire);
            }
            eprintln!("wrote {written} traces to {}", out_dir.display());
            Ok(())
        }
    }
}

fn worker_count(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got '{v}'")),
        Err(_) => Ok(None),
    }
}

/// Parses `argv` and runs the command. Returns the process exit code: 0 on success,
/// 1 on a domain failure, 2 on a usage error.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let workers = match worker_count(cli.workers) {
        Ok(Some(0)) => {
            eprintln!("error: worker count must be at least 1");
            return 2;
        }
        Ok(w) => w,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| run_command(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
