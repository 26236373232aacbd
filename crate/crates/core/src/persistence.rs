//! File formats: JSON models and run configurations, and line-delimited JSON
//! repertoires (one header object, then one record per elite).
//!
//! Numbers are written in shortest round-trip decimal form, so a save/load cycle is
//! exact. Model hashes are SHA-256 digests of the canonical JSON form (keys sorted,
//! no whitespace).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptation::{AdaptationFrames, FilterReport};
use crate::error::{Error, Result};
use crate::grasp_sim::{SimConfig, Trajectory};
use crate::kinematics::Robot;
use crate::qd::{Archive, DescriptorGrid, Elite, QdConfig};
use crate::quality::{FitnessWeights, NoiseSpec, TouchWindow};
use crate::scene::{Object, Scene};
use crate::se3::{Transform, EULER_CONVENTION};
use crate::workspace::GridSpec;

pub const FORMAT_VERSION: u32 = 1;

/// Every tunable of a run. `seed` and `noise.seed` have no defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub qd: QdConfig,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub weights: FitnessWeights,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub touch_window: TouchWindow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.qd.validate().map_err(Error::Config)?;
        self.noise.validate().map_err(Error::Config)?;
        if !(self.sim.max_step > 0.0) {
            return Err(Error::Config("sim.max_step must be positive".into()));
        }
        if let Some(g) = &self.grid {
            g.validate().map_err(Error::Config)?;
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

/// JSON with sorted keys and no insignificant whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("model types serialize to JSON");
    serde_json::to_string(&v).expect("JSON values serialize")
}

pub fn content_hash<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(canonical_json(value).as_bytes()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })
}

pub fn load_robot(path: &Path) -> Result<Robot<f64>> {
    let r: Robot<f64> = parse_json(path, &read(path)?)?;
    r.validate().map_err(Error::Model)?;
    Ok(r)
}

pub fn load_scene(path: &Path) -> Result<Scene<f64>> {
    let s: Scene<f64> = parse_json(path, &read(path)?)?;
    s.validate().map_err(Error::Model)?;
    Ok(s)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let c: RunConfig = parse_json(path, &read(path)?)?;
    c.validate()?;
    Ok(c)
}

/// Identity and content hash of a model file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelRef {
    pub id: String,
    pub hash: String,
}

impl ModelRef {
    pub fn robot(robot: &Robot<f64>) -> Self {
        Self {
            id: robot.name.clone(),
            hash: content_hash(robot),
        }
    }

    /// The target object of a scene, hashed at the identity pose.
    pub fn object(scene: &Scene<f64>) -> Self {
        let o = Object {
            pose: Transform::identity(),
            ..scene.target_object().clone()
        };
        Self {
            id: o.id.clone(),
            hash: content_hash(&o),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepertoireHeader {
    pub kind: String,
    pub format_version: u32,
    pub euler_convention: String,
    pub robot: ModelRef,
    pub object: ModelRef,
    pub object_sim_pose: Transform<f64>,
    pub grid: DescriptorGrid,
    pub seed: u64,
    pub eval_count: u64,
    pub config_hash: String,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepertoireRecord {
    pub cell: usize,
    pub elite: Elite,
}

/// An archive together with the models and configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Repertoire {
    pub robot: ModelRef,
    pub object: ModelRef,
    pub object_sim_pose: Transform<f64>,
    pub config: RunConfig,
    pub archive: Archive,
}

impl Repertoire {
    pub fn new(robot: &Robot<f64>, scene: &Scene<f64>, config: RunConfig, archive: Archive) -> Self {
        Self {
            robot: ModelRef::robot(robot),
            object: ModelRef::object(scene),
            object_sim_pose: scene.object_sim_pose,
            config,
            archive,
        }
    }

    pub fn header(&self) -> RepertoireHeader {
        RepertoireHeader {
            kind: "repertoire".into(),
            format_version: FORMAT_VERSION,
            euler_convention: EULER_CONVENTION.into(),
            robot: self.robot.clone(),
            object: self.object.clone(),
            object_sim_pose: self.object_sim_pose,
            grid: self.archive.grid,
            seed: self.archive.seed,
            eval_count: self.archive.eval_count,
            config_hash: self.archive.config_hash.clone(),
            config: self.config.clone(),
        }
    }

    /// Fails when the given models differ from the ones recorded in the file.
    pub fn verify_models(&self, robot: &Robot<f64>, scene: &Scene<f64>) -> Result<()> {
        let check = |what, recorded: &ModelRef, actual: ModelRef| {
            if recorded.hash != actual.hash {
                return Err(Error::HashMismatch {
                    what,
                    recorded: recorded.hash.clone(),
                    actual: actual.hash,
                });
            }
            Ok(())
        };
        check("robot", &self.robot, ModelRef::robot(robot))?;
        check("object", &self.object, ModelRef::object(scene))
    }

    /// Elite trajectories in cell order.
    pub fn trajectories(&self) -> Vec<Trajectory> {
        self.archive.cells.values().map(|e| e.trajectory.clone()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = canonical_json(&self.header());
        s.push('\n');
        for (cell, elite) in &self.archive.cells {
            let rec = RepertoireRecord {
                cell: *cell,
                elite: elite.clone(),
            };
            s.push_str(&canonical_json(&rec));
            s.push('\n');
        }
        s
    }

    /// Parses a repertoire; records are numbered from 1 in error messages.
    pub fn from_jsonl(path: &Path, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| Error::Parse {
            path: path.into(),
            message: "empty file".into(),
        })?;
        let raw: serde_json::Value = parse_json(path, first)?;
        let version = raw.get("format_version").and_then(|v| v.as_u64());
        match version {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Version {
                    found: v as u32,
                    supported: FORMAT_VERSION,
                })
            }
            None => {
                return Err(Error::Parse {
                    path: path.into(),
                    message: "header lacks format_version".into(),
                })
            }
        }
        let header: RepertoireHeader = serde_json::from_value(raw).map_err(|e| Error::Parse {
            path: path.into(),
            message: format!("header: {e}"),
        })?;
        if header.kind != "repertoire" {
            return Err(Error::Parse {
                path: path.into(),
                message: format!("expected a repertoire file, found kind '{}'", header.kind),
            });
        }
        if header.euler_convention != EULER_CONVENTION {
            return Err(Error::Parse {
                path: path.into(),
                message: format!("unsupported Euler convention '{}'", header.euler_convention),
            });
        }
        header.grid.validate().map_err(|m| Error::Parse {
            path: path.into(),
            message: m,
        })?;
        let mut cells = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let index = i + 1;
            let bad = |message: String| Error::Record { index, message };
            let rec: RepertoireRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            if rec.cell >= header.grid.total() || header.grid.cell_index(&rec.elite.descriptor) != rec.cell {
                return Err(bad(format!("cell {} does not match the descriptor", rec.cell)));
            }
            rec.elite.trajectory.validate().map_err(bad)?;
            if cells.insert(rec.cell, rec.elite).is_some() {
                return Err(bad(format!("duplicate cell {}", rec.cell)));
            }
        }
        Ok(Self {
            robot: header.robot,
            object: header.object,
            object_sim_pose: header.object_sim_pose,
            archive: Archive {
                grid: header.grid,
                cells,
                eval_count: header.eval_count,
                seed: header.seed,
                config_hash: header.config_hash,
            },
            config: header.config,
        })
    }
}

pub fn save_repertoire(rep: &Repertoire, path: &Path) -> Result<()> {
    write(path, &rep.to_jsonl())
}

pub fn load_repertoire(path: &Path) -> Result<Repertoire> {
    Repertoire::from_jsonl(path, &read(path)?)
}

/// Loads a repertoire and checks it against the robot and scene it will be used with.
pub fn load_repertoire_for(path: &Path, robot: &Robot<f64>, scene: &Scene<f64>) -> Result<Repertoire> {
    let rep = load_repertoire(path)?;
    rep.verify_models(robot, scene)?;
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptedHeader {
    pub kind: String,
    pub format_version: u32,
    pub euler_convention: String,
    pub robot: ModelRef,
    pub object: ModelRef,
    pub frames: AdaptationFrames<f64>,
    pub config_hash: String,
    pub accepted: usize,
    pub rejected: usize,
    pub causes: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptedRecord {
    pub cell: usize,
    pub report: FilterReport,
    pub trajectory: Trajectory,
}

/// Adapted trajectories with their filter reports, one record per source elite.
pub fn adapted_jsonl(
    rep: &Repertoire,
    frames: &AdaptationFrames<f64>,
    records: &[AdaptedRecord],
) -> String {
    let mut causes = BTreeMap::new();
    for r in records {
        if let Some(c) = &r.report.cause {
            *causes.entry(c.name().to_string()).or_insert(0) += 1;
        }
    }
    let accepted = records.iter().filter(|r| r.report.accepted).count();
    let header = AdaptedHeader {
        kind: "adapted".into(),
        format_version: FORMAT_VERSION,
        euler_convention: EULER_CONVENTION.into(),
        robot: rep.robot.clone(),
        object: rep.object.clone(),
        frames: *frames,
        config_hash: rep.archive.config_hash.clone(),
        accepted,
        rejected: records.len() - accepted,
        causes,
    };
    let mut s = canonical_json(&header);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", canonical_json(r));
    }
    s
}

/// Default run configuration with the given seeds.
pub fn default_config(seed: u64, noise_seed: u64) -> RunConfig {
    RunConfig {
        seed,
        qd: QdConfig::default(),
        noise: NoiseSpec::with_seed(8, noise_seed),
        weights: FitnessWeights::default(),
        sim: SimConfig::default(),
        touch_window: TouchWindow::default(),
        grid: None,
    }
}
