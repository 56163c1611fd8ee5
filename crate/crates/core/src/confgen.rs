//! Configuration bundle generation and reloading.
//!
//! A bundle is six text files under `config/`: the SRDF, joint motion limits,
//! per-group kinematics solver settings, planner settings, a benchmark skeleton and a
//! demo startup manifest. Generation is a pure function of its inputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conf::{ConfDoc, ConfError, ConfWriter};
use crate::kinematics::{default_projection, space_extent, IkParams, JointGroup};
use crate::model::RobotModel;
use crate::planning::{
    JointLimitsTable, MotionLimits, ParamMap, PipelineConfig, DEFAULT_GOAL_BIAS, DEFAULT_GOAL_TOLERANCE,
    DEFAULT_MAX_ACCELERATION, DEFAULT_MAX_VELOCITY, DEFAULT_TIME_BUDGET,
};
use crate::report::ValidationReport;
use crate::srdf::{effective_model, resolve_group, serialize_srdf, validate_semantic, SemanticModel};

pub const CONFIG_DIR: &str = "config";
pub const JOINT_LIMITS_FILE: &str = "config/joint_limits.yaml";
pub const KINEMATICS_FILE: &str = "config/kinematics.conf";
pub const PLANNING_FILE: &str = "config/planning.conf";
pub const BENCHMARK_FILE: &str = "config/benchmark.conf";
pub const DEMO_FILE: &str = "config/demo.manifest";
pub const DEFAULT_SERVICE_PORT: u16 = 8080;
pub const DEFAULT_ADAPTERS: [&str; 2] = ["fix_start_bounds", "time_parameterization"];

#[derive(Debug, Error)]
pub enum ConfGenError {
    #[error("semantic configuration has {n} error(s):\n{0}", n = .0.errors())]
    InvalidSemantic(ValidationReport),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("{path}: {source}")]
    Conf { path: String, source: ConfError },
    #[error("{0} already exists; pass overwrite to replace it")]
    Exists(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Semantic(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ConfGenError + '_ {
    move |source| ConfGenError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Generation options. Defaults give URDF velocities unscaled and 1 rad/s² (or m/s²)
/// accelerations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenOptions {
    pub velocity_scaling: f64,
    /// Used for joints whose URDF declares no velocity limit.
    pub default_velocity: f64,
    pub default_acceleration: f64,
    /// Solver name per chain group; unlisted chain groups get `dls`.
    pub solvers: BTreeMap<String, String>,
    pub ik_params: IkParams,
    pub goal_bias: f64,
    pub time_budget: f64,
    pub goal_tolerance: f64,
    pub resolution_fraction: f64,
    /// Seed recorded for the planner and benchmark (usually the ACM seed).
    pub seed: u64,
    /// Model file and mesh asset root as they should appear in the bundle.
    pub model_path: Option<String>,
    pub asset_root: Option<String>,
    pub service_port: u16,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            velocity_scaling: 1.0,
            default_velocity: DEFAULT_MAX_VELOCITY,
            default_acceleration: DEFAULT_MAX_ACCELERATION,
            solvers: BTreeMap::new(),
            ik_params: IkParams::default(),
            goal_bias: DEFAULT_GOAL_BIAS,
            time_budget: DEFAULT_TIME_BUDGET,
            goal_tolerance: DEFAULT_GOAL_TOLERANCE,
            resolution_fraction: crate::collision::DEFAULT_RESOLUTION_FRACTION,
            seed: 0,
            model_path: None,
            asset_root: None,
            service_port: DEFAULT_SERVICE_PORT,
        }
    }
}

impl GenOptions {
    pub fn validate(&self) -> Result<(), ConfGenError> {
        let bad = |m: String| Err(ConfGenError::InvalidOption(m));
        for (name, v) in [
            ("velocity_scaling", self.velocity_scaling),
            ("default_velocity", self.default_velocity),
            ("default_acceleration", self.default_acceleration),
            ("time_budget", self.time_budget),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return bad(format!("goal_bias must be in [0, 1], got {}", self.goal_bias));
        }
        if !(self.goal_tolerance >= 0.0 && self.goal_tolerance.is_finite()) {
            return bad(format!("goal_tolerance must be nonnegative, got {}", self.goal_tolerance));
        }
        if !(self.resolution_fraction > 0.0 && self.resolution_fraction < 1.0) {
            return bad(format!("resolution_fraction must be in (0, 1), got {}", self.resolution_fraction));
        }
        if let Some((g, s)) = self.solvers.iter().find(|(_, s)| s.is_empty() || s.contains(char::is_whitespace)) {
            return bad(format!("solver name `{s}` for group `{g}`"));
        }
        self.ik_params
            .validate()
            .map_err(|e| ConfGenError::InvalidOption(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub files: Vec<FileHash>,
    /// Hash over the manifest's file hashes, in order.
    pub bundle_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigBundle {
    /// Relative path to contents, in write order.
    pub files: Vec<(String, String)>,
    pub manifest: BundleManifest,
}

impl ConfigBundle {
    pub fn file(&self, path: &str) -> Option<&str> {
        self.files.iter().find(|(p, _)| p == path).map(|(_, c)| c.as_str())
    }

    pub fn srdf_path(&self) -> &str {
        &self.files[0].0
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Bundle file name of the SRDF: the semantic model name with anything but
/// `[A-Za-z0-9_-]` replaced by `_`.
pub fn srdf_file_name(semantic: &SemanticModel) -> String {
    let stem: String = semantic
        .name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let stem = if stem.is_empty() { "robot".to_string() } else { stem };
    format!("{stem}.srdf")
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Generates the bundle. Fails if the semantic model has validation errors.
pub fn generate_bundle(model: &RobotModel, semantic: &SemanticModel, opts: &GenOptions) -> Result<ConfigBundle, ConfGenError> {
    opts.validate()?;
    let report = validate_semantic(model, semantic);
    if report.has_errors() {
        return Err(ConfGenError::InvalidSemantic(report));
    }
    let effective = effective_model(model, semantic).map_err(|e| ConfGenError::Semantic(e.to_string()))?;
    let mut groups: Vec<(String, Option<JointGroup>)> = Vec::new();
    for g in &semantic.groups {
        groups.push((g.name.clone(), resolve_group(&effective, semantic, &g.name).ok()));
    }
    let srdf_name = srdf_file_name(semantic);

    let mut files = vec![
        (format!("{CONFIG_DIR}/{srdf_name}"), serialize_srdf(semantic)),
        (JOINT_LIMITS_FILE.to_string(), joint_limits_text(&effective, opts)),
        (KINEMATICS_FILE.to_string(), kinematics_text(&groups, opts)),
        (PLANNING_FILE.to_string(), planning_text(&effective, &groups, opts)?),
        (BENCHMARK_FILE.to_string(), benchmark_text(semantic, &groups, &srdf_name, opts)),
    ];
    let digest = {
        let mut h = Sha256::new();
        for (p, c) in &files {
            h.update(p.as_bytes());
            h.update([0]);
            h.update(c.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    };
    files.push((DEMO_FILE.to_string(), demo_text(&groups, &srdf_name, &digest, opts)));

    let hashes: Vec<FileHash> = files
        .iter()
        .map(|(p, c)| FileHash {
            path: p.clone(),
            sha256: sha256_hex(c.as_bytes()),
            bytes: c.len(),
        })
        .collect();
    let mut h = Sha256::new();
    for f in &hashes {
        h.update(f.path.as_bytes());
        h.update([0]);
        h.update(f.sha256.as_bytes());
        h.update([0]);
    }
    Ok(ConfigBundle {
        files,
        manifest: BundleManifest {
            files: hashes,
            bundle_sha256: hex::encode(h.finalize()),
        },
    })
}

fn joint_limits_text(model: &RobotModel, opts: &GenOptions) -> String {
    let table = JointLimitsTable::from_model(model, opts.velocity_scaling, opts.default_velocity, opts.default_acceleration);
    let mut w = ConfWriter::new();
    w.comment("Joint motion limits used for time parameterization.")
        .comment("max_velocity = URDF velocity (or the default) times velocity_scaling.")
        .entry("velocity_scaling", num(opts.velocity_scaling))
        .entry("velocity_default", num(opts.default_velocity))
        .entry("acceleration_default", num(opts.default_acceleration));
    for name in model.active_joints() {
        let l = table.joints[name];
        w.entry(&format!("{name}.max_velocity"), num(l.max_velocity))
            .entry(&format!("{name}.max_acceleration"), num(l.max_acceleration));
    }
    w.finish()
}

fn kinematics_text(groups: &[(String, Option<JointGroup>)], opts: &GenOptions) -> String {
    let mut w = ConfWriter::new();
    w.comment("Inverse kinematics solver per chain group.");
    let mut others = Vec::new();
    for (name, g) in groups {
        let Some(g) = g.as_ref().filter(|g| g.is_chain && g.tip_link.is_some()) else {
            others.push(name.clone());
            continue;
        };
        let p = &opts.ik_params;
        let solver = opts.solvers.get(name).map_or("dls", String::as_str);
        w.blank()
            .entry(&format!("{name}.solver"), solver)
            .entry(&format!("{name}.tip_link"), g.tip_link.as_deref().unwrap_or_default())
            .entry(&format!("{name}.position_tolerance"), num(p.position_tolerance))
            .entry(&format!("{name}.orientation_tolerance"), num(p.orientation_tolerance))
            .entry(&format!("{name}.max_iterations"), p.max_iterations)
            .entry(&format!("{name}.damping"), num(p.damping))
            .entry(&format!("{name}.restarts"), p.restarts)
            .entry(&format!("{name}.seed"), p.seed);
    }
    w.blank().list("non_chain_groups", &others);
    w.finish()
}

fn planning_text(model: &RobotModel, groups: &[(String, Option<JointGroup>)], opts: &GenOptions) -> Result<String, ConfGenError> {
    let mut w = ConfWriter::new();
    w.comment("Planner defaults. Resolution is a fraction of each group's space extent.")
        .entry("planner", "rrt")
        .entry("planner.goal_bias", num(opts.goal_bias))
        .entry("planner.step_fraction", num(opts.resolution_fraction))
        .entry("time_budget", num(opts.time_budget))
        .entry("seed", opts.seed)
        .entry("goal_tolerance", num(opts.goal_tolerance))
        .entry("resolution_fraction", num(opts.resolution_fraction))
        .entry("collision_checker", "native")
        .list("adapters", &DEFAULT_ADAPTERS);
    for (name, g) in groups {
        let Some(g) = g else { continue };
        let p = default_projection(model, g).map_err(|e| ConfGenError::Semantic(e.to_string()))?;
        w.blank().list(&format!("{name}.projection"), &p.joints).list(
            &format!("{name}.projection_weights"),
            &p.weights.iter().map(|x| num(*x)).collect::<Vec<_>>(),
        );
        if let Ok(e) = space_extent(model, g) {
            w.entry(&format!("{name}.space_extent"), num(e));
        }
    }
    Ok(w.finish())
}

fn benchmark_text(
    semantic: &SemanticModel,
    groups: &[(String, Option<JointGroup>)],
    srdf_name: &str,
    opts: &GenOptions,
) -> String {
    let mut w = ConfWriter::new();
    w.comment("Benchmark suite. Relative paths are resolved against this file's directory.")
        .entry("scene.urdf", opts.model_path.as_deref().unwrap_or("robot.urdf"));
    if let Some(a) = &opts.asset_root {
        w.entry("scene.assets", a);
    }
    w.entry("scene.srdf", srdf_name)
        .entry("repetitions", 3)
        .entry("time_budget", num(opts.time_budget))
        .entry("seed", opts.seed)
        .blank()
        .entry("planner.rrt.type", "rrt")
        .entry("planner.rrt.acm", "semantic")
        .entry("planner.rrt.goal_bias", num(opts.goal_bias));
    // One query per group with at least two poses, from the first pose to the second.
    for (name, g) in groups {
        if g.is_none() {
            continue;
        }
        let poses: Vec<&str> = semantic
            .group_states
            .iter()
            .filter(|s| &s.group == name)
            .map(|s| s.name.as_str())
            .collect();
        if poses.len() >= 2 {
            w.blank()
                .entry(&format!("query.{name}.group"), name)
                .entry(&format!("query.{name}.start"), poses[0])
                .entry(&format!("query.{name}.goal"), poses[1]);
        }
    }
    w.blank()
        .comment("Parameter sweeps, for example:")
        .comment("sweep.0.param: planner.goal_bias")
        .comment("sweep.0.lower: 0.05")
        .comment("sweep.0.upper: 0.25")
        .comment("sweep.0.increment: 0.1");
    w.finish()
}

fn demo_text(groups: &[(String, Option<JointGroup>)], srdf_name: &str, digest: &str, opts: &GenOptions) -> String {
    let mut w = ConfWriter::new();
    w.comment("Demo startup, in order.")
        .entry("step.1", "load_model")
        .entry("step.2", "load_semantic")
        .entry("step.3", "start_service")
        .entry("step.4", "open_demo")
        .entry("model.urdf", opts.model_path.as_deref().unwrap_or("robot.urdf"));
    if let Some(a) = &opts.asset_root {
        w.entry("model.assets", a);
    }
    w.entry("semantic.srdf", srdf_name).entry("service.port", opts.service_port);
    if let Some((name, _)) = groups.iter().find(|(_, g)| g.is_some()) {
        w.entry("demo.group", name);
    }
    w.entry("config_digest", digest);
    w.finish()
}

/// Writes the bundle under `dir`. Without `overwrite`, nothing is written if any
/// target file exists. Each file is written to a temporary name and renamed.
pub fn write_bundle(bundle: &ConfigBundle, dir: &Path, overwrite: bool) -> Result<BundleManifest, ConfGenError> {
    if !overwrite {
        for (rel, _) in &bundle.files {
            let p = dir.join(rel);
            if p.exists() {
                return Err(ConfGenError::Exists(p));
            }
        }
    }
    for (rel, content) in &bundle.files {
        let p = dir.join(rel);
        let parent = p.parent().expect("bundle paths have a directory");
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        let tmp = p.with_extension("tmp~");
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(content.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, &p).map_err(io_err(&p))?;
    }
    Ok(bundle.manifest.clone())
}

fn conf(path: &str, text: &str) -> Result<ConfDoc, ConfGenError> {
    ConfDoc::parse(text).map_err(|source| ConfGenError::Conf {
        path: path.to_string(),
        source,
    })
}

fn at<T>(path: &str, r: Result<T, ConfError>) -> Result<T, ConfGenError> {
    r.map_err(|source| ConfGenError::Conf {
        path: path.to_string(),
        source,
    })
}

/// Reads `joint_limits.yaml` text.
pub fn parse_joint_limits(text: &str) -> Result<JointLimitsTable, ConfGenError> {
    let p = JOINT_LIMITS_FILE;
    let doc = conf(p, text)?;
    let mut table = JointLimitsTable::default();
    for (k, _) in doc.iter() {
        let Some(joint) = k.strip_suffix(".max_velocity") else {
            continue;
        };
        let v: f64 = at(p, doc.parse_value(k))?;
        let a: f64 = at(p, doc.parse_value(&format!("{joint}.max_acceleration")))?;
        if !(v > 0.0 && a > 0.0 && v.is_finite() && a.is_finite()) {
            return Err(ConfGenError::Conf {
                path: p.to_string(),
                source: ConfError::Invalid {
                    key: joint.to_string(),
                    value: format!("{v} / {a}"),
                },
            });
        }
        table.joints.insert(
            joint.to_string(),
            MotionLimits {
                max_velocity: v,
                max_acceleration: a,
            },
        );
    }
    Ok(table)
}

/// Solver settings of one chain group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSolver {
    pub solver: String,
    pub tip_link: String,
    pub params: IkParams,
}

/// Reads `kinematics.conf` text; `groups` are the group names to look for.
pub fn parse_kinematics<'a>(
    text: &str,
    groups: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, GroupSolver>, ConfGenError> {
    let p = KINEMATICS_FILE;
    let doc = conf(p, text)?;
    let mut out = BTreeMap::new();
    for g in groups {
        let key = |k: &str| format!("{g}.{k}");
        let Some(solver) = doc.get(&key("solver")) else { continue };
        let d = IkParams::default();
        let params = IkParams {
            position_tolerance: at(p, doc.parse_or(&key("position_tolerance"), d.position_tolerance))?,
            orientation_tolerance: at(p, doc.parse_or(&key("orientation_tolerance"), d.orientation_tolerance))?,
            max_iterations: at(p, doc.parse_or(&key("max_iterations"), d.max_iterations))?,
            damping: at(p, doc.parse_or(&key("damping"), d.damping))?,
            restarts: at(p, doc.parse_or(&key("restarts"), d.restarts))?,
            seed: at(p, doc.parse_or(&key("seed"), d.seed))?,
        };
        out.insert(
            g.to_string(),
            GroupSolver {
                solver: solver.to_string(),
                tip_link: at(p, doc.require(&key("tip_link")))?.to_string(),
                params,
            },
        );
    }
    Ok(out)
}

/// Planner settings from `planning.conf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanningSettings {
    pub planner: String,
    pub planner_params: ParamMap,
    pub time_budget: f64,
    pub seed: u64,
    pub goal_tolerance: f64,
    pub resolution_fraction: f64,
    pub collision_checker: String,
    pub adapters: Vec<String>,
}

pub fn parse_planning(text: &str) -> Result<PlanningSettings, ConfGenError> {
    let p = PLANNING_FILE;
    let doc = conf(p, text)?;
    let mut planner_params = ParamMap::new();
    for (k, v) in doc.section("planner") {
        let x = v.parse().map_err(|_| ConfGenError::Conf {
            path: p.to_string(),
            source: ConfError::Invalid {
                key: format!("planner.{k}"),
                value: v.to_string(),
            },
        })?;
        planner_params.insert(k.to_string(), x);
    }
    Ok(PlanningSettings {
        planner: at(p, doc.require("planner"))?.to_string(),
        planner_params,
        time_budget: at(p, doc.parse_value("time_budget"))?,
        seed: at(p, doc.parse_or("seed", 0))?,
        goal_tolerance: at(p, doc.parse_or("goal_tolerance", DEFAULT_GOAL_TOLERANCE))?,
        resolution_fraction: at(p, doc.parse_value("resolution_fraction"))?,
        collision_checker: at(p, doc.require("collision_checker"))?.to_string(),
        adapters: doc.list("adapters"),
    })
}

/// A bundle read back from disk.
#[derive(Clone, Debug)]
pub struct LoadedBundle {
    pub semantic_path: PathBuf,
    pub semantic_text: String,
    pub limits: JointLimitsTable,
    pub kinematics_text: String,
    pub planning: PlanningSettings,
    pub demo: ConfDoc,
}

impl LoadedBundle {
    /// Reads the bundle rooted at `dir` (the directory containing `config/`).
    pub fn read(dir: &Path) -> Result<LoadedBundle, ConfGenError> {
        let read = |rel: &str| {
            let p = dir.join(rel);
            fs::read_to_string(&p).map_err(io_err(&p))
        };
        let demo = conf(DEMO_FILE, &read(DEMO_FILE)?)?;
        let srdf_name = at(DEMO_FILE, demo.require("semantic.srdf"))?;
        let semantic_path = dir.join(CONFIG_DIR).join(srdf_name);
        let semantic_text = fs::read_to_string(&semantic_path).map_err(io_err(&semantic_path))?;
        Ok(LoadedBundle {
            limits: parse_joint_limits(&read(JOINT_LIMITS_FILE)?)?,
            kinematics_text: read(KINEMATICS_FILE)?,
            planning: parse_planning(&read(PLANNING_FILE)?)?,
            semantic_path,
            semantic_text,
            demo,
        })
    }

    /// Model path recorded in the demo manifest, resolved against `config/`.
    pub fn model_path(&self, dir: &Path) -> Option<PathBuf> {
        self.demo.get("model.urdf").map(|m| dir.join(CONFIG_DIR).join(m))
    }

    pub fn asset_root(&self, dir: &Path) -> Option<PathBuf> {
        self.demo.get("model.assets").map(|m| dir.join(CONFIG_DIR).join(m))
    }

    pub fn demo_group(&self) -> Option<&str> {
        self.demo.get("demo.group")
    }

    /// Pipeline settings for this bundle; `groups` are the semantic group names.
    pub fn pipeline_config<'a>(&self, groups: impl IntoIterator<Item = &'a str>) -> Result<PipelineConfig, ConfGenError> {
        let solvers = parse_kinematics(&self.kinematics_text, groups)?;
        let mut params = self.planning.planner_params.clone();
        // the step defaults to the resolution; only keep an explicit different value
        if params.get("step_fraction") == Some(&self.planning.resolution_fraction) {
            params.remove("step_fraction");
        }
        Ok(PipelineConfig {
            collision_checker: self.planning.collision_checker.clone(),
            adapters: self.planning.adapters.clone(),
            ik_params: solvers.values().next().map(|s| s.params).unwrap_or_default(),
            ik_solvers: solvers.iter().map(|(g, s)| (g.clone(), s.solver.clone())).collect(),
            default_ik_solver: "dls".into(),
            goal_tolerance: self.planning.goal_tolerance,
            resolution_fraction: self.planning.resolution_fraction,
            time_budget: self.planning.time_budget,
            planner: self.planning.planner.clone(),
            planner_params: params,
        })
    }
}
