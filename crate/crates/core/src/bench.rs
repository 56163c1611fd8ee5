//! Planner benchmarking over query suites and parameter sweeps.
//!
//! `benchmark.conf` keys:
//!
//! ```text
//! scene.urdf: robot.urdf            # relative paths resolve against the conf file
//! scene.assets: meshes              # optional mesh root
//! scene.srdf: robot.srdf
//! scene.world: world.json           # optional
//! repetitions: 3
//! time_budget: 5
//! seed: 0
//! resolution_fraction: 0.01         # optional
//! planner.<label>.type: rrt
//! planner.<label>.acm: semantic     # or `adjacent`: only adjacent links disabled
//! planner.<label>.<param>: <number>
//! query.<id>.group: arm
//! query.<id>.start: home            # a named pose or `joint=value, ...`
//! query.<id>.goal: j1=0.5, j2=-1
//! sweep.<n>.param: planner.goal_bias
//! sweep.<n>.lower / upper / increment: <number>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acm_gen::adjacent_pairs;
use crate::collision::{AllowedCollisionMatrix, PlanningSceneWorld, DEFAULT_RESOLUTION_FRACTION};
use crate::conf::{ConfDoc, ConfError};
use crate::kinematics::{indexed_rng, RobotState};
use crate::model::{parse_urdf, RobotModel};
use crate::planning::{Goal, ParamMap, PlanError, PlanRequest, PlanningScene, Pipeline, DEFAULT_GOAL_TOLERANCE};
use crate::srdf::{parse_srdf, SemanticModel};

/// Relative slack, in increments, for including the upper sweep bound.
pub const SWEEP_INCLUSION_GUARD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("benchmark config: {0}")]
    Conf(#[from] ConfError),
    #[error("benchmark config: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Scene { path: PathBuf, message: String },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("results: {0}")]
    Csv(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// `planner.<param>` or `resolution_fraction`.
    pub param: String,
    pub lower: f64,
    pub upper: f64,
    pub increment: f64,
}

impl SweepSpec {
    pub fn new(param: &str, lower: f64, upper: f64, increment: f64) -> SweepSpec {
        SweepSpec {
            param: param.to_string(),
            lower,
            upper,
            increment,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let finite = self.lower.is_finite() && self.upper.is_finite() && self.increment.is_finite();
        if !(finite && self.increment > 0.0 && self.lower <= self.upper) {
            return Err(BenchError::Invalid(format!(
                "sweep `{}`: need finite lower <= upper and increment > 0",
                self.param
            )));
        }
        if !(self.param == "resolution_fraction" || self.param.starts_with("planner.") && self.param.len() > 8) {
            return Err(BenchError::Invalid(format!(
                "sweep parameter `{}` is neither planner.<name> nor resolution_fraction",
                self.param
            )));
        }
        Ok(())
    }

    /// Number of values: floor((upper - lower) / increment + guard) + 1.
    pub fn count(&self) -> usize {
        ((self.upper - self.lower) / self.increment + SWEEP_INCLUSION_GUARD).floor() as usize + 1
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count()).map(|k| self.lower + k as f64 * self.increment).collect()
    }
}

/// One cell of a sweep: a value per swept parameter, in spec order.
pub type Assignment = Vec<(String, f64)>;

/// Cartesian product of the sweeps' values, the last spec varying fastest. No specs
/// give a single empty assignment.
pub fn expand_sweep(specs: &[SweepSpec]) -> Vec<Assignment> {
    let mut cells: Vec<Assignment> = vec![Vec::new()];
    for s in specs {
        let values = s.values();
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((s.param.clone(), *v));
                    c
                })
            })
            .collect();
    }
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    Named(String),
    Values(RobotState),
}

impl StateSpec {
    pub fn parse(text: &str) -> Result<StateSpec, BenchError> {
        if !text.contains('=') {
            return Ok(StateSpec::Named(text.trim().to_string()));
        }
        let mut s = RobotState::new();
        for item in crate::conf::split_list(text) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| BenchError::Invalid(format!("expected joint=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| BenchError::Invalid(format!("bad value in `{item}`")))?;
            s.set(k.trim(), v);
        }
        Ok(StateSpec::Values(s))
    }

    /// The state itself, or the named group state.
    pub fn resolve(&self, semantic: &SemanticModel, group: &str) -> Result<RobotState, BenchError> {
        match self {
            StateSpec::Values(s) => Ok(s.clone()),
            StateSpec::Named(n) => semantic
                .group_state(group, n)
                .map(|s| s.values.clone())
                .ok_or_else(|| {
                    PlanError::UnknownPose {
                        group: group.to_string(),
                        name: n.clone(),
                    }
                    .into()
                }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchQuery {
    pub id: String,
    pub group: String,
    pub start: StateSpec,
    pub goal: StateSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcmMode {
    /// The semantic model's disabled pairs.
    Semantic,
    /// Only links joined by a joint are skipped.
    Adjacent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerSpec {
    pub label: String,
    pub planner: String,
    pub acm: AcmMode,
    pub params: ParamMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub urdf: PathBuf,
    pub assets: Option<PathBuf>,
    pub srdf: PathBuf,
    pub world: Option<PathBuf>,
    pub queries: Vec<BenchQuery>,
    pub planners: Vec<PlannerSpec>,
    pub sweeps: Vec<SweepSpec>,
    pub repetitions: u32,
    pub time_budget: f64,
    pub seed: u64,
    pub resolution_fraction: f64,
}

/// Labels in order of first appearance under `prefix.<label>.`.
fn labels(doc: &ConfDoc, prefix: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (k, _) in doc.section(prefix) {
        if let Some((label, _)) = k.split_once('.') {
            if !out.iter().any(|l| l == label) {
                out.push(label.to_string());
            }
        }
    }
    out
}

impl BenchConfig {
    pub fn read(path: &Path) -> Result<BenchConfig, BenchError> {
        let text = fs::read_to_string(path).map_err(|e| BenchError::Scene {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        BenchConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses `benchmark.conf` text; relative scene paths are joined to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<BenchConfig, BenchError> {
        let doc = ConfDoc::parse(text)?;
        let path = |k: &str| doc.get(k).map(|p| base.join(p));

        let mut queries = Vec::new();
        for id in labels(&doc, "query") {
            let key = |k: &str| format!("query.{id}.{k}");
            queries.push(BenchQuery {
                group: doc.require(&key("group"))?.to_string(),
                start: StateSpec::parse(doc.require(&key("start"))?)?,
                goal: StateSpec::parse(doc.require(&key("goal"))?)?,
                id,
            });
        }
        let mut planners = Vec::new();
        for label in labels(&doc, "planner") {
            let mut spec = PlannerSpec {
                label: label.clone(),
                planner: String::new(),
                acm: AcmMode::Semantic,
                params: ParamMap::new(),
            };
            let section = format!("planner.{label}");
            for (k, v) in doc.section(&section) {
                match k {
                    "type" => spec.planner = v.to_string(),
                    "acm" => {
                        spec.acm = match v {
                            "semantic" => AcmMode::Semantic,
                            "adjacent" => AcmMode::Adjacent,
                            _ => return Err(BenchError::Invalid(format!("{section}.acm: `{v}`"))),
                        }
                    }
                    _ => {
                        spec.params.insert(k.to_string(), doc.parse_value(&format!("{section}.{k}"))?);
                    }
                }
            }
            if spec.planner.is_empty() {
                return Err(ConfError::Missing(format!("{section}.type")).into());
            }
            planners.push(spec);
        }
        let mut indices: Vec<(u64, String)> = Vec::new();
        for label in labels(&doc, "sweep") {
            let n = label
                .parse()
                .map_err(|_| BenchError::Invalid(format!("sweep index `{label}` is not a number")))?;
            indices.push((n, label));
        }
        indices.sort();
        let mut sweeps = Vec::new();
        for (_, label) in indices {
            let key = |k: &str| format!("sweep.{label}.{k}");
            let s = SweepSpec {
                param: doc.require(&key("param"))?.to_string(),
                lower: doc.parse_value(&key("lower"))?,
                upper: doc.parse_value(&key("upper"))?,
                increment: doc.parse_value(&key("increment"))?,
            };
            s.validate()?;
            sweeps.push(s);
        }

        let cfg = BenchConfig {
            urdf: path("scene.urdf").ok_or_else(|| ConfError::Missing("scene.urdf".into()))?,
            assets: path("scene.assets"),
            srdf: path("scene.srdf").ok_or_else(|| ConfError::Missing("scene.srdf".into()))?,
            world: path("scene.world"),
            queries,
            planners,
            sweeps,
            repetitions: doc.parse_or("repetitions", 1)?,
            time_budget: doc.parse_value("time_budget")?,
            seed: doc.parse_or("seed", 0)?,
            resolution_fraction: doc.parse_or("resolution_fraction", DEFAULT_RESOLUTION_FRACTION)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.repetitions < 1 {
            return Err(BenchError::Invalid("repetitions must be at least 1".into()));
        }
        if self.queries.is_empty() || self.planners.is_empty() {
            return Err(BenchError::Invalid("need at least one query and one planner".into()));
        }
        if !(self.time_budget > 0.0 && self.time_budget.is_finite()) {
            return Err(BenchError::Invalid("time_budget must be positive".into()));
        }
        for s in &self.sweeps {
            s.validate()?;
        }
        Ok(())
    }

    /// Expected number of result rows.
    pub fn row_count(&self) -> usize {
        self.planners.len()
            * self.sweeps.iter().map(SweepSpec::count).product::<usize>()
            * self.queries.len()
            * self.repetitions as usize
    }

    pub fn load_scene(&self) -> Result<BenchScene, BenchError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|e| BenchError::Scene {
                path: p.to_path_buf(),
                message: e.to_string(),
            })
        };
        let scene_err = |p: &Path, e: &dyn std::fmt::Display| BenchError::Scene {
            path: p.to_path_buf(),
            message: e.to_string(),
        };
        let assets = self.assets.clone().or_else(|| self.urdf.parent().map(Path::to_path_buf));
        let model = parse_urdf(&read(&self.urdf)?, assets.as_deref()).map_err(|e| scene_err(&self.urdf, &e))?;
        let semantic = parse_srdf(&read(&self.srdf)?, &model).map_err(|e| scene_err(&self.srdf, &e))?;
        let world = match &self.world {
            None => PlanningSceneWorld::new(),
            Some(p) => PlanningSceneWorld::from_json(&read(p)?).map_err(|e| scene_err(p, &e))?,
        };
        Ok(BenchScene { model, semantic, world })
    }
}

#[derive(Clone, Debug)]
pub struct BenchScene {
    pub model: RobotModel,
    pub semantic: SemanticModel,
    pub world: PlanningSceneWorld,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub planner: String,
    pub params: Assignment,
    pub query: String,
    pub repetition: u32,
    pub success: bool,
    pub solve_time_s: f64,
    /// Joint-space length; `None` for failed runs.
    pub path_length: Option<f64>,
    pub checks_performed: u64,
}

/// Seed shared by every planner for a given (cell, query, repetition).
fn run_seed(master: u64, index: u64) -> u64 {
    indexed_rng(master, index).random()
}

/// Runs every (planner, cell, query, repetition) combination. Rows come back in that
/// nesting order whatever the completion order; failed plans become unsuccessful rows.
pub fn run_benchmark(config: &BenchConfig, scene: &BenchScene, pipeline: &Pipeline) -> Result<Vec<BenchRow>, BenchError> {
    config.validate()?;
    let base = PlanningScene::new(&scene.model, scene.semantic.clone())?.with_world(scene.world.clone());
    let mut adjacent = AllowedCollisionMatrix::new();
    for (a, b) in adjacent_pairs(&base.model) {
        adjacent.disable(&a, &b).expect("distinct links");
    }
    let scenes = [base.clone(), base.with_acm(adjacent)];
    for p in &config.planners {
        pipeline.registry.planner(&p.planner, &p.params)?;
    }
    let mut queries = Vec::new();
    for q in &config.queries {
        queries.push((
            q.start.resolve(&scene.semantic, &q.group)?,
            q.goal.resolve(&scene.semantic, &q.group)?,
        ));
    }

    let cells = expand_sweep(&config.sweeps);
    let reps = config.repetitions as usize;
    let per_planner = cells.len() * queries.len() * reps;
    let jobs: Vec<(usize, usize, usize, usize)> = (0..config.planners.len() * per_planner)
        .map(|i| {
            let (p, rest) = (i / per_planner, i % per_planner);
            let (c, rest) = (rest / (queries.len() * reps), rest % (queries.len() * reps));
            (p, c, rest / reps, rest % reps)
        })
        .collect();

    let rows = jobs
        .par_iter()
        .map(|&(p, c, q, r)| {
            let spec = &config.planners[p];
            let query = &config.queries[q];
            let mut req = PlanRequest {
                group: query.group.clone(),
                start: queries[q].0.clone(),
                goal: Goal::Joint {
                    state: queries[q].1.clone(),
                    tolerance: DEFAULT_GOAL_TOLERANCE,
                },
                time_budget: config.time_budget,
                planner: spec.planner.clone(),
                params: spec.params.clone(),
                resolution_fraction: config.resolution_fraction,
                seed: run_seed(config.seed, ((c * queries.len() + q) * reps + r) as u64),
            };
            for (path, v) in &cells[c] {
                match path.strip_prefix("planner.") {
                    Some(k) => {
                        req.params.insert(k.to_string(), *v);
                    }
                    None => req.resolution_fraction = *v,
                }
            }
            let scene = match spec.acm {
                AcmMode::Semantic => &scenes[0],
                AcmMode::Adjacent => &scenes[1],
            };
            let began = Instant::now();
            let result = pipeline.plan(scene, &req);
            let elapsed = began.elapsed().as_secs_f64().min(config.time_budget);
            let mut row = BenchRow {
                planner: spec.label.clone(),
                params: cells[c].clone(),
                query: query.id.clone(),
                repetition: r as u32,
                success: false,
                solve_time_s: elapsed,
                path_length: None,
                checks_performed: 0,
            };
            match result {
                Ok(resp) => {
                    row.success = true;
                    row.path_length = Some(resp.path.length());
                    row.checks_performed = resp.checks_performed;
                }
                Err(PlanError::Timeout { checks_performed, .. }) => {
                    row.solve_time_s = config.time_budget;
                    row.checks_performed = checks_performed;
                }
                Err(_) => {}
            }
            row
        })
        .collect();
    Ok(rows)
}

/// Shortest decimal that reads back to the same f64 is not guaranteed by `{}` for
/// every consumer; 17 significant digits always are.
fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

const FIXED_COLUMNS: [&str; 3] = ["planner", "query", "repetition"];
const METRIC_COLUMNS: [&str; 4] = ["success", "solve_time_s", "path_length", "checks_performed"];

/// CSV: `planner,query,repetition,param:<path>...,success,solve_time_s,path_length,checks_performed`.
pub fn write_results(rows: &[BenchRow]) -> Result<String, BenchError> {
    let csv_err = |e: csv::Error| BenchError::Csv(e.to_string());
    let params: Vec<String> = rows
        .first()
        .map(|r| r.params.iter().map(|(p, _)| p.clone()).collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(params.iter().map(|p| format!("param:{p}")))
        .chain(METRIC_COLUMNS.iter().map(|s| s.to_string()))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        if r.params.iter().map(|(p, _)| p).ne(params.iter()) {
            return Err(BenchError::Csv("rows sweep different parameters".into()));
        }
        let mut rec = vec![r.planner.clone(), r.query.clone(), r.repetition.to_string()];
        rec.extend(r.params.iter().map(|(_, v)| float17(*v)));
        rec.push(r.success.to_string());
        rec.push(float17(r.solve_time_s));
        rec.push(r.path_length.map(float17).unwrap_or_default());
        rec.push(r.checks_performed.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of strings is utf-8"))
}

/// Reads text produced by [`write_results`].
pub fn parse_results(text: &str) -> Result<Vec<BenchRow>, BenchError> {
    let bad = |m: String| BenchError::Csv(m);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let params: Vec<String> = header
        .iter()
        .filter_map(|h| h.strip_prefix("param:").map(str::to_string))
        .collect();
    let col: BTreeMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    for c in FIXED_COLUMNS.iter().chain(&METRIC_COLUMNS) {
        if !col.contains_key(c) {
            return Err(bad(format!("missing column `{c}`")));
        }
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let get = |c: &str| rec.get(col[c]).unwrap_or_default();
        let num = |c: &str| get(c).parse::<f64>().map_err(|_| bad(format!("column `{c}`: `{}`", get(c))));
        let mut assignment = Vec::new();
        for p in &params {
            let c = format!("param:{p}");
            assignment.push((p.clone(), num(&c)?));
        }
        rows.push(BenchRow {
            planner: get("planner").to_string(),
            params: assignment,
            query: get("query").to_string(),
            repetition: get("repetition").parse().map_err(|_| bad("repetition".into()))?,
            success: get("success").parse().map_err(|_| bad("success".into()))?,
            solve_time_s: num("solve_time_s")?,
            path_length: if get("path_length").is_empty() {
                None
            } else {
                Some(num("path_length")?)
            },
            checks_performed: get("checks_performed").parse().map_err(|_| bad("checks_performed".into()))?,
        });
    }
    Ok(rows)
}
