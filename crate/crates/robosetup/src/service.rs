//! Local HTTP+JSON service over a single in-memory project.
//!
//! Reads run concurrently; every mutation takes the project's write lock, is
//! validated on a copy and committed only when it introduces no new errors.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use robosetup_core::acm_gen::{AcmGenParams, AcmJobs, AcmReport, PairCount};
use robosetup_core::collision::{check_state, CollisionFlags, PlanningSceneWorld};
use robosetup_core::confgen::{write_bundle, BundleManifest, GenOptions};
use robosetup_core::kinematics::{
    check_limits, default_positions, forward_kinematics, indexed_rng, sample_variables, RobotState,
};
use robosetup_core::model::{parse_urdf, validate_model, RobotModel, VariableBounds};
use robosetup_core::planning::{
    Goal, JointLimitsTable, Path as JointPath, Pipeline, PipelineConfig, PlanRequest, PlanningScene, PoseTarget, Target,
    Trajectory,
};
use robosetup_core::pose::Pose;
use robosetup_core::report::ValidationReport;
use robosetup_core::shape::Shape;
use robosetup_core::srdf::{
    effective_model, parse_srdf, serialize_srdf, EndEffector, GroupState, PlanningGroup, SemanticError, SemanticModel,
    VirtualJoint,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tower_http::services::ServeDir;

use crate::error::{AppError, ErrorKind};
use crate::ops;

type ApiResult<T> = Result<T, AppError>;

/// Shared service state: at most one project at a time.
#[derive(Clone)]
pub struct AppState {
    project: Arc<RwLock<Option<Project>>>,
    ui: Option<PathBuf>,
}

impl AppState {
    pub fn new(ui: Option<PathBuf>) -> AppState {
        AppState {
            project: Arc::new(RwLock::new(None)),
            ui,
        }
    }

    fn read(&self) -> ApiResult<RwLockReadGuard<'_, Option<Project>>> {
        self.project.read().map_err(|_| AppError::new(ErrorKind::Internal, "project lock poisoned"))
    }

    fn write(&self) -> ApiResult<RwLockWriteGuard<'_, Option<Project>>> {
        self.project.write().map_err(|_| AppError::new(ErrorKind::Internal, "project lock poisoned"))
    }
}

fn no_project() -> AppError {
    AppError::not_found("no project loaded; POST /api/project first")
}

struct Project {
    model: Arc<RobotModel>,
    model_path: Option<PathBuf>,
    asset_root: Option<PathBuf>,
    semantic: SemanticModel,
    acm: Option<AcmReport>,
    jobs: AcmJobs,
    /// Most recent job and whether its result has been applied.
    latest_job: Option<(u64, bool)>,
    world: PlanningSceneWorld,
    /// Current state over the effective model's variables.
    state: RobotState,
    options: GenOptions,
}

impl Project {
    fn effective(&self) -> ApiResult<RobotModel> {
        Ok(effective_model(&self.model, &self.semantic)?)
    }

    /// Applies a finished ACM job: keeps the report and replaces the disabled pairs.
    fn sync_acm(&mut self) -> ApiResult<()> {
        let Some((id, false)) = self.latest_job else {
            return Ok(());
        };
        let job = self.jobs.get(id)?;
        let mut job = job.lock().map_err(|_| AppError::new(ErrorKind::Internal, "job lock poisoned"))?;
        if let Some(Ok(report)) = job.try_result() {
            self.semantic.set_disabled_pairs(&report.acm);
            self.acm = Some(report.clone());
            self.latest_job = Some((id, true));
        } else if job.is_finished() {
            self.latest_job = Some((id, true));
        }
        Ok(())
    }

    /// Replaces the semantic model if the edit adds no new errors.
    fn commit_semantic(&mut self, next: SemanticModel) -> ApiResult<ValidationReport> {
        let before = robosetup_core::srdf::validate_semantic(&self.model, &self.semantic);
        let after = robosetup_core::srdf::validate_semantic(&self.model, &next);
        let new_errors = after
            .iter()
            .any(|f| f.severity == robosetup_core::report::Severity::Error && !before.findings.contains(f));
        if new_errors {
            return Err(AppError::from_report("edit rejected: it introduces validation errors", after));
        }
        // a changed virtual joint changes the variable set; keep what still applies
        let eff = effective_model(&self.model, &next)?;
        let mut q = default_positions(&eff);
        for (name, v) in self.state.iter() {
            if let Some(i) = eff.variable_index(name) {
                q[i] = *v;
            }
        }
        self.state = RobotState::from_vector(&eff, &q);
        self.semantic = next;
        Ok(after)
    }
}

/// JSON body extractor whose rejections use the error envelope.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = AppError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|e| AppError::invalid(e.body_text()))
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api", get(index))
        .route("/api/project", post(load_project).get(project_summary))
        .route("/api/model/geometry", get(geometry))
        .route("/api/fk", post(fk))
        .route("/api/acm/jobs", post(start_acm_job))
        .route("/api/acm/jobs/{id}", get(acm_job).delete(cancel_acm_job))
        .route("/api/acm", get(acm_report))
        .route("/api/srdf", get(srdf_xml).put(import_srdf))
        .route("/api/srdf/report", get(srdf_report))
        .route("/api/srdf/{kind}", get(list_items).post(add_item))
        .route("/api/srdf/{kind}/{*key}", put(replace_item).delete(remove_item))
        .route("/api/bundle", post(export_bundle))
        .route("/api/plan", post(plan))
        .route("/api/random_state", post(random_state))
        .route("/api/world", get(get_world).post(set_world))
        .route("/api/export/state", get(export_state))
        .route("/api/import/state", post(import_state));
    let app = match &state.ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(index)).fallback(unknown_route),
    };
    app.with_state(state)
}

async fn unknown_route() -> AppError {
    AppError::not_found("no such endpoint; GET /api lists them")
}

const ENDPOINTS: &[(&str, &str, &str)] = &[
    ("POST", "/api/project", "load a robot: {urdf | path, asset_root?, srdf?} -> model summary"),
    ("GET", "/api/project", "model summary of the loaded robot"),
    ("GET", "/api/model/geometry", "per-link triangulated shapes and default-state poses"),
    ("POST", "/api/fk", "{positions} -> per-link poses"),
    ("POST", "/api/acm/jobs", "{samples, seed, always_threshold} -> job id (409 while one runs)"),
    ("GET", "/api/acm/jobs/{id}", "job progress"),
    ("DELETE", "/api/acm/jobs/{id}", "cancel a job"),
    ("GET", "/api/acm", "latest ACM report (404 until a job completes)"),
    ("GET", "/api/srdf", "semantic description as SRDF XML"),
    ("PUT", "/api/srdf", "replace the semantic description from SRDF XML"),
    ("GET", "/api/srdf/report", "validation report of the semantic description"),
    ("GET|POST", "/api/srdf/{kind}", "list or add groups, group_states, end_effectors, virtual_joints, passive_joints"),
    ("PUT|DELETE", "/api/srdf/{kind}/{key}", "replace or remove one entry (group states: {group}/{name})"),
    ("POST", "/api/bundle", "{directory, overwrite?, options?} -> manifest with hashes"),
    ("POST", "/api/plan", "{group, goal, start?, seed?} -> path and trajectory"),
    ("POST", "/api/random_state", "{group, seed?} -> collision-free random state of the group"),
    ("GET|POST", "/api/world", "collision objects of the scene"),
    ("GET", "/api/export/state", "current robot state"),
    ("POST", "/api/import/state", "set the current robot state"),
];

async fn index() -> Json<Value> {
    Json(Value::Array(
        ENDPOINTS
            .iter()
            .map(|(m, p, d)| serde_json::json!({"method": m, "path": p, "description": d}))
            .collect(),
    ))
}

// ---------------------------------------------------------------- project

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectRequest {
    /// URDF document text.
    #[serde(default)]
    pub urdf: Option<String>,
    /// Path of a URDF file readable by the service.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub asset_root: Option<PathBuf>,
    /// Optional SRDF document to start from.
    #[serde(default)]
    pub srdf: Option<String>,
}

#[derive(Debug, Serialize)]
struct JointSummary {
    name: String,
    #[serde(rename = "type")]
    kind: &'static str,
    parent: String,
    child: String,
    axis: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    velocity: Option<f64>,
    active: bool,
}

#[derive(Debug, Serialize)]
struct VariableSummary {
    name: String,
    lower: Option<f64>,
    upper: Option<f64>,
    default: f64,
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    name: String,
    root_link: String,
    links: Vec<String>,
    joints: Vec<JointSummary>,
    variables: Vec<VariableSummary>,
    warnings: Vec<String>,
    report: ValidationReport,
}

fn summary(p: &Project) -> ApiResult<ModelSummary> {
    let m = &p.model;
    let eff = p.effective()?;
    let defaults = default_positions(&eff);
    Ok(ModelSummary {
        name: m.name().to_string(),
        root_link: m.root_link().to_string(),
        links: m.links().iter().map(|l| l.name.clone()).collect(),
        joints: m
            .joints()
            .iter()
            .map(|j| JointSummary {
                name: j.name.clone(),
                kind: j.kind.as_str(),
                parent: j.parent_link.clone(),
                child: j.child_link.clone(),
                axis: [j.axis.x, j.axis.y, j.axis.z],
                lower: j.limits.map(|l| l.lower),
                upper: j.limits.map(|l| l.upper),
                velocity: j.limits.and_then(|l| l.velocity),
                active: j.is_active(),
            })
            .collect(),
        variables: eff
            .variables()
            .iter()
            .zip(&defaults)
            .map(|(v, d)| {
                let (lower, upper) = match v.bounds {
                    VariableBounds::Interval(lo, hi) => (Some(lo), Some(hi)),
                    _ => (None, None),
                };
                VariableSummary {
                    name: v.name.clone(),
                    lower,
                    upper,
                    default: *d,
                }
            })
            .collect(),
        warnings: m.warnings().to_vec(),
        report: validate_model(m),
    })
}

async fn load_project(State(s): State<AppState>, ApiJson(req): ApiJson<ProjectRequest>) -> ApiResult<Json<ModelSummary>> {
    let (model, report) = match (&req.urdf, &req.path) {
        (Some(text), None) => {
            let model = parse_urdf(text, req.asset_root.as_deref())?;
            let report = validate_model(&model);
            (model, report)
        }
        (None, Some(path)) => ops::load_model(path, req.asset_root.as_deref())?,
        _ => return Err(AppError::invalid("give exactly one of `urdf` (text) or `path`")),
    };
    if report.has_errors() {
        return Err(AppError::from_report("robot model has errors", report));
    }
    let semantic = match &req.srdf {
        Some(text) => parse_srdf(text, &model)?,
        None => SemanticModel::new(model.name()),
    };
    let eff = effective_model(&model, &semantic)?;
    let project = Project {
        state: RobotState::from_vector(&eff, &default_positions(&eff)),
        model: Arc::new(model),
        model_path: req.path.clone(),
        asset_root: req.asset_root.clone(),
        semantic,
        acm: None,
        jobs: AcmJobs::new(),
        latest_job: None,
        world: PlanningSceneWorld::new(),
        options: GenOptions::default(),
    };
    let out = summary(&project)?;
    let mut guard = s.write()?;
    if let Some(old) = guard.as_mut() {
        old.jobs.clear();
    }
    *guard = Some(project);
    Ok(Json(out))
}

async fn project_summary(State(s): State<AppState>) -> ApiResult<Json<ModelSummary>> {
    let guard = s.read()?;
    Ok(Json(summary(guard.as_ref().ok_or_else(no_project)?)?))
}

// ---------------------------------------------------------------- geometry and FK

#[derive(Debug, Serialize)]
pub struct PoseJson {
    pub xyz: [f64; 3],
    /// `[x, y, z, w]`.
    pub quaternion: [f64; 4],
    pub rpy: [f64; 3],
}

impl From<&Pose> for PoseJson {
    fn from(p: &Pose) -> Self {
        let q = p.rotation.quaternion();
        PoseJson {
            xyz: p.xyz(),
            quaternion: [q.i, q.j, q.k, q.w],
            rpy: p.rpy(),
        }
    }
}

#[derive(Debug, Serialize)]
struct GeometryJson {
    shape: Shape,
    /// Shape frame relative to the link frame.
    origin: PoseJson,
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Serialize)]
struct LinkGeometry {
    name: String,
    pose: PoseJson,
    visual: Vec<GeometryJson>,
    collision: Vec<GeometryJson>,
}

fn geometry_json(g: &robosetup_core::model::Geometry) -> GeometryJson {
    let (vertices, triangles) = g.shape.triangulate();
    GeometryJson {
        shape: g.shape.clone(),
        origin: (&g.origin).into(),
        vertices,
        triangles,
    }
}

async fn geometry(State(s): State<AppState>) -> ApiResult<Json<Value>> {
    let guard = s.read()?;
    let p = guard.as_ref().ok_or_else(no_project)?;
    let eff = p.effective()?;
    let poses = forward_kinematics(&eff, &RobotState::from_vector(&eff, &default_positions(&eff)))?;
    let links: Vec<LinkGeometry> = p
        .model
        .links()
        .iter()
        .map(|l| LinkGeometry {
            name: l.name.clone(),
            pose: poses.get(&l.name).map(PoseJson::from).unwrap_or_else(|| (&Pose::identity()).into()),
            visual: l.visual.iter().map(geometry_json).collect(),
            collision: l.collision.iter().map(geometry_json).collect(),
        })
        .collect();
    Ok(Json(serde_json::json!({ "links": links })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkRequest {
    /// Values overlaid on the model defaults.
    #[serde(default)]
    pub positions: RobotState,
}

async fn fk(State(s): State<AppState>, ApiJson(req): ApiJson<FkRequest>) -> ApiResult<Json<Value>> {
    let guard = s.read()?;
    let p = guard.as_ref().ok_or_else(no_project)?;
    let eff = p.effective()?;
    let q = req.positions.overlay(&eff, &default_positions(&eff))?;
    check_limits(&eff, &q)?;
    let poses = forward_kinematics(&eff, &RobotState::from_vector(&eff, &q))?;
    let links: BTreeMap<String, PoseJson> = poses.iter().map(|(k, v)| (k.clone(), v.into())).collect();
    Ok(Json(serde_json::json!({ "links": links })))
}

// ---------------------------------------------------------------- ACM

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcmJobRequest {
    pub samples: u64,
    pub seed: u64,
    pub always_threshold: f64,
    /// Worker threads for this job (default: one per core).
    pub threads: Option<usize>,
}

impl Default for AcmJobRequest {
    fn default() -> Self {
        let d = AcmGenParams::default();
        AcmJobRequest {
            samples: d.sample_count,
            seed: d.seed,
            always_threshold: d.always_threshold,
            threads: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct JobStatus {
    id: u64,
    done: u64,
    total: u64,
    finished: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    partial: Vec<PairCount>,
}

async fn start_acm_job(State(s): State<AppState>, ApiJson(req): ApiJson<AcmJobRequest>) -> ApiResult<Response> {
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    p.sync_acm()?;
    let params = AcmGenParams {
        sample_count: req.samples,
        seed: req.seed,
        always_threshold: req.always_threshold,
        ..Default::default()
    };
    let id = p.jobs.start(p.model.clone(), params, req.threads)?;
    p.latest_job = Some((id, false));
    Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "id": id }))).into_response())
}

fn parse_job_id(id: &str) -> ApiResult<u64> {
    id.parse().map_err(|_| AppError::invalid(format!("job id must be an integer, got `{id}`")))
}

async fn acm_job(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JobStatus>> {
    let id = parse_job_id(&id)?;
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    p.sync_acm()?;
    let job = p.jobs.get(id)?;
    let mut job = job.lock().map_err(|_| AppError::new(ErrorKind::Internal, "job lock poisoned"))?;
    let progress = job.progress();
    let (finished, error) = match job.try_result() {
        None => (false, None),
        Some(Ok(_)) => (true, None),
        Some(Err(e)) => (true, Some(e)),
    };
    Ok(Json(JobStatus {
        id,
        done: progress.done,
        total: progress.total,
        finished,
        error,
        partial: progress.partial,
    }))
}

async fn cancel_acm_job(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let id = parse_job_id(&id)?;
    let guard = s.read()?;
    let p = guard.as_ref().ok_or_else(no_project)?;
    let job = p.jobs.get(id)?;
    job.lock().map_err(|_| AppError::new(ErrorKind::Internal, "job lock poisoned"))?.cancel();
    Ok(StatusCode::NO_CONTENT)
}

/// The report as the CLI writes it, byte for byte.
async fn acm_report(State(s): State<AppState>) -> ApiResult<Response> {
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    p.sync_acm()?;
    let report = p
        .acm
        .as_ref()
        .ok_or_else(|| AppError::not_found("no completed ACM job yet"))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], report.to_deterministic_json()).into_response())
}

// ---------------------------------------------------------------- semantic description

async fn srdf_xml(State(s): State<AppState>) -> ApiResult<Response> {
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    p.sync_acm()?;
    Ok(([(header::CONTENT_TYPE, "application/xml")], serialize_srdf(&p.semantic)).into_response())
}

async fn import_srdf(State(s): State<AppState>, body: String) -> ApiResult<Json<ValidationReport>> {
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    let next = parse_srdf(&body, &p.model)?;
    Ok(Json(p.commit_semantic(next)?))
}

async fn srdf_report(State(s): State<AppState>) -> ApiResult<Json<ValidationReport>> {
    let guard = s.read()?;
    let p = guard.as_ref().ok_or_else(no_project)?;
    Ok(Json(robosetup_core::srdf::validate_semantic(&p.model, &p.semantic)))
}

/// A passive joint entry, `{"name": "<joint>"}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PassiveJoint {
    name: String,
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Groups,
    GroupStates,
    EndEffectors,
    VirtualJoints,
    PassiveJoints,
}

impl Kind {
    fn parse(s: &str) -> ApiResult<Kind> {
        Ok(match s {
            "groups" => Kind::Groups,
            "group_states" => Kind::GroupStates,
            "end_effectors" => Kind::EndEffectors,
            "virtual_joints" => Kind::VirtualJoints,
            "passive_joints" => Kind::PassiveJoints,
            other => return Err(AppError::not_found(format!("unknown semantic collection `{other}`")).with_element(other)),
        })
    }

    fn label(self) -> &'static str {
        match self {
            Kind::Groups => "group",
            Kind::GroupStates => "group state",
            Kind::EndEffectors => "end effector",
            Kind::VirtualJoints => "virtual joint",
            Kind::PassiveJoints => "passive joint",
        }
    }
}

fn decode<T: DeserializeOwned>(body: Value) -> ApiResult<T> {
    serde_json::from_value(body).map_err(|e| AppError::invalid(e.to_string()))
}

fn encode<T: Serialize>(items: &[T]) -> ApiResult<Value> {
    serde_json::to_value(items).map_err(|e| AppError::new(ErrorKind::Internal, e.to_string()))
}

/// Insert (`key == None`), replace, or remove (`item == None`) one entry.
fn edit<T>(
    items: &mut Vec<T>,
    kind: Kind,
    key: Option<&str>,
    item: Option<T>,
    key_of: impl Fn(&T) -> String,
) -> ApiResult<()> {
    let dup = |name: String| AppError::from(SemanticError::Duplicate { kind: kind.label(), name });
    match (key, item) {
        (None, Some(item)) => {
            let k = key_of(&item);
            if items.iter().any(|i| key_of(i) == k) {
                return Err(dup(k));
            }
            items.push(item);
        }
        (Some(key), item) => {
            let pos = items.iter().position(|i| key_of(i) == key).ok_or_else(|| {
                AppError::from(SemanticError::NotFound {
                    kind: kind.label(),
                    name: key.to_string(),
                })
            })?;
            match item {
                Some(item) => {
                    let k = key_of(&item);
                    if k != key && items.iter().any(|i| key_of(i) == k) {
                        return Err(dup(k));
                    }
                    items[pos] = item;
                }
                None => {
                    items.remove(pos);
                }
            }
        }
        (None, None) => unreachable!("insert needs an item"),
    }
    Ok(())
}

fn apply(semantic: &mut SemanticModel, kind: Kind, key: Option<&str>, body: Option<Value>) -> ApiResult<()> {
    match kind {
        Kind::Groups => {
            let item: Option<PlanningGroup> = body.map(decode).transpose()?;
            edit(&mut semantic.groups, kind, key, item, |g| g.name.clone())
        }
        Kind::GroupStates => {
            let item: Option<GroupState> = body.map(decode).transpose()?;
            edit(&mut semantic.group_states, kind, key, item, |s| format!("{}/{}", s.group, s.name))
        }
        Kind::EndEffectors => {
            let item: Option<EndEffector> = body.map(decode).transpose()?;
            edit(&mut semantic.end_effectors, kind, key, item, |e| e.name.clone())
        }
        Kind::VirtualJoints => {
            let item: Option<VirtualJoint> = body.map(decode).transpose()?;
            edit(&mut semantic.virtual_joints, kind, key, item, |v| v.name.clone())
        }
        Kind::PassiveJoints => {
            let item: Option<PassiveJoint> = body.map(decode).transpose()?;
            let mut wrapped: Vec<PassiveJoint> = semantic
                .passive_joints
                .iter()
                .map(|n| PassiveJoint { name: n.clone() })
                .collect();
            edit(&mut wrapped, kind, key, item, |p| p.name.clone())?;
            semantic.passive_joints = wrapped.into_iter().map(|p| p.name).collect();
            Ok(())
        }
    }
}

async fn list_items(State(s): State<AppState>, Path(kind): Path<String>) -> ApiResult<Json<Value>> {
    let kind = Kind::parse(&kind)?;
    let guard = s.read()?;
    let sem = &guard.as_ref().ok_or_else(no_project)?.semantic;
    Ok(Json(match kind {
        Kind::Groups => encode(&sem.groups)?,
        Kind::GroupStates => encode(&sem.group_states)?,
        Kind::EndEffectors => encode(&sem.end_effectors)?,
        Kind::VirtualJoints => encode(&sem.virtual_joints)?,
        Kind::PassiveJoints => encode(
            &sem.passive_joints
                .iter()
                .map(|n| PassiveJoint { name: n.clone() })
                .collect::<Vec<_>>(),
        )?,
    }))
}

fn mutate(s: &AppState, kind: &str, key: Option<&str>, body: Option<Value>) -> ApiResult<Json<ValidationReport>> {
    let kind = Kind::parse(kind)?;
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    p.sync_acm()?;
    let mut next = p.semantic.clone();
    apply(&mut next, kind, key, body)?;
    Ok(Json(p.commit_semantic(next)?))
}

async fn add_item(
    State(s): State<AppState>,
    Path(kind): Path<String>,
    ApiJson(body): ApiJson<Value>,
) -> ApiResult<Json<ValidationReport>> {
    mutate(&s, &kind, None, Some(body))
}

async fn replace_item(
    State(s): State<AppState>,
    Path((kind, key)): Path<(String, String)>,
    ApiJson(body): ApiJson<Value>,
) -> ApiResult<Json<ValidationReport>> {
    mutate(&s, &kind, Some(&key), Some(body))
}

async fn remove_item(
    State(s): State<AppState>,
    Path((kind, key)): Path<(String, String)>,
) -> ApiResult<Json<ValidationReport>> {
    mutate(&s, &kind, Some(&key), None)
}

// ---------------------------------------------------------------- bundle

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleRequest {
    pub directory: PathBuf,
    #[serde(default)]
    pub overwrite: bool,
    /// Generation options; model paths are filled in from the project.
    #[serde(default)]
    pub options: Option<GenOptions>,
}

async fn export_bundle(State(s): State<AppState>, ApiJson(req): ApiJson<BundleRequest>) -> ApiResult<Json<BundleManifest>> {
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    p.sync_acm()?;
    if let Some(o) = req.options {
        p.options = o;
    }
    let opts = ops::gen_options(&p.options, p.model_path.as_deref(), p.asset_root.as_deref());
    let bundle = ops::bundle(&p.model, &p.semantic, &opts)?;
    Ok(Json(write_bundle(&bundle, &req.directory, req.overwrite)?))
}

// ---------------------------------------------------------------- planning

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GoalRequest {
    /// A group state of the semantic description.
    Named { name: String },
    Joint { state: RobotState },
    Pose { pose: PoseTarget },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBody {
    pub group: String,
    pub goal: GoalRequest,
    /// Start values overlaid on the current state (default: the current state).
    #[serde(default)]
    pub start: Option<RobotState>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub time_budget: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PlanReply {
    group: String,
    path: JointPath,
    trajectory: Trajectory,
    checks_performed: u64,
    solve_time_s: f64,
}

/// Scene and pipeline for the project's current semantic model, world and
/// generation options.
fn planning_setup(p: &Project) -> ApiResult<(PlanningScene, Pipeline)> {
    let o = &p.options;
    let scene = PlanningScene::new(&p.model, p.semantic.clone())?.with_world(p.world.clone());
    let limits = JointLimitsTable::from_model(&scene.model, o.velocity_scaling, o.default_velocity, o.default_acceleration);
    let mut params = BTreeMap::new();
    params.insert("goal_bias".to_string(), o.goal_bias);
    let config = PipelineConfig {
        ik_params: o.ik_params,
        ik_solvers: o.solvers.clone(),
        goal_tolerance: o.goal_tolerance,
        resolution_fraction: o.resolution_fraction,
        time_budget: o.time_budget,
        planner_params: params,
        ..Default::default()
    };
    Ok((
        scene.with_limits(limits),
        Pipeline {
            config,
            ..Default::default()
        },
    ))
}

async fn plan(State(s): State<AppState>, ApiJson(body): ApiJson<PlanBody>) -> ApiResult<Json<PlanReply>> {
    let (scene, pipeline, start) = {
        let mut guard = s.write()?;
        let p = guard.as_mut().ok_or_else(no_project)?;
        p.sync_acm()?;
        let (scene, pipeline) = planning_setup(p)?;
        let mut start = p.state.clone();
        for (k, v) in body.start.iter().flat_map(|s| s.iter()) {
            start.set(k.clone(), *v);
        }
        (scene, pipeline, start)
    };
    let reply = tokio::task::spawn_blocking(move || -> ApiResult<PlanReply> {
        let target = match body.goal {
            GoalRequest::Named { name } => Target::Named(name),
            GoalRequest::Joint { state } => Target::State(state),
            GoalRequest::Pose { pose } => Target::Pose(pose.to_pose()?),
        };
        let goal: Goal = pipeline.goal(&scene, &body.group, &target)?;
        let mut req: PlanRequest = pipeline.request(&body.group, &start, goal, body.seed);
        if let Some(b) = body.time_budget {
            req.time_budget = b;
        }
        let response = pipeline.plan(&scene, &req)?;
        let trajectory = pipeline.timed(&scene, &response)?;
        Ok(PlanReply {
            group: response.group,
            path: response.path,
            trajectory,
            checks_performed: response.checks_performed,
            solve_time_s: response.solve_time_s,
        })
    })
    .await
    .map_err(|e| AppError::new(ErrorKind::Internal, e.to_string()))??;
    Ok(Json(reply))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomStateRequest {
    pub group: String,
    #[serde(default)]
    pub seed: u64,
}

/// Draws at most this many states before giving up.
const RANDOM_STATE_ATTEMPTS: u64 = 1000;

/// A seeded random state of the group that is free of collisions in the current
/// scene; other variables keep their current values.
async fn random_state(State(s): State<AppState>, ApiJson(req): ApiJson<RandomStateRequest>) -> ApiResult<Json<RobotState>> {
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    p.sync_acm()?;
    let (scene, _) = planning_setup(p)?;
    let group = scene.group(&req.group)?;
    let mut q = p.state.to_vector_unchecked(&scene.model)?;
    for i in 0..RANDOM_STATE_ATTEMPTS {
        sample_variables(&scene.model, group.variables(), &mut indexed_rng(req.seed, i), &mut q)?;
        let state = RobotState::from_vector(&scene.model, &q);
        if !check_state(&scene.model, &state, &scene.acm, &scene.world, CollisionFlags::boolean_only())?.in_collision {
            return Ok(Json(state));
        }
    }
    Err(AppError::new(
        ErrorKind::PlanFailed,
        format!("no collision-free state of `{}` in {RANDOM_STATE_ATTEMPTS} draws", req.group),
    )
    .with_element(req.group))
}

// ---------------------------------------------------------------- world and state

async fn get_world(State(s): State<AppState>) -> ApiResult<Json<PlanningSceneWorld>> {
    let guard = s.read()?;
    Ok(Json(guard.as_ref().ok_or_else(no_project)?.world.clone()))
}

async fn set_world(State(s): State<AppState>, body: String) -> ApiResult<Json<PlanningSceneWorld>> {
    let world = PlanningSceneWorld::from_json(&body)?;
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    p.world = world.clone();
    Ok(Json(world))
}

async fn export_state(State(s): State<AppState>) -> ApiResult<Json<RobotState>> {
    let guard = s.read()?;
    Ok(Json(guard.as_ref().ok_or_else(no_project)?.state.clone()))
}

/// Values overlaid on the current state; unknown variables and limit violations
/// are rejected.
async fn import_state(State(s): State<AppState>, ApiJson(values): ApiJson<RobotState>) -> ApiResult<Json<RobotState>> {
    let mut guard = s.write()?;
    let p = guard.as_mut().ok_or_else(no_project)?;
    let eff = p.effective()?;
    let base = p.state.to_vector_unchecked(&eff)?;
    let q = values.overlay(&eff, &base)?;
    check_limits(&eff, &q)?;
    p.state = RobotState::from_vector(&eff, &q);
    Ok(Json(p.state.clone()))
}
