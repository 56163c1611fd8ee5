//! One error taxonomy for the CLI (exit codes) and the service (HTTP statuses).

use std::fmt;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use robosetup_core::acm_gen::AcmGenError;
use robosetup_core::bench::BenchError;
use robosetup_core::collision::SceneError;
use robosetup_core::confgen::ConfGenError;
use robosetup_core::kinematics::KinematicsError;
use robosetup_core::model::ModelError;
use robosetup_core::planning::PlanError;
use robosetup_core::report::{Severity, ValidationReport};
use robosetup_core::srdf::SemanticError;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Malformed input or a failed validation.
    Invalid,
    NotFound,
    Conflict,
    /// The planner ran but found no solution.
    PlanFailed,
    Io,
    Internal,
}

impl ErrorKind {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorKind::Invalid => StatusCode::BAD_REQUEST,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::PlanFailed => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Io | ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Process exit code; 2 is left to argument parsing.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Invalid => 3,
            ErrorKind::NotFound => 4,
            ErrorKind::Conflict => 5,
            ErrorKind::Io => 6,
            ErrorKind::PlanFailed => 7,
            ErrorKind::Internal => 1,
        }
    }
}

/// The JSON error envelope: `{code, message, element?}`, plus the validation
/// report when one caused the failure.
#[derive(Debug, Serialize)]
pub struct AppError {
    pub code: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ValidationReport>,
}

impl AppError {
    pub fn new(code: ErrorKind, message: impl Into<String>) -> AppError {
        AppError {
            code,
            message: message.into(),
            element: None,
            report: None,
        }
    }

    pub fn invalid(message: impl Into<String>) -> AppError {
        AppError::new(ErrorKind::Invalid, message)
    }

    pub fn not_found(message: impl Into<String>) -> AppError {
        AppError::new(ErrorKind::NotFound, message)
    }

    pub fn with_element(mut self, element: impl Into<String>) -> AppError {
        self.element = Some(element.into());
        self
    }

    /// A rejected edit or model: the report's first error names the element, as
    /// its subjects joined by `/` (e.g. `group/link`).
    pub fn from_report(message: impl Into<String>, report: ValidationReport) -> AppError {
        let element = report
            .iter()
            .find(|f| f.severity == Severity::Error && !f.subjects.is_empty())
            .map(|f| f.subjects.join("/"));
        AppError {
            code: ErrorKind::Invalid,
            message: message.into(),
            element,
            report: Some(report),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.code.exit_code()
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> AppError {
        let code = if e.kind() == std::io::ErrorKind::NotFound {
            ErrorKind::NotFound
        } else {
            ErrorKind::Io
        };
        AppError::new(code, format!("{}: {e}", path.display())).with_element(path.display().to_string())
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        if let Some(r) = &self.report {
            write!(f, "\n{r}")?;
        }
        Ok(())
    }
}

impl std::error::Error for AppError {}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

fn model_element(e: &ModelError) -> Option<&str> {
    match e {
        ModelError::MissingAttribute { element, .. }
        | ModelError::InvalidValue { element, .. }
        | ModelError::Shape { element, .. } => Some(element),
        ModelError::DuplicateLink(n) | ModelError::DuplicateJoint(n) | ModelError::MissingLimits(n) | ModelError::ZeroAxis(n) => {
            Some(n)
        }
        ModelError::DanglingReference { joint, .. }
        | ModelError::InvalidLimits { joint, .. }
        | ModelError::UnknownJointType { joint, .. } => Some(joint),
        ModelError::MultipleParents { link, .. } => Some(link),
        ModelError::MultipleRoots(v) | ModelError::Cycle(v) => v.first().map(String::as_str),
        ModelError::Xml(_) | ModelError::NoRoot | ModelError::Empty => None,
    }
}

fn kinematics_element(e: &KinematicsError) -> Option<String> {
    match e {
        KinematicsError::MissingJoint(n)
        | KinematicsError::UnknownJoint(n)
        | KinematicsError::UnknownLink(n)
        | KinematicsError::NotAChain(n)
        | KinematicsError::Unbounded(n)
        | KinematicsError::EmptyGroup(n) => Some(n.clone()),
        KinematicsError::OutOfLimits { variable, .. } => Some(variable.clone()),
        KinematicsError::TipNotInChain { tip, .. } => Some(tip.clone()),
        KinematicsError::InvalidParams(_) => None,
    }
}

impl From<ModelError> for AppError {
    fn from(e: ModelError) -> Self {
        let element = model_element(&e).map(str::to_string);
        let mut out = AppError::invalid(e.to_string());
        out.element = element;
        out
    }
}

impl From<KinematicsError> for AppError {
    fn from(e: KinematicsError) -> Self {
        let mut out = AppError::invalid(e.to_string());
        out.element = kinematics_element(&e);
        out
    }
}

impl From<SemanticError> for AppError {
    fn from(e: SemanticError) -> Self {
        let (code, element) = match &e {
            SemanticError::MissingAttribute { element, .. } | SemanticError::InvalidValue { element, .. } => {
                (ErrorKind::Invalid, Some(element.clone()))
            }
            SemanticError::UnknownJoint { name, .. } | SemanticError::UnknownLink { name, .. } => {
                (ErrorKind::Invalid, Some(name.clone()))
            }
            SemanticError::UnknownGroup(n) => (ErrorKind::NotFound, Some(n.clone())),
            SemanticError::DuplicateGroup(n) | SemanticError::EmptyGroup(n) => (ErrorKind::Invalid, Some(n.clone())),
            SemanticError::UnresolvableChain { group, .. } => (ErrorKind::Invalid, Some(group.clone())),
            SemanticError::SubgroupCycle(v) => (ErrorKind::Invalid, v.first().cloned()),
            SemanticError::NotFound { name, .. } => (ErrorKind::NotFound, Some(name.clone())),
            SemanticError::Duplicate { name, .. } => (ErrorKind::Conflict, Some(name.clone())),
            SemanticError::Kinematics(k) => return k.clone().into(),
            SemanticError::Model(m) => (ErrorKind::Invalid, model_element(m).map(str::to_string)),
            SemanticError::Xml(_) => (ErrorKind::Invalid, None),
        };
        AppError {
            code,
            message: e.to_string(),
            element,
            report: None,
        }
    }
}

impl From<PlanError> for AppError {
    fn from(e: PlanError) -> Self {
        let message = e.to_string();
        match e {
            PlanError::IkFailed(g) => AppError::new(ErrorKind::PlanFailed, message).with_element(g),
            PlanError::Timeout { .. } => AppError::new(ErrorKind::PlanFailed, message),
            PlanError::UnknownPose { name, .. } => AppError::not_found(message).with_element(name),
            PlanError::UnknownPlugin { name, .. } => AppError::invalid(message).with_element(name),
            PlanError::DuplicatePlugin { name, .. } => AppError::new(ErrorKind::Conflict, message).with_element(name),
            PlanError::StartInCollision { first, .. } | PlanError::GoalInCollision { first, .. } => {
                AppError::invalid(message).with_element(first)
            }
            PlanError::Kinematics(k) => k.into(),
            PlanError::InvalidRequest(_)
            | PlanError::InvalidLimits(_)
            | PlanError::StartOutOfBounds(_)
            | PlanError::Semantic(_) => AppError::invalid(message),
        }
    }
}

impl From<ConfGenError> for AppError {
    fn from(e: ConfGenError) -> Self {
        let message = e.to_string();
        match e {
            ConfGenError::InvalidSemantic(report) => AppError::from_report("semantic configuration has errors", report),
            ConfGenError::Exists(p) => AppError::new(ErrorKind::Conflict, message).with_element(p.display().to_string()),
            ConfGenError::Io { path, source } => AppError::io(&path, source),
            ConfGenError::Conf { path, .. } => AppError::invalid(message).with_element(path),
            ConfGenError::InvalidOption(_) | ConfGenError::Semantic(_) => AppError::invalid(message),
        }
    }
}

impl From<AcmGenError> for AppError {
    fn from(e: AcmGenError) -> Self {
        let message = e.to_string();
        match e {
            AcmGenError::JobRunning(_) => AppError::new(ErrorKind::Conflict, message),
            AcmGenError::UnknownJob(_) => AppError::not_found(message),
            AcmGenError::Cancelled => AppError::new(ErrorKind::Internal, message),
            AcmGenError::Kinematics(k) => k.into(),
            AcmGenError::NoSamples | AcmGenError::InvalidThreshold(_) | AcmGenError::InvalidGranularity => {
                AppError::invalid(message)
            }
        }
    }
}

impl From<BenchError> for AppError {
    fn from(e: BenchError) -> Self {
        let message = e.to_string();
        match e {
            BenchError::Plan(p) => p.into(),
            BenchError::Scene { path, .. } => AppError::invalid(message).with_element(path.display().to_string()),
            BenchError::Csv(_) => AppError::new(ErrorKind::Internal, message),
            BenchError::Conf(_) | BenchError::Invalid(_) => AppError::invalid(message),
        }
    }
}

impl From<SceneError> for AppError {
    fn from(e: SceneError) -> Self {
        let message = e.to_string();
        match e {
            SceneError::DuplicateObject(n) => AppError::new(ErrorKind::Conflict, message).with_element(n),
            SceneError::UnknownObject(n) => AppError::not_found(message).with_element(n),
            SceneError::Json(_) => AppError::invalid(message),
        }
    }
}
