//! Operations shared by the CLI and the service, so both produce identical outputs
//! for equal inputs.

use std::fs;
use std::path::{Path, PathBuf};

use robosetup_core::acm_gen::AcmReport;
use robosetup_core::confgen::{generate_bundle, ConfigBundle, GenOptions, LoadedBundle};
use robosetup_core::model::{parse_urdf, validate_model, RobotModel};
use robosetup_core::planning::{Pipeline, PlanningScene};
use robosetup_core::report::ValidationReport;
use robosetup_core::srdf::{parse_srdf, SemanticModel};

use crate::error::AppError;

pub fn read_text(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Absolute form of `path` without requiring it to exist.
pub fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

/// Parses a URDF; meshes resolve against `assets`, else the file's directory.
pub fn load_model(path: &Path, assets: Option<&Path>) -> Result<(RobotModel, ValidationReport), AppError> {
    let text = read_text(path)?;
    let root = assets.map(Path::to_path_buf).or_else(|| path.parent().map(Path::to_path_buf));
    let model = parse_urdf(&text, root.as_deref())?;
    let report = validate_model(&model);
    Ok((model, report))
}

/// Like [`load_model`], but a model with validation errors is refused.
pub fn load_valid_model(path: &Path, assets: Option<&Path>) -> Result<RobotModel, AppError> {
    let (model, report) = load_model(path, assets)?;
    if report.has_errors() {
        return Err(AppError::from_report(format!("{} has errors", path.display()), report));
    }
    Ok(model)
}

pub fn load_semantic(path: &Path, model: &RobotModel) -> Result<SemanticModel, AppError> {
    Ok(parse_srdf(&read_text(path)?, model)?)
}

pub fn read_acm_report(path: &Path) -> Result<AcmReport, AppError> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| AppError::invalid(format!("{}: {e}", path.display())).with_element(path.display().to_string()))
}

/// Generation options recording where the model lives. Paths are made absolute so
/// the bundle can be used from any working directory.
pub fn gen_options(base: &GenOptions, model_path: Option<&Path>, asset_root: Option<&Path>) -> GenOptions {
    GenOptions {
        model_path: model_path.map(|p| absolute(p).display().to_string()),
        asset_root: asset_root.map(|p| absolute(p).display().to_string()),
        ..base.clone()
    }
}

pub fn bundle(model: &RobotModel, semantic: &SemanticModel, opts: &GenOptions) -> Result<ConfigBundle, AppError> {
    Ok(generate_bundle(model, semantic, opts)?)
}

/// Scene and pipeline described by a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<(PlanningScene, Pipeline, LoadedBundle), AppError> {
    let loaded = LoadedBundle::read(dir)?;
    let model_path = loaded
        .model_path(dir)
        .ok_or_else(|| AppError::invalid("bundle does not name its robot model").with_element("model.urdf"))?;
    let model = load_valid_model(&model_path, loaded.asset_root(dir).as_deref())?;
    let semantic = parse_srdf(&loaded.semantic_text, &model)?;
    let config = loaded.pipeline_config(semantic.groups.iter().map(|g| g.name.as_str()))?;
    let scene = PlanningScene::new(&model, semantic)?.with_limits(loaded.limits.clone());
    Ok((
        scene,
        Pipeline {
            config,
            ..Default::default()
        },
        loaded,
    ))
}
