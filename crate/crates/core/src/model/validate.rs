use super::{JointKind, RobotModel};
use crate::report::ValidationReport;

/// Structural findings about a model. Parse warnings are carried over as warnings.
pub fn validate_model(model: &RobotModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    for w in model.warnings() {
        report.warning(&[], w.clone());
    }
    for link in model.links() {
        if !link.has_collision() {
            report.warning(&[&link.name], "link has no collision geometry");
        }
    }
    for joint in model.joints() {
        if let (JointKind::Revolute | JointKind::Prismatic, Some(l)) = (joint.kind, joint.limits) {
            if l.lower == l.upper {
                report.warning(&[&joint.name], format!("zero-range limits [{}, {}]", l.lower, l.upper));
            }
        }
    }
    let depth = model
        .links()
        .iter()
        .enumerate()
        .map(|(i, _)| model.joints_to_link(i).len())
        .max()
        .unwrap_or(0);
    report.info(
        &[model.name()],
        format!(
            "{} links, {} joints, {} active joints, {} variables, root `{}`, depth {}",
            model.links().len(),
            model.joints().len(),
            model.active_joints().len(),
            model.variable_count(),
            model.root_link(),
            depth
        ),
    );
    report
}
