use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use roxmltree::Node;

use super::{Geometry, Joint, JointKind, JointLimits, Link, ModelError, RobotModel};
use crate::pose::Pose;
use crate::shape::{load_mesh_vertices, ConvexHull, Shape, ShapeError};

/// Parses a URDF document. Mesh filenames resolve against `asset_root` (or the
/// working directory when `None`); `package://` and `file://` prefixes are stripped.
pub fn parse_urdf(document: &str, asset_root: Option<&Path>) -> Result<RobotModel, ModelError> {
    let doc = roxmltree::Document::parse(document).map_err(|e| ModelError::Xml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ModelError::Xml(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }
    let name = required(&robot, "name", "robot")?.to_string();
    let mut warnings = Vec::new();
    let mut links = Vec::new();
    let mut joints = Vec::new();

    for child in robot.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "link" => links.push(parse_link(&child, asset_root, &mut warnings)?),
            "joint" => joints.push(parse_joint(&child, &mut warnings)?),
            "material" => {}
            other => warnings.push(format!("ignored <{other}> element in <robot>")),
        }
    }
    RobotModel::new(name, links, joints, warnings)
}

pub fn parse_urdf_file(path: &Path, asset_root: Option<&Path>) -> Result<RobotModel, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Xml(format!("cannot read {}: {e}", path.display())))?;
    let default_root = path.parent().map(Path::to_path_buf);
    parse_urdf(&text, asset_root.or(default_root.as_deref()))
}

fn required<'a>(node: &Node<'a, '_>, attr: &str, element: &str) -> Result<&'a str, ModelError> {
    node.attribute(attr).ok_or_else(|| ModelError::MissingAttribute {
        element: element.to_string(),
        attribute: attr.to_string(),
    })
}

fn floats<const N: usize>(text: &str, element: &str, attr: &str) -> Result<[f64; N], ModelError> {
    let bad = || ModelError::InvalidValue {
        element: element.to_string(),
        attribute: attr.to_string(),
        value: text.to_string(),
    };
    let parts: Vec<f64> = text
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    if parts.len() != N || parts.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    let mut out = [0.0; N];
    out.copy_from_slice(&parts);
    Ok(out)
}

fn float_attr(node: &Node, attr: &str, element: &str) -> Result<Option<f64>, ModelError> {
    node.attribute(attr)
        .map(|v| floats::<1>(v, element, attr).map(|a| a[0]))
        .transpose()
}

fn parse_origin(node: &Node, element: &str) -> Result<Pose, ModelError> {
    let Some(o) = node.children().find(|c| c.has_tag_name("origin")) else {
        return Ok(Pose::identity());
    };
    let xyz = o.attribute("xyz").map(|v| floats::<3>(v, element, "xyz")).transpose()?;
    let rpy = o.attribute("rpy").map(|v| floats::<3>(v, element, "rpy")).transpose()?;
    Ok(Pose::from_xyz_rpy(xyz.unwrap_or_default(), rpy.unwrap_or_default()))
}

fn parse_link(node: &Node, asset_root: Option<&Path>, warnings: &mut Vec<String>) -> Result<Link, ModelError> {
    let name = required(node, "name", "link")?.to_string();
    let mut link = Link::new(name.clone());
    for child in node.children().filter(Node::is_element) {
        let tag = child.tag_name().name();
        match tag {
            "collision" | "visual" => {
                let element = format!("link `{name}` <{tag}>");
                let origin = parse_origin(&child, &element)?;
                let geom = child
                    .children()
                    .find(|c| c.has_tag_name("geometry"))
                    .ok_or_else(|| ModelError::Xml(format!("{element} has no <geometry>")))?;
                let Some(shape) = parse_geometry(&geom, &element, asset_root, warnings)? else {
                    continue;
                };
                let g = Geometry { shape, origin };
                if tag == "collision" {
                    link.collision.push(g);
                } else {
                    link.visual.push(g);
                }
            }
            // dynamics are outside the planning subset
            "inertial" => {}
            other => warnings.push(format!("ignored <{other}> element in link `{name}`")),
        }
    }
    Ok(link)
}

fn parse_geometry(
    geom: &Node,
    element: &str,
    asset_root: Option<&Path>,
    warnings: &mut Vec<String>,
) -> Result<Option<Shape>, ModelError> {
    let shape_err = |source: ShapeError| ModelError::Shape {
        element: element.to_string(),
        source,
    };
    let Some(s) = geom.children().find(Node::is_element) else {
        return Err(ModelError::Xml(format!("{element}: empty <geometry>")));
    };
    let shape = match s.tag_name().name() {
        "sphere" => {
            let r = float_attr(&s, "radius", element)?.ok_or_else(|| missing(element, "radius"))?;
            Shape::sphere(r)
        }
        "box" => {
            let size = floats::<3>(required(&s, "size", element)?, element, "size")?;
            Shape::cuboid(size)
        }
        "cylinder" => {
            let r = float_attr(&s, "radius", element)?.ok_or_else(|| missing(element, "radius"))?;
            let l = float_attr(&s, "length", element)?.ok_or_else(|| missing(element, "length"))?;
            Shape::cylinder(r, l)
        }
        "mesh" => {
            let filename = required(&s, "filename", element)?;
            let scale = s
                .attribute("scale")
                .map(|v| floats::<3>(v, element, "scale"))
                .transpose()?
                .unwrap_or([1.0; 3]);
            let path = resolve_mesh_path(filename, asset_root);
            let verts = load_mesh_vertices(&path).map_err(shape_err)?;
            let pts: Vec<Point3<f64>> = verts
                .iter()
                .map(|p| Point3::new(p.x * scale[0], p.y * scale[1], p.z * scale[2]))
                .collect();
            ConvexHull::new(&pts).map(Shape::ConvexMesh)
        }
        other => {
            warnings.push(format!("{element}: ignored unsupported geometry <{other}>"));
            return Ok(None);
        }
    };
    shape.map(Some).map_err(shape_err)
}

fn missing(element: &str, attr: &str) -> ModelError {
    ModelError::MissingAttribute {
        element: element.to_string(),
        attribute: attr.to_string(),
    }
}

fn resolve_mesh_path(filename: &str, asset_root: Option<&Path>) -> PathBuf {
    let stripped = filename
        .strip_prefix("package://")
        .or_else(|| filename.strip_prefix("file://"))
        .unwrap_or(filename);
    let p = Path::new(stripped);
    match asset_root {
        Some(root) if p.is_relative() || filename.starts_with("package://") => {
            root.join(stripped.trim_start_matches('/'))
        }
        _ => p.to_path_buf(),
    }
}

fn parse_joint(node: &Node, warnings: &mut Vec<String>) -> Result<Joint, ModelError> {
    let name = required(node, "name", "joint")?.to_string();
    let element = format!("joint `{name}`");
    let kind_str = required(node, "type", &element)?;
    let kind = JointKind::parse(kind_str).ok_or_else(|| ModelError::UnknownJointType {
        joint: name.clone(),
        kind: kind_str.to_string(),
    })?;
    let link_ref = |tag: &str| -> Result<String, ModelError> {
        let n = node
            .children()
            .find(|c| c.has_tag_name(tag))
            .ok_or_else(|| ModelError::Xml(format!("{element} has no <{tag}>")))?;
        Ok(required(&n, "link", &format!("{element} <{tag}>"))?.to_string())
    };
    let parent = link_ref("parent")?;
    let child = link_ref("child")?;
    let origin = parse_origin(node, &element)?;

    let mut joint = Joint::new(name.clone(), kind, parent, child, origin);
    if let Some(axis) = node.children().find(|c| c.has_tag_name("axis")) {
        let a = floats::<3>(required(&axis, "xyz", &element)?, &element, "axis")?;
        let v = Vector3::new(a[0], a[1], a[2]);
        if v.norm() < 1e-12 {
            return Err(ModelError::ZeroAxis(name));
        }
        joint.axis = v.normalize();
    }
    if let Some(limit) = node.children().find(|c| c.has_tag_name("limit")) {
        let lower = float_attr(&limit, "lower", &element)?;
        let upper = float_attr(&limit, "upper", &element)?;
        if matches!(kind, JointKind::Revolute | JointKind::Prismatic) && (lower.is_none() || upper.is_none()) {
            return Err(ModelError::MissingLimits(name));
        }
        joint.limits = Some(JointLimits {
            lower: lower.unwrap_or(0.0),
            upper: upper.unwrap_or(0.0),
            velocity: float_attr(&limit, "velocity", &element)?,
            effort: float_attr(&limit, "effort", &element)?,
        });
    }
    for child in node.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "origin" | "parent" | "child" | "axis" | "limit" => {}
            "dynamics" | "safety_controller" | "calibration" => {}
            "mimic" => {
                joint.mimic = child.attribute("joint").map(str::to_string);
                warnings.push(format!("{element}: mimic ignored, joint held at zero"));
            }
            other => warnings.push(format!("ignored <{other}> element in {element}")),
        }
    }
    Ok(joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::collidable_pairs;

    const TWO_LINK: &str = r#"<?xml version="1.0"?>
<robot name="two">
  <link name="base_link">
    <collision><geometry><box size="0.2 0.2 0.2"/></geometry></collision>
  </link>
  <link name="link1">
    <collision><origin xyz="0.5 0 0"/><geometry><cylinder radius="0.05" length="1"/></geometry></collision>
  </link>
  <joint name="j1" type="revolute">
    <parent link="base_link"/><child link="link1"/>
    <axis xyz="0 0 1"/>
    <limit lower="-1.57" upper="1.57" velocity="1" effort="10"/>
  </joint>
</robot>"#;

    #[test]
    fn minimal_tree() {
        let m = parse_urdf(TWO_LINK, None).unwrap();
        assert_eq!(m.root_link(), "base_link");
        assert_eq!(m.active_joints(), ["j1"]);
        assert_eq!(m.links().len(), m.joints().len() + 1);
        assert!(m.warnings().is_empty());
        assert_eq!(collidable_pairs(&m).len(), 1);
    }

    #[test]
    fn dangling_child_names_joint_and_link() {
        let doc = TWO_LINK.replace(r#"<child link="link1"/>"#, r#"<child link="ghost"/>"#);
        let e = parse_urdf(&doc, None).unwrap_err();
        assert!(matches!(&e, ModelError::DanglingReference { joint, link } if joint == "j1" && link == "ghost"));
        let msg = e.to_string();
        assert!(msg.contains("j1") && msg.contains("ghost"));
    }

    #[test]
    fn error_cases_name_the_element() {
        let dup = TWO_LINK.replace(r#"<link name="link1">"#, r#"<link name="base_link">"#);
        assert!(matches!(parse_urdf(&dup, None), Err(ModelError::DuplicateLink(n)) if n == "base_link"));

        let nolim = TWO_LINK.replace(r#"<limit lower="-1.57" upper="1.57" velocity="1" effort="10"/>"#, "");
        assert!(matches!(parse_urdf(&nolim, None), Err(ModelError::MissingLimits(n)) if n == "j1"));

        let neg = TWO_LINK.replace(r#"radius="0.05""#, r#"radius="-0.05""#);
        let e = parse_urdf(&neg, None).unwrap_err();
        assert!(e.to_string().contains("link1"), "{e}");

        assert!(matches!(parse_urdf("<robot name='x'><link", None), Err(ModelError::Xml(_))));

        let mesh = TWO_LINK.replace(
            r#"<cylinder radius="0.05" length="1"/>"#,
            r#"<mesh filename="package://nowhere/missing.stl"/>"#,
        );
        let e = parse_urdf(&mesh, Some(Path::new("/nonexistent"))).unwrap_err();
        assert!(matches!(&e, ModelError::Shape { element, .. } if element.contains("link1")));
    }

    #[test]
    fn unknown_elements_become_warnings() {
        let doc = TWO_LINK.replace(
            "</robot>",
            r#"<transmission name="t"/><gazebo/><joint name="m" type="fixed"><parent link="link1"/><child link="tip"/><mimic joint="j1"/></joint><link name="tip"><sensor/></link></robot>"#,
        );
        let m = parse_urdf(&doc, None).unwrap();
        assert_eq!(m.warnings().len(), 4, "{:?}", m.warnings());
    }

    #[test]
    fn mimic_joint_is_not_active() {
        let doc = TWO_LINK.replace(
            "</robot>",
            r#"<joint name="m" type="revolute"><parent link="link1"/><child link="tip"/><limit lower="-1" upper="1"/><mimic joint="j1"/></joint><link name="tip"/></robot>"#,
        );
        let m = parse_urdf(&doc, None).unwrap();
        assert_eq!(m.active_joints(), ["j1"]);
    }

    #[test]
    fn mesh_loads_as_hull() {
        let dir = tempfile::tempdir().unwrap();
        let off = "OFF\n9 0 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n0 0 1\n1 0 1\n0 1 1\n1 1 1\n0.5 0.5 0.5\n";
        std::fs::create_dir_all(dir.path().join("pkg")).unwrap();
        std::fs::write(dir.path().join("pkg/cube.off"), off).unwrap();
        let doc = TWO_LINK.replace(
            r#"<cylinder radius="0.05" length="1"/>"#,
            r#"<mesh filename="package://pkg/cube.off" scale="0.1 0.1 0.1"/>"#,
        );
        let m = parse_urdf(&doc, Some(dir.path())).unwrap();
        match &m.link("link1").unwrap().collision[0].shape {
            Shape::ConvexMesh(h) => {
                assert_eq!(h.vertices.len(), 8);
                assert!((h.vertices[7].x - 0.1).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_is_deterministic() {
        assert_eq!(parse_urdf(TWO_LINK, None).unwrap(), parse_urdf(TWO_LINK, None).unwrap());
    }
}
