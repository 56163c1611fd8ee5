use std::fmt::Write;

use roxmltree::Node;

use super::{Chain, EndEffector, GroupState, PlanningGroup, SemanticError, SemanticModel, VirtualJoint, VirtualJointKind};
use crate::collision::{AcmEntry, AcmReason, AllowedCollisionMatrix, PairStats};
use crate::kinematics::RobotState;
use crate::model::RobotModel;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn element(out: &mut String, indent: usize, name: &str, attrs: &[(&str, String)]) {
    out.push_str(&"  ".repeat(indent));
    out.push('<');
    out.push_str(name);
    for (k, v) in attrs {
        write!(out, " {k}=\"{}\"", escape(v)).unwrap();
    }
    out.push_str("/>\n");
}

/// Writes the semantic model as SRDF XML. Output is a pure function of the input:
/// fixed element and attribute order, two-space indentation, disabled pairs sorted.
pub fn serialize_srdf(semantic: &SemanticModel) -> String {
    let mut out = String::from("<?xml version=\"1.0\"?>\n");
    writeln!(out, "<robot name=\"{}\">", escape(&semantic.name)).unwrap();
    for vj in &semantic.virtual_joints {
        let mut attrs = vec![
            ("name", vj.name.clone()),
            ("type", vj.kind.as_str().to_string()),
            ("parent_frame", vj.parent_frame.clone()),
            ("child_link", vj.child_link.clone()),
        ];
        if let Some(ws) = &vj.workspace {
            let v: Vec<String> = ws.iter().flat_map(|(lo, hi)| [lo.to_string(), hi.to_string()]).collect();
            attrs.push(("workspace_bounds", v.join(" ")));
        }
        element(&mut out, 1, "virtual_joint", &attrs);
    }
    for g in &semantic.groups {
        writeln!(out, "  <group name=\"{}\">", escape(&g.name)).unwrap();
        for j in &g.joints {
            element(&mut out, 2, "joint", &[("name", j.clone())]);
        }
        for l in &g.links {
            element(&mut out, 2, "link", &[("name", l.clone())]);
        }
        for c in &g.chains {
            element(
                &mut out,
                2,
                "chain",
                &[("base_link", c.base_link.clone()), ("tip_link", c.tip_link.clone())],
            );
        }
        for s in &g.subgroups {
            element(&mut out, 2, "group", &[("name", s.clone())]);
        }
        out.push_str("  </group>\n");
    }
    for s in &semantic.group_states {
        writeln!(
            out,
            "  <group_state name=\"{}\" group=\"{}\">",
            escape(&s.name),
            escape(&s.group)
        )
        .unwrap();
        for (j, v) in s.values.iter() {
            element(&mut out, 2, "joint", &[("name", j.clone()), ("value", v.to_string())]);
        }
        out.push_str("  </group_state>\n");
    }
    for ee in &semantic.end_effectors {
        let mut attrs = vec![
            ("name", ee.name.clone()),
            ("parent_link", ee.parent_link.clone()),
            ("group", ee.group.clone()),
        ];
        if let Some(pg) = &ee.parent_group {
            attrs.push(("parent_group", pg.clone()));
        }
        element(&mut out, 1, "end_effector", &attrs);
    }
    for p in &semantic.passive_joints {
        element(&mut out, 1, "passive_joint", &[("name", p.clone())]);
    }
    for (pair, e) in semantic.disabled_pairs.iter().filter(|(_, e)| e.disabled) {
        let mut attrs = vec![
            ("link1", pair.first().to_string()),
            ("link2", pair.second().to_string()),
            ("reason", e.reason.as_str().to_string()),
        ];
        if let Some(s) = e.stats {
            attrs.push(("samples", s.samples.to_string()));
            attrs.push(("collisions", s.collisions.to_string()));
        }
        element(&mut out, 1, "disable_collisions", &attrs);
    }
    out.push_str("</robot>\n");
    out
}

fn attr<'a>(node: &Node<'a, '_>, name: &str) -> Result<&'a str, SemanticError> {
    node.attribute(name).ok_or_else(|| SemanticError::MissingAttribute {
        element: node.tag_name().name().to_string(),
        attribute: name.to_string(),
    })
}

fn invalid(node: &Node, attribute: &str, value: &str) -> SemanticError {
    SemanticError::InvalidValue {
        element: node.tag_name().name().to_string(),
        attribute: attribute.to_string(),
        value: value.to_string(),
    }
}

fn number<T: std::str::FromStr>(node: &Node, name: &str) -> Result<T, SemanticError> {
    let v = attr(node, name)?;
    v.trim().parse().map_err(|_| invalid(node, name, v))
}

fn float(node: &Node, name: &str) -> Result<f64, SemanticError> {
    let x: f64 = number(node, name)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(node, name, attr(node, name)?))
    }
}

struct Resolver<'m> {
    model: &'m RobotModel,
}

impl Resolver<'_> {
    fn joint(&self, element: String, name: &str) -> Result<String, SemanticError> {
        match self.model.joint(name) {
            Some(_) => Ok(name.to_string()),
            None => Err(SemanticError::UnknownJoint {
                element,
                name: name.to_string(),
            }),
        }
    }

    fn link(&self, element: String, name: &str) -> Result<String, SemanticError> {
        match self.model.link(name) {
            Some(_) => Ok(name.to_string()),
            None => Err(SemanticError::UnknownLink {
                element,
                name: name.to_string(),
            }),
        }
    }

    fn variable(&self, element: String, name: &str) -> Result<String, SemanticError> {
        match self.model.variable_index(name) {
            Some(_) => Ok(name.to_string()),
            None => Err(SemanticError::UnknownJoint {
                element,
                name: name.to_string(),
            }),
        }
    }
}

/// Reads SRDF XML. Joint and link names must exist in `model`; group cross-references
/// are left to validation. Unrecognized elements are skipped.
pub fn parse_srdf(document: &str, model: &RobotModel) -> Result<SemanticModel, SemanticError> {
    let doc = roxmltree::Document::parse(document).map_err(|e| SemanticError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "robot" {
        return Err(SemanticError::Xml(format!(
            "root element is <{}>, expected <robot>",
            root.tag_name().name()
        )));
    }
    let r = Resolver { model };
    let mut sm = SemanticModel::new(attr(&root, "name")?);
    let mut acm = AllowedCollisionMatrix::new();
    for node in root.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "group" => {
                let name = attr(&node, "name")?.to_string();
                if sm.group(&name).is_some() {
                    return Err(SemanticError::DuplicateGroup(name));
                }
                let here = format!("group `{name}`");
                let mut g = PlanningGroup {
                    name,
                    ..Default::default()
                };
                for c in node.children().filter(|n| n.is_element()) {
                    match c.tag_name().name() {
                        "joint" => g.joints.push(r.joint(here.clone(), attr(&c, "name")?)?),
                        "link" => g.links.push(r.link(here.clone(), attr(&c, "name")?)?),
                        "chain" => g.chains.push(Chain {
                            base_link: r.link(here.clone(), attr(&c, "base_link")?)?,
                            tip_link: r.link(here.clone(), attr(&c, "tip_link")?)?,
                        }),
                        "group" => g.subgroups.push(attr(&c, "name")?.to_string()),
                        _ => {}
                    }
                }
                sm.groups.push(g);
            }
            "group_state" => {
                let name = attr(&node, "name")?.to_string();
                let here = format!("group_state `{name}`");
                let mut values = RobotState::new();
                for c in node.children().filter(|n| n.is_element() && n.has_tag_name("joint")) {
                    values.set(r.variable(here.clone(), attr(&c, "name")?)?, float(&c, "value")?);
                }
                sm.group_states.push(GroupState {
                    name,
                    group: attr(&node, "group")?.to_string(),
                    values,
                });
            }
            "end_effector" => {
                let name = attr(&node, "name")?.to_string();
                let here = format!("end_effector `{name}`");
                sm.end_effectors.push(EndEffector {
                    parent_link: r.link(here, attr(&node, "parent_link")?)?,
                    group: attr(&node, "group")?.to_string(),
                    parent_group: node.attribute("parent_group").map(str::to_string),
                    name,
                });
            }
            "virtual_joint" => {
                let name = attr(&node, "name")?.to_string();
                let here = format!("virtual_joint `{name}`");
                let t = attr(&node, "type")?;
                let kind = VirtualJointKind::parse(t).ok_or_else(|| invalid(&node, "type", t))?;
                let workspace = match node.attribute("workspace_bounds") {
                    None => None,
                    Some(text) => {
                        let v: Vec<f64> = text
                            .split_whitespace()
                            .map(|x| x.parse::<f64>().ok().filter(|x| x.is_finite()))
                            .collect::<Option<_>>()
                            .ok_or_else(|| invalid(&node, "workspace_bounds", text))?;
                        if v.len() % 2 != 0 {
                            return Err(invalid(&node, "workspace_bounds", text));
                        }
                        Some(v.chunks(2).map(|c| (c[0], c[1])).collect())
                    }
                };
                sm.virtual_joints.push(VirtualJoint {
                    child_link: r.link(here, attr(&node, "child_link")?)?,
                    parent_frame: attr(&node, "parent_frame")?.to_string(),
                    kind,
                    workspace,
                    name,
                });
            }
            "passive_joint" => {
                let name = attr(&node, "name")?;
                sm.passive_joints.push(r.joint("passive_joint".to_string(), name)?);
            }
            "disable_collisions" => {
                let here = "disable_collisions".to_string();
                let a = r.link(here.clone(), attr(&node, "link1")?)?;
                let b = r.link(here, attr(&node, "link2")?)?;
                let reason = match node.attribute("reason") {
                    None => AcmReason::User,
                    Some(s) => AcmReason::parse(s).ok_or_else(|| invalid(&node, "reason", s))?,
                };
                let stats = match (node.attribute("samples"), node.attribute("collisions")) {
                    (Some(_), Some(_)) => Some(PairStats {
                        samples: number(&node, "samples")?,
                        collisions: number(&node, "collisions")?,
                    }),
                    _ => None,
                };
                acm.set(&a, &b, AcmEntry { disabled: true, reason, stats })
                    .map_err(|e| SemanticError::InvalidValue {
                        element: "disable_collisions".to_string(),
                        attribute: "reason".to_string(),
                        value: e.to_string(),
                    })?;
            }
            _ => {}
        }
    }
    sm.disabled_pairs = acm;
    Ok(sm)
}
