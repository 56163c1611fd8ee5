use serde::{Deserialize, Serialize};

use super::acm::AllowedCollisionMatrix;
use super::narrow::{shapes_intersect, test_bound};
use super::world::PlanningSceneWorld;
use crate::kinematics::{link_poses, KinematicsError, RobotState};
use crate::model::RobotModel;
use crate::pose::Pose;
use crate::shape::Shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactKind {
    #[serde(rename = "self")]
    SelfCollision,
    World,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    /// Link name.
    pub first: String,
    /// Link name for self contacts, object name for world contacts.
    pub second: String,
    pub kind: ContactKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionResult {
    pub in_collision: bool,
    pub contacts: Vec<Contact>,
    /// Narrow-phase pair tests (link/link or link/object) run for this query.
    pub checks_performed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionFlags {
    pub self_collisions: bool,
    pub world: bool,
    /// Stop at the first contact (boolean-only query).
    pub stop_at_first: bool,
}

impl Default for CollisionFlags {
    fn default() -> Self {
        CollisionFlags {
            self_collisions: true,
            world: true,
            stop_at_first: false,
        }
    }
}

impl CollisionFlags {
    pub fn boolean_only() -> Self {
        CollisionFlags {
            stop_at_first: true,
            ..Default::default()
        }
    }
}

/// Anything that can judge a full variable vector of the model.
pub trait StateValidator: Send + Sync {
    fn check(&self, q: &[f64], flags: CollisionFlags) -> CollisionResult;
}

/// Collision checker over the model's own geometry and the world objects, filtered
/// by an allowed collision matrix.
pub struct NativeCollisionChecker<'m> {
    model: &'m RobotModel,
    self_pairs: Vec<(usize, usize)>,
    world_pairs: Vec<(usize, usize)>,
    objects: Vec<(String, Shape, Pose)>,
}

impl<'m> NativeCollisionChecker<'m> {
    pub fn new(model: &'m RobotModel, acm: &AllowedCollisionMatrix, world: &PlanningSceneWorld) -> Self {
        let mut geometric: Vec<usize> = (0..model.links().len())
            .filter(|&i| model.links()[i].has_collision())
            .collect();
        geometric.sort_by(|&a, &b| model.links()[a].name.cmp(&model.links()[b].name));
        let mut self_pairs = Vec::new();
        for (k, &a) in geometric.iter().enumerate() {
            for &b in &geometric[k + 1..] {
                if !acm.is_disabled(&model.links()[a].name, &model.links()[b].name) {
                    self_pairs.push((a, b));
                }
            }
        }
        let objects: Vec<(String, Shape, Pose)> = world
            .objects()
            .iter()
            .map(|o| (o.name.clone(), o.shape.clone(), o.pose.to_pose()))
            .collect();
        let mut world_pairs = Vec::new();
        for &l in &geometric {
            for (oi, (name, _, _)) in objects.iter().enumerate() {
                if !acm.is_disabled(&model.links()[l].name, name) {
                    world_pairs.push((l, oi));
                }
            }
        }
        NativeCollisionChecker {
            model,
            self_pairs,
            world_pairs,
            objects,
        }
    }

    pub fn model(&self) -> &RobotModel {
        self.model
    }

    /// Enabled link pairs, as link indices, in lexicographic name order.
    pub fn enabled_self_pairs(&self) -> &[(usize, usize)] {
        &self.self_pairs
    }
}

impl StateValidator for NativeCollisionChecker<'_> {
    fn check(&self, q: &[f64], flags: CollisionFlags) -> CollisionResult {
        let poses = link_poses(self.model, q);
        let links = self.model.links();
        let mut result = CollisionResult::default();
        if flags.self_collisions {
            for &(a, b) in &self.self_pairs {
                result.checks_performed += 1;
                if links_intersect(self.model, &poses, a, b) {
                    result.contacts.push(Contact {
                        first: links[a].name.clone(),
                        second: links[b].name.clone(),
                        kind: ContactKind::SelfCollision,
                    });
                    if flags.stop_at_first {
                        result.in_collision = true;
                        return result;
                    }
                }
            }
        }
        if flags.world {
            for &(l, oi) in &self.world_pairs {
                result.checks_performed += 1;
                let (name, shape, pose) = &self.objects[oi];
                let hit = links[l].collision.iter().any(|g| {
                    let gp = poses[l].compose(&g.origin);
                    bounds_overlap(&g.shape, &gp, shape, pose) && shapes_intersect(&g.shape, &gp, shape, pose)
                });
                if hit {
                    result.contacts.push(Contact {
                        first: links[l].name.clone(),
                        second: name.clone(),
                        kind: ContactKind::World,
                    });
                    if flags.stop_at_first {
                        break;
                    }
                }
            }
        }
        result.in_collision = !result.contacts.is_empty();
        result
    }
}

fn bounds_overlap(a: &Shape, pa: &Pose, b: &Shape, pb: &Pose) -> bool {
    let r = test_bound(a) + test_bound(b);
    (pa.translation - pb.translation).norm_squared() <= r * r
}

/// Whether any collision geometry of link `a` touches any of link `b`, given world
/// link poses.
pub fn links_intersect(model: &RobotModel, poses: &[Pose], a: usize, b: usize) -> bool {
    let (la, lb) = (&model.links()[a], &model.links()[b]);
    la.collision.iter().any(|ga| {
        let pa = poses[a].compose(&ga.origin);
        lb.collision.iter().any(|gb| {
            let pb = poses[b].compose(&gb.origin);
            bounds_overlap(&ga.shape, &pa, &gb.shape, &pb) && shapes_intersect(&ga.shape, &pa, &gb.shape, &pb)
        })
    })
}

/// Checks one robot state against itself and the world.
pub fn check_state(
    model: &RobotModel,
    state: &RobotState,
    acm: &AllowedCollisionMatrix,
    world: &PlanningSceneWorld,
    flags: CollisionFlags,
) -> Result<CollisionResult, KinematicsError> {
    let q = state.to_vector(model)?;
    Ok(NativeCollisionChecker::new(model, acm, world).check(&q, flags))
}
