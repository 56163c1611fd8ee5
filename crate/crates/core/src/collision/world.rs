use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::XyzRpy;
use crate::shape::Shape;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("duplicate world object `{0}`")]
    DuplicateObject(String),
    #[error("no world object named `{0}`")]
    UnknownObject(String),
    #[error("invalid scene document: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub name: String,
    pub shape: Shape,
    pub pose: XyzRpy,
}

/// Collision objects in the environment. Object names are unique.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldRepr")]
pub struct PlanningSceneWorld {
    objects: Vec<WorldObject>,
}

#[derive(Deserialize)]
struct WorldRepr {
    #[serde(default)]
    objects: Vec<WorldObject>,
}

impl TryFrom<WorldRepr> for PlanningSceneWorld {
    type Error = SceneError;

    fn try_from(r: WorldRepr) -> Result<Self, SceneError> {
        let mut w = PlanningSceneWorld::default();
        for o in r.objects {
            w.add(o)?;
        }
        Ok(w)
    }
}

impl PlanningSceneWorld {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, object: WorldObject) -> Result<(), SceneError> {
        if self.objects.iter().any(|o| o.name == object.name) {
            return Err(SceneError::DuplicateObject(object.name));
        }
        self.objects.push(object);
        Ok(())
    }

    pub fn with(mut self, name: &str, shape: Shape, pose: XyzRpy) -> Result<Self, SceneError> {
        self.add(WorldObject {
            name: name.to_string(),
            shape,
            pose,
        })?;
        Ok(self)
    }

    pub fn remove(&mut self, name: &str) -> Result<WorldObject, SceneError> {
        let i = self
            .objects
            .iter()
            .position(|o| o.name == name)
            .ok_or_else(|| SceneError::UnknownObject(name.to_string()))?;
        Ok(self.objects.remove(i))
    }

    pub fn objects(&self) -> &[WorldObject] {
        &self.objects
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn names(&self) -> HashSet<&str> {
        self.objects.iter().map(|o| o.name.as_str()).collect()
    }
}
