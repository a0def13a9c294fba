//! The Playground-Text crafting simulator.
//!
//! A scene holds water, plants and herbivores. The agent moves between objects,
//! grasps water or grown plants into a two-slot inventory, and releases them
//! onto young objects to grow them:
//!
//! * water on a plant seed grows the plant,
//! * a grown plant on a baby small herbivore grows the herbivore,
//! * two grown plants on a baby big herbivore grow the herbivore.
//!
//! Releases that do not trigger one of these transformations are illegal and
//! masked, as are actions referring to objects that are not present.

mod dynamics;
mod object;
mod parse;
mod playground;
mod render;
mod scene;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dynamics::{classify_transition, legal_actions, step, transition};
pub use object::{Bucket, ObjectClass, ObjectInstance, Stage, Variety};
pub use parse::{classify_change_text, parse_action, parse_state};
pub use playground::Playground;
pub use render::{render_action, render_change, render_state, RenderStyle};
pub use scene::{new_scene, SceneEntry, SceneSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("illegal action `{action}`: {reason}")]
    IllegalAction { action: String, reason: String },
    #[error("invalid object: {0}")]
    InvalidObject(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("scene configuration: {0}")]
    Config(String),
    #[error("unclassifiable transition: {0}")]
    Unclassifiable(String),
    #[error("cannot parse `{text}`: {reason}")]
    Parse { text: String, reason: String },
}

/// Static knobs of the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Allow grasping any object, not only water and grown plants.
    pub grasp_any: bool,
    /// Steps per episode before the scene is regenerated.
    pub episode_len: usize,
    pub max_objects: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            grasp_any: false,
            episode_len: 30,
            max_objects: 16,
        }
    }
}

pub const INVENTORY_SLOTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EnvState {
    pub scene: Vec<ObjectInstance>,
    pub standing_on: Option<usize>,
    pub inventory: Vec<ObjectInstance>,
    pub step_count: u32,
}

impl EnvState {
    pub fn new(scene: Vec<ObjectInstance>) -> Self {
        EnvState {
            scene,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.inventory.len() > INVENTORY_SLOTS {
            return Err(EnvError::InvalidState(format!(
                "inventory holds {} objects",
                self.inventory.len()
            )));
        }
        if let Some(i) = self.standing_on {
            if i >= self.scene.len() {
                return Err(EnvError::InvalidState(format!(
                    "standing on index {i} of a {}-object scene",
                    self.scene.len()
                )));
            }
        }
        Ok(())
    }

    pub fn stood_on(&self) -> Option<&ObjectInstance> {
        self.standing_on.map(|i| &self.scene[i])
    }

    /// Lowest-index scene object with this display name, skipping the one stood on.
    pub fn resolve_name(&self, name: &str) -> Option<usize> {
        self.scene
            .iter()
            .enumerate()
            .find(|(i, o)| Some(*i) != self.standing_on && o.display_name() == name)
            .map(|(i, _)| i)
    }

    pub fn count_bucket(&self, bucket: Bucket) -> usize {
        self.scene.iter().filter(|o| o.bucket() == bucket).count()
    }

    pub fn inventory_count(&self, bucket: Bucket) -> usize {
        self.inventory.iter().filter(|o| o.bucket() == bucket).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "object")]
pub enum Action {
    /// Move onto the object with this display name.
    GoTo(String),
    Grasp,
    /// Release the inventory item with this display name onto the object stood on.
    Release(String),
    ReleaseAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransitionType {
    Standing,
    Holding1,
    Holding2,
    GrowPlant,
    #[serde(rename = "GrowSH")]
    GrowSmallHerbivore,
    #[serde(rename = "GrowBH")]
    GrowBigHerbivore,
}

impl TransitionType {
    pub const ALL: [TransitionType; 6] = [
        TransitionType::Standing,
        TransitionType::Holding1,
        TransitionType::Holding2,
        TransitionType::GrowPlant,
        TransitionType::GrowSmallHerbivore,
        TransitionType::GrowBigHerbivore,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TransitionType::Standing => "Standing",
            TransitionType::Holding1 => "Holding1",
            TransitionType::Holding2 => "Holding2",
            TransitionType::GrowPlant => "GrowPlant",
            TransitionType::GrowSmallHerbivore => "GrowSH",
            TransitionType::GrowBigHerbivore => "GrowBH",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    pub fn is_grow(self) -> bool {
        matches!(
            self,
            TransitionType::GrowPlant
                | TransitionType::GrowSmallHerbivore
                | TransitionType::GrowBigHerbivore
        )
    }
}

impl std::fmt::Display for TransitionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One observed step, with both the structured states and their rendered text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub ttype: TransitionType,
    pub style: RenderStyle,
    pub state_text: String,
    pub action_text: String,
    pub change_text: String,
    pub action: Action,
    pub state_before: EnvState,
    pub state_after: EnvState,
}

impl TransitionRecord {
    pub fn new(
        state_before: EnvState,
        action: Action,
        state_after: EnvState,
        ttype: TransitionType,
        style: RenderStyle,
    ) -> Self {
        TransitionRecord {
            ttype,
            style,
            state_text: render_state(&state_before, style),
            action_text: render_action(&action),
            change_text: render_change(ttype, &state_after, style),
            action,
            state_before,
            state_after,
        }
    }

    /// The same transition rendered in another style.
    pub fn restyled(&self, style: RenderStyle) -> Self {
        Self::new(
            self.state_before.clone(),
            self.action.clone(),
            self.state_after.clone(),
            self.ttype,
            style,
        )
    }

    /// Key identifying the rendered (state, action, change) triple.
    pub fn text_key(&self) -> (&str, &str, &str) {
        (&self.state_text, &self.action_text, &self.change_text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_name_skips_stood_on() {
        let mut s = EnvState::new(vec![
            ObjectInstance::water(),
            ObjectInstance::seed(Variety::Pea),
            ObjectInstance::water(),
        ]);
        assert_eq!(s.resolve_name("water"), Some(0));
        s.standing_on = Some(0);
        assert_eq!(s.resolve_name("water"), Some(2));
        assert_eq!(s.resolve_name("cow"), None);
    }

    #[test]
    fn validate_catches_bad_states() {
        let mut s = EnvState::new(vec![ObjectInstance::water()]);
        s.standing_on = Some(3);
        assert!(s.validate().is_err());
        let s = EnvState {
            inventory: vec![ObjectInstance::water(); 3],
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn transition_type_names_round_trip() {
        for t in TransitionType::ALL {
            assert_eq!(TransitionType::from_name(t.name()), Some(t));
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
    }
}
