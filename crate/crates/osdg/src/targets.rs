//! The bundled list of SDG goals and their targets.

use serde::{Deserialize, Serialize};

const TARGETS_JSON: &str = include_str!("../data/sdg_targets.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub sdg: u8,
    pub title: String,
    pub targets: Vec<Target>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdgTargets {
    pub goals: Vec<Goal>,
}

impl SdgTargets {
    pub fn target_count(&self) -> usize {
        self.goals.iter().map(|g| g.targets.len()).sum()
    }
}

pub fn sdg_targets() -> SdgTargets {
    serde_json::from_str(TARGETS_JSON).expect("bundled targets are valid JSON")
}
