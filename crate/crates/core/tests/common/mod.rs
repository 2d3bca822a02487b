#![allow(dead_code)]

use std::path::PathBuf;

use flightlink_core::llm::{ScriptFixture, ScriptedProvider};
use flightlink_core::mission::LoadedMission;

pub const MISSIONS: [&str; 3] = ["mission-1", "mission-2", "mission-3"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn mission(id: &str) -> LoadedMission {
    LoadedMission::load(&fixtures().join(format!("missions/{id}.json"))).expect("shipped mission loads")
}

pub fn script(name: &str) -> ScriptFixture {
    ScriptFixture::load(&fixtures().join(format!("scripts/{name}.json"))).expect("shipped script loads")
}

pub fn provider(name: &str) -> ScriptedProvider {
    ScriptedProvider::new(script(name))
}
