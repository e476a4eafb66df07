//! The four-agent example scenario shipped in `scenarios/`.

use petc_core::netsim::ScenarioConfig;

use crate::config::ScenarioFile;

pub const FILE: &str = include_str!("../../../scenarios/four_agent_delay.json");

pub fn file() -> ScenarioFile {
    ScenarioFile::parse(FILE.as_bytes()).expect("shipped scenario parses")
}

pub fn config() -> ScenarioConfig {
    file().to_config().expect("shipped scenario is valid")
}
