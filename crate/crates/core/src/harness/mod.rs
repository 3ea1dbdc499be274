//! Mission configuration, the event loop that ties twins, channel and
//! basestation together, and the scripted scenarios with their reports.

mod config;
mod mission;
mod report;
mod scenarios;

pub use config::{
    ChannelSection, ConfigError, MissionConfig, PlatformSpec, RunMode, DEFAULT_MISSION,
};
pub use mission::{ApiCall, ApiExchange, Mission, MissionError, PtBroadcast, Reception, ScriptAction};
pub use report::{Assertion, Counts, LatencyStats, PlatformOutcome, ScenarioReport};
pub use scenarios::{
    count_gaps, expected_samples, forged_command, latency_samples, run_scenario, run_scenario_a, run_scenario_b,
    run_scenario_c, run_scenario_d, Scenario, EVENT_AT, FORGED_COMMANDS, LOSSY_P0,
};
