//! Shared fixtures for the pipeline benchmarks.

use crossfield::config::{Profile, RunConfig};
use crossfield::Scenario;

/// Desk-scale scenario with line-of-sight only.
pub fn desk_scenario() -> Scenario {
    let mut s = RunConfig::profile(Profile::Desk).scenario().expect("desk profile is valid");
    s.system.num_paths = 1;
    s
}

/// Desk-scale scenario with the profile's reflected paths.
pub fn desk_multipath_scenario() -> Scenario {
    RunConfig::profile(Profile::Desk).scenario().expect("desk profile is valid")
}

