//! Scenario files, the runner and the verification suites.

mod config;
mod run;
mod verify;

pub use config::{
    ControlSpec, DynamicsSpec, MatrixSpec, OutputSpec, Resolved, Scalar, ScenarioConfig,
    SchemeSpec, SweepSpec, ThetaName, MAX_SCENARIO_LEVEL,
};
pub use run::{
    level_measures, level_report, run_scenario, run_scenario_with, simulate, sweep_depths,
    write_limits_csv, ControlReport, LevelReport, ReclaimSummary, ReversalReport, RunReport,
    Stages, TrajectorySummary, REPORT_CELL_LIMIT, SCHEMA_VERSION,
};
pub use verify::{verify_suite, Check, CheckStatus, Value, VerifyReport, SUITES};

use crate::error::{Error, Result};

/// Scenarios shipped with the library, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("two-cell", include_str!("../../scenarios/two-cell.toml")),
    (
        "spectral-gap-n3",
        include_str!("../../scenarios/spectral-gap-n3.toml"),
    ),
    (
        "spectral-gap-n4",
        include_str!("../../scenarios/spectral-gap-n4.toml"),
    ),
    (
        "spectral-gap-n5",
        include_str!("../../scenarios/spectral-gap-n5.toml"),
    ),
    (
        "directed-priority",
        include_str!("../../scenarios/directed-priority.toml"),
    ),
    (
        "reversal-two-index",
        include_str!("../../scenarios/reversal-two-index.toml"),
    ),
    (
        "strategy-n3",
        include_str!("../../scenarios/strategy-n3.toml"),
    ),
    (
        "random-similar",
        include_str!("../../scenarios/random-similar.toml"),
    ),
];

pub fn bundled(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::Config(format!(
            "no bundled scenario named {name:?}; available: {}",
            BUNDLED
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })?;
    ScenarioConfig::from_toml(text).map_err(|e| e.context(format!("bundled scenario {name}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_validate() {
        for (name, _) in BUNDLED {
            let config = bundled(name).unwrap();
            assert_eq!(config.name, *name);
            config.validate().unwrap();
            config.resolve().unwrap();
        }
    }
}
