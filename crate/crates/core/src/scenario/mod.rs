//! Scenario configuration, execution and reports.

mod config;
mod report;
mod run;
mod selftest;

pub use config::{
    parse_config, CertifyConfig, CurrentsConfig, ErgodicityConfig, IntegratorConfig, ModelConfig, OrbitMode,
    OrbitsConfig, OutputConfig, OutputFormat, QuadratureConfig, ScenarioConfig, SeedConfig, Task,
};
pub use report::{
    emit_report, orbits_csv, ue_curve, CertifyTask, CheckResult, CurrentsTask, LkTask, ModelSummary, OrbitsTask,
    ReportDocument, TaskOutcome, TaskStatus, SCHEMA_VERSION,
};
pub use run::{run_scenario, ACTION_LK_SIGN};
pub use selftest::{selftest, selftest_scenarios, SelfTestEntry, SelfTestReport};
