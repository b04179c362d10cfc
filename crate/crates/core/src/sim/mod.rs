//! Scenario configuration, fixed-step integration and the closed-loop run.

mod clutter;
mod config;
mod engine;
mod integrate;

pub use clutter::random_clutter_world;
pub use config::{parse_override, ControllerConfig, GridConfig, ScenarioConfig, SensorConfig, SensorMode, SimConfig};
pub use engine::{
    compare_controllers, run_scenario, Comparison, GridSnapshot, LogRecord, ReplanEvent, RunMetrics, RunStatus,
    TrajectoryLog, CSV_HEADER,
};
pub use integrate::rk4_step;
