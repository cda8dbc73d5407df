//! Parameter sweeps over coupling and temperature, with reproducible file output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, ModelChoice, Overrides, SweepConfig, Task, MARKERS};
pub use run::{run, PointRecord, SweepError, SweepResult};
