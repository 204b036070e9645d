//! Configuration, experiment drivers, CSV output and the integration oracle.

pub mod config;
pub mod csv;
pub mod oracle;
pub mod runs;

pub use config::{ExperimentConfig, ProbeSelection};
pub use csv::CsvTable;
pub use oracle::{run_oracle, OracleReport};
pub use runs::{run_partial_info, run_redundancy, run_sweep, RunOutput, SweepRow};
