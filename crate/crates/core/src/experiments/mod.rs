//! Monte-Carlo sweeps over the surface size, transmit power and QoS target,
//! with CSV output.

pub mod config;
pub mod csv;
pub mod presets;
pub mod sweep;

pub use config::{load_config, parse_config, SweepSpec, SweepVariable};
pub use csv::{emit_csv, format_float, parse_csv, write_csv, HEADER};
pub use presets::{default_paper_scenario, preset, PRESET_NAMES};
pub use sweep::{aggregate, run_sweep, run_trials, SweepRow, TrialRecord};
