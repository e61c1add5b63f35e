//! Configuration, run orchestration, the speed-of-light sweep and file I/O.

pub mod config;
pub mod io;
pub mod run;
pub mod sweep;

pub use config::{force_estimate, RunConfig, RunPlan, SpeciesConfig};
pub use io::{read_history, write_history, Snapshot};
pub use run::{run_simulation, Run, RunOutput, SeriesRow, SERIES_COLUMNS};
pub use sweep::{fit_rate, run_sweep, RateFit, RunBounds, SweepResult, SweepRow};
