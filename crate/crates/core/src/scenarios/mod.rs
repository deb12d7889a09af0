//! Case-study configurations, the sweep engine and result files.

pub mod config;
pub mod output;
pub mod runs;
pub mod sweep;

pub use config::{ScenarioConfig, ScenarioKind};
pub use output::{sidecar_path, write_csv, write_csv_file, write_meta, RunMeta};
pub use runs::{run_scenario, CellRow, RunOptions, ScenarioTable};
pub use sweep::{AxisScale, AxisSpec, SweepGrid};
