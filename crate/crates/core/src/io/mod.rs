//! Files and command drivers: configs, grid files, traces, metrics and
//! heatmaps, plus the `design`, `simulate` and `modes` runs behind the CLI.

pub mod config;
pub mod gridfile;
pub mod heatmap;
pub mod run;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::{DeviceKind, ModesSpec, RunConfig, SliceSpec};
pub use gridfile::{GridData, GridFile};
pub use run::{exit_code, read_metrics, run_design, run_modes, run_simulate, DesignRun, ModesRun, SimulateRun};

/// Write `bytes` to a temporary file beside `path`, then rename it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
