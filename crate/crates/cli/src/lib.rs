//! Experiment runner for the `chansim` library: configuration, drivers,
//! CSV tables and bound checks behind the `channel-sim` binary.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod experiments;
pub mod table;

use std::path::{Path, PathBuf};

use anyhow::Result;

pub use checks::{evaluate, Check};
pub use config::{Experiment, ExperimentConfig, Preset};
pub use experiments::{run, Output};
pub use table::Table;

/// Path of an output table: the main table goes to `out`, others get their
/// suffix inserted before the extension (`fig4.csv` -> `fig4.bins.csv`).
pub fn output_path(out: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return out.to_path_buf();
    }
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

/// Writes every table and returns the paths written.
pub fn write_outputs(out: &Path, outputs: &[Output]) -> Result<Vec<PathBuf>> {
    outputs
        .iter()
        .map(|o| {
            let p = output_path(out, o.suffix);
            o.table.write(&p)?;
            Ok(p)
        })
        .collect()
}

/// Checks of all tables, in output order.
pub fn evaluate_all(outputs: &[Output]) -> Result<Vec<Check>> {
    let mut all = Vec::new();
    for o in outputs {
        all.extend(evaluate(&o.table)?);
    }
    Ok(all)
}
