//! Configuration-driven experiment orchestration for the branching Lévy
//! simulation suite: parse a config, resolve the model constants, run the
//! named experiment over seeded parallel replications, and emit one
//! diff-able CSV plus a manifest.
//!
//! Determinism contract: a fixed `(config, master_seed)` pair produces
//! byte-identical CSVs for any parallelism degree — replications are seeded
//! by index, collected in index order, and reduced sequentially.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod seed;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, write_csv, Row, RunError, RunOutput};

use std::path::Path;

/// Runs a config file end to end: CSV + manifest into the output directory.
pub fn run(config_path: &Path) -> Result<RunOutput, RunError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| RunError::Runtime(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg = ExperimentConfig::from_str(&text).map_err(|e| RunError::Validation(e.to_string()))?;
    let started = std::time::Instant::now();
    let out = run_experiment(&cfg)?;
    std::fs::create_dir_all(&cfg.output)
        .map_err(|e| RunError::Runtime(format!("cannot create output dir: {e}")))?;
    let csv_path = cfg.output.join(format!("{}.csv", cfg.kind.name()));
    let mut csv = Vec::new();
    write_csv(&mut csv, &out.rows).map_err(|e| RunError::Runtime(e.to_string()))?;
    std::fs::write(&csv_path, csv).map_err(|e| RunError::Runtime(e.to_string()))?;
    let manifest_path = cfg.output.join("manifest.txt");
    let manifest = manifest::render(&cfg, &out, started.elapsed().as_secs_f64());
    std::fs::write(&manifest_path, manifest).map_err(|e| RunError::Runtime(e.to_string()))?;
    Ok(out)
}
