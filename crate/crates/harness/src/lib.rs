//! Experiment orchestration for `fockchaos`: configuration, the six
//! experiments, result tables and run manifests.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{parse_config, Experiment, RunConfig};
pub use error::{HarnessError, Result};
pub use output::{write_results, ResultTable};

/// Worker threads for a run: one in test mode, otherwise the configured
/// count or the machine's parallelism.
pub fn thread_count(cfg: &RunConfig) -> usize {
    if cfg.numerics.test_mode {
        return 1;
    }
    cfg.numerics
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Validate and run the configured experiment on its own thread pool.
pub fn run(cfg: &RunConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg))
        .build()
        .map_err(|e| HarnessError::Output(e.to_string()))?;
    let exp = cfg.experiment()?;
    pool.install(|| match exp {
        Experiment::Cbs => experiments::cbs::run_cbs(cfg),
        Experiment::Otoc => experiments::otoc::run_otoc(cfg),
        Experiment::Spectral => experiments::spectral::run_spectral(cfg),
        Experiment::Actions => experiments::actions::run_action_spectroscopy(cfg),
        Experiment::Twa => experiments::twa::run_twa(cfg),
        Experiment::Modes => experiments::modes::run_modes(cfg),
    })
}

/// Run and write tables plus manifest to `dir`, or to the configured output
/// directory. Returns the result and the manifest path.
pub fn run_to_dir(cfg: &RunConfig, dir: Option<&Path>) -> Result<(ResultTable, PathBuf)> {
    let dir: PathBuf = match (dir, &cfg.output) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => PathBuf::from(format!("out/{}", cfg.experiment()?.name())),
    };
    let start = Instant::now();
    let result = run(cfg)?;
    let manifest = write_results(&result, cfg, &dir, start.elapsed().as_secs_f64(), thread_count(cfg))?;
    Ok((result, manifest))
}
