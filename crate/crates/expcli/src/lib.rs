//! Experiment configs, the experiment registry, the fingerprint-keyed
//! result cache and report emission for the `herald` binary.

pub mod cache;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod svg;

pub use error::{CliError, Result};

/// Version stamped into fingerprints and records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

use std::path::{Path, PathBuf};

use cache::{write_atomic, Cache, Lookup};
use config::ExperimentConfig;
use experiments::{run_experiment, ResultRecord};

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub cache_dir: PathBuf,
    pub jobs: usize,
    /// Replaces the config's seed.
    pub seed: Option<u64>,
    /// Base directory for relative output paths.
    pub out_dir: Option<PathBuf>,
    /// Fill the `wall_ms` column and keep timings in the JSON output.
    pub timings: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: ResultRecord,
    pub cached: bool,
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Loads a config, serves it from the cache or runs it, and writes the
/// requested outputs atomically.
pub fn run_config(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let config = ExperimentConfig::load(config_path)?;
    let base = config_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let resolved = config.resolve(base, opts.seed)?;
    let cache = Cache::new(&opts.cache_dir);
    let mut warnings = Vec::new();
    let (record, cached) = match cache.load(&resolved.fingerprint) {
        Lookup::Hit(r) => (r, true),
        other => {
            if let Lookup::Corrupt(why) = other {
                warnings.push(format!("ignoring corrupt cache entry {}: {why}", resolved.fingerprint));
            }
            let r = run_experiment(&resolved, opts.jobs)?;
            cache.store(&r)?;
            (r, false)
        }
    };
    let target = |p: &Path| match &opts.out_dir {
        Some(dir) => dir.join(p),
        None => p.to_path_buf(),
    };
    let mut written = Vec::new();
    if let Some(p) = &resolved.out.csv {
        let path = target(p);
        write_atomic(&path, output::to_csv(&record, opts.timings).as_bytes())?;
        written.push(path);
    }
    if let Some(p) = &resolved.out.json {
        let path = target(p);
        write_atomic(&path, output::to_json(&record, opts.timings).as_bytes())?;
        written.push(path);
    }
    if let Some(p) = &resolved.out.svg {
        let path = target(p);
        write_atomic(&path, output::to_svg(&record)?.as_bytes())?;
        written.push(path);
    }
    Ok(RunOutcome { record, cached, written, warnings })
}
