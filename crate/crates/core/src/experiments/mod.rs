//! Seeded, resumable experiment runs.
//!
//! A run evaluates every grid point of a configuration not yet present in
//! `<output_dir>/<experiment>-<hash>.csv`, appends the new rows, then checks
//! the expected qualitative behaviour on the full table. A JSON summary with
//! the checks and per-point wall times goes next to the CSV.

pub mod config;
pub mod plot;
pub mod record;
pub mod runners;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::mpsc;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind};
pub use record::{ExperimentRecord, GridPoint};
pub use runners::Check;

use crate::error::Result;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    /// Every record in the CSV after the run.
    pub records: Vec<ExperimentRecord>,
    pub checks: Vec<Check>,
    pub computed: usize,
    pub skipped: usize,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    config: &'a str,
    computed: usize,
    skipped: usize,
    passed: bool,
    checks: &'a [Check],
    /// Records computed in this invocation, with wall times.
    computed_records: &'a [ExperimentRecord],
}

pub fn csv_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(format!("{}-{}.csv", cfg.experiment, cfg.hash()))
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_with_progress(cfg, |_| {})
}

/// Like [`run`], calling `progress` after each newly written point.
pub fn run_with_progress(cfg: &ExperimentConfig, mut progress: impl FnMut(&ExperimentRecord)) -> Result<RunOutcome> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let hash = cfg.hash();
    let csv_path = csv_path(cfg);
    let existing = if csv_path.exists() {
        record::read_csv(&csv_path)?
    } else {
        vec![]
    };
    let done = record::completed_points(&existing);
    let (pending, resumed): (Vec<GridPoint>, Vec<GridPoint>) =
        runners::grid(cfg).into_iter().partition(|p| !done.contains(&p.key()));
    let skipped = resumed.len();
    let mut fresh = Vec::new();
    let mut failure = None;
    // Points run concurrently; rows are written in grid order as soon as
    // every earlier point has finished.
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        let (pending, hash) = (&pending, &hash);
        s.spawn(move || {
            pending.par_iter().enumerate().for_each_with(tx, |tx, (i, point)| {
                let _ = tx.send((i, runners::evaluate(cfg, hash, point)));
            });
        });
        let mut ready = BTreeMap::new();
        let mut next = 0;
        for (i, result) in rx {
            ready.insert(i, result);
            while let Some(result) = ready.remove(&next) {
                next += 1;
                if failure.is_some() {
                    continue;
                }
                match result.and_then(|rec| record::append_csv(&csv_path, std::slice::from_ref(&rec)).map(|_| rec)) {
                    Ok(rec) => {
                        progress(&rec);
                        fresh.push(rec);
                    }
                    Err(e) => failure = Some(e),
                }
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let records = if csv_path.exists() {
        record::read_csv(&csv_path)?
    } else {
        vec![]
    };
    let checks = runners::checks(cfg, &records);
    let json_path = csv_path.with_extension("json");
    let summary = Summary {
        experiment: cfg.experiment.name(),
        config_hash: &hash,
        config: &cfg.canonical(),
        computed: fresh.len(),
        skipped,
        passed: checks.iter().all(|c| c.passed),
        checks: &checks,
        computed_records: &fresh,
    };
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutcome {
        csv_path,
        json_path,
        records,
        checks,
        computed: fresh.len(),
        skipped,
    })
}
