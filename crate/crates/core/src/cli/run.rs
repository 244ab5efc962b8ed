//! Executes an experiment: one trace per (run, seed), one summary per run,
//! and a manifest written once at the end.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Experiment, ObjectiveSpec, FORMAT_VERSION};
use super::io::{write_summary, write_trace, Manifest, RunResult, SeedResult};
use crate::engine::{self, aggregate, RegretTrace, RunConfig};
use crate::error::{Error, Result};

fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

fn write_trace_file(path: &Path, trace: &RegretTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trace(&mut w, trace)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn run_one(objective: &ObjectiveSpec, config: &RunConfig, seed: u64, dir: &Path) -> (SeedResult, Option<RegretTrace>) {
    let config = RunConfig { seed, ..config.clone() };
    let path = dir.join(trace_file_name(seed));
    let outcome = objective.instantiate().map_err(|e| (0, e, None)).and_then(|mut obj| {
        engine::run(&config, obj.as_mut()).map_err(|f| (f.round, f.source, Some(f.partial)))
    });
    match outcome {
        Ok(trace) => match write_trace_file(&path, &trace) {
            Ok(()) => (
                SeedResult {
                    seed,
                    ok: true,
                    trace: Some(path),
                    rounds_completed: trace.len(),
                    failed_round: None,
                    error: None,
                    final_best_y: trace.final_best_y(),
                    final_best_regret: trace.final_best_regret(),
                },
                Some(trace),
            ),
            Err(e) => (
                SeedResult {
                    seed,
                    ok: false,
                    trace: None,
                    rounds_completed: trace.len(),
                    failed_round: None,
                    error: Some(format!("writing {}: {e}", path.display())),
                    final_best_y: trace.final_best_y(),
                    final_best_regret: trace.final_best_regret(),
                },
                None,
            ),
        },
        Err((round, err, partial)) => {
            let written = partial.as_ref().filter(|p| !p.is_empty()).and_then(|p| write_trace_file(&path, p).ok().map(|_| path.clone()));
            (
                SeedResult {
                    seed,
                    ok: false,
                    trace: written,
                    rounds_completed: partial.as_ref().map_or(0, |p| p.len()),
                    failed_round: Some(round),
                    error: Some(err.to_string()),
                    final_best_y: partial.as_ref().and_then(|p| p.final_best_y()),
                    final_best_regret: partial.as_ref().and_then(|p| p.final_best_regret()),
                },
                None,
            )
        }
    }
}

/// Runs every (run, seed) pair on a pool of `experiment.jobs` workers.
pub fn execute(experiment: &Experiment, config_path: Option<&Path>) -> Result<Manifest> {
    let out = &experiment.output_dir;
    std::fs::create_dir_all(out)?;
    let dirs: Vec<PathBuf> = experiment.runs.iter().map(|r| out.join(&r.name)).collect();
    for d in &dirs {
        std::fs::create_dir_all(d)?;
    }
    let tasks: Vec<(usize, u64)> =
        (0..experiment.runs.len()).flat_map(|r| experiment.seeds.iter().map(move |&s| (r, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(experiment.jobs)
        .build()
        .map_err(|e| Error::Resource(format!("worker pool: {e}")))?;
    let results: Vec<(SeedResult, Option<RegretTrace>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(r, seed)| {
                let run = &experiment.runs[r];
                run_one(&run.objective, &run.config, seed, &dirs[r])
            })
            .collect()
    });

    let mut per_run: Vec<Vec<(SeedResult, Option<RegretTrace>)>> = experiment.runs.iter().map(|_| Vec::new()).collect();
    for (&(r, _), res) in tasks.iter().zip(results) {
        per_run[r].push(res);
    }
    let mut runs = Vec::new();
    for ((run, dir), results) in experiment.runs.iter().zip(&dirs).zip(per_run) {
        let traces: Vec<RegretTrace> = results.iter().filter_map(|(_, t)| t.clone()).collect();
        let has_regret = traces.first().is_some_and(|t| t.final_best_regret().is_some());
        let summary = if traces.is_empty() {
            None
        } else {
            let rows = aggregate(&traces)?;
            let path = dir.join("summary.csv");
            let mut w = BufWriter::new(File::create(&path)?);
            write_summary(&mut w, &rows)?;
            std::io::Write::flush(&mut w)?;
            Some(path)
        };
        let (objective, d) = match &run.objective {
            ObjectiveSpec::Synthetic { name, d } => (name.clone(), *d),
            ObjectiveSpec::External { bounds, .. } => ("external".to_string(), bounds.len()),
        };
        runs.push(RunResult {
            name: run.name.clone(),
            objective,
            d,
            strategy: run.config.strategy.as_str().to_string(),
            edges: run.config.edges.resolve(d),
            summary,
            summary_quantity: if has_regret { "best_regret".into() } else { "best_y".into() },
            seeds: results.into_iter().map(|(s, _)| s).collect(),
        });
    }
    let ok = runs.iter().all(|r| r.seeds.iter().all(|s| s.ok));
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        format_version: FORMAT_VERSION,
        config_path: config_path.map(Path::to_path_buf),
        output_dir: out.clone(),
        seeds: experiment.seeds.clone(),
        jobs: experiment.jobs,
        ok,
        runs,
        resolved_config: experiment.to_toml()?,
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}
