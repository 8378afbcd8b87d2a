//! Grid execution: oracle optima first, then every (cell, strategy, run).

use std::time::{SystemTime, UNIX_EPOCH};

use dcop::engine;
use dcop::g24::{make_instance, G24Id, G24Instance};
use dcop::optima::{compute_oracle_optima, OptimaTable};
use dcop::problem::{DynamicProblem, EvaluationClock};
use dcop::strategy::{ConstraintHandler, StrategyKind};
use dcop::trace::{render_generations, render_improvements, write_trace, RunTrace};
use log::info;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::seeds::{oracle_seed, run_seed};
use crate::store::{read_text, write_text, RunMarker, Store};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunJob {
    pub id: G24Id,
    pub severity: u32,
    pub strategy: StrategyKind,
    pub run: usize,
    pub seed: u64,
}

pub fn instance(config: &ExperimentConfig, id: G24Id, severity: u32) -> Result<G24Instance, HarnessError> {
    make_instance(id, config.k, severity, config.fc).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn jobs(config: &ExperimentConfig) -> Vec<RunJob> {
    let mut out = Vec::new();
    for (id, severity) in config.cells() {
        for &strategy in &config.strategies {
            for run in 0..config.runs {
                let seed = run_seed(config.seed, id, severity, strategy, run);
                out.push(RunJob { id, severity, strategy, run, seed });
            }
        }
    }
    out
}

/// One DE run with the configured strategy; touches no files.
pub fn execute(config: &ExperimentConfig, problem: &dyn DynamicProblem, strategy: StrategyKind, seed: u64) -> Result<RunTrace, HarnessError> {
    let de = config.de_config(seed);
    let generations_per_window = config.fc as f64 / (de.pop_size + de.sentinels.len()) as f64;
    let mut handler = ConstraintHandler::new(
        strategy,
        &config.strategy,
        problem.num_inequality(),
        problem.num_equality(),
        de.pop_size,
        generations_per_window,
    );
    let mut clock = EvaluationClock::new(config.fc, config.times);
    Ok(engine::run(problem, &mut handler, &de, &mut clock)?)
}

pub fn execute_job(config: &ExperimentConfig, job: &RunJob) -> Result<RunTrace, HarnessError> {
    let problem = instance(config, job.id, job.severity)?;
    execute(config, &problem, job.strategy, job.seed)
}

fn pool(config: &ExperimentConfig) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new().num_threads(config.workers).build().map_err(|e| HarnessError::Pool(e.to_string()))
}

fn optima_current(store: &Store, config: &ExperimentConfig, id: G24Id, severity: u32) -> bool {
    store.optima_path(id, severity).exists()
        && read_text(&store.optima_marker_path(id, severity)).is_ok_and(|m| m.trim() == config.oracle_hash())
}

/// Computes optima for every cell lacking a current table.
///
/// With `force`, tables are rebuilt even when present.
pub fn build_optima(config: &ExperimentConfig, store: &Store, force: bool) -> Result<usize, HarnessError> {
    let todo: Vec<(G24Id, u32)> =
        config.cells().into_iter().filter(|&(id, s)| force || !optima_current(store, config, id, s)).collect();
    if todo.is_empty() {
        return Ok(0);
    }
    pool(config)?.install(|| {
        for &(id, severity) in &todo {
            let problem = instance(config, id, severity)?;
            info!("oracle {id} S={severity}");
            let table = compute_oracle_optima(&problem, config.times, &config.oracle_config(oracle_seed(config.seed, id, severity)))?;
            table.write(&store.optima_path(id, severity))?;
            write_text(&store.optima_marker_path(id, severity), &format!("{}\n", config.oracle_hash()))?;
        }
        Ok(todo.len())
    })
}

pub fn load_optima(store: &Store, id: G24Id, severity: u32) -> Result<OptimaTable, HarnessError> {
    let path = store.optima_path(id, severity);
    if !path.exists() {
        return Err(HarnessError::MissingOptima(format!("{id} S={severity}")));
    }
    Ok(OptimaTable::read(&path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub executed: usize,
    pub skipped: usize,
}

/// Executes the grid, writing traces, markers and the manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let store = Store::new(&config.out);
    let missing: Vec<String> = config
        .cells()
        .into_iter()
        .filter(|&(id, s)| !optima_current(&store, config, id, s))
        .map(|(id, s)| format!("{id} S={s}"))
        .collect();
    if !missing.is_empty() {
        if config.no_oracle {
            return Err(HarnessError::MissingOptima(missing.join(", ")));
        }
        build_optima(config, &store, false)?;
    }

    let hash = config.run_hash();
    let all = jobs(config);
    let (skip, todo): (Vec<RunJob>, Vec<RunJob>) = all.iter().partition(|j| {
        config.resume && store.run_is_complete(j.id, j.severity, j.strategy, j.run, j.seed, &hash)
    });
    info!("{} runs to execute, {} already complete", todo.len(), skip.len());
    pool(config)?.install(|| {
        todo.par_iter().try_for_each(|job| -> Result<(), HarnessError> {
            let trace = execute_job(config, job)?;
            let path = store.trace_path(job.id, job.severity, job.strategy, job.run);
            write_trace(&path, &trace)?;
            let marker = RunMarker {
                seed: job.seed,
                config_hash: hash.clone(),
                trace_digest: store.trace_digest(&path)?,
                evaluations: trace.evaluations,
            };
            write_text(&store.marker_path(job.id, job.severity, job.strategy, job.run), &marker.render())
        })
    })?;
    write_manifest(config, &store, &all)?;
    Ok(RunSummary { executed: todo.len(), skipped: skip.len() })
}

/// Manifest body without the timestamp line.
pub fn manifest_body(config: &ExperimentConfig, store: &Store, jobs: &[RunJob]) -> Result<String, HarnessError> {
    let mut out = format!("# config {}\n# version {}\n", config.run_hash(), env!("CARGO_PKG_VERSION"));
    out.push_str("instance\tS\tstrategy\trun\tseed\tevaluations\ttrace_sha256\n");
    for j in jobs {
        let marker = store
            .read_marker(&store.marker_path(j.id, j.severity, j.strategy, j.run))
            .ok_or_else(|| HarnessError::Config(format!("no marker for {} S={} {} run {}", j.id, j.severity, j.strategy, j.run)))?;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            j.id, j.severity, j.strategy, j.run, j.seed, marker.evaluations, marker.trace_digest
        ));
    }
    Ok(out)
}

fn write_manifest(config: &ExperimentConfig, store: &Store, jobs: &[RunJob]) -> Result<(), HarnessError> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let body = manifest_body(config, store, jobs)?;
    write_text(&store.manifest_path(), &format!("# written-at-unix {stamp}\n{body}"))
}

/// Renders a trace exactly as it is stored, for byte-level comparisons.
pub fn trace_bytes(trace: &RunTrace) -> (String, String) {
    (render_generations(trace), render_improvements(trace))
}
