//! Reference optima per time window, found by long frozen-time DE runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{crossover, distinct_donors, random_point, repair_bounds, BoundPolicy};
use crate::g24::{G24Id, G24Instance};
use crate::problem::{raw_violation, DynamicProblem};

/// Best feasible point found for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub f: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimaTable {
    pub instance: String,
    pub severity: u32,
    /// `None` marks a window where no run found a feasible point.
    pub entries: BTreeMap<u64, Option<Optimum>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub runs: usize,
    /// Evaluations per run and window.
    pub budget: u64,
    pub pop_size: usize,
    pub cr: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { runs: 30, budget: 20_000, pop_size: 40, cr: 0.9, f_min: 0.4, f_max: 0.9, seed: 0 }
    }
}

#[derive(Debug, Error)]
pub enum OptimaError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("oracle needs at least 4 individuals and a budget covering one generation")]
    Config,
}

impl OptimaTable {
    /// `f*(t)`, or `None` when absent or never computed.
    pub fn f_star(&self, t: u64) -> Option<f64> {
        self.entries.get(&t).and_then(|e| e.as_ref()).map(|o| o.f)
    }

    pub fn contains(&self, t: u64) -> bool {
        self.entries.contains_key(&t)
    }

    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }

    /// Checks that every witness is feasible and reproduces its stored value.
    pub fn verify<P: DynamicProblem + ?Sized>(&self, problem: &P, eq_tolerance: f64) -> Result<(), String> {
        let mut g = vec![0.0; problem.num_inequality()];
        let mut h = vec![0.0; problem.num_equality()];
        for (&t, entry) in &self.entries {
            let Some(opt) = entry else { continue };
            problem.inequality(&opt.x, t, &mut g);
            problem.equality(&opt.x, t, &mut h);
            if raw_violation(&g, &h, eq_tolerance) > 0.0 {
                return Err(format!("witness for t = {t} is infeasible"));
            }
            let f = problem.objective(&opt.x, t);
            if (f - opt.f).abs() > 1e-9 {
                return Err(format!("witness for t = {t} evaluates to {f}, stored {}", opt.f));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("id\tS\tt\tf_star\tx1\tx2\n");
        for (&t, entry) in &self.entries {
            let _ = write!(out, "{}\t{}\t{}", self.instance, self.severity, t);
            match entry {
                Some(opt) => {
                    let _ = write!(out, "\t{:.16e}", opt.f);
                    for xi in &opt.x {
                        let _ = write!(out, "\t{xi:.16e}");
                    }
                }
                None => out.push_str("\tNaN\tNaN\tNaN"),
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, OptimaError> {
        let mut table = OptimaTable { instance: String::new(), severity: 0, entries: BTreeMap::new() };
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| OptimaError::Parse { line: n + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 4 {
                return Err(bad(format!("expected at least 4 columns, got {}", cols.len())));
            }
            table.instance = cols[0].to_string();
            table.severity = cols[1].parse().map_err(|_| bad(format!("bad severity `{}`", cols[1])))?;
            let t: u64 = cols[2].parse().map_err(|_| bad(format!("bad time `{}`", cols[2])))?;
            let nums = cols[3..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad(format!("bad number `{c}`"))))
                .collect::<Result<Vec<f64>, _>>()?;
            let entry = if nums[0].is_nan() { None } else { Some(Optimum { f: nums[0], x: nums[1..].to_vec() }) };
            table.entries.insert(t, entry);
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<(), OptimaError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, OptimaError> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

/// Feasible first, then smaller violation, then smaller objective.
fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    match (a.1 == 0.0, b.1 == 0.0) {
        (true, true) => a.0 < b.0,
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.1 < b.1,
    }
}

/// One DE run on the problem frozen at `t`; returns the best feasible point.
pub fn frozen_run<P: DynamicProblem + ?Sized>(
    problem: &P,
    t: u64,
    config: &OracleConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Optimum> {
    let bounds = problem.bounds();
    let mut g = vec![0.0; problem.num_inequality()];
    let mut h = vec![0.0; problem.num_equality()];
    let mut score = |x: &[f64]| {
        problem.inequality(x, t, &mut g);
        problem.equality(x, t, &mut h);
        (problem.objective(x, t), raw_violation(&g, &h, 1e-4))
    };
    let np = config.pop_size;
    let mut xs: Vec<Vec<f64>> = (0..np).map(|_| random_point(bounds, rng)).collect();
    let mut fit: Vec<(f64, f64)> = xs.iter().map(|x| score(x)).collect();
    let mut spent = np as u64;
    let mut best: Option<Optimum> = None;
    let consider = |x: &[f64], (f, phi): (f64, f64), best: &mut Option<Optimum>| {
        if phi == 0.0 && best.as_ref().is_none_or(|b| f < b.f) {
            *best = Some(Optimum { f, x: x.to_vec() });
        }
    };
    for (x, &s) in xs.iter().zip(&fit) {
        consider(x, s, &mut best);
    }
    while spent + np as u64 <= config.budget {
        for i in 0..np {
            let [r0, r1, r2] = distinct_donors(np, i, rng);
            let f = rng.gen_range(config.f_min..=config.f_max);
            let mutant: Vec<f64> = (0..xs[i].len()).map(|j| xs[r0][j] + f * (xs[r1][j] - xs[r2][j])).collect();
            let trial = crossover(&xs[i], &mutant, config.cr, rng);
            let trial = repair_bounds(trial, bounds, BoundPolicy::Resample, rng);
            let s = score(&trial);
            consider(&trial, s, &mut best);
            if !better(fit[i], s) {
                xs[i] = trial;
                fit[i] = s;
            }
        }
        spent += np as u64;
    }
    best
}

/// Stream index for the private generator of `(instance, S, t, run)`.
fn stream_of(id: G24Id, severity: u32, t: u64, run: usize) -> u64 {
    let idx = G24Id::ALL.iter().position(|&i| i == id).unwrap_or(0) as u64;
    (idx << 56) | (u64::from(severity) << 40) | ((t & 0xF_FFFF) << 20) | (run as u64 & 0xF_FFFF)
}

/// Best feasible objective per window `0..=max_times` over `config.runs` runs.
pub fn compute_oracle_optima(
    instance: &G24Instance,
    max_times: u64,
    config: &OracleConfig,
) -> Result<OptimaTable, OptimaError> {
    if config.pop_size < 4 || config.budget < config.pop_size as u64 {
        return Err(OptimaError::Config);
    }
    let jobs: Vec<(u64, usize)> = (0..=max_times).flat_map(|t| (0..config.runs).map(move |r| (t, r))).collect();
    let results: Vec<(u64, Option<Optimum>)> = jobs
        .par_iter()
        .map(|&(t, run)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream_of(instance.id, instance.severity, t, run));
            (t, frozen_run(instance, t, config, &mut rng))
        })
        .collect();
    let mut entries: BTreeMap<u64, Option<Optimum>> = (0..=max_times).map(|t| (t, None)).collect();
    for (t, found) in results {
        let Some(found) = found else { continue };
        let slot = entries.get_mut(&t).expect("window listed");
        if slot.as_ref().is_none_or(|cur| found.f < cur.f) {
            *slot = Some(found);
        }
    }
    Ok(OptimaTable { instance: instance.id.name().to_string(), severity: instance.severity, entries })
}
