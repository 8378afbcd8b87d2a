//! Experiment configuration: defaults, key-value file, flags, environment.
//!
//! Precedence, highest first: command-line flag, `DCOP_OUT` (output
//! directory only), config file, built-in default.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use dcop::engine::{BoundPolicy, DeConfig};
use dcop::g24::{G24Id, SUPPORTED_SEVERITIES};
use dcop::optima::OracleConfig;
use dcop::strategy::{StrategyKind, StrategyParams};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::HarnessError;

pub const OUT_ENV: &str = "DCOP_OUT";

/// Every key of the config file; each has a flag of the same name.
#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Comma-separated instance names, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub instances: Option<Vec<String>>,
    /// Comma-separated severities out of 10, 20, 50.
    #[arg(long, value_delimiter = ',')]
    pub severities: Option<Vec<u32>>,
    /// Comma-separated strategies (epsilon, feasibility, penalty, stochastic), or `all`.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    /// Independent runs per cell.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Skip runs whose traces and markers match the current configuration.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub resume: Option<bool>,
    /// Population size.
    #[arg(long)]
    pub np: Option<usize>,
    /// Crossover rate.
    #[arg(long)]
    pub cr: Option<f64>,
    /// Lower bound of the per-trial scale factor.
    #[arg(long)]
    pub f_min: Option<f64>,
    /// Upper bound of the per-trial scale factor.
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Evaluations per time window.
    #[arg(long)]
    pub fc: Option<u64>,
    /// Number of time windows per run.
    #[arg(long)]
    pub times: Option<u64>,
    /// Objective change severity.
    #[arg(long)]
    pub k: Option<f64>,
    /// resample, reflect or clamp.
    #[arg(long)]
    pub bound_policy: Option<String>,
    /// Stochastic ranking probability of comparing by objective.
    #[arg(long)]
    pub pf: Option<f64>,
    /// Epsilon level decay exponent.
    #[arg(long)]
    pub cp: Option<f64>,
    /// Population share whose violation seeds the initial epsilon level.
    #[arg(long)]
    pub theta_frac: Option<f64>,
    /// Share of a window, in generations, after which epsilon reaches zero.
    #[arg(long)]
    pub tc_frac: Option<f64>,
    /// Penalty weight on the summed violation.
    #[arg(long)]
    pub penalty_factor: Option<f64>,
    /// Equality constraint tolerance.
    #[arg(long)]
    pub eq_tolerance: Option<f64>,
    /// Independent oracle runs per window.
    #[arg(long)]
    pub oracle_runs: Option<usize>,
    /// Evaluations per oracle run and window.
    #[arg(long)]
    pub oracle_budget: Option<u64>,
    /// Fail instead of computing missing optima.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_oracle: Option<bool>,
}

impl Settings {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            instances, severities, strategies, runs, seed, out, workers, resume, np, cr, f_min, f_max, fc, times, k,
            bound_policy, pf, cp, theta_frac, tc_frac, penalty_factor, eq_tolerance, oracle_runs, oracle_budget,
            no_oracle
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instances: Vec<G24Id>,
    pub severities: Vec<u32>,
    pub strategies: Vec<StrategyKind>,
    pub runs: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    pub resume: bool,
    pub np: usize,
    pub cr: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub fc: u64,
    pub times: u64,
    pub k: f64,
    pub bound_policy: BoundPolicy,
    pub strategy: StrategyParams,
    pub oracle_runs: usize,
    pub oracle_budget: u64,
    pub no_oracle: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            instances: G24Id::ALL.to_vec(),
            severities: SUPPORTED_SEVERITIES.to_vec(),
            strategies: StrategyKind::ALL.to_vec(),
            runs: 30,
            seed: 1,
            out: PathBuf::from("results"),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            resume: false,
            np: 20,
            cr: 0.2,
            f_min: 0.2,
            f_max: 0.8,
            fc: 1000,
            times: 10,
            k: 0.5,
            bound_policy: BoundPolicy::Resample,
            strategy: StrategyParams::default(),
            oracle_runs: 30,
            oracle_budget: OracleConfig::default().budget,
            no_oracle: false,
        }
    }
}

fn parse_list<T, F>(items: &[String], all: &[T], parse: F) -> Result<Vec<T>, HarnessError>
where
    T: Copy,
    F: Fn(&str) -> Result<T, String>,
{
    if items.iter().any(|s| s.trim() == "all") {
        return Ok(all.to_vec());
    }
    items.iter().map(|s| parse(s.trim()).map_err(HarnessError::Config)).collect()
}

impl ExperimentConfig {
    /// Applies `file` then `flags` on top of the defaults.
    pub fn resolve(file: Settings, flags: Settings, env_out: Option<PathBuf>) -> Result<Self, HarnessError> {
        let env = Settings { out: env_out, ..Settings::default() };
        let s = file.overlay(env).overlay(flags);
        let mut c = ExperimentConfig::default();
        if let Some(v) = s.instances {
            c.instances = parse_list(&v, &G24Id::ALL, |s| s.parse::<G24Id>().map_err(|e| e.to_string()))?;
        }
        if let Some(v) = s.severities {
            c.severities = v;
        }
        if let Some(v) = s.strategies {
            c.strategies = parse_list(&v, &StrategyKind::ALL, |s| s.parse::<StrategyKind>().map_err(|e| e.to_string()))?;
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = s.$f { c.$f = v; })* };
        }
        set!(runs, seed, out, workers, resume, np, cr, f_min, f_max, fc, times, k, oracle_runs, oracle_budget, no_oracle);
        if let Some(v) = s.bound_policy {
            c.bound_policy = v.parse().map_err(HarnessError::Config)?;
        }
        let p = &mut c.strategy;
        if let Some(v) = s.pf {
            p.pf = v;
        }
        if let Some(v) = s.cp {
            p.cp = v;
        }
        if let Some(v) = s.theta_frac {
            p.theta_frac = v;
        }
        if let Some(v) = s.tc_frac {
            p.tc_frac = v;
        }
        if let Some(v) = s.penalty_factor {
            p.penalty_factor = v;
        }
        if let Some(v) = s.eq_tolerance {
            p.eq_tolerance = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(s) = self.severities.iter().find(|s| !SUPPORTED_SEVERITIES.contains(s)) {
            return Err(HarnessError::Config(format!("severity {s} is not one of 10, 20, 50")));
        }
        if self.instances.is_empty() || self.severities.is_empty() || self.strategies.is_empty() {
            return Err(HarnessError::Config("instances, severities and strategies must be non-empty".into()));
        }
        if self.runs == 0 || self.runs > 10_000 {
            return Err(HarnessError::Config(format!("runs = {} outside 1..=10000", self.runs)));
        }
        if self.fc == 0 || self.times == 0 {
            return Err(HarnessError::Config("fc and times must be positive".into()));
        }
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be positive".into()));
        }
        if self.oracle_runs == 0 {
            return Err(HarnessError::Config("oracle-runs must be positive".into()));
        }
        self.de_config(0).validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn de_config(&self, seed: u64) -> DeConfig {
        DeConfig {
            pop_size: self.np,
            cr: self.cr,
            f_min: self.f_min,
            f_max: self.f_max,
            sentinels: DeConfig::default_sentinels(self.np),
            bound_policy: self.bound_policy,
            eq_tolerance: self.strategy.eq_tolerance,
            seed,
        }
    }

    pub fn oracle_config(&self, seed: u64) -> OracleConfig {
        OracleConfig { runs: self.oracle_runs, budget: self.oracle_budget, seed, ..OracleConfig::default() }
    }

    /// (instance, severity) cells; instances with static constraints keep a
    /// single severity (20 when listed, else the first listed).
    pub fn cells(&self) -> Vec<(G24Id, u32)> {
        let mut cells = Vec::new();
        for &id in &self.instances {
            if id.has_dynamic_constraints() {
                cells.extend(self.severities.iter().map(|&s| (id, s)));
            } else {
                let s = if self.severities.contains(&20) { 20 } else { self.severities[0] };
                cells.push((id, s));
            }
        }
        cells
    }

    /// Canonical rendering of everything that shapes a single run's trace.
    pub fn run_parameters(&self) -> String {
        let p = &self.strategy;
        let mut s = String::new();
        let _ = write!(
            s,
            "np={}\ncr={:?}\nf-min={:?}\nf-max={:?}\nfc={}\ntimes={}\nk={:?}\nbound-policy={}\n",
            self.np, self.cr, self.f_min, self.f_max, self.fc, self.times, self.k, self.bound_policy
        );
        let _ = write!(
            s,
            "pf={:?}\ncp={:?}\ntheta-frac={:?}\ntc-frac={:?}\npenalty-factor={:?}\neq-tolerance={:?}\n",
            p.pf, p.cp, p.theta_frac, p.tc_frac, p.penalty_factor, p.eq_tolerance
        );
        let _ = write!(s, "sentinels={:?}\nversion={}\n", DeConfig::default_sentinels(self.np), env!("CARGO_PKG_VERSION"));
        s
    }

    pub fn run_hash(&self) -> String {
        hex::encode(Sha256::digest(self.run_parameters().as_bytes()))
    }

    pub fn oracle_hash(&self) -> String {
        let text = format!("oracle-runs={}\noracle-budget={}\ntimes={}\nk={:?}\nfc={}\nseed={}\n", self.oracle_runs, self.oracle_budget, self.times, self.k, self.fc, self.seed);
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_24_cells() {
        let c = ExperimentConfig::default();
        assert_eq!(c.cells().len(), 24);
        assert_eq!(c.cells().iter().filter(|(_, s)| *s == 20).count(), 14);
    }

    #[test]
    fn flags_beat_env_beats_file() {
        let file: Settings = toml::from_str("runs = 5\nout = \"from-file\"\nseed = 9\nf-min = 0.3").unwrap();
        let flags = Settings { runs: Some(7), ..Settings::default() };
        let c = ExperimentConfig::resolve(file.clone(), flags, Some("from-env".into())).unwrap();
        assert_eq!((c.runs, c.seed, c.f_min), (7, 9, 0.3));
        assert_eq!(c.out, PathBuf::from("from-env"));
        let flags = Settings { out: Some("from-flag".into()), ..Settings::default() };
        let c = ExperimentConfig::resolve(file, flags, Some("from-env".into())).unwrap();
        assert_eq!(c.out, PathBuf::from("from-flag"));
    }

    #[test]
    fn unknown_keys_and_values_rejected() {
        assert!(toml::from_str::<Settings>("popsize = 3").is_err());
        let bad = Settings { severities: Some(vec![30]), ..Settings::default() };
        assert!(ExperimentConfig::resolve(Settings::default(), bad, None).is_err());
        let bad = Settings { strategies: Some(vec!["annealing".into()]), ..Settings::default() };
        assert!(ExperimentConfig::resolve(Settings::default(), bad, None).is_err());
    }

    #[test]
    fn static_instances_collapse_severities() {
        let c = ExperimentConfig {
            instances: vec![G24Id::G24_1, G24Id::G24_3],
            severities: vec![10, 50],
            ..ExperimentConfig::default()
        };
        assert_eq!(c.cells(), vec![(G24Id::G24_1, 10), (G24Id::G24_3, 10), (G24Id::G24_3, 50)]);
    }

    #[test]
    fn run_hash_tracks_run_parameters_only() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { runs: 3, workers: 7, seed: 99, ..a.clone() };
        assert_eq!(a.run_hash(), b.run_hash());
        let c = ExperimentConfig { cr: 0.3, ..a.clone() };
        assert_ne!(a.run_hash(), c.run_hash());
    }
}
