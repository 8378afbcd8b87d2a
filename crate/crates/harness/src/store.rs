//! On-disk layout of an experiment's outputs.
//!
//! ```text
//! <out>/optima/<instance>_S<S>.tsv          reference optima
//! <out>/optima/<instance>_S<S>.done         oracle settings they were built with
//! <out>/traces/<instance>/S<S>/<strategy>/runNN.tsv
//! <out>/traces/<instance>/S<S>/<strategy>/runNN.improvements.tsv
//! <out>/traces/<instance>/S<S>/<strategy>/runNN.done
//! <out>/manifest.tsv
//! <out>/reports/...
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use dcop::g24::G24Id;
use dcop::strategy::StrategyKind;
use dcop::trace::improvements_path;
use sha2::{Digest, Sha256};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    root: PathBuf,
}

/// What a finished run left behind next to its trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMarker {
    pub seed: u64,
    pub config_hash: String,
    pub trace_digest: String,
    pub evaluations: u64,
}

impl RunMarker {
    pub fn render(&self) -> String {
        format!(
            "seed\t{}\nconfig\t{}\ntrace\t{}\nevaluations\t{}\n",
            self.seed, self.config_hash, self.trace_digest, self.evaluations
        )
    }

    pub fn parse(text: &str) -> Option<Self> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines() {
            let (k, v) = line.split_once('\t')?;
            fields.insert(k, v);
        }
        Some(RunMarker {
            seed: fields.get("seed")?.parse().ok()?,
            config_hash: fields.get("config")?.to_string(),
            trace_digest: fields.get("trace")?.to_string(),
            evaluations: fields.get("evaluations")?.parse().ok()?,
        })
    }
}

pub fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn optima_path(&self, id: G24Id, severity: u32) -> PathBuf {
        self.root.join("optima").join(format!("{id}_S{severity}.tsv"))
    }

    pub fn optima_marker_path(&self, id: G24Id, severity: u32) -> PathBuf {
        self.optima_path(id, severity).with_extension("done")
    }

    pub fn strategy_dir(&self, id: G24Id, severity: u32, strategy: StrategyKind) -> PathBuf {
        self.root.join("traces").join(id.name()).join(format!("S{severity}")).join(strategy.name())
    }

    pub fn trace_path(&self, id: G24Id, severity: u32, strategy: StrategyKind, run: usize) -> PathBuf {
        self.strategy_dir(id, severity, strategy).join(format!("run{run:02}.tsv"))
    }

    pub fn marker_path(&self, id: G24Id, severity: u32, strategy: StrategyKind, run: usize) -> PathBuf {
        self.trace_path(id, severity, strategy, run).with_extension("done")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.tsv")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    /// SHA-256 over both files of a stored trace.
    pub fn trace_digest(&self, trace: &Path) -> Result<String, HarnessError> {
        let mut hasher = Sha256::new();
        for path in [trace.to_path_buf(), improvements_path(trace)] {
            hasher.update(fs::read(&path).map_err(|e| HarnessError::io(&path, e))?);
        }
        Ok(hex::encode(hasher.finalize()))
    }

    pub fn read_marker(&self, path: &Path) -> Option<RunMarker> {
        RunMarker::parse(&fs::read_to_string(path).ok()?)
    }

    /// Whether the stored run matches `seed` and `config_hash` and its files
    /// are intact.
    pub fn run_is_complete(&self, id: G24Id, severity: u32, strategy: StrategyKind, run: usize, seed: u64, config_hash: &str) -> bool {
        let Some(marker) = self.read_marker(&self.marker_path(id, severity, strategy, run)) else {
            return false;
        };
        marker.seed == seed
            && marker.config_hash == config_hash
            && self.trace_digest(&self.trace_path(id, severity, strategy, run)).is_ok_and(|d| d == marker.trace_digest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_round_trip() {
        let m = RunMarker { seed: 42, config_hash: "ab".into(), trace_digest: "cd".into(), evaluations: 10_000 };
        assert_eq!(RunMarker::parse(&m.render()), Some(m));
        assert_eq!(RunMarker::parse("seed\tx\n"), None);
    }

    #[test]
    fn layout() {
        let s = Store::new("out");
        assert_eq!(
            s.trace_path(G24Id::G24_3b, 50, StrategyKind::Stochastic, 7),
            PathBuf::from("out/traces/G24_3b/S50/stochastic/run07.tsv")
        );
        assert_eq!(s.marker_path(G24Id::G24_1, 20, StrategyKind::Penalty, 0), PathBuf::from("out/traces/G24_1/S20/penalty/run00.done"));
        assert_eq!(s.optima_path(G24Id::G24_6a, 20), PathBuf::from("out/optima/G24_6a_S20.tsv"));
        assert_eq!(s.optima_marker_path(G24Id::G24_6a, 20), PathBuf::from("out/optima/G24_6a_S20.done"));
    }
}
