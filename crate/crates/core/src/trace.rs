//! Per-run records and their tab-separated file format.
//!
//! A run is stored as two files: the generation table (`<stem>.tsv`) and the
//! list of feasible best-so-far improvements (`<stem>.improvements.tsv`).

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// State at the end of one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: u64,
    /// Cumulative evaluations, sentinel and re-evaluations included.
    pub evaluations: u64,
    /// Time window of the generation's last evaluation.
    pub t: u64,
    /// Best-so-far in the window under feasibility-first ordering.
    pub best_f: f64,
    /// Raw violation of that best; zero once a feasible point was found.
    pub best_phi: f64,
    /// Population member ranked last under feasibility-first ordering.
    pub worst_f: f64,
    pub worst_phi: f64,
    pub change_detected: bool,
}

impl GenerationRecord {
    pub fn best_is_feasible(&self) -> bool {
        self.best_phi == 0.0
    }
}

/// A feasible evaluation that improved the window's best objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub t: u64,
    /// 1-based position of the evaluation within its window.
    pub eval_in_window: u64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub fc: u64,
    pub max_times: u64,
    pub evaluations: u64,
    pub rows: Vec<GenerationRecord>,
    pub improvements: Vec<Improvement>,
}

impl RunTrace {
    pub fn improvements_in(&self, t: u64) -> impl Iterator<Item = &Improvement> {
        self.improvements.iter().filter(move |imp| imp.t == t)
    }
}

pub const GENERATION_HEADER: &str =
    "generation\tevaluations\tt\tbest_f\tbest_phi\tworst_f\tworst_phi\tchange_detected";
pub const IMPROVEMENT_HEADER: &str = "t\teval_in_window\tf";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
}

pub fn render_generations(trace: &RunTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 2));
    let _ = writeln!(out, "# fc={} max_times={} evaluations={}", trace.fc, trace.max_times, trace.evaluations);
    out.push_str(GENERATION_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.generation,
            r.evaluations,
            r.t,
            r.best_f,
            r.best_phi,
            r.worst_f,
            r.worst_phi,
            u8::from(r.change_detected)
        );
    }
    out
}

pub fn render_improvements(trace: &RunTrace) -> String {
    let mut out = String::from(IMPROVEMENT_HEADER);
    out.push('\n');
    for imp in &trace.improvements {
        let _ = writeln!(out, "{}\t{}\t{}", imp.t, imp.eval_in_window, imp.f);
    }
    out
}

pub fn improvements_path(generations: &Path) -> PathBuf {
    let stem = generations.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    generations.with_file_name(format!("{stem}.improvements.tsv"))
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<(), TraceError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, render_generations(trace))?;
    fs::write(improvements_path(path), render_improvements(trace))?;
    Ok(())
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Parse { file: file.to_string(), line, message: message.into() }
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, file: &str, line: usize) -> Result<T, TraceError> {
    cols.get(i)
        .ok_or_else(|| parse_err(file, line, format!("missing column {i}")))?
        .parse()
        .map_err(|_| parse_err(file, line, format!("bad value `{}` in column {i}", cols[i])))
}

pub fn parse_trace(generations: &str, improvements: &str, name: &str) -> Result<RunTrace, TraceError> {
    let mut trace = RunTrace::default();
    let mut header_seen = false;
    for (n, line) in generations.lines().enumerate() {
        let line_no = n + 1;
        if let Some(meta) = line.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    let v: u64 = v.parse().map_err(|_| parse_err(name, line_no, format!("bad metadata `{kv}`")))?;
                    match k {
                        "fc" => trace.fc = v,
                        "max_times" => trace.max_times = v,
                        "evaluations" => trace.evaluations = v,
                        _ => {}
                    }
                }
            }
            continue;
        }
        if !header_seen {
            if line != GENERATION_HEADER {
                return Err(parse_err(name, line_no, "unexpected header"));
            }
            header_seen = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let change: u8 = field(&cols, 7, name, line_no)?;
        trace.rows.push(GenerationRecord {
            generation: field(&cols, 0, name, line_no)?,
            evaluations: field(&cols, 1, name, line_no)?,
            t: field(&cols, 2, name, line_no)?,
            best_f: field(&cols, 3, name, line_no)?,
            best_phi: field(&cols, 4, name, line_no)?,
            worst_f: field(&cols, 5, name, line_no)?,
            worst_phi: field(&cols, 6, name, line_no)?,
            change_detected: change != 0,
        });
    }
    for (n, line) in improvements.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        trace.improvements.push(Improvement {
            t: field(&cols, 0, name, n + 1)?,
            eval_in_window: field(&cols, 1, name, n + 1)?,
            f: field(&cols, 2, name, n + 1)?,
        });
    }
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<RunTrace, TraceError> {
    let generations = fs::read_to_string(path)?;
    let improvements = fs::read_to_string(improvements_path(path))?;
    parse_trace(&generations, &improvements, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, Just(0.0), Just(-5.508013271597)]
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(
            rows in proptest::collection::vec((finite(), 0.0..10.0f64, finite(), 0.0..10.0f64, any::<bool>()), 0..20),
            imps in proptest::collection::vec((0u64..10, 1u64..1000, finite()), 0..10),
        ) {
            let trace = RunTrace {
                fc: 1000,
                max_times: 10,
                evaluations: 10_000,
                rows: rows.iter().enumerate().map(|(i, &(bf, bp, wf, wp, c))| GenerationRecord {
                    generation: i as u64 + 1,
                    evaluations: 22 * (i as u64 + 1),
                    t: i as u64 / 3,
                    best_f: bf, best_phi: bp, worst_f: wf, worst_phi: wp, change_detected: c,
                }).collect(),
                improvements: imps.iter().map(|&(t, e, f)| Improvement { t, eval_in_window: e, f }).collect(),
            };
            let back = parse_trace(&render_generations(&trace), &render_improvements(&trace), "mem").unwrap();
            prop_assert_eq!(back, trace);
        }
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(parse_trace("a\tb\n", IMPROVEMENT_HEADER, "x").is_err());
    }

    #[test]
    fn improvements_sit_next_to_generations() {
        assert_eq!(
            improvements_path(Path::new("out/run07.tsv")),
            PathBuf::from("out/run07.improvements.tsv")
        );
    }
}
