//! Tables, exports and plot data built from a stored grid.

use std::fmt::Write as _;

use dcop::g24::{feasible_region_ratio, FeasibleShare, G24Id};
use dcop::measures::{generation_errors, run_measures, summarize, Measure, RunMeasures, Summary};
use dcop::stats::{ks_normality, posthoc_bonferroni, Comparison, SampleGroup};
use dcop::strategy::StrategyKind;
use dcop::trace::read_trace;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::runner::{instance, load_optima};
use crate::store::{write_text, Store};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyData {
    pub kind: StrategyKind,
    pub runs: Vec<RunMeasures>,
    /// Per-run generation errors, for plot data.
    pub curves: Vec<Vec<f64>>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub id: G24Id,
    pub severity: u32,
    pub strategies: Vec<StrategyData>,
}

impl CellData {
    pub fn label(&self) -> String {
        format!("{} S={}", self.id, self.severity)
    }

    pub fn summary(&self, kind: StrategyKind, measure: Measure) -> Option<Summary> {
        self.strategies.iter().find(|s| s.kind == kind).map(|s| summarize(&s.runs, measure))
    }

    /// Offline errors per strategy, for the rank tests.
    pub fn groups(&self) -> Vec<SampleGroup> {
        self.strategies
            .iter()
            .map(|s| SampleGroup::new(s.kind.name(), s.runs.iter().filter_map(|m| m.offline_error).collect()))
            .collect()
    }

    /// Pairwise comparison on offline error; `None` when some strategy has
    /// fewer than two usable runs.
    pub fn compare(&self) -> Option<Comparison> {
        posthoc_bonferroni(&self.groups(), true).ok()
    }
}

/// Reads every stored run of a cell; absent runs are counted, not fatal.
pub fn load_cell(config: &ExperimentConfig, store: &Store, id: G24Id, severity: u32) -> Result<CellData, HarnessError> {
    let optima = load_optima(store, id, severity)?;
    let strategies = config
        .strategies
        .iter()
        .map(|&kind| {
            let mut data = StrategyData { kind, runs: Vec::new(), curves: Vec::new(), missing: 0 };
            for run in 0..config.runs {
                let path = store.trace_path(id, severity, kind, run);
                if !path.exists() {
                    data.missing += 1;
                    continue;
                }
                let trace = read_trace(&path)?;
                data.runs.push(run_measures(&trace, &optima));
                data.curves.push(generation_errors(&trace, &optima).unwrap_or_default());
            }
            Ok(data)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(CellData { id, severity, strategies })
}

pub fn load_all(config: &ExperimentConfig, store: &Store) -> Result<Vec<CellData>, HarnessError> {
    config.cells().par_iter().map(|&(id, s)| load_cell(config, store, id, s)).collect()
}

fn num(v: f64, digits: usize) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.digits$}")
    }
}

fn mean_std(s: &Summary, digits: usize) -> String {
    if s.n == 0 {
        "NaN".to_string()
    } else {
        format!("{}±{}", num(s.mean, digits), num(s.std, digits))
    }
}

pub fn measures_tsv(cells: &[CellData]) -> String {
    let mut out = String::from("instance\tS\tstrategy\tmeasure\tmean\tstd\tn_runs\n");
    for cell in cells {
        for s in &cell.strategies {
            for m in Measure::ALL {
                let sum = summarize(&s.runs, m);
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}", cell.id, cell.severity, s.kind, m.name(), sum.mean, sum.std, sum.n);
            }
        }
    }
    out
}

fn header(out: &mut String, first: &str, strategies: &[StrategyKind]) {
    let _ = write!(out, "{first:<14}");
    for k in strategies {
        let _ = write!(out, "{:>24}", k.name());
    }
    out.push('\n');
}

/// Offline error mean±std per cell; `*` marks the lowest mean of each row.
pub fn offline_error_table(cells: &[CellData], strategies: &[StrategyKind]) -> String {
    let mut out = String::new();
    header(&mut out, "cell", strategies);
    for cell in cells {
        let sums: Vec<Summary> =
            strategies.iter().map(|&k| cell.summary(k, Measure::OfflineError).unwrap_or(Summary::of(&[]))).collect();
        let best = sums
            .iter()
            .enumerate()
            .filter(|(_, s)| s.n > 0)
            .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .map(|(i, _)| i);
        let _ = write!(out, "{:<14}", cell.label());
        for (i, s) in sums.iter().enumerate() {
            let mark = if Some(i) == best { "*" } else { "" };
            let _ = write!(out, "{:>24}", format!("{}{mark}", mean_std(s, 3)));
        }
        out.push('\n');
    }
    out
}

/// For each strategy, the strategies that beat it (`j(+)`) and that it beats
/// (`j(-)`), numbered from 1 in column order.
pub fn dominance_table(cells: &[CellData]) -> String {
    let mut out = String::new();
    let Some(first) = cells.first() else { return out };
    let kinds: Vec<StrategyKind> = first.strategies.iter().map(|s| s.kind).collect();
    let _ = writeln!(
        out,
        "# {}",
        kinds.iter().enumerate().map(|(i, k)| format!("{}={}", i + 1, k.name())).collect::<Vec<_>>().join(" ")
    );
    header(&mut out, "cell", &kinds);
    for cell in cells {
        let _ = write!(out, "{:<14}", cell.label());
        match cell.compare() {
            None => {
                for _ in &kinds {
                    let _ = write!(out, "{:>24}", "n/a");
                }
            }
            Some(c) => {
                for i in 0..c.labels.len() {
                    let mut marks: Vec<(usize, &str)> = c.dominators_of(i).into_iter().map(|j| (j, "(+)")).collect();
                    marks.extend(c.dominated_by(i).into_iter().map(|j| (j, "(-)")));
                    marks.sort();
                    let text = if marks.is_empty() {
                        "-".to_string()
                    } else {
                        marks.iter().map(|(j, m)| format!("{}{m}", j + 1)).collect::<Vec<_>>().join(",")
                    };
                    let _ = write!(out, "{text:>24}");
                }
            }
        }
        let _ = writeln!(out);
    }
    out
}

/// Blocks of AE, CS, PR, FR and SR per cell.
pub fn window_measures_table(cells: &[CellData], strategies: &[StrategyKind]) -> String {
    let mut out = String::new();
    header(&mut out, "cell/measure", strategies);
    let rows = [
        (Measure::AverageEvaluations, 2),
        (Measure::Convergence, 2),
        (Measure::Progress, 3),
        (Measure::Feasibility, 2),
        (Measure::Success, 2),
    ];
    for cell in cells {
        let _ = writeln!(out, "{}", cell.label());
        for (m, digits) in rows {
            let _ = write!(out, "  {:<12}", m.name());
            for &k in strategies {
                let s = cell.summary(k, m).unwrap_or(Summary::of(&[]));
                let _ = write!(out, "{:>24}", mean_std(&s, digits));
            }
            out.push('\n');
        }
    }
    out
}

/// Generation index against mean error over runs, one column per strategy.
pub fn plot_data(cell: &CellData) -> String {
    let mut out = String::from("generation");
    for s in &cell.strategies {
        let _ = write!(out, "\t{}", s.kind);
    }
    out.push('\n');
    let len = cell.strategies.iter().flat_map(|s| s.curves.iter().map(Vec::len)).max().unwrap_or(0);
    for g in 0..len {
        let _ = write!(out, "{}", g + 1);
        for s in &cell.strategies {
            let vals: Vec<f64> = s.curves.iter().filter_map(|c| c.get(g).copied()).collect();
            let _ = write!(out, "\t{}", Summary::of(&vals).mean);
        }
        out.push('\n');
    }
    out
}

/// Lilliefors diagnostic on each strategy's offline errors.
pub fn normality_tsv(cells: &[CellData]) -> String {
    let mut out = String::from("instance\tS\tstrategy\tn\tD\tp\n");
    for cell in cells {
        for (s, g) in cell.strategies.iter().zip(cell.groups()) {
            let r = ks_normality(&g.values);
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", cell.id, cell.severity, s.kind, g.values.len(), r.d, r.p);
        }
    }
    out
}

/// Cells with runs missing, as `label: strategy (n missing)` lines.
pub fn gaps(cells: &[CellData]) -> Vec<String> {
    cells
        .iter()
        .flat_map(|c| {
            c.strategies
                .iter()
                .filter(|s| s.missing > 0)
                .map(move |s| format!("{}: {} ({} missing)", c.label(), s.kind, s.missing))
        })
        .collect()
}

/// Writes every report file; returns the list of gaps.
pub fn write_reports(config: &ExperimentConfig, store: &Store) -> Result<Vec<String>, HarnessError> {
    let cells = load_all(config, store)?;
    let dir = store.reports_dir();
    write_text(&dir.join("measures.tsv"), &measures_tsv(&cells))?;
    write_text(&dir.join("offline_error.txt"), &offline_error_table(&cells, &config.strategies))?;
    write_text(&dir.join("dominance.txt"), &dominance_table(&cells))?;
    write_text(&dir.join("window_measures.txt"), &window_measures_table(&cells, &config.strategies))?;
    write_text(&dir.join("normality.tsv"), &normality_tsv(&cells))?;
    for cell in &cells {
        write_text(&dir.join("plots").join(format!("{}_S{}.tsv", cell.id, cell.severity)), &plot_data(cell))?;
    }
    let missing = gaps(&cells);
    let gap_text: String = missing.iter().map(|g| format!("{g}\n")).collect();
    write_text(&dir.join("gaps.txt"), &gap_text)?;
    Ok(missing)
}

/// Dominance matrix only; also returns the text for printing.
pub fn write_stats(config: &ExperimentConfig, store: &Store) -> Result<String, HarnessError> {
    let cells = load_all(config, store)?;
    let text = dominance_table(&cells);
    write_text(&store.reports_dir().join("dominance.txt"), &text)?;
    write_text(&store.reports_dir().join("normality.tsv"), &normality_tsv(&cells))?;
    Ok(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasRow {
    pub id: G24Id,
    pub severity: u32,
    pub t: u64,
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
}

impl FeasRow {
    pub fn pass(&self) -> bool {
        self.lo <= self.ratio && self.ratio <= self.hi
    }
}

/// Slack around the expected share: 1.5 points for fixed shares, 2 points
/// for ranges.
pub fn expected_bracket(share: FeasibleShare) -> (f64, f64) {
    match share {
        FeasibleShare::Exact(_) => share.bracket(0.015),
        FeasibleShare::Range(..) => share.bracket(0.02),
    }
}

/// Monte Carlo feasible shares; static-constraint instances only at `t = 0`.
pub fn feasratio(config: &ExperimentConfig, samples: usize) -> Result<Vec<FeasRow>, HarnessError> {
    let mut jobs = Vec::new();
    for (id, severity) in config.cells() {
        let times = if id.has_dynamic_constraints() { 0..=config.times } else { 0..=0 };
        jobs.extend(times.map(|t| (id, severity, t)));
    }
    jobs.par_iter()
        .map(|&(id, severity, t)| {
            let inst = instance(config, id, severity)?;
            let seed = config.seed ^ (t << 32) ^ u64::from(severity) << 48;
            let ratio = feasible_region_ratio(&inst, t, samples, seed);
            let (lo, hi) = expected_bracket(id.expected_feasible_share());
            Ok(FeasRow { id, severity, t, ratio, lo, hi })
        })
        .collect()
}

pub fn feasratio_tsv(rows: &[FeasRow]) -> String {
    let mut out = String::from("instance\tS\tt\tratio\tlow\thigh\tpass\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}", r.id, r.severity, r.t, r.ratio, r.lo, r.hi, r.pass());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measures(off: f64, fr: f64) -> RunMeasures {
        RunMeasures {
            offline_error: Some(off),
            feasibility: fr,
            success: 0.0,
            average_evaluations: None,
            convergence: None,
            progress: Some(0.5),
        }
    }

    fn cell() -> CellData {
        let mk = |kind, base: f64| StrategyData {
            kind,
            runs: (0..6).map(|i| measures(base + i as f64 * 0.01, 1.0)).collect(),
            curves: vec![vec![base, base / 2.0]; 6],
            missing: 0,
        };
        CellData {
            id: G24Id::G24_5,
            severity: 20,
            strategies: vec![
                mk(StrategyKind::Epsilon, 0.1),
                mk(StrategyKind::Feasibility, 0.2),
                mk(StrategyKind::Penalty, 2.0),
                mk(StrategyKind::Stochastic, 0.15),
            ],
        }
    }

    #[test]
    fn offline_table_flags_lowest_mean() {
        let t = offline_error_table(&[cell()], &StrategyKind::ALL);
        let row = t.lines().nth(1).unwrap();
        assert!(row.contains("0.125±0.019*"), "{row}");
        assert_eq!(row.matches('*').count(), 1);
    }

    #[test]
    fn absent_measures_render_nan() {
        let t = window_measures_table(&[cell()], &StrategyKind::ALL);
        let ae = t.lines().find(|l| l.trim_start().starts_with("AE_t")).unwrap();
        assert_eq!(ae.matches("NaN").count(), 4);
        let tsv = measures_tsv(&[cell()]);
        assert!(tsv.lines().any(|l| l.contains("AE_t\tNaN\tNaN\t0")));
    }

    #[test]
    fn dominance_table_marks_penalty() {
        let t = dominance_table(&[cell()]);
        let row = t.lines().nth(2).unwrap();
        let cols: Vec<&str> = row.split_whitespace().collect();
        // Label takes two tokens; penalty is the third strategy column.
        assert_eq!(cols[4], "1(+),4(+)");
    }

    #[test]
    fn plot_means_per_generation() {
        let p = plot_data(&cell());
        assert_eq!(p.lines().next().unwrap(), "generation\tepsilon\tfeasibility\tpenalty\tstochastic");
        let row: Vec<f64> = p.lines().nth(2).unwrap().split('\t').map(|v| v.parse().unwrap()).collect();
        for (got, want) in row.iter().zip([2.0, 0.05, 0.1, 1.0, 0.075]) {
            assert!((got - want).abs() < 1e-12, "{row:?}");
        }
    }
}
