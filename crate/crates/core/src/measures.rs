//! Dynamic performance measures computed from run traces and reference optima.

use crate::optima::OptimaTable;
use crate::trace::RunTrace;

/// Distance to `f*` that still counts as reaching the optimum.
pub const SUCCESS_PRECISION: f64 = 1e-4;

/// What happened in one time window of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub t: u64,
    pub first_feasible_f: Option<f64>,
    /// Best feasible objective reached in the window.
    pub best_feasible_f: Option<f64>,
    pub success: bool,
    /// 1-based evaluation index within the window of the first success.
    pub evals_to_first_success: Option<u64>,
}

impl WindowRecord {
    pub fn any_feasible_found(&self) -> bool {
        self.first_feasible_f.is_some()
    }
}

/// Whether `f` is within the success precision of `f_star`.
pub fn reaches(f: f64, f_star: f64) -> bool {
    (f - f_star).abs() <= SUCCESS_PRECISION
}

pub fn window_records(trace: &RunTrace, optima: &OptimaTable) -> Vec<WindowRecord> {
    (0..trace.max_times)
        .map(|t| {
            let f_star = optima.f_star(t);
            let mut record = WindowRecord {
                t,
                first_feasible_f: None,
                best_feasible_f: None,
                success: false,
                evals_to_first_success: None,
            };
            for imp in trace.improvements_in(t) {
                record.first_feasible_f.get_or_insert(imp.f);
                record.best_feasible_f = Some(record.best_feasible_f.map_or(imp.f, |b: f64| b.min(imp.f)));
                if !record.success && f_star.is_some_and(|fs| reaches(imp.f, fs)) {
                    record.success = true;
                    record.evals_to_first_success = Some(imp.eval_in_window);
                }
            }
            record
        })
        .collect()
}

/// Per-generation error against `f*`, using the worst population member
/// while no feasible point has been found in the window.
pub fn generation_errors(trace: &RunTrace, optima: &OptimaTable) -> Option<Vec<f64>> {
    trace
        .rows
        .iter()
        .map(|row| {
            let f_star = optima.f_star(row.t)?;
            let f = if row.best_is_feasible() { row.best_f } else { row.worst_f };
            Some((f_star - f).abs())
        })
        .collect()
}

/// Mean of the per-generation errors; `None` if some window lacks an optimum.
pub fn offline_error(trace: &RunTrace, optima: &OptimaTable) -> Option<f64> {
    let errors = generation_errors(trace, optima)?;
    mean(&errors)
}

pub fn feasibility_ratio(windows: &[WindowRecord]) -> f64 {
    ratio(windows, WindowRecord::any_feasible_found)
}

pub fn success_ratio(windows: &[WindowRecord]) -> f64 {
    ratio(windows, |w| w.success)
}

fn ratio(windows: &[WindowRecord], pred: impl Fn(&WindowRecord) -> bool) -> f64 {
    if windows.is_empty() {
        return 0.0;
    }
    windows.iter().filter(|w| pred(w)).count() as f64 / windows.len() as f64
}

/// Mean evaluations-into-window of the first success over successful windows.
pub fn average_evaluations(windows: &[WindowRecord]) -> Option<f64> {
    let evals: Vec<f64> = windows.iter().filter_map(|w| w.evals_to_first_success).map(|e| e as f64).collect();
    mean(&evals)
}

pub fn convergence_score(ae: Option<f64>, sr: f64) -> Option<f64> {
    match ae {
        Some(ae) if sr > 0.0 => Some(ae / sr),
        _ => None,
    }
}

/// Log-ratio between the first and the best feasible objective of a window.
pub fn window_progress(f_first: f64, f_best: f64) -> f64 {
    let ratio = if f_best > 0.0 {
        f_first / f_best
    } else if f_best == 0.0 {
        (f_first + 1.0) / (f_best + 1.0)
    } else {
        let shift = 2.0 * f_best.abs();
        (f_first + shift) / (f_best + shift)
    };
    ratio.sqrt().ln().abs()
}

/// Mean progress over windows that found a feasible point.
pub fn progress_ratio(windows: &[WindowRecord]) -> Option<f64> {
    let values: Vec<f64> = windows
        .iter()
        .filter_map(|w| Some(window_progress(w.first_feasible_f?, w.best_feasible_f?)))
        .collect();
    mean(&values)
}

/// The six measures of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMeasures {
    pub offline_error: Option<f64>,
    pub feasibility: f64,
    pub success: f64,
    pub average_evaluations: Option<f64>,
    pub convergence: Option<f64>,
    pub progress: Option<f64>,
}

pub fn run_measures(trace: &RunTrace, optima: &OptimaTable) -> RunMeasures {
    let windows = window_records(trace, optima);
    let success = success_ratio(&windows);
    let ae = average_evaluations(&windows);
    RunMeasures {
        offline_error: offline_error(trace, optima),
        feasibility: feasibility_ratio(&windows),
        success,
        average_evaluations: ae,
        convergence: convergence_score(ae, success),
        progress: progress_ratio(&windows),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    OfflineError,
    Feasibility,
    Success,
    AverageEvaluations,
    Convergence,
    Progress,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::OfflineError,
        Measure::Feasibility,
        Measure::Success,
        Measure::AverageEvaluations,
        Measure::Convergence,
        Measure::Progress,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::OfflineError => "M_off_e",
            Measure::Feasibility => "FR_t",
            Measure::Success => "SR_t",
            Measure::AverageEvaluations => "AE_t",
            Measure::Convergence => "CS_t",
            Measure::Progress => "PR_t",
        }
    }

    pub fn of(self, m: &RunMeasures) -> Option<f64> {
        match self {
            Measure::OfflineError => m.offline_error,
            Measure::Feasibility => Some(m.feasibility),
            Measure::Success => Some(m.success),
            Measure::AverageEvaluations => m.average_evaluations,
            Measure::Convergence => m.convergence,
            Measure::Progress => m.progress,
        }
    }
}

/// Mean and sample standard deviation over the runs where a measure is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    /// NaN mean and std when `values` is empty; zero std for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let Some(mean) = mean(values) else {
            return Summary { mean: f64::NAN, std: f64::NAN, n: 0 };
        };
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { mean, std, n }
    }
}

pub fn summarize(runs: &[RunMeasures], measure: Measure) -> Summary {
    let values: Vec<f64> = runs.iter().filter_map(|m| measure.of(m)).collect();
    Summary::of(&values)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}
