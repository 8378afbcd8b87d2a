//! DE/rand/1/bin with sentinel-based change detection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::problem::{evaluate, Bounds, DynamicProblem, EvalError, EvaluationClock, Individual};
use crate::strategy::{ConstraintHandler, SelectionError};
use crate::trace::{GenerationRecord, Improvement, RunTrace};

/// What happens to a trial component that leaves its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundPolicy {
    /// Redraw the component uniformly inside its range.
    #[default]
    Resample,
    /// Mirror the overshoot back into the range.
    Reflect,
    Clamp,
}

impl std::str::FromStr for BoundPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "resample" => Ok(Self::Resample),
            "reflect" => Ok(Self::Reflect),
            "clamp" => Ok(Self::Clamp),
            other => Err(format!("unknown bound policy `{other}`")),
        }
    }
}

impl std::fmt::Display for BoundPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Resample => "resample",
            Self::Reflect => "reflect",
            Self::Clamp => "clamp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeConfig {
    pub pop_size: usize,
    pub cr: f64,
    /// `F` is drawn uniformly from this closed range for every trial vector.
    pub f_min: f64,
    pub f_max: f64,
    /// 0-based population slots re-evaluated before their trial is built.
    pub sentinels: Vec<usize>,
    pub bound_policy: BoundPolicy,
    pub eq_tolerance: f64,
    pub seed: u64,
}

impl DeConfig {
    /// Sentinels at the first slot and the last slot of the first half.
    pub fn default_sentinels(pop_size: usize) -> Vec<usize> {
        let mid = (pop_size / 2).saturating_sub(1);
        if mid == 0 {
            vec![0]
        } else {
            vec![0, mid]
        }
    }

    pub fn new(pop_size: usize, seed: u64) -> Self {
        Self {
            pop_size,
            cr: 0.2,
            f_min: 0.2,
            f_max: 0.8,
            sentinels: Self::default_sentinels(pop_size),
            bound_policy: BoundPolicy::Resample,
            eq_tolerance: 1e-4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.pop_size < 4 {
            return Err(EngineError::Config(format!("population size {} is below 4", self.pop_size)));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(EngineError::Config(format!("CR = {} outside [0, 1]", self.cr)));
        }
        if !(self.f_min > 0.0 && self.f_min <= self.f_max && self.f_max <= 2.0) {
            return Err(EngineError::Config(format!("F range [{}, {}] is not within (0, 2]", self.f_min, self.f_max)));
        }
        if let Some(&s) = self.sentinels.iter().find(|&&s| s >= self.pop_size) {
            return Err(EngineError::Config(format!("sentinel slot {s} outside population of {}", self.pop_size)));
        }
        if self.eq_tolerance.is_nan() || self.eq_tolerance < 0.0 {
            return Err(EngineError::Config("equality tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("clock already used: {0} evaluations spent")]
    ClockInUse(u64),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}

/// Three distinct slots, all different from `i`, each uniform over what is left.
///
/// # Panics
/// If `n < 4`.
pub fn distinct_donors<R: Rng + ?Sized>(n: usize, i: usize, rng: &mut R) -> [usize; 3] {
    assert!(n >= 4, "need at least four individuals");
    let mut pick = |taken: &[usize]| loop {
        let r = rng.gen_range(0..n);
        if r != i && !taken.contains(&r) {
            return r;
        }
    };
    let r0 = pick(&[]);
    let r1 = pick(&[r0]);
    let r2 = pick(&[r0, r1]);
    [r0, r1, r2]
}

/// `v = x_r0 + F (x_r1 - x_r2)`.
pub fn mutate<R: Rng + ?Sized>(population: &[Individual], i: usize, f: f64, rng: &mut R) -> Vec<f64> {
    let [r0, r1, r2] = distinct_donors(population.len(), i, rng);
    population[r0]
        .x
        .iter()
        .zip(&population[r1].x)
        .zip(&population[r2].x)
        .map(|((a, b), c)| a + f * (b - c))
        .collect()
}

/// Binomial crossover; component `jrand` always comes from the mutant.
pub fn crossover<R: Rng + ?Sized>(target: &[f64], mutant: &[f64], cr: f64, rng: &mut R) -> Vec<f64> {
    let jrand = rng.gen_range(0..target.len());
    target
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(j, (&x, &v))| {
            let u: f64 = rng.gen();
            if u < cr || j == jrand {
                v
            } else {
                x
            }
        })
        .collect()
}

pub fn repair_bounds<R: Rng + ?Sized>(mut v: Vec<f64>, bounds: &Bounds, policy: BoundPolicy, rng: &mut R) -> Vec<f64> {
    for (j, vj) in v.iter_mut().enumerate() {
        let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
        if lo <= *vj && *vj <= hi {
            continue;
        }
        *vj = match policy {
            BoundPolicy::Resample => rng.gen_range(lo..=hi),
            _ if vj.is_nan() => rng.gen_range(lo..=hi),
            BoundPolicy::Clamp => vj.clamp(lo, hi),
            BoundPolicy::Reflect => {
                let mirrored = if *vj < lo { lo + (lo - *vj) } else { hi - (*vj - hi) };
                mirrored.clamp(lo, hi)
            }
        };
    }
    v
}

pub fn random_point<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> Vec<f64> {
    bounds.lower().iter().zip(bounds.upper()).map(|(&lo, &hi)| rng.gen_range(lo..=hi)).collect()
}

/// Values differing by more than this count as a change.
pub const CHANGE_TOLERANCE: f64 = 1e-12;

/// Re-evaluates the sentinel; if its objective or violation moved, re-evaluates
/// the rest of the population too. Every evaluation is charged to `clock` and
/// reported to `observer` with its 1-based index in the window.
pub fn detect_change<P: DynamicProblem + ?Sized>(
    population: &mut [Individual],
    sentinel: usize,
    problem: &P,
    clock: &mut EvaluationClock,
    eq_tolerance: f64,
    observer: &mut dyn FnMut(&Individual, u64),
) -> Result<bool, EvalError> {
    let mut eval = |x: &[f64], clock: &mut EvaluationClock| {
        let index = clock.next_index_in_window();
        let ind = evaluate(problem, x, clock, eq_tolerance)?;
        observer(&ind, index);
        Ok::<_, EvalError>(ind)
    };
    let fresh = eval(&population[sentinel].x, clock)?;
    let old = &population[sentinel];
    let changed = (fresh.f - old.f).abs() > CHANGE_TOLERANCE || (fresh.phi - old.phi).abs() > CHANGE_TOLERANCE;
    population[sentinel] = fresh;
    if changed {
        for i in (0..population.len()).filter(|&i| i != sentinel) {
            population[i] = eval(&population[i].x, clock)?;
        }
    }
    Ok(changed)
}

/// Feasibility-first order on raw values: feasible before infeasible, then
/// smaller violation, then smaller objective.
fn raw_rank_key(f: f64, phi: f64) -> (bool, f64, f64) {
    (phi > 0.0, phi, f)
}

fn raw_less(a: (f64, f64), b: (f64, f64)) -> bool {
    let (ka, kb) = (raw_rank_key(a.0, a.1), raw_rank_key(b.0, b.1));
    ka.partial_cmp(&kb) == Some(std::cmp::Ordering::Less)
}

/// Best-so-far of the current window over every evaluation made in it.
#[derive(Debug, Default)]
struct WindowTracker {
    t: u64,
    best: Option<(f64, f64)>,
    improvements: Vec<Improvement>,
}

impl WindowTracker {
    fn record(&mut self, ind: &Individual, index_in_window: u64) {
        if self.best.is_some() && ind.t != self.t {
            self.best = None;
        }
        self.t = ind.t;
        let candidate = (ind.f, ind.phi);
        let improves = match self.best {
            None => true,
            Some(best) => raw_less(candidate, best),
        };
        if improves {
            if ind.phi == 0.0 {
                self.improvements.push(Improvement { t: ind.t, eval_in_window: index_in_window, f: ind.f });
            }
            self.best = Some(candidate);
        }
    }
}

fn worst_member(population: &[Individual]) -> (f64, f64) {
    population
        .iter()
        .map(|ind| (ind.f, ind.phi))
        .reduce(|worst, c| if raw_less(worst, c) { c } else { worst })
        .unwrap_or((f64::NAN, f64::NAN))
}

/// Runs DE on `problem` until `clock` hits its budget.
///
/// All trial vectors of a generation are built from the population as it stood
/// when the generation started; selection happens once they are all evaluated.
/// A generation cut short by the budget is recorded without selection.
pub fn run<P: DynamicProblem + ?Sized>(
    problem: &P,
    handler: &mut ConstraintHandler,
    config: &DeConfig,
    clock: &mut EvaluationClock,
) -> Result<RunTrace, EngineError> {
    config.validate()?;
    if clock.total_evaluations() != 0 {
        return Err(EngineError::ClockInUse(clock.total_evaluations()));
    }
    let bounds = problem.bounds();
    let np = config.pop_size;
    let eq_tol = config.eq_tolerance;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tracker = WindowTracker::default();
    let mut rows = Vec::new();

    let mut population = Vec::with_capacity(np);
    for _ in 0..np {
        let x = random_point(bounds, &mut rng);
        let index = clock.next_index_in_window();
        match evaluate(problem, &x, clock, eq_tol) {
            Ok(ind) => {
                tracker.record(&ind, index);
                handler.observe(&ind);
                population.push(ind);
            }
            Err(EvalError::BudgetExhausted(_)) => break,
            Err(e) => return Err(e.into()),
        }
    }
    if population.len() == np {
        handler.start_window(&population);
    }

    let mut generation = 0u64;
    while population.len() == np && !clock.is_exhausted() {
        generation += 1;
        let spent_before = clock.total_evaluations();
        let mut change_detected = false;
        let mut cut_short = false;
        let mut trials = Vec::with_capacity(np);
        for i in 0..np {
            if config.sentinels.contains(&i) {
                let mut observer = |ind: &Individual, index: u64| {
                    tracker.record(ind, index);
                    handler.observe(ind);
                };
                match detect_change(&mut population, i, problem, clock, eq_tol, &mut observer) {
                    Ok(false) => {}
                    Ok(true) => {
                        change_detected = true;
                        handler.reset_window();
                        for ind in &population {
                            handler.observe(ind);
                        }
                        handler.start_window(&population);
                    }
                    Err(EvalError::BudgetExhausted(_)) => {
                        cut_short = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let f = rng.gen_range(config.f_min..=config.f_max);
            let mutant = mutate(&population, i, f, &mut rng);
            let trial = crossover(&population[i].x, &mutant, config.cr, &mut rng);
            let trial = repair_bounds(trial, bounds, config.bound_policy, &mut rng);
            let index = clock.next_index_in_window();
            match evaluate(problem, &trial, clock, eq_tol) {
                Ok(ind) => {
                    tracker.record(&ind, index);
                    handler.observe(&ind);
                    trials.push(ind);
                }
                Err(EvalError::BudgetExhausted(_)) => {
                    cut_short = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if clock.total_evaluations() == spent_before {
            break;
        }
        if !cut_short {
            population = handler.select(population, trials, &mut rng)?;
        }
        let (best_f, best_phi) = tracker.best.unwrap_or((f64::NAN, f64::NAN));
        let (worst_f, worst_phi) = worst_member(&population);
        rows.push(GenerationRecord {
            generation,
            evaluations: clock.total_evaluations(),
            t: tracker.t,
            best_f,
            best_phi,
            worst_f,
            worst_phi,
            change_detected,
        });
        if cut_short {
            break;
        }
    }

    Ok(RunTrace {
        fc: clock.fc(),
        max_times: clock.max_times(),
        evaluations: clock.total_evaluations(),
        rows,
        improvements: tracker.improvements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::g24::{make_instance, G24Id};
    use crate::strategy::{StrategyKind, StrategyParams};
    use proptest::prelude::*;

    fn bounds() -> Bounds {
        Bounds::new(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap()
    }

    fn member(x: Vec<f64>) -> Individual {
        Individual { x, f: 0.0, g: vec![], h: vec![], phi: 0.0, feasible: true, t: 0 }
    }

    #[test]
    fn donors_uniform_over_remaining_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, i, draws) = (20usize, 7usize, 190_000usize);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            let [r0, r1, r2] = distinct_donors(n, i, &mut rng);
            assert!(r0 != r1 && r1 != r2 && r0 != r2);
            assert!(![r0, r1, r2].contains(&i));
            counts[r0] += 1;
        }
        assert_eq!(counts[i], 0);
        let expected = draws as f64 / (n - 1) as f64;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &c)| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 18 degrees of freedom; 42.3 is the 0.999 quantile.
        assert!(chi2 < 42.3, "chi2 = {chi2}");
    }

    #[test]
    fn crossover_rate_matches_cr() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 50;
        let target = vec![0.0; d];
        let mutant = vec![1.0; d];
        let mut taken = 0usize;
        let mut total = 0usize;
        for _ in 0..4000 {
            let u = crossover(&target, &mutant, 0.2, &mut rng);
            taken += u.iter().filter(|&&v| v == 1.0).count();
            total += d;
        }
        // One forced component per vector on top of the CR share.
        let expected = 0.2 + 0.8 / d as f64;
        let rate = taken as f64 / total as f64;
        assert!((rate - expected).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn crossover_always_takes_one_mutant_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let u = crossover(&[0.0, 0.0], &[1.0, 1.0], 0.0, &mut rng);
            assert_eq!(u.iter().filter(|&&v| v == 1.0).count(), 1);
        }
    }

    #[test]
    fn mutate_is_affine_combination() {
        let pop: Vec<Individual> = (0..4).map(|k| member(vec![k as f64, 10.0 * k as f64])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = mutate(&pop, 0, 0.5, &mut rng);
        // Donors are {1,2,3} in some order, so v_1 = 10 v_0.
        assert!((v[1] - 10.0 * v[0]).abs() < 1e-12);
        assert!(v[0] >= 1.0 - 0.5 * 2.0 && v[0] <= 3.0 + 0.5 * 2.0);
    }

    #[test]
    fn resampled_components_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = bounds();
        let mut xs: Vec<f64> = (0..5000)
            .map(|_| repair_bounds(vec![-1.0, 2.0], &b, BoundPolicy::Resample, &mut rng)[0])
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let cdf = x / 3.0;
                (cdf - k as f64 / n).abs().max(((k + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // 1.63 / sqrt(n) is the 1% critical value.
        assert!(d < 1.63 / n.sqrt(), "D = {d}");
    }

    #[test]
    fn reflect_and_clamp() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = bounds();
        assert_eq!(repair_bounds(vec![-0.5, 4.5], &b, BoundPolicy::Reflect, &mut rng), vec![0.5, 3.5]);
        assert_eq!(repair_bounds(vec![-9.0, 2.0], &b, BoundPolicy::Reflect, &mut rng), vec![3.0, 2.0]);
        assert_eq!(repair_bounds(vec![-0.5, 4.5], &b, BoundPolicy::Clamp, &mut rng), vec![0.0, 4.0]);
    }

    proptest! {
        #[test]
        fn repair_lands_inside(x0 in -100.0..100.0f64, x1 in -100.0..100.0f64, seed in any::<u64>(), p in 0usize..3) {
            let policy = [BoundPolicy::Resample, BoundPolicy::Reflect, BoundPolicy::Clamp][p];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = bounds();
            let inside = b.contains(&[x0, x1]);
            let r = repair_bounds(vec![x0, x1], &b, policy, &mut rng);
            prop_assert!(b.contains(&r));
            if inside {
                prop_assert_eq!(r, vec![x0, x1]);
            }
        }
    }

    fn handler(kind: StrategyKind, np: usize) -> ConstraintHandler {
        ConstraintHandler::new(kind, &StrategyParams::default(), 2, 0, np, 1000.0 / 22.0)
    }

    #[test]
    fn budget_is_spent_exactly() {
        let problem = make_instance(G24Id::G24_1, 0.5, 20, 1000).unwrap();
        for kind in StrategyKind::ALL {
            let mut clock = EvaluationClock::new(1000, 10);
            let trace = run(&problem, &mut handler(kind, 20), &DeConfig::new(20, 3), &mut clock).unwrap();
            assert_eq!(trace.evaluations, 10_000);
            assert_eq!(trace.rows.last().unwrap().evaluations, 10_000);
            assert_eq!(trace.rows.last().unwrap().t, 9);
        }
    }

    #[test]
    fn changes_detected_once_per_window() {
        let problem = make_instance(G24Id::G24_1, 0.5, 20, 1000).unwrap();
        let mut clock = EvaluationClock::new(1000, 10);
        let trace =
            run(&problem, &mut handler(StrategyKind::Feasibility, 20), &DeConfig::new(20, 8), &mut clock).unwrap();
        let detections: Vec<u64> = trace.rows.iter().filter(|r| r.change_detected).map(|r| r.t).collect();
        assert_eq!(detections, (1..10).collect::<Vec<_>>());
    }

    #[test]
    fn static_problem_never_reports_change() {
        let problem = make_instance(G24Id::G24_f, 0.5, 20, 1000).unwrap();
        let mut clock = EvaluationClock::new(1000, 10);
        let trace = run(&problem, &mut handler(StrategyKind::Epsilon, 20), &DeConfig::new(20, 8), &mut clock).unwrap();
        assert!(trace.rows.iter().all(|r| !r.change_detected));
    }

    #[test]
    fn same_seed_same_trace() {
        let problem = make_instance(G24Id::G24_4, 0.5, 20, 1000).unwrap();
        let go = |seed| {
            let mut clock = EvaluationClock::new(1000, 10);
            run(&problem, &mut handler(StrategyKind::Stochastic, 20), &DeConfig::new(20, seed), &mut clock).unwrap()
        };
        assert_eq!(go(4), go(4));
        assert_ne!(go(4), go(5));
    }

    #[test]
    fn improvements_are_monotone_per_window() {
        let problem = make_instance(G24Id::G24_3, 0.5, 20, 1000).unwrap();
        let mut clock = EvaluationClock::new(1000, 10);
        let trace =
            run(&problem, &mut handler(StrategyKind::Feasibility, 20), &DeConfig::new(20, 2), &mut clock).unwrap();
        for pair in trace.improvements.windows(2) {
            if pair[0].t == pair[1].t {
                assert!(pair[1].f < pair[0].f);
                assert!(pair[1].eval_in_window > pair[0].eval_in_window);
            }
        }
        for imp in &trace.improvements {
            assert!((1..=1000).contains(&imp.eval_in_window));
        }
    }

    #[test]
    fn rejects_bad_config_and_used_clock() {
        let problem = make_instance(G24Id::G24_1, 0.5, 20, 1000).unwrap();
        let mut bad = DeConfig::new(20, 0);
        bad.cr = 1.5;
        let mut clock = EvaluationClock::new(1000, 10);
        assert!(matches!(run(&problem, &mut handler(StrategyKind::Penalty, 20), &bad, &mut clock), Err(EngineError::Config(_))));
        let mut used = EvaluationClock::with_evaluations(1000, 10, 5);
        assert!(matches!(
            run(&problem, &mut handler(StrategyKind::Penalty, 20), &DeConfig::new(20, 0), &mut used),
            Err(EngineError::ClockInUse(5))
        ));
    }
}
