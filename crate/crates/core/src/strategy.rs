//! Constraint-handling techniques behind one survivor-selection interface.
//!
//! All four techniques work on the normalized violation sum kept by a
//! [`ViolationContext`]; the raw violation stored on an [`Individual`] is only
//! used to decide feasibility.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::problem::Individual;

pub const DEFAULT_PENALTY_FACTOR: f64 = 2.5;
pub const DEFAULT_EQ_TOLERANCE: f64 = 1e-4;

/// Running per-constraint maxima of the raw violations seen in the current
/// time window. Each violation is divided by `max(running max, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationContext {
    max_g: Vec<f64>,
    max_h: Vec<f64>,
    eq_tolerance: f64,
}

impl ViolationContext {
    pub fn new(num_inequality: usize, num_equality: usize, eq_tolerance: f64) -> Self {
        Self { max_g: vec![0.0; num_inequality], max_h: vec![0.0; num_equality], eq_tolerance }
    }

    pub fn eq_tolerance(&self) -> f64 {
        self.eq_tolerance
    }

    pub fn max_inequality(&self) -> &[f64] {
        &self.max_g
    }

    pub fn max_equality(&self) -> &[f64] {
        &self.max_h
    }

    fn eq_excess(&self, h: f64) -> f64 {
        (h.abs() - self.eq_tolerance).max(0.0)
    }

    pub fn observe(&mut self, g: &[f64], h: &[f64]) {
        for (m, &v) in self.max_g.iter_mut().zip(g) {
            *m = m.max(v.max(0.0));
        }
        let excess: Vec<f64> = h.iter().map(|&v| self.eq_excess(v)).collect();
        for (m, e) in self.max_h.iter_mut().zip(excess) {
            *m = m.max(e);
        }
    }

    pub fn reset(&mut self) {
        self.max_g.iter_mut().for_each(|m| *m = 0.0);
        self.max_h.iter_mut().for_each(|m| *m = 0.0);
    }

    /// Normalized violation sum; zero iff the point is feasible.
    pub fn violation_sum(&self, g: &[f64], h: &[f64]) -> f64 {
        let ineq: f64 = g
            .iter()
            .zip(&self.max_g)
            .map(|(&v, &m)| v.max(0.0) / m.max(1.0))
            .sum();
        let eq: f64 = h
            .iter()
            .zip(&self.max_h)
            .map(|(&v, &m)| self.eq_excess(v) / m.max(1.0))
            .sum();
        ineq + eq
    }

    pub fn fitness(&self, ind: &Individual) -> Fitness {
        Fitness { f: ind.f, phi: self.violation_sum(&ind.g, &ind.h) }
    }
}

/// Objective value paired with a violation sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    pub f: f64,
    pub phi: f64,
}

impl Fitness {
    pub fn new(f: f64, phi: f64) -> Self {
        Self { f, phi }
    }
}

/// Outcome of a pairwise comparison; `First` is the incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    First,
    Second,
}

pub fn penalized_fitness(f: f64, phi: f64, factor: f64) -> f64 {
    f + factor * phi
}

/// Feasibility rules: feasible beats infeasible, feasible pairs compare by
/// objective, infeasible pairs by violation and then objective. Ties keep `a`.
pub fn deb_compare(a: Fitness, b: Fitness) -> Preference {
    let pick = |a_wins: bool| if a_wins { Preference::First } else { Preference::Second };
    match (a.phi == 0.0, b.phi == 0.0) {
        (true, true) => pick(a.f <= b.f),
        (true, false) => Preference::First,
        (false, true) => Preference::Second,
        (false, false) => {
            if a.phi != b.phi {
                pick(a.phi < b.phi)
            } else {
                pick(a.f <= b.f)
            }
        }
    }
}

/// ε-level comparison. With `strict` the objective test is `<`, otherwise
/// `<=`; `First` means `a` precedes `b` at level `eps`.
pub fn eps_compare(a: Fitness, b: Fitness, eps: f64, strict: bool) -> Preference {
    let by_objective = (a.phi <= eps && b.phi <= eps) || a.phi == b.phi;
    let a_wins = if by_objective {
        if strict {
            a.f < b.f
        } else {
            a.f <= b.f
        }
    } else {
        a.phi < b.phi
    };
    if a_wins {
        Preference::First
    } else {
        Preference::Second
    }
}

/// Stochastic ranking by bounded bubble sort. Returns indices into `items`
/// from best to worst rank.
pub fn sr_sort<R: Rng + ?Sized>(items: &[Fitness], pf: f64, rng: &mut R) -> Vec<usize> {
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..n {
        let mut swapped = false;
        for j in 0..n.saturating_sub(1) {
            let (a, b) = (items[order[j]], items[order[j + 1]]);
            let u: f64 = rng.gen();
            let swap = if (a.phi == 0.0 && b.phi == 0.0) || u < pf {
                a.f > b.f
            } else {
                a.phi > b.phi
            };
            if swap {
                order.swap(j, j + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    order
}

/// Decaying ε level, restarted at every time window.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonState {
    pub eps0: f64,
    pub eps: f64,
    /// Generation count after which ε is zero.
    pub tc: u64,
    pub cp: f64,
    /// Rank (1-based) of the member whose violation seeds `eps0`.
    pub theta: usize,
    /// Generations elapsed in the current window.
    pub generation: u64,
    window_open: bool,
}

impl EpsilonState {
    pub fn new(theta: usize, tc: u64, cp: f64) -> Self {
        Self { eps0: 0.0, eps: 0.0, tc: tc.max(1), cp, theta: theta.max(1), generation: 0, window_open: false }
    }

    /// ε after `generation` generations of the current window.
    pub fn level(&self, generation: u64) -> f64 {
        if generation == 0 {
            self.eps0
        } else if generation >= self.tc {
            0.0
        } else {
            self.eps0 * (1.0 - generation as f64 / self.tc as f64).powf(self.cp)
        }
    }

    pub fn close_window(&mut self) {
        self.window_open = false;
    }

    /// Starts a window from the population's violations on the first call
    /// after [`close_window`](Self::close_window), otherwise advances one
    /// generation. Returns the current ε.
    pub fn update(&mut self, violations: &[f64]) -> f64 {
        if self.window_open {
            self.generation += 1;
        } else {
            let mut sorted = violations.to_vec();
            sorted.sort_by(f64::total_cmp);
            let idx = self.theta.min(sorted.len()).saturating_sub(1);
            self.eps0 = sorted.get(idx).copied().unwrap_or(0.0);
            self.generation = 0;
            self.window_open = true;
        }
        self.eps = self.level(self.generation);
        self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Epsilon,
    Feasibility,
    Penalty,
    Stochastic,
}

impl StrategyKind {
    /// Column order used in reports.
    pub const ALL: [StrategyKind; 4] =
        [StrategyKind::Epsilon, StrategyKind::Feasibility, StrategyKind::Penalty, StrategyKind::Stochastic];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Epsilon => "epsilon",
            StrategyKind::Feasibility => "feasibility",
            StrategyKind::Penalty => "penalty",
            StrategyKind::Stochastic => "stochastic",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown strategy `{0}` (expected penalty, feasibility, epsilon or stochastic)")]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    pub pf: f64,
    pub cp: f64,
    pub theta_frac: f64,
    pub tc_frac: f64,
    pub penalty_factor: f64,
    pub eq_tolerance: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            pf: 0.45,
            cp: 5.0,
            theta_frac: 0.2,
            tc_frac: 0.2,
            penalty_factor: DEFAULT_PENALTY_FACTOR,
            eq_tolerance: DEFAULT_EQ_TOLERANCE,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SelectionError {
    #[error("{targets} targets but {trials} trials")]
    SizeMismatch { targets: usize, trials: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Technique {
    Penalty { factor: f64 },
    Feasibility,
    Epsilon(EpsilonState),
    Stochastic { pf: f64 },
}

/// Survivor selection for one run, with its window-scoped state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintHandler {
    kind: StrategyKind,
    technique: Technique,
    ctx: ViolationContext,
}

impl ConstraintHandler {
    /// `generations_per_window` sizes the ε cutoff `Tc`.
    pub fn new(
        kind: StrategyKind,
        params: &StrategyParams,
        num_inequality: usize,
        num_equality: usize,
        pop_size: usize,
        generations_per_window: f64,
    ) -> Self {
        let technique = match kind {
            StrategyKind::Penalty => Technique::Penalty { factor: params.penalty_factor },
            StrategyKind::Feasibility => Technique::Feasibility,
            StrategyKind::Epsilon => {
                let theta = (params.theta_frac * pop_size as f64).ceil() as usize;
                let tc = (params.tc_frac * generations_per_window).round().max(1.0) as u64;
                Technique::Epsilon(EpsilonState::new(theta.clamp(1, pop_size.max(1)), tc, params.cp))
            }
            StrategyKind::Stochastic => {
                if !(0.0..0.5).contains(&params.pf) {
                    eprintln!("warning: Pf = {} lets objective comparisons dominate", params.pf);
                }
                Technique::Stochastic { pf: params.pf }
            }
        };
        Self { kind, technique, ctx: ViolationContext::new(num_inequality, num_equality, params.eq_tolerance) }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn context(&self) -> &ViolationContext {
        &self.ctx
    }

    pub fn epsilon(&self) -> Option<&EpsilonState> {
        match &self.technique {
            Technique::Epsilon(state) => Some(state),
            _ => None,
        }
    }

    /// Feeds one fresh evaluation into the normalization maxima.
    pub fn observe(&mut self, ind: &Individual) {
        self.ctx.observe(&ind.g, &ind.h);
    }

    /// Forgets window-scoped state after a detected change.
    pub fn reset_window(&mut self) {
        self.ctx.reset();
        if let Technique::Epsilon(state) = &mut self.technique {
            state.close_window();
        }
    }

    /// Called once the population carries values for the new window.
    pub fn start_window(&mut self, population: &[Individual]) {
        if let Technique::Epsilon(state) = &mut self.technique {
            state.close_window();
            let violations: Vec<f64> = population.iter().map(|ind| self.ctx.violation_sum(&ind.g, &ind.h)).collect();
            state.update(&violations);
        }
    }

    /// Picks the next population from `targets` and their `trials`.
    pub fn select(
        &mut self,
        targets: Vec<Individual>,
        trials: Vec<Individual>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Individual>, SelectionError> {
        if targets.len() != trials.len() {
            return Err(SelectionError::SizeMismatch { targets: targets.len(), trials: trials.len() });
        }
        let ctx = &self.ctx;
        let survivors = match &mut self.technique {
            Technique::Penalty { factor } => {
                let factor = *factor;
                pairwise(targets, trials, |a, b| {
                    let (a, b) = (ctx.fitness(a), ctx.fitness(b));
                    if penalized_fitness(a.f, a.phi, factor) <= penalized_fitness(b.f, b.phi, factor) {
                        Preference::First
                    } else {
                        Preference::Second
                    }
                })
            }
            Technique::Feasibility => pairwise(targets, trials, |a, b| deb_compare(ctx.fitness(a), ctx.fitness(b))),
            Technique::Epsilon(state) => {
                let eps = state.eps;
                let next = pairwise(targets, trials, |a, b| eps_compare(ctx.fitness(a), ctx.fitness(b), eps, false));
                let violations: Vec<f64> = next.iter().map(|ind| ctx.violation_sum(&ind.g, &ind.h)).collect();
                state.update(&violations);
                next
            }
            Technique::Stochastic { pf } => {
                let n = targets.len();
                let mut union = targets;
                union.extend(trials);
                let scored: Vec<Fitness> = union.iter().map(|ind| ctx.fitness(ind)).collect();
                let order = sr_sort(&scored, *pf, rng);
                let mut slots: Vec<Option<Individual>> = union.into_iter().map(Some).collect();
                order[..n].iter().map(|&i| slots[i].take().expect("permutation")).collect()
            }
        };
        Ok(survivors)
    }
}

fn pairwise<F>(targets: Vec<Individual>, trials: Vec<Individual>, mut prefer: F) -> Vec<Individual>
where
    F: FnMut(&Individual, &Individual) -> Preference,
{
    targets
        .into_iter()
        .zip(trials)
        .map(|(target, trial)| match prefer(&target, &trial) {
            Preference::First => target,
            Preference::Second => trial,
        })
        .collect()
}
