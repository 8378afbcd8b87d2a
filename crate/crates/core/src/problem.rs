//! Dynamic constrained problems, evaluated individuals and the evaluation clock.
//!
//! A problem is frozen within a *time window* of `fc` consecutive evaluations.
//! The clock turns the running evaluation counter into the discrete time index
//! `t = floor(evaluations / fc)`; the evaluation that lands exactly on a
//! multiple of `fc` still belongs to the old window.

use thiserror::Error;

/// Box constraints `L_i <= x_i <= U_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("lower and upper bounds have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty bounds")]
    Empty,
    #[error("dimension {index}: lower bound {lower} is not below upper bound {upper}")]
    Inverted { index: usize, lower: f64, upper: f64 },
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BoundsError> {
        if lower.len() != upper.len() {
            return Err(BoundsError::LengthMismatch(lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(BoundsError::Empty);
        }
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.partial_cmp(&u) != Some(std::cmp::Ordering::Less) {
                return Err(BoundsError::Inverted { index, lower: l, upper: u });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| l <= v && v <= u)
    }

    /// All `2^D` corners of the box.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dimension();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|i| if mask & (1 << i) == 0 { self.lower[i] } else { self.upper[i] })
                    .collect()
            })
            .collect()
    }
}

/// Change parameters of a dynamic problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics {
    /// Objective severity.
    pub k: f64,
    /// Constraint severity.
    pub severity: u32,
    /// Evaluations per time step.
    pub fc: u64,
}

/// `min f(x, t)` subject to `g_i(x, t) <= 0`, `h_j(x, t) = 0` and `x` in the box.
///
/// Implementations must be pure in `(x, t)`.
pub trait DynamicProblem: Send + Sync {
    fn bounds(&self) -> &Bounds;

    fn dimension(&self) -> usize {
        self.bounds().dimension()
    }

    /// Number of inequality constraints `m`.
    fn num_inequality(&self) -> usize;

    /// Number of equality constraints `p`.
    fn num_equality(&self) -> usize {
        0
    }

    fn objective(&self, x: &[f64], t: u64) -> f64;

    /// Writes `g_1..g_m` at `(x, t)` into `out`.
    fn inequality(&self, x: &[f64], t: u64, out: &mut [f64]);

    /// Writes `h_1..h_p` at `(x, t)` into `out`.
    fn equality(&self, _x: &[f64], _t: u64, _out: &mut [f64]) {}

    fn dynamics(&self) -> Dynamics;

    fn has_dynamic_constraints(&self) -> bool;
}

/// Freezes a problem at one time index, whatever the clock says.
#[derive(Debug, Clone)]
pub struct FrozenAt<P> {
    pub inner: P,
    pub t: u64,
}

impl<P: DynamicProblem> DynamicProblem for FrozenAt<P> {
    fn bounds(&self) -> &Bounds {
        self.inner.bounds()
    }
    fn num_inequality(&self) -> usize {
        self.inner.num_inequality()
    }
    fn num_equality(&self) -> usize {
        self.inner.num_equality()
    }
    fn objective(&self, x: &[f64], _t: u64) -> f64 {
        self.inner.objective(x, self.t)
    }
    fn inequality(&self, x: &[f64], _t: u64, out: &mut [f64]) {
        self.inner.inequality(x, self.t, out)
    }
    fn equality(&self, x: &[f64], _t: u64, out: &mut [f64]) {
        self.inner.equality(x, self.t, out)
    }
    fn dynamics(&self) -> Dynamics {
        self.inner.dynamics()
    }
    fn has_dynamic_constraints(&self) -> bool {
        false
    }
}

/// Raw (unnormalized) violation: `sum max(0, g_i) + sum max(0, |h_j| - tol)`.
pub fn raw_violation(g: &[f64], h: &[f64], eq_tolerance: f64) -> f64 {
    let ineq: f64 = g.iter().map(|&v| v.max(0.0)).sum();
    let eq: f64 = h.iter().map(|&v| (v.abs() - eq_tolerance).max(0.0)).sum();
    ineq + eq
}

/// A decision vector together with the values it was last evaluated to.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub x: Vec<f64>,
    pub f: f64,
    /// Inequality constraint values `g_i(x, t)`.
    pub g: Vec<f64>,
    /// Equality constraint values `h_j(x, t)`.
    pub h: Vec<f64>,
    /// Raw violation sum; zero iff feasible.
    pub phi: f64,
    pub feasible: bool,
    /// Time index of the last evaluation.
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationClock {
    total: u64,
    fc: u64,
    t: u64,
    max_times: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("component {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds { index: usize, value: f64, lower: f64, upper: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("evaluation budget exhausted after {0} evaluations")]
    BudgetExhausted(u64),
}

impl EvaluationClock {
    /// # Panics
    /// If `fc` is zero.
    pub fn new(fc: u64, max_times: u64) -> Self {
        assert!(fc > 0, "change frequency must be positive");
        Self { total: 0, fc, t: 0, max_times }
    }

    /// Clock positioned after `total` evaluations.
    pub fn with_evaluations(fc: u64, max_times: u64, total: u64) -> Self {
        let mut clock = Self::new(fc, max_times);
        clock.total = total;
        clock.advance_time();
        clock
    }

    pub fn total_evaluations(&self) -> u64 {
        self.total
    }

    pub fn fc(&self) -> u64 {
        self.fc
    }

    pub fn max_times(&self) -> u64 {
        self.max_times
    }

    /// Cached time index; refreshed by [`advance_time`](Self::advance_time).
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn budget(&self) -> u64 {
        self.fc.saturating_mul(self.max_times)
    }

    pub fn is_exhausted(&self) -> bool {
        self.total >= self.budget()
    }

    /// Refreshes and returns `t = floor(total / fc)`.
    pub fn advance_time(&mut self) -> u64 {
        self.t = self.total / self.fc;
        self.t
    }

    /// 1-based position of the next evaluation within its window.
    pub fn next_index_in_window(&self) -> u64 {
        self.total % self.fc + 1
    }
}

/// Evaluates `x` at the clock's current time and charges one evaluation.
pub fn evaluate<P: DynamicProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    clock: &mut EvaluationClock,
    eq_tolerance: f64,
) -> Result<Individual, EvalError> {
    let bounds = problem.bounds();
    if x.len() != bounds.dimension() {
        return Err(EvalError::Dimension { expected: bounds.dimension(), got: x.len() });
    }
    for (index, (&value, (&lower, &upper))) in
        x.iter().zip(bounds.lower().iter().zip(bounds.upper())).enumerate()
    {
        if !(lower <= value && value <= upper) {
            return Err(EvalError::OutOfBounds { index, value, lower, upper });
        }
    }
    if clock.is_exhausted() {
        return Err(EvalError::BudgetExhausted(clock.total));
    }
    let t = clock.advance_time();
    let f = problem.objective(x, t);
    let mut g = vec![0.0; problem.num_inequality()];
    problem.inequality(x, t, &mut g);
    let mut h = vec![0.0; problem.num_equality()];
    problem.equality(x, t, &mut h);
    let phi = raw_violation(&g, &h, eq_tolerance);
    clock.total += 1;
    Ok(Individual { x: x.to_vec(), f, g, h, phi, feasible: phi == 0.0, t })
}
