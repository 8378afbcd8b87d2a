//! The constrained members of the dynamic G24 family.
//!
//! Every instance lives on `x1 in [0, 3]`, `x2 in [0, 4]` and has two
//! inequality constraints. Objectives are built from
//! `X_i(x, t) = p_i(t) (x_i + q_i(t))` and constraints from
//! `Y_i(x, t) = r_i(t) (x_i + s_i(t))`; in this family `r_i = 1` and `s_1 = 0`
//! throughout. All per-instance choices are in [`DEFINITIONS`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::problem::{Bounds, DynamicProblem, Dynamics};

pub const X1_RANGE: (f64, f64) = (0.0, 3.0);
pub const X2_RANGE: (f64, f64) = (0.0, 4.0);
pub const SUPPORTED_SEVERITIES: [u32; 3] = [10, 20, 50];

/// Centres and radius of the circular optimum path of G24_8b.
const PEAK_C1: f64 = 1.470561702;
const PEAK_C2: f64 = 3.442094786232;
const PEAK_RADIUS: f64 = 0.858958496;

/// Variants keep the benchmark's own spelling.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum G24Id {
    G24_1,
    G24_f,
    G24_2,
    G24_3,
    G24_3b,
    G24_3f,
    G24_4,
    G24_5,
    G24_6a,
    G24_6b,
    G24_6c,
    G24_6d,
    G24_7,
    G24_8b,
}

impl G24Id {
    pub const ALL: [G24Id; 14] = [
        G24Id::G24_1,
        G24Id::G24_f,
        G24Id::G24_2,
        G24Id::G24_3,
        G24Id::G24_3b,
        G24Id::G24_3f,
        G24Id::G24_4,
        G24Id::G24_5,
        G24Id::G24_6a,
        G24Id::G24_6b,
        G24Id::G24_6c,
        G24Id::G24_6d,
        G24Id::G24_7,
        G24Id::G24_8b,
    ];

    pub fn name(self) -> &'static str {
        self.definition().name
    }

    pub fn definition(self) -> &'static Definition {
        &DEFINITIONS[self as usize]
    }

    pub fn has_dynamic_constraints(self) -> bool {
        !matches!(self.definition().shift, Shift::Fixed(_))
    }

    /// Feasible share of the search box as tabulated for the benchmark:
    /// a single value for static-constraint instances, a range otherwise.
    pub fn expected_feasible_share(self) -> FeasibleShare {
        self.definition().feasible
    }
}

impl fmt::Display for G24Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown G24 instance `{0}`")]
    UnknownInstance(String),
    #[error("severity {0} is not one of 10, 20, 50")]
    UnsupportedSeverity(u32),
    #[error("objective severity k must be positive, got {0}")]
    InvalidK(f64),
    #[error("change frequency must be positive")]
    InvalidFrequency,
}

impl FromStr for G24Id {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        G24Id::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConfigError::UnknownInstance(s.to_string()))
    }
}

/// Time-dependent scale `p_i(t)` of an objective term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Const(f64),
    /// `sin(k pi t + pi/2)`
    Wave,
    /// Changes on even `t` only: `sin(k pi t_e / 2 + pi/2)` with `t_e` the
    /// largest even integer `<= t`.
    EvenStep,
    /// Follows [`Scale::EvenStep`] one step later, starting from 0:
    /// `sin(k pi (t - 1) / 2 + pi/2)` for odd `t`, the previous value for even `t`.
    OddStep,
}

impl Scale {
    fn at(self, k: f64, t: u64) -> f64 {
        let half_wave = |s: u64| (k * PI * s as f64 / 2.0 + PI / 2.0).sin();
        match self {
            Scale::Const(v) => v,
            Scale::Wave => (k * PI * t as f64 + PI / 2.0).sin(),
            Scale::EvenStep => half_wave(t - t % 2),
            Scale::OddStep => {
                if t == 0 {
                    0.0
                } else {
                    let last_odd = if t % 2 == 1 { t } else { t - 1 };
                    half_wave(last_odd - 1)
                }
            }
        }
    }
}

/// Shift `s_2(t)` applied to the second constraint coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    Fixed(f64),
    /// `2 + t (x2_min - x2_max) / S`: the feasible region grows.
    Expanding,
    /// `t (x2_max - x2_min) / S`: the feasible region shrinks.
    Shrinking,
}

impl Shift {
    fn at(self, severity: u32, t: u64) -> f64 {
        let span = X2_RANGE.1 - X2_RANGE.0;
        match self {
            Shift::Fixed(v) => v,
            Shift::Expanding => 2.0 - t as f64 * span / severity as f64,
            Shift::Shrinking => t as f64 * span / severity as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// `-(X1 + X2)`
    Linear,
    /// `-3 exp(-sqrt(X1^2 + X2^2))` with `q` circling around a peak.
    CirclingPeak,
}

/// Constraint building blocks, evaluated at `(Y1, Y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `-2 Y1^4 + 8 Y1^3 - 8 Y1^2 + Y2 - 2`
    Quartic1,
    /// `-4 Y1^4 + 32 Y1^3 - 88 Y1^2 + 96 Y1 + Y2 - 36`
    Quartic2,
    /// `2 Y1 + 3 Y2 - 9`
    Line,
    /// `-1` on `Y1 in [0,1] u [2,3]`, else `1`
    TwoBands,
    /// `-1` on `Y1 in [0,0.5] u [2,2.5]`, else `1`
    NarrowBands,
    /// `-1` on `(Y1 in [0,1] and Y2 in [2,3]) or Y1 in [2,3]`, else `1`
    BlockAndBand,
    /// `-1` on `Y1 in [0,3]`, else `1`
    Band,
}

impl Constraint {
    fn value(self, y1: f64, y2: f64) -> f64 {
        let indicator = |inside: bool| if inside { -1.0 } else { 1.0 };
        let within = |v: f64, lo: f64, hi: f64| lo <= v && v <= hi;
        match self {
            Constraint::Quartic1 => {
                let y1_2 = y1 * y1;
                -2.0 * y1_2 * y1_2 + 8.0 * y1_2 * y1 - 8.0 * y1_2 + y2 - 2.0
            }
            Constraint::Quartic2 => {
                let y1_2 = y1 * y1;
                -4.0 * y1_2 * y1_2 + 32.0 * y1_2 * y1 - 88.0 * y1_2 + 96.0 * y1 + y2 - 36.0
            }
            Constraint::Line => 2.0 * y1 + 3.0 * y2 - 9.0,
            Constraint::TwoBands => indicator(within(y1, 0.0, 1.0) || within(y1, 2.0, 3.0)),
            Constraint::NarrowBands => indicator(within(y1, 0.0, 0.5) || within(y1, 2.0, 2.5)),
            Constraint::BlockAndBand => indicator(
                (within(y1, 0.0, 1.0) && within(y2, 2.0, 3.0)) || within(y1, 2.0, 3.0),
            ),
            Constraint::Band => indicator(within(y1, 0.0, 3.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeasibleShare {
    Exact(f64),
    Range(f64, f64),
}

impl FeasibleShare {
    /// Interval to check against, widened by `slack` on both sides.
    pub fn bracket(self, slack: f64) -> (f64, f64) {
        match self {
            FeasibleShare::Exact(v) => (v - slack, v + slack),
            FeasibleShare::Range(lo, hi) => (lo - slack, hi + slack),
        }
    }
}

/// One row of the coefficient table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Definition {
    pub name: &'static str,
    pub objective: Objective,
    pub p1: Scale,
    pub p2: Scale,
    pub constraints: [Constraint; 2],
    pub shift: Shift,
    pub feasible: FeasibleShare,
}

use Constraint::*;
use Scale::{Const, EvenStep, OddStep, Wave};

const POLY: [Constraint; 2] = [Quartic1, Quartic2];
const ONE: Scale = Const(1.0);

/// Indexed by `G24Id as usize`.
pub const DEFINITIONS: [Definition; 14] = [
    Definition { name: "G24_1", objective: Objective::Linear, p1: Wave, p2: ONE, constraints: POLY, shift: Shift::Fixed(0.0), feasible: FeasibleShare::Exact(0.442) },
    Definition { name: "G24_f", objective: Objective::Linear, p1: ONE, p2: ONE, constraints: POLY, shift: Shift::Fixed(0.0), feasible: FeasibleShare::Exact(0.442) },
    Definition { name: "G24_2", objective: Objective::Linear, p1: EvenStep, p2: OddStep, constraints: POLY, shift: Shift::Fixed(0.0), feasible: FeasibleShare::Exact(0.442) },
    Definition { name: "G24_3", objective: Objective::Linear, p1: ONE, p2: ONE, constraints: POLY, shift: Shift::Expanding, feasible: FeasibleShare::Range(0.071, 0.4921) },
    Definition { name: "G24_3b", objective: Objective::Linear, p1: Wave, p2: ONE, constraints: POLY, shift: Shift::Expanding, feasible: FeasibleShare::Range(0.071, 0.4921) },
    Definition { name: "G24_3f", objective: Objective::Linear, p1: ONE, p2: ONE, constraints: POLY, shift: Shift::Fixed(2.0), feasible: FeasibleShare::Exact(0.071) },
    Definition { name: "G24_4", objective: Objective::Linear, p1: Wave, p2: ONE, constraints: POLY, shift: Shift::Shrinking, feasible: FeasibleShare::Range(0.0, 0.442) },
    Definition { name: "G24_5", objective: Objective::Linear, p1: EvenStep, p2: OddStep, constraints: POLY, shift: Shift::Shrinking, feasible: FeasibleShare::Range(0.0, 0.442) },
    Definition { name: "G24_6a", objective: Objective::Linear, p1: Wave, p2: ONE, constraints: [Line, BlockAndBand], shift: Shift::Fixed(0.0), feasible: FeasibleShare::Exact(0.1668) },
    Definition { name: "G24_6b", objective: Objective::Linear, p1: Wave, p2: ONE, constraints: [Line, Band], shift: Shift::Fixed(0.0), feasible: FeasibleShare::Exact(0.5001) },
    Definition { name: "G24_6c", objective: Objective::Linear, p1: Wave, p2: ONE, constraints: [Line, TwoBands], shift: Shift::Fixed(0.0), feasible: FeasibleShare::Exact(0.3333) },
    Definition { name: "G24_6d", objective: Objective::Linear, p1: Wave, p2: ONE, constraints: [NarrowBands, BlockAndBand], shift: Shift::Fixed(0.0), feasible: FeasibleShare::Exact(0.2091) },
    Definition { name: "G24_7", objective: Objective::Linear, p1: ONE, p2: ONE, constraints: POLY, shift: Shift::Shrinking, feasible: FeasibleShare::Range(0.0, 0.442) },
    Definition { name: "G24_8b", objective: Objective::CirclingPeak, p1: ONE, p2: ONE, constraints: POLY, shift: Shift::Fixed(0.0), feasible: FeasibleShare::Exact(0.442) },
];

fn g24_bounds() -> &'static Bounds {
    static BOUNDS: OnceLock<Bounds> = OnceLock::new();
    BOUNDS.get_or_init(|| {
        Bounds::new(vec![X1_RANGE.0, X2_RANGE.0], vec![X1_RANGE.1, X2_RANGE.1])
            .expect("static G24 box is valid")
    })
}

/// A concrete G24 problem with its dynamics fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G24Instance {
    pub id: G24Id,
    pub k: f64,
    pub severity: u32,
    pub fc: u64,
}

/// Builds an instance, restricting the severity to 10, 20 or 50.
pub fn make_instance(id: G24Id, k: f64, severity: u32, fc: u64) -> Result<G24Instance, ConfigError> {
    if !SUPPORTED_SEVERITIES.contains(&severity) {
        return Err(ConfigError::UnsupportedSeverity(severity));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(ConfigError::InvalidK(k));
    }
    if fc == 0 {
        return Err(ConfigError::InvalidFrequency);
    }
    Ok(G24Instance { id, k, severity, fc })
}

impl G24Instance {
    pub fn definition(&self) -> &'static Definition {
        self.id.definition()
    }

    fn offsets(&self, t: u64) -> (f64, f64) {
        match self.definition().objective {
            Objective::Linear => (0.0, 0.0),
            Objective::CirclingPeak => {
                let angle = self.k * PI * t as f64;
                (-(PEAK_C1 + PEAK_RADIUS * angle.cos()), -(PEAK_C2 + PEAK_RADIUS * angle.sin()))
            }
        }
    }

    /// `(p1, p2)` at time `t`.
    pub fn scales(&self, t: u64) -> (f64, f64) {
        let def = self.definition();
        (def.p1.at(self.k, t), def.p2.at(self.k, t))
    }

    /// `s2` at time `t`.
    pub fn constraint_shift(&self, t: u64) -> f64 {
        self.definition().shift.at(self.severity, t)
    }

    pub fn is_feasible(&self, x: &[f64], t: u64) -> bool {
        let mut g = [0.0; 2];
        self.inequality(x, t, &mut g);
        g.iter().all(|&v| v <= 0.0)
    }
}

impl DynamicProblem for G24Instance {
    fn bounds(&self) -> &Bounds {
        g24_bounds()
    }

    fn num_inequality(&self) -> usize {
        2
    }

    fn objective(&self, x: &[f64], t: u64) -> f64 {
        let (p1, p2) = self.scales(t);
        let (q1, q2) = self.offsets(t);
        let big_x1 = p1 * (x[0] + q1);
        let big_x2 = p2 * (x[1] + q2);
        match self.definition().objective {
            Objective::Linear => -(big_x1 + big_x2),
            Objective::CirclingPeak => -3.0 * (-(big_x1 * big_x1 + big_x2 * big_x2).sqrt()).exp(),
        }
    }

    fn inequality(&self, x: &[f64], t: u64, out: &mut [f64]) {
        let y1 = x[0];
        let y2 = x[1] + self.constraint_shift(t);
        for (slot, c) in out.iter_mut().zip(self.definition().constraints) {
            *slot = c.value(y1, y2);
        }
    }

    fn dynamics(&self) -> Dynamics {
        Dynamics { k: self.k, severity: self.severity, fc: self.fc }
    }

    fn has_dynamic_constraints(&self) -> bool {
        self.id.has_dynamic_constraints()
    }
}

/// Monte Carlo share of the box that is feasible at time `t`.
pub fn feasible_region_ratio(instance: &G24Instance, t: u64, n_samples: usize, seed: u64) -> f64 {
    if n_samples == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let x = [rng.gen_range(X1_RANGE.0..=X1_RANGE.1), rng.gen_range(X2_RANGE.0..=X2_RANGE.1)];
        if instance.is_feasible(&x, t) {
            hits += 1;
        }
    }
    hits as f64 / n_samples as f64
}
