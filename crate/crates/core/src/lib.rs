//! Differential evolution for dynamic constrained optimization, with
//! interchangeable constraint-handling strategies and the G24 test family.

pub mod engine;
pub mod g24;
pub mod measures;
pub mod optima;
pub mod problem;
pub mod stats;
pub mod strategy;
pub mod trace;

pub use engine::{run, BoundPolicy, DeConfig, EngineError};
pub use g24::{make_instance, G24Id, G24Instance};
pub use measures::{run_measures, Measure, RunMeasures, Summary};
pub use optima::{compute_oracle_optima, OptimaTable, OracleConfig};
pub use problem::{evaluate, Bounds, DynamicProblem, EvalError, EvaluationClock, FrozenAt, Individual};
pub use strategy::{ConstraintHandler, StrategyKind, StrategyParams};
pub use trace::{GenerationRecord, Improvement, RunTrace};
