//! Exact computation and verification of dependence measures between pairs
//! of finite σ-fields.
//!
//! A pair of finite σ-fields is represented by the joint probability-mass
//! matrix of their atoms ([`JointPmf`]). On top of it the crate provides the
//! measures ψ, λ, τ and the maximal correlation ρ ([`measures`]), checkers
//! for the inequalities relating them ([`theorem_suite`]), explicit
//! constructions ([`constructions`]) and a stochastic search for extremal
//! distributions ([`sharpness_search`]).

pub mod constructions;
pub mod error;
pub mod joint_pmf;
pub mod measures;
pub mod sharpness_search;
pub mod theorem_suite;

pub use error::{Error, Result};
pub use joint_pmf::{EventPair, JointPmf, Marginals, RandomStyle};
pub use measures::{full_report, DependenceReport, EventKind, MeasureOptions, Mode};
