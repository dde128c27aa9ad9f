//! Potentials, Clarke subdifferentials and drift selections.

mod piecewise;
mod relu;

pub use piecewise::{example_potential, PiecewisePotential1D, PotentialSpec};
pub use relu::{Dataset, ReluNetPotential};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::ChainRng;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("expected {expected} pieces for {breakpoints} breakpoints, got {got}")]
    PieceCount { breakpoints: usize, expected: usize, got: usize },
    #[error("piece {index} has {len} coefficients; at most 4 (degree 3) are allowed")]
    DegreeTooHigh { index: usize, len: usize },
    #[error("breakpoints must be finite and strictly increasing (index {index})")]
    Breakpoints { index: usize },
    #[error("coefficients must be finite (piece {index})")]
    NonFinite { index: usize },
    #[error("potential is discontinuous at breakpoint {at}: jump {jump:e}")]
    Discontinuous { at: f64, jump: f64 },
    #[error("potential does not grow to +inf on the {side} side")]
    NotConfined { side: &'static str },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("dataset: {0}")]
    Dataset(String),
}

/// Closed interval `[lo, hi]`: the Clarke subdifferential of a 1D potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubdiffValue {
    pub lo: f64,
    pub hi: f64,
}

impl SubdiffValue {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty subdifferential [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn singleton(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Rule for picking a single drift value out of the Clarke subdifferential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Element of least magnitude.
    #[default]
    MinNorm,
    /// Lower endpoint.
    LeftLimit,
    /// Upper endpoint.
    RightLimit,
    Midpoint,
    /// Uniform on the interval, drawn from the caller's stream. Singletons
    /// consume no randomness.
    RandomConvex,
}

impl SelectionRule {
    pub const ALL: [SelectionRule; 5] = [
        SelectionRule::MinNorm,
        SelectionRule::LeftLimit,
        SelectionRule::RightLimit,
        SelectionRule::Midpoint,
        SelectionRule::RandomConvex,
    ];
}

/// Picks one element of `v` according to `rule`. The result always lies in
/// `[v.lo, v.hi]`.
pub fn select(v: SubdiffValue, rule: SelectionRule, rng: &mut ChainRng) -> f64 {
    if v.is_singleton() {
        return v.lo;
    }
    match rule {
        SelectionRule::MinNorm => 0.0f64.clamp(v.lo, v.hi),
        SelectionRule::LeftLimit => v.lo,
        SelectionRule::RightLimit => v.hi,
        SelectionRule::Midpoint => v.midpoint(),
        SelectionRule::RandomConvex => {
            let u: f64 = rng.random();
            (v.lo + u * (v.hi - v.lo)).clamp(v.lo, v.hi)
        }
    }
}

/// A potential that the samplers can drive: a value and a drift selection.
pub trait Potential: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes one element of the (Clarke) subdifferential at `x` into `out`.
    fn subgradient(&self, x: &[f64], rule: SelectionRule, rng: &mut ChainRng, out: &mut [f64]);
}
