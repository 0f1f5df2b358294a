//! Error type shared by construction, solving, and certification.

use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::duality::DualPotential;
use crate::order::ProjectionChecks;
use crate::weak_solver::WeakSolution;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong while building or solving.
///
/// Convergence variants carry the best object found so that callers can
/// inspect or keep a partial result instead of discarding the run.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input failed a structural invariant (weights, shapes, ranges).
    InvalidInput(String),
    /// Two objects that must agree on a dimension or length do not.
    DimensionMismatch {
        /// What was being compared.
        what: &'static str,
        /// Length or dimension expected.
        expected: usize,
        /// Length or dimension found.
        found: usize,
    },
    /// A restriction referenced atoms outside the relevant support.
    SupportMismatch(String),
    /// An exact pivoting method failed to terminate within its cap.
    NumericalFailure(String),
    /// The weak solver stopped above tolerance; the best iterate and
    /// its certificate are inside.
    ConvergenceFailure {
        /// Best optimality gap certified before stopping.
        gap: f64,
        /// Gap the caller asked for.
        tol: f64,
        /// Best iterate found, still a feasible coupling.
        solution: Box<WeakSolution>,
    },
    /// Dual ascent finished with a primal-dual gap above tolerance; the
    /// best potential and its dual value are inside.
    DualConvergenceFailure {
        /// Primal value minus best dual value at stop.
        gap: f64,
        /// Gap the caller asked for.
        tol: f64,
        /// Best potential found.
        potential: Box<DualPotential>,
        /// Dual value of that potential.
        dual_value: f64,
    },
    /// An exhaustive enumeration would exceed its hard cap.
    InstanceTooLarge {
        /// Work the request implies (subsets, cells, ...).
        size: u128,
        /// Cap the operation enforces.
        limit: u128,
    },
    /// A certification route needs a Lipschitz bound and the cost
    /// carries none, not even the finite-support fallback.
    MissingLipschitzBound,
    /// A projection result failed one of its advertised checks; the
    /// measured slacks are inside.
    PostconditionFailure(Box<ProjectionChecks>),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, found {found}"),
            Error::SupportMismatch(msg) => write!(f, "support mismatch: {msg}"),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
            Error::ConvergenceFailure { gap, tol, .. } => {
                write!(f, "solver stopped with gap {gap:.3e} above tolerance {tol:.3e}")
            }
            Error::DualConvergenceFailure { gap, tol, .. } => {
                write!(f, "dual ascent stopped with gap {gap:.3e} above tolerance {tol:.3e}")
            }
            Error::InstanceTooLarge { size, limit } => {
                write!(f, "instance too large: {size} exceeds cap {limit}")
            }
            Error::MissingLipschitzBound => {
                write!(f, "cost function carries no Lipschitz bound")
            }
            Error::PostconditionFailure(checks) => {
                write!(f, "projection failed postconditions: {checks}")
            }
        }
    }
}

impl core::error::Error for Error {}
