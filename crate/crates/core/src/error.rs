use num_complex::Complex64;
use thiserror::Error;

use crate::asymptotics::{DecayReport, Hypothesis};
use crate::measure_space::AtomId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("measure space must contain at least one atom")]
    EmptySpace,
    #[error("atom {index} has non-positive weight {weight}")]
    NonpositiveWeight { index: usize, weight: f64 },
    #[error("duplicate atom id {0}")]
    DuplicateId(AtomId),
    #[error("subset must contain at least one atom")]
    EmptySubset,
    #[error("unknown atom id {0}")]
    UnknownId(AtomId),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("fiber at atom {0} is numerically singular")]
    SingularFiber(AtomId),
    #[error("inverse norms are not essentially bounded: sup {sup:e} exceeds cap {cap:e}")]
    EssentiallyUnbounded { sup: f64, cap: f64 },
    #[error("{lambda} lies in the spectrum of the fiber at atom {atom}")]
    InSpectrum { atom: AtomId, lambda: Complex64 },
    #[error("eigenvalue iteration did not converge at atom {0}")]
    EigFailure(AtomId),
    #[error("matrix exponential failed at atom {0}")]
    ExpFailure(AtomId),
    #[error("Re(lambda) = {re} must exceed the growth bound {omega} by a margin")]
    BadLambda { re: f64, omega: f64 },
    #[error("truncation time is too short: tail factor {0:e}")]
    TruncationTooShort(f64),
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exponential bound violated: {0}")]
    BoundViolation(String),
    #[error("decay fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error("decay table does not decay on the fit window")]
    NoDecay,
    #[error("hypotheses violated: {which:?}")]
    HypothesisViolated {
        which: Vec<Hypothesis>,
        report: Box<DecayReport>,
    },
}
