use alloc::string::String;
use core::fmt;

use crate::torus::Domain;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    WrongDomain { expected: Domain, found: Domain },
    ComponentMismatch { expected: usize, found: usize },
    ThetaOutOfRange { component: usize, value: f64 },
    NonElliptic { kappa: f64 },
    NoConvergence { iterations: usize, residual: f64 },
    InvalidGrid(String),
    InvalidCoefficient(String),
    GridMismatch,
    MismatchedTheta,
    InvalidEpsilon(f64),
    Aliasing { max_frequency: i64, limit: i64 },
    NotBandLimited(String),
    InvalidConfig(String),
    /// A study failed at a given ε; the inner error says why.
    Study { eps: f64, metric: String, source: alloc::boxed::Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::WrongDomain { expected, found } => {
                write!(f, "field is in the {found:?} domain, expected {expected:?}")
            }
            Error::ComponentMismatch { expected, found } => {
                write!(f, "expected {expected} field components, found {found}")
            }
            Error::ThetaOutOfRange { component, value } => {
                write!(f, "quasimomentum component {component} = {value} lies outside [-pi, pi)")
            }
            Error::NonElliptic { kappa } => {
                write!(f, "coefficient is not elliptic (smallest eigenvalue {kappa:e})")
            }
            Error::NoConvergence { iterations, residual } => write!(
                f,
                "Krylov solver stopped after {iterations} iterations at relative residual {residual:e}"
            ),
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::InvalidCoefficient(msg) => write!(f, "invalid coefficient: {msg}"),
            Error::GridMismatch => f.write_str("fields live on different grids"),
            Error::MismatchedTheta => f.write_str("corrector and tensor were built at different quasimomenta"),
            Error::InvalidEpsilon(eps) => write!(f, "epsilon {eps} is not the reciprocal of a positive integer"),
            Error::Aliasing { max_frequency, limit } => write!(
                f,
                "coefficient frequency {max_frequency} is not resolved on the grid (limit {limit})"
            ),
            Error::NotBandLimited(msg) => write!(f, "source is not band-limited: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Study { eps, metric, source } => {
                write!(f, "study failed at eps = {eps} (metric {metric}): {source}")
            }
        }
    }
}

impl core::error::Error for Error {}
