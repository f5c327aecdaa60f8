use thiserror::Error;

use crate::expr::{DomainError, ParseError};

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid time scale: {0}")]
    InvalidTimeScale(String),
    #[error("{t} is not a member of the time scale")]
    NotInTimeScale { t: f64 },
    #[error("window [{a}, {b}] contains at most one point of the time scale")]
    EmptyWindow { a: f64, b: f64 },
    #[error("{value} is not in the translation set of the time scale")]
    NotInTranslationSet { value: f64 },
    #[error("not regressive: 1 + {mu}*{p} = {factor}")]
    NotRegressive { p: f64, mu: f64, factor: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("weight is not positive at t = {t} (u = {value})")]
    NonpositiveWeight { t: f64, value: f64 },
    #[error("NonpositiveDecay: estimated inf of c_{index} is {value}")]
    NonpositiveDecay { index: usize, value: f64 },
    #[error("certificate unavailable: {0}")]
    CertificateUnavailable(CertificateIssue),
    #[error("tail bound needs lookback {needed} beyond the maximum {max}")]
    TailBoundUnachievable { needed: f64, max: f64 },
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("NotContractive: contraction factor {rho} >= 1")]
    NotContractive { rho: f64 },
    #[error("no convergence after {iterations} iterations (last delta {delta:e})")]
    MaxIterExceeded { iterations: usize, delta: f64 },
    #[error("history does not cover [{needed}, 0]")]
    HistoryIncomplete { needed: f64 },
    #[error("delayed lookup at {t} precedes the stored history")]
    DelayedLookupMiss { t: f64 },
    #[error("trajectories are defined on different grids")]
    GridMismatch,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Why a stability certificate could not be issued.
#[derive(Debug, Clone, PartialEq)]
pub enum CertificateIssue {
    /// `H_i(0) <= 0` for the given row.
    RootMissing { index: usize, h_at_zero: f64 },
    /// Every row is uncoupled; the overshoot constant is unbounded and a
    /// fallback certificate with `M = 1 + 1e-9` is attached.
    ZeroCoupling(Box<crate::model::StabilityCertificate>),
}

impl std::fmt::Display for CertificateIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CertificateIssue::RootMissing { index, h_at_zero } => {
                write!(f, "H_{}(0) = {} is not positive", index + 1, h_at_zero)
            }
            CertificateIssue::ZeroCoupling(cert) => write!(
                f,
                "ZeroCoupling: all coupling sums vanish, M is unbounded (fallback M = {})",
                cert.m
            ),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
