//! Calculus on time scales and stability analysis of delayed cellular
//! neural networks posed on them.

pub mod config;
pub mod error;
pub mod expr;
pub mod model;
mod numeric;
pub mod solver;
pub mod timescale;
pub mod tscalc;
pub mod wpap;

pub use config::ModelConfig;
pub use error::{CertificateIssue, Error, Result};
pub use expr::{parse, Expr};
pub use model::{CnnModel, HypothesisReport, StabilityCertificate};
pub use timescale::{Grid, TimeScale};
