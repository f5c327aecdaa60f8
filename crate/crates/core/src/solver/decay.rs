use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::StabilityCertificate;
use crate::timescale::TimeScale;
use crate::tscalc::{circle_minus, exp_along_with};

use super::{same_grid, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub t: f64,
    pub mu: f64,
    /// `max_i |x_i(t) - x*_i(t)|`.
    pub diff: f64,
    /// `M e_{⊖λ}(t, 0) ‖ψ‖_∞`.
    pub bound: f64,
    pub ratio: f64,
}

/// Envelope check of one perturbed trajectory against the certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    #[serde(skip)]
    pub rows: Vec<DecayRow>,
    pub psi_norm: f64,
    pub worst_ratio: f64,
    /// Time of the worst ratio.
    pub worst_t: f64,
    pub violations: usize,
    /// First node where the envelope is exceeded.
    pub first_violation: Option<f64>,
    pub pass: bool,
    pub lambda: f64,
    pub m: f64,
    pub t0: f64,
}

impl DecayReport {
    /// CSV with columns `t, mu, diff, bound, ratio`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "mu", "diff", "bound", "ratio"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record([r.t, r.mu, r.diff, r.bound, r.ratio].map(|v| v.to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Check `‖x(t) - x*(t)‖ ≤ M e_{⊖λ}(t, t₀) ‖ψ‖_∞` at every node `t > t₀`,
/// where `t₀ = 0` is the right end of the history window and
/// `‖ψ‖_∞` is the largest history difference.
pub fn verify_decay(x: &Trajectory, x_star: &Trajectory, cert: &StabilityCertificate, ts: &TimeScale) -> Result<DecayReport> {
    if !same_grid(&x.grid, &x_star.grid) || !same_grid(&x.history.grid, &x_star.history.grid) {
        return Err(Error::GridMismatch);
    }
    if !ts.contains(x.grid.start()) {
        return Err(Error::NotInTimeScale { t: x.grid.start() });
    }
    let psi_norm =
        x.history.values.iter().zip(&x_star.history.values).map(|(a, b)| max_diff(a, b)).fold(0.0, f64::max);
    let lambda = cert.lambda;
    let e = exp_along_with(&x.grid, |_, mu| circle_minus(lambda, mu))?;
    let mut rows = Vec::with_capacity(x.grid.len());
    let (mut worst_ratio, mut worst_t) = (0.0f64, x.grid.start());
    let mut violations = 0;
    let mut first_violation = None;
    for k in 1..x.grid.len() {
        let t = x.grid.nodes()[k];
        let diff = max_diff(&x.states[k], &x_star.states[k]);
        let bound = cert.m * e[k] * psi_norm;
        let ratio = if bound > 0.0 {
            diff / bound
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if diff > bound {
            violations += 1;
            first_violation.get_or_insert(t);
        }
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_t = t;
        }
        rows.push(DecayRow { t, mu: x.grid.mu()[k], diff, bound, ratio });
    }
    Ok(DecayReport {
        rows,
        psi_norm,
        worst_ratio,
        worst_t,
        violations,
        first_violation,
        pass: violations == 0,
        lambda,
        m: cert.m,
        t0: x.grid.start(),
    })
}
