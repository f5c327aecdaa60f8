use serde::Serialize;

use crate::error::Result;
use crate::model::CnnModel;

use super::GridFunction;

/// Largest deviation of a grid function from the network equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub dense_nodes: usize,
    pub scattered_nodes: usize,
    pub max_dense: f64,
    pub max_scattered: f64,
    /// `10 (h² + tail_tol)`.
    pub tol_dense: f64,
    /// `10 tail_tol`.
    pub tol_scattered: f64,
    /// Node with the largest residual relative to its tolerance.
    pub worst_t: f64,
    pub pass: bool,
}

/// Weights of the derivative at `xs[p]` of the interpolant through `xs`.
fn derivative_weights(xs: &[f64], p: usize) -> Vec<f64> {
    (0..xs.len())
        .map(|j| {
            if j == p {
                (0..xs.len()).filter(|&m| m != p).map(|m| 1.0 / (xs[p] - xs[m])).sum()
            } else {
                (0..xs.len())
                    .filter(|&m| m != j && m != p)
                    .fold(1.0 / (xs[j] - xs[p]), |acc, m| acc * (xs[p] - xs[m]) / (xs[j] - xs[m]))
            }
        })
        .collect()
}

/// Δ-derivative estimate at node `k`: central differences inside a smooth
/// piece, one-sided four-point differences at piece ends, forward
/// differences at right-scattered nodes. `None` if node `k` has no usable
/// neighbours.
fn derivative(x: &GridFunction, k: usize, i: usize) -> Option<f64> {
    let g = &x.grid;
    let v = |q: usize| x.values[q][i];
    if g.mu()[k] > 0.0 {
        return (k + 1 < g.len()).then(|| (v(k + 1) - v(k)) / g.mu()[k]);
    }
    let (rs, re) = g.run_of(k)?;
    // smooth piece [ps, pe] around node k; a breakpoint starts a new piece
    let mut ps = k;
    while ps > rs && !g.is_break(ps) {
        ps -= 1;
    }
    let mut pe = k + 1;
    while pe < re && !g.is_break(pe) {
        pe += 1;
    }
    let pe = pe.min(re);
    if pe <= k {
        return None;
    }
    let (lo, hi) = if k > ps { (k - 1, k + 1) } else { (k, (k + 3).min(pe)) };
    let w = derivative_weights(&g.nodes()[lo..=hi], k - lo);
    Some(w.iter().enumerate().map(|(q, wq)| wq * v(lo + q)).sum())
}

/// Residual of `x^Δ = -c x + A f(x) + B f(x(t - γ)) + I` at the nodes of `x`
/// inside `[a, b]`. Delayed states are interpolated from `x` itself.
pub fn residual_check(m: &CnnModel, x: &GridFunction, a: f64, b: f64, tail_tol: f64) -> Result<ResidualReport> {
    let n = m.n();
    let h = x.grid.h_grid();
    let tol_dense = 10.0 * (h * h + tail_tol);
    let tol_scattered = 10.0 * tail_tol;
    let mut rep = ResidualReport {
        dense_nodes: 0,
        scattered_nodes: 0,
        max_dense: 0.0,
        max_scattered: 0.0,
        tol_dense,
        tol_scattered,
        worst_t: f64::NAN,
        pass: true,
    };
    let mut worst = 0.0;
    for k in x.grid.range_within(a, b) {
        let t = x.grid.nodes()[k];
        let xs = &x.values[k];
        let fx = (0..n).map(|j| m.activations[j].eval(xs[j])).collect::<Result<Vec<_>>>()?;
        let mut fd = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let g = m.gamma[i][j];
                fd[i][j] = if g == 0.0 { fx[j] } else { m.activations[j].eval(x.at(t - g)?[j])? };
            }
        }
        let rhs = m.rhs(t, xs, &fx, &fd)?;
        let scattered = x.grid.mu()[k] > 0.0;
        let mut r = 0.0f64;
        let mut any = false;
        for (i, ri) in rhs.iter().enumerate() {
            if let Some(d) = derivative(x, k, i) {
                r = r.max((d - ri).abs());
                any = true;
            }
        }
        if !any {
            continue;
        }
        let tol = if scattered {
            rep.scattered_nodes += 1;
            rep.max_scattered = rep.max_scattered.max(r);
            tol_scattered
        } else {
            rep.dense_nodes += 1;
            rep.max_dense = rep.max_dense.max(r);
            tol_dense
        };
        if r / tol > worst || rep.worst_t.is_nan() {
            worst = r / tol;
            rep.worst_t = t;
        }
    }
    rep.pass = rep.max_dense <= tol_dense && rep.max_scattered <= tol_scattered;
    Ok(rep)
}
