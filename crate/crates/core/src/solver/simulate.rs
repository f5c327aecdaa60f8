use crate::error::{Error, Result};
use crate::model::CnnModel;
use crate::timescale::{Grid, Position, Stencil};

use super::{states_csv, GridFunction};

/// Forward solution of the delayed network from initial data on `[-γ, 0]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub states: Vec<Vec<f64>>,
    pub history: GridFunction,
}

impl Trajectory {
    pub fn to_grid_function(&self) -> GridFunction {
        GridFunction { grid: self.grid.clone(), values: self.states.clone() }
    }

    /// State at `t`: history for `t ≤ 0`, otherwise the trajectory.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        if t <= self.grid.start() && t >= self.history.grid.start() - 1e-12 {
            return self.history.at(t.min(self.history.grid.end()));
        }
        self.to_grid_function().at(t)
    }

    /// CSV with columns `t, mu, x_1..x_n`, history rows first.
    pub fn to_csv(&self) -> String {
        let h = &self.history;
        let mut nodes = Vec::new();
        let mut mu = Vec::new();
        let mut values = Vec::new();
        for k in 0..h.grid.len().saturating_sub(1) {
            nodes.push(h.grid.nodes()[k]);
            mu.push(h.grid.mu()[k]);
            values.push(h.values[k].clone());
        }
        nodes.extend_from_slice(self.grid.nodes());
        mu.extend_from_slice(self.grid.mu());
        values.extend(self.states.iter().cloned());
        states_csv(&nodes, &mu, &values)
    }
}

/// Interpolation stencil at `s` using only nodes `0..=last` of `grid`,
/// cubic inside a dense run and extrapolating past `last` when needed.
fn causal_stencil(grid: &Grid, last: usize, s: f64) -> Option<Stencil> {
    let i = match grid.locate(s) {
        Position::Node(i) if i <= last => return Some(Stencil::node(i)),
        Position::Node(i) | Position::Inside(i) => i,
        _ => return None,
    };
    let (rs, re) = grid.run_of(i)?;
    if rs > last || rs == re {
        return None;
    }
    let re = re.min(last);
    let (lo, hi) = if i < re {
        let lo = i.saturating_sub(1).max(rs);
        let hi = (lo + 3).min(re);
        (hi.saturating_sub(3).max(rs), hi)
    } else {
        (re.saturating_sub(3).max(rs), re)
    };
    if lo == hi {
        return Some(Stencil::node(lo));
    }
    Some(Stencil::lagrange(&grid.nodes()[lo..=hi], lo, s))
}

/// Delayed state lookup during the simulation.
struct Lookup<'a> {
    history: &'a GridFunction,
    grid: &'a Grid,
}

impl Lookup<'_> {
    fn state(&self, states: &[Vec<f64>], last: usize, j: usize, s: f64) -> Result<f64> {
        let tol = 1e-9 * self.grid.h_grid().min(1.0);
        if s <= self.grid.start() + tol {
            let h = self.history;
            if s < h.grid.start() - tol {
                return Err(Error::DelayedLookupMiss { t: s });
            }
            let st = h.grid.interpolation(s.clamp(h.grid.start(), h.grid.end())).map_err(|_| Error::DelayedLookupMiss { t: s })?;
            return Ok(st.apply(|q| h.values[q][j]));
        }
        let st = causal_stencil(self.grid, last, s).ok_or(Error::DelayedLookupMiss { t: s })?;
        Ok(st.apply(|q| states[q][j]))
    }
}

/// Step the network forward from the history to `t_end`: Euler on the
/// scale at right-scattered nodes, classical RK4 on dense edges.
pub fn simulate(m: &CnnModel, history: &GridFunction, t_end: f64, h_grid: f64) -> Result<Trajectory> {
    let n = m.n();
    let ts = &m.ts;
    let gamma = m.max_delay();
    let hg = &history.grid;
    let tol = 1e-9 * h_grid.min(1.0) + 1e-12;
    if history.n() != n || hg.end() < -tol || hg.end() > tol || hg.start() > ts.snap(-gamma) + tol {
        return Err(Error::HistoryIncomplete { needed: -gamma });
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    let grid = Grid::build(ts, 0.0, t_end, h_grid, &m.kinks(0.0, t_end, h_grid))?;
    let nodes = grid.nodes().to_vec();
    let mu = grid.mu().to_vec();
    let look = Lookup { history, grid: &grid };

    let mut states: Vec<Vec<f64>> = Vec::with_capacity(nodes.len());
    states.push(history.values[history.values.len() - 1].clone());

    let f_of = |x: &[f64]| -> Result<Vec<f64>> { (0..n).map(|j| m.activations[j].eval(x[j])).collect() };
    // rhs at time t with current state x; `last` bounds the trajectory
    // nodes usable for delayed lookups.
    let rhs = |states: &[Vec<f64>], last: usize, t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let fx = f_of(x)?;
        let mut fd = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let g = m.gamma[i][j];
                fd[i][j] = if g == 0.0 { fx[j] } else { m.activations[j].eval(look.state(states, last, j, t - g)?)? };
            }
        }
        m.rhs(t, x, &fx, &fd)
    };

    for k in 0..nodes.len() - 1 {
        let x = states[k].clone();
        let t = nodes[k];
        let next: Vec<f64> = if mu[k] > 0.0 {
            let d = rhs(&states, k, t, &x)?;
            (0..n).map(|i| x[i] + mu[k] * d[i]).collect()
        } else {
            let h = nodes[k + 1] - t;
            let axpy = |a: &[f64], s: f64, d: &[f64]| -> Vec<f64> { a.iter().zip(d).map(|(u, v)| u + s * v).collect() };
            let k1 = rhs(&states, k, t, &x)?;
            let k2 = rhs(&states, k, t + 0.5 * h, &axpy(&x, 0.5 * h, &k1))?;
            let k3 = rhs(&states, k, t + 0.5 * h, &axpy(&x, 0.5 * h, &k2))?;
            let k4 = rhs(&states, k, t + h, &axpy(&x, h, &k3))?;
            (0..n).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
        };
        if let Some(v) = next.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("simulation diverged at t = {} ({v})", nodes[k + 1])));
        }
        states.push(next);
    }
    Ok(Trajectory { grid, states, history: history.clone() })
}
