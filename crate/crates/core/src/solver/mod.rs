//! Bounded solutions through the dichotomy convolution and Banach
//! iteration, forward simulation, residual checks and decay verification.

mod decay;
mod residual;
mod simulate;

pub use decay::{verify_decay, DecayReport, DecayRow};
pub use residual::{residual_check, ResidualReport};
pub use simulate::{simulate, Trajectory};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{derived_constants, CnnModel, Constants, Estimation};
use crate::timescale::{Grid, Position, Stencil, TimeScale};

/// Values `x_k ∈ ℝⁿ` at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
}

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> bool {
    a.len() == b.len()
        && a.nodes().iter().zip(b.nodes()).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
        && a.mu().iter().zip(b.mu()).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Vec<f64>>) -> Result<GridFunction> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let n = values.first().map_or(0, Vec::len);
        if values.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidArgument("ragged grid function".into()));
        }
        if let Some(k) = values.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite value at t = {}", grid.nodes()[k])));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> Result<GridFunction>
    where
        F: Fn(f64) -> Result<Vec<f64>>,
    {
        let values = grid.nodes().iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        GridFunction::new(grid, values)
    }

    pub fn constant(grid: Grid, v: &[f64]) -> GridFunction {
        let values = vec![v.to_vec(); grid.len()];
        GridFunction { grid, values }
    }

    pub fn n(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// `max_k max_i |x_i(t_k)|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Sup-norm distance; the grids must agree.
    pub fn distance(&self, other: &GridFunction) -> Result<f64> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .flat_map(|(u, v)| u.iter().zip(v).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max))
    }

    /// Restriction to the nodes inside `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> GridFunction {
        let r = self.grid.range_within(a, b);
        GridFunction { grid: self.grid.slice(r.clone()), values: self.values[r].to_vec() }
    }

    /// Value at `t`, interpolated cubically inside dense runs.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let st = self.grid.interpolation(t)?;
        Ok((0..self.n()).map(|i| st.apply(|q| self.values[q][i])).collect())
    }

    /// CSV with columns `t, mu, x_1..x_n`.
    pub fn to_csv(&self) -> String {
        states_csv(self.grid.nodes(), self.grid.mu(), &self.values)
    }
}

pub(crate) fn states_csv(nodes: &[f64], mu: &[f64], values: &[Vec<f64>]) -> String {
    let n = values.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "mu".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    w.write_record(&header).expect("in-memory write");
    for (k, v) in values.iter().enumerate() {
        let mut row = vec![nodes[k].to_string(), mu[k].to_string()];
        row.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Weights `(e^{-z}, w0, w1)` of the exponential trapezoid on a step of
/// length `h` with frozen decay `c`: the exact solution of
/// `x' = -c x + F` for `F` linear between its end values.
fn exp_trapezoid(c: f64, h: f64) -> (f64, f64, f64) {
    let z = c * h;
    let e = (-z).exp();
    if z < 1e-3 {
        let w0 = h * (0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0);
        let w1 = h * (0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0);
        (e, w0, w1)
    } else {
        let q = (1.0 - e * (1.0 + z)) / (z * z);
        (e, h * q, h * ((1.0 - e) / z - q))
    }
}

/// `x(t_k) = ∫_{t_0}^{t_k} e_{-c}(t_k, σ(s)) F(s) Δs` at every node,
/// componentwise; `c[k][i]`, `f[k][i]`.
pub(crate) fn convolve(grid: &Grid, c: &[Vec<f64>], f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let nodes = grid.nodes();
    let mu = grid.mu();
    let n = f.first().map_or(0, Vec::len);
    let mut x = Vec::with_capacity(nodes.len());
    x.push(vec![0.0; n]);
    for k in 0..nodes.len() - 1 {
        let prev = &x[k];
        let next: Vec<f64> = if mu[k] == 0.0 {
            let h = nodes[k + 1] - nodes[k];
            (0..n)
                .map(|i| {
                    let (e, w0, w1) = exp_trapezoid(0.5 * (c[k][i] + c[k + 1][i]), h);
                    e * prev[i] + w0 * f[k][i] + w1 * f[k + 1][i]
                })
                .collect()
        } else {
            (0..n).map(|i| (1.0 - mu[k] * c[k][i]) * prev[i] + mu[k] * f[k][i]).collect()
        };
        x.push(next);
    }
    x
}

/// Lookback making the discarded tail `≤ tail_tol`:
/// `max_i (1 + μ̄ c̲_i)/c̲_i · ln(F̄_i / (tail_tol c̲_i))`.
pub fn lookback(c_lo: &[f64], f_bar: &[f64], mu_bar: f64, tail_tol: f64) -> f64 {
    c_lo.iter()
        .zip(f_bar)
        .map(|(&c, &f)| {
            let arg = f / (tail_tol * c);
            if arg > 1.0 {
                (1.0 + mu_bar * c) / c * arg.ln()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Truncation controls for the dichotomy integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DichotomyOptions {
    pub tail_tol: f64,
    pub h_grid: f64,
    pub max_lookback: f64,
    /// Length of the window sampled to estimate `c̲` and `‖F‖`.
    pub probe_window: f64,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        DichotomyOptions { tail_tol: 1e-8, h_grid: 1e-3, max_lookback: 1e4, probe_window: 100.0 }
    }
}

/// Bounded solution `x_i(t) = ∫_{-∞}^t e_{-c_i}(t, σ(s)) F_i(s) Δs` of the
/// diagonal linear system, truncated with a certified tail.
pub fn dichotomy_solution<F>(ts: &TimeScale, c: &[Expr], f: F, t: f64, opts: &DichotomyOptions) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if !ts.contains(t) {
        return Err(Error::NotInTimeScale { t });
    }
    let t = ts.snap(t);
    let probe_start = ts.floor(t - opts.probe_window.min(opts.max_lookback));
    let probe = Grid::build(ts, probe_start, t, opts.h_grid, &[])?;
    let n = c.len();
    let mut c_lo = vec![f64::INFINITY; n];
    let mut f_bar = vec![0.0f64; n];
    for s in probe.sample_points() {
        let fv = f(s)?;
        for i in 0..n {
            c_lo[i] = c_lo[i].min(c[i].eval(s)?);
            f_bar[i] = f_bar[i].max(fv[i].abs());
        }
    }
    if let Some(i) = c_lo.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonpositiveDecay { index: i + 1, value: c_lo[i] });
    }
    let t_back = lookback(&c_lo, &f_bar, ts.mu_bar(), opts.tail_tol);
    if t_back > opts.max_lookback {
        return Err(Error::TailBoundUnachievable { needed: t_back, max: opts.max_lookback });
    }
    let start = ts.floor(t - t_back);
    if start >= t {
        return Ok(vec![0.0; n]);
    }
    let grid = Grid::build(ts, start, t, opts.h_grid, &[])?;
    let mut cv = Vec::with_capacity(grid.len());
    let mut fv = Vec::with_capacity(grid.len());
    for (k, &s) in grid.nodes().iter().enumerate() {
        let ck = c.iter().map(|e| e.eval(s)).collect::<std::result::Result<Vec<_>, _>>()?;
        let mu = grid.mu()[k];
        if let Some(i) = ck.iter().position(|ci| 1.0 - mu * ci <= 0.0) {
            return Err(Error::NotRegressive { p: -ck[i], mu, factor: 1.0 - mu * ck[i] });
        }
        cv.push(ck);
        fv.push(f(s)?);
    }
    Ok(convolve(&grid, &cv, &fv).pop().expect("nonempty grid"))
}

/// Coefficients tabulated at the nodes: `c[k][i]`, `a[k][i][j]`, ...
struct Tables {
    c: Vec<Vec<f64>>,
    a: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<Vec<f64>>>,
    input: Vec<Vec<f64>>,
}

fn tabulate(m: &CnnModel, grid: &Grid) -> Result<Tables> {
    let n = m.n();
    let row = |es: &[Expr], t: f64| -> Result<Vec<f64>> { es.iter().map(|e| Ok(e.eval(t)?)).collect() };
    let mut tables = Tables { c: Vec::new(), a: Vec::new(), b: Vec::new(), input: Vec::new() };
    for (k, &t) in grid.nodes().iter().enumerate() {
        let c = row(&m.c, t)?;
        let mu = grid.mu()[k];
        if let Some(i) = (0..n).find(|&i| 1.0 - mu * c[i] <= 0.0) {
            return Err(Error::NotRegressive { p: -c[i], mu, factor: 1.0 - mu * c[i] });
        }
        tables.c.push(c);
        tables.a.push(m.a.iter().map(|r| row(r, t)).collect::<Result<_>>()?);
        tables.b.push(m.b.iter().map(|r| row(r, t)).collect::<Result<_>>()?);
        tables.input.push(row(&m.inputs, t)?);
    }
    Ok(tables)
}

/// The operator `Φ` on a fixed grid: delayed samples are read by linear
/// interpolation of `f_j(φ_j)` between nodes, and samples before the grid
/// start take the first node's value.
pub struct Phi {
    model: CnnModel,
    grid: Grid,
    tables: Tables,
    /// `delays[i][j][k]` reproduces time `t_k - γ_ij`.
    delays: Vec<Vec<Vec<Stencil>>>,
}

impl Phi {
    pub fn new(m: &CnnModel, grid: Grid) -> Result<Phi> {
        let tables = tabulate(m, &grid)?;
        let n = m.n();
        let mut delays = vec![vec![Vec::with_capacity(grid.len()); n]; n];
        for (i, row) in delays.iter_mut().enumerate() {
            for (j, st) in row.iter_mut().enumerate() {
                let g = m.gamma[i][j];
                for (k, &t) in grid.nodes().iter().enumerate() {
                    let s = if g == 0.0 {
                        Stencil::node(k)
                    } else {
                        match grid.locate(t - g) {
                            Position::Before => Stencil::node(0),
                            _ => grid.linear_interpolation(t - g)?,
                        }
                    };
                    st.push(s);
                }
            }
        }
        Ok(Phi { model: m.clone(), grid, tables, delays })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `F_i(t_k)` built from `φ`.
    pub fn forcing(&self, phi: &GridFunction) -> Result<Vec<Vec<f64>>> {
        if !same_grid(&phi.grid, &self.grid) {
            return Err(Error::GridMismatch);
        }
        let n = self.model.n();
        let g = phi
            .values
            .iter()
            .map(|v| (0..n).map(|j| self.model.activations[j].eval(v[j])).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let tb = &self.tables;
        Ok((0..self.grid.len())
            .map(|k| {
                (0..n)
                    .map(|i| {
                        let mut s = tb.input[k][i];
                        for j in 0..n {
                            s += tb.a[k][i][j] * g[k][j] + tb.b[k][i][j] * self.delays[i][j][k].apply(|q| g[q][j]);
                        }
                        s
                    })
                    .collect()
            })
            .collect())
    }

    /// `Φ(φ)` on the whole grid, integrating from the grid start.
    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        let f = self.forcing(phi)?;
        Ok(GridFunction { grid: self.grid.clone(), values: convolve(&self.grid, &self.tables.c, &f) })
    }
}

/// `F̄_i = Σ_j (ā_ij + b̄_ij)(|f_j(0)| + α_j r) + Ī_i`.
fn forcing_bound(k: &Constants, r: f64) -> Vec<f64> {
    let n = k.c_lo.len();
    (0..n)
        .map(|i| {
            (0..n).map(|j| (k.a_sup[i][j] + k.b_sup[i][j]) * (k.f0[j].abs() + k.alpha[j] * r)).sum::<f64>()
                + k.i_sup[i]
        })
        .collect()
}

/// `Φ(φ)` on the part of `φ`'s window that has full left context
/// (`T_back + γ`).
pub fn phi_map(m: &CnnModel, est: &Estimation, phi: &GridFunction, tail_tol: f64, max_lookback: f64) -> Result<GridFunction> {
    let r = phi.sup_norm();
    let k = derived_constants(m, r.max(f64::MIN_POSITIVE), est)?;
    let t_back = lookback(&k.c_lo, &forcing_bound(&k, r), m.ts.mu_bar(), tail_tol);
    if t_back > max_lookback {
        return Err(Error::TailBoundUnachievable { needed: t_back, max: max_lookback });
    }
    let start = phi.grid.start() + t_back + m.max_delay();
    if start > phi.grid.end() {
        return Err(Error::WindowTooSmall(format!(
            "needs {} time units of left context, window has {}",
            t_back + m.max_delay(),
            phi.grid.end() - phi.grid.start()
        )));
    }
    let op = Phi::new(m, phi.grid.clone())?;
    Ok(op.apply(phi)?.restrict(start, phi.grid.end()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub r0: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub tail_tol: f64,
    pub h_grid: f64,
    /// Reporting window `[a, b]`.
    pub window: (f64, f64),
    pub max_lookback: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { r0: 1.0, tol: 1e-8, max_iter: 100, tail_tol: 1e-8, h_grid: 0.01, window: (0.0, 40.0), max_lookback: 1e4 }
    }
}

impl SolveOptions {
    pub fn from_config(cfg: &crate::config::ModelConfig) -> SolveOptions {
        let nm = &cfg.numerics;
        SolveOptions {
            r0: cfg.r0,
            tol: nm.fp_tol,
            max_iter: nm.max_iter,
            tail_tol: nm.tail_tol,
            h_grid: nm.h_grid,
            window: nm.solve_window(),
            max_lookback: nm.max_lookback(),
        }
    }
}

/// Converged fixed point with its convergence log.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    /// Restriction to the reporting window.
    pub solution: GridFunction,
    /// The iterate on the whole extended grid.
    pub full: GridFunction,
    pub iterations: usize,
    pub delta: f64,
    /// `delta · ρ / (1 - ρ)`.
    pub error_bound: f64,
    pub rho: f64,
    pub t_back: f64,
    /// Length of the left extension of the reporting window.
    pub extension: f64,
    pub deltas: Vec<f64>,
    /// `‖φ_k‖_∞` for each iterate.
    pub norms: Vec<f64>,
}

impl FixedPoint {
    /// Initial data on `[-γ, 0]` read off the fixed point, shifted by
    /// `offset` in every component.
    pub fn history(&self, m: &CnnModel, h_grid: f64, offset: f64) -> Result<GridFunction> {
        let g = m.max_delay();
        let grid = Grid::build_closed(&m.ts, -g, 0.0, h_grid, &m.kinks(-g, 0.0, h_grid))?;
        GridFunction::from_fn(grid, |t| Ok(self.full.at(t)?.into_iter().map(|v| v + offset).collect()))
    }
}

/// Extended grid for solving on `window`: `hops · (T_back + γ)` of left
/// context so the arbitrary start values decay below `tail_tol`.
pub(crate) fn solve_grid(m: &CnnModel, k: &Constants, opts: &SolveOptions) -> Result<(Grid, f64, f64)> {
    let ts = &m.ts;
    let rho = k.rho();
    let t_back = lookback(&k.c_lo, &forcing_bound(k, opts.r0), ts.mu_bar(), opts.tail_tol);
    if t_back > opts.max_lookback {
        return Err(Error::TailBoundUnachievable { needed: t_back, max: opts.max_lookback });
    }
    let hops = if rho > 0.0 {
        ((opts.tail_tol / (2.0 * opts.r0)).ln() / rho.ln()).ceil().max(1.0)
    } else {
        1.0
    };
    let extension = hops * (t_back + m.max_delay());
    let (a, b) = opts.window;
    for x in [a, b] {
        if !ts.contains(x) {
            return Err(Error::NotInTimeScale { t: x });
        }
    }
    let left = ts.floor(a - extension);
    let right = ts.ceil(b + (4.0 * opts.h_grid).max(ts.mu_bar()));
    // window ends as breakpoints so they are exact nodes
    let mut cuts = m.kinks(left, right, opts.h_grid);
    cuts.extend([a, b]);
    let grid = Grid::build(ts, left, right, opts.h_grid, &cuts)?;
    Ok((grid, t_back, extension))
}

/// Banach iteration `φ_{k+1} = Φ(φ_k)` from `φ_0 ≡ 0`.
pub fn fixed_point(m: &CnnModel, est: &Estimation, opts: &SolveOptions) -> Result<FixedPoint> {
    let k = derived_constants(m, opts.r0, est)?;
    let rho = k.rho();
    if rho >= 1.0 {
        return Err(Error::NotContractive { rho });
    }
    let (grid, t_back, extension) = solve_grid(m, &k, opts)?;
    let op = Phi::new(m, grid.clone())?;
    let mut phi = GridFunction::constant(grid, &vec![0.0; m.n()]);
    let mut deltas = Vec::new();
    let mut norms = vec![0.0];
    for it in 1..=opts.max_iter {
        let next = op.apply(&phi)?;
        let delta = next.distance(&phi)?;
        deltas.push(delta);
        norms.push(next.sup_norm());
        phi = next;
        if delta < opts.tol {
            let (a, b) = opts.window;
            return Ok(FixedPoint {
                solution: phi.restrict(a, b),
                full: phi,
                iterations: it,
                delta,
                error_bound: delta * rho / (1.0 - rho),
                rho,
                t_back,
                extension,
                deltas,
                norms,
            });
        }
    }
    Err(Error::MaxIterExceeded { iterations: opts.max_iter, delta: deltas.last().copied().unwrap_or(f64::NAN) })
}
