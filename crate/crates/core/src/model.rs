//! Delayed cellular neural networks on a time scale:
//!
//! ```text
//! x_i^Δ(t) = -c_i(t) x_i(t) + Σ_j a_ij(t) f_j(x_j(t)) + Σ_j b_ij(t) f_j(x_j(t - γ_ij)) + I_i(t)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{CertificateIssue, Error, Result};
use crate::expr::range::{kinks, range, Range, SupMode};
use crate::expr::{Expr, Var};
use crate::numeric::bracket;
use crate::timescale::{Grid, TimeScale};
use crate::wpap::{inv_ratio_probe, Weight};

/// Ratio above which `u(t + s) / u(t)` is flagged as unbounded.
pub const INV_RATIO_LIMIT: f64 = 1e6;
const EPS_BRACKET: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub f: Expr,
    /// Lipschitz constant.
    pub alpha: f64,
    /// `f(0)`.
    pub f0: f64,
}

impl Activation {
    pub fn new(f: Expr, alpha: f64) -> Result<Activation> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidModel(format!("Lipschitz constant must be positive, got {alpha}")));
        }
        let f0 = f.eval(0.0)?;
        Ok(Activation { f, alpha, f0 })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.f.eval(x)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub ts: TimeScale,
    pub c: Vec<Expr>,
    pub a: Vec<Vec<Expr>>,
    pub b: Vec<Vec<Expr>>,
    pub inputs: Vec<Expr>,
    pub gamma: Vec<Vec<f64>>,
    pub activations: Vec<Activation>,
    pub weight: Weight,
}

fn only_var(e: &Expr, allowed: Var, what: &str) -> Result<()> {
    let other = if allowed == Var::T { Var::X } else { Var::T };
    if e.uses_var(other) {
        let name = if allowed == Var::T { "t" } else { "x" };
        return Err(Error::InvalidModel(format!("{what} must be a function of `{name}`: {e}")));
    }
    Ok(())
}

impl CnnModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ts: TimeScale,
        c: Vec<Expr>,
        a: Vec<Vec<Expr>>,
        b: Vec<Vec<Expr>>,
        inputs: Vec<Expr>,
        gamma: Vec<Vec<f64>>,
        activations: Vec<Activation>,
        weight: Weight,
    ) -> Result<CnnModel> {
        let n = c.len();
        if n == 0 {
            return Err(Error::InvalidModel("at least one neuron is required".into()));
        }
        let square = |m: &Vec<Vec<Expr>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if !square(&a) || !square(&b) {
            return Err(Error::InvalidModel(format!("a and b must be {n}x{n}")));
        }
        if inputs.len() != n || activations.len() != n {
            return Err(Error::InvalidModel(format!("inputs and activations must have length {n}")));
        }
        if gamma.len() != n || gamma.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel(format!("gamma must be {n}x{n}")));
        }
        if let Some(g) = gamma.iter().flatten().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::InvalidModel(format!("delays must be nonnegative, got {g}")));
        }
        for e in c.iter().chain(a.iter().flatten()).chain(b.iter().flatten()).chain(&inputs) {
            only_var(e, Var::T, "coefficient")?;
        }
        only_var(weight.expr(), Var::T, "weight")?;
        for act in &activations {
            only_var(&act.f, Var::X, "activation")?;
        }
        Ok(CnnModel { ts, c, a, b, inputs, gamma, activations, weight })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// `γ = max γ_ij`.
    pub fn max_delay(&self) -> f64 {
        self.gamma.iter().flatten().copied().fold(0.0, f64::max)
    }

    fn coefficients(&self) -> impl Iterator<Item = &Expr> {
        self.c
            .iter()
            .chain(self.a.iter().flatten())
            .chain(self.b.iter().flatten())
            .chain(&self.inputs)
    }

    /// Zeros of `abs(...)` arguments of any coefficient inside `[a, b]`.
    pub fn kinks(&self, a: f64, b: f64, h_grid: f64) -> Vec<f64> {
        if matches!(self.ts, TimeScale::Lattice { .. }) {
            return Vec::new();
        }
        let step = (10.0 * h_grid).min(0.05);
        let mut out: Vec<f64> = self.coefficients().flat_map(|e| kinks(e, a, b, step)).collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        out
    }

    /// Right-hand side of the network at `t` with current state `x`
    /// and activations of the delayed states already applied.
    pub fn rhs(&self, t: f64, x: &[f64], fx: &[f64], f_delayed: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = -self.c[i].eval(t)? * x[i] + self.inputs[i].eval(t)?;
                for j in 0..n {
                    s += self.a[i][j].eval(t)? * fx[j] + self.b[i][j].eval(t)? * f_delayed[i][j];
                }
                Ok(s)
            })
            .collect()
    }
}

/// Window and mode used for sup/inf estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimation {
    pub window: (f64, f64),
    pub h_grid: f64,
    pub sup_mode: SupMode,
}

impl Default for Estimation {
    fn default() -> Self {
        Estimation { window: (-100.0, 100.0), h_grid: 0.01, sup_mode: SupMode::Pattern }
    }
}

impl Estimation {
    /// Grid over the window snapped into the scale, with coefficient kinks.
    pub fn grid(&self, m: &CnnModel) -> Result<Grid> {
        let (a, b) = (m.ts.ceil(self.window.0), m.ts.floor(self.window.1));
        if !(a < b) {
            return Err(Error::EmptyWindow { a: self.window.0, b: self.window.1 });
        }
        Grid::build(&m.ts, a, b, self.h_grid, &m.kinks(a, b, self.h_grid))
    }
}

/// Sup/inf constants and the derived quantities `η_i`, `Π_i`, `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub r0: f64,
    pub c_lo: Vec<f64>,
    pub c_hi: Vec<f64>,
    pub i_sup: Vec<f64>,
    pub a_sup: Vec<Vec<f64>>,
    pub b_sup: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub f0: Vec<f64>,
    pub eta: Vec<f64>,
    pub pi: Vec<f64>,
    pub l: f64,
    /// Whether every sup/inf came from an exact pattern.
    pub all_exact: bool,
    pub estimation: Estimation,
}

impl Constants {
    pub fn eta_over_c(&self) -> Vec<f64> {
        self.eta.iter().zip(&self.c_lo).map(|(e, c)| e / c).collect()
    }

    /// `max_i η_i / c̲_i + L`.
    pub fn bound(&self) -> f64 {
        self.eta_over_c().into_iter().fold(f64::NEG_INFINITY, f64::max) + self.l
    }

    pub fn c_min(&self) -> f64 {
        self.c_lo.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn pi_max(&self) -> f64 {
        self.pi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn pi_min(&self) -> f64 {
        self.pi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_i Π_i / c̲_i`, the contraction factor.
    pub fn rho(&self) -> f64 {
        self.pi.iter().zip(&self.c_lo).map(|(p, c)| p / c).fold(0.0, f64::max)
    }
}

/// Compute the constants, sampling on the estimation window where no
/// exact pattern applies.
pub fn derived_constants(m: &CnnModel, r0: f64, est: &Estimation) -> Result<Constants> {
    let grid = est.grid(m)?;
    let mut all_exact = true;
    let mut rng = |e: &Expr| -> Result<Range> {
        let r = range(e, &m.ts, &grid, est.sup_mode)?;
        all_exact &= r.exact;
        Ok(r)
    };
    let n = m.n();
    let mut c_lo = Vec::with_capacity(n);
    let mut c_hi = Vec::with_capacity(n);
    for (i, e) in m.c.iter().enumerate() {
        let r = rng(e)?;
        if !(r.lo > 0.0) {
            return Err(Error::NonpositiveDecay { index: i + 1, value: r.lo });
        }
        c_lo.push(r.lo);
        c_hi.push(r.hi);
    }
    let i_sup = m.inputs.iter().map(|e| Ok(rng(e)?.abs_sup())).collect::<Result<Vec<_>>>()?;
    let mut sup_matrix = |mat: &Vec<Vec<Expr>>| -> Result<Vec<Vec<f64>>> {
        mat.iter().map(|row| row.iter().map(|e| Ok(rng(e)?.abs_sup())).collect()).collect()
    };
    let a_sup = sup_matrix(&m.a)?;
    let b_sup = sup_matrix(&m.b)?;
    let alpha: Vec<f64> = m.activations.iter().map(|a| a.alpha).collect();
    let f0: Vec<f64> = m.activations.iter().map(|a| a.f0).collect();
    let mut eta = vec![0.0; n];
    let mut pi = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let w = a_sup[i][j] + b_sup[i][j];
            eta[i] += w * (f0[j].abs() + alpha[j] * r0);
            pi[i] += w * alpha[j];
        }
    }
    let l = i_sup.iter().zip(&c_lo).map(|(s, c)| s / c).fold(0.0, f64::max);
    for v in c_hi.iter().chain(&i_sup).chain(a_sup.iter().flatten()).chain(b_sup.iter().flatten()) {
        if !v.is_finite() {
            return Err(Error::InvalidModel("coefficient is unbounded on the window".into()));
        }
    }
    Ok(Constants { r0, c_lo, c_hi, i_sup, a_sup, b_sup, alpha, f0, eta, pi, l, all_exact, estimation: *est })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub constants: Constants,
    pub h1: bool,
    /// Largest sampled `|f(x) - f(y)| / |x - y|` per activation.
    pub lipschitz_observed: Vec<f64>,
    pub h2: bool,
    pub h3: bool,
    /// `min_t (1 - μ(t) c_i(t))` over the window nodes.
    pub regressivity_margin: f64,
    pub delays_in_translation_set: bool,
    pub h4: bool,
    pub weight_inf: f64,
    pub weight_inv_ratio: f64,
    pub h5: bool,
    /// `max_i η_i/c̲_i + L ≤ r₀`.
    pub h5_bound: bool,
    /// `max_i Π_i < min_i c̲_i`.
    pub h5_contraction: bool,
    /// `min_i Π_i < min_i c̲_i`, the weaker literal form.
    pub h5_literal: bool,
    /// `r₀ - max_i η_i/c̲_i - L`.
    pub margin_bound: f64,
    /// `min_i c̲_i - max_i Π_i`.
    pub margin_contraction: f64,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.h1 && self.h2 && self.h3 && self.h4 && self.h5
    }

    /// Human-readable table of hypotheses and constants.
    pub fn render_text(&self) -> String {
        let k = &self.constants;
        let mark = |b: bool| if b { "pass" } else { "FAIL" };
        let (a, b) = k.estimation.window;
        let mut s = String::new();
        s += &format!("constants estimated on window [{a}, {b}] (h = {}, sups {:?})\n", k.estimation.h_grid, k.estimation.sup_mode);
        for i in 0..k.c_lo.len() {
            s += &format!(
                "  i={}: c_lo={:.10} c_hi={:.10} I_sup={:.10} eta={:.10} Pi={:.10} eta/c_lo={:.10}\n",
                i + 1,
                k.c_lo[i],
                k.c_hi[i],
                k.i_sup[i],
                k.eta[i],
                k.pi[i],
                k.eta[i] / k.c_lo[i]
            );
        }
        s += &format!("  L={:.10} r0={}\n", k.l, k.r0);
        s += &format!("H1 {} (observed Lipschitz {:?})\n", mark(self.h1), self.lipschitz_observed);
        s += &format!("H2 {}\n", mark(self.h2));
        s += &format!(
            "H3 {} (min 1 - mu*c = {:.6}, delays in translation set: {})\n",
            mark(self.h3),
            self.regressivity_margin,
            self.delays_in_translation_set
        );
        s += &format!("H4 {} (inf u = {:.6}, max u(t+s)/u(t) = {:.6})\n", mark(self.h4), self.weight_inf, self.weight_inv_ratio);
        s += &format!(
            "H5 {}: max eta/c + L = {:.10} <= r0 [{}], max Pi = {:.10} < min c = {:.10} [{}], min Pi < min c [{}]\n",
            mark(self.h5),
            k.bound(),
            mark(self.h5_bound),
            k.pi_max(),
            k.c_min(),
            mark(self.h5_contraction),
            mark(self.h5_literal)
        );
        s += &format!("margins: bound {:.10}, contraction {:.10}\n", self.margin_bound, self.margin_contraction);
        s
    }
}

fn observed_lipschitz(f: &Activation, r0: f64) -> Result<f64> {
    let span = r0 + 1.0;
    let k = 200;
    let xs: Vec<f64> = (0..=k).map(|i| -span + 2.0 * span * i as f64 / k as f64).collect();
    let fs = xs.iter().map(|&x| f.eval(x)).collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            worst = worst.max((fs[i] - fs[j]).abs() / (xs[j] - xs[i]));
        }
    }
    Ok(worst)
}

fn smallest_translation(ts: &TimeScale) -> f64 {
    match ts {
        TimeScale::Reals => 1.0,
        TimeScale::Lattice { h, .. } => *h,
        TimeScale::PeriodicUnion { period, .. } => *period,
    }
}

/// Evaluate (H1)–(H5) for the model.
pub fn check_hypotheses(m: &CnnModel, r0: f64, est: &Estimation) -> Result<HypothesisReport> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidArgument(format!("r0 must be positive, got {r0}")));
    }
    let constants = derived_constants(m, r0, est)?;
    let grid = est.grid(m)?;

    let lipschitz_observed = m.activations.iter().map(|f| observed_lipschitz(f, r0)).collect::<Result<Vec<_>>>()?;
    let h1 = lipschitz_observed
        .iter()
        .zip(&m.activations)
        .all(|(obs, act)| *obs <= act.alpha * (1.0 + 1e-9) + 1e-12);

    let h2 = constants.c_hi.iter().all(|v| v.is_finite()) && constants.i_sup.iter().all(|v| v.is_finite());

    let mut regressivity_margin = f64::INFINITY;
    for (k, &t) in grid.nodes().iter().enumerate() {
        let mu = grid.mu()[k];
        for c in &m.c {
            regressivity_margin = regressivity_margin.min(1.0 - mu * c.eval(t)?);
        }
    }
    let delays_in_translation_set = m.gamma.iter().flatten().all(|g| m.ts.in_translation_set(*g));
    let h3 = constants.c_lo.iter().all(|c| *c > 0.0) && regressivity_margin > 0.0 && delays_in_translation_set;

    let weight = Weight::on_grid(m.weight.expr().clone(), &grid)?;
    let weight_inf = weight.u0_estimate().unwrap_or(f64::NAN);
    let mut shifts: Vec<f64> = m.gamma.iter().flatten().copied().filter(|g| *g > 0.0).collect();
    shifts.push(smallest_translation(&m.ts));
    let probe_shifts: Vec<f64> = shifts.iter().flat_map(|s| [*s, -*s]).collect();
    let weight_inv_ratio = inv_ratio_probe(&weight, &probe_shifts, grid.start(), grid.end())?;
    let h4 = constants.i_sup.iter().all(|v| v.is_finite()) && weight_inf > 0.0 && weight_inv_ratio < INV_RATIO_LIMIT;

    let h5_bound = constants.bound() <= r0;
    let h5_contraction = constants.pi_max() < constants.c_min();
    let h5_literal = constants.pi_min() < constants.c_min();
    let margin_bound = r0 - constants.bound();
    let margin_contraction = constants.c_min() - constants.pi_max();
    Ok(HypothesisReport {
        h1,
        lipschitz_observed,
        h2,
        h3,
        regressivity_margin,
        delays_in_translation_set,
        h4,
        weight_inf,
        weight_inv_ratio,
        h5: h5_bound && h5_contraction,
        h5_bound,
        h5_contraction,
        h5_literal,
        margin_bound,
        margin_contraction,
        constants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub lambda: f64,
    pub m: f64,
    /// Roots `ε_i` of `H_i`.
    pub eps: Vec<f64>,
    /// Final bisection brackets around each `ε_i`.
    pub brackets: Vec<(f64, f64)>,
    /// `H_i(λ)`.
    pub h_at_lambda: Vec<f64>,
    pub mu_bar: f64,
    pub gamma: f64,
    pub safety_factor: f64,
    pub c_lo: Vec<f64>,
    pub pi: Vec<f64>,
}

/// `H_i(ε) = c̲_i - ε - Σ_j α_j (ā_ij e^{ε μ̄} + b̄_ij e^{ε (γ + μ̄)})`.
pub fn h_fn(k: &Constants, i: usize, eps: f64, mu_bar: f64, gamma: f64) -> f64 {
    let mut s = k.c_lo[i] - eps;
    for j in 0..k.alpha.len() {
        s -= k.alpha[j] * (k.a_sup[i][j] * (eps * mu_bar).exp() + k.b_sup[i][j] * (eps * (gamma + mu_bar)).exp());
    }
    s
}

/// Certificate `(λ, M)` from precomputed constants.
pub fn certificate_from(k: &Constants, mu_bar: f64, gamma: f64, safety_factor: f64) -> Result<StabilityCertificate> {
    if !(safety_factor > 0.0 && safety_factor < 1.0) {
        return Err(Error::InvalidArgument(format!("safety factor must lie in (0, 1), got {safety_factor}")));
    }
    let n = k.c_lo.len();
    let mut eps = Vec::with_capacity(n);
    let mut brackets = Vec::with_capacity(n);
    for i in 0..n {
        let h0 = h_fn(k, i, 0.0, mu_bar, gamma);
        if !(h0 > 0.0) {
            return Err(Error::CertificateUnavailable(CertificateIssue::RootMissing { index: i, h_at_zero: h0 }));
        }
        let br = bracket(|e| h_fn(k, i, e, mu_bar, gamma), 0.0, k.c_lo[i], EPS_BRACKET);
        eps.push(0.5 * (br.0 + br.1));
        brackets.push(br);
    }
    let lambda = safety_factor * eps.iter().copied().fold(f64::INFINITY, f64::min);
    let h_at_lambda: Vec<f64> = (0..n).map(|i| h_fn(k, i, lambda, mu_bar, gamma)).collect();
    let ratios: Vec<f64> = k.c_lo.iter().zip(&k.pi).filter(|(_, p)| **p > 0.0).map(|(c, p)| c / p).collect();
    let zero_coupling = ratios.is_empty();
    let m = if zero_coupling { 1.0 + 1e-9 } else { ratios.into_iter().fold(f64::NEG_INFINITY, f64::max) };
    let cert = StabilityCertificate {
        lambda,
        m,
        eps,
        brackets,
        h_at_lambda,
        mu_bar,
        gamma,
        safety_factor,
        c_lo: k.c_lo.clone(),
        pi: k.pi.clone(),
    };
    if zero_coupling {
        return Err(Error::CertificateUnavailable(CertificateIssue::ZeroCoupling(Box::new(cert))));
    }
    Ok(cert)
}

/// Stability certificate with the default safety factor 0.5 and `r₀ = 1`
/// (the certificate does not depend on `r₀`).
pub fn stability_certificate(m: &CnnModel, est: &Estimation) -> Result<StabilityCertificate> {
    let k = derived_constants(m, 1.0, est)?;
    certificate_from(&k, m.ts.mu_bar(), m.max_delay(), 0.5)
}
