//! Weights, `Q_r` masses, weighted ergodic means and PAP₀ diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{range::kinks, Expr};
use crate::numeric::ls_slope;
use crate::timescale::{Grid, TimeScale};
use crate::tscalc::delta_integral_values;

/// A positive weight `u(t)` with its lower bound estimated on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    u: Expr,
    u0_estimate: Option<f64>,
}

impl Weight {
    pub fn new(u: Expr) -> Weight {
        Weight { u, u0_estimate: None }
    }

    /// `u ≡ 1`.
    pub fn unit() -> Weight {
        Weight::new(Expr::Num(1.0))
    }

    /// Weight with `u₀` estimated on `grid`; fails if `u ≤ 0` at a sample.
    pub fn on_grid(u: Expr, grid: &Grid) -> Result<Weight> {
        let mut w = Weight::new(u);
        let mut inf = f64::INFINITY;
        for t in grid.sample_points() {
            inf = inf.min(w.eval(t)?);
        }
        w.u0_estimate = Some(inf);
        Ok(w)
    }

    pub fn expr(&self) -> &Expr {
        &self.u
    }

    pub fn u0_estimate(&self) -> Option<f64> {
        self.u0_estimate
    }

    /// `u(t)`, checked positive.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let v = self.u.eval(t)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NonpositiveWeight { t, value: v })
        }
    }

    /// Same weight scaled by a positive constant.
    pub fn scaled(&self, k: f64) -> Weight {
        Weight::new(Expr::Binary(crate::expr::BinOp::Mul, Box::new(Expr::Num(k)), Box::new(self.u.clone())))
    }
}

fn check_radius(ts: &TimeScale, r: f64) -> Result<()> {
    if !(r > 0.0) || !ts.in_translation_set(r) {
        return Err(Error::NotInTranslationSet { value: r });
    }
    Ok(())
}

/// Grid over `Q_r = [t̄ - r, t̄ + r]_T` with the given extra breakpoints.
pub fn q_grid(ts: &TimeScale, r: f64, h_grid: f64, breakpoints: &[f64]) -> Result<Grid> {
    check_radius(ts, r)?;
    let c = ts.center();
    Grid::build(ts, ts.snap(c - r), ts.snap(c + r), h_grid, breakpoints)
}

fn kinks_of(exprs: &[&Expr], a: f64, b: f64, h_grid: f64) -> Vec<f64> {
    let step = (10.0 * h_grid).min(0.05);
    let mut out: Vec<f64> = exprs.iter().flat_map(|e| kinks(e, a, b, step)).collect();
    out.sort_by(f64::total_cmp);
    out
}

fn weight_values(grid: &Grid, u: &Weight) -> Result<Vec<f64>> {
    grid.nodes().iter().map(|&t| u.eval(t)).collect()
}

/// `u(Q_r)`.
pub fn weight_mass(ts: &TimeScale, u: &Weight, r: f64, h_grid: f64) -> Result<f64> {
    check_radius(ts, r)?;
    let c = ts.center();
    let breaks = kinks_of(&[u.expr()], c - r, c + r, h_grid);
    let grid = q_grid(ts, r, h_grid, &breaks)?;
    Ok(delta_integral_values(&grid, &weight_values(&grid, u)?))
}

/// Mass and mean of `t ↦ norm(t)` over `Q_r`.
pub fn mass_and_mean<G>(ts: &TimeScale, u: &Weight, norm: G, r: f64, h_grid: f64, breaks: &[f64]) -> Result<(f64, f64)>
where
    G: Fn(f64) -> Result<f64>,
{
    let grid = q_grid(ts, r, h_grid, breaks)?;
    let w = weight_values(&grid, u)?;
    let mass = delta_integral_values(&grid, &w);
    let gw = grid
        .nodes()
        .iter()
        .zip(&w)
        .map(|(&t, &wt)| Ok(norm(t)? * wt))
        .collect::<Result<Vec<_>>>()?;
    Ok((mass, delta_integral_values(&grid, &gw) / mass))
}

/// Max norm of a vector of expressions at `t`.
pub fn max_norm(g: &[Expr], t: f64) -> Result<f64> {
    g.iter().try_fold(0.0f64, |m, e| Ok(m.max(e.eval(t)?.abs())))
}

/// Weighted ergodic mean `(1/u(Q_r)) ∫_{Q_r} ‖g‖ u Δt`.
pub fn ergodic_mean(ts: &TimeScale, u: &Weight, g: &[Expr], r: f64, h_grid: f64) -> Result<f64> {
    check_radius(ts, r)?;
    let c = ts.center();
    let mut exprs: Vec<&Expr> = g.iter().collect();
    exprs.push(u.expr());
    let breaks = kinks_of(&exprs, c - r, c + r, h_grid);
    Ok(mass_and_mean(ts, u, |t| max_norm(g, t), r, h_grid, &breaks)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Vanishing,
    NonVanishing,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Vanishing => "vanishing",
            Verdict::NonVanishing => "non-vanishing",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Thresholds of the finite-radius trend test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub vanish_tol: f64,
    pub slope_cutoff: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { vanish_tol: 1e-3, slope_cutoff: -0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub radii: Vec<f64>,
    pub masses: Vec<f64>,
    pub means: Vec<f64>,
    pub trend_slope: f64,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
}

impl ErgodicReport {
    /// Build the report and its verdict from per-radius data.
    pub fn from_data(radii: Vec<f64>, masses: Vec<f64>, means: Vec<f64>, thresholds: Thresholds) -> ErgodicReport {
        let trend_slope = if means.iter().all(|m| *m > 0.0) {
            let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
            let ly: Vec<f64> = means.iter().map(|m| m.ln()).collect();
            ls_slope(&lx, &ly)
        } else {
            ls_slope(&radii, &means)
        };
        let n = means.len();
        let last = means.last().copied().unwrap_or(f64::NAN);
        let monotone = means[n / 2..].windows(2).all(|w| w[1] <= w[0]);
        let verdict = if monotone && last < thresholds.vanish_tol {
            Verdict::Vanishing
        } else if last > 10.0 * thresholds.vanish_tol && trend_slope >= thresholds.slope_cutoff {
            Verdict::NonVanishing
        } else {
            Verdict::Inconclusive
        };
        ErgodicReport { radii, masses, means, trend_slope, verdict, thresholds }
    }

    pub fn final_mean(&self) -> f64 {
        self.means.last().copied().unwrap_or(f64::NAN)
    }

    /// CSV with columns `r,mass,mean`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["r", "mass", "mean"]).expect("in-memory write");
        for ((r, m), g) in self.radii.iter().zip(&self.masses).zip(&self.means) {
            w.write_record([r.to_string(), m.to_string(), g.to_string()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// JSON summary with the verdict, slope and thresholds.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict.to_string(),
            "trend_slope": self.trend_slope,
            "final_mean": self.final_mean(),
            "vanish_tol": self.thresholds.vanish_tol,
            "slope_cutoff": self.thresholds.slope_cutoff,
        })
    }
}

fn check_radii(ts: &TimeScale, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("at least one radius is required".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must be increasing".into()));
    }
    radii.iter().try_for_each(|&r| check_radius(ts, r))
}

/// Diagnostic for an arbitrary scalar norm function; `breaks` lists kinks
/// to keep as nodes.
pub fn diagnostic_with<G>(
    ts: &TimeScale,
    u: &Weight,
    norm: G,
    radii: &[f64],
    h_grid: f64,
    breaks: &[f64],
    thresholds: Thresholds,
) -> Result<ErgodicReport>
where
    G: Fn(f64) -> Result<f64>,
{
    check_radii(ts, radii)?;
    let mut masses = Vec::with_capacity(radii.len());
    let mut means = Vec::with_capacity(radii.len());
    for &r in radii {
        let (m, g) = mass_and_mean(ts, u, &norm, r, h_grid, breaks)?;
        masses.push(m);
        means.push(g);
    }
    Ok(ErgodicReport::from_data(radii.to_vec(), masses, means, thresholds))
}

fn window_kinks(ts: &TimeScale, exprs: &[&Expr], radii: &[f64], shift: f64, h_grid: f64) -> Vec<f64> {
    let r = radii.last().copied().unwrap_or(0.0);
    let c = ts.center();
    kinks_of(exprs, c - r - shift, c + r - shift, h_grid).into_iter().map(|k| k + shift).collect()
}

/// PAP₀ diagnostic of `g` over the given radii.
pub fn pap0_diagnostic(
    ts: &TimeScale,
    u: &Weight,
    g: &[Expr],
    radii: &[f64],
    h_grid: f64,
    thresholds: Thresholds,
) -> Result<ErgodicReport> {
    let mut exprs: Vec<&Expr> = g.iter().collect();
    exprs.push(u.expr());
    let breaks = window_kinks(ts, &exprs, radii, 0.0, h_grid);
    diagnostic_with(ts, u, |t| max_norm(g, t), radii, h_grid, &breaks, thresholds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationProbe {
    pub original: ErgodicReport,
    pub shifted: ErgodicReport,
    /// Final mean of the shift over final mean of the original.
    pub final_ratio: f64,
}

/// Diagnostics for `g` and `g(· - τ)`.
pub fn translation_invariance_probe(
    ts: &TimeScale,
    u: &Weight,
    g: &[Expr],
    tau: f64,
    radii: &[f64],
    h_grid: f64,
    thresholds: Thresholds,
) -> Result<TranslationProbe> {
    if !ts.in_translation_set(tau) {
        return Err(Error::NotInTranslationSet { value: tau });
    }
    let original = pap0_diagnostic(ts, u, g, radii, h_grid, thresholds)?;
    let exprs: Vec<&Expr> = g.iter().collect();
    let mut breaks = window_kinks(ts, &exprs, radii, tau, h_grid);
    breaks.extend(window_kinks(ts, &[u.expr()], radii, 0.0, h_grid));
    breaks.sort_by(f64::total_cmp);
    let shifted = diagnostic_with(ts, u, |t| max_norm(g, t - tau), radii, h_grid, &breaks, thresholds)?;
    let final_ratio = shifted.final_mean() / original.final_mean();
    Ok(TranslationProbe { original, shifted, final_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionProbe {
    pub residual: ErgodicReport,
    /// Means of `|φ₂(· - τ)|` per radius.
    pub phi2_means: Vec<f64>,
    pub lipschitz: f64,
    /// Whether `mean(residual) ≤ L · mean(|φ₂|)` (plus 1e-9) at every radius.
    pub bound_holds: bool,
}

/// Diagnostic for `t ↦ f(φ₁(t-τ) + φ₂(t-τ)) - f(φ₁(t-τ))`.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_composition_probe(
    f: &Expr,
    lipschitz: f64,
    phi1: &Expr,
    phi2: &Expr,
    tau: f64,
    ts: &TimeScale,
    u: &Weight,
    radii: &[f64],
    h_grid: f64,
    thresholds: Thresholds,
) -> Result<CompositionProbe> {
    if !ts.in_translation_set(tau) {
        return Err(Error::NotInTranslationSet { value: tau });
    }
    let mut breaks = window_kinks(ts, &[phi1, phi2], radii, tau, h_grid);
    breaks.extend(window_kinks(ts, &[u.expr()], radii, 0.0, h_grid));
    breaks.sort_by(f64::total_cmp);
    let residual_at = |t: f64| -> Result<f64> {
        let a = phi1.eval(t - tau)?;
        let b = phi2.eval(t - tau)?;
        Ok((f.eval(a + b)? - f.eval(a)?).abs())
    };
    let residual = diagnostic_with(ts, u, residual_at, radii, h_grid, &breaks, thresholds)?;
    let phi2_means = radii
        .iter()
        .map(|&r| Ok(mass_and_mean(ts, u, |t| Ok(phi2.eval(t - tau)?.abs()), r, h_grid, &breaks)?.1))
        .collect::<Result<Vec<_>>>()?;
    let bound_holds = residual.means.iter().zip(&phi2_means).all(|(m, p)| *m <= lipschitz * p + 1e-9);
    Ok(CompositionProbe { residual, phi2_means, lipschitz, bound_holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBoundProbe {
    pub sup_g: f64,
    pub sup_f: f64,
    pub tolerance: f64,
    pub violated: bool,
}

/// Compare sampled `sup |g|` with sampled `sup |g + h|` on a window.
pub fn norm_bound_probe(g: &Expr, h: &Expr, grid: &Grid, tolerance: f64) -> Result<NormBoundProbe> {
    let (mut sup_g, mut sup_f) = (0.0f64, 0.0f64);
    for t in grid.sample_points() {
        let gv = g.eval(t)?;
        sup_g = sup_g.max(gv.abs());
        sup_f = sup_f.max((gv + h.eval(t)?).abs());
    }
    Ok(NormBoundProbe { sup_g, sup_f, tolerance, violated: sup_g > sup_f + tolerance })
}

/// Largest sampled `u(t + s) / u(t)` at the window edges over the shifts.
pub fn inv_ratio_probe(u: &Weight, shifts: &[f64], a: f64, b: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for &s in shifts {
        for t in [a, b] {
            worst = worst.max(u.eval(t + s)? / u.eval(t)?);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn example21() -> TimeScale {
        TimeScale::periodic_union(2.0, vec![(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn masses() {
        let one = Weight::unit();
        assert!((weight_mass(&TimeScale::Reals, &one, 5.0, 1e-2).unwrap() - 10.0).abs() < 1e-12);
        for k in 1..=4 {
            let r = 2.0 * k as f64;
            let m = weight_mass(&example21(), &one, r, 1e-2).unwrap();
            assert!((m - 4.0 * k as f64).abs() < 1e-12);
        }
        assert!(matches!(weight_mass(&example21(), &one, 1.0, 1e-2), Err(Error::NotInTranslationSet { .. })));
        let bad = Weight::new(parse("t").unwrap());
        assert!(matches!(weight_mass(&TimeScale::Reals, &bad, 1.0, 0.1), Err(Error::NonpositiveWeight { .. })));
    }

    #[test]
    fn exponential_weight_mass() {
        let u = Weight::new(parse("exp(abs(t))").unwrap());
        for k in 1..=3 {
            let m = weight_mass(&example21(), &u, 2.0 * k as f64, 1e-3).unwrap();
            let odd: f64 = (1..2 * k).step_by(2).map(|j| (j as f64).exp()).sum();
            let exact = (2.0 * k as f64).exp() - 1.0 + 2.0 * odd;
            assert!((m - exact).abs() < 1e-6 * exact, "k={k}: {m} vs {exact}");
        }
    }

    #[test]
    fn means() {
        let ts = TimeScale::Reals;
        let u = Weight::new(parse("1/2 + exp(-abs(t))").unwrap());
        let c = [parse("-3").unwrap(), parse("2").unwrap()];
        assert!((ergodic_mean(&ts, &u, &c, 4.0, 1e-2).unwrap() - 3.0).abs() < 1e-12);
        let g = [parse("exp(-abs(t))").unwrap()];
        let m = ergodic_mean(&ts, &Weight::unit(), &g, 10.0, 1e-3).unwrap();
        assert!((m - (1.0 - (-10f64).exp()) / 10.0).abs() < 1e-6);
        assert_eq!(ergodic_mean(&ts, &u, &[parse("0").unwrap()], 2.0, 1e-2).unwrap(), 0.0);
    }

    #[test]
    fn verdicts() {
        let ts = TimeScale::Reals;
        let g = [parse("exp(-abs(t))").unwrap()];
        let radii: Vec<f64> = (0..8).map(|k| 10.0 * 2f64.powi(k)).collect();
        let rep = pap0_diagnostic(&ts, &Weight::unit(), &g, &radii, 1e-2, Thresholds::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Vanishing);
        assert!((rep.trend_slope + 1.0).abs() < 0.01);
        let short = pap0_diagnostic(&ts, &Weight::unit(), &g, &radii[..4], 1e-2, Thresholds::default()).unwrap();
        assert_eq!(short.verdict, Verdict::Inconclusive);
        let one = [parse("1").unwrap()];
        let rep = pap0_diagnostic(&ts, &Weight::unit(), &one, &radii[..4], 1e-2, Thresholds::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::NonVanishing);
        assert!(rep.means.iter().all(|m| (*m - 1.0).abs() < 1e-12));
    }

    #[test]
    fn report_serialization() {
        let rep = ErgodicReport::from_data(vec![1.0, 2.0], vec![2.0, 4.0], vec![0.5, 0.25], Thresholds::default());
        assert_eq!(rep.to_csv(), "r,mass,mean\n1,2,0.5\n2,4,0.25\n");
        let js = rep.summary_json();
        assert_eq!(js["verdict"], "inconclusive");
        assert!((js["trend_slope"].as_f64().unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(js["vanish_tol"], 1e-3);
    }

    #[test]
    fn translation_probe() {
        let ts = TimeScale::Reals;
        let g = [parse("exp(-abs(t))").unwrap()];
        let radii: Vec<f64> = (0..8).map(|k| 10.0 * 2f64.powi(k)).collect();
        let p = translation_invariance_probe(&ts, &Weight::unit(), &g, 4.0, &radii, 1e-2, Thresholds::default())
            .unwrap();
        assert_eq!(p.original.verdict, Verdict::Vanishing);
        assert_eq!(p.shifted.verdict, Verdict::Vanishing);
        let p0 = translation_invariance_probe(&ts, &Weight::unit(), &g, 0.0, &radii, 1e-2, Thresholds::default())
            .unwrap();
        assert_eq!(p0.original, p0.shifted);
        let one = [parse("1").unwrap()];
        let p1 = translation_invariance_probe(&ts, &Weight::unit(), &one, 3.0, &radii[..3], 1e-2, Thresholds::default())
            .unwrap();
        assert_eq!(p1.shifted.verdict, Verdict::NonVanishing);
        assert!(translation_invariance_probe(&example21(), &Weight::unit(), &one, 1.0, &[2.0], 1e-2, Thresholds::default())
            .is_err());
    }

    #[test]
    fn composition_probe() {
        let ts = TimeScale::Reals;
        let radii: Vec<f64> = (0..8).map(|k| 10.0 * 2f64.powi(k)).collect();
        let th = Thresholds::default();
        let phi1 = parse("sin(t) + cos(sqrt(2)*t)").unwrap();
        let phi2 = parse("exp(-abs(t))").unwrap();
        let half = parse("x/2").unwrap();
        let p = lipschitz_composition_probe(&half, 0.5, &phi1, &phi2, 0.0, &ts, &Weight::unit(), &radii, 1e-2, th)
            .unwrap();
        assert!(p.bound_holds);
        assert!(p.residual.final_mean() <= 0.5 * p.phi2_means[radii.len() - 1] + 1e-9);
        let zero = parse("0").unwrap();
        let z = lipschitz_composition_probe(&half, 0.5, &phi1, &zero, 0.0, &ts, &Weight::unit(), &radii, 1e-2, th)
            .unwrap();
        assert!(z.residual.means.iter().all(|m| *m == 0.0));
        let s = parse("sin(x)").unwrap();
        let p = lipschitz_composition_probe(&s, 1.0, &phi1, &phi2, 2.0, &ts, &Weight::unit(), &radii, 1e-2, th)
            .unwrap();
        assert_eq!(p.residual.verdict, Verdict::Vanishing);
        assert!(p.bound_holds);
    }

    #[test]
    fn example31_is_data() {
        let ts = example21();
        let u = Weight::new(parse("exp(abs(t))").unwrap());
        let g = [parse("sin(2*pi*t)").unwrap(), parse("sin(4*pi*t)").unwrap()];
        let radii: Vec<f64> = (1..=8).map(|k| 2.0 * k as f64).collect();
        let rep = pap0_diagnostic(&ts, &u, &g, &radii, 1e-3, Thresholds::default()).unwrap();
        assert!(rep.masses.windows(2).all(|w| w[1] > w[0]));
        // the dense parts carry a strictly positive |g|; jump nodes sit at integers where g = 0
        assert!(rep.means.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn norm_bound_and_inv_ratio() {
        let grid = TimeScale::Reals.build_grid(-50.0, 50.0, 1e-2).unwrap();
        let g = parse("sin(t)").unwrap();
        let h = parse("-0.5*exp(-abs(t))*sin(t)").unwrap();
        let p = norm_bound_probe(&g, &h, &grid, 1e-3).unwrap();
        assert!(!p.violated);
        let u = Weight::new(parse("exp(abs(t))").unwrap());
        let ratio = inv_ratio_probe(&u, &[1.0], -10.0, 10.0).unwrap();
        assert!((ratio - 1f64.exp()).abs() < 1e-12);
    }
}
