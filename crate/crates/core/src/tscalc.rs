//! Regressive algebra, Δ-integration and the generalized exponential.

use crate::error::{Error, Result};
use crate::timescale::{Grid, TimeScale};

/// `1 + h z` at or below this is treated as singular.
pub const REGRESSIVE_TOL: f64 = 1e-12;

/// `p ⊕ q = p + q + μpq`.
pub fn circle_plus(p: f64, q: f64, mu: f64) -> f64 {
    p + q + mu * p * q
}

/// `⊖p = -p / (1 + μp)`.
pub fn circle_minus(p: f64, mu: f64) -> Result<f64> {
    let factor = 1.0 + mu * p;
    if factor == 0.0 {
        return Err(Error::NotRegressive { p, mu, factor });
    }
    Ok(-p / factor)
}

/// Cylinder transformation `ξ_h(z)`, real branch.
pub fn cylinder(h: f64, z: f64) -> Result<f64> {
    if h == 0.0 {
        return Ok(z);
    }
    let factor = 1.0 + h * z;
    if factor <= REGRESSIVE_TOL {
        return Err(Error::NotRegressive { p: z, mu: h, factor });
    }
    Ok((h * z).ln_1p() / h)
}

/// Δ-integral over the grid window: trapezoid on dense edges plus the
/// exact jump term `μ(t) f(t)` at scattered nodes.
pub fn delta_integral<F>(grid: &Grid, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let values = grid.nodes().iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    Ok(delta_integral_values(grid, &values))
}

/// Δ-integral from node values.
pub fn delta_integral_values(grid: &Grid, values: &[f64]) -> f64 {
    let nodes = grid.nodes();
    let mu = grid.mu();
    let mut sum = 0.0;
    for k in 0..nodes.len().saturating_sub(1) {
        if mu[k] == 0.0 {
            sum += 0.5 * (nodes[k + 1] - nodes[k]) * (values[k] + values[k + 1]);
        } else {
            sum += mu[k] * values[k];
        }
    }
    sum
}

/// Cumulative `e_p(t_k, t_0)` from `p_at(k, μ)`: `log(1 + μp)` on jumps,
/// the trapezoid rule on dense edges (where `μ = 0` is passed).
fn exp_cumulative<P>(grid: &Grid, p_at: P) -> Result<Vec<f64>>
where
    P: Fn(usize, f64) -> Result<f64>,
{
    let nodes = grid.nodes();
    let mu = grid.mu();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(1.0);
    for k in 0..nodes.len().saturating_sub(1) {
        acc += if mu[k] == 0.0 {
            0.5 * (nodes[k + 1] - nodes[k]) * (p_at(k, 0.0)? + p_at(k + 1, 0.0)?)
        } else {
            mu[k] * cylinder(mu[k], p_at(k, mu[k])?)?
        };
        out.push(acc.exp());
    }
    Ok(out)
}

/// `e_p(t_k, t_0)` for every node of the grid, from node values of `p`.
pub fn exp_along(grid: &Grid, p: &[f64]) -> Result<Vec<f64>> {
    exp_cumulative(grid, |k, _| Ok(p[k]))
}

/// `e_p(t_k, t_0)` along the grid for a `p(t, μ)` that depends on the
/// local graininess; dense edges see `p(t, 0)`.
pub fn exp_along_with<P>(grid: &Grid, p: P) -> Result<Vec<f64>>
where
    P: Fn(f64, f64) -> Result<f64>,
{
    exp_cumulative(grid, |k, mu| p(grid.nodes()[k], mu))
}

/// Generalized exponential `e_p(t, s)`.
pub fn exp_fn<P>(ts: &TimeScale, p: P, t: f64, s: f64, h_grid: f64) -> Result<f64>
where
    P: Fn(f64) -> Result<f64>,
{
    exp_fn_with(ts, |x, _| p(x), t, s, h_grid)
}

/// `e_p(t, s)` for a `p(t, μ)` that depends on the graininess, such as
/// `⊖a`; dense parts see `μ = 0` even at the right end of a dense run.
pub fn exp_fn_with<P>(ts: &TimeScale, p: P, t: f64, s: f64, h_grid: f64) -> Result<f64>
where
    P: Fn(f64, f64) -> Result<f64>,
{
    for x in [t, s] {
        if !ts.contains(x) {
            return Err(Error::NotInTimeScale { t: x });
        }
    }
    let (t, s) = (ts.snap(t), ts.snap(s));
    if t == s {
        return Ok(1.0);
    }
    if t < s {
        return Ok(1.0 / exp_fn_with(ts, p, s, t, h_grid)?);
    }
    let grid = ts.build_grid(s, t, h_grid)?;
    Ok(exp_along_with(&grid, p)?[grid.len() - 1])
}

/// Certified upper bound `exp(-a (t - s) / (1 + μ̄ a))` for `e_{⊖a}(t, s)`.
pub fn decay_bound(a: f64, mu_bar: f64, t: f64, s: f64) -> f64 {
    (-a * (t - s) / (1.0 + mu_bar * a)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn example21() -> TimeScale {
        TimeScale::periodic_union(2.0, vec![(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn circle_algebra() {
        assert_eq!(circle_plus(0.5, 0.5, 1.0), 1.25);
        assert_eq!(circle_plus(0.3, -1.7, 0.0), 0.3 - 1.7);
        let q = circle_minus(2.0, 1.0).unwrap();
        assert!((q + 2.0 / 3.0).abs() < 1e-15);
        assert!(circle_plus(2.0, q, 1.0).abs() < 1e-15);
        assert!((circle_minus(0.5, 1.0).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(circle_minus(1.0, 0.0).unwrap(), -1.0);
        assert!(matches!(circle_minus(-1.0, 1.0), Err(Error::NotRegressive { .. })));
    }

    #[test]
    fn cylinder_examples() {
        assert_eq!(cylinder(0.0, -3.0).unwrap(), -3.0);
        assert!((cylinder(1.0, E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(cylinder(1.0, -1.0), Err(Error::NotRegressive { .. })));
        assert!(cylinder(1.0, -1.0 + 1e-13).is_err());
    }

    #[test]
    fn delta_integral_example() {
        let g = example21().build_grid(2.0, 4.0, 1e-4).unwrap();
        let v = delta_integral(&g, |t| Ok(t.exp())).unwrap();
        let exact = 2.0 * E.powi(3) - E.powi(2);
        assert!((v - exact).abs() < 1e-8 * exact, "{v} vs {exact}");
        let ones = delta_integral(&g, |_| Ok(1.0)).unwrap();
        assert!((ones - 2.0).abs() < 1e-12);
        let r = TimeScale::Reals.build_grid(0.0, 1.0, 0.1).unwrap();
        assert!((delta_integral(&r, |t| Ok(t)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exp_examples() {
        let v = exp_fn(&TimeScale::Reals, |_| Ok(-0.7), 3.0, 1.0, 1e-3).unwrap();
        assert!((v - (-1.4f64).exp()).abs() < 1e-9);
        let z = TimeScale::lattice(1.0, 0.0).unwrap();
        assert!((exp_fn(&z, |_| Ok(1.0), 5.0, 2.0, 1.0).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(exp_fn(&example21(), |_| Ok(3.0), 0.5, 0.5, 1e-3).unwrap(), 1.0);
        let back = exp_fn(&z, |_| Ok(1.0), 2.0, 5.0, 1.0).unwrap();
        assert!((back - 0.125).abs() < 1e-12);
    }

    #[test]
    fn decay_bound_examples() {
        assert!((decay_bound(1.0, 0.0, 1.0, 0.0) - (-1.0f64).exp()).abs() < 1e-15);
        let b = decay_bound(1.0, 1.0, 2.0, 0.0);
        assert!((b - (-1.0f64).exp()).abs() < 1e-15);
        let z = TimeScale::lattice(1.0, 0.0).unwrap();
        let actual = exp_fn(&z, |_| circle_minus(1.0, 1.0), 2.0, 0.0, 1.0).unwrap();
        assert!((actual - 0.25).abs() < 1e-12 && actual <= b);
        assert_eq!(decay_bound(2.0, 0.5, 3.0, 3.0), 1.0);
    }

    #[test]
    fn trapezoid_order_two() {
        let err = |h: f64| {
            let g = TimeScale::Reals.build_grid(0.0, 1.0, h).unwrap();
            (delta_integral(&g, |t| Ok(t.sin())).unwrap() - (1.0 - 1f64.cos())).abs()
        };
        let ratio = err(0.01) / err(0.005);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn exp_along_matches_exp_fn() {
        let ts = example21();
        let g = ts.build_grid(0.0, 6.0, 1e-2).unwrap();
        let p: Vec<f64> = g.nodes().iter().map(|t| -0.3 + 0.1 * t.sin()).collect();
        let cum = exp_along(&g, &p).unwrap();
        let direct = exp_fn(&ts, |t| Ok(-0.3 + 0.1 * t.sin()), 6.0, 0.0, 1e-2).unwrap();
        assert!((cum[cum.len() - 1] - direct).abs() < 1e-12);
    }
}
