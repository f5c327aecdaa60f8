//! Exact ranges for trigonometric coefficient patterns, with a sampling
//! fallback.
//!
//! An expression is recognized when it is an affine combination of
//! sinusoids `A sin(wt) + B cos(wt)`, and of `|c + R sin(wt + q)|` or
//! `(c + R sin(wt + q))^2` atoms. When the base frequencies are pairwise
//! rationally unrelated (and, on a lattice, unrelated to the lattice
//! period) the orbit is dense in the torus, so the range over the whole
//! time scale is the Minkowski sum of the atom ranges.

use serde::{Deserialize, Serialize};

use super::{BinOp, DomainError, Expr, Func, Var};
use crate::timescale::{Grid, TimeScale};

/// Largest denominator treated as a rational relation between frequencies.
const MAX_DENOMINATOR: i64 = 24;
const RELATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupMode {
    /// Use the exact pattern range when recognized, else sample.
    #[default]
    Pattern,
    /// Always sample on the grid.
    Sampled,
}

/// Infimum and supremum of an expression, with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub exact: bool,
}

impl Range {
    /// `sup |e|`.
    pub fn abs_sup(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    w: f64,
    a: f64,
    b: f64,
}

#[derive(Debug, Clone, Copy)]
struct Atom {
    w: f64,
    coef: f64,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, Default)]
struct Lin {
    c: f64,
    waves: Vec<Wave>,
    atoms: Vec<Atom>,
}

impl Lin {
    fn constant(c: f64) -> Lin {
        Lin { c, ..Lin::default() }
    }

    fn is_constant(&self) -> bool {
        self.waves.iter().all(|w| w.a == 0.0 && w.b == 0.0) && self.atoms.iter().all(|a| a.coef == 0.0)
    }

    fn scale(mut self, k: f64) -> Lin {
        self.c *= k;
        for w in &mut self.waves {
            w.a *= k;
            w.b *= k;
        }
        for a in &mut self.atoms {
            a.coef *= k;
        }
        self
    }

    fn add(mut self, other: Lin) -> Lin {
        self.c += other.c;
        for w in other.waves {
            self.add_wave(w);
        }
        self.atoms.extend(other.atoms);
        self
    }

    fn add_wave(&mut self, w: Wave) {
        match self.waves.iter_mut().find(|x| x.w == w.w) {
            Some(x) => {
                x.a += w.a;
                x.b += w.b;
            }
            None => self.waves.push(w),
        }
    }

    /// `c + R sin(wt + q)` with a single frequency, as `(c, R, w)`.
    fn single_wave(&self) -> Option<(f64, f64, f64)> {
        if !self.atoms.iter().all(|a| a.coef == 0.0) {
            return None;
        }
        let live: Vec<&Wave> = self.waves.iter().filter(|w| w.a != 0.0 || w.b != 0.0).collect();
        match live.as_slice() {
            [] => Some((self.c, 0.0, 0.0)),
            [w] => Some((self.c, w.a.hypot(w.b), w.w)),
            _ => None,
        }
    }
}

fn affine(e: &Expr) -> Option<(f64, f64)> {
    if e.is_constant() {
        return e.eval(0.0).ok().map(|v| (0.0, v));
    }
    match e {
        Expr::Var(Var::T) => Some((1.0, 0.0)),
        Expr::Neg(x) => affine(x).map(|(s, i)| (-s, -i)),
        Expr::Binary(op, l, r) => {
            let (ls, li) = affine(l)?;
            let (rs, ri) = affine(r)?;
            match op {
                BinOp::Add => Some((ls + rs, li + ri)),
                BinOp::Sub => Some((ls - rs, li - ri)),
                BinOp::Mul if ls == 0.0 => Some((li * rs, li * ri)),
                BinOp::Mul if rs == 0.0 => Some((ri * ls, ri * li)),
                BinOp::Div if rs == 0.0 && ri != 0.0 => Some((ls / ri, li / ri)),
                _ => None,
            }
        }
        _ => None,
    }
}

fn wave_of(func: Func, arg: &Expr) -> Option<Lin> {
    let (w, q) = affine(arg)?;
    // sin(wt + q) = cos q sin wt + sin q cos wt; cos(wt + q) = cos q cos wt - sin q sin wt
    let (mut a, b) = match func {
        Func::Sin => (q.cos(), q.sin()),
        Func::Cos => (-q.sin(), q.cos()),
        _ => return None,
    };
    if w == 0.0 {
        return Some(Lin::constant(b));
    }
    let mut w = w;
    if w < 0.0 {
        w = -w;
        a = -a;
    }
    Some(Lin { waves: vec![Wave { w, a, b }], ..Lin::default() })
}

fn atom_of(inner: &Lin, square: bool) -> Option<Lin> {
    let (c, r, w) = inner.single_wave()?;
    let (x0, x1) = (c - r, c + r);
    let (lo, hi) = if square {
        let hi = (x0 * x0).max(x1 * x1);
        let lo = if x0 <= 0.0 && x1 >= 0.0 { 0.0 } else { (x0 * x0).min(x1 * x1) };
        (lo, hi)
    } else {
        let hi = x0.abs().max(x1.abs());
        let lo = if x0 <= 0.0 && x1 >= 0.0 { 0.0 } else { x0.abs().min(x1.abs()) };
        (lo, hi)
    };
    if r == 0.0 {
        return Some(Lin::constant(lo));
    }
    Some(Lin { atoms: vec![Atom { w, coef: 1.0, lo, hi }], ..Lin::default() })
}

fn linear(e: &Expr) -> Option<Lin> {
    if e.is_constant() {
        return e.eval(0.0).ok().map(Lin::constant);
    }
    match e {
        Expr::Num(_) | Expr::Const(_) | Expr::Var(_) => None,
        Expr::Neg(x) => linear(x).map(|l| l.scale(-1.0)),
        Expr::Call(f @ (Func::Sin | Func::Cos), arg) => wave_of(*f, arg),
        Expr::Call(Func::Abs, arg) => atom_of(&linear(arg)?, false),
        Expr::Call(..) => None,
        Expr::Binary(op, l, r) => match op {
            BinOp::Add => Some(linear(l)?.add(linear(r)?)),
            BinOp::Sub => Some(linear(l)?.add(linear(r)?.scale(-1.0))),
            BinOp::Mul => {
                let (l, r) = (linear(l)?, linear(r)?);
                if l.is_constant() {
                    Some(r.scale(l.c))
                } else if r.is_constant() {
                    Some(l.scale(r.c))
                } else {
                    None
                }
            }
            BinOp::Div => {
                let r = linear(r)?;
                if r.is_constant() && r.c != 0.0 {
                    Some(linear(l)?.scale(1.0 / r.c))
                } else {
                    None
                }
            }
            BinOp::Pow => {
                if matches!(**r, Expr::Num(p) if p == 2.0) {
                    atom_of(&linear(l)?, true)
                } else {
                    None
                }
            }
        },
    }
}

fn near_rational(x: f64) -> bool {
    (1..=MAX_DENOMINATOR).any(|q| {
        let p = (x * q as f64).round();
        (x - p / q as f64).abs() <= RELATION_TOL * x.abs().max(1.0)
    })
}

/// Exact `(inf, sup)` over the whole time scale when the pattern is
/// recognized and its frequencies are independent.
pub fn exact_range(e: &Expr, ts: &TimeScale) -> Option<(f64, f64)> {
    if e.is_constant() {
        let v = e.eval(0.0).ok()?;
        return Some((v, v));
    }
    let lin = linear(e)?;
    let mut freqs = Vec::new();
    let (mut lo, mut hi) = (lin.c, lin.c);
    for w in lin.waves.iter().filter(|w| w.a != 0.0 || w.b != 0.0) {
        let r = w.a.hypot(w.b);
        lo -= r;
        hi += r;
        freqs.push(w.w);
    }
    for a in lin.atoms.iter().filter(|a| a.coef != 0.0) {
        if a.coef > 0.0 {
            lo += a.coef * a.lo;
            hi += a.coef * a.hi;
        } else {
            lo += a.coef * a.hi;
            hi += a.coef * a.lo;
        }
        freqs.push(a.w);
    }
    match ts {
        TimeScale::Reals => {}
        TimeScale::Lattice { h, .. } => {
            // phases advance by w*h per step; they must stay rationally
            // unrelated to a full turn and to each other modulo a turn
            let x: Vec<f64> = freqs.iter().map(|w| w * h / (2.0 * std::f64::consts::PI)).collect();
            for (i, xi) in x.iter().enumerate() {
                if near_rational(*xi) || x[i + 1..].iter().any(|xj| near_rational(xi - xj) || near_rational(xi + xj)) {
                    return None;
                }
            }
        }
        TimeScale::PeriodicUnion { .. } => return None,
    }
    for (i, wi) in freqs.iter().enumerate() {
        for wj in &freqs[i + 1..] {
            if near_rational(wi / wj) {
                return None;
            }
        }
    }
    Some((lo, hi))
}

/// Range of `e` under the requested mode; falls back to sampling on the
/// grid when no exact pattern applies.
pub fn range(e: &Expr, ts: &TimeScale, grid: &Grid, mode: SupMode) -> Result<Range, DomainError> {
    if mode == SupMode::Pattern {
        if let Some((lo, hi)) = exact_range(e, ts) {
            return Ok(Range { lo, hi, exact: true });
        }
    }
    let (hi, lo) = e.sup_inf_estimate(grid)?;
    Ok(Range { lo, hi, exact: e.is_constant() })
}

/// Points in `[a, b]` where an `abs(...)` argument of `e` changes sign.
pub fn kinks(e: &Expr, a: f64, b: f64, step: f64) -> Vec<f64> {
    let mut args = Vec::new();
    e.abs_arguments(&mut args);
    let mut out = Vec::new();
    if !(b > a) || !(step > 0.0) {
        return out;
    }
    let n = ((b - a) / step).ceil() as usize;
    for g in args.into_iter().filter(|g| !g.is_constant()) {
        let f = |t: f64| g.eval(t).ok();
        let mut prev = (a, f(a));
        for k in 1..=n {
            let t = (a + k as f64 * step).min(b);
            let cur = (t, f(t));
            if let (Some(y0), Some(y1)) = (prev.1, cur.1) {
                if y0 == 0.0 {
                    out.push(prev.0);
                } else if y0 * y1 < 0.0 {
                    let root = crate::numeric::bisect(|s| f(s).unwrap_or(f64::NAN), prev.0, cur.0, 1e-14);
                    out.push(root);
                }
            }
            prev = cur;
        }
        if prev.1 == Some(0.0) {
            out.push(prev.0);
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn exact(s: &str, ts: &TimeScale) -> Option<(f64, f64)> {
        exact_range(&parse(s).unwrap(), ts)
    }

    #[test]
    fn scaled_abs_trig() {
        let (lo, hi) = exact("15/7*abs(cos(t))", &TimeScale::Reals).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 15.0 / 7.0).abs() < 1e-15);
        let (lo, hi) = exact("11 + abs(cos(sqrt(2)*t))", &TimeScale::Reals).unwrap();
        assert_eq!((lo, hi), (11.0, 12.0));
        let (lo, _) = exact("12 - abs(sin(t))", &TimeScale::Reals).unwrap();
        assert_eq!(lo, 11.0);
    }

    #[test]
    fn sinusoid_sums() {
        let (lo, hi) = exact("2/16*(sin(t) + sin(t + pi/6))", &TimeScale::Reals).unwrap();
        let r = 0.25 * (std::f64::consts::PI / 12.0).cos();
        assert!((hi - r).abs() < 1e-15 && (lo + r).abs() < 1e-15);
        let (_, hi) = exact("sqrt(2)/8*(sin(t) + sin(pi/4 + sqrt(2)*t))", &TimeScale::Reals).unwrap();
        assert!((hi - 2f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn lattice_patterns() {
        let z = TimeScale::lattice(1.0, 0.0).unwrap();
        let (lo, _) = exact("0.8 + 0.1*cos(t)^2", &z).unwrap();
        assert!((lo - 0.8).abs() < 1e-15);
        let (lo, _) = exact("0.9 - 0.1*abs(sin(sqrt(3)*t))", &z).unwrap();
        assert!((lo - 0.8).abs() < 1e-15);
        assert!(exact("sin(pi*t)", &z).is_none());
        assert!(exact("sin(2*pi*t/3)", &z).is_none());
    }

    #[test]
    fn dependent_frequencies_fall_back() {
        assert!(exact("sin(t) + sin(2*t)", &TimeScale::Reals).is_none());
        assert!(exact("abs(sin(t)) + abs(cos(t))", &TimeScale::Reals).is_none());
        assert!(exact("sin(t)*cos(t)", &TimeScale::Reals).is_none());
        assert!(exact("exp(t)", &TimeScale::Reals).is_none());
        let pu = TimeScale::periodic_union(2.0, vec![(0.0, 1.0)]).unwrap();
        assert!(exact("abs(sin(t))", &pu).is_none());
        assert_eq!(exact("3", &pu), Some((3.0, 3.0)));
    }

    #[test]
    fn offset_abs_and_square() {
        let (lo, hi) = exact("abs(2 + sin(t))", &TimeScale::Reals).unwrap();
        assert_eq!((lo, hi), (1.0, 3.0));
        let (lo, hi) = exact("(0.5 + sin(t))^2", &TimeScale::Reals).unwrap();
        assert_eq!((lo, hi), (0.0, 2.25));
        let (lo, hi) = exact("-2*abs(sin(t))", &TimeScale::Reals).unwrap();
        assert_eq!((lo, hi), (-2.0, 0.0));
    }

    #[test]
    fn sampled_mode_ignores_patterns() {
        let g = TimeScale::Reals.build_grid(0.0, 10.0, 0.01).unwrap();
        let e = parse("abs(sin(t))").unwrap();
        let r = range(&e, &TimeScale::Reals, &g, SupMode::Sampled).unwrap();
        assert!(!r.exact && r.hi < 1.0 && r.hi > 0.9999);
        let p = range(&e, &TimeScale::Reals, &g, SupMode::Pattern).unwrap();
        assert!(p.exact && p.hi == 1.0);
    }

    #[test]
    fn kinks_of_abs_arguments() {
        let e = parse("11 + abs(cos(sqrt(2)*t))").unwrap();
        let ks = kinks(&e, 0.0, 10.0, 0.01);
        let w = 2f64.sqrt();
        let expected: Vec<f64> = (0..7)
            .map(|k| (std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI) / w)
            .filter(|t| *t <= 10.0)
            .collect();
        assert_eq!(ks.len(), expected.len());
        for (a, b) in ks.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let ks = kinks(&parse("abs(sin(t))").unwrap(), 0.0, 4.0, 0.01);
        assert_eq!(ks.len(), 2);
        assert_eq!(ks[0], 0.0);
        assert!(kinks(&parse("t^2").unwrap(), 0.0, 1.0, 0.1).is_empty());
    }
}
