//! Time scales from a finite-descriptor family and their discretization.
//!
//! Three families are supported: the whole real line, uniform lattices
//! `offset + hZ`, and periodic unions of closed cells repeated with period
//! `p`. For each of them the forward jump `sigma`, the graininess `mu`, and
//! the translation lattice are exactly computable, up to [`SNAP_TOL`] on
//! floating endpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used to snap times onto lattice points and cell endpoints.
pub const SNAP_TOL: f64 = 1e-12;

/// Breakpoints closer than this to each other or to a run end are merged.
const MIN_PIECE: f64 = 1e-7;

/// A closed subset of the reals with a nontrivial translation lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TimeScaleRepr", into = "TimeScaleRepr")]
pub enum TimeScale {
    Reals,
    /// `{offset + k h : k in Z}`.
    Lattice { h: f64, offset: f64 },
    /// `U_k (k p + [a_i, b_i])` with `a_0 = 0` and `b_last < p`.
    PeriodicUnion { period: f64, cells: Vec<(f64, f64)> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TimeScaleRepr {
    Reals,
    Lattice {
        h: f64,
        #[serde(default)]
        offset: f64,
    },
    PeriodicUnion {
        period: f64,
        cells: Vec<[f64; 2]>,
    },
}

impl TryFrom<TimeScaleRepr> for TimeScale {
    type Error = Error;

    fn try_from(repr: TimeScaleRepr) -> Result<Self> {
        match repr {
            TimeScaleRepr::Reals => Ok(TimeScale::Reals),
            TimeScaleRepr::Lattice { h, offset } => TimeScale::lattice(h, offset),
            TimeScaleRepr::PeriodicUnion { period, cells } => {
                TimeScale::periodic_union(period, cells.into_iter().map(|[a, b]| (a, b)).collect())
            }
        }
    }
}

impl From<TimeScale> for TimeScaleRepr {
    fn from(ts: TimeScale) -> Self {
        match ts {
            TimeScale::Reals => TimeScaleRepr::Reals,
            TimeScale::Lattice { h, offset } => TimeScaleRepr::Lattice { h, offset },
            TimeScale::PeriodicUnion { period, cells } => TimeScaleRepr::PeriodicUnion {
                period,
                cells: cells.into_iter().map(|(a, b)| [a, b]).collect(),
            },
        }
    }
}

/// Position of a time relative to a periodic union.
struct Located {
    /// Period index.
    k: f64,
    /// Remainder in `[0, p)`.
    r: f64,
    /// Cell containing the remainder, if any.
    cell: Option<usize>,
}

impl TimeScale {
    /// Uniform lattice `offset + hZ`; the offset is reduced into `[0, h)`.
    pub fn lattice(h: f64, offset: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) || !offset.is_finite() {
            return Err(Error::InvalidTimeScale(format!(
                "lattice needs a finite step h > 0 and a finite offset (h = {h}, offset = {offset})"
            )));
        }
        let mut offset = offset.rem_euclid(h);
        if offset > h - SNAP_TOL {
            offset = 0.0;
        }
        Ok(TimeScale::Lattice { h, offset })
    }

    /// Periodic union of the given cells, validated against the canonical form.
    pub fn periodic_union(period: f64, cells: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidTimeScale(msg));
        if !(period.is_finite() && period > 0.0) {
            return bad(format!("period must be finite and positive, got {period}"));
        }
        if cells.is_empty() {
            return bad("periodic union needs at least one cell".into());
        }
        if cells[0].0 != 0.0 {
            return bad(format!("first cell must start at 0, got {}", cells[0].0));
        }
        for (i, &(a, b)) in cells.iter().enumerate() {
            if !(a.is_finite() && b.is_finite()) || a > b {
                return bad(format!("cell {i} = [{a}, {b}] is not a closed interval"));
            }
            if i > 0 && a <= cells[i - 1].1 {
                return bad(format!("cell {i} overlaps or touches cell {}", i - 1));
            }
        }
        let last = cells[cells.len() - 1].1;
        if last >= period {
            return bad(format!("last cell ends at {last}, which is not below the period {period}"));
        }
        Ok(TimeScale::PeriodicUnion { period, cells })
    }

    fn locate(period: f64, cells: &[(f64, f64)], t: f64) -> Located {
        let mut k = (t / period).floor();
        let mut r = t - k * period;
        if r >= period - SNAP_TOL {
            k += 1.0;
            r -= period;
        }
        if r < 0.0 {
            r = 0.0;
        }
        let cell = cells
            .iter()
            .position(|&(a, b)| r >= a - SNAP_TOL && r <= b + SNAP_TOL);
        Located { k, r, cell }
    }

    /// Membership test, exact up to [`SNAP_TOL`].
    pub fn contains(&self, t: f64) -> bool {
        if !t.is_finite() {
            return false;
        }
        match self {
            TimeScale::Reals => true,
            TimeScale::Lattice { h, offset } => {
                let k = ((t - offset) / h).round();
                (t - (offset + k * h)).abs() <= SNAP_TOL * (1.0 + t.abs())
            }
            TimeScale::PeriodicUnion { period, cells } => {
                Self::locate(*period, cells, t).cell.is_some()
            }
        }
    }

    fn require(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::NotInTimeScale { t })
        }
    }

    /// Forward jump operator: the least element strictly above `t`, or `t`
    /// itself when `t` is right-dense.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        self.require(t)?;
        Ok(match self {
            TimeScale::Reals => t,
            TimeScale::Lattice { h, offset } => {
                let k = ((t - offset) / h).round();
                offset + (k + 1.0) * h
            }
            TimeScale::PeriodicUnion { period, cells } => {
                let loc = Self::locate(*period, cells, t);
                let i = loc.cell.expect("membership checked");
                if (loc.r - cells[i].1).abs() <= SNAP_TOL {
                    if i + 1 < cells.len() {
                        loc.k * period + cells[i + 1].0
                    } else {
                        (loc.k + 1.0) * period
                    }
                } else {
                    t
                }
            }
        })
    }

    /// Graininess `mu(t) = sigma(t) - t`.
    pub fn graininess(&self, t: f64) -> Result<f64> {
        Ok(match self {
            TimeScale::Lattice { h, .. } => {
                self.require(t)?;
                *h
            }
            _ => {
                let s = self.sigma(t)?;
                if s == t {
                    0.0
                } else {
                    self.snap(s) - self.snap(t)
                }
            }
        })
    }

    /// Supremum of the graininess over the whole scale.
    pub fn mu_bar(&self) -> f64 {
        match self {
            TimeScale::Reals => 0.0,
            TimeScale::Lattice { h, .. } => *h,
            TimeScale::PeriodicUnion { period, cells } => {
                let wrap = period - cells[cells.len() - 1].1;
                cells
                    .windows(2)
                    .map(|w| w[1].0 - w[0].1)
                    .fold(wrap, f64::max)
            }
        }
    }

    /// Whether `tau` belongs to the translation lattice of the scale.
    pub fn in_translation_set(&self, tau: f64) -> bool {
        if !tau.is_finite() {
            return false;
        }
        let on_multiple = |step: f64| {
            let k = (tau / step).round();
            (tau - k * step).abs() <= SNAP_TOL * (1.0 + tau.abs())
        };
        match self {
            TimeScale::Reals => true,
            TimeScale::Lattice { h, .. } => on_multiple(*h),
            TimeScale::PeriodicUnion { period, .. } => on_multiple(*period),
        }
    }

    /// Whether `t` is right-dense (`sigma(t) = t`).
    pub fn is_right_dense(&self, t: f64) -> Result<bool> {
        Ok(self.sigma(t)? == t)
    }

    /// Replace `t` by the canonical representation of the nearest member
    /// (lattice point or cell endpoint) when it lies within [`SNAP_TOL`].
    pub fn snap(&self, t: f64) -> f64 {
        match self {
            TimeScale::Reals => t,
            TimeScale::Lattice { h, offset } => {
                let k = ((t - offset) / h).round();
                let p = offset + k * h;
                if (t - p).abs() <= SNAP_TOL * (1.0 + t.abs()) {
                    p
                } else {
                    t
                }
            }
            TimeScale::PeriodicUnion { period, cells } => {
                let loc = Self::locate(*period, cells, t);
                for &(a, b) in cells {
                    for e in [a, b] {
                        if (loc.r - e).abs() <= SNAP_TOL {
                            return loc.k * period + e;
                        }
                    }
                }
                if loc.r.abs() <= SNAP_TOL {
                    return loc.k * period;
                }
                t
            }
        }
    }

    /// Greatest member of the scale that is `<= x`.
    pub fn floor(&self, x: f64) -> f64 {
        match self {
            TimeScale::Reals => x,
            TimeScale::Lattice { h, offset } => {
                let q = (x - offset) / h;
                let k = if (q - q.round()).abs() * h <= SNAP_TOL * (1.0 + x.abs()) {
                    q.round()
                } else {
                    q.floor()
                };
                offset + k * h
            }
            TimeScale::PeriodicUnion { period, cells } => {
                let loc = Self::locate(*period, cells, x);
                if loc.cell.is_some() {
                    return self.snap(x);
                }
                let i = cells
                    .iter()
                    .rposition(|&(a, _)| a <= loc.r + SNAP_TOL)
                    .expect("first cell starts at 0");
                loc.k * period + cells[i].1
            }
        }
    }

    /// Least member of the scale that is `>= x`.
    pub fn ceil(&self, x: f64) -> f64 {
        match self {
            TimeScale::Reals => x,
            TimeScale::Lattice { h, offset } => {
                let q = (x - offset) / h;
                let k = if (q - q.round()).abs() * h <= SNAP_TOL * (1.0 + x.abs()) {
                    q.round()
                } else {
                    q.ceil()
                };
                offset + k * h
            }
            TimeScale::PeriodicUnion { period, cells } => {
                let loc = Self::locate(*period, cells, x);
                if loc.cell.is_some() {
                    return self.snap(x);
                }
                match cells.iter().position(|&(a, _)| a > loc.r) {
                    Some(i) => loc.k * period + cells[i].0,
                    None => (loc.k + 1.0) * period,
                }
            }
        }
    }

    /// The center `min [0, inf)_T` of the ergodic windows.
    pub fn center(&self) -> f64 {
        self.ceil(0.0)
    }

    /// End of the right-dense run starting at the right-dense point `t`
    /// (infinite for the reals).
    fn dense_run_end(&self, t: f64) -> f64 {
        match self {
            TimeScale::Reals => f64::INFINITY,
            TimeScale::Lattice { .. } => t,
            TimeScale::PeriodicUnion { period, cells } => {
                let loc = Self::locate(*period, cells, t);
                let i = loc.cell.expect("member");
                loc.k * period + cells[i].1
            }
        }
    }

    /// Discretize `[a, b]_T`; see [`Grid::build`].
    pub fn build_grid(&self, a: f64, b: f64, h_grid: f64) -> Result<Grid> {
        Grid::build(self, a, b, h_grid, &[])
    }
}

/// An ordered discretization of a window `[a, b]_T`.
///
/// Every right-scattered point of the window is a node and is followed by
/// its forward jump. Right-dense runs are subdivided with spacing at most
/// `h`; optional breakpoints split runs into smooth pieces and are always
/// nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    mu: Vec<f64>,
    breaks: Vec<bool>,
    runs: Vec<Option<(usize, usize)>>,
    h: f64,
}

impl Grid {
    /// Build a grid over `[a, b]_T` with dense step `h_grid`, inserting the
    /// given breakpoints (ignored outside dense runs) as nodes.
    pub fn build(ts: &TimeScale, a: f64, b: f64, h_grid: f64, breakpoints: &[f64]) -> Result<Grid> {
        if !(h_grid.is_finite() && h_grid > 0.0) {
            return Err(Error::InvalidArgument(format!("h_grid must be positive, got {h_grid}")));
        }
        if !ts.contains(a) {
            return Err(Error::NotInTimeScale { t: a });
        }
        if !ts.contains(b) {
            return Err(Error::NotInTimeScale { t: b });
        }
        let (a, b) = (ts.snap(a), ts.snap(b));
        if a >= b {
            return Err(Error::EmptyWindow { a, b });
        }
        let mut sorted: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|x| x.is_finite() && *x > a && *x < b)
            .collect();
        sorted.sort_by(f64::total_cmp);

        let mut nodes = vec![a];
        let mut mu = Vec::new();
        let mut breaks = vec![false];
        let mut t = a;
        while t < b {
            if ts.is_right_dense(t)? {
                let end = ts.dense_run_end(t).min(b);
                let mut cuts = vec![t];
                for &x in sorted.iter().filter(|&&x| x > t && x < end) {
                    let last = *cuts.last().expect("nonempty");
                    if x - last > MIN_PIECE && end - x > MIN_PIECE {
                        cuts.push(x);
                    }
                }
                cuts.push(end);
                for (pi, w) in cuts.windows(2).enumerate() {
                    let (p0, p1) = (w[0], w[1]);
                    let m = (((p1 - p0) / h_grid) - 1e-9).ceil().max(1.0) as usize;
                    for j in 1..=m {
                        let x = if j == m { p1 } else { p0 + (p1 - p0) * (j as f64) / (m as f64) };
                        mu.push(0.0);
                        nodes.push(x);
                        breaks.push(j == m && pi + 2 < cuts.len());
                    }
                }
                t = end;
            } else {
                let s = ts.sigma(t)?;
                if s > b + SNAP_TOL {
                    break;
                }
                let s = if (s - b).abs() <= SNAP_TOL { b } else { s };
                mu.push(s - t);
                nodes.push(s);
                breaks.push(false);
                t = s;
            }
        }
        mu.push(ts.graininess(b)?);
        Ok(Grid::from_parts(nodes, mu, breaks, h_grid))
    }

    /// One-node grid at `t`.
    pub fn point(ts: &TimeScale, t: f64, h_grid: f64) -> Result<Grid> {
        if !ts.contains(t) {
            return Err(Error::NotInTimeScale { t });
        }
        let t = ts.snap(t);
        Ok(Grid::from_parts(vec![t], vec![ts.graininess(t)?], vec![false], h_grid))
    }

    /// Like [`Grid::build`] but a degenerate window `a == b` yields a
    /// one-node grid.
    pub fn build_closed(ts: &TimeScale, a: f64, b: f64, h_grid: f64, breakpoints: &[f64]) -> Result<Grid> {
        if ts.contains(a) && ts.contains(b) && ts.snap(a) == ts.snap(b) {
            return Grid::point(ts, a, h_grid);
        }
        Grid::build(ts, a, b, h_grid, breakpoints)
    }

    fn from_parts(nodes: Vec<f64>, mu: Vec<f64>, breaks: Vec<bool>, h: f64) -> Grid {
        let n = nodes.len();
        let mut runs = vec![None; n];
        let mut k = 0;
        while k + 1 < n {
            if mu[k] == 0.0 {
                let start = k;
                while k + 1 < n && mu[k] == 0.0 {
                    k += 1;
                }
                for r in runs.iter_mut().take(k + 1).skip(start) {
                    *r = Some((start, k));
                }
            } else {
                k += 1;
            }
        }
        Grid { nodes, mu, breaks, runs, h }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn h_grid(&self) -> f64 {
        self.h
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Whether node `k` is an interior breakpoint of its dense run.
    pub fn is_break(&self, k: usize) -> bool {
        self.breaks[k]
    }

    /// Whether the edge `k -> k + 1` is a dense (quadrature) step.
    pub fn is_dense_edge(&self, k: usize) -> bool {
        k + 1 < self.nodes.len() && self.mu[k] == 0.0
    }

    /// Node range `(first, last)` of the dense run containing node `k`.
    pub fn run_of(&self, k: usize) -> Option<(usize, usize)> {
        self.runs[k]
    }

    /// Index of the node equal to `t` up to a small tolerance.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.h.min(1.0) + SNAP_TOL * (1.0 + t.abs());
        let i = self.nodes.partition_point(|&x| x < t - tol);
        (i < self.nodes.len() && (self.nodes[i] - t).abs() <= tol).then_some(i)
    }

    /// Position of `t` relative to the nodes.
    pub fn locate(&self, t: f64) -> Position {
        if let Some(i) = self.index_of(t) {
            return Position::Node(i);
        }
        if t < self.start() {
            return Position::Before;
        }
        if t > self.end() {
            return Position::After;
        }
        let i = self.nodes.partition_point(|&x| x <= t) - 1;
        if self.is_dense_edge(i) {
            Position::Inside(i)
        } else {
            Position::Gap(i)
        }
    }

    /// Sub-grid with nodes `range.start..range.end`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Grid {
        let nodes = self.nodes[range.clone()].to_vec();
        let mu = self.mu[range.clone()].to_vec();
        let mut breaks = self.breaks[range].to_vec();
        if let Some(first) = breaks.first_mut() {
            *first = false;
        }
        if let Some(last) = breaks.last_mut() {
            *last = false;
        }
        Grid::from_parts(nodes, mu, breaks, self.h)
    }

    /// Index range of nodes inside `[a, b]` (inclusive, within tolerance).
    pub fn range_within(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let tol = 1e-9 * self.h.min(1.0) + SNAP_TOL * (1.0 + a.abs().max(b.abs()));
        let lo = self.nodes.partition_point(|&x| x < a - tol);
        let hi = self.nodes.partition_point(|&x| x <= b + tol);
        lo..hi
    }

    /// Nodes plus midpoints of every dense edge, for sup/inf sampling.
    pub fn sample_points(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(2 * self.nodes.len());
        for k in 0..self.nodes.len() {
            pts.push(self.nodes[k]);
            if self.is_dense_edge(k) {
                pts.push(0.5 * (self.nodes[k] + self.nodes[k + 1]));
            }
        }
        pts
    }

    /// Linear interpolation weights on the dense edge containing `t`.
    pub fn linear_interpolation(&self, t: f64) -> Result<Stencil> {
        match self.locate(t) {
            Position::Node(i) => Ok(Stencil::node(i)),
            Position::Inside(i) => Ok(Stencil::lagrange(&self.nodes[i..=i + 1], i, t)),
            Position::Gap(_) | Position::Before | Position::After => Err(Error::NotInTimeScale { t }),
        }
    }

    /// Lagrange weights reproducing the value at `t` from nearby nodes of
    /// the same dense run (cubic when four nodes are available).
    pub fn interpolation(&self, t: f64) -> Result<Stencil> {
        match self.locate(t) {
            Position::Node(i) => Ok(Stencil::node(i)),
            Position::Inside(i) => {
                let (s, e) = self.run_of(i).expect("dense edge lies in a run");
                let lo = i.saturating_sub(1).max(s);
                let hi = (i + 2).min(e);
                let (lo, hi) = if hi - lo < 3 && e - s >= 3 {
                    if lo == s {
                        (s, (s + 3).min(e))
                    } else {
                        (e.saturating_sub(3).max(s), e)
                    }
                } else {
                    (lo, hi)
                };
                Ok(Stencil::lagrange(&self.nodes[lo..=hi], lo, t))
            }
            Position::Gap(_) | Position::Before | Position::After => Err(Error::NotInTimeScale { t }),
        }
    }
}

/// Where a time falls relative to a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Node(usize),
    /// Strictly inside the dense edge starting at the node.
    Inside(usize),
    /// Strictly inside the jump starting at the node (not a member).
    Gap(usize),
    Before,
    After,
}

/// Interpolation stencil: `value = sum w_k * values[first + k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub first: usize,
    pub len: usize,
    pub weights: [f64; 4],
}

impl Stencil {
    pub fn node(i: usize) -> Stencil {
        Stencil { first: i, len: 1, weights: [1.0, 0.0, 0.0, 0.0] }
    }

    pub(crate) fn lagrange(xs: &[f64], first: usize, t: f64) -> Stencil {
        let mut weights = [0.0; 4];
        for (j, w) in weights.iter_mut().enumerate().take(xs.len()) {
            let mut l = 1.0;
            for (m, &xm) in xs.iter().enumerate() {
                if m != j {
                    l *= (t - xm) / (xs[j] - xm);
                }
            }
            *w = l;
        }
        Stencil { first, len: xs.len(), weights }
    }

    pub fn apply(&self, values: impl Fn(usize) -> f64) -> f64 {
        (0..self.len).map(|k| self.weights[k] * values(self.first + k)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example21() -> TimeScale {
        TimeScale::periodic_union(2.0, vec![(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(example21().sigma(1.0).unwrap(), 2.0);
        assert_eq!(TimeScale::Reals.sigma(3.7).unwrap(), 3.7);
        assert_eq!(TimeScale::lattice(1.0, 0.0).unwrap().sigma(5.0).unwrap(), 6.0);
        assert!(matches!(example21().sigma(1.5), Err(Error::NotInTimeScale { .. })));
    }

    #[test]
    fn graininess_examples() {
        let ts = example21();
        assert_eq!(ts.graininess(3.0).unwrap(), 1.0);
        assert_eq!(ts.graininess(0.5).unwrap(), 0.0);
        assert_eq!(TimeScale::Reals.graininess(-12.0).unwrap(), 0.0);
    }

    #[test]
    fn mu_bar_examples() {
        assert_eq!(TimeScale::Reals.mu_bar(), 0.0);
        assert_eq!(TimeScale::lattice(1.0, 0.0).unwrap().mu_bar(), 1.0);
        assert_eq!(example21().mu_bar(), 1.0);
        let ts = TimeScale::periodic_union(5.0, vec![(0.0, 1.0), (1.5, 2.0)]).unwrap();
        assert_eq!(ts.mu_bar(), 3.0);
    }

    #[test]
    fn membership_matches_enumerated_cells() {
        let ts = example21();
        assert!(!ts.contains(1.5));
        assert!(TimeScale::lattice(1.0, 0.0).unwrap().contains(4.0));
        // -3.25 lies in the translate [-4, -3] of the cell [0, 1].
        let enumerated = (-5..5).any(|k| {
            let lo = 2.0 * k as f64;
            (lo..=lo + 1.0).contains(&-3.25)
        });
        assert_eq!(ts.contains(-3.25), enumerated);
        assert!(ts.contains(-3.25));
        assert!(!ts.contains(-2.5));
        assert!(ts.contains(1.0 + 1e-13));
    }

    #[test]
    fn translation_set_examples() {
        let ts = example21();
        assert!(ts.in_translation_set(2.0));
        assert!(!ts.in_translation_set(1.0));
        assert!(TimeScale::Reals.in_translation_set(std::f64::consts::PI));
        assert!(TimeScale::lattice(0.5, 0.0).unwrap().in_translation_set(3.5));
    }

    #[test]
    fn grid_periodic_union() {
        let g = example21().build_grid(0.0, 4.0, 0.5).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 2.0, 2.5, 3.0, 4.0]);
        assert_eq!(g.mu(), &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn grid_reals_and_lattice() {
        let g = TimeScale::Reals.build_grid(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(g.mu().iter().all(|&m| m == 0.0));
        let g = TimeScale::lattice(1.0, 0.0).unwrap().build_grid(0.0, 3.0, 0.01).unwrap();
        assert_eq!(g.nodes(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(&g.mu()[..3], &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn grid_errors() {
        let ts = example21();
        assert!(matches!(ts.build_grid(0.0, 1.5, 0.1), Err(Error::NotInTimeScale { .. })));
        assert!(matches!(ts.build_grid(2.0, 2.0, 0.1), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn breakpoints_become_nodes() {
        let g = Grid::build(&TimeScale::Reals, 0.0, 1.0, 0.3, &[0.45]).unwrap();
        let k = g.index_of(0.45).unwrap();
        assert!(g.is_break(k));
        assert!(g.nodes().windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-15));
    }

    #[test]
    fn floor_and_ceil() {
        let ts = example21();
        assert_eq!(ts.floor(1.5), 1.0);
        assert_eq!(ts.ceil(1.5), 2.0);
        assert_eq!(ts.floor(-0.5), -1.0);
        assert_eq!(ts.ceil(-0.5), 0.0);
        assert_eq!(ts.center(), 0.0);
        let z = TimeScale::lattice(1.0, 0.0).unwrap();
        assert_eq!(z.floor(-2.5), -3.0);
        assert_eq!(z.ceil(2.0000000000001), 2.0);
    }

    #[test]
    fn rejects_noncanonical_cells() {
        assert!(TimeScale::periodic_union(2.0, vec![(0.5, 1.0)]).is_err());
        assert!(TimeScale::periodic_union(2.0, vec![(0.0, 1.0), (0.5, 1.5)]).is_err());
        assert!(TimeScale::periodic_union(2.0, vec![(0.0, 2.0)]).is_err());
        assert!(TimeScale::lattice(0.0, 0.0).is_err());
    }

    #[test]
    fn json_forms() {
        let ts: TimeScale =
            serde_json::from_str(r#"{"kind":"periodic_union","period":2.0,"cells":[[0.0,1.0]]}"#).unwrap();
        assert_eq!(ts, example21());
        let z: TimeScale = serde_json::from_str(r#"{"kind":"lattice","h":1.0,"offset":0.0}"#).unwrap();
        assert_eq!(z, TimeScale::lattice(1.0, 0.0).unwrap());
        let r: TimeScale = serde_json::from_str(r#"{"kind":"reals"}"#).unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"kind":"reals"}"#);
        assert!(serde_json::from_str::<TimeScale>(r#"{"kind":"lattice","h":-1.0}"#).is_err());
    }
}
