/// Bisection on a sign change of `f` over `[a, b]` down to width `tol`.
/// Returns the midpoint of the final bracket.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (lo, hi) = bracket(f, a, b, tol);
    0.5 * (lo + hi)
}

/// Final bracket `(lo, hi)` with `f(lo)` of the sign of `f(a)`.
pub(crate) fn bracket(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a, b);
    let positive = f(a) > 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        let (lo, hi) = bracket(|x| 1.0 - x, 0.0, 3.0, 1e-10);
        assert!(hi - lo <= 1e-10 && lo <= 1.0 && hi >= 1.0);
    }

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((ls_slope(&xs, &ys) - 3.0).abs() < 1e-14);
        assert_eq!(ls_slope(&[1.0], &[2.0]), 0.0);
    }
}
