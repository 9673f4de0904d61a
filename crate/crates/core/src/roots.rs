//! One-dimensional safeguarded root finding.

/// Newton iteration safeguarded by bisection on a sign-changing bracket.
///
/// `f` returns `(value, derivative)`. Returns `None` when `[lo, hi]` does not
/// bracket a sign change.
pub fn bracketed_newton<F>(mut f: F, lo: f64, hi: f64, x0: f64, tol: f64, max_iter: usize) -> Option<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    // orient so that f(a) < 0 < f(b)
    let (mut a, mut b) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = if x0 > lo.min(hi) && x0 < lo.max(hi) {
        x0
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / dfx;
        let inside = dfx != 0.0 && newton.is_finite() && (newton - a) * (newton - b) < 0.0;
        let next = if inside { newton } else { 0.5 * (a + b) };
        let step = (next - x).abs();
        x = next;
        if step <= tol * (1.0 + x.abs()) || (a - b).abs() <= tol * (1.0 + x.abs()) {
            break;
        }
    }
    Some(x)
}

/// Stable roots of `a t^2 + b t + c` (`a > 0`), ascending. `None` when the
/// discriminant is negative.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        let t = -b / (2.0 * a);
        return Some((t, t));
    }
    let (r1, r2) = (q / a, c / q);
    Some((r1.min(r2), r1.max(r2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_cubic_root() {
        let r = bracketed_newton(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1.0, 1e-15, 100).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_rejects_non_bracket() {
        assert!(bracketed_newton(|x| (x * x + 1.0, 2.0 * x), -1.0, 1.0, 0.0, 1e-12, 50).is_none());
    }

    #[test]
    fn quadratic_is_stable_for_small_root() {
        let (r1, r2) = quadratic_roots(1.0, -1e8, 1.0).unwrap();
        assert!((r1 - 1e-8).abs() < 1e-22);
        assert!((r2 - 1e8).abs() < 1e-6);
    }
}
