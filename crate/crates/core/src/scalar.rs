//! Bracketed scalar root finding and one-dimensional maximization.

const MAX_BISECTIONS: usize = 400;
const MAX_DOUBLINGS: usize = 2048;

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs (or one is zero).
///
/// Runs until the midpoint can no longer be separated from an endpoint in
/// floating point, or until `|f| <= ftol`. Returns `None` if the bracket is invalid.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, ftol: f64) -> Option<Root>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(Root { x: lo, value: 0.0, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Some(Root { x: hi, value: 0.0, iterations: 0 });
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return None;
    }
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    for it in 1..=MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            return Some(Root { x: best.0, value: best.1, iterations: it });
        }
        let f_mid = f(mid);
        if f_mid.abs() < best.1.abs() {
            best = (mid, f_mid);
        }
        if f_mid.abs() <= ftol {
            return Some(Root { x: mid, value: f_mid, iterations: it });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(Root { x: best.0, value: best.1, iterations: MAX_BISECTIONS })
}

/// Doubles `x` (starting from `start`, which must be positive) until `done(x)` holds.
pub fn expand_until<P>(start: f64, mut done: P) -> Option<f64>
where
    P: FnMut(f64) -> bool,
{
    let mut x = start;
    for _ in 0..MAX_DOUBLINGS {
        if done(x) {
            return Some(x);
        }
        x *= 2.0;
        if !x.is_finite() {
            return None;
        }
    }
    None
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        if x1 >= x2 {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    let f_mid = f(mid);
    [(x1, f1), (x2, f2), (mid, f_mid)].into_iter().fold((mid, f_mid), |acc, p| if p.1 > acc.1 { p } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_rejects_same_sign_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 0.0).is_none());
    }

    #[test]
    fn bisect_handles_decreasing_function() {
        let r = bisect(|g| 2.0 / (g + 1.0) - 1.0, 0.0, 8.0, 0.0).unwrap();
        assert!((r.x - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expand_doubles_until_predicate() {
        assert_eq!(expand_until(1.0, |x| x > 100.0), Some(128.0));
    }

    #[test]
    fn golden_section_locates_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3).powi(2) + 2.0, -1.0, 4.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
    }
}
