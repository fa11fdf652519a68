//! Adaptive Simpson integration.

use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub intervals: usize,
    /// Subdivision cap was hit before the tolerance was met everywhere.
    pub capped: bool,
}

/// Integrates `f` over `[a, b]` (either orientation) to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_intervals: usize) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error_estimate: 0.0, intervals: 0, capped: false };
    }
    if b < a {
        let mut q = adaptive_simpson(f, b, a, tol, max_intervals);
        q.value = -q.value;
        return q;
    }
    struct Seg {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
    }
    let simpson = |a: f64, b: f64, fa: f64, fm: f64, fb: f64| (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let mut stack: Vec<Seg> = Vec::new();
    stack.push(Seg { a, b, fa, fm, fb, whole: simpson(a, b, fa, fm, fb), tol });
    let mut value = 0.0;
    let mut err = 0.0;
    let mut intervals = 1usize;
    let mut capped = false;
    while let Some(s) = stack.pop() {
        let m = 0.5 * (s.a + s.b);
        let lm = 0.5 * (s.a + m);
        let rm = 0.5 * (m + s.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(s.a, m, s.fa, flm, s.fm);
        let right = simpson(m, s.b, s.fm, frm, s.fb);
        let delta = left + right - s.whole;
        let tiny = (s.b - s.a) <= 1e-12 * (1.0 + s.a.abs());
        if delta.abs() <= 15.0 * s.tol || tiny || intervals >= max_intervals {
            if delta.abs() > 15.0 * s.tol && !tiny {
                capped = true;
            }
            value += left + right + delta / 15.0;
            err += delta.abs() / 15.0;
        } else {
            intervals += 1;
            let half = 0.5 * s.tol;
            stack.push(Seg { a: m, b: s.b, fa: s.fm, fm: frm, fb: s.fb, whole: right, tol: half });
            stack.push(Seg { a: s.a, b: m, fa: s.fa, fm: flm, fb: s.fm, whole: left, tol: half });
        }
    }
    Quadrature { value, error_estimate: err, intervals, capped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;

    #[test]
    fn polynomial_exact() {
        let q = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 3.0, 1e-12, 10_000);
        assert!((q.value - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn exponential_and_reversed() {
        let q = adaptive_simpson(math::exp, 0.0, 2.0, 1e-10, 10_000);
        assert!((q.value - (math::exp(2.0) - 1.0)).abs() < 1e-10);
        let r = adaptive_simpson(math::exp, 2.0, 0.0, 1e-10, 10_000);
        assert_eq!(r.value, -q.value);
        assert_eq!(adaptive_simpson(math::exp, 1.0, 1.0, 1e-10, 10).value, 0.0);
    }

    #[test]
    fn cap_is_reported() {
        let q = adaptive_simpson(math::sqrt, 0.0, 1.0, 1e-16, 4);
        assert!(q.capped);
        assert!(q.intervals <= 4);
    }
}
