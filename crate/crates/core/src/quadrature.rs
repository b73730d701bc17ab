//! Quadrature primitives: adaptive Simpson and Gauss-Legendre cell averages.

use crate::Real;

const GL5_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Average of `f` over `[a, b]` by five-point Gauss-Legendre.
pub fn cell_average<T: Real>(f: impl Fn(T) -> T, a: T, b: T) -> T {
    let mid = (a + b) * T::lit(0.5);
    let half = (b - a) * T::lit(0.5);
    let s: T = GL5_NODES.iter().zip(GL5_WEIGHTS).map(|(&x, w)| T::lit(w) * f(mid + half * T::lit(x))).sum();
    s * T::lit(0.5)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) * T::lit(0.5);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
    let m = (a + b) * T::lit(0.5);
    let lm = (a + m) * T::lit(0.5);
    let rm = (m + b) * T::lit(0.5);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    let half = tol * T::lit(0.5);
    recurse(f, a, m, fa, flm, fm, left, half, depth - 1) + recurse(f, m, b, fm, frm, fb, right, half, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_degree_nine() {
        let avg = cell_average(|x: f64| x.powi(9) + 3.0 * x.powi(4), 0.0, 2.0);
        let exact = (2f64.powi(10) / 10.0 + 3.0 * 2f64.powi(5) / 5.0) / 2.0;
        assert!((avg - exact).abs() < 1e-12);
    }

    #[test]
    fn simpson_on_exponential() {
        let v = adaptive_simpson(&|x: f64| (-x).exp(), 0.0, 40.0, 1e-13);
        assert!((v - (1.0 - (-40f64).exp())).abs() < 1e-11);
    }
}
