//! Exponentially fitted face fluxes and the conservative explicit update.
//!
//! Every 1D model here is `d_t n = d_z F` with `F = d_z n + a(z) n`, where a
//! positive drift `a` pushes mass towards `z = 0`. Face fluxes use the
//! Scharfetter-Gummel form
//!
//! ```text
//! F = (B(-a h) n_right - B(a h) n_left) / h,    B(x) = x / (e^x - 1),
//! ```
//!
//! which vanishes exactly on `n_right / n_left = exp(-a h)` and reduces to
//! upwinding on the drift when `|a h|` is large. With `dt <= h^2 / (2 + |a| h)`
//! every cell update is a nonnegative combination of old values.

use crate::error::{Error, Result};
use crate::Real;

/// `B(x) = x / (e^x - 1)`, with `B(0) = 1`.
#[inline]
pub fn bernoulli<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-5) {
        T::one() - x * T::lit(0.5) + x * x / T::lit(12.0)
    } else {
        x / x.exp_m1()
    }
}

/// Flux of `d_z n + a n` across a face of width `h` between `left` and `right`.
#[inline]
pub fn face_flux<T: Real>(left: T, right: T, drift: T, h: T) -> T {
    let x = drift * h;
    (bernoulli(-x) * right - bernoulli(x) * left) / h
}

/// Largest step keeping the explicit update positive for drifts bounded by `speed`.
#[inline]
pub fn positivity_dt<T: Real>(h: T, speed: T) -> T {
    h * h / (T::lit(2.0) + speed.abs() * h)
}

/// Fluxes at the `n + 1` faces; the two end faces are zero and interior face
/// `k` (between cells `k - 1` and `k`) uses `drift(k)`.
pub fn interior_fluxes<T: Real>(values: &[T], h: T, drift: impl Fn(usize) -> T) -> Vec<T> {
    let n = values.len();
    let mut f = vec![T::zero(); n + 1];
    for k in 1..n {
        f[k] = face_flux(values[k - 1], values[k], drift(k), h);
    }
    f
}

/// `n_i + dt / h (F_{i+1} - F_i)`; round-off negatives at vacuum are zeroed,
/// anything larger is an error.
pub fn apply_divergence<T: Real>(values: &[T], fluxes: &[T], dt: T, h: T) -> Result<Vec<T>> {
    let r = dt / h;
    let slack = T::lit(64.0) * T::epsilon();
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let (fr, fl) = (fluxes[i + 1], fluxes[i]);
            let next = v + r * (fr - fl);
            if next >= T::zero() {
                Ok(next)
            } else if -next <= slack * (v + r * (fr.abs() + fl.abs())) {
                Ok(T::zero())
            } else {
                Err(Error::NegativeDensity { cell: i, value: next.as_f64() })
            }
        })
        .collect()
}
