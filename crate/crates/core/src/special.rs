//! Moment integrals shared by the spatial and temporal transforms.

use errorfunctions::w_with_relerror;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

fn series_threshold(k: usize) -> f64 {
    2.0_f64.max(0.5 * k as f64)
}

fn phi_series(k: usize, z: C64) -> C64 {
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term / (k as f64 + 1.0);
    for n in 1..200 {
        term *= z / n as f64;
        let add = term / (n + k + 1) as f64;
        sum += add;
        if add.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

fn phi_upward(k: usize, z: C64) -> C64 {
    let e = z.exp();
    let mut p = (e - 1.0) / z;
    for j in 1..=k {
        p = (e - p * j as f64) / z;
    }
    p
}

fn psi_upward(k: usize, z: C64) -> C64 {
    let e = (-z).exp();
    let mut p = (1.0 - e) / z;
    for j in 1..=k {
        p = (1.0 - p * j as f64) / z;
    }
    p
}

/// `∫₀¹ u^k e^{zu} du`.
pub fn unit_moment(k: usize, z: C64) -> C64 {
    if z.norm() <= series_threshold(k) {
        phi_series(k, z)
    } else if z.re <= 0.0 {
        phi_upward(k, z)
    } else {
        z.exp() * psi_upward(k, z)
    }
}

/// `∫₀¹ u^k e^{z(u-1)} du`, i.e. `e^{-z}` times [`unit_moment`] without the overflow.
pub fn unit_moment_anchored(k: usize, z: C64) -> C64 {
    if z.norm() <= series_threshold(k) {
        (-z).exp() * phi_series(k, z)
    } else if z.re > 0.0 {
        psi_upward(k, z)
    } else {
        (-z).exp() * phi_upward(k, z)
    }
}

/// `∫₀^L x^k e^{cx} dx`.
pub fn interval_moment(k: usize, c: C64, len: f64) -> C64 {
    unit_moment(k, c * len) * len.powi(k as i32 + 1)
}

/// `∫₀^∞ x^k e^{cx} dx`, requires `Re c < 0`.
pub fn half_line_moment(k: usize, c: C64) -> C64 {
    let mut fact = 1.0;
    for j in 2..=k {
        fact *= j as f64;
    }
    fact / (-c).powi(k as i32 + 1)
}

/// `exp(off) * ∫₀^∞ y^k e^{-αy² + βy} dy` for `k = 0..=kmax`, with `α > 0`.
///
/// The upward recursion loses roughly `(|β|/2α)^(k-1)` in absolute accuracy,
/// so callers keep `kmax` small.
pub fn gaussian_moments(kmax: usize, alpha: f64, beta: C64, off: C64) -> Vec<C64> {
    let sa = alpha.sqrt();
    let z = C64::new(0.0, -1.0) * beta / (2.0 * sa);
    let pref = PI.sqrt() / (2.0 * sa);
    let j0 = if z.im >= 0.0 {
        off.exp() * w_with_relerror(z, 0.0)
    } else {
        2.0 * (off - z * z).exp() - off.exp() * w_with_relerror(-z, 0.0)
    };
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(pref * j0);
    let e0 = off.exp();
    for k in 1..=kmax {
        let mut acc = beta * out[k - 1];
        if k >= 2 {
            acc += out[k - 2] * (k - 1) as f64;
        } else {
            acc += e0;
        }
        out.push(acc / (2.0 * alpha));
    }
    out
}

pub fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for j in 0..k {
        b = b * (n - j) as f64 / (j + 1) as f64;
    }
    b
}
