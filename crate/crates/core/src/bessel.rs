//! Real spherical Bessel functions `j_l`, `y_l`, the outgoing Hankel function
//! `h_l^(1) = j_l + i y_l`, and their Riccati forms `x j_l(x)`, `x y_l(x)`.
//!
//! `j_l` uses the power series for small arguments, Miller's downward
//! recurrence for `x < l`, and upward recurrence otherwise. `y_l` is always
//! computed upward, which is stable for the irregular solution.

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Default highest angular momentum handled by the lab.
pub const L_CAP_DEFAULT: usize = 12;

/// Hard limit of the fixed-size recurrence buffers.
const L_BUFFER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub l: usize,
    pub x: f64,
    pub j: f64,
    pub y: f64,
    pub dj: f64,
    pub dy: f64,
    pub h1: Complex64,
}

impl BesselEval {
    /// `j y' - j' y`, which equals `1/x^2` exactly.
    pub fn wronskian(&self) -> f64 {
        self.j * self.dy - self.dj * self.y
    }
}

/// Riccati-Bessel values `x j_l(x)`, `x y_l(x)` and their `x` derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Riccati {
    pub j: f64,
    pub y: f64,
    pub dj: f64,
    pub dy: f64,
}

impl Riccati {
    /// Outgoing Riccati-Hankel function `x h_l^(1)(x)`.
    pub fn h(&self) -> Complex64 {
        Complex64::new(self.j, self.y)
    }

    pub fn dh(&self) -> Complex64 {
        Complex64::new(self.dj, self.dy)
    }
}

pub fn spherical_bessel(l: usize, x: f64) -> Result<BesselEval> {
    spherical_bessel_capped(l, x, L_CAP_DEFAULT)
}

pub fn spherical_bessel_capped(l: usize, x: f64, l_cap: usize) -> Result<BesselEval> {
    if l > l_cap || l + 1 >= L_BUFFER {
        return Err(LabError::OutOfRange(format!("l = {l} exceeds l_cap = {l_cap}")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(LabError::OutOfRange(format!("x = {x} must be positive and finite")));
    }
    let (j, dj) = j_and_derivative(l, x);
    let (y, dy) = y_and_derivative(l, x);
    if !y.is_finite() || !dy.is_finite() {
        return Err(LabError::OutOfRange(format!(
            "y_{l}({x:e}) overflows double precision"
        )));
    }
    Ok(BesselEval {
        l,
        x,
        j,
        y,
        dj,
        dy,
        h1: Complex64::new(j, y),
    })
}

/// Riccati-Bessel functions for hot loops. Arguments must be positive; for
/// very small `x` and large `l` the irregular part may be infinite.
pub fn riccati(l: usize, x: f64) -> Riccati {
    debug_assert!(x > 0.0);
    let (j, dj) = j_and_derivative(l, x);
    let (y, dy) = y_and_derivative(l, x);
    Riccati {
        j: x * j,
        y: x * y,
        dj: j + x * dj,
        dy: y + x * dy,
    }
}

/// Regular Riccati-Bessel function `x j_l(x)` only.
pub fn riccati_j(l: usize, x: f64) -> f64 {
    let mut buf = [0.0; L_BUFFER];
    fill_j(l, x, &mut buf);
    x * buf[l]
}

/// Decaying Riccati solution of `u'' = (l(l+1)/x^2 + 1) u`, normalized as
/// `e^{-x} sum_m (l+m)!/(m!(l-m)!) (2x)^{-m}`. Returns value and derivative.
pub fn riccati_decaying(l: usize, x: f64) -> (f64, f64) {
    let mut poly = 0.0;
    let mut dpoly = 0.0;
    let mut coeff = 1.0;
    for m in 0..=l {
        if m > 0 {
            // (l+m)!/(m!(l-m)!) from the previous term
            coeff *= ((l + m) * (l - m + 1)) as f64 / m as f64;
        }
        let p = (2.0 * x).powi(-(m as i32));
        poly += coeff * p;
        dpoly += -(m as f64) * coeff * p / x;
    }
    let e = (-x).exp();
    (e * poly, e * (dpoly - poly))
}

fn j_and_derivative(l: usize, x: f64) -> (f64, f64) {
    let mut buf = [0.0; L_BUFFER];
    fill_j(l + 1, x, &mut buf);
    let j = buf[l];
    let dj = if l == 0 {
        -buf[1]
    } else {
        buf[l - 1] - (l as f64 + 1.0) / x * j
    };
    (j, dj)
}

fn y_and_derivative(l: usize, x: f64) -> (f64, f64) {
    let mut buf = [0.0; L_BUFFER];
    fill_y(l + 1, x, &mut buf);
    let y = buf[l];
    let dy = if l == 0 {
        -buf[1]
    } else {
        buf[l - 1] - (l as f64 + 1.0) / x * y
    };
    (y, dy)
}

/// Fills `out[0..=n]` with `j_0(x) ..= j_n(x)`.
fn fill_j(n: usize, x: f64, out: &mut [f64; L_BUFFER]) {
    if x < 1.0 {
        for (l, slot) in out.iter_mut().enumerate().take(n + 1) {
            *slot = j_series(l, x);
        }
        return;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    out[0] = j0;
    if n == 0 {
        return;
    }
    out[1] = j1;
    if (n as f64) <= x {
        for l in 1..n {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return;
    }
    // Miller: downward from well above n, rescaling to stay finite.
    let start = n + 20 + x as usize;
    let mut above = 0.0_f64;
    let mut current = 1e-30_f64;
    let mut tmp = [0.0_f64; 3 * L_BUFFER];
    tmp[start] = current;
    for l in (1..=start).rev() {
        let below = (2 * l + 1) as f64 / x * current - above;
        above = current;
        current = below;
        tmp[l - 1] = current;
        if current.abs() > 1e250 {
            for v in tmp.iter_mut().take(start + 1).skip(l - 1) {
                *v *= 1e-250;
            }
            above *= 1e-250;
            current *= 1e-250;
        }
    }
    let scale = if j0.abs() >= j1.abs() { j0 / tmp[0] } else { j1 / tmp[1] };
    for l in 0..=n {
        out[l] = tmp[l] * scale;
    }
}

fn j_series(l: usize, x: f64) -> f64 {
    let mut prefactor = 1.0;
    for i in 0..l {
        prefactor *= x / (2 * i + 3) as f64;
    }
    // x^l / (2l+1)!! built incrementally
    let mut term = 1.0;
    let mut sum = 1.0;
    let z = -0.5 * x * x;
    for k in 1..40 {
        term *= z / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    prefactor * sum
}

/// Fills `out[0..=n]` with `y_0(x) ..= y_n(x)`.
fn fill_y(n: usize, x: f64, out: &mut [f64; L_BUFFER]) {
    let (s, c) = x.sin_cos();
    out[0] = -c / x;
    if n == 0 {
        return;
    }
    out[1] = -c / (x * x) - s / x;
    for l in 1..n {
        out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn j0_zero_at_pi() {
        let b = spherical_bessel(0, PI).unwrap();
        assert!(b.j.abs() < 1e-14);
    }

    #[test]
    fn j1_at_one_matches_closed_form() {
        let expected = 1f64.sin() - 1f64.cos();
        let b = spherical_bessel(1, 1.0).unwrap();
        assert!((b.j - expected).abs() < 1e-15);
        assert!((b.j - 0.301_168_678_939_756_8).abs() < 1e-14);
    }

    #[test]
    fn wronskian_at_l5_half() {
        let b = spherical_bessel(5, 0.5).unwrap();
        assert!((b.wronskian() - 4.0).abs() / 4.0 < 1e-9);
    }

    #[test]
    fn wronskian_sweep() {
        for l in 0..=12 {
            for i in 0..=120 {
                let x = 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0);
                let b = spherical_bessel(l, x).unwrap();
                let rel = (b.wronskian() * x * x - 1.0).abs();
                assert!(rel < 1e-10, "l={l} x={x} rel={rel}");
            }
        }
    }

    #[test]
    fn closed_forms_l2() {
        for &x in &[0.3, 0.9, 1.0, 1.7, 2.5, 7.0, 40.0] {
            let (s, c) = f64::sin_cos(x);
            let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
            let y2 = -(3.0 / (x * x) - 1.0) * c / x - 3.0 * s / (x * x);
            let b = spherical_bessel(2, x).unwrap();
            assert!((b.j - j2).abs() < 1e-13 * (1.0 + j2.abs()), "x={x}");
            assert!((b.y - y2).abs() < 1e-12 * (1.0 + y2.abs()), "x={x}");
        }
    }

    #[test]
    fn hankel_is_j_plus_iy() {
        let b = spherical_bessel(3, 2.2).unwrap();
        assert_eq!(b.h1, Complex64::new(b.j, b.y));
    }

    #[test]
    fn rejects_above_cap_and_overflow() {
        assert!(spherical_bessel(13, 1.0).is_err());
        assert!(spherical_bessel(0, 0.0).is_err());
        assert!(spherical_bessel_capped(40, 1e-9, 60).is_err());
    }

    #[test]
    fn riccati_asymptotics() {
        let x = 500.0;
        for l in 0..5 {
            let r = riccati(l, x);
            let phase = x - l as f64 * PI / 2.0;
            assert!((r.j - phase.sin()).abs() < 1e-2 * (l as f64 + 1.0));
            assert!((r.y + phase.cos()).abs() < 1e-2 * (l as f64 + 1.0));
        }
    }

    #[test]
    fn decaying_solution_satisfies_ode() {
        for l in 0..4 {
            let x = 1.7;
            let d = 1e-4;
            let (v, dv) = riccati_decaying(l, x);
            let (vp, _) = riccati_decaying(l, x + d);
            let (vm, _) = riccati_decaying(l, x - d);
            let second = (vp - 2.0 * v + vm) / (d * d);
            let rhs = ((l * (l + 1)) as f64 / (x * x) + 1.0) * v;
            assert!((second - rhs).abs() < 1e-5 * rhs.abs().max(1e-3));
            assert!(((vp - vm) / (2.0 * d) - dv).abs() < 1e-7);
        }
    }
}
