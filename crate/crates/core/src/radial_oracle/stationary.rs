//! Outgoing scattering solutions `psi^+_lambda` built from the Numerov
//! regular solution inside the potential and free Riccati functions outside.
//!
//! Normalization: `psi^+ = (pi k)^{-1/2} e^{i delta} (jhat cos delta - yhat sin delta)`
//! beyond the matching radius, so that `int psi^+_lambda phi(lambda) d lambda`
//! is `W_- F^* phi`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{integrate_regular_into, matching_radius, oracle_grid, principal_phase};
use crate::bessel::{riccati, riccati_j};
use crate::error::{LabError, Result};
use crate::potentials::Potential;

/// Points of the Lagrange stencil used between Numerov nodes.
const STENCIL: usize = 8;

/// Numerov step adequate for momenta up to `k_max`.
pub fn numerov_step(p: &Potential, k_max: f64) -> Result<f64> {
    let grid = oracle_grid(p, k_max, 0.0)?;
    grid.uniform_step()
        .ok_or_else(|| LabError::InvalidGrid("oracle grid is not uniform".into()))
}

#[derive(Debug, Clone)]
pub struct ScatteringState {
    pub l: usize,
    pub k: f64,
    /// Principal-branch phase shift from the Numerov matching.
    pub delta: f64,
    step: f64,
    r_match: f64,
    /// Regular solution at `i h`, `i = 0..=m`.
    inner: Vec<f64>,
    /// `psi^+ = coefficient * u` inside.
    coefficient: Complex64,
}

impl ScatteringState {
    pub fn new(p: &Potential, l: usize, k: f64, h: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(LabError::OutOfRange(format!("k = {k} must be positive")));
        }
        let m = matching_radius(p, h)?;
        let r_match = m as f64 * h;
        let mut inner = Vec::with_capacity(m + 1);
        let sol = integrate_regular_into(p, l, k * k, h, m, Some(&mut inner));
        let delta = principal_phase(&sol, l, k, r_match)?;
        let b = riccati(l, k * r_match);
        let (c, s) = (delta.cos(), delta.sin());
        let a = b.j * c - b.y * s;
        let da = b.dj * c - b.dy * s;
        // u = alpha A(k r) near r_match, fitted on value and derivative together
        let alpha = (sol.u * a + sol.du / k * da) / (a * a + da * da);
        let norm = 1.0 / (PI * k).sqrt();
        let coefficient = Complex64::from_polar(norm / alpha, delta);
        Ok(Self {
            l,
            k,
            delta,
            step: h,
            r_match,
            inner,
            coefficient,
        })
    }

    pub fn r_match(&self) -> f64 {
        self.r_match
    }

    pub fn value(&self, r: f64) -> Complex64 {
        if r >= self.r_match {
            let b = riccati(self.l, self.k * r);
            let amp = (b.j * self.delta.cos() - b.y * self.delta.sin()) / (PI * self.k).sqrt();
            Complex64::from_polar(amp, self.delta)
        } else {
            self.coefficient * self.interpolate(r)
        }
    }

    /// `psi^+ - psi^0`, with `psi^0 = (pi k)^{-1/2} jhat_l(k r)`.
    pub fn scattered(&self, r: f64) -> Complex64 {
        self.value(r) - riccati_j(self.l, self.k * r) / (PI * self.k).sqrt()
    }

    fn interpolate(&self, r: f64) -> f64 {
        let m = self.inner.len() - 1;
        let x = r / self.step;
        let base = (x.floor() as isize - (STENCIL as isize / 2 - 1)).clamp(0, (m + 1 - STENCIL) as isize) as usize;
        let mut sum = 0.0;
        for a in 0..STENCIL {
            let xa = (base + a) as f64;
            if (x - xa).abs() < 1e-12 {
                return self.inner[base + a];
            }
            let mut w = 1.0;
            for b in 0..STENCIL {
                if a != b {
                    w *= (x - (base + b) as f64) / (xa - (base + b) as f64);
                }
            }
            sum += w * self.inner[base + a];
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_state_is_free() {
        let p = Potential::free();
        let h = numerov_step(&p, 5.0).unwrap();
        let st = ScatteringState::new(&p, 1, 2.0, h).unwrap();
        for r in [0.013, 0.4, 0.77, 1.0, 3.0] {
            assert!(st.scattered(r).norm() < 1e-9, "r={r}");
        }
    }

    #[test]
    fn square_well_inside_matches_closed_form() {
        // s-wave inside: sin(K r) with K^2 = k^2 + V0; continuous at the edge
        let p = Potential::square_well(4.0, 1.0);
        let h = numerov_step(&p, 5.0).unwrap();
        let k: f64 = 1.3;
        let st = ScatteringState::new(&p, 0, k, h).unwrap();
        let big_k = (k * k + 4.0).sqrt();
        let delta = (k / big_k * big_k.tan()).atan() - k;
        let branch = ((st.delta - delta) / PI).round();
        assert!((st.delta - delta - branch * PI).abs() < 1e-8);
        let amp = (st.delta + k).sin() / big_k.sin();
        for r in [0.1, 0.3337, 0.8, 0.99999] {
            let expect = Complex64::from_polar(amp * (big_k * r).sin() / (PI * k).sqrt(), st.delta);
            assert!((st.value(r) - expect).norm() < 1e-9, "r={r}");
        }
        assert!((st.value(1.0 - 1e-9) - st.value(1.0 + 1e-9)).norm() < 1e-7);
    }
}
