//! Functions of the dilation generator `A_+` on `L^2(R_+, d lambda)`.
//!
//! After `x = ln lambda` and `g(x) = e^{x/2} f(e^x)`, dilations become
//! translations and `A_+ = -i d/dx`. On a log grid with step `h` the unitary
//! coordinates `u_j = sqrt(h lambda_j) f(lambda_j) = sqrt(h) g(x_j)` are the
//! ones all operators act on. Two realizations of `phi(A_+)` are provided:
//!
//! * the circulant one, diagonalized by the discrete Mellin pair (FFT),
//! * the Toeplitz section `U_{jl} = t_{j-l}`, with
//!   `t_n = (h / 2 pi) int_{-pi/h}^{pi/h} phi(nu) e^{i nu n h} d nu`,
//!   which has no periodization and is what operator assembly uses.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grids::LogEnergyGrid;
use crate::linalg::{singular_values, CMatrix, CVector, I};

/// Tolerance of the circle-property check on symbol samples.
pub const CIRCLE_TOLERANCE: f64 = 1e-12;
/// Largest adjacent-sample change, relative to the sup norm, that the
/// principal-value path accepts.
pub const PV_ROUGHNESS_LIMIT: f64 = 0.1;

/// `theta(nu) = (1 - tanh(2 pi nu) - i sech(2 pi nu)) / 2`.
pub fn theta(nu: f64) -> Complex64 {
    let x = 2.0 * PI * nu;
    Complex64::new(0.5 * (1.0 - x.tanh()), -0.5 / x.cosh())
}

/// `R(mu) = (1 + tanh(pi mu) - i sech(pi mu)) / 2`, the symbol of the
/// three-dimensional dilation generator; `theta(nu) = R(-2 nu)`.
pub fn r_symbol(mu: f64) -> Complex64 {
    let x = PI * mu;
    Complex64::new(0.5 * (1.0 + x.tanh()), -0.5 / x.cosh())
}

/// Discrete Mellin transform on a geometric grid: `lambda^{1/2}` weighting,
/// then a unitary DFT in `ln lambda`.
#[derive(Clone)]
pub struct MellinPair {
    n: usize,
    step: f64,
    density: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MellinPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MellinPair").field("n", &self.n).field("step", &self.step).finish()
    }
}

pub fn mellin_pair(grid_e: &LogEnergyGrid) -> Result<MellinPair> {
    mellin_pair_from_nodes(grid_e.nodes())
}

pub fn mellin_pair_from_nodes(nodes: &[f64]) -> Result<MellinPair> {
    let n = nodes.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(LabError::InvalidGrid(format!("Mellin pair needs a power-of-two grid, got {n}")));
    }
    if nodes.iter().any(|&l| !(l > 0.0)) {
        return Err(LabError::InvalidGrid("Mellin pair needs positive energies".into()));
    }
    let step = (nodes[1] / nodes[0]).ln();
    for w in nodes.windows(2) {
        if ((w[1] / w[0]).ln() - step).abs() > 1e-10 * step.abs().max(1.0) {
            return Err(LabError::InvalidGrid("Mellin pair needs a geometric grid".into()));
        }
    }
    let mut planner = FftPlanner::new();
    Ok(MellinPair {
        n,
        step,
        density: nodes.iter().map(|l| (step * l).sqrt()).collect(),
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
    })
}

impl MellinPair {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Dual frequencies in FFT order, `nu_m = 2 pi m / (N h)`, `m` signed.
    pub fn dual_grid(&self) -> Vec<f64> {
        dual_grid(self.n, self.step)
    }

    /// Unitary coordinates to dual coordinates.
    pub fn forward_unitary(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(u.len())?;
        let mut buf = u.to_vec();
        self.forward.process(&mut buf);
        let s = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= s);
        Ok(buf)
    }

    pub fn inverse_unitary(&self, w: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(w.len())?;
        let mut buf = w.to_vec();
        self.inverse.process(&mut buf);
        let s = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|z| *z *= s);
        Ok(buf)
    }

    /// Samples `f(lambda_j)` to dual coordinates; `sum |out|^2` approximates
    /// `int |f|^2 d lambda`.
    pub fn forward(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(f.len())?;
        let u: Vec<Complex64> = f.iter().zip(&self.density).map(|(z, d)| z * d).collect();
        self.forward_unitary(&u)
    }

    pub fn inverse(&self, w: &[Complex64]) -> Result<Vec<Complex64>> {
        let u = self.inverse_unitary(w)?;
        Ok(u.iter().zip(&self.density).map(|(z, d)| z / d).collect())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(LabError::GridMismatch(format!("vector of length {len} on a grid of {}", self.n)));
        }
        Ok(())
    }
}

fn dual_grid(n: usize, step: f64) -> Vec<f64> {
    let half = n as i64 / 2;
    (0..n as i64)
        .map(|m| {
            let signed = if m < half { m } else { m - n as i64 };
            2.0 * PI * signed as f64 / (n as f64 * step)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Symbol {
    Theta,
    /// `1 - theta`.
    ThetaComplement,
    Constant { re: f64, im: f64 },
}

impl Symbol {
    pub fn value(&self, nu: f64) -> Complex64 {
        match *self {
            Symbol::Theta => theta(nu),
            Symbol::ThetaComplement => Complex64::new(1.0, 0.0) - theta(nu),
            Symbol::Constant { re, im } => Complex64::new(re, im),
        }
    }

    fn name(&self) -> String {
        match *self {
            Symbol::Theta => "theta".into(),
            Symbol::ThetaComplement => "1-theta".into(),
            Symbol::Constant { re, im } => format!("constant({re}{im:+}i)"),
        }
    }
}

/// `t_n` for `theta` on the band `|nu| <= pi/h`.
///
/// `theta = 1/2 - sgn/2 + g`, with `g = (sgn - tanh(2 pi nu))/2 - i sech(2 pi nu)/2`
/// decaying like `e^{-4 pi |nu|}`; the band edge at `pi/h` is far in its tail,
/// so `g` is transformed over the whole line in closed form.
fn theta_toeplitz(n: i64, h: f64) -> Complex64 {
    if n == 0 {
        return Complex64::new(0.5, -h / (8.0 * PI));
    }
    let nf = n as f64;
    let x = nf * h;
    let alternating = if n % 2 == 0 { 0.0 } else { 2.0 };
    let sign_part = -I * alternating / (2.0 * PI * nf);
    // int (sgn - tanh 2 pi nu) e^{i nu x} = 2i/x - (i/2) csch(x/4)
    // int sech(2 pi nu) e^{i nu x}         = sech(x/4)/2
    let smooth = I * (1.0 / x - 0.25 / (x / 4.0).sinh()) - I * 0.25 / (x / 4.0).cosh();
    sign_part + smooth * (h / (2.0 * PI))
}

/// Samples of a symbol on the dual grid of a log energy grid.
#[derive(Debug, Clone)]
pub struct MellinMultiplier {
    pub name: String,
    pub symbol: Symbol,
    /// Dual frequencies in FFT order.
    pub nu: Vec<f64>,
    pub samples: Vec<Complex64>,
    pub step: f64,
    pub lambda_min: f64,
}

impl MellinMultiplier {
    pub fn new(grid_e: &LogEnergyGrid, symbol: Symbol) -> Self {
        let nu = dual_grid(grid_e.len(), grid_e.step());
        let samples = nu.iter().map(|&v| symbol.value(v)).collect();
        Self {
            name: symbol.name(),
            symbol,
            nu,
            samples,
            step: grid_e.step(),
            lambda_min: grid_e.lambda_min(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn complement(&self) -> Self {
        let symbol = match self.symbol {
            Symbol::Theta => Symbol::ThetaComplement,
            Symbol::ThetaComplement => Symbol::Theta,
            Symbol::Constant { re, im } => Symbol::Constant { re: 1.0 - re, im: -im },
        };
        Self {
            name: symbol.name(),
            symbol,
            samples: self.samples.iter().map(|z| Complex64::new(1.0, 0.0) - z).collect(),
            nu: self.nu.clone(),
            step: self.step,
            lambda_min: self.lambda_min,
        }
    }

    pub fn matches(&self, grid_e: &LogEnergyGrid) -> bool {
        self.len() == grid_e.len()
            && (self.step - grid_e.step()).abs() <= 1e-14 * self.step
            && (self.lambda_min - grid_e.lambda_min()).abs() <= 1e-14 * self.lambda_min
    }

    /// Largest `| |phi(nu_m) - 1/2| - 1/2 |` over the samples.
    pub fn circle_defect(&self) -> f64 {
        self.samples
            .iter()
            .map(|z| ((z - Complex64::new(0.5, 0.0)).norm() - 0.5).abs())
            .fold(0.0, f64::max)
    }

    /// Coefficient `t_n` of the Toeplitz section.
    pub fn toeplitz_coefficient(&self, n: i64) -> Complex64 {
        let delta = if n == 0 { 1.0 } else { 0.0 };
        match self.symbol {
            Symbol::Theta => theta_toeplitz(n, self.step),
            Symbol::ThetaComplement => Complex64::new(delta, 0.0) - theta_toeplitz(n, self.step),
            Symbol::Constant { re, im } => Complex64::new(re, im) * delta,
        }
    }

    /// `N x N` Toeplitz section acting on unitary coordinates.
    pub fn toeplitz_matrix(&self) -> CMatrix {
        let n = self.len();
        let t: Vec<Complex64> = (-(n as i64) + 1..n as i64).map(|m| self.toeplitz_coefficient(m)).collect();
        CMatrix::from_fn(n, n, |j, l| t[j + n - 1 - l])
    }
}

pub fn theta_multiplier(grid_e: &LogEnergyGrid) -> Result<MellinMultiplier> {
    let m = MellinMultiplier::new(grid_e, Symbol::Theta);
    let defect = m.circle_defect();
    if defect > CIRCLE_TOLERANCE {
        return Err(LabError::Hypothesis(format!("theta samples leave the circle by {defect:e}")));
    }
    let nyquist = PI / grid_e.step();
    let low = (theta(-nyquist) - Complex64::new(1.0, 0.0)).norm();
    let high = theta(nyquist).norm();
    if low > 1e-6 || high > 1e-6 {
        return Err(LabError::Resolution(format!(
            "dual grid too narrow for theta limits: |theta(-nu_max) - 1| = {low:e}, |theta(nu_max)| = {high:e}"
        )));
    }
    Ok(m)
}

/// `phi(A_+) v` for `v` in unitary coordinates, through the Mellin pair.
pub fn apply_dilation_function(mult: &MellinMultiplier, pair: &MellinPair, v: &[Complex64]) -> Result<Vec<Complex64>> {
    if pair.len() != mult.len() || (pair.step() - mult.step).abs() > 1e-14 * mult.step {
        return Err(LabError::GridMismatch("multiplier and Mellin pair on different grids".into()));
    }
    let mut w = pair.forward_unitary(v)?;
    w.iter_mut().zip(&mult.samples).for_each(|(z, s)| *z *= s);
    pair.inverse_unitary(&w)
}

/// Matrix of the circulant realization.
#[derive(Debug, Clone)]
pub struct DilationOperator {
    pub grid: LogEnergyGrid,
    pub multiplier: MellinMultiplier,
    pub matrix: CMatrix,
}

impl DilationOperator {
    pub fn new(grid_e: &LogEnergyGrid, multiplier: MellinMultiplier) -> Result<Self> {
        if !multiplier.matches(grid_e) {
            return Err(LabError::GridMismatch("multiplier built on another grid".into()));
        }
        let pair = mellin_pair(grid_e)?;
        let n = grid_e.len();
        let columns: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|l| {
                let mut e = vec![Complex64::new(0.0, 0.0); n];
                e[l] = Complex64::new(1.0, 0.0);
                apply_dilation_function(&multiplier, &pair, &e).expect("lengths match")
            })
            .collect();
        let matrix = CMatrix::from_fn(n, n, |j, l| columns[l][j]);
        Ok(Self {
            grid: grid_e.clone(),
            multiplier,
            matrix,
        })
    }

    /// `||D D^* - D^* D||_F / ||D||_F^2`.
    pub fn normality_defect(&self) -> f64 {
        let d = &self.matrix;
        let a = d.adjoint();
        (d * &a - &a * d).norm() / d.norm_squared()
    }

    /// Largest distance of an eigenvalue from the circle `|z - 1/2| = 1/2`.
    pub fn spectral_circle_defect(&self) -> f64 {
        let eig = self.matrix.clone().schur().eigenvalues();
        match eig {
            Some(values) => values
                .iter()
                .map(|z| ((z - Complex64::new(0.5, 0.0)).norm() - 0.5).abs())
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        }
    }
}

/// Continuum kernel of `theta(A_+)` off the diagonal,
/// `K(z) = -(i / 8 pi) (csch(z/4) + sech(z/4))`, with
/// `(theta(A_+) g)(x) = g(x)/2 + PV int K(x - y) g(y) dy`.
pub fn theta_kernel(z: f64) -> Complex64 {
    -I / (8.0 * PI) * (1.0 / (z / 4.0).sinh() + 1.0 / (z / 4.0).cosh())
}

/// Weights of the principal-value sum: odd part `csch`, paired as `m` and
/// `-m`; returns `(odd, even)` for offsets `m = 1..len`.
pub fn pv_weights(h: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let odd = (1..=len).map(|m| h / (m as f64 * h / 4.0).sinh()).collect();
    let even = (1..=len).map(|m| h / (m as f64 * h / 4.0).cosh()).collect();
    (odd, even)
}

/// `theta(A_+) v` through the principal-value kernel, second order in `h`.
///
/// The odd part is summed in symmetric pairs; the excluded diagonal node
/// contributes half the pair limit, `-4 h g'(x)`, with a central difference.
pub fn kernel_form(grid_e: &LogEnergyGrid, v: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = grid_e.len();
    if v.len() != n {
        return Err(LabError::GridMismatch(format!("vector of length {} on a grid of {n}", v.len())));
    }
    let sup = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let rough = v.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
    if sup > 0.0 && rough > PV_ROUGHNESS_LIMIT * sup {
        return Err(LabError::Resolution(format!(
            "input changes by {:.3} of its sup norm between samples; PV discretization invalid",
            rough / sup
        )));
    }
    let h = grid_e.step();
    let (odd, even) = pv_weights(h, n);
    let at = |j: i64| -> Complex64 {
        if j < 0 || j >= n as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            v[j as usize]
        }
    };
    let pre = -I / (8.0 * PI);
    Ok((0..n as i64)
        .into_par_iter()
        .map(|j| {
            let mut odd_sum = Complex64::new(0.0, 0.0);
            let mut even_sum = at(j) * h;
            for m in 1..n as i64 {
                let (minus, plus) = (at(j - m), at(j + m));
                odd_sum += (minus - plus) * odd[m as usize - 1];
                even_sum += (minus + plus) * even[m as usize - 1];
            }
            odd_sum -= (at(j + 1) - at(j - 1)) * 2.0;
            at(j) * 0.5 + pre * (odd_sum + even_sum)
        })
        .collect())
}

/// Singular values (descending) of `[phi(A_+), a(lambda)]`, with the
/// Toeplitz section of `phi` and `a` sampled on the grid.
pub fn commutator_compactness_probe(
    mult: &MellinMultiplier,
    a_symbol: impl Fn(f64) -> f64,
    grid_e: &LogEnergyGrid,
) -> Result<Vec<f64>> {
    if !mult.matches(grid_e) {
        return Err(LabError::GridMismatch("multiplier built on another grid".into()));
    }
    let t = mult.toeplitz_matrix();
    let a: Vec<f64> = grid_e.nodes().iter().map(|&l| a_symbol(l)).collect();
    let n = grid_e.len();
    let c = CMatrix::from_fn(n, n, |j, l| t[(j, l)] * (a[l] - a[j]));
    Ok(singular_values(&c))
}

/// Smallest `k*` with `sigma_k / sigma_1 < ratio` for all `k >= k*`
/// (zero-based count of the leading values kept).
pub fn effective_rank(singular: &[f64], ratio: f64) -> usize {
    let Some(&top) = singular.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    singular.iter().rposition(|&s| s / top >= ratio).map_or(0, |i| i + 1)
}

/// Log-Gaussian test vector in unitary coordinates, `center` and `width` in
/// `ln lambda`.
pub fn log_gaussian_vector(grid_e: &LogEnergyGrid, center: f64, width: f64) -> CVector {
    let h = grid_e.step();
    let c = (2.0 * PI * width * width).powf(-0.25) * h.sqrt();
    CVector::from_fn(grid_e.len(), |j, _| {
        let x = grid_e.log_node(j);
        Complex64::new(c * (-(x - center).powi(2) / (4.0 * width * width)).exp(), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::make_log_energy_grid;
    use crate::linalg::operator_norm;

    fn wide(n: usize) -> LogEnergyGrid {
        make_log_energy_grid(n, 1e-8, 1e8).unwrap()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<Complex64> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        (0..n).map(|_| Complex64::new(next(), next())).collect()
    }

    #[test]
    fn theta_values() {
        assert!((theta(0.0) - Complex64::new(0.5, -0.5)).norm() < 1e-15);
        for nu in [-2.0, -1.0, 0.0, 1.0, 2.0, 0.37] {
            assert!(((theta(nu) - Complex64::new(0.5, 0.0)).norm() - 0.5).abs() < 1e-12);
            assert!((theta(nu) - r_symbol(-2.0 * nu)).norm() < 1e-14);
        }
    }

    #[test]
    fn round_trip_and_isometry() {
        let g = wide(256);
        let pair = mellin_pair(&g).unwrap();
        let v = pseudo_random(256, 7);
        let back = pair.inverse_unitary(&pair.forward_unitary(&v).unwrap()).unwrap();
        let err = v.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        let back = pair.inverse(&pair.forward(&v).unwrap()).unwrap();
        // compare in the measure the pair is isometric for
        let err: f64 = v.iter().zip(&back).zip(g.nodes()).map(|((a, b), l)| (a - b).norm_sqr() * g.step() * l).sum::<f64>().sqrt();
        let scale: f64 = v.iter().zip(g.nodes()).map(|(a, l)| a.norm_sqr() * g.step() * l).sum::<f64>().sqrt();
        assert!(err < 1e-12 * scale);
        // f(lambda) = lambda^{-1/2} exp(-(ln lambda)^2 / 2): int |f|^2 = sqrt(pi)
        let f: Vec<Complex64> = g.nodes().iter().map(|l| Complex64::from(l.powf(-0.5) * (-(l.ln().powi(2)) / 2.0).exp())).collect();
        let w = pair.forward(&f).unwrap();
        let norm2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm2 - PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn shift_becomes_phase() {
        let g = wide(128);
        let pair = mellin_pair(&g).unwrap();
        let u = pseudo_random(128, 3);
        let shifted: Vec<Complex64> = (0..128).map(|j| u[(j + 1) % 128]).collect();
        let a = pair.forward_unitary(&u).unwrap();
        let b = pair.forward_unitary(&shifted).unwrap();
        for (m, nu) in pair.dual_grid().iter().enumerate() {
            assert!((b[m] - a[m] * (I * nu * g.step()).exp()).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_geometric() {
        let mut nodes: Vec<f64> = (0..64).map(|j| 1.0 + j as f64).collect();
        assert!(mellin_pair_from_nodes(&nodes).is_err());
        nodes.truncate(48);
        assert!(mellin_pair_from_nodes(&nodes).is_err());
    }

    #[test]
    fn multiplier_invariants() {
        let g = wide(256);
        let m = theta_multiplier(&g).unwrap();
        assert!(m.circle_defect() < 1e-12);
        let pair = mellin_pair(&g).unwrap();
        let v = pseudo_random(256, 11);
        let one = MellinMultiplier::new(&g, Symbol::Constant { re: 1.0, im: 0.0 });
        let same = apply_dilation_function(&one, &pair, &v).unwrap();
        assert!(v.iter().zip(&same).all(|(a, b)| (a - b).norm() < 1e-12));
        let a = apply_dilation_function(&m, &pair, &v).unwrap();
        let b = apply_dilation_function(&m.complement(), &pair, &v).unwrap();
        assert!(v.iter().zip(a.iter().zip(&b)).all(|(x, (p, q))| (p + q - x).norm() < 1e-12));
        let na: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(na <= nv * (1.0 + 1e-8));
    }

    #[test]
    fn operator_is_normal_with_spectrum_on_arc() {
        let g = wide(128);
        let d = DilationOperator::new(&g, theta_multiplier(&g).unwrap()).unwrap();
        assert!(d.normality_defect() < 1e-10);
        assert!(d.spectral_circle_defect() < 1e-6);
        assert!(operator_norm(&d.matrix) <= 1.0 + 1e-8);
    }

    #[test]
    fn toeplitz_matches_band_limited_quadrature() {
        let h = 0.3;
        for n in [-7i64, -2, -1, 0, 1, 3, 8] {
            // Gauss-Legendre over [-pi/h, pi/h] in many panels
            let (x, w) = crate::grids::gauss_legendre(20);
            let panels = 400;
            let a = -PI / h;
            let width = 2.0 * PI / h / panels as f64;
            let mut sum = Complex64::new(0.0, 0.0);
            for p in 0..panels {
                let lo = a + p as f64 * width;
                for (xi, wi) in x.iter().zip(&w) {
                    let nu = lo + 0.5 * width * (xi + 1.0);
                    sum += theta(nu) * (I * nu * n as f64 * h).exp() * (0.5 * width * wi);
                }
            }
            let expect = sum * (h / (2.0 * PI));
            assert!((theta_toeplitz(n, h) - expect).norm() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn pv_weights_cancel() {
        let (odd, _) = pv_weights(0.1, 50);
        let total: f64 = odd.iter().sum::<f64>() - odd.iter().sum::<f64>();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn kernel_and_mellin_agree() {
        let mut prev = f64::INFINITY;
        // the circulant wraps the e^{-|z|/4} kernel tail around, so the span
        // has to be wide for the two paths to meet at this level
        for n in [1024, 2048, 4096] {
            let g = make_log_energy_grid(n, 1e-24, 1e24).unwrap();
            let m = theta_multiplier(&g).unwrap();
            let pair = mellin_pair(&g).unwrap();
            let mut worst: f64 = 0.0;
            for (c, w) in [(0.0, 1.0), (-4.0, 1.5), (3.0, 0.8)] {
                let v: Vec<Complex64> = log_gaussian_vector(&g, c, w).iter().copied().collect();
                let a = apply_dilation_function(&m, &pair, &v).unwrap();
                let b = kernel_form(&g, &v).unwrap();
                let err: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
                worst = worst.max(err);
            }
            assert!(worst < 1e-3, "n={n}: {worst}");
            assert!(worst < prev);
            prev = worst;
        }
    }

    #[test]
    fn kernel_rejects_rough_input() {
        let g = wide(128);
        let v = pseudo_random(128, 5);
        assert!(matches!(kernel_form(&g, &v), Err(LabError::Resolution(_))));
    }

    #[test]
    fn commutator_with_constant_vanishes() {
        let g = wide(128);
        let m = theta_multiplier(&g).unwrap();
        let s = commutator_compactness_probe(&m, |_| 1.0, &g).unwrap();
        assert!(s[0] == 0.0);
    }

    #[test]
    fn commutator_has_stable_low_rank() {
        let mut ranks = Vec::new();
        for n in [256, 512] {
            let g = wide(n);
            let m = theta_multiplier(&g).unwrap();
            let s = commutator_compactness_probe(&m, |l| l / (1.0 + l), &g).unwrap();
            ranks.push(effective_rank(&s, 1e-3));
        }
        assert!(ranks[0] < 40 && ranks[0] == ranks[1], "{ranks:?}");
    }
}
