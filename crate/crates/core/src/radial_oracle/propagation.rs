//! Time-dependent realization of `W_- = s-lim_{t -> -inf} e^{itH} e^{-itH0}`.
//!
//! The free factor `e^{iTH0}` is applied exactly in the spectral
//! representation. The interacting factor `e^{-iTH}` uses the compact
//! fourth-order discretization `H_h = -B^{-1} D2 + U`, `B = 1 + h^2 D2 / 12`,
//! whose eigenvectors are Numerov solutions, stepped in time with the
//! unitary (2,2) Pade approximant of the exponential written as a product of
//! two Cayley-type factors.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grids::RadialGrid;
use crate::potentials::Potential;
use crate::spectral::{synthesize_free, LogGaussian, SIGNIFICANT_SIGMAS};

/// Convergence target for `||result(T) - result(T/2)||`.
pub const CAUCHY_TOLERANCE: f64 = 1e-4;

/// Largest number of doublings of `t_max`.
const MAX_DOUBLINGS: usize = 5;

/// Norm allowed in the outer tenth of the grid before the run is rejected.
const BOUNDARY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Wavepacket {
    pub grid: RadialGrid,
    pub values: Vec<Complex64>,
    pub l: usize,
    pub norm: f64,
    pub profile: LogGaussian,
    /// Factor applied to `F^* phi` so that the grid norm is exactly one.
    pub scale: f64,
}

impl Wavepacket {
    /// `F^* phi` for a log-Gaussian spectral profile, on a uniform grid.
    pub fn from_profile(grid: RadialGrid, l: usize, profile: LogGaussian) -> Result<Self> {
        if grid.uniform_step().is_none() {
            return Err(LabError::InvalidGrid("wavepackets live on uniform_trapezoid grids".into()));
        }
        let raw = synthesize_free(l, &profile, 0.0, grid.nodes());
        let norm0 = grid_norm(&grid, &raw);
        if !(norm0 > 0.5) {
            return Err(LabError::Boundary(format!(
                "only {norm0:.3} of the packet norm fits on r <= {}",
                grid.r_max()
            )));
        }
        let scale = 1.0 / norm0;
        let values: Vec<Complex64> = raw.iter().map(|z| z * scale).collect();
        let norm = grid_norm(&grid, &values);
        Ok(Self {
            grid,
            values,
            l,
            norm,
            profile,
            scale,
        })
    }

    /// Uniform grid with step `h` wide enough to hold the packet after a free
    /// evolution over `t_span`.
    pub fn grid_for(profile: &LogGaussian, h: f64, t_span: f64) -> Result<RadialGrid> {
        let (_, k_fast) = profile.momentum_band(SIGNIFICANT_SIGMAS);
        let r_max = 2.0 * k_fast * (t_span + profile.delay.abs()) + 40.0;
        let n = (r_max / h).ceil() as usize;
        RadialGrid::uniform(n, n as f64 * h)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagationReport {
    /// `e^{-iTH} e^{iTH0} psi` on the packet grid.
    #[serde(skip)]
    pub values: Vec<Complex64>,
    pub t_final: f64,
    /// `||result(T) - result(T/2)||`.
    pub cauchy_indicator: f64,
    pub output_norm: f64,
    /// Largest per-step change of the discrete norm.
    pub step_norm_drift: f64,
    pub boundary_norm: f64,
    pub steps: usize,
}

fn grid_norm(grid: &RadialGrid, v: &[Complex64]) -> f64 {
    grid.weights()
        .iter()
        .zip(v)
        .map(|(w, z)| w * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn tail_norm(grid: &RadialGrid, v: &[Complex64]) -> f64 {
    let cut = 0.9 * grid.r_max();
    grid.nodes()
        .iter()
        .zip(grid.weights())
        .zip(v)
        .filter(|((r, _), _)| **r > cut)
        .map(|((_, w), z)| w * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Tridiagonal matrix stored by diagonals; `lower[i]` couples `i` to `i-1`.
#[derive(Debug, Clone)]
struct Tridiagonal {
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
}

impl Tridiagonal {
    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = x.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            out[i] = s;
        }
    }
}

/// Thomas factorization, reused for every time step.
#[derive(Debug, Clone)]
struct ThomasFactor {
    lower: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
    upper_scaled: Vec<Complex64>,
}

impl ThomasFactor {
    fn new(m: &Tridiagonal) -> Self {
        let n = m.diag.len();
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n];
        let mut upper_scaled = vec![Complex64::new(0.0, 0.0); n];
        let mut pivot = m.diag[0];
        inv_pivot[0] = 1.0 / pivot;
        upper_scaled[0] = m.upper[0] * inv_pivot[0];
        for i in 1..n {
            pivot = m.diag[i] - m.lower[i] * upper_scaled[i - 1];
            inv_pivot[i] = 1.0 / pivot;
            upper_scaled[i] = m.upper[i] * inv_pivot[i];
        }
        Self {
            lower: m.lower.clone(),
            inv_pivot,
            upper_scaled,
        }
    }

    fn solve_in_place(&self, x: &mut [Complex64]) {
        let n = x.len();
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= self.upper_scaled[i] * next;
        }
    }
}

/// Padé(2,2) propagator `prod_k (z - n_k)/(z - conj(n_k))`, `z = H_h dt`,
/// `n_k = +-sqrt(3) - 3i`, acting on `w = B u`.
struct PadeStepper {
    numerators: [Tridiagonal; 2],
    denominators: [ThomasFactor; 2],
    b: Tridiagonal,
    b_factor: ThomasFactor,
    scratch: Vec<Complex64>,
}

impl PadeStepper {
    fn new(potential: &[f64], h: f64, dt: f64) -> Self {
        let n = potential.len();
        let s3 = 3f64.sqrt();
        let roots = [Complex64::new(s3, -3.0), Complex64::new(-s3, -3.0)];
        let kin = dt / (h * h);
        // A_c = -D2 dt + B (U dt - c)
        let build = |c: Complex64| {
            let shifted: Vec<Complex64> = potential.iter().map(|u| Complex64::new(u * dt, 0.0) - c).collect();
            Tridiagonal {
                lower: (0..n)
                    .map(|i| if i == 0 { 0.0.into() } else { -kin + shifted[i - 1] / 12.0 })
                    .collect(),
                diag: (0..n).map(|i| Complex64::from(2.0 * kin) + shifted[i] * (10.0 / 12.0)).collect(),
                upper: (0..n)
                    .map(|i| if i + 1 == n { 0.0.into() } else { -kin + shifted[i + 1] / 12.0 })
                    .collect(),
            }
        };
        let b = Tridiagonal {
            lower: vec![Complex64::from(1.0 / 12.0); n],
            diag: vec![Complex64::from(10.0 / 12.0); n],
            upper: vec![Complex64::from(1.0 / 12.0); n],
        };
        Self {
            numerators: [build(roots[0]), build(roots[1])],
            denominators: [
                ThomasFactor::new(&build(roots[0].conj())),
                ThomasFactor::new(&build(roots[1].conj())),
            ],
            b_factor: ThomasFactor::new(&b),
            b,
            scratch: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    fn to_w(&mut self, u: &[Complex64]) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); u.len()];
        self.b.apply(u, &mut w);
        w
    }

    fn to_u(&self, w: &[Complex64]) -> Vec<Complex64> {
        let mut u = w.to_vec();
        self.b_factor.solve_in_place(&mut u);
        u
    }

    fn step(&mut self, w: &mut Vec<Complex64>) {
        for k in 0..2 {
            self.denominators[k].solve_in_place(w);
            self.numerators[k].apply(w, &mut self.scratch);
            std::mem::swap(w, &mut self.scratch);
        }
    }
}

/// Potential plus centrifugal term on the grid; a node sitting exactly on
/// a discontinuity takes the mean of the one-sided values.
fn effective_potential(p: &Potential, l: usize, nodes: &[f64]) -> Vec<f64> {
    let centrifugal = (l * (l + 1)) as f64;
    let breaks = p.breakpoints();
    nodes
        .iter()
        .map(|&r| {
            let v = if breaks.iter().any(|b| (r - b).abs() <= 1e-12 * b.max(1.0)) {
                0.5 * (p.evaluate_inner(r) + p.evaluate(r * (1.0 + 1e-12) + 1e-300))
            } else {
                p.evaluate(r)
            };
            v + centrifugal / (r * r)
        })
        .collect()
}

/// One evaluation of `e^{-iTH} e^{iTH0} psi`, returning the result, its
/// largest per-step norm change, and the step count.
fn propagate_once(p: &Potential, psi: &Wavepacket, t: f64, dt: f64) -> Result<(Vec<Complex64>, f64, usize)> {
    let grid = &psi.grid;
    let h = grid.uniform_step().expect("wavepacket grids are uniform");
    let start: Vec<Complex64> = synthesize_free(psi.l, &psi.profile, t, grid.nodes())
        .into_iter()
        .map(|z| z * psi.scale)
        .collect();
    let start_tail = tail_norm(grid, &start);
    if start_tail > BOUNDARY_TOLERANCE {
        return Err(LabError::Boundary(format!(
            "free packet at time -{t} has norm {start_tail:.2e} near r_max = {}; increase r_max",
            grid.r_max()
        )));
    }
    let steps = (t / dt).ceil() as usize;
    let dt_eff = t / steps as f64;
    let potential = effective_potential(p, psi.l, grid.nodes());
    let mut stepper = PadeStepper::new(&potential, h, dt_eff);
    let mut w = stepper.to_w(&start);
    let mut drift: f64 = 0.0;
    let weight_norm = |u: &[Complex64]| u.iter().map(|z| z.norm_sqr() * h).sum::<f64>().sqrt();
    let check_every = (steps / 8).max(1);
    let mut last_norm = weight_norm(&start);
    for s in 0..steps {
        stepper.step(&mut w);
        if s % check_every == 0 || s + 1 == steps {
            let u = stepper.to_u(&w);
            let n = weight_norm(&u);
            drift = drift.max((n - last_norm).abs() / check_every as f64);
            last_norm = n;
        }
    }
    Ok((stepper.to_u(&w), drift, steps))
}

/// `e^{iTH} e^{-iTH0} psi` at `T = -t_final`, with `t_final` doubled from
/// `t_max` until successive results differ by less than [`CAUCHY_TOLERANCE`].
pub fn time_dependent_waveop(p: &Potential, psi: &Wavepacket, t_max: f64, dt: f64) -> Result<PropagationReport> {
    if !(t_max > 0.0) || !(dt > 0.0) {
        return Err(LabError::OutOfRange("t_max and dt must be positive".into()));
    }
    let h = psi.grid.uniform_step().ok_or_else(|| LabError::InvalidGrid("uniform grid required".into()))?;
    let (_, k_hi) = psi.profile.momentum_band(SIGNIFICANT_SIGMAS);
    let lambda_max = k_hi * k_hi + p.depth().abs();
    if lambda_max * dt > 1.0 || k_hi * h > 0.5 {
        return Err(LabError::Resolution(format!(
            "dt = {dt}, h = {h} do not resolve energies up to {lambda_max:.2}"
        )));
    }
    let mut t = t_max;
    let (mut previous, _, _) = propagate_once(p, psi, 0.5 * t, dt)?;
    let mut doublings = 0;
    loop {
        let (current, drift, steps) = propagate_once(p, psi, t, dt)?;
        let diff: Vec<Complex64> = current.iter().zip(&previous).map(|(a, b)| a - b).collect();
        let indicator = grid_norm(&psi.grid, &diff);
        let boundary = tail_norm(&psi.grid, &current);
        if boundary > BOUNDARY_TOLERANCE {
            return Err(LabError::Boundary(format!(
                "norm {boundary:.2e} reached the outer tenth of the grid (r_max = {}); increase r_max",
                psi.grid.r_max()
            )));
        }
        if indicator < CAUCHY_TOLERANCE || doublings == MAX_DOUBLINGS {
            return Ok(PropagationReport {
                output_norm: grid_norm(&psi.grid, &current),
                values: current,
                t_final: t,
                cauchy_indicator: indicator,
                step_norm_drift: drift,
                boundary_norm: boundary,
                steps,
            });
        }
        previous = current;
        t *= 2.0;
        doublings += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pade_step_is_unitary() {
        let n = 500;
        let h = 0.02;
        let potential: Vec<f64> = (1..=n).map(|i| -4.0 * (-(i as f64 * h)).exp() + 2.0 / (i as f64 * h).powi(2)).collect();
        let mut stepper = PadeStepper::new(&potential, h, 0.01);
        let u0: Vec<Complex64> = (1..=n)
            .map(|i| {
                let r = i as f64 * h;
                Complex64::from_polar((-(r - 5.0).powi(2)).exp(), 3.0 * r)
            })
            .collect();
        let norm = |u: &[Complex64]| u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut w = stepper.to_w(&u0);
        let n0 = norm(&u0);
        for _ in 0..50 {
            stepper.step(&mut w);
        }
        let u = stepper.to_u(&w);
        assert!((norm(&u) - n0).abs() / n0 < 1e-11);
    }

    #[test]
    fn free_potential_returns_packet() {
        let profile = LogGaussian::at_momentum(2.0, 0.25);
        let grid = Wavepacket::grid_for(&profile, 0.01, 4.0).unwrap();
        let psi = Wavepacket::from_profile(grid, 0, profile).unwrap();
        assert!((psi.norm - 1.0).abs() < 1e-12);
        let out = time_dependent_waveop(&Potential::free(), &psi, 2.0, 0.002).unwrap();
        let diff: Vec<Complex64> = out.values.iter().zip(&psi.values).map(|(a, b)| a - b).collect();
        let err = grid_norm(&psi.grid, &diff);
        assert!(err < 1e-6, "error {err}");
        assert!((out.output_norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_grid_is_rejected() {
        let profile = LogGaussian::at_momentum(3.0, 0.25);
        let grid = RadialGrid::uniform(1000, 10.0).unwrap();
        let psi = Wavepacket::from_profile(grid, 0, profile).unwrap();
        let r = time_dependent_waveop(&Potential::square_well(4.0, 1.0), &psi, 4.0, 0.005);
        assert!(matches!(r, Err(LabError::Boundary(_))));
    }
}
