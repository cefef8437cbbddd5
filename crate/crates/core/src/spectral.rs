//! Channel spectral transform: the spherical-Bessel transform with energy
//! density, normalized so that it is unitary from `L^2(dr)` to `L^2(dlambda)`.
//!
//! `(F u)(lambda) = (pi k)^{-1/2} int_0^inf jhat_l(k r) u(r) dr`, `k = sqrt(lambda)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::riccati_j;
use crate::error::{LabError, Result};
use crate::grids::{LogEnergyGrid, RadialGrid, RadialScheme};
use crate::linalg::{CMatrix, CVector};

/// Tolerated deviation of the Plancherel ratio when a map is constructed.
pub const PLANCHEREL_TOLERANCE: f64 = 1e-4;

/// Most radians of `k r` a 16-point panel may span at the top energy.
const PANEL_PHASE_LIMIT: f64 = 3.0 * std::f64::consts::PI;

/// Gaussian in `x = ln(lambda)`: `phi(lambda) = c lambda^{-1/2} exp(-(x-x0)^2/(4 sigma^2)) e^{-i lambda tau}`
/// with `c` chosen so that `int |phi|^2 dlambda = 1`. A nonzero `tau` moves
/// the packet along its free trajectory by time `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGaussian {
    pub center: f64,
    pub sigma: f64,
    #[serde(default)]
    pub delay: f64,
}

/// Quadrature window half-width in units of `sigma`; the amplitude there is
/// `e^{-36}` of the peak.
const PROFILE_CUTOFF_SIGMAS: f64 = 12.0;

/// Half-width carrying all but about `1e-5` of the amplitude.
pub const SIGNIFICANT_SIGMAS: f64 = 7.0;

impl LogGaussian {
    pub fn at_momentum(k0: f64, sigma: f64) -> Self {
        Self {
            center: 2.0 * k0.ln(),
            sigma,
            delay: 0.0,
        }
    }

    /// Value of the profile in `L^2(dlambda)`.
    pub fn amplitude(&self, lambda: f64) -> Complex64 {
        let x = lambda.ln();
        let c = (2.0 * std::f64::consts::PI * self.sigma * self.sigma).powf(-0.25);
        let env = c * (-(x - self.center).powi(2) / (4.0 * self.sigma * self.sigma)).exp() / lambda.sqrt();
        Complex64::from_polar(env, -lambda * self.delay)
    }

    /// Shifted by `n` log-steps: the dilation `e^{tau/2} f(e^tau lambda)` with
    /// `tau = -shift`.
    pub fn dilated(&self, shift: f64) -> Self {
        Self {
            center: self.center + shift,
            ..*self
        }
    }

    /// Momentum interval outside of which the profile is negligible.
    pub fn momentum_window(&self) -> (f64, f64) {
        self.momentum_band(PROFILE_CUTOFF_SIGMAS)
    }

    /// Momenta within `n_sigma` standard deviations in `ln(lambda)`.
    pub fn momentum_band(&self, n_sigma: f64) -> (f64, f64) {
        let w = n_sigma * self.sigma;
        ((0.5 * (self.center - w)).exp(), (0.5 * (self.center + w)).exp())
    }
}

/// Uniform momentum quadrature adequate for evaluating `F^* phi` on
/// `r <= r_extent` after a free evolution over time `|t|`.
pub fn momentum_quadrature(profile: &LogGaussian, r_extent: f64, time: f64) -> (Vec<f64>, f64) {
    let (k_lo, k_hi) = profile.momentum_window();
    let bandwidth = r_extent + 2.0 * k_hi * (time.abs() + profile.delay.abs()) + 20.0;
    let dk_alias = std::f64::consts::PI / bandwidth;
    let n = (((k_hi - k_lo) / dk_alias).ceil() as usize).max(400);
    let dk = (k_hi - k_lo) / n as f64;
    ((0..=n).map(|i| k_lo + i as f64 * dk).collect(), dk)
}

/// `(e^{i t H0} F^* phi)(r)` at the given radii: the free evolution is the
/// phase `e^{i lambda t}` in the spectral representation.
pub fn synthesize_free(l: usize, profile: &LogGaussian, time: f64, radii: &[f64]) -> Vec<Complex64> {
    let r_extent = radii.iter().copied().fold(0.0, f64::max);
    let (ks, dk) = momentum_quadrature(profile, r_extent, time);
    // dlambda = 2k dk; trapezoid weights (ends are negligible by construction)
    let coeff: Vec<Complex64> = ks
        .iter()
        .map(|&k| {
            let lambda = k * k;
            let phase = Complex64::from_polar(1.0, lambda * time);
            profile.amplitude(lambda) * phase * (2.0 * k * dk / (std::f64::consts::PI * k).sqrt())
        })
        .collect();
    radii
        .par_iter()
        .map(|&r| {
            ks.iter()
                .zip(&coeff)
                .map(|(&k, c)| c * riccati_j(l, k * r))
                .sum::<Complex64>()
        })
        .collect()
}

/// `(pi k)^{-1/2} jhat_l(k r_i) w_i`: the functional `u -> (F u)(lambda)`
/// on nodal samples.
pub fn evaluation_map(l: usize, lambda: f64, grid_r: &RadialGrid) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(LabError::OutOfRange(format!("lambda = {lambda} must be positive")));
    }
    let k = lambda.sqrt();
    let c = 1.0 / (std::f64::consts::PI * k).sqrt();
    Ok(grid_r
        .nodes()
        .iter()
        .zip(grid_r.weights())
        .map(|(&r, &w)| c * riccati_j(l, k * r) * w)
        .collect())
}

fn check_resolution(grid_r: &RadialGrid, k_max: f64) -> Result<()> {
    let phase = match grid_r.scheme() {
        RadialScheme::GaussLegendreComposite => {
            let widest = grid_r.edges().windows(2).map(|e| e[1] - e[0]).fold(0.0, f64::max);
            (k_max * widest, PANEL_PHASE_LIMIT)
        }
        RadialScheme::UniformTrapezoid => {
            let h = grid_r.uniform_step().unwrap_or(f64::INFINITY);
            (k_max * h, 2.0 * std::f64::consts::PI / 10.0)
        }
    };
    if phase.0 > phase.1 {
        return Err(LabError::Resolution(format!(
            "radial grid spans {:.3} rad of k r per cell at k = {k_max:.4} (limit {:.3})",
            phase.0, phase.1
        )));
    }
    Ok(())
}

/// How `F^*` is realized on the discrete spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointConvention {
    /// Rows act on function samples and return unitary energy coordinates
    /// `u_j = sqrt(h lambda_j) (F f)(lambda_j)`; the adjoint returns function
    /// samples, `F^* = W^{-1} F^T` with `W` the radial weights.
    SamplesToUnitaryCoordinates,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizationRecord {
    /// Prefactor of `jhat_l(k r)` in the transform kernel.
    pub constant: String,
    /// `||F f|| / ||f||` for the pinning packet.
    pub plancherel_ratio: f64,
    pub test_packet: LogGaussian,
}

#[derive(Debug, Clone)]
pub struct ChannelSpectralMap {
    pub l: usize,
    pub lambdas: Vec<f64>,
    pub log_step: f64,
    /// `N x n_r`; row `j` is `sqrt(h lambda_j) (pi k_j)^{-1/2} jhat_l(k_j r_i) w_i`.
    pub matrix: CMatrix,
    pub weights: Vec<f64>,
    pub adjoint: AdjointConvention,
    pub normalization: NormalizationRecord,
}

impl ChannelSpectralMap {
    /// Function samples to unitary energy coordinates.
    pub fn forward(&self, f: &CVector) -> CVector {
        &self.matrix * f
    }

    /// Unitary energy coordinates to function samples.
    pub fn adjoint_apply(&self, u: &CVector) -> CVector {
        let mut out = self.matrix.transpose() * u;
        for (v, w) in out.iter_mut().zip(&self.weights) {
            *v /= *w;
        }
        out
    }
}

fn forward_matrix(l: usize, grid_r: &RadialGrid, grid_e: &LogEnergyGrid) -> CMatrix {
    let rows: Vec<Vec<f64>> = (0..grid_e.len())
        .into_par_iter()
        .map(|j| {
            let lambda = grid_e.nodes()[j];
            let d = grid_e.density(j);
            evaluation_map(l, lambda, grid_r)
                .expect("grid energies are positive")
                .into_iter()
                .map(|v| v * d)
                .collect()
        })
        .collect();
    CMatrix::from_fn(grid_e.len(), grid_r.len(), |j, i| Complex64::new(rows[j][i], 0.0))
}

/// Pinning packet: centered on the log grid, 12-sigma window inside it.
pub fn pinning_packet(grid_e: &LogEnergyGrid) -> LogGaussian {
    let a = grid_e.lambda_min().ln();
    let b = grid_e.lambda_max().ln();
    let sigma = ((b - a) / 40.0).min(0.35);
    LogGaussian {
        center: 0.5 * (a + b),
        sigma,
        delay: 0.0,
    }
}

/// Radial grid holding a log-Gaussian packet and resolving `k_max`.
pub fn packet_grid(profile: &LogGaussian, k_max: f64) -> Result<RadialGrid> {
    let (k_lo, _) = profile.momentum_band(SIGNIFICANT_SIGMAS);
    let extent = (30.0 / k_lo).clamp(20.0, 400.0);
    let width = (PANEL_PHASE_LIMIT / k_max * 0.5).min(1.0);
    RadialGrid::graded(extent, width, &[], 4)
}

/// Measures `||F f|| / ||f||` for the pinning packet with the candidate
/// prefactor `(pi k)^{-1/2}`.
fn pin_normalization(l: usize, grid_e: &LogEnergyGrid) -> Result<NormalizationRecord> {
    let profile = pinning_packet(grid_e);
    let grid = packet_grid(&profile, grid_e.lambda_max().sqrt())?;
    let f: Vec<Complex64> = synthesize_free(l, &profile, 0.0, grid.nodes());
    let f_norm = grid
        .weights()
        .iter()
        .zip(&f)
        .map(|(w, z)| w * z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let m = forward_matrix(l, &grid, grid_e);
    let u = &m * CVector::from_vec(f);
    let ratio = u.norm() / f_norm;
    if (ratio - 1.0).abs() > PLANCHEREL_TOLERANCE {
        return Err(LabError::Resolution(format!(
            "Plancherel ratio {ratio:.8} for l = {l}: transform normalization or grids inadequate"
        )));
    }
    Ok(NormalizationRecord {
        constant: "1/sqrt(pi k)".into(),
        plancherel_ratio: ratio,
        test_packet: profile,
    })
}

pub fn channel_forward(l: usize, grid_r: &RadialGrid, grid_e: &LogEnergyGrid) -> Result<ChannelSpectralMap> {
    check_resolution(grid_r, grid_e.lambda_max().sqrt())?;
    let normalization = pin_normalization(l, grid_e)?;
    Ok(ChannelSpectralMap {
        l,
        lambdas: grid_e.nodes().to_vec(),
        log_step: grid_e.step(),
        matrix: forward_matrix(l, grid_r, grid_e),
        weights: grid_r.weights().to_vec(),
        adjoint: AdjointConvention::SamplesToUnitaryCoordinates,
        normalization,
    })
}

/// Rows `lambda_j^{-1/4} F(lambda_j)` acting on radial functions.
#[derive(Debug, Clone)]
pub struct MOperatorChannel {
    pub l: usize,
    pub lambdas: Vec<f64>,
    /// `N x n_r`; row `j` is `lambda_j^{-1/4} (pi k_j)^{-1/2} jhat_l(k_j r_i) w_i`.
    pub rows: CMatrix,
    pub t_weight: f64,
    /// Norm of row `j` as a functional on `<r>^{-t}`-weighted `L^2`.
    pub weighted_row_norms: Vec<f64>,
}

impl MOperatorChannel {
    /// `(M xi)(lambda_j) = row_j . xi_j` for columns `xi_j` of `xi`.
    pub fn apply(&self, xi: &CMatrix) -> Result<Vec<Complex64>> {
        if xi.nrows() != self.rows.ncols() || xi.ncols() != self.rows.nrows() {
            return Err(LabError::GridMismatch(format!(
                "M expects {} x {} columns, got {} x {}",
                self.rows.ncols(),
                self.rows.nrows(),
                xi.nrows(),
                xi.ncols()
            )));
        }
        Ok((0..self.rows.nrows())
            .map(|j| (0..xi.nrows()).map(|i| self.rows[(j, i)] * xi[(i, j)]).sum())
            .collect())
    }

    /// Full pairing `G_{jl} = row_j . xi_l`.
    pub fn pairing(&self, xi: &CMatrix) -> Result<CMatrix> {
        if xi.nrows() != self.rows.ncols() {
            return Err(LabError::GridMismatch("M and B live on different radial grids".into()));
        }
        Ok(&self.rows * xi)
    }

    pub fn sup_norm(&self) -> f64 {
        self.weighted_row_norms.iter().copied().fold(0.0, f64::max)
    }
}

#[allow(non_snake_case)]
pub fn build_M(l: usize, grid_r: &RadialGrid, grid_e: &LogEnergyGrid, t_weight: f64) -> Result<MOperatorChannel> {
    if !(t_weight > 1.5) {
        return Err(LabError::Hypothesis(format!(
            "t_weight = {t_weight}: boundedness of lambda^(-1/4) F(lambda) needs t > 3/2"
        )));
    }
    let n = grid_r.len();
    let rows_real: Vec<Vec<f64>> = grid_e
        .nodes()
        .par_iter()
        .map(|&lambda| {
            let q = lambda.powf(-0.25);
            evaluation_map(l, lambda, grid_r)
                .expect("grid energies are positive")
                .into_iter()
                .map(|v| v * q)
                .collect()
        })
        .collect();
    let weighted_row_norms = rows_real
        .iter()
        .map(|row| {
            // functional norm: sup |sum row_i xi_i| / ||<r>^t xi|| = ||<r>^{-t} row / w||
            (0..n)
                .map(|i| {
                    let r = grid_r.nodes()[i];
                    let w = grid_r.weights()[i];
                    (row[i] / w).powi(2) * w * (1.0 + r * r).powf(-t_weight)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let rows = CMatrix::from_fn(grid_e.len(), n, |j, i| Complex64::new(rows_real[j][i], 0.0));
    Ok(MOperatorChannel {
        l,
        lambdas: grid_e.nodes().to_vec(),
        rows,
        t_weight,
        weighted_row_norms,
    })
}

/// Sweep of `||lambda^{-1/4} F(lambda)||` as a functional on `<r>^{-t}`-weighted
/// `L^2`, over arbitrary energies.
#[derive(Debug, Clone, Serialize)]
pub struct BoundednessProbe {
    pub l: usize,
    pub t_weight: f64,
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    pub sup: f64,
    pub argmax: usize,
    /// Maximum at an interior sample rather than an end of the sweep.
    pub interior_max: bool,
    /// `norm(lambda_last) / sup`.
    pub top_ratio: f64,
    /// Largest relative change between neighbouring samples.
    pub max_relative_jump: f64,
}

/// Radial grid on which `<r>^{-t} jhat_l(k r)` is resolved for `k <= k_max`
/// and the neglected tail beyond `r_max` is below `1e-10` of the norm.
pub fn probe_grid(t_weight: f64, k_max: f64) -> Result<RadialGrid> {
    // tail of int r^{-2t} beyond R is R^{1-2t}/(2t-1)
    let r_max = (1e-10 * (2.0 * t_weight - 1.0)).powf(1.0 / (1.0 - 2.0 * t_weight)).clamp(50.0, 5000.0);
    let width = (PANEL_PHASE_LIMIT / k_max * 0.5).min(1.0);
    RadialGrid::graded(r_max, width, &[], 8)
}

pub fn boundedness_probe(l: usize, t_weight: f64, lambdas: &[f64], grid_r: &RadialGrid) -> Result<BoundednessProbe> {
    if lambdas.len() < 3 {
        return Err(LabError::OutOfRange("a sweep needs at least three energies".into()));
    }
    let k_max = lambdas.iter().copied().fold(0.0, f64::max).sqrt();
    check_resolution(grid_r, k_max)?;
    let weight: Vec<f64> = grid_r
        .nodes()
        .iter()
        .zip(grid_r.weights())
        .map(|(r, w)| w * (1.0 + r * r).powf(-t_weight))
        .collect();
    let norms: Vec<f64> = lambdas
        .par_iter()
        .map(|&lambda| {
            let k = lambda.sqrt();
            let c = lambda.powf(-0.25) / (std::f64::consts::PI * k).sqrt();
            grid_r
                .nodes()
                .iter()
                .zip(&weight)
                .map(|(&r, &w)| w * (c * riccati_j(l, k * r)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let (argmax, sup) = norms
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let max_relative_jump = norms.windows(2).map(|w| ((w[1] - w[0]) / w[0].max(w[1])).abs()).fold(0.0, f64::max);
    Ok(BoundednessProbe {
        l,
        t_weight,
        lambdas: lambdas.to_vec(),
        top_ratio: norms[norms.len() - 1] / sup,
        interior_max: argmax > 0 && argmax + 1 < norms.len(),
        norms,
        sup,
        argmax,
        max_relative_jump,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::make_log_energy_grid;

    #[test]
    fn profile_is_normalized() {
        let p = LogGaussian::at_momentum(3.0, 0.25);
        let n = 20000;
        let (k_lo, k_hi) = p.momentum_window();
        let (a, b) = (2.0 * k_lo.ln(), 2.0 * k_hi.ln());
        let dx = (b - a) / n as f64;
        let total: f64 = (0..=n)
            .map(|i| {
                let lambda = (a + i as f64 * dx).exp();
                p.amplitude(lambda).norm_sqr() * lambda * dx
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn synthesized_packet_has_unit_norm() {
        let p = LogGaussian::at_momentum(3.0, 0.25);
        let h = 0.01;
        let radii: Vec<f64> = (1..=15000).map(|i| i as f64 * h).collect();
        let u = synthesize_free(0, &p, 0.0, &radii);
        let norm: f64 = u.iter().map(|z| z.norm_sqr() * h).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9, "{norm}");
        let moved = synthesize_free(2, &p, 5.0, &radii);
        let norm: f64 = moved.iter().map(|z| z.norm_sqr() * h).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9, "{norm}");
    }

    #[test]
    fn analytic_s_wave_pair() {
        // int_0^inf sin(kr) r e^{-r^2/2} dr = sqrt(pi/2) k e^{-k^2/2}
        let grid = RadialGrid::graded(12.0, 0.25, &[], 2).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|r| r * (-r * r / 2.0).exp()).collect();
        for &lambda in &[0.01, 0.3, 1.0, 4.0, 20.0] {
            let row = evaluation_map(0, lambda, &grid).unwrap();
            let value: f64 = row.iter().zip(&f).map(|(a, b)| a * b).sum();
            let k: f64 = lambda.sqrt();
            let exact = k.sqrt() * (-lambda / 2.0).exp() / 2f64.sqrt();
            assert!((value - exact).abs() < 1e-6, "lambda={lambda}");
        }
    }

    #[test]
    fn row_matches_evaluation_map_times_density() {
        let ge = make_log_energy_grid(64, 1e-2, 1e2).unwrap();
        let grid = RadialGrid::graded(10.0, 0.25, &[], 2).unwrap();
        let map = channel_forward(1, &grid, &ge).unwrap();
        for j in [0, 17, 63] {
            let row = evaluation_map(1, ge.nodes()[j], &grid).unwrap();
            for i in 0..grid.len() {
                assert!((map.matrix[(j, i)].re - row[i] * ge.density(j)).abs() < 1e-12);
            }
        }
        assert!((map.normalization.plancherel_ratio - 1.0).abs() < 1e-4);
    }

    #[test]
    fn parseval_and_eigen_action() {
        let ge = make_log_energy_grid(128, 1e-4, 1e4).unwrap();
        for l in [0, 2, 4] {
            let profile = LogGaussian { center: 1.0, sigma: 0.3, delay: 0.0 };
            let grid = packet_grid(&profile, ge.lambda_max().sqrt()).unwrap();
            let map = channel_forward(l, &grid, &ge).unwrap();
            let f = CVector::from_vec(synthesize_free(l, &profile, 0.0, grid.nodes()));
            let fnorm = grid.weights().iter().zip(f.iter()).map(|(w, z)| w * z.norm_sqr()).sum::<f64>().sqrt();
            let u = map.forward(&f);
            assert!((u.norm() / fnorm - 1.0).abs() < 1e-4, "l={l}: {}", u.norm() / fnorm);
            // H0 f = F^* (lambda phi) synthesized from the same profile
            let h0f = synthesize_weighted(l, &profile, grid.nodes());
            let lhs = map.forward(&CVector::from_vec(h0f));
            let rhs = CVector::from_fn(ge.len(), |j, _| u[j] * ge.nodes()[j]);
            assert!((lhs - rhs).norm() / fnorm < 1e-4);
        }
    }

    /// `F^*(lambda phi)`, computed with the same momentum quadrature.
    fn synthesize_weighted(l: usize, profile: &LogGaussian, radii: &[f64]) -> Vec<Complex64> {
        let r_extent = radii.iter().copied().fold(0.0, f64::max);
        let (ks, dk) = momentum_quadrature(profile, r_extent, 0.0);
        radii
            .iter()
            .map(|&r| {
                ks.iter()
                    .map(|&k| profile.amplitude(k * k) * (k * k) * (2.0 * k * dk / (std::f64::consts::PI * k).sqrt()) * riccati_j(l, k * r))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn eigen_action_on_closed_form_pair() {
        // f = r^{l+1} e^{-r^2/2}, H0 f = ((2l+3) r^{l+1} - r^{l+3}) e^{-r^2/2}
        let ge = make_log_energy_grid(128, 1e-4, 1e3).unwrap();
        let grid = RadialGrid::graded(14.0, 0.2, &[], 4).unwrap();
        for l in 0..3 {
            let m = (l + 1) as i32;
            let f = CVector::from_iterator(grid.len(), grid.nodes().iter().map(|&r| Complex64::from(r.powi(m) * (-r * r / 2.0).exp())));
            let h0f = CVector::from_iterator(
                grid.len(),
                grid.nodes().iter().map(|&r| Complex64::from(((2 * m + 1) as f64 * r.powi(m) - r.powi(m + 2)) * (-r * r / 2.0).exp())),
            );
            let map = channel_forward(l, &grid, &ge).unwrap();
            let u = map.forward(&f);
            let fnorm = grid.weights().iter().zip(f.iter()).map(|(w, z)| w * z.norm_sqr()).sum::<f64>().sqrt();
            let rhs = CVector::from_fn(ge.len(), |j, _| u[j] * ge.nodes()[j]);
            assert!((map.forward(&h0f) - rhs).norm() / fnorm < 1e-4);
        }
    }

    #[test]
    fn rejects_underresolved_grid() {
        let ge = make_log_energy_grid(64, 1e-2, 1e4).unwrap();
        let grid = RadialGrid::graded(10.0, 1.0, &[], 0).unwrap();
        assert!(matches!(channel_forward(0, &grid, &ge), Err(LabError::Resolution(_))));
    }

    #[test]
    fn m_operator_hypothesis_and_zero() {
        let ge = make_log_energy_grid(64, 1e-2, 1e2).unwrap();
        let grid = RadialGrid::graded(1.0, 0.25, &[], 2).unwrap();
        assert!(matches!(build_M(0, &grid, &ge, 1.5), Err(LabError::Hypothesis(_))));
        let m = build_M(0, &grid, &ge, 2.0).unwrap();
        let zero = CMatrix::zeros(grid.len(), ge.len());
        assert!(m.apply(&zero).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn probe_shapes() {
        let lambdas: Vec<f64> = (0..=480).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 480.0)).collect();
        let grid = probe_grid(2.0, 1e3f64.sqrt()).unwrap();
        let s_wave = boundedness_probe(0, 2.0, &lambdas, &grid).unwrap();
        // s-wave: the supremum is the threshold limit 1/2
        assert!((s_wave.norms[0] - 0.5).abs() < 0.02);
        let p_wave = boundedness_probe(1, 2.0, &lambdas, &grid).unwrap();
        assert!(p_wave.interior_max);
        assert!(p_wave.top_ratio < 0.1);
        assert!(p_wave.max_relative_jump < 0.05);
    }
}
