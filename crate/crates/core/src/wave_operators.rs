//! Realizations of the channel wave operator `W_-` in the free spectral
//! representation, on unitary energy coordinates `u_j = sqrt(h lambda_j) f(lambda_j)`.
//!
//! * exact factorization: `W - 1 = -2 pi i U o G`, `G_{jl} = m_j . b_l`,
//!   `U` the Toeplitz section of `theta(A_+)`;
//! * the formula `1 + theta(A_+)(S - 1)`, which differs from it by a compact `K`;
//! * the stationary eigenfunction expansion `W_- F^* phi = int psi^+_lambda phi(lambda) d lambda`,
//!   evaluated in `r`-space and transformed back.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bessel::riccati_j;
use crate::dilation::MellinMultiplier;
use crate::error::{LabError, Result};
use crate::grids::{LogEnergyGrid, RadialGrid};
use crate::lippmann_schwinger::BOperatorChannel;
use crate::linalg::{operator_norm, singular_values, CMatrix, CVector, I};
use crate::potentials::Potential;
use crate::radial_oracle::{numerov_step, ScatteringState};
use crate::spectral::{momentum_quadrature, LogGaussian, MOperatorChannel, SIGNIFICANT_SIGMAS};

/// Unimodularity demanded of scattering data entering the formula.
pub const UNIMODULAR_TOLERANCE: f64 = 1e-7;
/// Fraction of the scattered norm allowed in the outer tenth of the radial box.
const TAIL_TOLERANCE: f64 = 1e-8;
/// Most radians of `k r` a 16-point panel may span.
const PANEL_PHASE_LIMIT: f64 = 1.5 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    ExactFactorization,
    RaFormula,
    EigenfunctionOracle,
    WPlus,
    ComplementFormula,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Diagnostics {
    /// Largest `| ||W u|| / ||u|| - 1 |` over the packet corpus.
    pub isometry_defect: f64,
    /// Largest `||(Lambda + V~) W u - W Lambda u|| / ||Lambda u||`.
    pub intertwining_defect: f64,
}

#[derive(Debug, Clone)]
pub struct WaveOperatorChannel {
    pub l: usize,
    pub lambdas: Vec<f64>,
    pub matrix: CMatrix,
    pub realization: Realization,
    pub diagnostics: Option<Diagnostics>,
}

impl WaveOperatorChannel {
    pub fn apply(&self, u: &CVector) -> CVector {
        &self.matrix * u
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.lambdas.len() == other.lambdas.len()
            && self
                .lambdas
                .iter()
                .zip(&other.lambdas)
                .all(|(a, b)| (a - b).abs() <= 1e-13 * a)
    }

    /// Fills in isometry and intertwining defects over `packets`; `potential`
    /// is `F V F^*` on the same grid (see [`potential_matrix`]).
    pub fn diagnose(&mut self, packets: &[CVector], potential: &CMatrix) -> Diagnostics {
        let lam = CVector::from_vec(self.lambdas.iter().map(|&l| Complex64::new(l, 0.0)).collect());
        let mut d = Diagnostics::default();
        for u in packets {
            let wu = self.apply(u);
            d.isometry_defect = d.isometry_defect.max((wu.norm() / u.norm() - 1.0).abs());
            let lu = u.component_mul(&lam);
            let lhs = wu.component_mul(&lam) + potential * &wu;
            let rhs = self.apply(&lu);
            d.intertwining_defect = d.intertwining_defect.max((lhs - rhs).norm() / lu.norm());
        }
        self.diagnostics = Some(d);
        d
    }
}

/// `F V F^*` in unitary coordinates, by quadrature on the radial grid.
pub fn potential_matrix(p: &Potential, l: usize, grid_e: &LogEnergyGrid, grid_r: &RadialGrid) -> CMatrix {
    let n = grid_e.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let k = grid_e.nodes()[j].sqrt();
            let c = grid_e.density(j) / (PI * k).sqrt();
            grid_r.nodes().iter().map(|&r| c * riccati_j(l, k * r)).collect()
        })
        .collect();
    let vw: Vec<f64> = grid_r
        .nodes()
        .iter()
        .zip(grid_r.weights())
        .map(|(&r, &w)| p.evaluate(r) * w)
        .collect();
    CMatrix::from_fn(n, n, |j, m| {
        Complex64::new(rows[j].iter().zip(&rows[m]).zip(&vw).map(|((a, b), v)| a * b * v).sum(), 0.0)
    })
}

fn check_multiplier(theta: &MellinMultiplier, lambdas: &[f64]) -> Result<()> {
    let n = lambdas.len();
    let ok = theta.len() == n
        && n > 1
        && ((lambdas[1] / lambdas[0]).ln() - theta.step).abs() <= 1e-12 * theta.step
        && (lambdas[0] - theta.lambda_min).abs() <= 1e-13 * lambdas[0];
    if !ok {
        return Err(LabError::GridMismatch("dilation multiplier built on another energy grid".into()));
    }
    Ok(())
}

/// Pairing `G_{jl} = lambda_j^{-1/4} F(lambda_j) b(lambda_l)`.
pub fn pairing_matrix(m_op: &MOperatorChannel, b_op: &BOperatorChannel) -> Result<CMatrix> {
    if m_op.l != b_op.l || m_op.lambdas.len() != b_op.lambdas.len() {
        return Err(LabError::GridMismatch("M and B built for different channels or grids".into()));
    }
    if m_op.lambdas.iter().zip(&b_op.lambdas).any(|(a, b)| (a - b).abs() > 1e-13 * a) {
        return Err(LabError::GridMismatch("M and B built on different energy grids".into()));
    }
    m_op.pairing(&b_op.columns)
}

pub fn assemble_exact(
    l: usize,
    m_op: &MOperatorChannel,
    theta: &MellinMultiplier,
    b_op: &BOperatorChannel,
) -> Result<WaveOperatorChannel> {
    if m_op.l != l {
        return Err(LabError::GridMismatch(format!("operators built for l = {}, asked for {l}", m_op.l)));
    }
    let g = pairing_matrix(m_op, b_op)?;
    check_multiplier(theta, &m_op.lambdas)?;
    let u = theta.toeplitz_matrix();
    let n = g.nrows();
    let matrix = CMatrix::identity(n, n) - u.component_mul(&g) * (2.0 * PI * I);
    Ok(WaveOperatorChannel {
        l,
        lambdas: m_op.lambdas.clone(),
        matrix,
        realization: Realization::ExactFactorization,
        diagnostics: None,
    })
}

fn check_unimodular(s: &[Complex64]) -> Result<()> {
    if let Some((j, z)) = s.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > UNIMODULAR_TOLERANCE) {
        return Err(LabError::Unitarity {
            lambda: j as f64,
            defect: (z.norm() - 1.0).abs(),
        });
    }
    Ok(())
}

/// `1 + phi(A_+) diag(s - 1)` with the Toeplitz section of `phi`.
fn multiplier_formula(theta: &MellinMultiplier, s: &[Complex64]) -> CMatrix {
    let u = theta.toeplitz_matrix();
    let n = s.len();
    let mut m = u;
    for (l, z) in s.iter().enumerate() {
        let f = z - 1.0;
        m.column_mut(l).iter_mut().for_each(|v| *v *= f);
    }
    CMatrix::identity(n, n) + m
}

pub fn assemble_ra_formula(
    l: usize,
    lambdas: &[f64],
    s_values: &[Complex64],
    theta: &MellinMultiplier,
) -> Result<WaveOperatorChannel> {
    if s_values.len() != lambdas.len() {
        return Err(LabError::GridMismatch("one scattering value per energy node expected".into()));
    }
    check_unimodular(s_values)?;
    check_multiplier(theta, lambdas)?;
    Ok(WaveOperatorChannel {
        l,
        lambdas: lambdas.to_vec(),
        matrix: multiplier_formula(theta, s_values),
        realization: Realization::RaFormula,
        diagnostics: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RemainderReport {
    pub l: usize,
    #[serde(skip)]
    pub matrix: CMatrix,
    pub singular_values: Vec<f64>,
    /// `(n, ||K f_n||)` over the dilated family.
    pub decay_table: Vec<(usize, f64)>,
}

impl RemainderReport {
    pub fn operator_norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// `||K f_n||` decreasing for `n >= 2` and `||K f_5|| < ||K f_2|| / 2`.
    pub fn vanishes_on_family(&self) -> bool {
        let tail: Vec<f64> = self.decay_table.iter().filter(|(n, _)| *n >= 2).map(|x| x.1).collect();
        tail.len() >= 4 && tail.windows(2).all(|w| w[1] < w[0]) && tail[3] < 0.5 * tail[0]
    }
}

pub fn extract_remainder(
    exact: &WaveOperatorChannel,
    formula: &WaveOperatorChannel,
    packets: &[CVector],
) -> Result<RemainderReport> {
    if !exact.same_grid(formula) || exact.l != formula.l {
        return Err(LabError::GridMismatch("realizations on different grids".into()));
    }
    let matrix = &exact.matrix - &formula.matrix;
    let decay_table = packets.iter().enumerate().map(|(n, f)| (n, (&matrix * f).norm())).collect();
    Ok(RemainderReport {
        l: exact.l,
        singular_values: singular_values(&matrix),
        matrix,
        decay_table,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WPlusCheck {
    /// `||W_- - (1 + theta (S - 1))||`.
    pub k_norm: f64,
    /// `||W_+ - (1 + (1 - theta)(S^* - 1))||`.
    pub k_prime_norm: f64,
    pub k_prime_singular_values: Vec<f64>,
}

/// `W_+ = W_- S^*` and the complement-formula remainder `K'`.
pub fn assemble_w_plus(
    w_minus: &WaveOperatorChannel,
    s_values: &[Complex64],
    theta: &MellinMultiplier,
) -> Result<(WaveOperatorChannel, WPlusCheck)> {
    check_unimodular(s_values)?;
    check_multiplier(theta, &w_minus.lambdas)?;
    let mut matrix = w_minus.matrix.clone();
    for (l, z) in s_values.iter().enumerate() {
        let c = z.conj();
        matrix.column_mut(l).iter_mut().for_each(|v| *v *= c);
    }
    let conj: Vec<Complex64> = s_values.iter().map(|z| z.conj()).collect();
    let complement = multiplier_formula(&theta.complement(), &conj);
    let k_prime = &matrix - &complement;
    let k = &w_minus.matrix - multiplier_formula(theta, s_values);
    let k_prime_singular_values = singular_values(&k_prime);
    let check = WPlusCheck {
        k_norm: operator_norm(&k),
        k_prime_norm: k_prime_singular_values.first().copied().unwrap_or(0.0),
        k_prime_singular_values,
    };
    Ok((
        WaveOperatorChannel {
            l: w_minus.l,
            lambdas: w_minus.lambdas.clone(),
            matrix,
            realization: Realization::WPlus,
            diagnostics: None,
        },
        check,
    ))
}

/// `u_j = sqrt(h lambda_j) phi(lambda_j)`.
pub fn packet_vector(grid_e: &LogEnergyGrid, profile: &LogGaussian) -> CVector {
    CVector::from_fn(grid_e.len(), |j, _| profile.amplitude(grid_e.nodes()[j]) * grid_e.density(j))
}

/// Six log-Gaussians with centers evenly spread over the middle two quartiles
/// of `ln lambda` and widths alternating between two values.
pub fn packet_corpus(grid_e: &LogEnergyGrid) -> Vec<LogGaussian> {
    let a = grid_e.lambda_min().ln();
    let b = grid_e.lambda_max().ln();
    let (lo, hi) = (a + 0.25 * (b - a), b - 0.25 * (b - a));
    (0..6)
        .map(|i| LogGaussian {
            center: lo + (hi - lo) * i as f64 / 5.0,
            sigma: if i % 2 == 0 { 0.3 } else { 0.4 },
            delay: 0.0,
        })
        .collect()
}

/// Dilated family `f_n`: the packet moved up by `n h0` in `ln lambda`, with
/// `h0` four grid steps so every member is an exact grid shift of `f_0`.
pub fn dilated_family(grid_e: &LogEnergyGrid, base: &LogGaussian, count: usize) -> Vec<CVector> {
    let h0 = 4.0 * grid_e.step();
    (0..count).map(|n| packet_vector(grid_e, &base.dilated(n as f64 * h0))).collect()
}

/// The stationary realization applied to one packet.
#[derive(Debug, Clone, Serialize)]
pub struct EigenfunctionAction {
    pub profile: LogGaussian,
    #[serde(skip)]
    pub values: CVector,
    pub r_extent: f64,
    pub radial_nodes: usize,
    pub momentum_nodes: usize,
    /// Scattered norm in the outer tenth of the radial box, relative to the total.
    pub tail_fraction: f64,
}

/// Outgoing states on the momentum quadrature of `profile`, weighted by
/// `phi(lambda) dlambda`.
fn weighted_states(p: &Potential, l: usize, profile: &LogGaussian, r_extent: f64) -> Result<(Vec<ScatteringState>, Vec<Complex64>)> {
    let (ks, dk) = momentum_quadrature(profile, r_extent, 0.0);
    let k_top = ks.last().copied().unwrap_or(1.0);
    let h = numerov_step(p, k_top)?;
    let states = ks
        .par_iter()
        .map(|&k| ScatteringState::new(p, l, k, h))
        .collect::<Result<Vec<_>>>()?;
    let coeff = ks.iter().map(|&k| profile.amplitude(k * k) * (2.0 * k * dk)).collect();
    Ok((states, coeff))
}

/// `(W_- - 1) F^* phi` at the given radii.
fn scattered_part(states: &[ScatteringState], coeff: &[Complex64], radii: &[f64]) -> Vec<Complex64> {
    radii
        .par_iter()
        .map(|&r| states.iter().zip(coeff).map(|(s, c)| c * s.scattered(r)).sum())
        .collect()
}

/// `W_- F^* phi` in `r`-space at the given radii.
pub fn eigenfunction_waveop_r(p: &Potential, l: usize, profile: &LogGaussian, radii: &[f64]) -> Result<Vec<Complex64>> {
    let r_extent = radii.iter().copied().fold(0.0, f64::max);
    let (states, coeff) = weighted_states(p, l, profile, r_extent)?;
    let scattered = scattered_part(&states, &coeff, radii);
    let free = crate::spectral::synthesize_free(l, profile, 0.0, radii);
    Ok(free.iter().zip(&scattered).map(|(a, b)| a + b).collect())
}

/// Radial extent holding the scattered part of `W_- F^* phi`.
fn scattering_extent(profile: &LogGaussian) -> f64 {
    let (k_lo, _) = profile.momentum_band(SIGNIFICANT_SIGMAS);
    (30.0 / k_lo).clamp(30.0, 400.0)
}

/// `F W_- F^* phi` on the energy grid: the free part is `phi` itself; the
/// scattered part is synthesized in `r`-space and transformed by quadrature.
pub fn eigenfunction_waveop(p: &Potential, l: usize, grid_e: &LogEnergyGrid, profile: &LogGaussian) -> Result<EigenfunctionAction> {
    let r_extent = scattering_extent(profile) + p.support_radius().min(50.0);
    let (_, k_hi) = profile.momentum_window();
    let k_res = k_hi.max(grid_e.lambda_max().sqrt());
    let width = (PANEL_PHASE_LIMIT / k_res).min(1.0);
    let grid_r = RadialGrid::graded(r_extent, width, &p.breakpoints(), 4)?;
    let (states, coeff) = weighted_states(p, l, profile, r_extent)?;
    let scattered = scattered_part(&states, &coeff, grid_r.nodes());
    let weights = grid_r.weights();
    let total: f64 = scattered.iter().zip(weights).map(|(z, w)| z.norm_sqr() * w).sum();
    let outer: f64 = scattered
        .iter()
        .zip(weights)
        .zip(grid_r.nodes())
        .filter(|(_, &r)| r > 0.9 * r_extent)
        .map(|((z, w), _)| z.norm_sqr() * w)
        .sum();
    let tail_fraction = if total > 0.0 { outer / total } else { 0.0 };
    if tail_fraction > TAIL_TOLERANCE {
        return Err(LabError::Boundary(format!(
            "scattered wave keeps {tail_fraction:.2e} of its norm near r = {r_extent:.1}"
        )));
    }
    let values: Vec<Complex64> = (0..grid_e.len())
        .into_par_iter()
        .map(|j| {
            let lambda = grid_e.nodes()[j];
            let k = lambda.sqrt();
            let c = 1.0 / (PI * k).sqrt();
            let proj: Complex64 = grid_r
                .nodes()
                .iter()
                .zip(weights)
                .zip(&scattered)
                .map(|((&r, &w), z)| z * (w * c * riccati_j(l, k * r)))
                .sum();
            (profile.amplitude(lambda) + proj) * grid_e.density(j)
        })
        .collect();
    Ok(EigenfunctionAction {
        profile: *profile,
        values: CVector::from_vec(values),
        r_extent,
        radial_nodes: grid_r.len(),
        momentum_nodes: states.len(),
        tail_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::{theta_multiplier, Symbol};
    use crate::grids::make_log_energy_grid;
    use crate::lippmann_schwinger::{build_B, ls_grid};
    use crate::spectral::build_M;

    fn setup(p: &Potential, l: usize, n: usize) -> (LogEnergyGrid, MOperatorChannel, BOperatorChannel) {
        let ge = make_log_energy_grid(n, 1e-4, 1e4).unwrap();
        let gr = ls_grid(p, ge.lambda_max().sqrt()).unwrap();
        let m = build_M(l, &gr, &ge, 6.0).unwrap();
        let b = build_B(p, l, &ge, &gr, 6.0).unwrap();
        (ge, m, b)
    }

    #[test]
    fn free_potential_gives_identity() {
        let p = Potential::free();
        let (ge, m, b) = setup(&p, 0, 64);
        let theta = theta_multiplier(&ge).unwrap();
        let w = assemble_exact(0, &m, &theta, &b).unwrap();
        assert!((w.matrix - CMatrix::identity(64, 64)).norm() < 1e-12);
    }

    #[test]
    fn constant_symbol_gives_s() {
        let p = Potential::square_well(4.0, 1.0);
        let (ge, m, b) = setup(&p, 0, 64);
        let one = MellinMultiplier::new(&ge, Symbol::Constant { re: 1.0, im: 0.0 });
        let w = assemble_exact(0, &m, &one, &b).unwrap();
        for j in 0..64 {
            for l in 0..64 {
                let expect = if j == l { b.scattering.s[j] } else { Complex64::new(0.0, 0.0) };
                assert!((w.matrix[(j, l)] - expect).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn formula_with_s_minus_one() {
        let ge = make_log_energy_grid(64, 1e-4, 1e4).unwrap();
        let theta = theta_multiplier(&ge).unwrap();
        let s = vec![Complex64::new(-1.0, 0.0); 64];
        let w = assemble_ra_formula(0, ge.nodes(), &s, &theta).unwrap();
        assert!(operator_norm(&w.matrix) <= 3.0);
        let bad = vec![Complex64::new(1.1, 0.0); 64];
        assert!(assemble_ra_formula(0, ge.nodes(), &bad, &theta).is_err());
    }

    #[test]
    fn exact_matches_eigenfunction_expansion() {
        let p = Potential::square_well(4.0, 1.0);
        let (ge, m, b) = setup(&p, 0, 128);
        let theta = theta_multiplier(&ge).unwrap();
        let w = assemble_exact(0, &m, &theta, &b).unwrap();
        for profile in packet_corpus(&ge).into_iter().skip(2).step_by(2) {
            let u = packet_vector(&ge, &profile);
            let oracle = eigenfunction_waveop(&p, 0, &ge, &profile).unwrap();
            assert!(oracle.tail_fraction <= TAIL_TOLERANCE);
            let err = (w.apply(&u) - &oracle.values).norm();
            assert!(err < 1e-4, "center {}: {err:e}", profile.center);
            assert!((oracle.values.norm() / u.norm() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn realizations_are_isometric_and_intertwine() {
        let p = Potential::square_well(4.0, 1.0);
        let (ge, m, b) = setup(&p, 0, 128);
        let gr = ls_grid(&p, ge.lambda_max().sqrt()).unwrap();
        let theta = theta_multiplier(&ge).unwrap();
        let packets: Vec<CVector> = packet_corpus(&ge).iter().map(|q| packet_vector(&ge, q)).collect();
        let v = potential_matrix(&p, 0, &ge, &gr);
        let mut exact = assemble_exact(0, &m, &theta, &b).unwrap();
        let mut ra = assemble_ra_formula(0, ge.nodes(), &b.scattering.s, &theta).unwrap();
        let d = exact.diagnose(&packets, &v);
        assert!(d.isometry_defect < 1e-3 && d.intertwining_defect < 1e-3, "{d:?}");
        // the formula is off by the compact K, which is not small on the corpus
        assert!(ra.diagnose(&packets, &v).isometry_defect > 1e-2);
    }

    #[test]
    fn remainder_and_w_plus() {
        let p = Potential::square_well(4.0, 1.0);
        let (ge, m, b) = setup(&p, 0, 128);
        let theta = theta_multiplier(&ge).unwrap();
        let exact = assemble_exact(0, &m, &theta, &b).unwrap();
        let ra = assemble_ra_formula(0, ge.nodes(), &b.scattering.s, &theta).unwrap();
        let corpus = packet_corpus(&ge);
        let family = dilated_family(&ge, corpus.last().unwrap(), 6);
        let k = extract_remainder(&exact, &ra, &family).unwrap();
        assert!(k.vanishes_on_family(), "{:?}", k.decay_table);
        assert!(k.operator_norm() > 0.1);
        let (w_plus, check) = assemble_w_plus(&exact, &b.scattering.s, &theta).unwrap();
        assert_eq!(w_plus.realization, Realization::WPlus);
        assert!((check.k_norm - check.k_prime_norm).abs() < 1e-8);
        for (a, b) in k.singular_values.iter().zip(&check.k_prime_singular_values) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn extraction_rejects_grid_mismatch() {
        let a = make_log_energy_grid(64, 1e-4, 1e4).unwrap();
        let c = make_log_energy_grid(64, 1e-3, 1e4).unwrap();
        let s = vec![Complex64::new(1.0, 0.0); 64];
        let wa = assemble_ra_formula(0, a.nodes(), &s, &theta_multiplier(&a).unwrap()).unwrap();
        let wc = assemble_ra_formula(0, c.nodes(), &s, &theta_multiplier(&c).unwrap()).unwrap();
        assert!(extract_remainder(&wa, &wc, &[]).is_err());
        assert!(assemble_ra_formula(0, c.nodes(), &s, &theta_multiplier(&a).unwrap()).is_err());
    }
}
