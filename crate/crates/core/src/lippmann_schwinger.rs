//! Partial-wave Lippmann-Schwinger equation `psi = jhat - R0(lambda + i0) V psi`
//! on a composite Gauss-Legendre grid.
//!
//! The free outgoing resolvent has the kernel `(i/k) jhat(k r<) hhat(k r>)`,
//! which has a derivative jump on the diagonal. It is discretized by product
//! integration: both one-sided integrals are computed with the panel-local
//! indefinite-integration matrix, so the kink never falls inside a
//! quadrature rule.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bessel::riccati;
use crate::error::{LabError, Result};
use crate::grids::{LogEnergyGrid, RadialGrid};
use crate::linalg::{one_norm, symmetry_residual, CMatrix, CVector, I};
use crate::potentials::Potential;

/// Systems with a larger 1-norm condition estimate are reported as singular.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Allowed `| |s| - 1 |`.
pub const UNITARITY_TOLERANCE: f64 = 1e-7;

/// Halvings of the first panel toward the origin.
const ORIGIN_GRADING: usize = 6;

/// Grid on the support of `V` resolving `jhat_l(k r)` up to `k_max`: one
/// wavelength per 16-point panel at most, with the well edge as a panel edge.
pub fn ls_grid(p: &Potential, k_max: f64) -> Result<RadialGrid> {
    let r_max = p.support_radius();
    let width = (2.0 * std::f64::consts::PI / k_max.max(1e-3)).min(0.5);
    RadialGrid::graded(r_max, width, &p.breakpoints(), ORIGIN_GRADING)
}

/// Precomputed grid data for repeated solves with one potential.
#[derive(Debug, Clone)]
pub struct LsSolver {
    grid: RadialGrid,
    cumulative: DMatrix<f64>,
    potential: Vec<f64>,
}

/// Scattering solution of one channel at one energy.
#[derive(Debug, Clone)]
pub struct ChannelSolution {
    pub lambda: f64,
    /// Outgoing solution `psi+` at the grid nodes, normalized as `jhat + scattered`.
    pub psi: CVector,
    pub s: Complex64,
    pub condition: f64,
}

impl LsSolver {
    pub fn new(p: &Potential, grid: &RadialGrid) -> Result<Self> {
        let rows = grid.cumulative_matrix()?;
        let n = grid.len();
        let cumulative = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let potential = grid.nodes().iter().map(|&r| p.evaluate(r)).collect();
        Ok(Self {
            grid: grid.clone(),
            cumulative,
            potential,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Riccati functions `jhat(k r_i)`, `hhat(k r_i)` at the nodes.
    fn free_solutions(&self, l: usize, k: f64) -> (Vec<f64>, Vec<Complex64>) {
        self.grid
            .nodes()
            .iter()
            .map(|&r| {
                let b = riccati(l, k * r);
                (b.j, b.h())
            })
            .unzip()
    }

    /// `R0(lambda + i0)` acting on nodal samples.
    pub fn resolvent(&self, l: usize, lambda: f64) -> Result<CMatrix> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(LabError::OutOfRange(format!(
                "the outgoing resolvent is built for lambda > 0, got {lambda}"
            )));
        }
        let k = lambda.sqrt();
        let (j, h) = self.free_solutions(l, k);
        let w = self.grid.weights();
        let n = w.len();
        let pref = I / k;
        Ok(CMatrix::from_fn(n, n, |a, b| {
            let c = self.cumulative[(a, b)];
            pref * (h[a] * (c * j[b]) + j[a] * ((w[b] - c) * h[b]))
        }))
    }

    /// Solves `(1 + R0 V) psi = jhat` and extracts `s = 1 - (2i/k) <jhat, V psi>`.
    pub fn solve(&self, l: usize, lambda: f64) -> Result<ChannelSolution> {
        let k = lambda.sqrt();
        let g = self.resolvent(l, lambda)?;
        let n = self.grid.len();
        let a = CMatrix::from_fn(n, n, |r, c| {
            let delta = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            delta + g[(r, c)] * self.potential[c]
        });
        let (j, _) = self.free_solutions(l, k);
        let rhs = CVector::from_iterator(n, j.iter().map(|&v| Complex64::new(v, 0.0)));
        let lu = a.clone().lu();
        let psi = lu.solve(&rhs).ok_or(LabError::Singular {
            lambda,
            condition: f64::INFINITY,
        })?;
        let condition = one_norm(&a) * inverse_one_norm_estimate(&a, &lu);
        if !(condition < CONDITION_LIMIT) {
            return Err(LabError::Singular { lambda, condition });
        }
        let w = self.grid.weights();
        let overlap: Complex64 = (0..n).map(|i| w[i] * j[i] * self.potential[i] * psi[i]).sum();
        let s = Complex64::new(1.0, 0.0) - 2.0 * I / k * overlap;
        let defect = s.norm() - 1.0;
        if defect.abs() > UNITARITY_TOLERANCE {
            return Err(LabError::Unitarity { lambda, defect });
        }
        Ok(ChannelSolution {
            lambda,
            psi,
            s,
            condition,
        })
    }
}

/// Hager-Higham estimate of `||A^{-1}||_1` from a few solves with `A` and `A^H`.
fn inverse_one_norm_estimate(a: &CMatrix, lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let n = a.nrows();
    let lu_adj = a.adjoint().lu();
    let l1 = |v: &CVector| v.iter().map(|z| z.norm()).sum::<f64>();
    let mut x = CVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    let mut estimate = 0.0;
    for iter in 0..5 {
        let Some(y) = lu.solve(&x) else { return f64::INFINITY };
        let e = l1(&y);
        if iter > 0 && e <= estimate {
            break;
        }
        estimate = e;
        let xi = y.map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) });
        let Some(z) = lu_adj.solve(&xi) else { return f64::INFINITY };
        let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
        let zx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        if iter > 0 && zmax <= zx {
            break;
        }
        x = CVector::zeros(n);
        x[jmax] = Complex64::new(1.0, 0.0);
    }
    // Alternating test vector guards against the rare failures of the iteration.
    let alt = CVector::from_fn(n, |i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(sign * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
    });
    let alt_estimate = lu.solve(&alt).map(|y| 2.0 * l1(&y) / (3.0 * n as f64)).unwrap_or(f64::INFINITY);
    estimate.max(alt_estimate)
}

/// `R0(lambda + i0)` on nodal samples of `grid` (quadrature weights folded in).
pub fn free_outgoing_resolvent(l: usize, lambda: f64, grid: &RadialGrid) -> Result<CMatrix> {
    LsSolver::new(&Potential::free(), grid)?.resolvent(l, lambda)
}

#[derive(Debug, Clone)]
pub struct TMatrixChannel {
    pub l: usize,
    pub lambda: f64,
    /// `W^{1/2} T W^{-1/2}` with `T = V (1 + R0 V)^{-1}` on nodal samples and
    /// `W` the quadrature weights; complex symmetric up to quadrature error.
    pub matrix: CMatrix,
    pub condition: f64,
    pub s: Complex64,
    pub symmetry_residual: f64,
}

pub fn t_matrix(p: &Potential, l: usize, lambda: f64, grid: &RadialGrid) -> Result<TMatrixChannel> {
    let solver = LsSolver::new(p, grid)?;
    let sol = solver.solve(l, lambda)?;
    let n = grid.len();
    let g = solver.resolvent(l, lambda)?;
    let v = &solver.potential;
    let a = CMatrix::from_fn(n, n, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) + g[(r, c)] * v[c]
    });
    let inv = a.try_inverse().ok_or(LabError::Singular {
        lambda,
        condition: f64::INFINITY,
    })?;
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let matrix = CMatrix::from_fn(n, n, |r, c| sw[r] * v[r] * inv[(r, c)] / sw[c]);
    let symmetry_residual = symmetry_residual(&matrix);
    Ok(TMatrixChannel {
        l,
        lambda,
        matrix,
        condition: sol.condition,
        s: sol.s,
        symmetry_residual,
    })
}

/// Per-energy S-matrix element of one channel with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SMatrixChannel {
    pub l: usize,
    pub lambdas: Vec<f64>,
    #[serde(skip)]
    pub s: Vec<Complex64>,
    /// `arg(s)/2` on a continuous branch, anchored on the principal value at
    /// the highest energy.
    pub deltas: Vec<f64>,
    pub max_unitarity_defect: f64,
    pub max_condition: f64,
    /// Largest phase change between neighbouring energies after unwrapping.
    pub max_phase_step: f64,
}

impl SMatrixChannel {
    /// Decrease of the phase from the lowest to the highest energy, in units of pi.
    pub fn winding(&self) -> f64 {
        (self.deltas[0] - self.deltas[self.deltas.len() - 1]) / std::f64::consts::PI
    }
}

/// Continuous branch of `arg(s)/2`, unwrapped downward from the last entry.
pub fn unwrap_half_phase(s: &[Complex64]) -> (Vec<f64>, f64) {
    let pi = std::f64::consts::PI;
    let n = s.len();
    let mut out = vec![0.0; n];
    let mut max_step: f64 = 0.0;
    for idx in (0..n).rev() {
        let principal = 0.5 * s[idx].arg();
        out[idx] = if idx + 1 == n {
            principal
        } else {
            let prev = out[idx + 1];
            let d = principal + ((prev - principal) / pi).round() * pi;
            max_step = max_step.max((d - prev).abs());
            d
        };
    }
    (out, max_step)
}

fn solve_all(solver: &LsSolver, l: usize, lambdas: &[f64]) -> Result<Vec<ChannelSolution>> {
    lambdas
        .par_iter()
        .map(|&lambda| solver.solve(l, lambda))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.context(format!("channel l = {l}")))
}

fn summarize(l: usize, sols: &[ChannelSolution]) -> SMatrixChannel {
    let s: Vec<Complex64> = sols.iter().map(|x| x.s).collect();
    let (deltas, max_phase_step) = unwrap_half_phase(&s);
    SMatrixChannel {
        l,
        lambdas: sols.iter().map(|x| x.lambda).collect(),
        max_unitarity_defect: s.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max),
        max_condition: sols.iter().map(|x| x.condition).fold(0.0, f64::max),
        s,
        deltas,
        max_phase_step,
    }
}

pub fn s_matrix_channel(p: &Potential, l: usize, grid_e: &LogEnergyGrid, grid_r: &RadialGrid) -> Result<SMatrixChannel> {
    s_matrix_at(p, l, grid_e.nodes(), grid_r)
}

/// S-matrix element at arbitrary positive energies (ascending).
pub fn s_matrix_at(p: &Potential, l: usize, lambdas: &[f64], grid_r: &RadialGrid) -> Result<SMatrixChannel> {
    let solver = LsSolver::new(p, grid_r)?;
    let sols = solve_all(&solver, l, lambdas)?;
    Ok(summarize(l, &sols))
}

/// Columns `b(lambda_j) = lambda_j^{1/4} T(lambda_j + i0) F(lambda_j)^*` as
/// radial functions sampled at the grid nodes.
#[derive(Debug, Clone)]
pub struct BOperatorChannel {
    pub l: usize,
    pub lambdas: Vec<f64>,
    pub radii: Vec<f64>,
    pub weights: Vec<f64>,
    /// `n_r x N` nodal samples, one column per energy.
    pub columns: CMatrix,
    pub t_weight: f64,
    pub sigma: f64,
    /// `|| <r>^{sigma - t} b(lambda_j) ||_{L^2(dr)}`.
    pub weighted_norms: Vec<f64>,
    pub scattering: SMatrixChannel,
}

impl BOperatorChannel {
    pub fn sup_weighted_norm(&self) -> f64 {
        self.weighted_norms.iter().copied().fold(0.0, f64::max)
    }
}

/// Admissible weights for `B`: `sigma > 5` and `t in (5/2, sigma - 5/2)`.
pub fn check_b_weight(t_weight: f64, sigma: f64) -> Result<()> {
    if !(sigma > 5.0) || !(t_weight > 2.5 && t_weight < sigma - 2.5) {
        return Err(LabError::Hypothesis(format!(
            "t_weight = {t_weight} with sigma = {sigma}: boundedness of B needs sigma > 5 and t ∈ (5/2, σ−5/2)"
        )));
    }
    Ok(())
}

#[allow(non_snake_case)]
pub fn build_B(p: &Potential, l: usize, grid_e: &LogEnergyGrid, grid_r: &RadialGrid, t_weight: f64) -> Result<BOperatorChannel> {
    let sigma = p.working_sigma();
    check_b_weight(t_weight, sigma)?;
    let solver = LsSolver::new(p, grid_r)?;
    let sols = solve_all(&solver, l, grid_e.nodes())?;
    let n = grid_r.len();
    let v = solver.potential();
    let columns = CMatrix::from_fn(n, sols.len(), |i, j| {
        let lambda = sols[j].lambda;
        let k = lambda.sqrt();
        let factor = lambda.powf(0.25) / (std::f64::consts::PI * k).sqrt();
        sols[j].psi[i] * (v[i] * factor)
    });
    let weight: Vec<f64> = grid_r
        .nodes()
        .iter()
        .zip(grid_r.weights())
        .map(|(r, w)| w * (1.0 + r * r).powf(sigma - t_weight))
        .collect();
    let weighted_norms: Vec<f64> = (0..sols.len())
        .map(|j| {
            (0..n)
                .map(|i| weight[i] * columns[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    if let Some(j) = weighted_norms.iter().position(|x| !x.is_finite()) {
        return Err(LabError::Singular {
            lambda: sols[j].lambda,
            condition: sols[j].condition,
        });
    }
    Ok(BOperatorChannel {
        l,
        lambdas: grid_e.nodes().to_vec(),
        radii: grid_r.nodes().to_vec(),
        weights: grid_r.weights().to_vec(),
        columns,
        t_weight,
        sigma,
        weighted_norms,
        scattering: summarize(l, &sols),
    })
}

/// Born approximation `delta ~ -(1/k) int jhat^2 V dr` on the grid.
pub fn born_phase(p: &Potential, l: usize, k: f64, grid: &RadialGrid) -> f64 {
    -grid.integrate(|r| riccati(l, k * r).j.powi(2) * p.evaluate(r)) / k
}

/// Realification helper used by callers that need `jhat` columns.
pub fn riccati_column(l: usize, k: f64, grid: &RadialGrid) -> DVector<f64> {
    DVector::from_iterator(grid.len(), grid.nodes().iter().map(|&r| riccati(l, k * r).j))
}
