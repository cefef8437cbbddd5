//! Reference solutions of the radial equation that do not go through the
//! integral-equation machinery: Numerov phase shifts, bound states, and a
//! time-dependent realization of the wave operator.

mod propagation;
mod stationary;

use std::f64::consts::PI;

use serde::Serialize;

pub use propagation::{time_dependent_waveop, PropagationReport, Wavepacket};
pub use stationary::{numerov_step, ScatteringState};

use crate::bessel::{riccati, riccati_decaying};
use crate::error::{LabError, Result};
use crate::grids::RadialGrid;
use crate::potentials::{Potential, PotentialKind};

/// Terms of the Frobenius series used for the first two Numerov values.
const SERIES_TERMS: usize = 12;

/// Jumps between neighbouring unwrapped phases at or above this size cannot
/// be attributed to a branch reliably.
const BRANCH_JUMP_LIMIT: f64 = 0.45 * PI;

/// Minimum number of Numerov steps per local wavelength.
const NODES_PER_PERIOD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseShiftTable {
    pub l: usize,
    pub k_nodes: Vec<f64>,
    /// Continuous branch, anchored on the principal value at the largest `k`.
    pub deltas: Vec<f64>,
    pub r_match: f64,
    pub step: f64,
}

impl PhaseShiftTable {
    /// `s_l(k^2) = exp(2 i delta_l(k))`.
    pub fn s_values(&self) -> Vec<num_complex::Complex64> {
        self.deltas
            .iter()
            .map(|d| num_complex::Complex64::from_polar(1.0, 2.0 * d))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundStateReport {
    pub l: usize,
    pub count: usize,
    /// Ascending, strictly negative.
    pub energies: Vec<f64>,
    pub method: String,
}

/// Regular solution sampled at the matching radius.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RegularSolution {
    pub u: f64,
    pub du: f64,
    /// Sign changes strictly inside `(0, r_match)`.
    pub nodes: usize,
}

/// Matching radius for the potential on a uniform grid with step `h`: the
/// well edge when `V` has compact support, otherwise where `|V|` is
/// negligible, rounded up to a grid node.
pub fn matching_radius(p: &Potential, h: f64) -> Result<usize> {
    match p.kind {
        PotentialKind::SquareWell { radius, .. } => {
            let m = (radius / h).round();
            if (m * h - radius).abs() > 1e-9 * radius || m < 2.0 {
                return Err(LabError::Resolution(format!(
                    "well radius {radius} is not a node of the uniform grid with step {h}"
                )));
            }
            Ok(m as usize)
        }
        _ => Ok(((p.support_radius() / h).ceil() as usize).max(2)),
    }
}

/// Uniform grid suited to Numerov integration of `p` up to momentum `k_max`:
/// `2^11` steps per unit length, or finer if the local wavelength demands it.
pub fn oracle_grid(p: &Potential, k_max: f64, extra: f64) -> Result<RadialGrid> {
    let mut per_unit = 2048.0;
    let k_eff = (k_max * k_max + p.depth().abs()).sqrt();
    while k_eff / per_unit > 2.0 * PI / (4.0 * NODES_PER_PERIOD) {
        per_unit *= 2.0;
    }
    let h = 1.0 / per_unit;
    let m = matching_radius(p, h)?;
    let n = m + ((extra / h).ceil() as usize).max(8);
    RadialGrid::uniform(n, n as f64 * h)
}

fn uniform_step(grid: &RadialGrid) -> Result<f64> {
    grid.uniform_step()
        .ok_or_else(|| LabError::InvalidGrid("Numerov integration needs a uniform_trapezoid grid".into()))
}

/// Potential of the piece containing the origin, continued past a
/// discontinuity so that the last Numerov step stays on one smooth branch.
fn inner_potential(p: &Potential, r: f64) -> f64 {
    match p.kind {
        PotentialKind::SquareWell { depth, .. } => -depth,
        _ => p.evaluate(r),
    }
}

/// Frobenius series for the regular solution, `u = r^{l+1} sum a_n r^n`.
fn series_start(p: &Potential, l: usize, energy: f64, r: f64) -> f64 {
    let mut w = p.taylor_coefficients(SERIES_TERMS);
    w[0] -= energy;
    let mut a = vec![0.0; SERIES_TERMS + 1];
    a[0] = 1.0;
    for n in 2..=SERIES_TERMS {
        let s: f64 = (0..=n - 2).map(|m| w[m] * a[n - 2 - m]).sum();
        a[n] = s / (n * (n + 2 * l + 1)) as f64;
    }
    let poly: f64 = a.iter().rev().fold(0.0, |acc, c| acc * r + c);
    r.powi(l as i32 + 1) * poly
}

/// Numerov integration of `u'' = (l(l+1)/r^2 + V - E) u` from the origin to
/// `r_m = m h`, with the derivative from the compact fourth-order formula.
pub(crate) fn integrate_regular(p: &Potential, l: usize, energy: f64, h: f64, m: usize) -> RegularSolution {
    integrate_regular_into(p, l, energy, h, m, None)
}

/// As [`integrate_regular`], also recording `u` at the nodes `0..=m`.
pub(crate) fn integrate_regular_into(
    p: &Potential,
    l: usize,
    energy: f64,
    h: f64,
    m: usize,
    mut store: Option<&mut Vec<f64>>,
) -> RegularSolution {
    let centrifugal = (l * (l + 1)) as f64;
    let f = |i: usize| {
        let r = i as f64 * h;
        centrifugal / (r * r) + inner_potential(p, r) - energy
    };
    let h2 = h * h / 12.0;
    let mut u_prev = series_start(p, l, energy, h);
    let mut u_cur = series_start(p, l, energy, 2.0 * h);
    let mut f_prev = f(1);
    let mut f_cur = f(2);
    let mut nodes = 0;
    let mut before_match = (0.0, 0.0);
    if let Some(buf) = store.as_deref_mut() {
        buf.clear();
        buf.extend([0.0, u_prev, u_cur]);
    }
    for i in 2..=m {
        let f_next = f(i + 1);
        let u_next = (2.0 * (1.0 + 5.0 * h2 * f_cur) * u_cur - (1.0 - h2 * f_prev) * u_prev) / (1.0 - h2 * f_next);
        if i < m {
            if let Some(buf) = store.as_deref_mut() {
                buf.push(u_next);
            }
        }
        if i < m && u_next != 0.0 && u_next.signum() != u_cur.signum() {
            nodes += 1;
        }
        if i == m {
            before_match = (u_prev, f_prev);
        }
        u_prev = u_cur;
        u_cur = u_next;
        f_prev = f_cur;
        f_cur = f_next;
        if u_cur.abs() > 1e200 {
            u_prev *= 1e-200;
            u_cur *= 1e-200;
            before_match.0 *= 1e-200;
            if let Some(buf) = store.as_deref_mut() {
                buf.iter_mut().for_each(|v| *v *= 1e-200);
            }
        }
    }
    // After the loop: u_prev = u_m, u_cur = u_{m+1}; before_match holds u_{m-1}.
    let (u_minus, f_minus) = before_match;
    let (u_m, u_plus, f_plus) = (u_prev, u_cur, f_cur);
    let du = ((1.0 - 2.0 * h2 * f_plus) * u_plus - (1.0 - 2.0 * h2 * f_minus) * u_minus) / (2.0 * h);
    RegularSolution { u: u_m, du, nodes }
}

/// Phase shift in `(-pi/2, pi/2]` from matching to free solutions at `r`.
pub(crate) fn principal_phase(sol: &RegularSolution, l: usize, k: f64, r: f64) -> Result<f64> {
    let b = riccati(l, k * r);
    let num = sol.du * b.j - sol.u * k * b.dj;
    let den = sol.du * b.y - sol.u * k * b.dy;
    let scale = sol.du.hypot(k * sol.u) * b.j.hypot(b.y).max(b.dj.hypot(b.dy));
    if !(num.is_finite() && den.is_finite()) || num.hypot(den) <= 1e-13 * scale {
        return Err(LabError::Matching {
            k,
            reason: format!("degenerate Wronskian at r = {r}"),
        });
    }
    if den == 0.0 {
        return Ok(PI / 2.0);
    }
    Ok((num / den).atan())
}

pub fn phase_shifts(p: &Potential, l: usize, k_nodes: &[f64], grid: &RadialGrid) -> Result<PhaseShiftTable> {
    if k_nodes.is_empty() || k_nodes.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
        return Err(LabError::OutOfRange("k nodes must be positive".into()));
    }
    let h = uniform_step(grid)?;
    let k_max = k_nodes.iter().copied().fold(0.0, f64::max);
    let k_eff = (k_max * k_max + p.depth().abs()).sqrt();
    if k_eff * h > 2.0 * PI / NODES_PER_PERIOD {
        return Err(LabError::Resolution(format!(
            "step {h} gives fewer than {NODES_PER_PERIOD} nodes per period at local momentum {k_eff:.4}"
        )));
    }
    let m = matching_radius(p, h)?;
    let r_match = m as f64 * h;
    if r_match > grid.r_max() * (1.0 + 1e-12) {
        return Err(LabError::Resolution(format!(
            "grid r_max = {} ends before the matching radius {r_match}",
            grid.r_max()
        )));
    }
    let mut order: Vec<usize> = (0..k_nodes.len()).collect();
    order.sort_by(|&a, &b| k_nodes[b].partial_cmp(&k_nodes[a]).unwrap());
    let mut deltas = vec![0.0; k_nodes.len()];
    let mut previous: Option<f64> = None;
    for &idx in &order {
        let k = k_nodes[idx];
        let sol = integrate_regular(p, l, k * k, h, m);
        let principal = principal_phase(&sol, l, k, r_match)?;
        let delta = match previous {
            None => principal,
            Some(prev) => {
                let shift = ((prev - principal) / PI).round();
                let d = principal + shift * PI;
                if (d - prev).abs() >= BRANCH_JUMP_LIMIT {
                    return Err(LabError::Branch(format!(
                        "phase changes by {:.3} rad next to k = {k}; refine the k grid",
                        (d - prev).abs()
                    )));
                }
                d
            }
        };
        deltas[idx] = delta;
        previous = Some(delta);
    }
    Ok(PhaseShiftTable {
        l,
        k_nodes: k_nodes.to_vec(),
        deltas,
        r_match,
        step: h,
    })
}

/// Number of bound states: nodes of the zero-energy solution, plus one if
/// its exterior continuation `A r^{l+1} + B r^{-l}` vanishes beyond `r_m`.
fn zero_energy_count(p: &Potential, l: usize, h: f64, m: usize) -> usize {
    let sol = integrate_regular(p, l, 0.0, h, m);
    let r = m as f64 * h;
    let lf = l as f64;
    let a = (lf * sol.u + r * sol.du) / ((2.0 * lf + 1.0) * r.powf(lf + 1.0));
    let b = ((lf + 1.0) * sol.u - r * sol.du) * r.powf(lf) / (2.0 * lf + 1.0);
    let exterior = a != 0.0 && -b / a > r.powf(2.0 * lf + 1.0);
    sol.nodes + usize::from(exterior)
}

/// Log-derivative mismatch between the regular solution and the decaying
/// exterior solution, at `E = -q^2`.
fn mismatch(p: &Potential, l: usize, q: f64, h: f64, m: usize) -> f64 {
    let sol = integrate_regular(p, l, -q * q, h, m);
    let r = m as f64 * h;
    let (k, dk) = riccati_decaying(l, q * r);
    let e = (q * r).exp();
    let norm = sol.u.hypot(sol.du / q.max(1e-300));
    (sol.du * k * e - sol.u * q * dk * e) / norm
}

pub fn bound_states(p: &Potential, l: usize, grid: &RadialGrid) -> Result<BoundStateReport> {
    let h = uniform_step(grid)?;
    let m = matching_radius(p, h)?;
    let r_match = m as f64 * h;
    let method = "numerov zero-energy node count; bisection on exterior log-derivative mismatch".to_string();
    let depth = p.depth();
    if depth <= 0.0 {
        return Ok(BoundStateReport { l, count: 0, energies: Vec::new(), method });
    }
    if (depth.sqrt() * h) > 2.0 * PI / NODES_PER_PERIOD {
        return Err(LabError::Resolution(format!("step {h} too coarse for well depth {depth}")));
    }
    let count = zero_energy_count(p, l, h, m);
    let q_max = depth.sqrt();
    let mut energies = Vec::new();
    for scan in [4000usize, 32000] {
        energies.clear();
        let qs: Vec<f64> = (1..=scan).map(|i| q_max * i as f64 / scan as f64).collect();
        let mut prev_q = qs[0];
        let mut prev_d = mismatch(p, l, prev_q, h, m);
        for &q in &qs[1..] {
            let d = mismatch(p, l, q, h, m);
            if d == 0.0 || d.signum() != prev_d.signum() {
                let root = bisect(|x| mismatch(p, l, x, h, m), prev_q, q, prev_d);
                energies.push(-root * root);
            }
            prev_q = q;
            prev_d = d;
        }
        if energies.len() == count {
            break;
        }
    }
    if energies.len() != count {
        return Err(LabError::Resolution(format!(
            "found {} eigenvalues but the zero-energy solution has {count} nodes (l = {l})",
            energies.len()
        )));
    }
    energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if let Some(&shallow) = energies.last() {
        let kappa = (-shallow).sqrt();
        let decay = kappa * (grid.r_max() - r_match);
        if decay < 8.0 {
            return Err(LabError::Boundary(format!(
                "level E = {shallow:.6e} decays only by exp(-{decay:.2}) before r_max = {}; need r_max >= {:.3}",
                grid.r_max(),
                r_match + 8.0 / kappa
            )));
        }
    }
    Ok(BoundStateReport { l, count, energies, method })
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a) <= 1e-15 * mid {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_well_delta0(v0: f64, a: f64, k: f64) -> f64 {
        let kappa = (k * k + v0).sqrt();
        ((k / kappa) * (kappa * a).tan()).atan() - k * a
    }

    fn wrap(d: f64) -> f64 {
        d - (d / PI).round() * PI
    }

    #[test]
    fn free_phase_shifts_vanish() {
        let p = Potential::free();
        let grid = oracle_grid(&p, 5.0, 1.0).unwrap();
        for l in 0..4 {
            let t = phase_shifts(&p, l, &[0.3, 1.0, 2.5, 5.0], &grid).unwrap();
            assert!(t.deltas.iter().all(|d| d.abs() < 1e-9), "{:?}", t.deltas);
        }
    }

    #[test]
    fn square_well_matches_closed_form() {
        let p = Potential::square_well(4.0, 1.0);
        let ks: Vec<f64> = (1..=50).map(|i| 0.1 * i as f64).collect();
        let grid = oracle_grid(&p, 5.0, 1.0).unwrap();
        let t = phase_shifts(&p, 0, &ks, &grid).unwrap();
        for (k, d) in ks.iter().zip(&t.deltas) {
            let exact = square_well_delta0(4.0, 1.0, *k);
            assert!(wrap(d - exact).abs() < 1e-8, "k={k}: {d} vs {exact}");
        }
    }

    #[test]
    fn square_well_higher_l_against_matching() {
        // Interior solution kappa r j_l(kappa r) matched to free functions.
        let (v0, a) = (4.0, 1.0);
        let p = Potential::square_well(v0, a);
        let grid = oracle_grid(&p, 5.0, 1.0).unwrap();
        for l in 1..4 {
            for &k in &[0.5, 1.7, 4.0] {
                let kappa: f64 = (k * k + v0).sqrt();
                let inner = riccati(l, kappa * a);
                let (u, du) = (inner.j, kappa * inner.dj);
                let b = riccati(l, k * a);
                let exact = ((du * b.j - u * k * b.dj) / (du * b.y - u * k * b.dy)).atan();
                let t = phase_shifts(&p, l, &[k], &grid).unwrap();
                assert!(wrap(t.deltas[0] - exact).abs() < 1e-8, "l={l} k={k}");
            }
        }
    }

    #[test]
    fn rejects_coarse_grid_and_bad_radius() {
        let p = Potential::square_well(4.0, 1.0);
        let coarse = RadialGrid::uniform(20, 2.0).unwrap();
        assert!(matches!(phase_shifts(&p, 0, &[10.0], &coarse), Err(LabError::Resolution(_))));
        let off = RadialGrid::uniform(300, 3.0 * 1.0001).unwrap();
        assert!(phase_shifts(&p, 0, &[1.0], &off).is_err());
        let grid = oracle_grid(&p, 5.0, 1.0).unwrap();
        assert!(phase_shifts(&p, 0, &[-1.0], &grid).is_err());
    }

    #[test]
    fn levinson_shape_for_one_bound_state() {
        let p = Potential::square_well(4.0, 1.0);
        let ks = vec![1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];
        let grid = oracle_grid(&p, 128.0, 1.0).unwrap();
        let t = phase_shifts(&p, 0, &ks, &grid);
        // The k grid is too coarse to follow the branch; refine it.
        let ks: Vec<f64> = (0..400).map(|i| 1e-3 * (128e3f64).powf(i as f64 / 399.0)).collect();
        let t = t.or_else(|_| phase_shifts(&p, 0, &ks, &grid)).unwrap();
        let diff = t.deltas[0] - t.deltas[t.deltas.len() - 1];
        assert!((diff - PI).abs() < 0.02, "diff = {diff}");
    }

    fn square_well_s_energy(v0: f64, a: f64) -> f64 {
        // kappa_in cot(kappa_in a) = -q, kappa_in^2 = v0 - q^2
        let g = |q: f64| {
            let ki = (v0 - q * q).sqrt();
            ki / (ki * a).tan() + q
        };
        let (mut lo, mut hi) = (1e-9, v0.sqrt() - 1e-12);
        let mut glo = g(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            if gm.signum() == glo.signum() {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        let q = 0.5 * (lo + hi);
        -q * q
    }

    #[test]
    fn bound_state_square_well() {
        let p = Potential::square_well(4.0, 1.0);
        let grid = oracle_grid(&p, 2.0, 40.0).unwrap();
        let report = bound_states(&p, 0, &grid).unwrap();
        assert_eq!(report.count, 1);
        let exact = square_well_s_energy(4.0, 1.0);
        let e = report.energies[0];
        assert!(((e - exact) / exact).abs() < 1e-8, "{e} vs {exact}");
        assert_eq!(bound_states(&Potential::free(), 0, &grid).unwrap().count, 0);
    }

    #[test]
    fn bound_state_counts_match_reference() {
        for p in Potential::registry().into_iter().filter(|p| matches!(p.kind, PotentialKind::SquareWell { .. })) {
            let grid = oracle_grid(&p, 4.0, 40.0).unwrap();
            for l in 0..3 {
                let r = bound_states(&p, l, &grid).unwrap();
                assert_eq!(Some(r.count), p.reference_bound_state_count(l), "{} l={l}", p.label);
                assert!(r.energies.iter().all(|e| *e < 0.0));
            }
        }
    }

    #[test]
    fn bound_state_boundary_diagnostic() {
        let p = Potential::square_well(4.0, 1.0);
        let short = oracle_grid(&p, 2.0, 1.0).unwrap();
        match bound_states(&p, 0, &short) {
            Err(LabError::Boundary(msg)) => assert!(msg.contains("r_max")),
            other => panic!("expected boundary error, got {other:?}"),
        }
    }

    #[test]
    fn count_stable_under_refinement() {
        let p = Potential::gaussian(3.0, 1.0);
        let coarse = oracle_grid(&p, 2.0, 100.0).unwrap();
        let h = coarse.uniform_step().unwrap() / 2.0;
        let n = (coarse.r_max() / h).round() as usize;
        let fine = RadialGrid::uniform(n, n as f64 * h).unwrap();
        for l in 0..2 {
            let a = bound_states(&p, l, &coarse).unwrap();
            let b = bound_states(&p, l, &fine).unwrap();
            assert_eq!(a.count, b.count);
        }
    }
}
