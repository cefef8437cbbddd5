//! Levinson's theorem per channel: the decrease of the phase shift from
//! threshold to infinity, in units of `pi`, counts the bound states.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::lippmann_schwinger::SMatrixChannel;
use crate::potentials::Potential;
use crate::radial_oracle::{bound_states, oracle_grid, phase_shifts, BoundStateReport, PhaseShiftTable};

/// Largest `|delta(k_max)|` (radians) for the sweep to count as complete.
pub const TAIL_PHASE_LIMIT: f64 = 0.05;
/// Allowed spread of the threshold windings before a channel is flagged.
pub const THRESHOLD_SPREAD: f64 = 0.1;
pub const DEFECT_TOLERANCE: f64 = 0.05;
/// Largest phase change between neighbouring nodes of a continuous branch.
const BRANCH_STEP_LIMIT: f64 = 0.45 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdFlag {
    Clean,
    SuspectedResonance,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevinsonReport {
    pub l: usize,
    /// `(delta(0+) - delta(inf)) / pi`, extrapolated to threshold.
    pub winding: f64,
    pub bound_count: usize,
    pub defect: f64,
    pub threshold_flag: ThresholdFlag,
    /// Raw windings from the three smallest-`k` anchors used in the extrapolation.
    pub anchors: [(f64, f64); 3],
}

impl LevinsonReport {
    pub fn passes(&self) -> bool {
        self.threshold_flag == ThresholdFlag::Clean && self.defect.abs() < DEFECT_TOLERANCE
    }
}

/// Phase table read off a Lippmann-Schwinger sweep, `k = sqrt(lambda)`.
pub fn table_from_s(channel: &SMatrixChannel) -> PhaseShiftTable {
    PhaseShiftTable {
        l: channel.l,
        k_nodes: channel.lambdas.iter().map(|l| l.sqrt()).collect(),
        deltas: channel.deltas.clone(),
        r_match: f64::NAN,
        step: f64::NAN,
    }
}

fn nearest(k_nodes: &[f64], target: f64) -> usize {
    k_nodes
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map(|x| x.0)
        .unwrap_or(0)
}

/// Quadratic through three points, evaluated at zero.
fn extrapolate_to_zero(pts: &[(f64, f64); 3]) -> f64 {
    let [(x0, y0), (x1, y1), (x2, y2)] = *pts;
    y0 * x1 * x2 / ((x0 - x1) * (x0 - x2)) + y1 * x0 * x2 / ((x1 - x0) * (x1 - x2)) + y2 * x0 * x1 / ((x2 - x0) * (x2 - x1))
}

pub fn check_levinson(p: &Potential, l: usize, table: &PhaseShiftTable, bs: &BoundStateReport) -> Result<LevinsonReport> {
    if let Some(expected) = p.reference_bound_state_count(l) {
        if expected != bs.count {
            return Err(LabError::Hypothesis(format!(
                "{} bound states found for l = {l}, the closed form gives {expected}",
                bs.count
            )));
        }
    }
    if table.l != l || bs.l != l {
        return Err(LabError::GridMismatch(format!(
            "phase table for l = {} and bound states for l = {}, asked for {l}",
            table.l, bs.l
        )));
    }
    let (k, d) = (&table.k_nodes, &table.deltas);
    if k.len() < 8 || k.len() != d.len() || k.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::InvalidGrid("phase table needs at least 8 ascending k nodes".into()));
    }
    let last = d[d.len() - 1];
    if last.abs() >= TAIL_PHASE_LIMIT {
        return Err(LabError::OutOfRange(format!(
            "delta(k_max = {}) = {last:.3} rad; extend the sweep until |delta| < {TAIL_PHASE_LIMIT}",
            k[k.len() - 1]
        )));
    }
    if let Some(j) = d.windows(2).position(|w| (w[1] - w[0]).abs() > BRANCH_STEP_LIMIT) {
        return Err(LabError::Branch(format!(
            "phase jumps by {:.3} between k = {} and k = {}",
            d[j + 1] - d[j],
            k[j],
            k[j + 1]
        )));
    }
    let idx = [0, nearest(k, 2.0 * k[0]), nearest(k, 4.0 * k[0])];
    if idx[1] == idx[0] || idx[2] == idx[1] {
        return Err(LabError::InvalidGrid("phase table too sparse near threshold".into()));
    }
    let anchors = idx.map(|j| (k[j], (d[j] - last) / PI));
    let winding = extrapolate_to_zero(&anchors);
    let raw = anchors.map(|a| a.1);
    let spread = raw.iter().copied().fold(f64::MIN, f64::max) - raw.iter().copied().fold(f64::MAX, f64::min);
    let threshold_flag = if spread > THRESHOLD_SPREAD || (winding - anchors[0].1).abs() > THRESHOLD_SPREAD {
        ThresholdFlag::SuspectedResonance
    } else {
        ThresholdFlag::Clean
    };
    Ok(LevinsonReport {
        l,
        winding,
        bound_count: bs.count,
        defect: winding - bs.count as f64,
        threshold_flag,
        anchors,
    })
}

/// Geometric `k` nodes from `k_min` to `k_max`.
pub fn sweep_nodes(k_min: f64, k_max: f64, n: usize) -> Vec<f64> {
    let r = (k_max / k_min).ln() / (n - 1) as f64;
    (0..n).map(|i| k_min * (r * i as f64).exp()).collect()
}

/// Grid long enough for the weakest level of the registered wells to decay.
pub fn bound_state_grid(p: &Potential) -> Result<crate::grids::RadialGrid> {
    oracle_grid(p, 1.0, 60.0)
}

/// Numerov sweep from `k_min` upward, doubling `k_max` from 50 until the
/// phase has decayed below [`TAIL_PHASE_LIMIT`], then the Levinson check.
pub fn levinson_sweep(p: &Potential, l: usize, k_min: f64) -> Result<(PhaseShiftTable, LevinsonReport)> {
    let mut k_max = 50.0;
    loop {
        let grid = oracle_grid(p, k_max, 1.0)?;
        let n = ((k_max / k_min).ln() * 60.0).ceil() as usize;
        let table = phase_shifts(p, l, &sweep_nodes(k_min, k_max, n), &grid)?;
        let tail = table.deltas.last().copied().unwrap_or(0.0).abs();
        if tail < 0.5 * TAIL_PHASE_LIMIT || k_max >= 6400.0 {
            let bs = bound_states(p, l, &bound_state_grid(p)?)?;
            let report = check_levinson(p, l, &table, &bs)?;
            return Ok((table, report));
        }
        k_max *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_extrapolation_is_exact_on_quadratics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x;
        let pts = [(0.1, f(0.1)), (0.2, f(0.2)), (0.4, f(0.4))];
        assert!((extrapolate_to_zero(&pts) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn free_channel_has_no_winding() {
        let (_, r) = levinson_sweep(&Potential::free(), 0, 1e-2).unwrap();
        assert_eq!(r.bound_count, 0);
        assert!(r.winding.abs() < 1e-6 && r.passes());
    }

    #[test]
    fn square_wells_count_their_bound_states() {
        for (v0, l, expect) in [(1.0, 0, 0), (4.0, 0, 1), (15.0, 0, 1), (15.0, 1, 1), (4.0, 1, 0)] {
            let p = Potential::square_well(v0, 1.0);
            let (_, r) = levinson_sweep(&p, l, 1e-2).unwrap();
            assert_eq!(r.bound_count, expect, "V0 = {v0}, l = {l}");
            assert!(r.passes(), "V0 = {v0}, l = {l}: {r:?}");
        }
    }

    #[test]
    fn numerov_and_lippmann_schwinger_wind_alike() {
        use crate::grids::make_log_energy_grid;
        use crate::lippmann_schwinger::{ls_grid, s_matrix_channel};
        let p = Potential::square_well(4.0, 1.0);
        let ge = make_log_energy_grid(64, 1e-2, 1e2).unwrap();
        let ls = table_from_s(&s_matrix_channel(&p, 0, &ge, &ls_grid(&p, 10.0).unwrap()).unwrap());
        let num = phase_shifts(&p, 0, &ls.k_nodes, &oracle_grid(&p, 10.0, 1.0).unwrap()).unwrap();
        let turn = |t: &PhaseShiftTable| (t.deltas[0] - t.deltas[t.deltas.len() - 1]) / PI;
        assert!((turn(&ls) - turn(&num)).abs() < 0.02);
    }

    #[test]
    fn near_threshold_well_is_flagged() {
        // sqrt(V0) a just below pi/2: an s-wave state about to bind
        let v0 = (0.5 * PI - 0.01f64).powi(2);
        let (_, r) = levinson_sweep(&Potential::square_well(v0, 1.0), 0, 1e-2).unwrap();
        assert_eq!(r.threshold_flag, ThresholdFlag::SuspectedResonance, "{r:?}");
    }

    #[test]
    fn rejects_truncated_and_broken_tables() {
        let p = Potential::square_well(4.0, 1.0);
        let grid = oracle_grid(&p, 5.0, 1.0).unwrap();
        let table = phase_shifts(&p, 0, &sweep_nodes(1e-2, 5.0, 200), &grid).unwrap();
        let bs = bound_states(&p, 0, &bound_state_grid(&p).unwrap()).unwrap();
        assert!(matches!(check_levinson(&p, 0, &table, &bs), Err(LabError::OutOfRange(_))));
        let (mut full, _) = levinson_sweep(&p, 0, 1e-2).unwrap();
        full.deltas[3] += PI;
        assert!(matches!(check_levinson(&p, 0, &full, &bs), Err(LabError::Branch(_))));
    }
}
