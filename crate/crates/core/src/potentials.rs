//! Spherically symmetric test potentials and their reference data.
//!
//! All kinds are attractive for positive strength: `V(r) = -V0 * shape(r)`.
//! Units are `hbar = 2m = 1`, so energies are `k^2`.

use serde::{Deserialize, Serialize};

use crate::bessel::riccati_j;

/// Exponent standing in for an infinite decay rate wherever a finite weight
/// `<r>^sigma` has to be formed.
pub const WORKING_SIGMA_CAP: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    SquareWell { depth: f64, radius: f64 },
    Gaussian { depth: f64, width: f64 },
    Exponential { depth: f64, range: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(flatten)]
    pub kind: PotentialKind,
    /// Decay exponent in `|V(r)| <= C <r>^{-sigma}`; infinite for compact
    /// support or super-polynomial decay.
    #[serde(default = "infinite", skip_serializing_if = "is_infinite")]
    pub sigma_decay: f64,
    #[serde(default)]
    pub label: String,
}

fn is_infinite(v: &f64) -> bool {
    v.is_infinite()
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl Potential {
    pub fn square_well(depth: f64, radius: f64) -> Self {
        Self {
            kind: PotentialKind::SquareWell { depth, radius },
            sigma_decay: f64::INFINITY,
            label: format!("square_well(V0={depth}, a={radius})"),
        }
    }

    pub fn gaussian(depth: f64, width: f64) -> Self {
        Self {
            kind: PotentialKind::Gaussian { depth, width },
            sigma_decay: f64::INFINITY,
            label: format!("gaussian(V0={depth}, width={width})"),
        }
    }

    pub fn exponential(depth: f64, range: f64) -> Self {
        Self {
            kind: PotentialKind::Exponential { depth, range },
            sigma_decay: f64::INFINITY,
            label: format!("exponential(V0={depth}, range={range})"),
        }
    }

    /// The zero potential, `V = 0`.
    pub fn free() -> Self {
        let mut p = Self::square_well(0.0, 1.0);
        p.label = "free".into();
        p
    }

    /// Registered defaults: parameters sit away from zero-energy resonance
    /// thresholds (square well: `sqrt(V0) a` is far from zeros of `j_{l-1}`).
    pub fn registry() -> Vec<Potential> {
        vec![
            Self::square_well(1.0, 1.0),
            Self::square_well(4.0, 1.0),
            Self::square_well(15.0, 1.0),
            Self::gaussian(3.0, 1.0),
            Self::exponential(2.0, 0.5),
        ]
    }

    pub fn depth(&self) -> f64 {
        match self.kind {
            PotentialKind::SquareWell { depth, .. }
            | PotentialKind::Gaussian { depth, .. }
            | PotentialKind::Exponential { depth, .. } => depth,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.depth() == 0.0
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::SquareWell { depth, radius } => {
                if r < radius {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialKind::Gaussian { depth, width } => -depth * (-(r / width).powi(2)).exp(),
            PotentialKind::Exponential { depth, range } => -depth * (-r / range).exp(),
        }
    }

    /// Value of the smooth piece covering `[.., edge]` when `r` sits on a
    /// discontinuity; identical to [`evaluate`](Self::evaluate) elsewhere.
    pub fn evaluate_inner(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::SquareWell { depth, radius } if r <= radius => -depth,
            _ => self.evaluate(r),
        }
    }

    /// Taylor coefficients `v_m` of the inner smooth piece, `V(r) = sum v_m r^m`
    /// near the origin.
    pub fn taylor_coefficients(&self, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        match self.kind {
            PotentialKind::SquareWell { depth, .. } => out[0] = -depth,
            PotentialKind::Gaussian { depth, width } => {
                let mut term = -depth;
                for j in 0..=order / 2 {
                    out[2 * j] = term;
                    term *= -1.0 / (width * width * (j + 1) as f64);
                }
            }
            PotentialKind::Exponential { depth, range } => {
                let mut term = -depth;
                for (m, slot) in out.iter_mut().enumerate() {
                    *slot = term;
                    term *= -1.0 / (range * (m + 1) as f64);
                }
            }
        }
        out
    }

    /// Points where `V` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            PotentialKind::SquareWell { radius, .. } => vec![radius],
            _ => Vec::new(),
        }
    }

    /// Radius beyond which `|V| < tol * |V0|` (exactly zero for the square well).
    pub fn effective_support(&self, tol: f64) -> f64 {
        match self.kind {
            PotentialKind::SquareWell { radius, .. } => radius,
            PotentialKind::Gaussian { width, .. } => width * (-tol.ln()).sqrt(),
            PotentialKind::Exponential { range, .. } => range * (-tol.ln()),
        }
    }

    /// Default support radius for the integral-equation grids.
    pub fn support_radius(&self) -> f64 {
        self.effective_support(1e-18)
    }

    /// Finite exponent used for weights `<r>^sigma`.
    pub fn working_sigma(&self) -> f64 {
        self.sigma_decay.min(WORKING_SIGMA_CAP)
    }

    /// Declared constant `C` in `|V(r)| <= C <r>^{-sigma}` for the given
    /// (finite) exponent.
    pub fn decay_constant(&self, sigma: f64) -> f64 {
        match self.kind {
            PotentialKind::SquareWell { depth, radius } => depth.abs() * (1.0 + radius * radius).powf(sigma / 2.0),
            PotentialKind::Gaussian { depth, width } => {
                // max over s = r^2 of exp(-s/w^2) (1+s)^{sigma/2}
                let w2 = width * width;
                let one_plus_s = (sigma * w2 / 2.0).max(1.0);
                depth.abs() * (-(one_plus_s - 1.0) / w2).exp() * one_plus_s.powf(sigma / 2.0)
            }
            PotentialKind::Exponential { depth, range } => {
                // (1+r^2)^{sigma/2} <= (1+r)^sigma; maximize exp(-r/range)(1+r)^sigma
                let one_plus_r = (sigma * range).max(1.0);
                depth.abs() * (-(one_plus_r - 1.0) / range).exp() * one_plus_r.powf(sigma)
            }
        }
    }

    /// `max |V(r)| <r>^sigma` over a fine sample of `[0, 100]`.
    pub fn sampled_decay_bound(&self, sigma: f64) -> f64 {
        (0..=100_000)
            .map(|i| {
                let r = i as f64 * 1e-3;
                self.evaluate(r).abs() * (1.0 + r * r).powf(sigma / 2.0)
            })
            .fold(0.0, f64::max)
    }

    /// Analytic bound-state count in channel `l`, when a closed form exists.
    ///
    /// Square well of depth `V0` and radius `a`: the count equals the number of
    /// zeros of `j_{l-1}(z)` in `(0, sqrt(V0) a)`, with `j_{-1}(z) = cos z / z`.
    pub fn reference_bound_state_count(&self, l: usize) -> Option<usize> {
        match self.kind {
            PotentialKind::SquareWell { depth, radius } => {
                if depth <= 0.0 {
                    return Some(0);
                }
                let z0 = depth.sqrt() * radius;
                Some(count_threshold_zeros(l, z0))
            }
            _ => None,
        }
    }
}

/// Zeros of `z j_{l-1}(z)` (or `cos z` for `l = 0`) in `(0, z0)`.
fn count_threshold_zeros(l: usize, z0: f64) -> usize {
    if l == 0 {
        return ((z0 / std::f64::consts::PI) + 0.5).floor() as usize;
    }
    let steps = ((z0 / 1e-3).ceil() as usize).max(16);
    let f = |z: f64| riccati_j(l - 1, z);
    let mut count = 0;
    let mut prev = f(z0 / steps as f64);
    for i in 2..=steps {
        let cur = f(z0 * i as f64 / steps as f64);
        if prev != 0.0 && cur.signum() != prev.signum() {
            count += 1;
        }
        prev = cur;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_examples() {
        let sw = Potential::square_well(4.0, 1.0);
        assert_eq!(sw.evaluate(0.5), -4.0);
        assert_eq!(sw.evaluate(2.0), 0.0);
        let g = Potential::gaussian(3.0, 1.0);
        assert!((g.evaluate(1.0) + 3.0 * (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn reference_counts() {
        assert_eq!(Potential::square_well(4.0, 1.0).reference_bound_state_count(0), Some(1));
        assert_eq!(Potential::square_well(1.0, 1.0).reference_bound_state_count(0), Some(0));
        assert_eq!(Potential::gaussian(3.0, 1.0).reference_bound_state_count(0), None);
        // sqrt(15) = 3.873: one s-state (pi/2), one p-state (pi), no d-state (4.493)
        let deep = Potential::square_well(15.0, 1.0);
        assert_eq!(deep.reference_bound_state_count(0), Some(1));
        assert_eq!(deep.reference_bound_state_count(1), Some(1));
        assert_eq!(deep.reference_bound_state_count(2), Some(0));
        assert_eq!(Potential::square_well(30.0, 1.0).reference_bound_state_count(0), Some(2));
    }

    #[test]
    fn registry_decay_bounds() {
        for p in Potential::registry() {
            let sigma = p.working_sigma();
            assert!(sigma > 7.0);
            let c = p.decay_constant(sigma);
            let sampled = p.sampled_decay_bound(sigma);
            assert!(sampled.is_finite());
            assert!(sampled <= c * (1.0 + 1e-12), "{}: {sampled} > {c}", p.label);
        }
    }

    #[test]
    fn taylor_matches_values() {
        for p in [Potential::gaussian(3.0, 1.3), Potential::exponential(2.0, 0.5), Potential::square_well(4.0, 1.0)] {
            let c = p.taylor_coefficients(12);
            let r: f64 = 0.05;
            let series: f64 = c.iter().enumerate().map(|(m, v)| v * r.powi(m as i32)).sum();
            assert!((series - p.evaluate(r)).abs() < 1e-14, "{}", p.label);
        }
    }

    #[test]
    fn serde_round_trip_shape() {
        let p = Potential::gaussian(3.0, 1.0);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"kind\":\"gaussian\""));
        let q: Potential = serde_json::from_str(r#"{"kind":"square_well","depth":4.0,"radius":1.0}"#).unwrap();
        assert_eq!(q.evaluate(0.5), -4.0);
        assert!(q.sigma_decay.is_infinite());
    }
}
