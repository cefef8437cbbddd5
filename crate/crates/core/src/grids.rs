//! Radial quadrature grids and geometric energy grids.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Gauss-Legendre order of each composite panel.
pub const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialScheme {
    GaussLegendreComposite,
    UniformTrapezoid,
}

/// Quadrature nodes and weights on `(0, r_max]`.
///
/// Composite Gauss-Legendre grids also remember their panel layout, which the
/// Lippmann-Schwinger solver needs for panel-local indefinite integration.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    r_max: f64,
    scheme: RadialScheme,
    /// Panel edges (GL only), `edges.len() == panels + 1`.
    edges: Vec<f64>,
    order: usize,
    /// Polynomial degree integrated exactly (GL) or 1 (trapezoid).
    exact_degree: usize,
}

impl RadialGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn scheme(&self) -> RadialScheme {
        self.scheme
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn panel_order(&self) -> usize {
        self.order
    }

    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    /// Nodes per unit length averaged over the grid.
    pub fn node_density(&self) -> f64 {
        self.nodes.len() as f64 / self.r_max
    }

    /// Largest spacing between consecutive nodes (including the gap at 0).
    pub fn max_spacing(&self) -> f64 {
        let mut prev = 0.0;
        let mut gap: f64 = 0.0;
        for &r in &self.nodes {
            gap = gap.max(r - prev);
            prev = r;
        }
        gap
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * f(r))
            .sum()
    }

    /// Composite Gauss-Legendre on arbitrary panel edges (`edges[0] == 0`).
    pub fn from_panels(edges: &[f64], order: usize) -> Result<Self> {
        if edges.len() < 2 || edges[0] != 0.0 {
            return Err(LabError::InvalidGrid("panel edges must start at 0".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::InvalidGrid("panel edges must increase".into()));
        }
        if order < 2 {
            return Err(LabError::InvalidGrid("panel order must be at least 2".into()));
        }
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order * (edges.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (b + a);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
        }
        Ok(Self {
            nodes,
            weights,
            r_max: *edges.last().unwrap(),
            scheme: RadialScheme::GaussLegendreComposite,
            edges: edges.to_vec(),
            order,
            exact_degree: 2 * order - 1,
        })
    }

    /// Uniform 16-point panels of width close to `panel_width` on `(0, r_max]`,
    /// with `breakpoints` inserted as panel edges and the first panel graded
    /// geometrically toward the origin by `grading` halvings.
    pub fn graded(r_max: f64, panel_width: f64, breakpoints: &[f64], grading: usize) -> Result<Self> {
        if !(r_max > 0.0) || !(panel_width > 0.0) {
            return Err(LabError::InvalidGrid("r_max and panel width must be positive".into()));
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < r_max)
            .collect();
        cuts.push(r_max);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut edges = vec![0.0];
        let mut start = 0.0;
        for &end in &cuts {
            let count = ((end - start) / panel_width).ceil().max(1.0) as usize;
            for i in 1..=count {
                edges.push(start + (end - start) * i as f64 / count as f64);
            }
            start = end;
        }
        if grading > 0 {
            let first = edges[1];
            let mut inner: Vec<f64> = (1..=grading).rev().map(|g| first / 2f64.powi(g as i32)).collect();
            inner.insert(0, 0.0);
            edges.splice(0..1, inner);
        }
        Self::from_panels(&edges, PANEL_ORDER)
    }

    /// Uniform trapezoid nodes `r_i = i h`, `i = 1..=n`, `h = r_max / n`.
    /// The implicit node at the origin carries zero weight since reduced radial
    /// functions vanish there.
    pub fn uniform(n: usize, r_max: f64) -> Result<Self> {
        check_size(n, r_max)?;
        let h = r_max / n as f64;
        let nodes: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
        let mut weights = vec![h; n];
        weights[n - 1] = 0.5 * h;
        Ok(Self {
            nodes,
            weights,
            r_max,
            scheme: RadialScheme::UniformTrapezoid,
            edges: vec![0.0, r_max],
            order: 0,
            exact_degree: 1,
        })
    }

    /// Spacing of a uniform grid.
    pub fn uniform_step(&self) -> Option<f64> {
        match self.scheme {
            RadialScheme::UniformTrapezoid => Some(self.r_max / self.nodes.len() as f64),
            RadialScheme::GaussLegendreComposite => None,
        }
    }

    /// Matrix `C` with `sum_j C[i][j] f(r_j) = int_0^{r_i} f(r) dr`, exact for
    /// piecewise polynomials of degree `< order` on each panel.
    pub fn cumulative_matrix(&self) -> Result<Vec<Vec<f64>>> {
        if self.scheme != RadialScheme::GaussLegendreComposite {
            return Err(LabError::InvalidGrid(
                "indefinite integration needs a composite Gauss-Legendre grid".into(),
            ));
        }
        let p = self.order;
        let n = self.nodes.len();
        let (gx, gw) = gauss_legendre(p);
        let mut c = vec![vec![0.0; n]; n];
        for panel in 0..self.edges.len() - 1 {
            let a = self.edges[panel];
            let base = panel * p;
            let local = &self.nodes[base..base + p];
            let bary = barycentric_weights(local);
            for i in 0..p {
                let row = &mut c[base + i];
                row[..base].copy_from_slice(&self.weights[..base]);
                let b = local[i];
                let half = 0.5 * (b - a);
                let mid = 0.5 * (b + a);
                for (xq, wq) in gx.iter().zip(&gw) {
                    let t = mid + half * xq;
                    let basis = lagrange_basis(local, &bary, t);
                    for j in 0..p {
                        row[base + j] += half * wq * basis[j];
                    }
                }
            }
        }
        Ok(c)
    }
}

impl RadialGrid {
    /// Panel-local Lagrange interpolation weights at `r` for a composite
    /// Gauss-Legendre grid: `(first node index, weights)`.
    pub fn interpolation_weights(&self, r: f64) -> Result<(usize, Vec<f64>)> {
        if self.scheme != RadialScheme::GaussLegendreComposite {
            return Err(LabError::InvalidGrid("interpolation needs a composite Gauss-Legendre grid".into()));
        }
        if !(r >= 0.0 && r <= self.r_max) {
            return Err(LabError::OutOfRange(format!("r = {r} outside [0, {}]", self.r_max)));
        }
        let panel = self.edges[1..].iter().position(|&e| r <= e).unwrap_or(self.edges.len() - 2);
        let base = panel * self.order;
        let local = &self.nodes[base..base + self.order];
        let bary = barycentric_weights(local);
        Ok((base, lagrange_basis(local, &bary, r)))
    }
}

fn check_size(n: usize, r_max: f64) -> Result<()> {
    if n < 8 {
        return Err(LabError::InvalidGrid(format!("n = {n} < 8 nodes")));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(LabError::InvalidGrid(format!("r_max = {r_max} must be positive")));
    }
    Ok(())
}

/// Builds a radial grid with `n` nodes. Composite Gauss-Legendre needs `n` to be
/// a multiple of 16 (or `8 <= n < 16`, giving a single panel of order `n`).
pub fn make_radial_grid(n: usize, r_max: f64, scheme: RadialScheme) -> Result<RadialGrid> {
    check_size(n, r_max)?;
    match scheme {
        RadialScheme::UniformTrapezoid => RadialGrid::uniform(n, r_max),
        RadialScheme::GaussLegendreComposite => {
            if n < PANEL_ORDER {
                RadialGrid::from_panels(&[0.0, r_max], n)
            } else if n % PANEL_ORDER != 0 {
                Err(LabError::InvalidGrid(format!(
                    "n = {n} is not a multiple of the panel order {PANEL_ORDER}"
                )))
            } else {
                let panels = n / PANEL_ORDER;
                let edges: Vec<f64> = (0..=panels).map(|i| r_max * i as f64 / panels as f64).collect();
                RadialGrid::from_panels(&edges, PANEL_ORDER)
            }
        }
    }
}

/// Geometric energy grid `lambda_j = lambda_min * exp(j h)`, `j = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEnergyGrid {
    nodes: Vec<f64>,
    lambda_min: f64,
    lambda_max: f64,
    step: f64,
}

impl LogEnergyGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Constant logarithmic step `ln(lambda_{j+1} / lambda_j)`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// `ln(lambda_j)`.
    pub fn log_node(&self, j: usize) -> f64 {
        self.lambda_min.ln() + j as f64 * self.step
    }

    /// Measure factor `sqrt(h lambda_j)` mapping samples `f(lambda_j)` to
    /// coordinates whose Euclidean norm approximates `int |f|^2 d lambda`.
    pub fn density(&self, j: usize) -> f64 {
        (self.step * self.nodes[j]).sqrt()
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.nodes.len() == other.nodes.len()
            && (self.lambda_min - other.lambda_min).abs() <= 1e-14 * self.lambda_min
            && (self.step - other.step).abs() <= 1e-14 * self.step
    }
}

pub fn make_log_energy_grid(n: usize, lambda_min: f64, lambda_max: f64) -> Result<LogEnergyGrid> {
    if n < 64 || !n.is_power_of_two() {
        return Err(LabError::InvalidGrid(format!("N = {n} must be a power of two >= 64")));
    }
    if !(lambda_min > 0.0) || !(lambda_max > lambda_min) || !lambda_max.is_finite() {
        return Err(LabError::InvalidGrid(format!(
            "need 0 < lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
        )));
    }
    let step = (lambda_max / lambda_min).ln() / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|j| lambda_min * (j as f64 * step).exp()).collect();
    nodes[0] = lambda_min;
    nodes[n - 1] = lambda_max;
    Ok(LogEnergyGrid {
        nodes,
        lambda_min,
        lambda_max,
        step,
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            1.0 / x
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| x[j] - xk)
                .product::<f64>()
        })
        .collect()
}

fn lagrange_basis(x: &[f64], bary: &[f64], t: f64) -> Vec<f64> {
    if let Some(k) = x.iter().position(|&xk| xk == t) {
        let mut out = vec![0.0; x.len()];
        out[k] = 1.0;
        return out;
    }
    let terms: Vec<f64> = x.iter().zip(bary).map(|(&xk, &bk)| bk / (t - xk)).collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|v| v / denom).collect()
}
