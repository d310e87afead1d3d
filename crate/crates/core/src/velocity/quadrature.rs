//! Gauss rules used for velocity-space integration.
//!
//! All one-dimensional rules are produced by the Golub–Welsch eigenvalue
//! method from their three-term recurrences. The Maxwellian rule is the
//! probabilists' Gauss–Hermite rule, so its weights sum to one and it
//! integrates against `M(v) dv` directly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Golub–Welsch: nodes are eigenvalues of the Jacobi matrix, weights are
/// `mu0` times the squared first eigenvector components.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> Rule1d {
    let n = diag.len();
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = diag[i];
        if i + 1 < n {
            jacobi[(i, i + 1)] = offdiag[i];
            jacobi[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule1d {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Probabilists' Gauss–Hermite rule for the standard normal density.
///
/// Exact for polynomials of degree `2n - 1`; the weights sum to one.
pub fn gauss_hermite(n: usize) -> Rule1d {
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let mut rule = golub_welsch(&diag, &offdiag, 1.0);
    symmetrize(&mut rule);
    rule
}

/// Gauss–Legendre rule on `[-1, 1]`; weights sum to two.
pub fn gauss_legendre(n: usize) -> Rule1d {
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let mut rule = golub_welsch(&diag, &offdiag, 2.0);
    symmetrize(&mut rule);
    rule
}

/// Enforce exact mirror symmetry of a rule for an even weight.
fn symmetrize(rule: &mut Rule1d) {
    let n = rule.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        let w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.0;
    }
}

/// Gauss rule on `(0, inf)` for the weight `r^3 exp(-r^2 / 4)`.
///
/// This is the radial part of the relative-velocity integral
/// `|g| N(0, 2I)` in spherical coordinates. Recurrence coefficients come
/// from the Stieltjes procedure on a fine Gauss–Legendre discretization of
/// the weight, which is exact to rounding for the degrees used here.
pub fn radial_hard_sphere(n: usize) -> Rule1d {
    let r_max = 24.0;
    let fine = gauss_legendre(800);
    let xs: Vec<f64> = fine
        .nodes
        .iter()
        .map(|&t| 0.5 * r_max * (t + 1.0))
        .collect();
    let ws: Vec<f64> = fine
        .nodes
        .iter()
        .zip(&fine.weights)
        .map(|(&t, &w)| {
            let r = 0.5 * r_max * (t + 1.0);
            0.5 * r_max * w * r.powi(3) * (-0.25 * r * r).exp()
        })
        .collect();
    let mu0: f64 = ws.iter().sum();

    // Orthonormal Stieltjes (Lanczos on the discrete measure).
    let m = xs.len();
    let mut p_prev = vec![0.0; m];
    let mut p = vec![1.0 / mu0.sqrt(); m];
    let mut diag = Vec::with_capacity(n);
    let mut offdiag = Vec::with_capacity(n);
    let mut b_prev = 0.0;
    for k in 0..n {
        let a: f64 = (0..m).map(|i| ws[i] * xs[i] * p[i] * p[i]).sum();
        diag.push(a);
        if k + 1 == n {
            break;
        }
        let mut q: Vec<f64> = (0..m)
            .map(|i| (xs[i] - a) * p[i] - b_prev * p_prev[i])
            .collect();
        let b = (0..m).map(|i| ws[i] * q[i] * q[i]).sum::<f64>().sqrt();
        for qi in q.iter_mut() {
            *qi /= b;
        }
        offdiag.push(b);
        p_prev = std::mem::replace(&mut p, q);
        b_prev = b;
    }
    golub_welsch(&diag, &offdiag, mu0)
}

/// Tensor-product Gauss–Hermite grid integrating against `M(v) dv` in 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub order_per_axis: usize,
}

impl QuadratureGrid {
    pub fn new(order_per_axis: usize) -> Result<Self> {
        if order_per_axis < 4 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order per axis must be at least 4, got {order_per_axis}"
            )));
        }
        let rule = gauss_hermite(order_per_axis);
        let n = rule.len();
        let mut nodes = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    nodes.push([rule.nodes[i], rule.nodes[j], rule.nodes[k]]);
                    weights.push(rule.weights[i] * rule.weights[j] * rule.weights[k]);
                }
            }
        }
        Ok(Self {
            nodes,
            weights,
            order_per_axis,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest total polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.order_per_axis - 1
    }

    pub fn integrate(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| w * f(v))
            .sum()
    }
}

/// Quadrature on the unit sphere with weights summing to `4 pi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum SphereRule {
    /// 26-point Lebedev rule, exact through degree 7.
    #[default]
    Lebedev26,
    /// Gauss–Legendre in `cos(theta)` times the trapezoid rule in `phi`.
    Product { n_polar: usize, n_azimuth: usize },
}

impl SphereRule {
    /// Smallest antipodally symmetric product rule exact through `degree`.
    pub fn product_for_degree(degree: usize) -> Self {
        SphereRule::Product {
            n_polar: degree / 2 + 1,
            n_azimuth: (degree + 2) & !1,
        }
    }

    /// Lebedev while it is exact through `degree`, a product rule above.
    pub fn for_degree(degree: usize) -> Self {
        if degree <= 7 {
            SphereRule::Lebedev26
        } else {
            SphereRule::product_for_degree(degree)
        }
    }

    /// Highest spherical-harmonic degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        match *self {
            SphereRule::Lebedev26 => 7,
            SphereRule::Product { n_polar, n_azimuth } => (2 * n_polar)
                .saturating_sub(1)
                .min(n_azimuth.saturating_sub(1)),
        }
    }

    /// A rule with roughly twice the points, used to certify convergence.
    pub fn doubled(&self) -> Self {
        match *self {
            SphereRule::Lebedev26 => SphereRule::Product {
                n_polar: 5,
                n_azimuth: 10,
            },
            SphereRule::Product { n_polar, n_azimuth } => SphereRule::Product {
                n_polar: 2 * n_polar,
                n_azimuth: 2 * n_azimuth,
            },
        }
    }

    pub fn label(&self) -> String {
        match *self {
            SphereRule::Lebedev26 => "lebedev26".to_string(),
            SphereRule::Product { n_polar, n_azimuth } => format!("product{n_polar}x{n_azimuth}"),
        }
    }

    pub fn points(&self) -> Vec<([f64; 3], f64)> {
        match *self {
            SphereRule::Lebedev26 => lebedev26(),
            SphereRule::Product { n_polar, n_azimuth } => {
                let gl = gauss_legendre(n_polar);
                let mut pts = Vec::with_capacity(n_polar * n_azimuth);
                let dphi = 2.0 * PI / n_azimuth as f64;
                for (&c, &w) in gl.nodes.iter().zip(&gl.weights) {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    for j in 0..n_azimuth {
                        let phi = (j as f64 + 0.5) * dphi;
                        pts.push(([s * phi.cos(), s * phi.sin(), c], w * dphi));
                    }
                }
                pts
            }
        }
    }
}

fn lebedev26() -> Vec<([f64; 3], f64)> {
    let four_pi = 4.0 * PI;
    let mut pts = Vec::with_capacity(26);
    let w1 = four_pi / 21.0;
    let w2 = four_pi * 4.0 / 105.0;
    let w3 = four_pi * 9.0 / 280.0;
    for axis in 0..3 {
        for s in [1.0, -1.0] {
            let mut p = [0.0; 3];
            p[axis] = s;
            pts.push((p, w1));
        }
    }
    let a = std::f64::consts::FRAC_1_SQRT_2;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for si in [a, -a] {
            for sj in [a, -a] {
                let mut p = [0.0; 3];
                p[i] = si;
                p[j] = sj;
                pts.push((p, w2));
            }
        }
    }
    let b = 1.0 / 3f64.sqrt();
    for sx in [b, -b] {
        for sy in [b, -b] {
            for sz in [b, -b] {
                pts.push(([sx, sy, sz], w3));
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn double_factorial_odd(m: u32) -> f64 {
        // (m-1)!! for even m: E[Z^m]
        (1..m).step_by(2).map(|k| k as f64).product()
    }

    #[test]
    fn hermite_moments_are_gaussian() {
        let rule = gauss_hermite(10);
        for m in 0..=19u32 {
            let q = rule.integrate(|x| x.powi(m as i32));
            let exact = if m % 2 == 1 {
                0.0
            } else {
                double_factorial_odd(m)
            };
            let scale = double_factorial_odd(m + (m % 2));
            assert!((q - exact).abs() <= 1e-10 * scale, "m={m} q={q}");
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre(7);
        for m in 0..=13 {
            let q = rule.integrate(|x| x.powi(m));
            let exact = if m % 2 == 1 {
                0.0
            } else {
                2.0 / (m as f64 + 1.0)
            };
            assert_relative_eq!(q, exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn radial_rule_moments() {
        // int_0^inf r^(3+m) e^{-r^2/4} dr = 2^(3+m) Gamma((4+m)/2)
        let rule = radial_hard_sphere(8);
        for m in 0..=15 {
            let q = rule.integrate(|r| r.powi(m));
            let exact = 2f64.powi(3 + m) * statrs::function::gamma::gamma((4.0 + m as f64) / 2.0);
            assert_relative_eq!(q, exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn sphere_rules_integrate_monomials() {
        // int_{S^2} x^2 y^2 = 4 pi / 15 ; int x^4 = 4 pi / 5 ; int x^6 = 4 pi / 7
        for rule in [SphereRule::Lebedev26, SphereRule::product_for_degree(7)] {
            let pts = rule.points();
            let total: f64 = pts.iter().map(|p| p.1).sum();
            assert_relative_eq!(total, 4.0 * PI, epsilon = 1e-13);
            let x2y2: f64 = pts.iter().map(|(p, w)| w * p[0] * p[0] * p[1] * p[1]).sum();
            assert_relative_eq!(x2y2, 4.0 * PI / 15.0, epsilon = 1e-13);
            let x6: f64 = pts.iter().map(|(p, w)| w * p[0].powi(6)).sum();
            assert_relative_eq!(x6, 4.0 * PI / 7.0, epsilon = 1e-13);
            let odd: f64 = pts
                .iter()
                .map(|(p, w)| w * p[0] * p[1].powi(2) * p[2].powi(4))
                .sum();
            assert!(odd.abs() < 1e-14);
        }
    }

    #[test]
    fn grid_weights_reproduce_maxwellian_moments() {
        let grid = QuadratureGrid::new(16).unwrap();
        let total: f64 = grid.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for axis in 0..3 {
            let m1 = grid.integrate(|v| v[axis]);
            let m2 = grid.integrate(|v| v[axis] * v[axis]);
            assert!(m1.abs() < 1e-12);
            assert!((m2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_rejects_low_order() {
        assert!(QuadratureGrid::new(3).is_err());
    }

    #[test]
    fn grid_exactness_degree() {
        let grid = QuadratureGrid::new(6);
        let grid = grid.unwrap();
        // v1^4 v2^4 v3^2 has degree 10 <= 11
        let q = grid.integrate(|v| v[0].powi(4) * v[1].powi(4) * v[2].powi(2));
        assert_relative_eq!(q, 9.0, epsilon = 1e-10);
    }
}
