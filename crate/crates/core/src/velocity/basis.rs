//! Total-degree Hermite basis orthonormal in `L^2(M dv)`.
//!
//! Basis functions are products `h_{k1}(v1) h_{k2}(v2) h_{k3}(v3)` of
//! normalized probabilists' Hermite polynomials with `k1 + k2 + k3 <= K`.
//! Index 0 is the constant, indices 1..=3 are `v1, v2, v3`; higher degrees
//! follow in blocks of increasing total degree.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::quadrature::QuadratureGrid;
use crate::error::{Error, Result};

/// Global normalized Maxwellian `(2 pi)^{-3/2} exp(-|v|^2 / 2)`.
pub fn maxwellian(v: &[f64; 3]) -> f64 {
    let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    (2.0 * PI).powf(-1.5) * (-0.5 * r2).exp()
}

/// Hard-sphere collision frequency `nu(v) = int |v - w| M(w) dw`.
///
/// Closed form of the mean of a noncentral chi distribution with three
/// degrees of freedom.
pub fn collision_frequency(v: &[f64; 3]) -> f64 {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    collision_frequency_radial(r)
}

pub fn collision_frequency_radial(r: f64) -> f64 {
    let c = (2.0 / PI).sqrt();
    if r < 1e-4 {
        // Taylor expansion around the origin, the closed form cancels there.
        return 2.0 * c * (1.0 + r * r / 6.0);
    }
    let erf = statrs::function::erf::erf(r / 2f64.sqrt());
    c * (-0.5 * r * r).exp() + (r + 1.0 / r) * erf
}

/// The same integral evaluated on a tensor Gauss–Hermite grid.
///
/// Converges slowly because `|v - w|` is not smooth at `w = v`; used as an
/// independent check of [`collision_frequency`].
pub fn collision_frequency_quadrature(v: &[f64; 3], grid: &QuadratureGrid) -> f64 {
    grid.integrate(|w| {
        let d = [v[0] - w[0], v[1] - w[1], v[2] - w[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    })
}

/// Tightest constants with `c1 (1 + |v|) <= nu(v) <= c2 (1 + |v|)` over the
/// nodes of `grid` and the origin, where the upper ratio peaks.
pub fn fit_frequency_bounds(grid: &QuadratureGrid) -> (f64, f64) {
    let origin = [0.0; 3];
    grid.nodes.iter().chain(std::iter::once(&origin)).fold(
        (f64::INFINITY, 0.0f64),
        |(lo, hi), v| {
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let ratio = collision_frequency(v) / (1.0 + r);
            (lo.min(ratio), hi.max(ratio))
        },
    )
}

/// Normalized Hermite values `h_0(x) ..= h_k(x)`.
pub fn hermite_values(x: f64, k: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if k == 0 {
        return;
    }
    out[1] = x;
    for n in 1..k {
        let nf = n as f64;
        out[n + 1] = (x * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
    }
}

/// Enumerate multi-degrees with total degree `<= k`, grouped by degree.
pub fn multi_indices(k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for d in 0..=k {
        for k1 in (0..=d).rev() {
            for k2 in (0..=d - k1).rev() {
                out.push([k1, k2, d - k1 - k2]);
            }
        }
    }
    out
}

pub fn basis_dim(k: usize) -> usize {
    (k + 1) * (k + 2) * (k + 3) / 6
}

#[derive(Debug, Clone)]
pub struct HermiteBasis {
    pub degree_cutoff: usize,
    pub quad_order: usize,
    pub index_map: Vec<[usize; 3]>,
    lookup: Vec<Option<usize>>,
    /// Multiplication by `v_i`, rows are output coefficients.
    pub mult: [DMatrix<f64>; 3],
    /// Differentiation `d/dv_i`, rows are output coefficients.
    pub deriv: [DMatrix<f64>; 3],
    /// `<nu e_a, e_b>` in `L^2(M dv)`.
    pub nu_gram: DMatrix<f64>,
    pub grid: QuadratureGrid,
    /// Basis values at the grid nodes, `node * dim + a`.
    node_values: Vec<f64>,
}

impl HermiteBasis {
    pub fn new(degree_cutoff: usize, quad_order: usize) -> Result<Self> {
        if degree_cutoff < 2 {
            return Err(Error::InvalidParameter(format!(
                "degree cutoff must be at least 2, got {degree_cutoff}"
            )));
        }
        if quad_order < degree_cutoff + 2 {
            return Err(Error::QuadratureTooSmall {
                order: quad_order,
                degree: 2 * degree_cutoff,
                required: degree_cutoff + 2,
            });
        }
        let grid = QuadratureGrid::new(quad_order)?;
        let index_map = multi_indices(degree_cutoff);
        let dim = index_map.len();
        let side = degree_cutoff + 1;
        let mut lookup = vec![None; side * side * side];
        for (i, m) in index_map.iter().enumerate() {
            lookup[(m[0] * side + m[1]) * side + m[2]] = Some(i);
        }

        let mut basis = Self {
            degree_cutoff,
            quad_order,
            index_map,
            lookup,
            mult: std::array::from_fn(|_| DMatrix::zeros(dim, dim)),
            deriv: std::array::from_fn(|_| DMatrix::zeros(dim, dim)),
            nu_gram: DMatrix::zeros(dim, dim),
            grid,
            node_values: Vec::new(),
        };
        basis.build_ladders();
        basis.tabulate_nodes();
        basis.build_nu_gram();
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.index_map.len()
    }

    pub fn index_of(&self, m: [usize; 3]) -> Option<usize> {
        let k = self.degree_cutoff;
        if m[0] + m[1] + m[2] > k {
            return None;
        }
        let side = k + 1;
        self.lookup[(m[0] * side + m[1]) * side + m[2]]
    }

    fn build_ladders(&mut self) {
        for axis in 0..3 {
            for (a, m) in self.index_map.clone().iter().enumerate() {
                let ka = m[axis] as f64;
                let mut up = *m;
                up[axis] += 1;
                if let Some(b) = self.index_of(up) {
                    self.mult[axis][(b, a)] = (ka + 1.0).sqrt();
                }
                if m[axis] > 0 {
                    let mut down = *m;
                    down[axis] -= 1;
                    let b = self.index_of(down).expect("lower degree is always present");
                    self.mult[axis][(b, a)] = ka.sqrt();
                    self.deriv[axis][(b, a)] = ka.sqrt();
                }
            }
        }
    }

    fn tabulate_nodes(&mut self) {
        let dim = self.dim();
        let mut values = vec![0.0; self.grid.len() * dim];
        for (n, v) in self.grid.nodes.iter().enumerate() {
            self.eval_into(v, &mut values[n * dim..(n + 1) * dim]);
        }
        self.node_values = values;
    }

    fn build_nu_gram(&mut self) {
        let dim = self.dim();
        let mut gram = DMatrix::zeros(dim, dim);
        for (n, v) in self.grid.nodes.iter().enumerate() {
            let wn = self.grid.weights[n] * collision_frequency(v);
            let e = &self.node_values[n * dim..(n + 1) * dim];
            for a in 0..dim {
                let wa = wn * e[a];
                for b in a..dim {
                    gram[(a, b)] += wa * e[b];
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                gram[(a, b)] = gram[(b, a)];
            }
        }
        self.nu_gram = gram;
    }

    /// Basis values at a velocity.
    pub fn eval(&self, v: &[f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(v, &mut out);
        out
    }

    pub fn eval_into(&self, v: &[f64; 3], out: &mut [f64]) {
        let k = self.degree_cutoff;
        let mut h = [[0.0; 16]; 3];
        assert!(k < 16, "degree cutoff above 15 is not supported");
        for axis in 0..3 {
            hermite_values(v[axis], k, &mut h[axis]);
        }
        for (o, m) in out.iter_mut().zip(&self.index_map) {
            *o = h[0][m[0]] * h[1][m[1]] * h[2][m[2]];
        }
    }

    /// Evaluate the function with coefficients `coeffs` at `v`.
    pub fn evaluate(&self, coeffs: &[f64], v: &[f64; 3]) -> f64 {
        self.eval(v).iter().zip(coeffs).map(|(e, c)| e * c).sum()
    }

    /// Basis values at grid node `n`.
    pub fn node_values(&self, n: usize) -> &[f64] {
        let dim = self.dim();
        &self.node_values[n * dim..(n + 1) * dim]
    }

    /// `L^2(M dv)` projection of `f` onto the basis by grid quadrature.
    ///
    /// Exact when `f` is a polynomial of degree at most
    /// `2 * quad_order - 1 - K`.
    pub fn project(&self, f: impl Fn(&[f64; 3]) -> f64) -> Vec<f64> {
        let dim = self.dim();
        let mut c = vec![0.0; dim];
        for (n, v) in self.grid.nodes.iter().enumerate() {
            let wf = self.grid.weights[n] * f(v);
            for (ca, ea) in c.iter_mut().zip(self.node_values(n)) {
                *ca += wf * ea;
            }
        }
        c
    }

    /// Gram matrix of the basis computed by grid quadrature.
    pub fn quadrature_gram(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut gram = DMatrix::zeros(dim, dim);
        for n in 0..self.grid.len() {
            let w = self.grid.weights[n];
            let e = self.node_values(n);
            for a in 0..dim {
                for b in 0..dim {
                    gram[(a, b)] += w * e[a] * e[b];
                }
            }
        }
        gram
    }

    /// `||c||^2` in `L^2(nu M dv)`.
    pub fn nu_norm_sq(&self, c: &[f64]) -> f64 {
        let dim = self.dim();
        let mut s = 0.0;
        for a in 0..dim {
            let mut row = 0.0;
            for b in 0..dim {
                row += self.nu_gram[(a, b)] * c[b];
            }
            s += c[a] * row;
        }
        s
    }

    pub fn degree(&self, a: usize) -> usize {
        let m = self.index_map[a];
        m[0] + m[1] + m[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn maxwellian_at_origin_and_symmetry() {
        assert_relative_eq!(
            maxwellian(&[0.0; 3]),
            0.063_493_635_934_240_97,
            epsilon = 1e-15
        );
        let v = [0.3, -1.2, 2.0];
        assert_eq!(maxwellian(&v), maxwellian(&[-0.3, 1.2, -2.0]));
    }

    #[test]
    fn maxwellian_quadrature_normalization() {
        // Weights already contain M; integrating M/M-weighted 1 is the weight sum.
        let grid = QuadratureGrid::new(16).unwrap();
        let total: f64 = grid.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frequency_at_origin() {
        let exact = 2.0 * (2.0 / PI).sqrt();
        assert_relative_eq!(collision_frequency(&[0.0; 3]), exact, epsilon = 1e-12);
        assert_relative_eq!(exact, 1.595_769, epsilon = 1e-6);
        // Continuity across the Taylor branch.
        let a = collision_frequency_radial(0.99e-4);
        let b = collision_frequency_radial(1.01e-4);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn frequency_large_speed_asymptote() {
        let nu = collision_frequency(&[10.0, 0.0, 0.0]);
        assert!((nu - 10.1).abs() / 10.1 < 0.01);
    }

    #[test]
    fn frequency_quadrature_agrees_with_closed_form() {
        let grid = QuadratureGrid::new(40).unwrap();
        for v in [[0.0, 0.0, 0.0], [0.5, -0.2, 1.0], [2.0, 1.0, 0.0]] {
            let q = collision_frequency_quadrature(&v, &grid);
            let c = collision_frequency(&v);
            assert!((q - c).abs() < 2e-3 * c, "v={v:?} q={q} c={c}");
        }
    }

    #[test]
    fn frequency_bounds_are_linear() {
        let grid = QuadratureGrid::new(16).unwrap();
        let (c1, c2) = fit_frequency_bounds(&grid);
        assert!(c1 > 0.0 && c1 <= c2);
        assert_relative_eq!(c2, 2.0 * (2.0 / PI).sqrt(), max_relative = 1e-12);
        assert!(c1 > 0.8 && c1 < 0.9, "c1 = {c1}");
        for v in &grid.nodes {
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let nu = collision_frequency(v);
            assert!(nu > 0.0);
            assert!(c1 * (1.0 + r) <= nu * (1.0 + 1e-14));
            assert!(nu <= c2 * (1.0 + r) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn dimensions() {
        assert_eq!(HermiteBasis::new(2, 4).unwrap().dim(), 10);
        assert_eq!(HermiteBasis::new(4, 6).unwrap().dim(), 35);
        assert_eq!(basis_dim(6), 84);
    }

    #[test]
    fn rejects_small_quadrature() {
        assert!(matches!(
            HermiteBasis::new(4, 5),
            Err(Error::QuadratureTooSmall { .. })
        ));
        assert!(HermiteBasis::new(1, 8).is_err());
    }

    #[test]
    fn orthonormal_under_maxwellian() {
        let basis = HermiteBasis::new(4, 16).unwrap();
        let gram = basis.quadrature_gram();
        let dim = basis.dim();
        let err = (gram - DMatrix::<f64>::identity(dim, dim)).abs().max();
        assert!(err < 1e-10, "gram error {err}");
    }

    #[test]
    fn multiplication_maps_one_to_v1() {
        let basis = HermiteBasis::new(4, 16).unwrap();
        let mut one = vec![0.0; basis.dim()];
        one[0] = 1.0;
        let v1 = &basis.mult[0] * nalgebra::DVector::from_vec(one);
        let expect = basis.project(|v| v[0]);
        for a in 0..basis.dim() {
            assert!((v1[a] - expect[a]).abs() < 1e-12);
        }
        assert_eq!(basis.index_of([1, 0, 0]), Some(1));
    }

    #[test]
    fn mult_symmetric() {
        let basis = HermiteBasis::new(5, 16).unwrap();
        for m in &basis.mult {
            assert_eq!(m, &m.transpose());
        }
    }

    #[test]
    fn ladder_matches_quadrature() {
        // <d/dv_i e_a, e_b> = <e_a, (v_i - d/dv_i) e_b> by integration by parts
        // against M; check the derivative matrix against finite differences
        // evaluated on the quadrature grid.
        let basis = HermiteBasis::new(4, 16).unwrap();
        let dim = basis.dim();
        let h = 1e-5;
        for axis in 0..3 {
            let mut q = DMatrix::<f64>::zeros(dim, dim);
            for (n, v) in basis.grid.nodes.iter().enumerate() {
                let mut vp = *v;
                let mut vm = *v;
                vp[axis] += h;
                vm[axis] -= h;
                let ep = basis.eval(&vp);
                let em = basis.eval(&vm);
                let e = basis.node_values(n);
                let w = basis.grid.weights[n];
                for a in 0..dim {
                    let da = (ep[a] - em[a]) / (2.0 * h);
                    for b in 0..dim {
                        q[(b, a)] += w * da * e[b];
                    }
                }
            }
            let err = (q - &basis.deriv[axis]).abs().max();
            assert!(err < 1e-9, "axis {axis} err {err}");
        }
    }

    #[test]
    fn nu_gram_positive_definite() {
        let basis = HermiteBasis::new(4, 16).unwrap();
        let eig = nalgebra::SymmetricEigen::new(basis.nu_gram.clone());
        assert!(eig.eigenvalues.min() > 0.0);
        assert!(
            (basis.nu_gram.clone() - basis.nu_gram.transpose())
                .abs()
                .max()
                < 1e-15
        );
    }
}
