//! Hard-sphere collision operators in the Hermite basis.
//!
//! All entries are weak forms
//! `<B(M e_i, M e_j)/M, e_k> = E[e_i(v) e_j(v*) R_k(v, v*)]` over
//! `v, v* ~ M`, with
//! `R_k = int_{S^2} |g.w| (e_k(v') - e_k(v)) dw`, `g = v - v*`.
//! In centre-of-mass variables `V = (v + v*)/2 ~ N(0, I/2)` and
//! `g ~ N(0, 2I)` the gain integral becomes
//! `(|g|/2) int_{S^2} e_k(V + |g| s / 2) ds` and the loss `2 pi |g| e_k(v)`,
//! so the integrand is `|g|` times a polynomial. Gauss–Hermite in `V`, a
//! Gauss rule for `r^3 exp(-r^2/4)` in `|g|` and polynomial-exact sphere
//! rules in the directions make every entry exact up to rounding.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::velocity::quadrature::{gauss_hermite, radial_hard_sphere, SphereRule};
use crate::velocity::HermiteBasis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionConfig {
    /// Rule for the post-collision direction; `None` picks the cheapest
    /// exact rule for the cutoff.
    pub sphere_rule: Option<SphereRule>,
    /// Multiplies the hard-sphere kernel.
    pub cross_section: f64,
    /// Multiplies every quadrature order; 1 is already exact.
    pub refine: usize,
    /// Re-assemble with a doubled sphere rule and compare.
    pub certify: bool,
    pub certify_tol: f64,
    /// Relative eigenvalue threshold for the numerical kernel.
    pub kernel_threshold: f64,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        Self {
            sphere_rule: None,
            cross_section: 1.0,
            refine: 1,
            certify: true,
            certify_tol: 1e-8,
            kernel_threshold: 1e-7,
        }
    }
}

impl CollisionConfig {
    pub fn resolved_sphere_rule(&self, degree_cutoff: usize) -> SphereRule {
        self.sphere_rule
            .unwrap_or_else(|| SphereRule::for_degree(degree_cutoff))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionOperators {
    pub degree_cutoff: usize,
    pub dim: usize,
    /// `bt[(k*dim + i)*dim + j] = <B(M e_i, M e_j)/M, e_k>`; present after
    /// [`assemble_q`].
    pub b_tensor: Option<Vec<f64>>,
    /// `q[(k*dim + i)*dim + j] = <Q(e_i, e_j), e_k>`, symmetric in `i, j`.
    pub q_tensor: Option<Vec<f64>>,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    /// Second-argument part of the two-argument form,
    /// `L1(f, g) = L2 f + L1_cross g`.
    pub l1_cross: DMatrix<f64>,
    pub nu_gram: DMatrix<f64>,
    pub sphere_rule: SphereRule,
    pub cross_section: f64,
    pub kernel_threshold: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Full,
    Linear,
}

struct Rules {
    v_nodes: Vec<([f64; 3], f64)>,
    radial: Vec<(f64, f64)>,
    directions: Vec<([f64; 3], f64)>,
    sphere: Vec<([f64; 3], f64)>,
}

impl Rules {
    fn new(k: usize, mode: Mode, sphere: SphereRule, refine: usize) -> Self {
        let poly_degree = match mode {
            Mode::Full => 3 * k,
            Mode::Linear => 2 * k,
        };
        let n = (poly_degree + 2) / 2 * refine.max(1);
        let gh = gauss_hermite(n);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v_nodes = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    v_nodes.push((
                        [gh.nodes[a] * s, gh.nodes[b] * s, gh.nodes[c] * s],
                        gh.weights[a] * gh.weights[b] * gh.weights[c],
                    ));
                }
            }
        }
        let rr = radial_hard_sphere(n);
        let radial = rr
            .nodes
            .iter()
            .copied()
            .zip(rr.weights.iter().copied())
            .collect();
        let dir_rule = SphereRule::product_for_degree(poly_degree * refine.max(1));
        Self {
            v_nodes,
            radial,
            directions: dir_rule.points(),
            sphere: sphere.points(),
        }
    }
}

/// Per-chunk partial sums.
enum Partial {
    Full(Vec<f64>),
    Linear(DMatrix<f64>, DMatrix<f64>),
}

fn assemble_chunk(
    basis: &HermiteBasis,
    rules: &Rules,
    v_chunk: &[([f64; 3], f64)],
    mode: Mode,
    scale: f64,
) -> Partial {
    let dim = basis.dim();
    let per_v = rules.radial.len() * rules.directions.len();
    let rows = per_v * v_chunk.len();
    let mut ev = DMatrix::<f64>::zeros(rows, dim);
    let mut es = DMatrix::<f64>::zeros(rows, dim);
    let mut gk = DMatrix::<f64>::zeros(rows, dim);
    let mut w = vec![0.0; rows];

    let mut buf = vec![0.0; dim];
    let mut gain = vec![0.0; dim];
    let mut p = 0;
    for &(vc, wv) in v_chunk {
        for &(r, wr) in &rules.radial {
            gain.iter_mut().for_each(|x| *x = 0.0);
            for &(s, ws) in &rules.sphere {
                let vp = [
                    vc[0] + 0.5 * r * s[0],
                    vc[1] + 0.5 * r * s[1],
                    vc[2] + 0.5 * r * s[2],
                ];
                basis.eval_into(&vp, &mut buf);
                for (g, b) in gain.iter_mut().zip(&buf) {
                    *g += 0.5 * ws * b;
                }
            }
            for &(d, wd) in &rules.directions {
                let half = [0.5 * r * d[0], 0.5 * r * d[1], 0.5 * r * d[2]];
                let v = [vc[0] + half[0], vc[1] + half[1], vc[2] + half[2]];
                let vs = [vc[0] - half[0], vc[1] - half[1], vc[2] - half[2]];
                basis.eval_into(&v, &mut buf);
                for a in 0..dim {
                    ev[(p, a)] = buf[a];
                    gk[(p, a)] = gain[a] - 2.0 * PI * buf[a];
                }
                basis.eval_into(&vs, &mut buf);
                for a in 0..dim {
                    es[(p, a)] = buf[a];
                }
                w[p] = scale * wv * wr * wd;
                p += 1;
            }
        }
    }

    match mode {
        Mode::Full => {
            let mut out = vec![0.0; dim * dim * dim];
            let mut tmp = DMatrix::<f64>::zeros(rows, dim);
            for k in 0..dim {
                for j in 0..dim {
                    for p in 0..rows {
                        tmp[(p, j)] = w[p] * gk[(p, k)] * es[(p, j)];
                    }
                }
                let block = ev.tr_mul(&tmp);
                for i in 0..dim {
                    for j in 0..dim {
                        out[(k * dim + i) * dim + j] = block[(i, j)];
                    }
                }
            }
            Partial::Full(out)
        }
        Mode::Linear => {
            for p in 0..rows {
                for a in 0..dim {
                    gk[(p, a)] *= w[p];
                }
            }
            Partial::Linear(gk.tr_mul(&ev) * -2.0, gk.tr_mul(&es) * -2.0)
        }
    }
}

const V_CHUNK: usize = 8;

fn assemble_raw(
    basis: &HermiteBasis,
    mode: Mode,
    sphere: SphereRule,
    cfg: &CollisionConfig,
) -> Result<Partial> {
    let k = basis.degree_cutoff;
    let needed = k;
    if sphere.exact_degree() < needed {
        return Err(Error::QuadratureTooSmall {
            order: sphere.exact_degree(),
            degree: needed,
            required: needed,
        });
    }
    if !(cfg.cross_section > 0.0) {
        return Err(Error::NonPositive {
            what: "cross section",
            value: cfg.cross_section,
        });
    }
    let rules = Rules::new(k, mode, sphere, cfg.refine);
    let scale = cfg.cross_section * (4.0 * PI).powf(-1.5);
    let partials: Vec<Partial> = rules
        .v_nodes
        .par_chunks(V_CHUNK)
        .map(|chunk| assemble_chunk(basis, &rules, chunk, mode, scale))
        .collect();

    // Ordered reduction keeps the result independent of the thread count.
    let mut iter = partials.into_iter();
    let first = iter.next().expect("at least one velocity node");
    Ok(iter.fold(first, |acc, part| match (acc, part) {
        (Partial::Full(mut a), Partial::Full(b)) => {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            Partial::Full(a)
        }
        (Partial::Linear(a1, a2), Partial::Linear(b1, b2)) => Partial::Linear(a1 + b1, a2 + b2),
        _ => unreachable!(),
    }))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> (usize, f64) {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (i, d)| if d > best.1 { (i, d) } else { best },
        )
}

fn certify(coarse: &[f64], fine: &[f64], tol: f64) -> Result<()> {
    let scale = coarse.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let (index, change) = max_abs_diff(coarse, fine);
    if change > tol * scale {
        return Err(Error::SphereRuleNotConverged {
            index,
            change,
            tolerance: tol * scale,
        });
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Assemble the full bilinear tensor and the linearized operators derived
/// from it.
pub fn assemble_q(basis: &HermiteBasis, cfg: &CollisionConfig) -> Result<CollisionOperators> {
    let dim = basis.dim();
    let sphere = cfg.resolved_sphere_rule(basis.degree_cutoff);
    let Partial::Full(bt) = assemble_raw(basis, Mode::Full, sphere, cfg)? else {
        unreachable!()
    };
    if cfg.certify {
        let Partial::Full(check) = assemble_raw(basis, Mode::Full, sphere.doubled(), cfg)? else {
            unreachable!()
        };
        certify(&bt, &check, cfg.certify_tol)?;
    }
    let mut q = vec![0.0; dim * dim * dim];
    let mut l2 = DMatrix::zeros(dim, dim);
    let mut l1_cross = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        for i in 0..dim {
            for j in 0..dim {
                q[(k * dim + i) * dim + j] =
                    bt[(k * dim + i) * dim + j] + bt[(k * dim + j) * dim + i];
            }
            l2[(k, i)] = -2.0 * bt[(k * dim + i) * dim];
            l1_cross[(k, i)] = -2.0 * bt[k * dim * dim + i];
        }
    }
    Ok(CollisionOperators {
        degree_cutoff: basis.degree_cutoff,
        dim,
        b_tensor: Some(bt),
        q_tensor: Some(q),
        l1: symmetrize(&(&l2 + &l1_cross)),
        l2: symmetrize(&l2),
        l1_cross,
        nu_gram: basis.nu_gram.clone(),
        sphere_rule: sphere,
        cross_section: cfg.cross_section,
        kernel_threshold: cfg.kernel_threshold,
    })
}

/// Assemble only the linearized operators; much cheaper than
/// [`assemble_q`] at large cutoffs.
pub fn assemble_l(basis: &HermiteBasis, cfg: &CollisionConfig) -> Result<CollisionOperators> {
    let dim = basis.dim();
    let sphere = cfg.resolved_sphere_rule(basis.degree_cutoff);
    let Partial::Linear(l2, l1_cross) = assemble_raw(basis, Mode::Linear, sphere, cfg)? else {
        unreachable!()
    };
    if cfg.certify {
        let Partial::Linear(c2, cc) = assemble_raw(basis, Mode::Linear, sphere.doubled(), cfg)?
        else {
            unreachable!()
        };
        certify(l2.as_slice(), c2.as_slice(), cfg.certify_tol)?;
        certify(l1_cross.as_slice(), cc.as_slice(), cfg.certify_tol)?;
    }
    Ok(CollisionOperators {
        degree_cutoff: basis.degree_cutoff,
        dim,
        b_tensor: None,
        q_tensor: None,
        l1: symmetrize(&(&l2 + &l1_cross)),
        l2: symmetrize(&l2),
        l1_cross,
        nu_gram: basis.nu_gram.clone(),
        sphere_rule: sphere,
        cross_section: cfg.cross_section,
        kernel_threshold: cfg.kernel_threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    L1,
    L2,
}

impl CollisionOperators {
    pub fn has_tensor(&self) -> bool {
        self.b_tensor.is_some()
    }

    pub fn operator(&self, which: Which) -> &DMatrix<f64> {
        match which {
            Which::L1 => &self.l1,
            Which::L2 => &self.l2,
        }
    }

    /// Coefficients of `Q(f, g)`.
    pub fn apply_q(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let q = self
            .q_tensor
            .as_ref()
            .expect("bilinear tensor not assembled");
        contract(q, self.dim, f, g)
    }

    /// Coefficients of `B(M f, M g) / M`.
    pub fn apply_b(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let b = self
            .b_tensor
            .as_ref()
            .expect("bilinear tensor not assembled");
        contract(b, self.dim, f, g)
    }

    /// Two-argument linearized form `L1(f, g) = -(2/M)[B(Mf, M) + B(M, Mg)]`.
    pub fn l1_two_arg(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let a = &self.l2 * DVector::from_column_slice(f);
        let b = &self.l1_cross * DVector::from_column_slice(g);
        (a + b).as_slice().to_vec()
    }

    /// Ascending eigenvalues of the symmetric operator.
    pub fn spectrum(&self, which: Which) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.operator(which).clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Number of eigenvalues below the relative kernel threshold.
    pub fn kernel_dim(&self, which: Which) -> usize {
        let ev = self.spectrum(which);
        let top = ev.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        ev.iter()
            .filter(|x| x.abs() <= self.kernel_threshold * top)
            .count()
    }
}

fn contract(t: &[f64], dim: usize, f: &[f64], g: &[f64]) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            let block = &t[k * dim * dim..(k + 1) * dim * dim];
            let mut s = 0.0;
            for i in 0..dim {
                if f[i] == 0.0 {
                    continue;
                }
                let row = &block[i * dim..(i + 1) * dim];
                s += f[i] * row.iter().zip(g).map(|(x, y)| x * y).sum::<f64>();
            }
            s
        })
        .collect()
}

/// Orthogonal projections onto the collision kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    /// Rows extracting `a = <f, 5/2 - |v|^2/2>`.
    pub a_row: Vec<f64>,
    /// Rows extracting `b_i = <f, v_i>`.
    pub b_rows: [Vec<f64>; 3],
    /// Rows extracting `c = <f, |v|^2/6 - 1/2>`.
    pub c_row: Vec<f64>,
    /// Row extracting `d = <f, 1>`.
    pub d_row: Vec<f64>,
    /// Orthonormal basis of the `L1` kernel.
    pub kernel1: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct P1Decomposition {
    pub a: f64,
    pub b: [f64; 3],
    pub c: f64,
    pub fluid: Vec<f64>,
    pub kinetic: Vec<f64>,
}

impl Projections {
    pub fn new(basis: &HermiteBasis) -> Self {
        let dim = basis.dim();
        let unit = |a: usize| {
            let mut e = vec![0.0; dim];
            e[a] = 1.0;
            e
        };
        let second: Vec<usize> = (0..3)
            .map(|i| {
                let mut m = [0; 3];
                m[i] = 2;
                basis.index_of(m).expect("cutoff at least 2")
            })
            .collect();
        // |v|^2 - 3 = sqrt(2) (e_200 + e_020 + e_002), unit vector scaled by 1/sqrt(3).
        let mut energy = vec![0.0; dim];
        for &s in &second {
            energy[s] = 1.0 / 3f64.sqrt();
        }
        let kernel1 = vec![unit(0), unit(1), unit(2), unit(3), energy.clone()];
        let mut p1 = DMatrix::zeros(dim, dim);
        for q in &kernel1 {
            let q = DVector::from_column_slice(q);
            p1 += &q * q.transpose();
        }
        let mut p2 = DMatrix::zeros(dim, dim);
        p2[(0, 0)] = 1.0;

        // <f, |v|^2> = 3 f_0 + sqrt(2) sum f_ii.
        let r2 = 2f64.sqrt();
        let mut a_row = vec![0.0; dim];
        let mut c_row = vec![0.0; dim];
        a_row[0] = 1.0;
        for &s in &second {
            a_row[s] = -r2 / 2.0;
            c_row[s] = r2 / 6.0;
        }
        Self {
            p1,
            p2,
            a_row,
            b_rows: [unit(1), unit(2), unit(3)],
            c_row,
            d_row: unit(0),
            kernel1,
        }
    }

    pub fn project_p1(&self, coeffs: &[f64]) -> P1Decomposition {
        let dot = |r: &[f64]| r.iter().zip(coeffs).map(|(x, y)| x * y).sum::<f64>();
        let fluid = (&self.p1 * DVector::from_column_slice(coeffs))
            .as_slice()
            .to_vec();
        let kinetic = coeffs.iter().zip(&fluid).map(|(f, p)| f - p).collect();
        P1Decomposition {
            a: dot(&self.a_row),
            b: [
                dot(&self.b_rows[0]),
                dot(&self.b_rows[1]),
                dot(&self.b_rows[2]),
            ],
            c: dot(&self.c_row),
            fluid,
            kinetic,
        }
    }

    pub fn project_p2(&self, coeffs: &[f64]) -> (f64, Vec<f64>) {
        let d = coeffs[0];
        let mut kinetic = coeffs.to_vec();
        kinetic[0] = 0.0;
        (d, kinetic)
    }

    pub fn projector(&self, which: Which) -> &DMatrix<f64> {
        match which {
            Which::L1 => &self.p1,
            Which::L2 => &self.p2,
        }
    }
}

/// Half the smallest generalized eigenvalue of `L_i` against the
/// `nu`-weighted Gram on the orthogonal complement of the kernel.
pub fn coercivity_constant(
    ops: &CollisionOperators,
    proj: &Projections,
    which: Which,
) -> Result<f64> {
    let complement = complement_basis(proj.projector(which));
    let l = complement.transpose() * ops.operator(which) * &complement;
    let g = complement.transpose() * &ops.nu_gram * &complement;
    let chol = nalgebra::Cholesky::new(g).ok_or(Error::NonPositive {
        what: "nu-weighted Gram",
        value: 0.0,
    })?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or(Error::FactorizationFailed { mode: 0 })?;
    let reduced = &linv * l * linv.transpose();
    let eig = SymmetricEigen::new(symmetrize(&reduced));
    let delta = 0.5 * eig.eigenvalues.min();
    if !(delta > 0.0) {
        return Err(Error::NonPositive {
            what: "coercivity constant",
            value: delta,
        });
    }
    Ok(delta)
}

/// Orthonormal columns spanning the range of `I - P`.
pub fn complement_basis(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let eig = SymmetricEigen::new(DMatrix::identity(n, n) - p);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&c| eig.eigenvalues[c] > 0.5)
        .map(|c| eig.eigenvectors.column(c).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}
