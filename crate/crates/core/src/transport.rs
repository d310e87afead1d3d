//! Transport coefficients of the limit system from kernel-deflated solves
//! against the linearized collision operators.

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::collision::{coercivity_constant, CollisionOperators, Projections, Which};
use crate::error::{Error, Result};
use crate::velocity::quadrature::SphereRule;
use crate::velocity::{HermiteBasis, MomentVectors};

/// Relative tolerance on the kernel component of a right-hand side.
pub const RANGE_TOL: f64 = 1e-8;
/// Relative residual accepted from a solve.
pub const SOLVE_TOL: f64 = 1e-9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Direct solver for `L x = t` with `x` orthogonal to the kernel of `L`.
///
/// Factorizes `L + P`, which is invertible and preserves both the kernel and
/// its complement, so the solution of the deflated system is the
/// kernel-orthogonal preimage whenever `t` lies in the range.
#[derive(Debug, Clone)]
pub struct KernelSolver {
    op: DMatrix<f64>,
    projector: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl KernelSolver {
    pub fn new(ops: &CollisionOperators, proj: &Projections, which: Which) -> Self {
        let op = ops.operator(which).clone();
        let projector = proj.projector(which).clone();
        let lu = (&op + &projector).lu();
        Self { op, projector, lu }
    }

    fn kernel_part(&self, x: &[f64]) -> Vec<f64> {
        (&self.projector * DVector::from_column_slice(x))
            .as_slice()
            .to_vec()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.op * DVector::from_column_slice(x))
            .as_slice()
            .to_vec()
    }

    pub fn solve(&self, target: &[f64]) -> Result<Vec<f64>> {
        self.solve_with_guess(target, &vec![0.0; target.len()])
    }

    /// Refines from `guess`; any kernel component of the guess is discarded.
    pub fn solve_with_guess(&self, target: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let tn = norm(target);
        let kernel = norm(&self.kernel_part(target));
        if kernel > RANGE_TOL * tn.max(1.0) {
            return Err(Error::NotInRange {
                component: kernel,
                tolerance: RANGE_TOL * tn.max(1.0),
            });
        }
        let pk = self.kernel_part(guess);
        let mut x: Vec<f64> = guess.iter().zip(&pk).map(|(g, p)| g - p).collect();
        for _ in 0..3 {
            let lx = self.apply(&x);
            let r: Vec<f64> = target.iter().zip(&lx).map(|(t, l)| t - l).collect();
            if norm(&r) <= SOLVE_TOL * tn * 1e-3 {
                break;
            }
            let dx = self
                .lu
                .solve(&DVector::from_vec(r))
                .ok_or(Error::FactorizationFailed { mode: 0 })?;
            x.iter_mut().zip(dx.iter()).for_each(|(a, b)| *a += b);
            let pk = self.kernel_part(&x);
            x.iter_mut().zip(&pk).for_each(|(a, b)| *a -= b);
        }
        let res = self.residual(&x, target);
        if res > SOLVE_TOL * tn.max(f64::MIN_POSITIVE) && tn > 0.0 {
            return Err(Error::NotInRange {
                component: res,
                tolerance: SOLVE_TOL * tn,
            });
        }
        Ok(x)
    }

    pub fn residual(&self, x: &[f64], target: &[f64]) -> f64 {
        let lx = self.apply(x);
        lx.iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn invert_l1(ops: &CollisionOperators, proj: &Projections, target: &[f64]) -> Result<Vec<f64>> {
    KernelSolver::new(ops, proj, Which::L1).solve(target)
}

pub fn invert_l2(ops: &CollisionOperators, proj: &Projections, target: &[f64]) -> Result<Vec<f64>> {
    KernelSolver::new(ops, proj, Which::L2).solve(target)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportCoefficients {
    /// Viscosity `(1/10) sum_ij <A_ij, A^_ij>`, the value that governs
    /// shear decay of the kinetic model.
    pub mu: f64,
    /// Heat conductivity `(2/15) sum_i <B_i, B^_i>`.
    pub kappa: f64,
    /// Conductivity `(2/3) sum_i <Phi^_i, Phi_i>` entering Ohm's law.
    pub sigma: f64,
    /// `1 / (1/2 <v, L1(v, -v)>)`.
    pub sigma_collision_integral: f64,
    /// `(1/15) sum_ij <A_ij, A^_ij>`.
    pub mu_one_fifteenth: f64,
    pub a_hat: [[Vec<f64>; 3]; 3],
    pub b_hat: [Vec<f64>; 3],
    pub phi_hat: [Vec<f64>; 3],
    pub psi_hat: Vec<f64>,
    /// Largest relative residual over all solves.
    pub max_residual: f64,
}

/// Serializable digest of the coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSummary {
    pub degree_cutoff: usize,
    pub sphere_rule: SphereRule,
    pub mu: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub sigma_collision_integral: f64,
    pub mu_one_fifteenth: f64,
    pub max_residual: f64,
    pub delta_l1: f64,
    pub delta_l2: f64,
}

impl TransportSummary {
    pub fn new(
        ops: &CollisionOperators,
        proj: &Projections,
        tc: &TransportCoefficients,
    ) -> Result<Self> {
        Ok(Self {
            degree_cutoff: ops.degree_cutoff,
            sphere_rule: ops.sphere_rule,
            mu: tc.mu,
            kappa: tc.kappa,
            sigma: tc.sigma,
            sigma_collision_integral: tc.sigma_collision_integral,
            mu_one_fifteenth: tc.mu_one_fifteenth,
            max_residual: tc.max_residual,
            delta_l1: coercivity_constant(ops, proj, Which::L1)?,
            delta_l2: coercivity_constant(ops, proj, Which::L2)?,
        })
    }
}

pub fn compute_transport(
    ops: &CollisionOperators,
    proj: &Projections,
    moments: &MomentVectors,
) -> Result<TransportCoefficients> {
    let s1 = KernelSolver::new(ops, proj, Which::L1);
    let s2 = KernelSolver::new(ops, proj, Which::L2);
    let mut max_residual = 0.0f64;
    let mut solve = |s: &KernelSolver, t: &[f64]| -> Result<Vec<f64>> {
        let x = s.solve(t)?;
        max_residual = max_residual.max(s.residual(&x, t) / norm(t).max(f64::MIN_POSITIVE));
        Ok(x)
    };

    let mut a_hat: [[Vec<f64>; 3]; 3] = Default::default();
    for i in 0..3 {
        for j in 0..3 {
            a_hat[i][j] = solve(&s1, &moments.a[i][j])?;
        }
    }
    let mut b_hat: [Vec<f64>; 3] = Default::default();
    let mut phi_hat: [Vec<f64>; 3] = Default::default();
    for i in 0..3 {
        b_hat[i] = solve(&s1, &moments.b[i])?;
        phi_hat[i] = solve(&s2, &moments.v[i])?;
    }
    let psi_hat = solve(&s2, &moments.psi)?;

    let mut aa = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            aa += dot(&moments.a[i][j], &a_hat[i][j]);
        }
    }
    let bb: f64 = (0..3).map(|i| dot(&moments.b[i], &b_hat[i])).sum();
    let pp: f64 = (0..3).map(|i| dot(&moments.v[i], &phi_hat[i])).sum();

    let mu = aa / 10.0;
    let kappa = 2.0 * bb / 15.0;
    let sigma = 2.0 * pp / 3.0;
    for (what, value) in [
        ("viscosity", mu),
        ("heat conductivity", kappa),
        ("conductivity", sigma),
    ] {
        if !(value > 0.0) {
            return Err(Error::NonPositive { what, value });
        }
    }
    Ok(TransportCoefficients {
        mu,
        kappa,
        sigma,
        sigma_collision_integral: compute_sigma(ops, moments)?,
        mu_one_fifteenth: aa / 15.0,
        a_hat,
        b_hat,
        phi_hat,
        psi_hat,
        max_residual,
    })
}

/// `(mu, kappa)`; see [`TransportCoefficients::mu`] for the normalization.
pub fn compute_mu_kappa(
    ops: &CollisionOperators,
    proj: &Projections,
    moments: &MomentVectors,
) -> Result<(f64, f64)> {
    let t = compute_transport(ops, proj, moments)?;
    Ok((t.mu, t.kappa))
}

/// Diagonal contributions `<v_i, L1(v_i, -v_i)>`.
pub fn sigma_components(ops: &CollisionOperators, moments: &MomentVectors) -> [f64; 3] {
    std::array::from_fn(|i| {
        let v = &moments.v[i];
        let minus: Vec<f64> = v.iter().map(|x| -x).collect();
        dot(v, &ops.l1_two_arg(v, &minus))
    })
}

/// `1 / (1/2 <v, L1(v, -v)>)` summed over the three components.
pub fn compute_sigma(ops: &CollisionOperators, moments: &MomentVectors) -> Result<f64> {
    let integral: f64 = 0.5 * sigma_components(ops, moments).iter().sum::<f64>();
    if !(integral > 0.0) {
        return Err(Error::NonPositive {
            what: "conductivity integral",
            value: integral,
        });
    }
    Ok(1.0 / integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaSample {
    pub radius: f64,
    pub alpha: f64,
    /// Relative spread `(max - min)/|mean|` of `Phi^_i / v_i` over directions.
    pub alpha_spread: f64,
    /// `None` near the zero sphere of `Psi`.
    pub beta: Option<f64>,
    pub beta_spread: Option<f64>,
}

/// Sample `alpha(|v|) = Phi^_i(v)/v_i` and `beta(|v|) = Psi^(v)/Psi(v)`
/// over many directions at each radius.
pub fn compute_alpha_beta(
    basis: &HermiteBasis,
    transport: &TransportCoefficients,
    radii: &[f64],
) -> Vec<AlphaBetaSample> {
    let dirs = SphereRule::product_for_degree(12).points();
    radii
        .iter()
        .map(|&r| {
            let mut alphas = Vec::new();
            let mut betas = Vec::new();
            let psi = 0.5 * r * r - 1.5;
            for (d, _) in &dirs {
                let v = [r * d[0], r * d[1], r * d[2]];
                for i in 0..3 {
                    if v[i].abs() > 0.1 * r {
                        alphas.push(basis.evaluate(&transport.phi_hat[i], &v) / v[i]);
                    }
                }
                if psi.abs() >= 1e-6 {
                    betas.push(basis.evaluate(&transport.psi_hat, &v) / psi);
                }
            }
            let stats = |xs: &[f64]| {
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (mean, (hi - lo) / mean.abs().max(f64::MIN_POSITIVE))
            };
            let (alpha, alpha_spread) = stats(&alphas);
            let (beta, beta_spread) = if betas.is_empty() {
                (None, None)
            } else {
                let (m, s) = stats(&betas);
                (Some(m), Some(s))
            };
            AlphaBetaSample {
                radius: r,
                alpha,
                alpha_spread,
                beta,
                beta_spread,
            }
        })
        .collect()
}

/// Smallest `C` with `|alpha| + |beta| <= C (1 + r)` over the samples.
pub fn alpha_beta_growth_constant(samples: &[AlphaBetaSample]) -> f64 {
    samples
        .iter()
        .map(|s| (s.alpha.abs() + s.beta.map_or(0.0, f64::abs)) / (1.0 + s.radius))
        .fold(0.0, f64::max)
}

pub fn alpha_beta_csv(samples: &[AlphaBetaSample]) -> String {
    let mut out = String::from("radius,alpha,alpha_spread,beta,beta_spread\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
    for s in samples {
        out.push_str(&format!(
            "{:.6},{:.12e},{:.3e},{},{}\n",
            s.radius,
            s.alpha,
            s.alpha_spread,
            opt(s.beta),
            opt(s.beta_spread)
        ));
    }
    out
}
