use nalgebra::DVector;
use num_complex::Complex64;

use super::solver::KineticSolver;
use super::{KineticState, MicroInit};
use crate::collision::Which;
use crate::error::{Error, Result};
use crate::fluid::{leray_project, solve_poisson};
use crate::spectral::{Torus, Transform};
use crate::transport::{KernelSolver, TransportCoefficients};

/// Initial fluid fields as Fourier coefficients on a torus.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidProfile {
    pub torus: Torus,
    pub rho: Vec<Complex64>,
    pub u: [Vec<Complex64>; 3],
    pub theta: Vec<Complex64>,
    pub n: Vec<Complex64>,
}

impl FluidProfile {
    pub fn zeros(torus: Torus) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); torus.len()];
        Self {
            torus,
            rho: z.clone(),
            u: [z.clone(), z.clone(), z.clone()],
            theta: z.clone(),
            n: z,
        }
    }

    /// Sample `x -> [rho, u1, u2, u3, theta, n]` on the grid.
    pub fn from_fn(torus: Torus, f: impl Fn([f64; 2]) -> [f64; 6]) -> Self {
        let tr = Transform::new(torus);
        let samples: Vec<[f64; 6]> = torus.points().into_iter().map(f).collect();
        let field = |c: usize| {
            let phys: Vec<f64> = samples.iter().map(|s| s[c]).collect();
            let mut spec = tr.forward(&phys);
            torus.mirror(&mut spec, 1);
            spec
        };
        Self {
            torus,
            rho: field(0),
            u: [field(1), field(2), field(3)],
            theta: field(4),
            n: field(5),
        }
    }

    /// Profile whose charge density is `Delta phi`.
    pub fn from_potential(
        torus: Torus,
        rho: Vec<Complex64>,
        u: [Vec<Complex64>; 3],
        theta: Vec<Complex64>,
        phi: &[Complex64],
    ) -> Self {
        let n = (0..torus.len()).map(|m| -torus.k2(m) * phi[m]).collect();
        Self {
            torus,
            rho,
            u,
            theta,
            n,
        }
    }

    /// Drop Nyquist and, optionally, the modes removed by the 2/3 rule.
    pub fn truncated(&self, dealias: bool) -> Self {
        let mut p = self.clone();
        for f in [&mut p.rho, &mut p.theta, &mut p.n]
            .into_iter()
            .chain(p.u.iter_mut())
        {
            self.torus.truncate(f, dealias);
        }
        p
    }
}

/// Well-prepared kinetic data matched to a fluid profile.
///
/// `f = 2(rho + u.v + theta psi)` with `u` Leray-projected, and
/// `g = n + eps (j0.v + w0 psi)` with `j0` from Ohm's law and `w0 = n theta`.
/// With [`MicroInit::ChapmanEnskog`] the first-order micro parts are added:
/// `g` carries `Phi^.(2 grad phi - grad n)` in place of `sigma (grad phi -
/// grad n / 2).v` and `f` gains `eps L1^{-1}[-(I-P1)(v.grad f0) + B(f0, f0)]`.
/// [`MicroInit::Compatible`] further adds the order-`eps` macroscopic
/// corrections of [`compatibility_correction`].
pub fn init_well_prepared(
    solver: &KineticSolver,
    profile: &FluidProfile,
    transport: &TransportCoefficients,
) -> Result<KineticState> {
    let torus = *solver.torus();
    if profile.torus != torus {
        return Err(Error::InvalidParameter(
            "profile and solver live on different tori".into(),
        ));
    }
    let eps = solver.epsilon();
    let dim = solver.dim();
    let len = torus.len();
    let scale = |f: &[Complex64]| torus.l2_norm(f);
    if profile.n[0].norm() > 1e-12 * (1.0 + scale(&profile.n)) {
        return Err(Error::NotWellPrepared(format!(
            "charge density has nonzero mean {}",
            profile.n[0].re
        )));
    }
    let sum: Vec<Complex64> = profile
        .rho
        .iter()
        .zip(&profile.theta)
        .map(|(a, b)| a + b)
        .collect();
    let tol = 1e-10 * (1.0 + scale(&profile.rho) + scale(&profile.theta));
    if scale(&sum) > tol {
        return Err(Error::NotWellPrepared(format!(
            "Boussinesq relation violated: ||rho + theta|| = {:.3e}",
            scale(&sum)
        )));
    }
    let p = profile.truncated(solver.cfg.dealias);
    let mut u = leray_project(&torus, &p.u);
    for c in u.iter_mut() {
        torus.mirror(c, 1);
    }
    let mut n = p.n.clone();
    n[0] = Complex64::new(0.0, 0.0);
    let phi = solve_poisson(&torus, &n);
    let tr = &solver.transform;
    let rows = &solver.rows;
    let psi: Vec<f64> = rows.temp.iter().map(|x| 1.5 * x).collect();

    let mut state = KineticState::zeros(torus, dim, eps);
    for m in 0..len {
        let f = &mut state.f[m * dim..(m + 1) * dim];
        for a in 0..dim {
            let mut c = p.rho[m] * rows.one[a] + p.theta[m] * psi[a];
            for i in 0..3 {
                c += u[i][m] * rows.v[i][a];
            }
            f[a] = 2.0 * c;
        }
    }

    let nu: [Vec<Complex64>; 3] = std::array::from_fn(|i| tr.product(&n, &u[i]));
    let w0 = tr.product(&n, &p.theta);
    let grad = |f: &[Complex64], i: usize| {
        if i < torus.dims {
            torus.derivative(f, i)
        } else {
            vec![Complex64::new(0.0, 0.0); len]
        }
    };
    let dphi: [Vec<Complex64>; 3] = std::array::from_fn(|i| grad(&phi, i));
    let dn: [Vec<Complex64>; 3] = std::array::from_fn(|i| grad(&n, i));
    let sigma = transport.sigma;
    for m in 0..len {
        let g = &mut state.g[m * dim..(m + 1) * dim];
        for a in 0..dim {
            let mut c = eps * w0[m] * psi[a];
            for i in 0..3 {
                let drive = match solver.cfg.micro_init {
                    MicroInit::Minimal => sigma * (dphi[i][m] - 0.5 * dn[i][m]) * rows.v[i][a],
                    MicroInit::ChapmanEnskog | MicroInit::Compatible => {
                        (2.0 * dphi[i][m] - dn[i][m]) * transport.phi_hat[i][a]
                    }
                };
                c += eps * (nu[i][m] * rows.v[i][a] + drive);
            }
            g[a] = n[m] * rows.one[a] + c;
        }
    }

    if solver.cfg.micro_init != MicroInit::Minimal && solver.cfg.collisions {
        let f1 = first_order_f(solver, &state)?;
        if solver.cfg.micro_init == MicroInit::Compatible {
            let j0: [Vec<Complex64>; 3] = std::array::from_fn(|i| {
                (0..len)
                    .map(|m| nu[i][m] + sigma * (dphi[i][m] - 0.5 * dn[i][m]))
                    .collect()
            });
            compatibility_correction(solver, &mut state, &f1, &n, &dphi, &j0);
        }
        state.f.iter_mut().zip(&f1).for_each(|(a, b)| *a += eps * b);
    }
    for y in [&mut state.f, &mut state.g] {
        torus.mirror(y, dim);
        for m in 0..len {
            if torus.is_nyquist(m) || (solver.cfg.dealias && !torus.is_retained(m)) {
                y[m * dim..(m + 1) * dim].fill(Complex64::new(0.0, 0.0));
            }
        }
    }
    state.solve_poisson();
    Ok(state)
}

/// Order-`eps` macroscopic corrections for data carrying the micro part
/// `eps f1`.
///
/// `div u = -(eps/5) div<f1, B> + (eps^2/5) j.grad(phi)` removes the fast
/// change of `rho + theta`, and `rho + theta = eps p` with
/// `Delta p = div(n grad(phi)/2) - (1/2) d_i d_j <f1, v_i v_j>` removes the
/// fast change of `div u`. The split of `eps p` keeps `3 theta/5 - 2 rho/5`
/// fixed.
fn compatibility_correction(
    solver: &KineticSolver,
    state: &mut KineticState,
    f1: &[Complex64],
    n: &[Complex64],
    dphi: &[Vec<Complex64>; 3],
    j0: &[Vec<Complex64>; 3],
) {
    let dim = state.dim;
    let torus = state.torus;
    let eps = state.epsilon;
    let tr = &solver.transform;
    let rows = &solver.rows;
    let force: [Vec<Complex64>; 3] = std::array::from_fn(|i| tr.product(n, &dphi[i]));
    let mut jdotphi = vec![Complex64::new(0.0, 0.0); torus.len()];
    for i in 0..torus.dims {
        let p = tr.product(&j0[i], &dphi[i]);
        jdotphi.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
    }
    let dot =
        |c: &[Complex64], r: &[f64]| -> Complex64 { c.iter().zip(r).map(|(x, y)| x * *y).sum() };
    let psi: Vec<f64> = rows.temp.iter().map(|x| 1.5 * x).collect();
    let ii = Complex64::new(0.0, 1.0);
    for m in 0..torus.len() {
        let k2 = torus.k2(m);
        if k2 == 0.0 {
            continue;
        }
        let k = torus.wavevector(m);
        let c = &f1[m * dim..(m + 1) * dim];
        let mut div_heat = Complex64::new(0.0, 0.0);
        let mut div_force = Complex64::new(0.0, 0.0);
        let mut stress = Complex64::new(0.0, 0.0);
        for i in 0..torus.dims {
            // <f1, B_i> = (3/2)<f1, v_i temp> - <f1, v_i>.
            let heat = 1.5 * dot(c, &rows.vtemp[i]) - dot(c, &rows.v[i]);
            div_heat += ii * k[i] * heat;
            div_force += ii * k[i] * 0.5 * force[i][m];
            for j in 0..torus.dims {
                stress -= k[i] * k[j] * dot(c, &rows.vv[i][j]);
            }
        }
        let div_u = -eps / 5.0 * div_heat + eps * eps / 5.0 * jdotphi[m];
        let pressure = -(div_force - 0.5 * stress) / k2;
        let drho = 0.6 * eps * pressure;
        let dtheta = 0.4 * eps * pressure;
        let f = &mut state.f[m * dim..(m + 1) * dim];
        for a in 0..dim {
            let mut d = drho * rows.one[a] + dtheta * psi[a];
            for i in 0..torus.dims {
                // u += grad(Delta^{-1} div_u).
                d += -ii * k[i] * div_u / k2 * rows.v[i][a];
            }
            f[a] += 2.0 * d;
        }
    }
}

/// `L1^{-1}[-(I-P1)(v.grad f0) + B(f0, f0)]` for the current `f`.
fn first_order_f(solver: &KineticSolver, state: &KineticState) -> Result<Vec<Complex64>> {
    let dim = state.dim;
    let torus = state.torus;
    let kernel = KernelSolver::new(&solver.ops, &solver.proj, Which::L1);
    let q1 = nalgebra::DMatrix::<f64>::identity(dim, dim) - &solver.proj.p1;
    let quad = solver.quadratic_f(&state.f);
    let mut out = vec![Complex64::new(0.0, 0.0); state.f.len()];
    for m in 0..torus.len() {
        if !torus.is_canonical(m) {
            continue;
        }
        let k = torus.wavevector(m);
        let f0 = state.f_mode(m);
        // i (k.V) f0, split into real and imaginary parts.
        let mut re = DVector::<f64>::zeros(dim);
        let mut im = DVector::<f64>::zeros(dim);
        let fr = DVector::from_iterator(dim, f0.iter().map(|c| c.re));
        let fi = DVector::from_iterator(dim, f0.iter().map(|c| c.im));
        for j in 0..torus.dims {
            if k[j] != 0.0 {
                re -= &solver.basis.mult[j] * &fi * k[j];
                im += &solver.basis.mult[j] * &fr * k[j];
            }
        }
        let qr = DVector::from_iterator(dim, quad[m * dim..(m + 1) * dim].iter().map(|c| c.re));
        let qi = DVector::from_iterator(dim, quad[m * dim..(m + 1) * dim].iter().map(|c| c.im));
        let tr = &q1 * (qr - re);
        let ti = &q1 * (qi - im);
        let xr = kernel.solve(tr.as_slice())?;
        let xi = kernel.solve(ti.as_slice())?;
        for a in 0..dim {
            out[m * dim + a] = Complex64::new(xr[a], xi[a]);
        }
    }
    torus.mirror(&mut out, dim);
    Ok(out)
}
