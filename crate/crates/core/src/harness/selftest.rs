use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Lab;
use crate::collision::{coercivity_constant, Which};
use crate::fluid::max_divergence;
use crate::kinetic::{FluidProfile, KineticState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Fast structural checks on the configured discretization.
pub fn selftest(lab: &Lab, profile: &FluidProfile) -> Vec<Check> {
    let mut out = Vec::new();
    let basis = &lab.basis;
    let ops = &lab.ops;

    let gram = basis.quadrature_gram();
    let orth = (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).amax();
    out.push(check(
        "basis orthonormal",
        orth < 1e-10,
        format!("max |G - I| = {orth:.2e}"),
    ));

    for (which, name, expect) in [(Which::L1, "L1", 5), (Which::L2, "L2", 1)] {
        let m = ops.operator(which);
        let spec = ops.spectrum(which);
        let lo = spec.iter().copied().fold(f64::INFINITY, f64::min);
        let kd = ops.kernel_dim(which);
        out.push(check(
            &format!("{name} symmetric, PSD, kernel {expect}"),
            asymmetry(m) < 1e-9 && lo > -1e-9 && kd == expect,
            format!(
                "asymmetry {:.2e}, min eigenvalue {lo:.2e}, kernel {kd}",
                asymmetry(m)
            ),
        ));
        let delta = coercivity_constant(ops, &lab.proj, which);
        out.push(check(
            &format!("{name} coercive"),
            matches!(delta, Ok(d) if d > 0.0),
            match delta {
                Ok(d) => format!("delta = {d:.6}"),
                Err(e) => e.to_string(),
            },
        ));
    }

    if ops.has_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let invariants = [
            basis.project(|_| 1.0),
            basis.project(|v| v[0]),
            basis.project(|v| v[1]),
            basis.project(|v| v[2]),
            basis.project(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]),
        ];
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let f: Vec<f64> = (0..basis.dim())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let q = ops.apply_q(&f, &f);
            for psi in &invariants {
                let m: f64 = q.iter().zip(psi).map(|(a, b)| a * b).sum();
                worst = worst.max(m.abs());
            }
        }
        out.push(check(
            "collision invariants conserved",
            worst < 1e-7,
            format!("max |<Q(f,f), psi>| = {worst:.2e} over 20 vectors"),
        ));
    }

    let t = &lab.transport;
    out.push(check(
        "transport coefficients positive",
        t.mu > 0.0 && t.kappa > 0.0 && t.sigma > 0.0,
        format!(
            "mu {:.6e} kappa {:.6e} sigma {:.6e}",
            t.mu, t.kappa, t.sigma
        ),
    ));

    let fluid = lab.fluid_solver().and_then(|fs| {
        let s0 = lab.fluid_initial(&fs, profile)?;
        let s1 = fs.step(&s0, fs.cfg.dt)?;
        Ok(max_divergence(&s1.torus, &s1.u))
    });
    out.push(match fluid {
        Ok(d) => check(
            "fluid step divergence-free",
            d < 1e-12,
            format!("max |div u| = {d:.2e}"),
        ),
        Err(e) => check("fluid step divergence-free", false, e.to_string()),
    });

    let kinetic = lab.kinetic_solver(lab.cfg.epsilon).and_then(|s| {
        let zero = KineticState::zeros(lab.torus, basis.dim(), lab.cfg.epsilon);
        let z = s.step(&zero, s.cfg.dt)?;
        let init = lab.kinetic_initial(&s, profile)?;
        let next = s.step(&init, s.cfg.dt)?;
        let r = s.residual_between(&init, &next);
        Ok((z.l2_norm(), r.charge, r.mass, next.reality_defect()))
    });
    out.push(match kinetic {
        Ok((z, charge, mass, real)) => check(
            "kinetic step consistency",
            z == 0.0 && charge < 1e-8 && mass < 1e-8 && real < 1e-12,
            format!(
                "zero state -> {z:.1e}; charge {charge:.2e}; mass {mass:.2e}; reality {real:.1e}"
            ),
        ),
        Err(e) => check("kinetic step consistency", false, e.to_string()),
    });
    out
}
