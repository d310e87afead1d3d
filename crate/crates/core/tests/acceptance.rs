//! Acceptance suite. Each test prints one PASS/FAIL line for its criterion
//! and then asserts it.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vpb_core::cache::load_or_assemble;
use vpb_core::collision::{assemble_l, coercivity_constant, CollisionConfig, Projections, Which};
use vpb_core::config::{build_profile, ProfileKind, RunConfig};
use vpb_core::fluid::{max_divergence, FluidConfig, FluidSolver};
use vpb_core::harness::{run_sweep, Lab, MOMENT_ERRORS, TRACKED};
use vpb_core::kinetic::{init_well_prepared, KineticConfig, KineticSolver, KineticState};
use vpb_core::spectral::Torus;
use vpb_core::transport::compute_transport;
use vpb_core::velocity::{thirteen_moments, HermiteBasis};

/// Writes past the test harness's output capture so every line shows up in
/// a plain `cargo test` run.
fn report(n: usize, name: &str, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        out,
        "[acceptance] criterion {n} ({name}): {verdict} - {detail}"
    );
}

struct Fixture {
    lab: Lab,
    assembly_seconds: f64,
    cache: tempfile::TempDir,
}

/// The default configuration with the full collision tensor, assembled once
/// into a fresh cache.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cache = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            cache_dir: Some(cache.path().to_path_buf()),
            ..RunConfig::default()
        };
        let t0 = Instant::now();
        let lab = Lab::new(cfg).unwrap();
        Fixture {
            lab,
            assembly_seconds: t0.elapsed().as_secs_f64(),
            cache,
        }
    })
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[test]
fn criterion_1_operator_structure() {
    let fx = fixture();
    let ops = &fx.lab.ops;
    let mut pass = fx.lab.cfg.degree_cutoff == 4;
    let mut detail = String::new();
    for (which, name, expect) in [(Which::L1, "L1", 5), (Which::L2, "L2", 1)] {
        let m = ops.operator(which);
        let asym = (m - m.transpose()).amax();
        let min_eig = ops
            .spectrum(which)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let kd = ops.kernel_dim(which);
        pass &= kd == expect && asym < 1e-9 && min_eig >= -1e-9;
        detail += &format!("{name}: kernel {kd}, asymmetry {asym:.1e}, min eig {min_eig:.1e}; ");
    }

    let t0 = Instant::now();
    let again = load_or_assemble(
        Some(fx.cache.path()),
        &fx.lab.basis,
        &fx.lab.cfg.collision_config(),
        true,
    )
    .unwrap();
    let reload = t0.elapsed().as_secs_f64();
    let identical = again == **ops;
    pass &= identical && fx.assembly_seconds < 600.0;
    detail += &format!(
        "setup {:.1} s, cache reload {reload:.3} s, bit-identical {identical}",
        fx.assembly_seconds
    );
    report(1, "operator structure", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_2_collision_conservation() {
    let fx = fixture();
    let basis = &fx.lab.basis;
    let invariants = [
        basis.project(|_| 1.0),
        basis.project(|v| v[0]),
        basis.project(|v| v[1]),
        basis.project(|v| v[2]),
        basis.project(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let f: Vec<f64> = (0..basis.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let q = fx.lab.ops.apply_q(&f, &f);
        for psi in &invariants {
            let m: f64 = q.iter().zip(psi).map(|(a, b)| a * b).sum();
            worst = worst.max(m.abs());
        }
    }
    let pass = worst < 1e-7;
    let detail = format!("max |<Q(f,f), psi>| over 100 vectors = {worst:.2e}");
    report(2, "collision conservation", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_3_coercivity_and_relaxation() {
    let fx = fixture();
    let lab = &fx.lab;
    let d1 = coercivity_constant(&lab.ops, &lab.proj, Which::L1).unwrap();
    let d2 = coercivity_constant(&lab.ops, &lab.proj, Which::L2).unwrap();
    let mut pass = d1 > 0.0 && d2 > 0.0;
    let mut detail = format!("delta L1 {d1:.4}, delta L2 {d2:.4}; ");

    let torus = Torus::new(1, 4, 1.0).unwrap();
    let dim = lab.basis.dim();
    let micro_nu = |c: &[Complex64]| {
        let re: Vec<f64> = c.iter().map(|z| z.re).collect();
        let k = lab.proj.project_p1(&re).kinetic;
        lab.basis.nu_norm_sq(&k).sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for eps in [1.0, 0.1] {
        let cfg = KineticConfig {
            epsilon: eps,
            dt: 1e-3 * eps * eps,
            fields: false,
            nonlinear: false,
            ..KineticConfig::default()
        };
        let s = KineticSolver::new(cfg, torus, lab.basis.clone(), lab.ops.clone()).unwrap();
        let bound = 2.0 * d1 / (eps * eps);
        let mut slowest = f64::INFINITY;
        for _ in 0..3 {
            let mut st = KineticState::zeros(torus, dim, eps);
            for a in 0..dim {
                st.f[a] = Complex64::new(rng.random_range(-0.01..0.01), 0.0);
            }
            let n0 = micro_nu(st.f_mode(0));
            let mut t = 0.0;
            while micro_nu(st.f_mode(0)) > n0 / std::f64::consts::E {
                st = s.step(&st, cfg.dt).unwrap();
                t += cfg.dt;
            }
            slowest = slowest.min(1.0 / t);
        }
        pass &= slowest >= 0.9 * bound;
        detail += &format!("eps {eps}: e-fold rate {slowest:.3e} vs 2 delta/eps^2 {bound:.3e}; ");
    }
    report(3, "coercivity", pass, &detail);
    assert!(pass, "{detail}");
}

/// Committed K = 8 values (quadrature order 18, 26-point sphere rule),
/// used as the refinement oracle for the K = 4 and K = 6 coefficients.
const GOLDEN_K8: [f64; 3] = [0.0447828091, 0.0677568675, 0.1077848545];
/// Committed K = 6 values; regression targets for the computation below.
const GOLDEN_K6: [f64; 3] = [0.0447772110, 0.0676186024, 0.1077626562];

#[test]
fn criterion_4_transport_coefficients() {
    let coeffs = |k: usize, q: usize| {
        let basis = HermiteBasis::new(k, q).unwrap();
        let ops = assemble_l(&basis, &CollisionConfig::default()).unwrap();
        let tc = compute_transport(
            &ops,
            &Projections::new(&basis),
            &thirteen_moments(&basis).unwrap(),
        )
        .unwrap();
        [tc.mu, tc.kappa, tc.sigma]
    };
    let k4 = coeffs(4, 16);
    let k4q = coeffs(4, 32);
    let k6 = coeffs(6, 16);
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let mut pass = k4.iter().all(|&x| x > 0.0);
    let mut worst_k = 0.0f64;
    let mut worst_q = 0.0f64;
    let mut worst_gold = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for i in 0..3 {
        worst_k = worst_k.max(rel(k4[i], k6[i]));
        worst_q = worst_q.max(rel(k4[i], k4q[i]));
        worst_gold = worst_gold.max(rel(k6[i], GOLDEN_K6[i]));
        worst_oracle = worst_oracle
            .max(rel(k4[i], GOLDEN_K8[i]))
            .max(rel(k6[i], GOLDEN_K8[i]));
    }
    pass &= worst_k < 0.05 && worst_q < 0.05 && worst_gold < 1e-8 && worst_oracle < 0.05;
    let detail = format!(
        "mu {:.6} kappa {:.6} sigma {:.6}; K4->6 {worst_k:.2e}, Q doubling {worst_q:.2e}, vs K6 golden {worst_gold:.1e}, vs K8 oracle {worst_oracle:.2e}",
        k4[0], k4[1], k4[2]
    );
    report(4, "transport coefficients", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_5_energy_monotonicity() {
    let fx = fixture();
    let lab = &fx.lab;
    let torus = Torus::new(1, 32, 2.0 * std::f64::consts::PI).unwrap();
    let profile = build_profile(ProfileKind::Shear, 0.001, torus).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for eps in [1.0, 0.1] {
        let cfg = KineticConfig {
            epsilon: eps,
            dt: 1e-3,
            snapshot_every: 1,
            micro_init: lab.cfg.micro_init,
            ..KineticConfig::default()
        };
        let s = KineticSolver::new(cfg, torus, lab.basis.clone(), lab.ops.clone()).unwrap();
        let init = init_well_prepared(&s, &profile, &lab.transport).unwrap();
        let out = s.run(&init, 0.2).unwrap();
        let e0 = out.energy[0].energy;
        let max_rise = out
            .energy
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(f64::NEG_INFINITY, f64::max);
        let integral: f64 = out
            .energy
            .windows(2)
            .map(|w| 0.5 * (w[0].dissipation + w[1].dissipation) * (w[1].t - w[0].t))
            .sum();
        let c = integral / e0;
        pass &= e0 <= 1e-3 && e0 > 0.0 && max_rise <= 1e-8 && c < 10.0;
        detail += &format!(
            "eps {eps}: E(0) {e0:.2e}, max step increase {max_rise:.1e}, int D / E(0) {c:.3}; "
        );
    }
    report(5, "energy monotonicity", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_6_conservation_residuals() {
    let fx = fixture();
    let lab = &fx.lab;
    let profile = lab.cfg.profile(lab.torus).unwrap();
    let roundoff = 1e-12;
    let mut finals = Vec::new();
    let mut charge_default = f64::NAN;
    for dt in [4e-3, 2e-3, 1e-3, 5e-4] {
        let cfg = KineticConfig {
            dt,
            ..lab.cfg.kinetic_config(lab.cfg.epsilon)
        };
        let s = KineticSolver::new(cfg, lab.torus, lab.basis.clone(), lab.ops.clone()).unwrap();
        let init = lab.kinetic_initial(&s, &profile).unwrap();
        let out = s.run(&init, lab.cfg.t_final).unwrap();
        if dt == lab.cfg.dt {
            charge_default = out.residuals.iter().map(|r| r.charge).fold(0.0, f64::max);
        }
        let r = *out.residuals.last().unwrap();
        finals.push([r.mass, r.momentum, r.energy, r.charge]);
    }
    let names = ["mass", "momentum", "energy", "charge"];
    let mut pass = charge_default < 1e-8;
    let mut detail = format!("eps {}, final-time residuals; ", lab.cfg.epsilon);
    for (law, name) in names.iter().enumerate() {
        let series: Vec<f64> = finals.iter().map(|f| f[law]).collect();
        if series.iter().all(|&x| x < roundoff) {
            detail += &format!(
                "{name} at roundoff (max {:.1e}); ",
                series.iter().copied().fold(0.0, f64::max)
            );
            continue;
        }
        let orders: Vec<f64> = series.windows(2).map(|w| order(w[0], w[1])).collect();
        pass &= orders.iter().all(|&p| p >= 0.9);
        detail += &format!(
            "{name} {:.1e} -> {:.1e}, orders {:?}; ",
            series[0],
            series[3],
            orders
                .iter()
                .map(|p| (p * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        );
    }
    detail += &format!("max charge residual at default dt {charge_default:.1e}");
    report(6, "conservation residuals", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_7_hydrodynamic_limit() {
    let fx = fixture();
    let lab = &fx.lab;
    let cfg = &lab.cfg;
    assert_eq!(cfg.epsilons, vec![0.5, 0.25, 0.125, 0.0625]);
    assert_eq!((cfg.t_final, cfg.modes, cfg.dims), (0.1, 64, 1));
    let t0 = Instant::now();
    let profile = cfg.profile(lab.torus).unwrap();
    let r = run_sweep(lab, &profile, &cfg.epsilons, cfg.t_final).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let ohm = TRACKED.len() - 1;
    let col = r.final_column(ohm);
    let ratio = col.last().unwrap().1 / col[0].1;
    let mut pass =
        r.failed() == 0 && r.monotone.iter().all(|&m| m) && ratio <= 0.5 && secs < 1200.0;
    pass &= r.final_column(0).len() == cfg.epsilons.len();
    let non_monotone: Vec<&str> = TRACKED
        .iter()
        .zip(&r.monotone)
        .filter(|(_, &m)| !m)
        .map(|(n, _)| *n)
        .collect();
    let slopes: Vec<String> = r.slopes[..MOMENT_ERRORS]
        .iter()
        .map(|s| s.map_or("-".into(), |v| format!("{v:.2}")))
        .collect();
    let detail = format!(
        "non-monotone {non_monotone:?}, Ohm ratio finest/coarsest {ratio:.3}, moment-error slopes {slopes:?}, {secs:.1} s"
    );
    report(7, "hydrodynamic limit", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_8_fluid_solver() {
    let fx = fixture();
    let tc = &fx.lab.transport;
    let cfg = FluidConfig {
        dt: 1e-3,
        ..fx.lab.cfg.fluid_config(tc)
    };
    let torus = Torus::new(1, 64, 2.0 * std::f64::consts::PI).unwrap();
    let fs = FluidSolver::new(cfg, torus).unwrap();
    let zero = || vec![Complex64::new(0.0, 0.0); torus.len()];
    let mode = |k: i64, a: f64| {
        let mut f = zero();
        f[torus.mode_of([k, 0])] = Complex64::new(a, 0.0);
        f[torus.mode_of([-k, 0])] = Complex64::new(a, 0.0);
        f
    };
    let t_end = 0.5;
    let n_init = fs
        .state(0.0, [zero(), zero(), zero()], zero(), mode(3, 0.1))
        .unwrap();
    let n_end = fs.run(&n_init, t_end, 1000).unwrap().pop().unwrap();
    let n_exact = 0.1 * (-tc.sigma * (1.0 + 9.0 / 2.0) * t_end).exp();
    let n_err = ((n_end.n[torus.mode_of([3, 0])].re - n_exact) / n_exact).abs();
    let th_init = fs
        .state(0.0, [zero(), zero(), zero()], mode(2, 0.2), zero())
        .unwrap();
    let th_end = fs.run(&th_init, t_end, 1000).unwrap().pop().unwrap();
    let th_exact = 0.2 * (-tc.kappa * 4.0 * t_end).exp();
    let th_err = ((th_end.theta[torus.mode_of([2, 0])].re - th_exact) / th_exact).abs();

    let t2 = Torus::new(2, 32, 2.0 * std::f64::consts::PI).unwrap();
    let fs2 = FluidSolver::new(cfg, t2).unwrap();
    let p = build_profile(ProfileKind::Cellular, 0.5, t2).unwrap();
    let mut s = fs2.state(0.0, p.u, p.theta, p.n).unwrap();
    let mut div = 0.0f64;
    for _ in 0..50 {
        s = fs2.step(&s, cfg.dt).unwrap();
        div = div.max(max_divergence(&t2, &s.u));
    }
    let pass = n_err < 1e-6 && th_err < 1e-6 && div < 1e-12;
    let detail = format!(
        "charge decay rel. error {n_err:.1e}, heat decay rel. error {th_err:.1e}, max |k.u_k| over 50 nonlinear steps {div:.1e}"
    );
    report(8, "fluid solver", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_9_picard_vs_imex() {
    let fx = fixture();
    let lab = &fx.lab;
    let eps = 0.5;
    let cfg = lab.cfg.kinetic_config(eps);
    let s = KineticSolver::new(cfg, lab.torus, lab.basis.clone(), lab.ops.clone()).unwrap();
    let profile = lab.cfg.profile(lab.torus).unwrap();
    let init = lab.kinetic_initial(&s, &profile).unwrap();
    let start = s.run(&init, 0.05).unwrap().final_state;
    let dts = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
    let diffs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let a = s.step(&start, dt).unwrap();
            let (b, _) = s.picard_step(&start, dt, 100, 1e-15).unwrap();
            let d: Vec<f64> =
                a.f.iter()
                    .zip(&b.f)
                    .chain(a.g.iter().zip(&b.g))
                    .map(|(x, y)| (x - y).norm())
                    .collect();
            DVector::from_vec(d).norm()
        })
        .collect();
    let orders: Vec<f64> = diffs.windows(2).map(|w| order(w[0], w[1])).collect();
    let observed = *orders.last().unwrap();
    let pass = observed >= 1.9;
    let detail = format!(
        "eps {eps}: differences {:?}, successive orders {:?}, observed {observed:.3}",
        diffs.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>(),
        orders
            .iter()
            .map(|p| (p * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    report(9, "Picard vs IMEX", pass, &detail);
    assert!(pass, "{detail}");
}
