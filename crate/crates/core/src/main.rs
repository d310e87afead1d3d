use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vpb_core::config::RunConfig;
use vpb_core::harness::{self, Lab};
use vpb_core::transport::{alpha_beta_csv, alpha_beta_growth_constant, compute_alpha_beta};
use vpb_core::{collision::Which, Error};

#[derive(Parser, Debug)]
#[command(
    name = "vpb",
    version,
    about = "Two-species Vlasov-Poisson-Boltzmann laboratory"
)]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `threads`).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Operator cache directory (overrides `cache_dir`).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Table {
    AlphaBeta,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transport coefficients and coercivity constants as JSON.
    Coeffs {
        /// Write the spectra of L1 and L2 to `spectra.csv`.
        #[arg(long)]
        dump_operators: bool,
        #[arg(long, value_enum)]
        table: Option<Table>,
    },
    /// One kinetic run.
    Simulate {
        #[arg(long)]
        epsilon: Option<f64>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        restart: Option<PathBuf>,
    },
    /// One run of the limit fluid system.
    Fluid,
    /// Kinetic runs for every epsilon against one fluid run.
    Sweep {
        /// Comma-separated decreasing list (overrides `epsilons`).
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
    },
    /// Quick structural checks of the configured discretization.
    Selftest,
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.out_dir = o;
    }
    if let Some(c) = cli.cache {
        cfg.cache_dir = Some(c);
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate {
            epsilon: Some(e), ..
        } => cfg.epsilon = e,
        Command::Sweep {
            epsilons: Some(ref e),
        } => cfg.epsilons = e.clone(),
        Command::Coeffs { .. } => cfg.nonlinear = false,
        _ => {}
    }
    let out = cfg.out_dir.clone();
    let lab = Lab::new(cfg)?;
    let profile = lab.cfg.profile(lab.torus)?;

    match cli.command {
        Command::Coeffs {
            dump_operators,
            table,
        } => {
            let summary = lab.summary()?;
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            println!("{json}");
            write(&out.join("coeffs.json"), &json)?;
            if dump_operators {
                let s1 = lab.ops.spectrum(Which::L1);
                let s2 = lab.ops.spectrum(Which::L2);
                let mut csv = String::from("index,l1,l2\n");
                for (i, (a, b)) in s1.iter().zip(&s2).enumerate() {
                    csv.push_str(&format!("{i},{a:.15e},{b:.15e}\n"));
                }
                write(&out.join("spectra.csv"), &csv)?;
            }
            if let Some(Table::AlphaBeta) = table {
                let radii: Vec<f64> = (0..=40).map(|i| 0.1 * i as f64).collect();
                let samples = compute_alpha_beta(&lab.basis, &lab.transport, &radii);
                write(&out.join("alpha_beta.csv"), &alpha_beta_csv(&samples))?;
                eprintln!(
                    "growth constant {:.6}",
                    alpha_beta_growth_constant(&samples)
                );
            }
        }
        Command::Simulate { restart, .. } => {
            let s = harness::emit_kinetic_run(&lab, &profile, restart.as_deref(), &out)?;
            eprintln!(
                "t = {} after {} steps; E_N = {:.6e}; max charge residual {:.2e}",
                s.final_time, s.steps, s.final_energy.energy, s.max_residuals.charge
            );
        }
        Command::Fluid => {
            let s = harness::emit_fluid_run(&lab, &profile, &out)?;
            eprintln!(
                "t = {}; max |div u| = {:.2e}",
                s.final_time, s.max_divergence
            );
        }
        Command::Sweep { .. } => {
            let report = harness::run_sweep(&lab, &profile, &lab.cfg.epsilons, lab.cfg.t_final)?;
            let paths = harness::emit_report(&report, &out)?;
            print!(
                "{}",
                std::fs::read_to_string(&paths.digest).map_err(|e| Error::io(&paths.digest, e))?
            );
            if report.failed() > 0 {
                return Err(Error::ChecksFailed {
                    what: "kinetic runs",
                    failed: report.failed(),
                    total: report.cells.len(),
                });
            }
        }
        Command::Selftest => {
            let checks = harness::selftest(&lab, &profile);
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Error::ChecksFailed {
                    what: "self-test checks",
                    failed,
                    total: checks.len(),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
