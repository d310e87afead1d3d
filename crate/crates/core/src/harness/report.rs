use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::SweepReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub digest: PathBuf,
}

impl ReportPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            csv: dir.join("sweep.csv"),
            json: dir.join("sweep.json"),
            digest: dir.join("sweep.txt"),
        }
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Time in rows; one column per (epsilon, norm). Failed cells are blank.
pub fn sweep_csv(r: &SweepReport) -> String {
    let mut out = String::from("t");
    for cell in &r.cells {
        for name in &r.norms {
            write!(out, ",{name}@eps={:e}", cell.epsilon).unwrap();
        }
    }
    out.push('\n');
    for (ti, t) in r.times.iter().enumerate() {
        write!(out, "{t:e}").unwrap();
        for cell in &r.cells {
            match cell.series.get(ti) {
                Some(row) => row.iter().for_each(|v| write!(out, ",{v:e}").unwrap()),
                None => r.norms.iter().for_each(|_| out.push(',')),
            }
        }
        out.push('\n');
    }
    out
}

pub fn sweep_digest(r: &SweepReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "epsilon sweep, H^{} norms at t = {}",
        r.sobolev_index,
        r.times.last().copied().unwrap_or(0.0)
    )
    .unwrap();
    writeln!(
        s,
        "mu {:.6e}  kappa {:.6e}  sigma {:.6e}  (K = {})",
        r.transport.mu, r.transport.kappa, r.transport.sigma, r.transport.degree_cutoff
    )
    .unwrap();
    write!(s, "{:>12}", "epsilon").unwrap();
    for n in &r.norms {
        write!(s, " {n:>11}").unwrap();
    }
    s.push('\n');
    for cell in &r.cells {
        write!(s, "{:>12}", cell.epsilon).unwrap();
        match (&cell.failure, cell.final_norms()) {
            (None, Some(v)) => v.iter().for_each(|x| write!(s, " {x:>11.3e}").unwrap()),
            (Some(msg), _) => write!(s, "  FAILED: {msg}").unwrap(),
            (None, None) => write!(s, "  (no snapshots)").unwrap(),
        }
        s.push('\n');
    }
    write!(s, "{:>12}", "slope").unwrap();
    for slope in &r.slopes {
        match slope {
            Some(v) => write!(s, " {v:>11.3}").unwrap(),
            None => write!(s, " {:>11}", "-").unwrap(),
        }
    }
    s.push('\n');
    write!(s, "{:>12}", "monotone").unwrap();
    for m in &r.monotone {
        write!(s, " {:>11}", if *m { "yes" } else { "no" }).unwrap();
    }
    s.push('\n');
    writeln!(s, "run config {}", r.run_config_hash).unwrap();
    writeln!(s, "fluid config {}", r.fluid_config_hash).unwrap();
    s
}

pub fn emit_report(report: &SweepReport, dir: &Path) -> Result<ReportPaths> {
    let paths = ReportPaths::in_dir(dir);
    write_text(&paths.csv, &sweep_csv(report))?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_text(&paths.json, &json)?;
    write_text(&paths.digest, &sweep_digest(report))?;
    Ok(paths)
}

pub fn read_report(path: &Path) -> Result<SweepReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{SweepCell, TRACKED};
    use crate::transport::TransportSummary;
    use crate::velocity::quadrature::SphereRule;

    fn report(eps: &[f64], times: usize) -> SweepReport {
        SweepReport {
            epsilons: eps.to_vec(),
            times: (0..times).map(|i| i as f64 * 0.01).collect(),
            sobolev_index: 1.0,
            norms: TRACKED.iter().map(|s| s.to_string()).collect(),
            cells: eps
                .iter()
                .enumerate()
                .map(|(i, &e)| SweepCell {
                    epsilon: e,
                    kinetic_config_hash: format!("{i}"),
                    series: if i == 1 {
                        Vec::new()
                    } else {
                        (0..times)
                            .map(|t| (0..9).map(|c| e * (t + c) as f64 / 7.0).collect())
                            .collect()
                    },
                    failure: (i == 1).then(|| "blow-up".to_string()),
                })
                .collect(),
            slopes: vec![Some(1.0 / 3.0); 9],
            monotone: vec![true; 9],
            transport: TransportSummary {
                degree_cutoff: 4,
                sphere_rule: SphereRule::Lebedev26,
                mu: 0.1,
                kappa: 0.2,
                sigma: 0.3,
                sigma_collision_integral: 0.01,
                mu_one_fifteenth: 0.07,
                max_residual: 1e-15,
                delta_l1: 2.0,
                delta_l2: 1.0,
            },
            run_config_hash: "a".into(),
            fluid_config_hash: "b".into(),
        }
    }

    #[test]
    fn csv_column_count() {
        for eps in [vec![], vec![0.5], vec![0.5, 0.25, 0.125]] {
            let r = report(&eps, 3);
            let csv = sweep_csv(&r);
            let lines: Vec<&str> = csv.lines().collect();
            assert_eq!(lines.len(), 4);
            for l in lines {
                assert_eq!(l.split(',').count(), 1 + eps.len() * TRACKED.len());
            }
        }
    }

    #[test]
    fn empty_sweep_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(&[], 0);
        let paths = emit_report(&r, dir.path()).unwrap();
        assert_eq!(fs::read_to_string(&paths.csv).unwrap(), "t\n");
        assert_eq!(read_report(&paths.json).unwrap(), r);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(&[0.5, 0.25, 0.125], 4);
        let paths = emit_report(&r, &dir.path().join("sub")).unwrap();
        assert_eq!(read_report(&paths.json).unwrap(), r);
        let digest = fs::read_to_string(&paths.digest).unwrap();
        assert!(digest.contains("FAILED: blow-up"));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_report(&report(&[0.5], 1), &blocker.join("out")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }
}
