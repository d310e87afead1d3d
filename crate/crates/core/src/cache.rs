//! Versioned binary files: cached collision operators and solver checkpoints.
//!
//! Layout: 4-byte magic, `u32` version, `u32` header length, a JSON header,
//! little-endian payload, then the SHA-256 of everything before it.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::collision::{assemble_l, assemble_q, CollisionConfig, CollisionOperators};
use crate::error::{Error, Result};
use crate::fluid::FluidState;
use crate::kinetic::KineticState;
use crate::spectral::Torus;
use crate::velocity::quadrature::SphereRule;
use crate::velocity::HermiteBasis;

pub const FORMAT_VERSION: u32 = 1;
const OPS_MAGIC: &[u8; 4] = b"VPBO";
const KINETIC_MAGIC: &[u8; 4] = b"VPBK";
const FLUID_MAGIC: &[u8; 4] = b"VPBF";

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn seal(magic: &[u8; 4], header: &impl Serialize, payload: &[u8]) -> Vec<u8> {
    let header = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(payload.len() + header.len() + 44);
    out.extend_from_slice(magic);
    out.write_u32::<LittleEndian>(FORMAT_VERSION).unwrap();
    out.write_u32::<LittleEndian>(header.len() as u32).unwrap();
    out.extend_from_slice(&header);
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn unseal<H: for<'de> Deserialize<'de>>(
    path: &Path,
    magic: &[u8; 4],
    bytes: &[u8],
) -> Result<(H, Vec<u8>)> {
    if bytes.len() < 12 + 32 {
        return Err(format_err(path, "file is truncated"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(format_err(path, "checksum mismatch"));
    }
    if &body[..4] != magic {
        return Err(format_err(path, "wrong file type"));
    }
    let mut cur = Cursor::new(&body[4..]);
    let version = cur.read_u32::<LittleEndian>().unwrap();
    if version != FORMAT_VERSION {
        return Err(format_err(
            path,
            format!("unsupported version {version} (expected {FORMAT_VERSION})"),
        ));
    }
    let hlen = cur.read_u32::<LittleEndian>().unwrap() as usize;
    let start = 12;
    if body.len() < start + hlen {
        return Err(format_err(path, "header is truncated"));
    }
    let header = serde_json::from_slice(&body[start..start + hlen])
        .map_err(|e| format_err(path, format!("bad header: {e}")))?;
    Ok((header, body[start + hlen..].to_vec()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    // Write then rename so readers never see a partial file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for &x in xs {
        out.write_f64::<LittleEndian>(x).unwrap();
    }
}

fn put_complex(out: &mut Vec<u8>, xs: &[Complex64]) {
    for c in xs {
        out.write_f64::<LittleEndian>(c.re).unwrap();
        out.write_f64::<LittleEndian>(c.im).unwrap();
    }
}

struct Reader<'a> {
    path: &'a Path,
    cur: Cursor<Vec<u8>>,
}

impl Reader<'_> {
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut v = vec![0.0; n];
        self.cur
            .read_f64_into::<LittleEndian>(&mut v)
            .map_err(|_| format_err(self.path, "payload is truncated"))?;
        Ok(v)
    }

    fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        let raw = self.f64s(2 * n)?;
        Ok(raw.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
    }

    fn matrix(&mut self, n: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_column_slice(n, n, &self.f64s(n * n)?))
    }

    fn finish(mut self) -> Result<()> {
        let mut rest = Vec::new();
        self.cur.read_to_end(&mut rest).unwrap();
        if rest.is_empty() {
            Ok(())
        } else {
            Err(format_err(self.path, "trailing bytes in payload"))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OpsHeader {
    degree_cutoff: usize,
    dim: usize,
    sphere_rule: SphereRule,
    cross_section: f64,
    kernel_threshold: f64,
    has_tensor: bool,
}

pub fn write_operators(path: &Path, ops: &CollisionOperators) -> Result<()> {
    let header = OpsHeader {
        degree_cutoff: ops.degree_cutoff,
        dim: ops.dim,
        sphere_rule: ops.sphere_rule,
        cross_section: ops.cross_section,
        kernel_threshold: ops.kernel_threshold,
        has_tensor: ops.has_tensor(),
    };
    let mut payload = Vec::new();
    for m in [&ops.l1, &ops.l2, &ops.l1_cross, &ops.nu_gram] {
        put_f64s(&mut payload, m.as_slice());
    }
    if let Some(bt) = &ops.b_tensor {
        put_f64s(&mut payload, bt);
    }
    write_file(path, &seal(OPS_MAGIC, &header, &payload))
}

pub fn read_operators(path: &Path) -> Result<CollisionOperators> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, payload): (OpsHeader, _) = unseal(path, OPS_MAGIC, &bytes)?;
    let dim = h.dim;
    let mut r = Reader {
        path,
        cur: Cursor::new(payload),
    };
    let l1 = r.matrix(dim)?;
    let l2 = r.matrix(dim)?;
    let l1_cross = r.matrix(dim)?;
    let nu_gram = r.matrix(dim)?;
    let (b_tensor, q_tensor) = if h.has_tensor {
        let bt = r.f64s(dim * dim * dim)?;
        let mut q = vec![0.0; bt.len()];
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    q[(k * dim + i) * dim + j] =
                        bt[(k * dim + i) * dim + j] + bt[(k * dim + j) * dim + i];
                }
            }
        }
        (Some(bt), Some(q))
    } else {
        (None, None)
    };
    r.finish()?;
    Ok(CollisionOperators {
        degree_cutoff: h.degree_cutoff,
        dim,
        b_tensor,
        q_tensor,
        l1,
        l2,
        l1_cross,
        nu_gram,
        sphere_rule: h.sphere_rule,
        cross_section: h.cross_section,
        kernel_threshold: h.kernel_threshold,
    })
}

/// Cache file for one assembly request.
pub fn operator_cache_path(
    dir: &Path,
    degree_cutoff: usize,
    quad_order: usize,
    cfg: &CollisionConfig,
    full: bool,
) -> PathBuf {
    let key = serde_json::to_vec(cfg).expect("config serializes");
    let hash = Sha256::digest(&key);
    let tag: String = hash[..4].iter().map(|b| format!("{b:02x}")).collect();
    let kind = if full { "full" } else { "linear" };
    dir.join(format!(
        "ops_K{degree_cutoff}_Q{quad_order}_{kind}_{tag}.bin"
    ))
}

/// Assemble operators, reusing a cached copy when one exists.
///
/// A corrupt or stale cache file is rebuilt rather than trusted.
pub fn load_or_assemble(
    cache_dir: Option<&Path>,
    basis: &HermiteBasis,
    cfg: &CollisionConfig,
    full: bool,
) -> Result<CollisionOperators> {
    let assemble = || {
        if full {
            assemble_q(basis, cfg)
        } else {
            assemble_l(basis, cfg)
        }
    };
    let Some(dir) = cache_dir else {
        return assemble();
    };
    let path = operator_cache_path(dir, basis.degree_cutoff, basis.quad_order, cfg, full);
    if path.exists() {
        match read_operators(&path) {
            Ok(ops) if ops.dim == basis.dim() && ops.has_tensor() == full => return Ok(ops),
            Ok(_) | Err(Error::Format { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let ops = assemble()?;
    write_operators(&path, &ops)?;
    Ok(ops)
}

#[derive(Debug, Serialize, Deserialize)]
struct StateHeader {
    t: f64,
    epsilon: f64,
    dims: usize,
    modes: [usize; 2],
    length: [f64; 2],
    dim: usize,
}

fn torus_from(path: &Path, dims: usize, modes: [usize; 2], length: [f64; 2]) -> Result<Torus> {
    let t = Torus::new(dims, modes[0], length[0])
        .map_err(|e| format_err(path, format!("bad torus: {e}")))?;
    if t.modes != modes || t.length != length {
        return Err(format_err(path, "torus shape does not round-trip"));
    }
    Ok(t)
}

pub fn write_kinetic_checkpoint(path: &Path, s: &KineticState) -> Result<()> {
    let header = StateHeader {
        t: s.t,
        epsilon: s.epsilon,
        dims: s.torus.dims,
        modes: s.torus.modes,
        length: s.torus.length,
        dim: s.dim,
    };
    let mut payload = Vec::new();
    put_complex(&mut payload, &s.f);
    put_complex(&mut payload, &s.g);
    put_complex(&mut payload, &s.phi);
    write_file(path, &seal(KINETIC_MAGIC, &header, &payload))
}

pub fn read_kinetic_checkpoint(path: &Path) -> Result<KineticState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, payload): (StateHeader, _) = unseal(path, KINETIC_MAGIC, &bytes)?;
    let torus = torus_from(path, h.dims, h.modes, h.length)?;
    let n = torus.len();
    let mut r = Reader {
        path,
        cur: Cursor::new(payload),
    };
    let f = r.complex(n * h.dim)?;
    let g = r.complex(n * h.dim)?;
    let phi = r.complex(n)?;
    r.finish()?;
    Ok(KineticState {
        t: h.t,
        epsilon: h.epsilon,
        torus,
        dim: h.dim,
        f,
        g,
        phi,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct FluidHeader {
    t: f64,
    dims: usize,
    modes: [usize; 2],
    length: [f64; 2],
    /// Field order in the payload.
    fields: Vec<String>,
}

const FLUID_FIELDS: [&str; 12] = [
    "rho", "u1", "u2", "u3", "theta", "n", "phi", "j1", "j2", "j3", "w", "",
];

pub fn write_fluid_snapshot(path: &Path, s: &FluidState) -> Result<()> {
    let header = FluidHeader {
        t: s.t,
        dims: s.torus.dims,
        modes: s.torus.modes,
        length: s.torus.length,
        fields: FLUID_FIELDS[..11].iter().map(|s| s.to_string()).collect(),
    };
    let mut payload = Vec::new();
    for f in [
        &s.rho, &s.u[0], &s.u[1], &s.u[2], &s.theta, &s.n, &s.phi, &s.j[0], &s.j[1], &s.j[2], &s.w,
    ] {
        put_complex(&mut payload, f);
    }
    write_file(path, &seal(FLUID_MAGIC, &header, &payload))
}

pub fn read_fluid_snapshot(path: &Path) -> Result<FluidState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (h, payload): (FluidHeader, _) = unseal(path, FLUID_MAGIC, &bytes)?;
    if h.fields.len() != 11 || h.fields.iter().zip(FLUID_FIELDS).any(|(a, b)| a != b) {
        return Err(format_err(path, "unexpected field list"));
    }
    let torus = torus_from(path, h.dims, h.modes, h.length)?;
    let n = torus.len();
    let mut r = Reader {
        path,
        cur: Cursor::new(payload),
    };
    let mut next = || r.complex(n);
    let rho = next()?;
    let u = [next()?, next()?, next()?];
    let theta = next()?;
    let nf = next()?;
    let phi = next()?;
    let j = [next()?, next()?, next()?];
    let w = next()?;
    r.finish()?;
    Ok(FluidState {
        t: h.t,
        torus,
        rho,
        u,
        theta,
        n: nf,
        phi,
        j,
        w,
    })
}
