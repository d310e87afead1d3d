//! Named polynomial moments and the thirteen-moment subspace.

use super::basis::HermiteBasis;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentVectors {
    pub one: Vec<f64>,
    pub v: [Vec<f64>; 3],
    pub v_sq: Vec<f64>,
    /// `|v|^2/2 - 3/2`
    pub psi: Vec<f64>,
    /// `|v|^2/3 - 1`
    pub temp: Vec<f64>,
    /// `A_ij = v_i v_j - |v|^2 delta_ij / 3`
    pub a: [[Vec<f64>; 3]; 3],
    /// `B_i = (|v|^2/2 - 5/2) v_i`
    pub b: [Vec<f64>; 3],
    /// Orthonormal basis of span{1, v_i, v_i^2, v_i|v|^2, v_i v_j}.
    pub thirteen: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&w, &w).sqrt();
        if n > 1e-10 {
            w.iter_mut().for_each(|x| *x /= n);
            out.push(w);
        }
    }
    out
}

pub fn thirteen_moments(basis: &HermiteBasis) -> Result<MomentVectors> {
    if basis.degree_cutoff < 3 {
        return Err(Error::InvalidParameter(format!(
            "thirteen moments need a degree cutoff of at least 3, got {}",
            basis.degree_cutoff
        )));
    }
    let sq = |v: &[f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let one = basis.project(|_| 1.0);
    let v: [Vec<f64>; 3] = std::array::from_fn(|i| basis.project(|x| x[i]));
    let v_sq = basis.project(sq);
    let psi = basis.project(|x| sq(x) / 2.0 - 1.5);
    let temp = basis.project(|x| sq(x) / 3.0 - 1.0);
    let a = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            basis.project(|x| x[i] * x[j] - if i == j { sq(x) / 3.0 } else { 0.0 })
        })
    });
    let b = std::array::from_fn(|i| basis.project(|x| (sq(x) / 2.0 - 2.5) * x[i]));

    let mut raw = vec![one.clone()];
    raw.extend(v.iter().cloned());
    for i in 0..3 {
        raw.push(basis.project(|x| x[i] * x[i]));
    }
    for i in 0..3 {
        raw.push(basis.project(|x| x[i] * sq(x)));
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        raw.push(basis.project(|x| x[i] * x[j]));
    }
    let thirteen = orthonormalize(&raw);
    debug_assert_eq!(thirteen.len(), 13);

    Ok(MomentVectors {
        one,
        v,
        v_sq,
        psi,
        temp,
        a,
        b,
        thirteen,
    })
}

impl MomentVectors {
    /// Orthogonal projection onto the thirteen-moment span.
    pub fn project_thirteen(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for q in &self.thirteen {
            let c = dot(f, q);
            out.iter_mut().zip(q).for_each(|(o, y)| *o += c * y);
        }
        out
    }
}
