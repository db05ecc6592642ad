//! Incoherence diagnostics of singular subspaces.

use serde::{Deserialize, Serialize};

use crate::linalg::{max_abs, two_to_inf, DenseMatrix, SvdFactors};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu_u: f64,
    pub mu_v: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub r: usize,
    pub u_inf: f64,
    pub v_inf: f64,
    pub u_2inf: f64,
    pub v_2inf: f64,
}

/// `(rows/r)·max_i ‖e_iᵀQ‖²` for a matrix with `r` orthonormal columns.
pub fn subspace_coherence(q: &DenseMatrix) -> f64 {
    let r = q.ncols() as f64;
    let row = two_to_inf(q);
    q.nrows() as f64 / r * row * row
}

/// Diagnostics on the leading `r` columns of `f`.
pub fn coherence(f: &SvdFactors, r: usize) -> Result<CoherenceReport> {
    if r == 0 {
        return Err(Error::Argument("coherence needs r ≥ 1".into()));
    }
    if r > f.k() {
        return Err(Error::Argument(format!("r = {r} exceeds {} available columns", f.k())));
    }
    let u = f.u.columns(0, r).into_owned();
    let v = f.v.columns(0, r).into_owned();
    Ok(coherence_of(&u, &v))
}

pub fn coherence_of(u: &DenseMatrix, v: &DenseMatrix) -> CoherenceReport {
    let r = u.ncols();
    let (m, n) = (u.nrows() as f64, v.nrows() as f64);
    let mu_u = subspace_coherence(u);
    let mu_v = subspace_coherence(v);
    let uv = u * v.transpose();
    let mu1 = (m * n).sqrt() / (r as f64).sqrt() * max_abs(&uv);
    CoherenceReport {
        mu_u,
        mu_v,
        mu0: mu_u.max(mu_v),
        mu1,
        r,
        u_inf: max_abs(u),
        v_inf: max_abs(v),
        u_2inf: two_to_inf(u),
        v_2inf: two_to_inf(v),
    }
}
