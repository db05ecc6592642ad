//! Dense primitives: SVD with a fixed sign convention, the four norms, grid
//! rounding and the symmetric dilation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense real matrix. Entries are expected to be finite; entry points that
/// care call [`ensure_finite`].
pub type DenseMatrix = DMatrix<f64>;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Iterations allowed per unit of `min(m, n)` in one SVD attempt. Typical
/// inputs need under two.
pub const SVD_ITER_PER_DIM: usize = 10;

pub fn ensure_finite(a: &DenseMatrix) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Builds a matrix from row-major data, rejecting non-finite values.
pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Argument("matrix dimensions must be positive".into()));
    }
    if data.len() != rows * cols {
        return Err(Error::Argument(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    let a = DenseMatrix::from_row_slice(rows, cols, data);
    ensure_finite(&a)?;
    Ok(a)
}

pub fn check_shape(a: &DenseMatrix, expected: (usize, usize)) -> Result<()> {
    if a.shape() != expected {
        return Err(Error::Shape {
            expected,
            got: a.shape(),
        });
    }
    Ok(())
}

/// Thin SVD `A = U diag(sigma) Vᵀ` with `k = min(m, n)` columns.
///
/// Columns are sorted by descending singular value. In each column of `U`
/// the entry of largest magnitude is positive (lowest row index on ties) and
/// the matching column of `V` is flipped along with it. Columns past
/// `rank` belong to numerically zero singular values.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    pub rank: usize,
}

impl SvdFactors {
    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SvdFactors {
        let k = k.min(self.k());
        SvdFactors {
            u: self.u.columns(0, k).into_owned(),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.columns(0, k).into_owned(),
            rank: self.rank.min(k),
        }
    }

    /// `Σ_{i<s} σ_i u_i v_iᵀ`.
    pub fn low_rank(&self, s: usize) -> DenseMatrix {
        self.subset_sum(&(0..s.min(self.k())).collect::<Vec<_>>())
    }

    /// `Σ_{i∈S} σ_i u_i v_iᵀ`.
    pub fn subset_sum(&self, idx: &[usize]) -> DenseMatrix {
        let mut us = self.select_u(idx);
        for (c, &i) in idx.iter().enumerate() {
            us.column_mut(c).scale_mut(self.sigma[i]);
        }
        us * self.select_v(idx).transpose()
    }

    pub fn select_u(&self, idx: &[usize]) -> DenseMatrix {
        self.u.select_columns(idx)
    }

    pub fn select_v(&self, idx: &[usize]) -> DenseMatrix {
        self.v.select_columns(idx)
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.low_rank(self.k())
    }
}

/// Number of singular values at or above `RANK_TOL * sigma[0]`.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    match sigma.first() {
        Some(&s1) if s1 > 0.0 => sigma.iter().take_while(|&&s| s >= RANK_TOL * s1).count(),
        _ => 0,
    }
}

fn max_iter(a: &DenseMatrix) -> usize {
    SVD_ITER_PER_DIM * a.nrows().min(a.ncols()).max(1)
}

/// Runs the implicit-shift SVD on `a`, then on `aᵀ` if the first attempt
/// stalls. The QR sweep can fail to deflate the exact zeros of a rank
/// deficient integer matrix in one orientation and not the other.
fn decompose(a: &DenseMatrix, vectors: bool) -> Result<(Option<DenseMatrix>, Vec<f64>, Option<DenseMatrix>)> {
    let max_iter = max_iter(a);
    if let Some(d) = a.clone().try_svd(vectors, vectors, f64::EPSILON, max_iter) {
        let v = d.v_t.map(|vt| vt.transpose());
        return Ok((d.u, d.singular_values.iter().copied().collect(), v));
    }
    let d = a
        .transpose()
        .try_svd(vectors, vectors, f64::EPSILON, max_iter)
        .ok_or(Error::SvdNoConvergence { max_iter })?;
    let u = d.v_t.map(|vt| vt.transpose());
    Ok((u, d.singular_values.iter().copied().collect(), d.u))
}

pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    ensure_finite(a)?;
    if a.is_empty() {
        return Err(Error::Argument("svd of an empty matrix".into()));
    }
    let (u, sigma, v) = decompose(a, true)?;
    let mut u = u.expect("u requested");
    let mut v = v.expect("v requested");
    for c in 0..sigma.len() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, x) in u.column(c).iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if u[(best, c)] < 0.0 {
            u.column_mut(c).neg_mut();
            v.column_mut(c).neg_mut();
        }
    }
    let rank = numerical_rank(&sigma);
    Ok(SvdFactors { u, sigma, v, rank })
}

pub fn truncated_svd(a: &DenseMatrix, k: usize) -> Result<SvdFactors> {
    let kmax = a.nrows().min(a.ncols());
    if k == 0 || k > kmax {
        return Err(Error::Argument(format!("truncation rank {k} outside 1..={kmax}")));
    }
    Ok(svd(a)?.truncate(k))
}

/// Singular values only, descending.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    ensure_finite(a)?;
    if a.is_empty() {
        return Ok(Vec::new());
    }
    Ok(decompose(a, false)?.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Operator,
    Frobenius,
    Infinity,
    TwoToInfinity,
}

pub fn norm(a: &DenseMatrix, kind: NormKind) -> Result<f64> {
    ensure_finite(a)?;
    Ok(match kind {
        NormKind::Operator => op_norm(a)?,
        NormKind::Frobenius => a.norm(),
        NormKind::Infinity => max_abs(a),
        NormKind::TwoToInfinity => two_to_inf(a),
    })
}

pub fn op_norm(a: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

pub fn max_abs(a: &DenseMatrix) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖P Qᵀ‖_op` from thin factors with equal column counts, as the largest
/// singular value of `R_P R_Qᵀ` after thin QR of each factor.
pub fn factored_op_norm(p: &DenseMatrix, q: &DenseMatrix) -> Result<f64> {
    if p.ncols() != q.ncols() {
        return Err(Error::Shape { expected: (q.nrows(), p.ncols()), got: q.shape() });
    }
    if p.ncols() == 0 {
        return Ok(0.0);
    }
    ensure_finite(p)?;
    ensure_finite(q)?;
    let rp = p.clone().qr().r();
    let rq = q.clone().qr().r();
    op_norm(&(rp * rq.transpose()))
}

pub fn two_to_inf(a: &DenseMatrix) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).norm())
        .fold(0.0, f64::max)
}

/// Nearest multiple of `eps0`; ties go away from zero.
pub fn round_to_grid(x: f64, eps0: f64) -> f64 {
    debug_assert!(eps0 > 0.0);
    let k = (x / eps0).round();
    // x/eps0 can land on the wrong side of a half-integer; pick the best
    // neighbour using the products actually produced.
    let mut best = k;
    let mut best_err = (x - k * eps0).abs();
    for cand in [k - 1.0, k + 1.0] {
        let err = (x - cand * eps0).abs();
        if err < best_err || (err == best_err && cand.abs() > best.abs()) {
            best = cand;
            best_err = err;
        }
    }
    // Adding 0.0 turns -0.0 into +0.0 so equal grid points compare bit-equal.
    best * eps0 + 0.0
}

pub fn round_matrix(a: &DenseMatrix, eps0: f64) -> DenseMatrix {
    a.map(|x| round_to_grid(x, eps0))
}

/// `[[0, A], [Aᵀ, 0]]`.
pub fn symmetrize(a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    let mut s = DenseMatrix::zeros(m + n, m + n);
    s.view_mut((0, m), (m, n)).copy_from(a);
    s.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    s
}

/// Leading `2r` eigenpairs of `sym(A)`: `λ_i = σ_i` with `w_i = (u_i, v_i)/√2`
/// and `λ_{i+r} = −σ_i` with `w_{i+r} = (u_i, −v_i)/√2`.
#[derive(Clone, Debug)]
pub struct SymmetrizedSystem {
    pub m: usize,
    pub n: usize,
    pub lambda: Vec<f64>,
    pub w: DenseMatrix,
}

impl SymmetrizedSystem {
    pub fn dim(&self) -> usize {
        self.m + self.n
    }

    pub fn r(&self) -> usize {
        self.lambda.len() / 2
    }

    /// `P_i = w_i w_iᵀ`.
    pub fn projector(&self, i: usize) -> DenseMatrix {
        let w = self.w.column(i);
        &w * w.transpose()
    }

    /// `Σ_{i∈idx} P_i` for indices in `[2r]`.
    pub fn projector_sum(&self, idx: &[usize]) -> DenseMatrix {
        let ws = self.w.select_columns(idx);
        &ws * ws.transpose()
    }

    /// Indices in `[2r]` whose eigenvalue is `±σ_i` for some `i ∈ S`.
    pub fn signed_indices(&self, s: &[usize]) -> Vec<usize> {
        let r = self.r();
        let mut idx: Vec<usize> = s.iter().copied().chain(s.iter().map(|&i| i + r)).collect();
        idx.sort_unstable();
        idx
    }
}

pub fn build_symmetrized_system(f: &SvdFactors, r: usize) -> Result<SymmetrizedSystem> {
    if r == 0 {
        return Err(Error::Argument("rank must be positive".into()));
    }
    let rank = numerical_rank(&f.sigma);
    if r > rank {
        return Err(Error::Rank { requested: r, rank });
    }
    let (m, n) = (f.u.nrows(), f.v.nrows());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut w = DenseMatrix::zeros(m + n, 2 * r);
    for i in 0..r {
        for a in 0..m {
            w[(a, i)] = h * f.u[(a, i)];
            w[(a, i + r)] = h * f.u[(a, i)];
        }
        for b in 0..n {
            w[(m + b, i)] = h * f.v[(b, i)];
            w[(m + b, i + r)] = -h * f.v[(b, i)];
        }
    }
    let mut lambda = f.sigma[..r].to_vec();
    lambda.extend(f.sigma[..r].iter().map(|s| -s));
    Ok(SymmetrizedSystem { m, n, lambda, w })
}
