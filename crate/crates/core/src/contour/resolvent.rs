use num_complex::Complex64;
use rayon::prelude::*;

use super::geometry::ContourSpec;
use crate::linalg::{DenseMatrix, SymmetrizedSystem};
use crate::{Error, Result};

/// Relative change allowed between the `n`- and `2n`-node estimates.
const DOUBLING_TOL: f64 = 1e-9;
const MAX_NODES: usize = 1 << 15;
const CHUNK: usize = 16;

/// Contour terms `∮ z^ν [R(z) sym(E)]^γ R(z) dz/(2πi)` for `γ = 0..=γ_max`,
/// where `R(z) = (zI − sym(A))⁻¹`.
#[derive(Clone, Debug)]
pub struct ResolventTerms {
    /// `terms[γ]`, each `(m+n) × (m+n)`.
    pub terms: Vec<DenseMatrix>,
    /// Nodes per circle in the accepted estimate.
    pub nodes_used: usize,
    /// Largest relative change seen in the final doubling step.
    pub doubling_change: f64,
}

struct Engine<'a> {
    sys: &'a SymmetrizedSystem,
    e: &'a DenseMatrix,
    et: DenseMatrix,
    wt: DenseMatrix,
    nu: u32,
    gamma_max: usize,
}

/// Running sums `Σ mult·Re((z−c) z^ν Y_γ(z))` and the per-γ peak of
/// `|(z−c) z^ν|·‖Y_γ(z)‖_F`.
struct Acc {
    sums: Vec<DenseMatrix>,
    peaks: Vec<f64>,
}

impl Acc {
    fn zeros(d: usize, len: usize) -> Acc {
        Acc { sums: vec![DenseMatrix::zeros(d, d); len], peaks: vec![0.0; len] }
    }

    fn add(&mut self, other: &Acc) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.peaks.iter_mut().zip(&other.peaks) {
            *a = a.max(*b);
        }
    }
}

impl Engine<'_> {
    /// `sym(E)·Y` using the block form `[E Y_bot; Eᵀ Y_top]`.
    fn apply_sym_e(&self, y: &DenseMatrix) -> DenseMatrix {
        let (m, n) = (self.sys.m, self.sys.n);
        let d = m + n;
        let mut out = DenseMatrix::zeros(d, y.ncols());
        out.rows_mut(0, m).copy_from(&(self.e * y.rows(m, n)));
        out.rows_mut(m, n).copy_from(&(&self.et * y.rows(0, m)));
        out
    }

    fn node(&self, z: Complex64, center: f64, mult: f64, acc: &mut Acc) {
        let d = self.sys.dim();
        let w = &self.sys.w;
        let inv = 1.0 / z;
        // R(z) = I/z + W diag(λ_i/(z(z−λ_i))) Wᵀ
        let diag: Vec<Complex64> = self.sys.lambda.iter().map(|&l| l * inv / (z - l)).collect();
        let scale_rows = |b: &DenseMatrix, f: fn(&Complex64) -> f64| {
            let mut out = b.clone();
            for (i, c) in diag.iter().enumerate() {
                out.row_mut(i).scale_mut(f(c));
            }
            out
        };
        let weight = (z - center) * z.powu(self.nu);

        let mut yr = scale_rows(&self.wt, |c| c.re);
        let mut yi = scale_rows(&self.wt, |c| c.im);
        yr = w * yr;
        yi = w * yi;
        for k in 0..d {
            yr[(k, k)] += inv.re;
            yi[(k, k)] += inv.im;
        }
        for gamma in 0..=self.gamma_max {
            if gamma > 0 {
                let zr = self.apply_sym_e(&yr);
                let zi = self.apply_sym_e(&yi);
                let br = &self.wt * &zr;
                let bi = &self.wt * &zi;
                let cr = scale_rows(&br, |c| c.re) - scale_rows(&bi, |c| c.im);
                let ci = scale_rows(&bi, |c| c.re) + scale_rows(&br, |c| c.im);
                yr = &zr * inv.re - &zi * inv.im + w * cr;
                yi = &zi * inv.re + &zr * inv.im + w * ci;
            }
            let sum = &mut acc.sums[gamma];
            sum.zip_zip_apply(&yr, &yi, |s, a, b| *s += mult * (weight.re * a - weight.im * b));
            let norm = (yr.norm_squared() + yi.norm_squared()).sqrt() * weight.norm();
            acc.peaks[gamma] = acc.peaks[gamma].max(norm);
        }
    }

    /// Sums over `(circle, z, mult)` nodes in fixed chunks, combined in order.
    fn sweep(&self, spec: &ContourSpec, nodes: &[(usize, Complex64, f64)]) -> Acc {
        let len = self.gamma_max + 1;
        let d = self.sys.dim();
        let parts: Vec<Acc> = nodes
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = Acc::zeros(d, len);
                for &(c, z, mult) in chunk {
                    self.node(z, spec.circles[c].center, mult, &mut acc);
                }
                acc
            })
            .collect();
        let mut total = Acc::zeros(d, len);
        for p in &parts {
            total.add(p);
        }
        total
    }
}

/// Nodes `k` of the `n`-point rule with `k ≡ offset (mod stride)` in the
/// closed upper half circle. Off-axis nodes carry weight 2 for their
/// conjugate partner; the integrand satisfies `f(z̄) = conj f(z)`.
fn upper_nodes(spec: &ContourSpec, n: usize, offset: usize, stride: usize) -> Vec<(usize, Complex64, f64)> {
    let mut out = Vec::new();
    for (ci, c) in spec.circles.iter().enumerate() {
        for k in (offset..=n / 2).step_by(stride) {
            let mult = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            out.push((ci, c.node(k, n), mult));
        }
    }
    out
}

/// Expansion terms of the resolvent difference on `contour`, by the
/// trapezoid rule with node doubling until every term is stable to
/// `1e−9·max(‖T‖_F, 10⁻⁴·peak)`.
///
/// With `ν = 0` the terms for `γ ≥ 1` sum to the change in the spectral
/// projector; with `ν = 1` to the change in `sym(A_S)`. `terms[0]` is the
/// unperturbed projector (or `sym(A_S)`). `sys` must describe all of
/// `sym(A)`, so `rank(A) = r`.
pub fn resolvent_terms(
    sys: &SymmetrizedSystem,
    e: &DenseMatrix,
    nu: u32,
    gamma_max: usize,
    contour: &ContourSpec,
) -> Result<ResolventTerms> {
    if e.shape() != (sys.m, sys.n) {
        return Err(Error::Shape { expected: (sys.m, sys.n), got: e.shape() });
    }
    if nu > 1 {
        return Err(Error::Argument(format!("nu must be 0 or 1, got {nu}")));
    }
    let mut n = contour.node_count;
    if n % 2 == 1 {
        n += 1;
    }
    let engine = Engine { sys, e, et: e.transpose(), wt: sys.w.transpose(), nu, gamma_max };
    let mut raw = engine.sweep(contour, &upper_nodes(contour, n, 0, 1));
    loop {
        if 2 * n > MAX_NODES {
            return Err(Error::Contour(format!("resolvent terms not stable after {n} nodes per circle")));
        }
        let odd = engine.sweep(contour, &upper_nodes(contour, 2 * n, 1, 2));
        let mut change: f64 = 0.0;
        let mut next = Vec::with_capacity(gamma_max + 1);
        for g in 0..=gamma_max {
            let before = &raw.sums[g] / n as f64;
            let after = (&raw.sums[g] + &odd.sums[g]) / (2 * n) as f64;
            let scale = after.norm().max(1e-4 * raw.peaks[g].max(odd.peaks[g]));
            let diff = (&after - &before).norm();
            if diff > 0.0 {
                change = change.max(diff / scale);
            }
            next.push(after);
        }
        raw.add(&odd);
        n *= 2;
        if change <= DOUBLING_TOL {
            return Ok(ResolventTerms { terms: next, nodes_used: n, doubling_change: change });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{build_symmetrized_system, svd, symmetrize};

    fn system(a: &DenseMatrix, r: usize) -> SymmetrizedSystem {
        build_symmetrized_system(&svd(a).unwrap(), r).unwrap()
    }

    #[test]
    fn zeroth_term_is_projector_and_sym_a() {
        let a = DenseMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let sys = system(&a, 2);
        let spec = ContourSpec::for_spectrum(&[3.0, 1.0], &[0], 64).unwrap();
        let e = DenseMatrix::zeros(3, 2);
        let t0 = resolvent_terms(&sys, &e, 0, 2, &spec).unwrap();
        let p = sys.projector_sum(&sys.signed_indices(&[0]));
        assert!((&t0.terms[0] - &p).norm() < 1e-12);
        assert!(t0.terms[1].norm() == 0.0 && t0.terms[2].norm() == 0.0);
        let t1 = resolvent_terms(&sys, &e, 1, 0, &spec).unwrap();
        let a0 = DenseMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((&t1.terms[0] - symmetrize(&a0)).norm() < 1e-12);
    }

    #[test]
    fn first_order_matches_analytic_formula() {
        // First-order projector change is Σ_{i∈S, j∉S} (P_i sym(E) P_j +
        // P_j sym(E) P_i)/(λ_i − λ_j). Here S holds both ±σ_1, so the only
        // outside direction is the kernel, with λ_j = 0.
        let a = DenseMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let e = DenseMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.3, 0.0]);
        let sys = system(&a, 1);
        let spec = ContourSpec::for_spectrum(&[2.0], &[0], 128).unwrap();
        let t = resolvent_terms(&sys, &e, 0, 1, &spec).unwrap();
        let se = symmetrize(&e);
        let pin = sys.projector_sum(&[0, 1]);
        let mut expect = DenseMatrix::zeros(4, 4);
        let ker = DenseMatrix::identity(4, 4) - &pin;
        for i in 0..2 {
            let pi = sys.projector(i);
            let li = sys.lambda[i];
            expect += (&pi * &se * &ker + &ker * &se * &pi) / li;
        }
        assert!((&t.terms[1] - &expect).norm() < 1e-12, "{}", (&t.terms[1] - &expect).norm());
    }

    #[test]
    fn series_sums_to_exact_difference() {
        let a = DenseMatrix::from_row_slice(3, 3, &[5.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let e = DenseMatrix::from_row_slice(3, 3, &[0.1, -0.05, 0.02, 0.03, 0.04, -0.1, 0.05, 0.0, 0.07]);
        let sys = system(&a, 2);
        let at = &a + &e;
        let ft = svd(&at).unwrap();
        let spec = ContourSpec::for_perturbation(&[5.0, 2.0], &ft.sigma, &[0], 128).unwrap();
        let t = resolvent_terms(&sys, &e, 0, 25, &spec).unwrap();
        let sys_t = system(&at, 1);
        let exact = sys_t.projector_sum(&[0, 1]) - sys.projector_sum(&[0, 2]);
        let partial: DenseMatrix = t.terms[1..].iter().fold(DenseMatrix::zeros(6, 6), |acc, x| acc + x);
        assert!((&partial - &exact).norm() < 1e-10 * exact.norm());

        let t1 = resolvent_terms(&sys, &e, 1, 25, &spec).unwrap();
        let exact1 = symmetrize(&(ft.low_rank(1) - svd(&a).unwrap().low_rank(1)));
        let partial1: DenseMatrix = t1.terms[1..].iter().fold(DenseMatrix::zeros(6, 6), |acc, x| acc + x);
        assert!((&partial1 - &exact1).norm() < 1e-10 * exact1.norm());
    }

    #[test]
    fn shape_mismatch() {
        let a = DenseMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let sys = system(&a, 1);
        let spec = ContourSpec::for_spectrum(&[2.0, 1.0], &[0], 64).unwrap();
        assert!(resolvent_terms(&sys, &DenseMatrix::zeros(3, 2), 0, 1, &spec).is_err());
    }
}
