use std::collections::HashMap;

use super::geometry::{ContourSpec, DEFAULT_NODE_COUNT};
use super::partitions::enumerate_partitions;
use super::residue::integral_coefficient_residue;
use super::resolvent::resolvent_terms;
use crate::linalg::{build_symmetrized_system, symmetrize, DenseMatrix, SymmetrizedSystem};
use crate::problem::{validate_subset, GroundTruth};
use crate::{Error, Result};

/// Brute force sums over `[2r]^β`, so rank and order stay tiny.
pub const MAX_EXPANSION_RANK: usize = 2;
pub const MAX_EXPANSION_GAMMA: usize = 4;

#[derive(Clone, Debug)]
pub struct ExpansionCheck {
    /// `T_ν^{(γ)}` assembled from partitions, index tuples and residues.
    pub brute: DenseMatrix,
    /// The same term by contour quadrature of the resolvent product.
    pub direct: DenseMatrix,
    /// `‖brute − direct‖_F / ‖direct‖_F`, or the absolute difference when
    /// the direct term vanishes.
    pub residual: f64,
}

fn mat_pow(x: &DenseMatrix, k: usize) -> DenseMatrix {
    (0..k).fold(DenseMatrix::identity(x.nrows(), x.ncols()), |acc, _| acc * x)
}

/// `M(𝐢) = P_{i_1} Π_{j≥2} sym(E) P_{i_j}`.
fn monomial(sys: &SymmetrizedSystem, se: &DenseMatrix, block: &[usize]) -> DenseMatrix {
    let mut out = sys.projector(block[0]);
    for &i in &block[1..] {
        out = out * se * sys.projector(i);
    }
    out
}

/// Next tuple in `[base]^len`, odometer order; false after the last.
fn advance(idx: &mut [usize], base: usize) -> bool {
    for x in idx.iter_mut().rev() {
        *x += 1;
        if *x < base {
            return true;
        }
        *x = 0;
    }
    false
}

/// Compares the `γ`-th expansion term assembled term by term,
/// `Σ_h Σ_{(α,β)∈Π_h(γ)} Σ_𝐈 C_ν(𝐈)·sym(E)^{α_0} M(𝐢_1) sym(E)^{α_1+1} ⋯
/// M(𝐢_h) sym(E)^{α_h}`, against the contour integral of
/// `z^ν [R(z) sym(E)]^γ R(z)`.
pub fn expansion_consistency_check(
    gt: &GroundTruth,
    e: &DenseMatrix,
    s: &[usize],
    nu: u32,
    gamma: usize,
) -> Result<ExpansionCheck> {
    let r = gt.r;
    if r > MAX_EXPANSION_RANK {
        return Err(Error::Argument(format!("rank {r} above brute-force cap {MAX_EXPANSION_RANK}")));
    }
    if gamma == 0 || gamma > MAX_EXPANSION_GAMMA {
        return Err(Error::Argument(format!("gamma must be in 1..={MAX_EXPANSION_GAMMA}, got {gamma}")));
    }
    if gt.factors.rank != r {
        return Err(Error::Rank { requested: r, rank: gt.factors.rank });
    }
    validate_subset(s, r)?;
    let sys = build_symmetrized_system(&gt.factors, r)?;
    let se = symmetrize(e);
    let sigma = gt.sigma();
    let d = sys.dim();

    let mut coef: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut brute = DenseMatrix::zeros(d, d);
    for h in 1..=gamma / 2 + 1 {
        for part in enumerate_partitions(gamma, h) {
            let beta = part.beta_total();
            let mut idx = vec![0usize; beta];
            loop {
                let c = match coef.get(&idx) {
                    Some(&c) => c,
                    None => {
                        let c = integral_coefficient_residue(&idx, sigma, s, nu, gamma)?;
                        coef.insert(idx.clone(), c);
                        c
                    }
                };
                if c != 0.0 {
                    let mut term = mat_pow(&se, part.alpha[0]);
                    let mut start = 0;
                    for k in 0..h {
                        let block = &idx[start..start + part.beta[k]];
                        start += part.beta[k];
                        term *= monomial(&sys, &se, block);
                        let gap = if k + 1 < h { part.alpha[k + 1] + 1 } else { part.alpha[h] };
                        term *= mat_pow(&se, gap);
                    }
                    brute += term * c;
                }
                if !advance(&mut idx, 2 * r) {
                    break;
                }
            }
        }
    }

    let contour = ContourSpec::for_spectrum(sigma, s, DEFAULT_NODE_COUNT)?;
    let direct = resolvent_terms(&sys, e, nu, gamma, &contour)?.terms.swap_remove(gamma);
    let diff = (&brute - &direct).norm();
    let scale = direct.norm();
    let residual = if scale > 0.0 { diff / scale } else { diff };
    Ok(ExpansionCheck { brute, direct, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ground_truth_from_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(m: usize, n: usize, scale: f64, seed: u64) -> DenseMatrix {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(m, n, |_, _| scale * g.gen_range(-1.0..1.0))
    }

    #[test]
    fn rank_one_first_order() {
        let a = DenseMatrix::from_fn(4, 3, |i, j| 2.0 * (i as f64 + 1.0) * (3.0 - j as f64));
        let gt = ground_truth_from_matrix(a, 1, 1.0).unwrap();
        let e = noise(4, 3, 0.5, 1);
        for nu in 0..2 {
            let c = expansion_consistency_check(&gt, &e, &[0], nu, 1).unwrap();
            assert!(c.residual < 1e-9, "nu={nu}: {}", c.residual);
        }
    }

    #[test]
    fn rank_two_third_order() {
        let mut g = ChaCha8Rng::seed_from_u64(9);
        let x = DenseMatrix::from_fn(8, 2, |_, _| g.gen_range(-2.0..2.0));
        let y = DenseMatrix::from_fn(8, 2, |_, _| g.gen_range(-2.0..2.0));
        let gt = ground_truth_from_matrix(&x * y.transpose(), 2, 1.0).unwrap();
        let e = noise(8, 8, 0.2, 2);
        for (s, nu) in [(vec![0], 0), (vec![1], 0), (vec![0], 1), (vec![0, 1], 1)] {
            let c = expansion_consistency_check(&gt, &e, &s, nu, 3).unwrap();
            assert!(c.residual < 1e-7, "S={s:?} nu={nu}: {}", c.residual);
            assert!(c.direct.norm() > 0.0);
        }
    }

    #[test]
    fn zero_perturbation() {
        let a = DenseMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let gt = ground_truth_from_matrix(a, 2, 1.0).unwrap();
        let c = expansion_consistency_check(&gt, &DenseMatrix::zeros(2, 2), &[0], 0, 2).unwrap();
        assert_eq!(c.brute.norm(), 0.0);
        assert_eq!(c.direct.norm(), 0.0);
        assert_eq!(c.residual, 0.0);
    }

    #[test]
    fn caps() {
        let a = DenseMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let gt = ground_truth_from_matrix(a.clone(), 3, 1.0).unwrap();
        assert!(expansion_consistency_check(&gt, &DenseMatrix::zeros(3, 3), &[0], 0, 1).is_err());
        let gt = ground_truth_from_matrix(a, 2, 1.0).unwrap();
        assert!(expansion_consistency_check(&gt, &DenseMatrix::zeros(3, 3), &[0], 0, 5).is_err());
        assert!(matches!(
            expansion_consistency_check(&gt, &DenseMatrix::zeros(3, 3), &[0], 0, 1),
            Err(Error::Rank { .. })
        ));
    }
}
