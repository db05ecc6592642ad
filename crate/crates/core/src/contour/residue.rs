use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::{Error, Result};

/// Scalar field the residue computation runs over: `f64` with compensated
/// summation, or exact rationals.
pub trait Field: Clone + PartialEq + Debug + Signed {
    fn from_i64(v: i64) -> Self;
    fn sum_all(terms: Vec<Self>) -> Self;
}

impl Field for f64 {
    fn from_i64(v: i64) -> f64 {
        v as f64
    }

    fn sum_all(terms: Vec<f64>) -> f64 {
        // Neumaier's variant of Kahan summation.
        let mut sum = 0.0;
        let mut comp = 0.0;
        for x in terms {
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }
}

impl Field for BigRational {
    fn from_i64(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    fn sum_all(terms: Vec<BigRational>) -> BigRational {
        terms.into_iter().fold(BigRational::zero(), |a, b| a + b)
    }
}

fn powi<T: Field>(x: &T, e: i64) -> T {
    let mut base = x.clone();
    let mut k = e.unsigned_abs();
    let mut acc = T::one();
    while k > 0 {
        if k & 1 == 1 {
            acc = acc * base.clone();
        }
        base = base.clone() * base;
        k >>= 1;
    }
    if e < 0 {
        T::one() / acc
    } else {
        acc
    }
}

/// Taylor coefficients of `(c + t)^e` in `t`, degrees `0..=d`.
fn binomial_series<T: Field>(c: &T, e: i64, d: usize) -> Vec<T> {
    let inv = T::one() / c.clone();
    let mut coef = powi(c, e);
    let mut out = Vec::with_capacity(d + 1);
    out.push(coef.clone());
    for j in 1..=d as i64 {
        coef = coef * T::from_i64(e - j + 1) / T::from_i64(j) * inv.clone();
        out.push(coef.clone());
    }
    out
}

fn mul_truncated<T: Field>(a: &[T], b: &[T]) -> Vec<T> {
    (0..a.len())
        .map(|k| T::sum_all((0..=k).map(|i| a[i].clone() * b[k - i].clone()).collect()))
        .collect()
}

/// `λ_i` for a signed index `i ∈ [2r]`: `σ_i` for `i < r`, `−σ_{i−r}` otherwise.
pub fn signed_value<T: Field>(sigma: &[T], i: usize) -> T {
    let r = sigma.len();
    if i < r {
        sigma[i].clone()
    } else {
        -sigma[i - r].clone()
    }
}

/// `∮ z^ν z^{−(γ+1)} Π_k λ_{i_k}/(z − λ_{i_k}) dz/(2πi)` over a contour
/// enclosing exactly `±σ_i, i ∈ S`, as a sum of residues.
///
/// Poles of order `q` at `a` contribute the coefficient of `t^{q−1}` in the
/// expansion of the remaining factors around `a`.
pub fn integral_coefficient_residue<T: Field>(
    indices: &[usize],
    sigma: &[T],
    s: &[usize],
    nu: u32,
    gamma: usize,
) -> Result<T> {
    let r = sigma.len();
    if indices.is_empty() {
        return Err(Error::Argument("index sequence is empty".into()));
    }
    if gamma + 1 < indices.len() {
        return Err(Error::Argument(format!("gamma + 1 = {} below sequence length {}", gamma + 1, indices.len())));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= 2 * r) {
        return Err(Error::Argument(format!("index {i} outside 0..{}", 2 * r)));
    }
    if sigma.iter().any(|x| !x.is_positive()) {
        return Err(Error::Argument("singular values must be positive".into()));
    }
    crate::problem::validate_subset(s, r)?;

    // (value, multiplicity, inside)
    let mut poles: Vec<(T, i64, bool)> = Vec::new();
    for &i in indices {
        let v = signed_value(sigma, i);
        let inside = s.contains(&(i % r));
        match poles.iter_mut().find(|p| p.0 == v) {
            Some(p) if p.2 != inside => {
                return Err(Error::Degenerate(format!("pole at {v:?} is shared by S and its complement")));
            }
            Some(p) => p.1 += 1,
            None => poles.push((v, 1, inside)),
        }
    }
    let zpow = nu as i64 - gamma as i64 - 1;
    let mut residues = Vec::new();
    for (a, q, inside) in &poles {
        if !inside {
            continue;
        }
        let d = (*q - 1) as usize;
        let mut series = binomial_series(a, zpow, d);
        for (b, nb, _) in &poles {
            if b == a {
                continue;
            }
            series = mul_truncated(&series, &binomial_series(&(a.clone() - b.clone()), -nb, d));
        }
        residues.push(series[d].clone());
    }
    if residues.is_empty() {
        return Ok(T::zero());
    }
    let prefactor = indices.iter().fold(T::one(), |acc, &i| acc * signed_value(sigma, i));
    Ok(prefactor * T::sum_all(residues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn simple_pole_is_one_over_lambda() {
        let c: f64 = integral_coefficient_residue(&[0], &[2.5], &[0], 0, 1).unwrap();
        assert!((c - 0.4).abs() < 1e-15);
        let c = integral_coefficient_residue(&[0], &[rat(5, 2)], &[0], 0, 1).unwrap();
        assert_eq!(c, rat(2, 5));
    }

    #[test]
    fn complement_only_is_zero() {
        let c: f64 = integral_coefficient_residue(&[1, 3, 1], &[3.0, 1.0], &[0], 0, 4).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn double_pole_by_hand() {
        // λ²/(z²(z−λ)²) at λ: d/dz[z^{−2}] = −2/λ³, times λ² gives −2/λ.
        let c = integral_coefficient_residue(&[0, 0], &[rat(3, 1)], &[0], 0, 1).unwrap();
        assert_eq!(c, rat(-2, 3));
        // With ν = 1: λ²/(z(z−λ)²) at λ gives λ²·(−1/λ²) = −1.
        let c = integral_coefficient_residue(&[0, 0], &[rat(3, 1)], &[0], 1, 1).unwrap();
        assert_eq!(c, rat(-1, 1));
    }

    #[test]
    fn mixed_poles_exact_vs_float() {
        let sig_r = [rat(7, 2), rat(9, 4), rat(1, 1)];
        let sig_f = [3.5, 2.25, 1.0];
        let idx = [0, 4, 1, 0, 3, 2];
        for nu in 0..2 {
            let exact = integral_coefficient_residue(&idx, &sig_r, &[0, 1], nu, 6).unwrap();
            let float: f64 = integral_coefficient_residue(&idx, &sig_f, &[0, 1], nu, 6).unwrap();
            let e = exact.to_f64().unwrap();
            assert!((float - e).abs() <= 1e-13 * e.abs());
        }
    }

    #[test]
    fn errors() {
        assert!(integral_coefficient_residue::<f64>(&[], &[1.0], &[0], 0, 1).is_err());
        assert!(integral_coefficient_residue::<f64>(&[0, 0, 0], &[1.0], &[0], 0, 1).is_err());
        assert!(integral_coefficient_residue::<f64>(&[2], &[1.0], &[0], 0, 1).is_err());
        assert!(matches!(
            integral_coefficient_residue::<f64>(&[0, 1], &[2.0, 2.0], &[0], 0, 2),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn compensated_sum() {
        let v = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(f64::sum_all(v), 2.0);
    }
}
