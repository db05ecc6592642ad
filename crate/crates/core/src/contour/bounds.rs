use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{ContourSpec, DEFAULT_NODE_COUNT};
use super::quadrature::integral_coefficient_quadrature;
use super::residue::{integral_coefficient_residue, signed_value};
use crate::problem::{subset_stats, validate_subset};
use crate::rng::{stream, STREAM_TRIAL};
use crate::{Error, Result};

const MAX_SAMPLE_BETA: usize = 4;
const AGREE_REL: f64 = 1e-8;
const AGREE_ZERO: f64 = 1e-10;

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k.min(n - k)).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn count_inside(indices: &[usize], r: usize, s: &[usize]) -> usize {
    indices.iter().filter(|&&i| s.contains(&(i % r))).count()
}

fn check_tuple(indices: &[usize], sigma: &[f64], s: &[usize], gamma: usize) -> Result<()> {
    let r = sigma.len();
    validate_subset(s, r)?;
    if indices.is_empty() || gamma + 1 < indices.len() {
        return Err(Error::Argument(format!("need 1 <= |I| <= gamma + 1, got |I| = {} and gamma = {gamma}", indices.len())));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= 2 * r) {
        return Err(Error::Argument(format!("index {i} outside 0..{}", 2 * r)));
    }
    Ok(())
}

fn is_prefix(s: &[usize]) -> bool {
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    sorted.iter().enumerate().all(|(k, &i)| k == i)
}

/// Bound on `|C_ν(𝐈)|` in terms of the global `λ_S = min_{i∈S} σ_i` and
/// `Δ_S` (gap between `S` and its complement, with 0 counted in the
/// complement):
/// `L_ν (1 + Δ_S/λ_S)^{β_{S^c}} binom(γ+β_S−2, β_S−1) / (λ_S^{γ+1−β} Δ_S^{β−1})`
/// with `L_0 = 2`, `L_1 = λ_S`. For `ν = 1` the set `S` must be a prefix.
pub fn coefficient_bound(indices: &[usize], sigma: &[f64], s: &[usize], nu: u32, gamma: usize) -> Result<f64> {
    check_tuple(indices, sigma, s, gamma)?;
    if nu == 1 && !is_prefix(s) {
        return Err(Error::Argument("the nu = 1 bound needs S = {0, ..., s-1}".into()));
    }
    let r = sigma.len();
    let beta = indices.len();
    let beta_s = count_inside(indices, r, s);
    if beta_s == 0 {
        return Ok(0.0);
    }
    let stats = subset_stats(sigma, true, s)?;
    let (lam, delta) = (stats.sigma_s, stats.delta_s);
    let l = if nu == 0 { 2.0 } else { lam };
    Ok(l * (1.0 + delta / lam).powi((beta - beta_s) as i32) * binom(gamma + beta_s - 2, beta_s - 1)
        / (lam.powi((gamma + 1 - beta) as i32) * delta.powi(beta as i32 - 1)))
}

/// The tuple-local form, with `λ_S(𝐈)` the smallest `|λ|` among entries
/// inside the contour and `d` the distance from those poles to the nearest
/// pole outside (including 0). For `ν = 0` this is the sharper bound with
/// `binom(γ+β_S−1, β_S−1)` and no leading constant; for `ν = 1` the leading
/// constant is `λ_S(𝐈)` with `binom(γ+β_S−2, β_S−1)`.
pub fn coefficient_bound_local(indices: &[usize], sigma: &[f64], s: &[usize], nu: u32, gamma: usize) -> Result<f64> {
    check_tuple(indices, sigma, s, gamma)?;
    let r = sigma.len();
    let (inside, outside): (Vec<f64>, Vec<f64>) = {
        let (a, b): (Vec<usize>, Vec<usize>) = indices.iter().partition(|&&i| s.contains(&(i % r)));
        (a.iter().map(|&i| signed_value(sigma, i)).collect(), b.iter().map(|&i| signed_value(sigma, i)).collect())
    };
    if inside.is_empty() {
        return Ok(0.0);
    }
    let lam = inside.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let mut d = lam;
    for a in &inside {
        for b in &outside {
            d = d.min((a - b).abs());
        }
    }
    if d == 0.0 {
        return Err(Error::Degenerate("a pole inside the contour coincides with one outside".into()));
    }
    let (beta, beta_s) = (indices.len(), inside.len());
    let (lead, top) = if nu == 0 { (1.0, gamma + beta_s - 1) } else { (lam, gamma + beta_s - 2) };
    Ok(lead * (1.0 + d / lam).powi((beta - beta_s) as i32) * binom(top, beta_s - 1)
        / (lam.powi((gamma + 1 - beta) as i32) * d.powi(beta as i32 - 1)))
}

/// One sampled coefficient with its three evaluations and both bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffSample {
    /// Spectrum as integer multiples of 1/4.
    pub sigma_quarters: Vec<i64>,
    pub s: Vec<usize>,
    pub nu: u32,
    pub gamma: usize,
    pub indices: Vec<usize>,
    /// Exact rational residue sum, rounded to `f64`.
    pub exact: f64,
    pub residue_f64: f64,
    pub quadrature: f64,
    pub bound: f64,
    pub local_bound: f64,
    pub agree: bool,
    pub within_bound: bool,
    pub within_local_bound: bool,
}

impl CoeffSample {
    pub fn passed(&self) -> bool {
        self.agree && self.within_bound && self.within_local_bound
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffVerifyReport {
    pub rows: Vec<CoeffSample>,
    pub bound_violations: usize,
    pub local_bound_violations: usize,
    pub disagreements: usize,
}

impl CoeffVerifyReport {
    pub fn all_pass(&self) -> bool {
        self.bound_violations == 0 && self.local_bound_violations == 0 && self.disagreements == 0
    }
}

fn agree(value: f64, exact: f64) -> bool {
    if exact == 0.0 {
        value.abs() <= AGREE_ZERO
    } else {
        (value - exact).abs() <= AGREE_REL * exact.abs()
    }
}

/// Slack for comparing a coefficient against a bound computed in `f64`.
fn within(c: f64, bound: f64) -> bool {
    c.abs() <= bound * (1.0 + 1e-12)
}

fn draw_sample(k: usize, gamma_max: usize, r: usize, seed: u64) -> Result<CoeffSample> {
    let mut g = stream(seed, STREAM_TRIAL + k as u64);
    let mut pool: Vec<i64> = (1..=32).collect();
    pool.shuffle(&mut g);
    let mut quarters = pool[..r].to_vec();
    quarters.sort_unstable_by(|a, b| b.cmp(a));

    // Every fifth sample is the saturated case β = γ + 1 with a prefix S.
    let saturated = k % 5 == 0;
    let nu = if saturated { 1 } else { g.gen_range(0..2u32) };
    let s: Vec<usize> = if nu == 1 || saturated {
        (0..g.gen_range(1..=r)).collect()
    } else {
        loop {
            let pick: Vec<usize> = (0..r).filter(|_| g.gen_bool(0.5)).collect();
            if !pick.is_empty() {
                break pick;
            }
        }
    };
    let (gamma, beta) = if saturated {
        let gamma = g.gen_range(1..=gamma_max.min(MAX_SAMPLE_BETA - 1));
        (gamma, gamma + 1)
    } else {
        let gamma = g.gen_range(1..=gamma_max);
        (gamma, g.gen_range(1..=MAX_SAMPLE_BETA.min(gamma + 1)))
    };
    let indices: Vec<usize> = (0..beta).map(|_| g.gen_range(0..2 * r)).collect();

    let sigma: Vec<f64> = quarters.iter().map(|&q| q as f64 / 4.0).collect();
    let sigma_q: Vec<BigRational> = quarters.iter().map(|&q| BigRational::new(BigInt::from(q), BigInt::from(4))).collect();
    let exact = integral_coefficient_residue(&indices, &sigma_q, &s, nu, gamma)?
        .to_f64()
        .ok_or_else(|| Error::Argument("exact coefficient out of f64 range".into()))?;
    let residue_f64: f64 = integral_coefficient_residue(&indices, &sigma, &s, nu, gamma)?;
    let contour = ContourSpec::for_integrand(&indices, &sigma, &s, DEFAULT_NODE_COUNT)?;
    let quadrature = integral_coefficient_quadrature(&indices, &sigma, nu, gamma, &contour)?;
    let bound = coefficient_bound(&indices, &sigma, &s, nu, gamma)?;
    let local_bound = coefficient_bound_local(&indices, &sigma, &s, nu, gamma)?;
    Ok(CoeffSample {
        sigma_quarters: quarters,
        agree: agree(residue_f64, exact) && agree(quadrature, exact),
        within_bound: within(exact, bound),
        within_local_bound: within(exact, local_bound),
        s,
        nu,
        gamma,
        indices,
        exact,
        residue_f64,
        quadrature,
        bound,
        local_bound,
    })
}

/// Samples random rational spectra (distinct multiples of 1/4 in
/// `(0, 8]`), subsets, orders `γ ≤ γ_max` and tuples with `β ≤ 4`, then
/// checks residues (exact and `f64`) against quadrature and both bounds.
pub fn verify_coefficient_bounds(samples: usize, gamma_max: usize, r: usize, seed: u64) -> Result<CoeffVerifyReport> {
    if r == 0 || r > 32 {
        return Err(Error::Argument(format!("rank must be in 1..=32, got {r}")));
    }
    if gamma_max == 0 {
        return Err(Error::Argument("gamma_max must be positive".into()));
    }
    let rows = (0..samples)
        .into_par_iter()
        .map(|k| draw_sample(k, gamma_max, r, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoeffVerifyReport {
        bound_violations: rows.iter().filter(|x| !x.within_bound).count(),
        local_bound_violations: rows.iter().filter(|x| !x.within_local_bound).count(),
        disagreements: rows.iter().filter(|x| !x.agree).count(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_over_lambda_substitution() {
        let b = coefficient_bound(&[0], &[2.5, 1.0], &[0], 0, 1).unwrap();
        // Δ_S = 1.5, β = γ = 1: bound = 2/λ.
        assert!((b - 2.0 / 2.5).abs() < 1e-15);
        let c: f64 = integral_coefficient_residue(&[0], &[2.5, 1.0], &[0], 0, 1).unwrap();
        assert!(c <= b);
        let local = coefficient_bound_local(&[0], &[2.5, 1.0], &[0], 0, 1).unwrap();
        assert!((local - 1.0 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn outside_tuple_bound_is_zero() {
        assert_eq!(coefficient_bound(&[1, 3], &[2.0, 1.0], &[0], 0, 2).unwrap(), 0.0);
        assert_eq!(coefficient_bound_local(&[1, 3], &[2.0, 1.0], &[0], 0, 2).unwrap(), 0.0);
    }

    #[test]
    fn nu_one_needs_prefix() {
        assert!(coefficient_bound(&[1], &[2.0, 1.0], &[1], 1, 1).is_err());
        assert!(coefficient_bound(&[0], &[2.0, 1.0], &[0], 1, 1).is_ok());
    }

    #[test]
    fn campaign_has_no_violations() {
        let rep = verify_coefficient_bounds(500, 6, 3, 11).unwrap();
        assert_eq!(rep.rows.len(), 500);
        let bad: Vec<_> = rep.rows.iter().filter(|x| !x.passed()).take(3).collect();
        assert!(rep.all_pass(), "{bad:?}");
        assert!(rep.rows.iter().any(|x| x.indices.len() == x.gamma + 1 && x.nu == 1));
        assert!(rep.rows.iter().any(|x| x.exact == 0.0));
    }

    #[test]
    fn reproducible() {
        let a = verify_coefficient_bounds(20, 4, 2, 5).unwrap();
        let b = verify_coefficient_bounds(20, 4, 2, 5).unwrap();
        assert_eq!(a, b);
    }
}
