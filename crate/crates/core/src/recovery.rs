//! Gap-thresholded truncated SVD recovery (AR2) and the fixed-threshold
//! baseline (AR).

use serde::{Deserialize, Serialize};

use crate::linalg::{ensure_finite, round_matrix, round_to_grid, svd, DenseMatrix, SvdFactors};
use crate::problem::GroundTruth;
use crate::{Error, Result};

pub const DEFAULT_GAP_CONSTANT: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub eps0: f64,
    pub r_max: usize,
    pub k_a: f64,
    pub k_z: f64,
    pub gap_constant: f64,
}

impl RecoveryConfig {
    pub fn new(eps0: f64, r_max: usize, k_a: f64, k_z: f64) -> RecoveryConfig {
        RecoveryConfig { eps0, r_max, k_a, k_z, gap_constant: DEFAULT_GAP_CONSTANT }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.eps0) {
            return Err(Error::Argument("eps0 must be positive".into()));
        }
        if self.r_max == 0 {
            return Err(Error::Argument("r_max must be at least 1".into()));
        }
        if !(self.k_a >= 0.0 && self.k_a.is_finite() && self.k_z >= 0.0 && self.k_z.is_finite()) {
            return Err(Error::Argument("k_a and k_z must be finite and nonnegative".into()));
        }
        if !pos(self.k_a + self.k_z) {
            return Err(Error::Argument("k_a + k_z must be positive".into()));
        }
        if !pos(self.gap_constant) {
            return Err(Error::Argument("gap_constant must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub p_hat: f64,
    /// Number of kept triplets, in `1..=r_max`.
    pub s: usize,
    /// Leading `r_max` singular values of `p̂⁻¹·observed`.
    pub sigma_hat: Vec<f64>,
    pub a_hat_s: DenseMatrix,
    pub a_out: DenseMatrix,
    /// `σ̂_s − σ̂_{s+1}`, with `σ̂_{s+1} = 0` past the last singular value.
    pub gap_at_s: f64,
    pub threshold_used: f64,
}

/// `c·(K_A + K_Z)·√(r_max(m+n)/p̂)`.
pub fn gap_threshold(cfg: &RecoveryConfig, m: usize, n: usize, p_hat: f64) -> f64 {
    cfg.gap_constant * (cfg.k_a + cfg.k_z) * (cfg.r_max as f64 * (m + n) as f64 / p_hat).sqrt()
}

/// Largest `s ≤ r_max − 1` with `σ_s − σ_{s+1} ≥ threshold` (1-indexed, so
/// the gap after the `s`-th value), or `r_max` if no gap qualifies.
pub fn select_cutoff(sigma_hat: &[f64], threshold: f64, r_max: usize) -> usize {
    assert!(sigma_hat.len() >= r_max, "need at least r_max singular values");
    (1..r_max)
        .rev()
        .find(|&s| sigma_hat[s - 1] - sigma_hat[s] >= threshold)
        .unwrap_or(r_max)
}

pub fn ar2_recover(observed: &DenseMatrix, omega_size: usize, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    ensure_finite(observed)?;
    cfg.validate()?;
    let (m, n) = observed.shape();
    if omega_size == 0 {
        return Err(Error::EmptySample);
    }
    if omega_size > m * n {
        return Err(Error::Argument(format!("omega_size {omega_size} exceeds {m}x{n}")));
    }
    if cfg.r_max > m.min(n) {
        return Err(Error::Argument(format!("r_max {} exceeds min(m, n) = {}", cfg.r_max, m.min(n))));
    }
    let p_hat = omega_size as f64 / (m * n) as f64;
    let a_hat = observed / p_hat;
    let f = svd(&a_hat)?;
    let sigma_hat = f.sigma[..cfg.r_max].to_vec();
    let threshold_used = gap_threshold(cfg, m, n, p_hat);
    let s = select_cutoff(&sigma_hat, threshold_used, cfg.r_max);
    Ok(finish(&f, s, cfg.eps0, p_hat, sigma_hat, threshold_used))
}

fn finish(f: &SvdFactors, s: usize, eps0: f64, p_hat: f64, sigma_hat: Vec<f64>, threshold_used: f64) -> RecoveryResult {
    let a_hat_s = f.low_rank(s);
    let a_out = round_matrix(&a_hat_s, eps0);
    let gap_at_s = f.sigma[s - 1] - f.sigma.get(s).copied().unwrap_or(0.0);
    RecoveryResult { p_hat, s, sigma_hat, a_hat_s, a_out, gap_at_s, threshold_used }
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    /// Number of kept triplets; may be 0.
    pub s: usize,
    /// Cutoff `N/(8rμ)` in units of `eps0`.
    pub threshold: f64,
    pub a_hat: DenseMatrix,
    pub a_out: DenseMatrix,
}

/// Fixed-threshold recovery with known density. Works in units of `eps0`,
/// keeps every triplet of `p⁻¹·observed/eps0` with `σ ≥ N/(8rμ)`,
/// `N = max(m, n)`, and rounds to the integers.
pub fn ar_recover_baseline(observed: &DenseMatrix, p: f64, mu: f64, r: usize, eps0: f64) -> Result<BaselineResult> {
    ensure_finite(observed)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Argument(format!("density {p} outside (0, 1]")));
    }
    if !(mu > 0.0 && mu.is_finite()) || r == 0 || !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::Argument("mu, r and eps0 must be positive".into()));
    }
    let (m, n) = observed.shape();
    let scaled = observed / (p * eps0);
    let f = svd(&scaled)?;
    let threshold = m.max(n) as f64 / (8.0 * r as f64 * mu);
    let s = f.sigma.iter().take_while(|&&x| x >= threshold).count();
    let a_int = f.low_rank(s);
    let a_out = a_int.map(|x| round_to_grid(x, 1.0) * eps0 + 0.0);
    Ok(BaselineResult { s, threshold, a_hat: a_int * eps0, a_out })
}

/// `max(m, n)·max(‖U‖∞², ‖V‖∞²)` over the leading `r` columns, the
/// coherence measure the baseline threshold uses.
pub fn baseline_coherence(f: &SvdFactors, r: usize) -> f64 {
    let u = crate::linalg::max_abs(&f.u.columns(0, r).into_owned());
    let v = crate::linalg::max_abs(&f.v.columns(0, r).into_owned());
    f.u.nrows().max(f.v.nrows()) as f64 * u.max(v).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Exact,
    EntryErrors { count: usize, max_abs_dev: f64 },
}

impl Verdict {
    pub fn is_exact(&self) -> bool {
        matches!(self, Verdict::Exact)
    }
}

pub fn exact_recovery_verdict(a_out: &DenseMatrix, gt: &GroundTruth) -> Result<Verdict> {
    verdict_against(a_out, &gt.a, gt.eps0)
}

/// Exact iff both sides agree bit for bit after rounding to the grid.
pub fn verdict_against(a_out: &DenseMatrix, truth: &DenseMatrix, eps0: f64) -> Result<Verdict> {
    crate::linalg::check_shape(a_out, truth.shape())?;
    let mut count = 0;
    let mut max_abs_dev: f64 = 0.0;
    for (x, y) in a_out.iter().zip(truth.iter()) {
        let (gx, gy) = (round_to_grid(*x, eps0), round_to_grid(*y, eps0));
        if gx.to_bits() != gy.to_bits() {
            count += 1;
            max_abs_dev = max_abs_dev.max((gx - gy).abs());
        }
    }
    Ok(if count == 0 { Verdict::Exact } else { Verdict::EntryErrors { count, max_abs_dev } })
}

/// Hypotheses of the recovery guarantee with unit constant, `N = max(m, n)`.
/// These are recorded per trial, never enforced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryHypotheses {
    /// `σ₁ ≥ 100 r K √(r_max N / p)`.
    pub large_signal: bool,
    /// Right side of the density condition.
    pub density_rhs: f64,
    pub density: bool,
    /// Right side of the variant without the `r_max ≤ log²N` restriction.
    pub density_full_rhs: f64,
    pub density_full: bool,
    pub r_max_le_log2: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn recovery_hypotheses(
    sigma1: f64,
    m: usize,
    n: usize,
    r: usize,
    r_max: usize,
    k: f64,
    eps0: f64,
    mu0: f64,
    p: f64,
) -> RecoveryHypotheses {
    let nn = m.max(n) as f64;
    let l = nn.ln();
    let (rf, rm) = (r as f64, r_max as f64);
    let inv = 1.0 / m as f64 + 1.0 / n as f64;
    let large_signal = sigma1 >= 100.0 * rf * k * (rm * nn / p).sqrt();
    let core = rf.powi(3) * k * k / (eps0 * eps0) * (1.0 + mu0 * mu0 / (l * l));
    let density_rhs = inv * l.powi(4).max(core) * l.powi(6);
    let full_third = core * (1.0 + rf.powi(3) * l / nn) * l.powi(6);
    let full_second = rf.powi(4) * rm * mu0 * mu0 * k * k / (eps0 * eps0);
    let density_full_rhs = inv * l.powi(10).max(full_second).max(full_third);
    RecoveryHypotheses {
        large_signal,
        density_rhs,
        density: p >= density_rhs,
        density_full_rhs,
        density_full: p >= density_full_rhs,
        r_max_le_log2: rm <= l * l,
    }
}
