//! Grid-aligned low-rank ground truths, Bernoulli masks, bounded noise and
//! the observed matrix with its implied perturbation `E = p⁻¹A_{Ω,Z} − A`.

use nalgebra::DMatrix;
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, max_abs, svd, DenseMatrix, SvdFactors};
use crate::rng::{self, STREAM_MASK, STREAM_NOISE, STREAM_TRUTH};
use crate::{Error, Result};

pub const MAX_TRUTH_ATTEMPTS: usize = 100;

#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub a: DenseMatrix,
    pub factors: SvdFactors,
    pub r: usize,
    pub eps0: f64,
    pub k_a: f64,
    pub seed: u64,
    /// Stream id of the accepted draw.
    pub stream: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    /// `min_{i∈S} σ_i`.
    pub sigma_s: f64,
    /// `min |σ_i − σ_j|` over `i ∈ S`, `j ∉ S`; infinite if the complement is empty.
    pub delta_s: f64,
}

impl GroundTruth {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Leading `r` singular values.
    pub fn sigma(&self) -> &[f64] {
        &self.factors.sigma[..self.r]
    }

    /// `δ_k = σ_k − σ_{k+1}` for `k < r`, with `σ_{r+1} = 0`.
    pub fn gaps(&self) -> Vec<f64> {
        let s = self.sigma();
        (0..self.r)
            .map(|k| s[k] - s.get(k + 1).copied().unwrap_or(0.0))
            .collect()
    }

    /// `Δ_k = min(δ_k, δ_{k−1})`, with `δ_{−1} = ∞`.
    pub fn big_gaps(&self) -> Vec<f64> {
        let d = self.gaps();
        (0..self.r)
            .map(|k| if k == 0 { d[0] } else { d[k].min(d[k - 1]) })
            .collect()
    }

    pub fn subset_stats(&self, s: &[usize]) -> Result<SubsetStats> {
        let zero_in_complement = self.r < self.m().min(self.n());
        subset_stats(self.sigma(), zero_in_complement, s)
    }

    /// Leading `r` left/right singular vectors.
    pub fn u(&self) -> DenseMatrix {
        self.factors.u.columns(0, self.r).into_owned()
    }

    pub fn v(&self) -> DenseMatrix {
        self.factors.v.columns(0, self.r).into_owned()
    }
}

pub fn validate_subset(s: &[usize], r: usize) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Argument("index set S is empty".into()));
    }
    let mut seen = vec![false; r];
    for &i in s {
        if i >= r {
            return Err(Error::Argument(format!("index {i} outside 0..{r}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Argument(format!("index {i} repeated in S")));
        }
    }
    Ok(())
}

/// Subset statistics for the spectrum `sigma` (length `r`). When
/// `zero_in_complement` is set, a zero singular value counts as part of the
/// complement.
pub fn subset_stats(sigma: &[f64], zero_in_complement: bool, s: &[usize]) -> Result<SubsetStats> {
    validate_subset(s, sigma.len())?;
    let sigma_s = s.iter().map(|&i| sigma[i]).fold(f64::INFINITY, f64::min);
    let mut complement: Vec<f64> = (0..sigma.len())
        .filter(|j| !s.contains(j))
        .map(|j| sigma[j])
        .collect();
    if zero_in_complement {
        complement.push(0.0);
    }
    let mut delta_s = f64::INFINITY;
    for &i in s {
        for &c in &complement {
            delta_s = delta_s.min((sigma[i] - c).abs());
        }
    }
    Ok(SubsetStats { sigma_s, delta_s })
}

/// `A = eps0·X·Yᵀ` with integer factors uniform in `{−b, …, b}`, redrawn on
/// a fresh stream until the numerical rank is exactly `r`.
pub fn gen_ground_truth(m: usize, n: usize, r: usize, b: u32, eps0: f64, seed: u64) -> Result<GroundTruth> {
    if m == 0 || n == 0 {
        return Err(Error::Argument("dimensions must be positive".into()));
    }
    if r == 0 || r > m.min(n) {
        return Err(Error::Argument(format!("rank {r} outside 1..={}", m.min(n))));
    }
    if b == 0 {
        return Err(Error::Argument("factor bound must be at least 1".into()));
    }
    if !(eps0 > 0.0 && eps0.is_finite()) {
        return Err(Error::Argument("eps0 must be positive and finite".into()));
    }
    let b = b as i64;
    for attempt in 0..MAX_TRUTH_ATTEMPTS {
        let stream = STREAM_TRUTH + attempt as u64;
        let mut g = rng::stream(seed, stream);
        let x: Vec<i64> = (0..m * r).map(|_| g.gen_range(-b..=b)).collect();
        let y: Vec<i64> = (0..n * r).map(|_| g.gen_range(-b..=b)).collect();
        let a = DMatrix::from_fn(m, n, |i, j| {
            let k: i64 = (0..r).map(|t| x[i * r + t] * y[j * r + t]).sum();
            k as f64 * eps0
        });
        let factors = svd(&a)?;
        if factors.rank == r {
            let k_a = max_abs(&a);
            return Ok(GroundTruth { a, factors, r, eps0, k_a, seed, stream });
        }
    }
    Err(Error::Generation { attempts: MAX_TRUTH_ATTEMPTS })
}

/// Wraps an arbitrary matrix as a ground truth of rank `r` (used for
/// fixtures that are not grid aligned).
pub fn ground_truth_from_matrix(a: DenseMatrix, r: usize, eps0: f64) -> Result<GroundTruth> {
    let factors = svd(&a)?;
    if r == 0 || r > factors.rank {
        return Err(Error::Rank { requested: r, rank: factors.rank });
    }
    let k_a = max_abs(&a);
    Ok(GroundTruth { a, factors, r, eps0, k_a, seed: 0, stream: 0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMask {
    pub m: usize,
    pub n: usize,
    pub p: f64,
    /// Row-major inclusion flags.
    pub mask: Vec<bool>,
    pub omega_size: usize,
    pub p_hat: f64,
    pub rho: f64,
}

impl SampleMask {
    pub fn from_flags(m: usize, n: usize, p: f64, mask: Vec<bool>) -> Result<SampleMask> {
        if mask.len() != m * n {
            return Err(Error::Argument(format!("mask has {} flags for {m}x{n}", mask.len())));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Argument(format!("density {p} outside (0, 1]")));
        }
        let omega_size = mask.iter().filter(|&&b| b).count();
        if omega_size == 0 {
            return Err(Error::EmptySample);
        }
        let p_hat = omega_size as f64 / (m * n) as f64;
        Ok(SampleMask { m, n, p, mask, omega_size, p_hat, rho: p_hat / p })
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n + j]
    }
}

pub fn sample_mask(m: usize, n: usize, p: f64, seed: u64) -> Result<SampleMask> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Argument(format!("density {p} outside (0, 1]")));
    }
    let mut g = rng::stream(seed, STREAM_MASK);
    let mask = (0..m * n).map(|_| g.gen_bool(p)).collect();
    SampleMask::from_flags(m, n, p, mask)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    UniformBounded,
    RademacherScaled,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub k_z: f64,
    pub kind: NoiseKind,
}

impl NoiseSpec {
    pub fn zero() -> NoiseSpec {
        NoiseSpec { k_z: 0.0, kind: NoiseKind::Zero }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_z >= 0.0 && self.k_z.is_finite()) {
            return Err(Error::Argument("noise bound k_z must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Independent centered entries with `|Z_ij| ≤ K_Z`, drawn in row-major order.
pub fn gen_noise(m: usize, n: usize, spec: NoiseSpec, seed: u64) -> Result<DenseMatrix> {
    spec.validate()?;
    let mut g = rng::stream(seed, STREAM_NOISE);
    let k = spec.k_z;
    let data: Vec<f64> = match spec.kind {
        NoiseKind::Zero => vec![0.0; m * n],
        NoiseKind::UniformBounded if k == 0.0 => vec![0.0; m * n],
        NoiseKind::UniformBounded => {
            let u = Uniform::new_inclusive(-k, k);
            (0..m * n).map(|_| u.sample(&mut g)).collect()
        }
        NoiseKind::RademacherScaled => (0..m * n)
            .map(|_| if g.gen_bool(0.5) { k } else { -k })
            .collect(),
    };
    Ok(DMatrix::from_row_slice(m, n, &data))
}

#[derive(Clone, Debug)]
pub struct Observation {
    /// `(A + Z)_ij` on the mask, exactly 0 elsewhere.
    pub observed: DenseMatrix,
    pub mask: SampleMask,
    /// `p⁻¹·observed`.
    pub rescaled_true: DenseMatrix,
    /// `p̂⁻¹·observed`.
    pub rescaled_est: DenseMatrix,
    /// `rescaled_true − A`.
    pub e: DenseMatrix,
}

pub fn observe(gt: &GroundTruth, mask: &SampleMask, z: &DenseMatrix) -> Result<Observation> {
    let shape = gt.a.shape();
    linalg::check_shape(z, shape)?;
    if (mask.m, mask.n) != shape {
        return Err(Error::Shape { expected: shape, got: (mask.m, mask.n) });
    }
    if mask.omega_size == 0 {
        return Err(Error::EmptySample);
    }
    let observed = DMatrix::from_fn(shape.0, shape.1, |i, j| {
        if mask.contains(i, j) {
            gt.a[(i, j)] + z[(i, j)]
        } else {
            0.0
        }
    });
    let rescaled_true = &observed / mask.p;
    let rescaled_est = &observed / mask.p_hat;
    let e = &rescaled_true - &gt.a;
    Ok(Observation { observed, mask: mask.clone(), rescaled_true, rescaled_est, e })
}

/// Analytic moment bound `p^{1−l} K^l` on `E|E_ij|^l`, valid when
/// `|A_ij| ≤ K_A`, `|Z_ij| ≤ K_Z` and `K = K_A + K_Z`.
pub fn entry_moment_bound(p: f64, k: f64, l: i32) -> f64 {
    p.powi(1 - l) * k.powi(l)
}

/// Matrix with orthonormal columns drawn from the Haar measure.
pub fn random_orthonormal<R: Rng>(rows: usize, cols: usize, g: &mut R) -> DenseMatrix {
    assert!(cols <= rows);
    let x = DMatrix::from_fn(rows, cols, |_, _| g.sample::<f64, _>(StandardNormal));
    let qr = x.qr();
    let mut q = qr.q();
    let rdiag = qr.r().diagonal();
    for c in 0..cols {
        if rdiag[c] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::round_matrix;

    #[test]
    fn tiny_truth_is_grid_aligned_rank_one() {
        let gt = gen_ground_truth(2, 2, 1, 1, 1.0, 3).unwrap();
        assert_eq!(gt.factors.rank, 1);
        assert!(gt.a.iter().all(|x| [-1.0, 0.0, 1.0].contains(x)));
        assert_eq!(round_matrix(&gt.a, 1.0), gt.a);
    }

    #[test]
    fn half_grid_rank_three() {
        let gt = gen_ground_truth(50, 50, 3, 2, 0.5, 11).unwrap();
        assert_eq!(crate::linalg::svd(&gt.a).unwrap().rank, 3);
        assert!(gt.a.iter().all(|x| (x / 0.5).fract() == 0.0));
        assert_eq!(round_matrix(&gt.a, 0.5), gt.a);
        assert!(max_abs(&gt.a) <= gt.k_a);
    }

    #[test]
    fn generation_is_reproducible() {
        let a = gen_ground_truth(20, 15, 2, 2, 0.25, 9).unwrap();
        let b = gen_ground_truth(20, 15, 2, 2, 0.25, 9).unwrap();
        assert_eq!(a.a, b.a);
        assert_eq!(a.stream, b.stream);
    }

    #[test]
    fn rank_deficient_retries() {
        // A 3x3 rank-3 draw from {−1, 0, 1} is often singular; the retry
        // loop must still produce rank 3.
        for seed in 0..20 {
            let gt = gen_ground_truth(3, 3, 3, 1, 1.0, seed).unwrap();
            assert_eq!(gt.factors.rank, 3);
        }
    }

    #[test]
    fn generation_argument_errors() {
        assert!(gen_ground_truth(3, 3, 4, 1, 1.0, 0).is_err());
        assert!(gen_ground_truth(3, 3, 1, 0, 1.0, 0).is_err());
        assert!(gen_ground_truth(3, 3, 1, 1, 0.0, 0).is_err());
    }

    #[test]
    fn gaps_and_subset_stats() {
        let s = [10.0, 7.0, 3.0];
        let st = subset_stats(&s, true, &[1]).unwrap();
        assert_eq!(st.sigma_s, 7.0);
        assert_eq!(st.delta_s, 3.0);
        let st = subset_stats(&s, true, &[0, 1, 2]).unwrap();
        assert_eq!(st.delta_s, 3.0);
        let st = subset_stats(&s, false, &[0, 1, 2]).unwrap();
        assert!(st.delta_s.is_infinite());
        let st = subset_stats(&[4.0], true, &[0]).unwrap();
        assert_eq!(st.delta_s, 4.0);
        assert!(subset_stats(&s, true, &[]).is_err());
        assert!(subset_stats(&s, true, &[3]).is_err());
        assert!(subset_stats(&s, true, &[1, 1]).is_err());

        let a = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![10.0, 7.0, 3.0, 0.0]));
        let gt = ground_truth_from_matrix(a, 3, 1.0).unwrap();
        assert_eq!(gt.gaps(), vec![3.0, 4.0, 3.0]);
        assert_eq!(gt.big_gaps(), vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn full_density_mask() {
        let m = sample_mask(7, 5, 1.0, 1).unwrap();
        assert_eq!(m.omega_size, 35);
        assert_eq!(m.p_hat, 1.0);
        assert_eq!(m.rho, 1.0);
    }

    #[test]
    fn mask_errors_and_determinism() {
        assert!(sample_mask(3, 3, 0.0, 1).is_err());
        assert!(sample_mask(3, 3, 1.5, 1).is_err());
        assert!(matches!(sample_mask(1, 1, 1e-12, 1), Err(Error::EmptySample)));
        assert_eq!(sample_mask(30, 20, 0.3, 5).unwrap(), sample_mask(30, 20, 0.3, 5).unwrap());
    }

    #[test]
    fn half_density_concentrates() {
        // Chernoff: P(|p̂ − 1/2| > 0.01) ≤ 2exp(−2·10⁶·10⁻⁴) ≈ 3e−87.
        let m = sample_mask(1000, 1000, 0.5, 17).unwrap();
        assert!((0.49..=0.51).contains(&m.p_hat));
    }

    #[test]
    fn rho_concentration() {
        let (m, n, p) = (300usize, 300usize, 0.2);
        let nn = m.max(n) as f64;
        let bound = nn.ln() / (p * (m * n) as f64).sqrt();
        let ok = (0..100)
            .filter(|&t| (sample_mask(m, n, p, t).unwrap().rho - 1.0).abs() <= bound)
            .count();
        assert!(ok >= 99, "{ok}");
    }

    #[test]
    fn noise_laws() {
        assert_eq!(gen_noise(4, 4, NoiseSpec::zero(), 1).unwrap(), DenseMatrix::zeros(4, 4));
        let z = gen_noise(30, 30, NoiseSpec { k_z: 1.0, kind: NoiseKind::RademacherScaled }, 2).unwrap();
        assert!(z.iter().all(|&x| x == 1.0 || x == -1.0));

        let k = 2.0;
        let z = gen_noise(1000, 1000, NoiseSpec { k_z: k, kind: NoiseKind::UniformBounded }, 3).unwrap();
        let cnt = z.len() as f64;
        assert!(z.iter().all(|x| x.abs() <= k));
        let mean = z.sum() / cnt;
        assert!(mean.abs() <= 3.0 * k / cnt.sqrt());
        let m2 = z.iter().map(|x| x * x).sum::<f64>() / cnt;
        assert!((m2 / (k * k / 3.0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn observation_identities() {
        let gt = gen_ground_truth(12, 9, 2, 2, 1.0, 4).unwrap();
        let full = sample_mask(12, 9, 1.0, 4).unwrap();
        let obs = observe(&gt, &full, &DenseMatrix::zeros(12, 9)).unwrap();
        assert!(obs.e.iter().all(|&x| x == 0.0));

        let p = 0.4;
        let mask = sample_mask(12, 9, p, 4).unwrap();
        let obs = observe(&gt, &mask, &DenseMatrix::zeros(12, 9)).unwrap();
        for i in 0..12 {
            for j in 0..9 {
                let a = gt.a[(i, j)];
                if mask.contains(i, j) {
                    assert_eq!(obs.e[(i, j)], a / p - a);
                    assert!((obs.e[(i, j)] - a * (1.0 / p - 1.0)).abs() <= 1e-12 * a.abs().max(1.0));
                } else {
                    assert_eq!(obs.observed[(i, j)], 0.0);
                    assert_eq!(obs.e[(i, j)], -a);
                }
            }
        }
        assert!(observe(&gt, &mask, &DenseMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn rescaling_is_unbiased() {
        let gt = gen_ground_truth(30, 30, 2, 2, 1.0, 8).unwrap();
        let p = 0.3;
        let trials = 2000;
        let mut acc = DenseMatrix::zeros(30, 30);
        for t in 0..trials {
            let mask = sample_mask(30, 30, p, 1000 + t).unwrap();
            acc += observe(&gt, &mask, &DenseMatrix::zeros(30, 30)).unwrap().rescaled_true;
        }
        acc /= trials as f64;
        let err = max_abs(&(acc - &gt.a));
        assert!(err <= 5.0 * gt.k_a / (trials as f64).sqrt(), "{err}");
    }

    #[test]
    fn moment_certificate_on_first_entry() {
        let gt = gen_ground_truth(6, 6, 2, 2, 1.0, 21).unwrap();
        let (p, k_z) = (0.25, 1.0);
        let k = gt.k_a + k_z;
        let a = gt.a[(0, 0)];
        let trials = 20_000u64;
        let mut sums = [0.0f64; 7];
        let spec = NoiseSpec { k_z, kind: NoiseKind::UniformBounded };
        for t in 0..trials {
            let mut g = rng::stream(t, STREAM_MASK);
            let hit = g.gen_bool(p);
            let z = gen_noise(1, 1, spec, t).unwrap()[(0, 0)];
            let e = if hit { (a + z) / p - a } else { -a };
            for (l, s) in sums.iter_mut().enumerate().skip(2) {
                *s += e.abs().powi(l as i32);
            }
        }
        for l in 2..7 {
            let est = sums[l] / trials as f64;
            let bound = entry_moment_bound(p, k, l as i32);
            assert!(est <= bound, "l={l}: {est} > {bound}");
        }
    }

    #[test]
    fn orthonormal_draw() {
        let mut g = rng::stream(1, 2);
        let q = random_orthonormal(40, 3, &mut g);
        assert!((q.transpose() * &q - DenseMatrix::identity(3, 3)).amax() < 1e-12);
    }
}
