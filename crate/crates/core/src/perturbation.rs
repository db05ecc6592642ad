//! Perturbation diagnostics: the scalars entering the entrywise subspace
//! bounds, the bound right-hand sides with unit constants, the contour
//! series check, and Monte Carlo checks of the random-matrix lemmas.
//!
//! Here `N = m + n` and `log` is the natural logarithm.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{resolvent_terms, ContourSpec, DEFAULT_NODE_COUNT};
use crate::linalg::{build_symmetrized_system, factored_op_norm, max_abs, op_norm, svd, symmetrize, two_to_inf, DenseMatrix, SvdFactors};
use crate::problem::{random_orthonormal, GroundTruth, SubsetStats};
use crate::rng::{stream, STREAM_BASIS, STREAM_NOISE, STREAM_TRIAL};
use crate::{Error, Result};

/// Threshold on `R₁ ∨ R₂` for the deterministic bounds.
pub const DETERMINISTIC_HYPOTHESIS: f64 = 1.0 / 8.0;
/// Threshold on the three ratios of the random-noise condition.
pub const RANDOM_HYPOTHESIS: f64 = 1.0 / 16.0;

fn ln_n(m: usize, n: usize) -> f64 {
    ((m + n) as f64).ln()
}

/// Parameters `(ς, M)` of the noise model `E E_ij = 0`, `E|E_ij|² ≤ ς²`,
/// `E|E_ij|^l ≤ M^{l−2} ς^l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub varsigma: f64,
    pub m_param: f64,
}

impl NoiseModel {
    /// The completion noise `p⁻¹A_Ω − A` with entries bounded by `K` fits
    /// the model with `ς = K/√p` and `M = 1/√p`.
    pub fn completion(k: f64, p: f64) -> NoiseModel {
        NoiseModel { varsigma: k / p.sqrt(), m_param: 1.0 / p.sqrt() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.varsigma > 0.0 && self.varsigma.is_finite() && self.m_param > 0.0 && self.m_param.is_finite()) {
            return Err(Error::Argument("noise model parameters must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Entries `±ςM` with probability `1/M²` each sign half, else 0. Needs
/// `M ≥ 1`; with `M = 1` this is a Rademacher matrix scaled by `ς`.
pub fn gen_model_noise<R: Rng>(m: usize, n: usize, model: NoiseModel, g: &mut R) -> Result<DenseMatrix> {
    model.validate()?;
    if model.m_param < 1.0 {
        return Err(Error::Argument(format!("sparse Rademacher noise needs M >= 1, got {}", model.m_param)));
    }
    let keep = 1.0 / (model.m_param * model.m_param);
    let amp = model.varsigma * model.m_param;
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        let hit = keep >= 1.0 || g.gen_bool(keep);
        let sign = if g.gen_bool(0.5) { 1.0 } else { -1.0 };
        data.push(if hit { sign * amp } else { 0.0 });
    }
    Ok(DenseMatrix::from_row_slice(m, n, &data))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub s: Vec<usize>,
    pub sigma_s: f64,
    pub delta_s: f64,
    pub e_op: f64,
    /// `‖UᵀEV‖_∞`.
    pub uev_inf: f64,
    pub y: f64,
    pub tau1_det: f64,
    pub tau2_det: f64,
    pub tau1_rand: Option<f64>,
    pub tau2_rand: Option<f64>,
    /// `‖E‖/σ_S ∨ 2r‖UᵀEV‖_∞/Δ_S`.
    pub r1: f64,
    /// `r1` with `‖Wᵀsym(E)W‖_∞` in place of `‖UᵀEV‖_∞`; never larger.
    pub r1_w: f64,
    /// `√(2r)‖E‖/√(σ_S Δ_S)`.
    pub r2: f64,
    /// `(2r/(σ_S Δ_S))·max_{|i−j|∉{0,r}} |w_iᵀ sym(E)² w_j|`, equal to `2ry/(σ_S Δ_S)`.
    pub r3: f64,
    pub r_s: Option<f64>,
    /// `R₁ ∨ R₂ ≤ 1/8`.
    pub hypothesis_ok: bool,
}

/// `y = ½ max_{i≠j} (|u_iᵀEEᵀu_j| + |v_iᵀEᵀEv_j|)`, 0 when `r = 1`.
pub fn cross_statistic(u: &DenseMatrix, v: &DenseMatrix, e: &DenseMatrix) -> f64 {
    let eu = e.transpose() * u;
    let ev = e * v;
    let gu = eu.transpose() * &eu;
    let gv = ev.transpose() * &ev;
    let r = u.ncols();
    let mut y: f64 = 0.0;
    for i in 0..r {
        for j in 0..r {
            if i != j {
                y = y.max(gu[(i, j)].abs() + gv[(i, j)].abs());
            }
        }
    }
    0.5 * y
}

/// `max_{0≤a≤⌊10 log N⌋} r^{−1/2} max{‖(XXᵀ)^a P‖_{2,∞}/H^{2a},
/// ‖(XXᵀ)^a X Q‖_{2,∞}/H^{2a+1}}` with `H = ‖X‖`, powers applied to the
/// thin factors. With `X = 0` only the `a = 0` term of the first kind counts.
fn tau_det(x: &DenseMatrix, p: &DenseMatrix, q: &DenseMatrix, h: f64, a_max: usize) -> f64 {
    let r = p.ncols() as f64;
    let mut best = two_to_inf(p);
    if h == 0.0 {
        return best / r.sqrt();
    }
    let xt = x.transpose();
    let mut even = p.clone();
    let mut odd = (x * q) / h;
    best = best.max(two_to_inf(&odd));
    for _ in 1..=a_max {
        even = x * (&xt * even) / (h * h);
        odd = x * (&xt * odd) / (h * h);
        best = best.max(two_to_inf(&even)).max(two_to_inf(&odd));
    }
    best / r.sqrt()
}

fn stats_checked(gt: &GroundTruth, s: &[usize]) -> Result<SubsetStats> {
    let st = gt.subset_stats(s)?;
    if !(st.sigma_s > 0.0) || !(st.delta_s > 0.0) {
        return Err(Error::Degenerate(format!("sigma_S = {} and Delta_S = {} must be positive", st.sigma_s, st.delta_s)));
    }
    Ok(st)
}

/// Scalars of the deterministic and random entrywise bounds for `(A, E, S)`.
pub fn perturbation_report(
    gt: &GroundTruth,
    e: &DenseMatrix,
    s: &[usize],
    model: Option<NoiseModel>,
) -> Result<PerturbationReport> {
    crate::linalg::check_shape(e, (gt.m(), gt.n()))?;
    let st = stats_checked(gt, s)?;
    let (u, v) = (gt.u(), gt.v());
    let r = gt.r as f64;
    let (m, n) = (gt.m(), gt.n());
    let e_op = op_norm(e)?;
    let uev = u.transpose() * e * &v;
    let uev_inf = max_abs(&uev);
    let y = cross_statistic(&u, &v, e);
    let a_max = (10.0 * ln_n(m, n)).floor() as usize;
    let tau1_det = tau_det(e, &u, &v, e_op, a_max);
    let tau2_det = tau_det(&e.transpose(), &v, &u, e_op, a_max);

    let sys = build_symmetrized_system(&gt.factors, gt.r)?;
    let wew = sys.w.transpose() * symmetrize(e) * &sys.w;
    let r1_w = (e_op / st.sigma_s).max(2.0 * r * max_abs(&wew) / st.delta_s);
    let r1 = (e_op / st.sigma_s).max(2.0 * r * uev_inf / st.delta_s);
    let r2 = (2.0 * r).sqrt() * e_op / (st.sigma_s * st.delta_s).sqrt();
    let r3 = 2.0 * r * y / (st.sigma_s * st.delta_s);

    let (tau1_rand, tau2_rand, r_s) = match model {
        Some(md) => {
            let q = random_dk_quantities(gt, md, s)?;
            (Some(q.tau1), Some(q.tau2), Some(q.r_s))
        }
        None => (None, None, None),
    };
    Ok(PerturbationReport {
        s: s.to_vec(),
        sigma_s: st.sigma_s,
        delta_s: st.delta_s,
        e_op,
        uev_inf,
        y,
        tau1_det,
        tau2_det,
        tau1_rand,
        tau2_rand,
        r1,
        r1_w,
        r2,
        r3,
        r_s,
        hypothesis_ok: r1.max(r2) <= DETERMINISTIC_HYPOTHESIS,
    })
}

/// SVD of `A + E`, refusing when a perturbed singular value in `S` ties
/// with one outside, since the pairing by index is then ambiguous.
fn perturbed_factors(gt: &GroundTruth, e: &DenseMatrix, s: &[usize]) -> Result<SvdFactors> {
    let ft = svd(&(&gt.a + e))?;
    let scale = ft.sigma.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    for &i in s {
        for j in (0..ft.sigma.len()).filter(|j| !s.contains(j)) {
            if (ft.sigma[i] - ft.sigma[j]).abs() <= 1e-12 * scale {
                return Err(Error::Degenerate(format!("perturbed singular values {i} and {j} coincide")));
            }
        }
    }
    Ok(ft)
}

fn projector(q: &DenseMatrix) -> DenseMatrix {
    q * q.transpose()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffNorms {
    pub op: f64,
    pub inf: f64,
    pub two_inf: f64,
}

impl DiffNorms {
    /// Norms of `x = P Qᵀ`, the operator norm taken from the thin factors.
    fn of(x: &DenseMatrix, p: &DenseMatrix, q: &DenseMatrix) -> Result<DiffNorms> {
        Ok(DiffNorms { op: factored_op_norm(p, q)?, inf: max_abs(x), two_inf: two_to_inf(x) })
    }
}

/// `[A, B]` side by side.
fn hcat(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Thin factors `(P, Q)` with `Q̃Q̃ᵀ − QQᵀ = P Qᵀ`.
fn projector_diff_factors(qt: &DenseMatrix, q: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    (hcat(qt, q), hcat(qt, &-q))
}

#[derive(Clone, Debug)]
pub struct SubspaceDiff {
    pub s: Vec<usize>,
    /// `Ṽ_SṼ_Sᵀ − V_SV_Sᵀ`.
    pub proj_diff_v: DenseMatrix,
    pub proj_diff_u: DenseMatrix,
    pub norms_v: DiffNorms,
    pub norms_u: DiffNorms,
    /// `Ã_s − A_s` when `S = {0, …, s−1}`.
    pub approx_diff: Option<DenseMatrix>,
    pub approx_norms: Option<DiffNorms>,
    /// `Δ_S > 2‖E‖`, which makes the pairing by index safe.
    pub weyl_ok: bool,
}

pub fn subspace_diff(gt: &GroundTruth, e: &DenseMatrix, s: &[usize]) -> Result<SubspaceDiff> {
    crate::linalg::check_shape(e, (gt.m(), gt.n()))?;
    subspace_diff_with_op(gt, e, s, op_norm(e)?)
}

/// [`subspace_diff`] with `‖E‖_op` already known, e.g. from a [`PerturbationReport`].
pub fn subspace_diff_with_op(gt: &GroundTruth, e: &DenseMatrix, s: &[usize], e_op: f64) -> Result<SubspaceDiff> {
    crate::linalg::check_shape(e, (gt.m(), gt.n()))?;
    let st = gt.subset_stats(s)?;
    let weyl_ok = st.delta_s > 2.0 * e_op;
    let ft = perturbed_factors(gt, e, s)?;
    let f = &gt.factors;
    let (vt, v) = (ft.select_v(s), f.select_v(s));
    let (ut, u) = (ft.select_u(s), f.select_u(s));
    let proj_diff_v = projector(&vt) - projector(&v);
    let proj_diff_u = projector(&ut) - projector(&u);
    let (pv, qv) = projector_diff_factors(&vt, &v);
    let (pu, qu) = projector_diff_factors(&ut, &u);
    let norms_v = DiffNorms::of(&proj_diff_v, &pv, &qv)?;
    let norms_u = DiffNorms::of(&proj_diff_u, &pu, &qu)?;
    let (approx_diff, approx_norms) = if is_prefix(s) {
        let k = s.len();
        let x = ft.low_rank(k) - f.low_rank(k);
        // Ã_s − A_s = [Ũ_s, U_s] [Ṽ_sΣ̃_s, −V_sΣ_s]ᵀ.
        let scaled = |q: &DenseMatrix, sigma: &[f64], sign: f64| {
            DenseMatrix::from_fn(q.nrows(), k, |i, j| sign * q[(i, j)] * sigma[j])
        };
        let p = hcat(&ut, &u);
        let q = hcat(&scaled(&vt, &ft.sigma, 1.0), &scaled(&v, &f.sigma, -1.0));
        let norms = DiffNorms::of(&x, &p, &q)?;
        (Some(x), Some(norms))
    } else {
        (None, None)
    };
    Ok(SubspaceDiff {
        s: s.to_vec(),
        norms_v,
        norms_u,
        approx_norms,
        proj_diff_v,
        proj_diff_u,
        approx_diff,
        weyl_ok,
    })
}

fn is_prefix(s: &[usize]) -> bool {
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    sorted.iter().enumerate().all(|(k, &i)| k == i)
}

/// Right-hand side of the completion bound on `‖Ã_s − A_s‖_∞` with
/// `C′ = 1`, split into its factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DkMatcomBound {
    /// `(log N + μ₀) log² N / √(mn) · r σ_s`.
    pub prefactor: f64,
    /// `(K/σ_s)√(N/p)`, `rK√(log N)/(δ_s√p)`, `r²μ₀K log N/(p δ_s √(mn))`.
    pub summands: [f64; 3],
    pub value: f64,
    /// `δ_s ≥ 40 r K √(N/p)`.
    pub gap_ok: bool,
    /// `p ≥ (1/m + 1/n) log N`.
    pub density_ok: bool,
}

/// `s` counts singular values kept (`1 ≤ s ≤ r`).
pub fn dk_matcom_bound(gt: &GroundTruth, p: f64, k: f64, mu0: f64, s: usize) -> Result<DkMatcomBound> {
    if s == 0 || s > gt.r {
        return Err(Error::Argument(format!("cutoff s = {s} outside 1..={}", gt.r)));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Argument(format!("density p = {p} outside (0, 1]")));
    }
    let (m, n) = (gt.m() as f64, gt.n() as f64);
    let big_n = m + n;
    let ln = big_n.ln();
    let r = gt.r as f64;
    let sigma_s = gt.sigma()[s - 1];
    let delta_s = gt.gaps()[s - 1];
    let prefactor = (ln + mu0) * ln * ln / (m * n).sqrt() * r * sigma_s;
    let summands = [
        k / sigma_s * (big_n / p).sqrt(),
        r * k * ln.sqrt() / (delta_s * p.sqrt()),
        r * r * mu0 * k * ln / (p * delta_s * (m * n).sqrt()),
    ];
    Ok(DkMatcomBound {
        prefactor,
        summands,
        value: prefactor * summands.iter().sum::<f64>(),
        gap_ok: delta_s >= 40.0 * r * k * (big_n / p).sqrt(),
        density_ok: p >= (1.0 / m + 1.0 / n) * ln,
    })
}

/// Deterministic entrywise bounds with unit constant. The `V` side is
/// reported with both `τ₁` and `τ₂` since the two statements pair them
/// differently.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicBounds {
    /// `r(‖E‖/σ_S + 2r‖UᵀEV‖_∞/Δ_S + 2ry/(Δ_S σ_S))`.
    pub common: f64,
    /// `τ₁²·common`, bounding `‖Ṽ_SṼ_Sᵀ − V_SV_Sᵀ‖_∞`.
    pub entry: f64,
    /// `τ₁·common`, bounding the `2→∞` norm.
    pub row: f64,
    pub entry_tau2: f64,
    pub row_tau2: f64,
    /// `τ₁τ₂σ_s·common` for prefix `S`, bounding `‖Ã_s − A_s‖_∞`.
    pub approx_entry: Option<f64>,
    pub hypothesis_ok: bool,
}

pub fn deterministic_dk_bounds(report: &PerturbationReport, gt: &GroundTruth) -> DeterministicBounds {
    let r = gt.r as f64;
    let common = r
        * (report.e_op / report.sigma_s
            + 2.0 * r * report.uev_inf / report.delta_s
            + 2.0 * r * report.y / (report.delta_s * report.sigma_s));
    let (t1, t2) = (report.tau1_det, report.tau2_det);
    DeterministicBounds {
        common,
        entry: t1 * t1 * common,
        row: t1 * common,
        entry_tau2: t2 * t2 * common,
        row_tau2: t2 * common,
        approx_entry: is_prefix(&report.s).then(|| t1 * t2 * report.sigma_s * common),
        hypothesis_ok: report.hypothesis_ok,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomDk {
    pub tau1: f64,
    pub tau2: f64,
    /// `ς√N/σ_S`, `rς(√log N + M‖U‖_∞‖V‖_∞ log N)/Δ_S`, `2rς²N/(Δ_S σ_S)`.
    pub r_s_terms: [f64; 3],
    pub r_s: f64,
    /// The three ratios of the noise condition, the last being `ς√(rN)/√(Δ_S σ_S)`.
    pub condition_terms: [f64; 3],
    /// Every condition ratio is at most 1/16.
    pub condition_ok: bool,
    /// `M ≤ N^{1/2} log^{−5} N`, the size restriction with `c = 1`.
    pub m_ok: bool,
}

/// `τ₁ = ‖U‖_{2,∞} log N/√r + M‖V‖_{2,∞} log³N/√(rN) + log^{3/2}N/√N`,
/// `τ₂` with `U` and `V` swapped, and `R_S`.
pub fn random_dk_quantities(gt: &GroundTruth, model: NoiseModel, s: &[usize]) -> Result<RandomDk> {
    model.validate()?;
    let st = stats_checked(gt, s)?;
    let (u, v) = (gt.u(), gt.v());
    let (m, n) = (gt.m(), gt.n());
    let big_n = (m + n) as f64;
    let ln = big_n.ln();
    let r = gt.r as f64;
    let (vs, mp) = (model.varsigma, model.m_param);
    let tau = |a: &DenseMatrix, b: &DenseMatrix| {
        two_to_inf(a) * ln / r.sqrt() + mp * two_to_inf(b) * ln.powi(3) / (r * big_n).sqrt() + ln.powf(1.5) / big_n.sqrt()
    };
    let middle = r * vs * (ln.sqrt() + mp * max_abs(&u) * max_abs(&v) * ln) / st.delta_s;
    let r_s_terms = [
        vs * big_n.sqrt() / st.sigma_s,
        middle,
        2.0 * r * vs * vs * big_n / (st.delta_s * st.sigma_s),
    ];
    let condition_terms = [r_s_terms[0], middle, vs * (r * big_n).sqrt() / (st.delta_s * st.sigma_s).sqrt()];
    Ok(RandomDk {
        tau1: tau(&u, &v),
        tau2: tau(&v, &u),
        r_s: r_s_terms.iter().sum(),
        r_s_terms,
        condition_ok: condition_terms.iter().all(|&x| x <= RANDOM_HYPOTHESIS),
        condition_terms,
        m_ok: mp <= big_n.sqrt() / ln.powi(5),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesCheck {
    pub contour: ContourSpec,
    pub nu: u32,
    pub gamma_max: usize,
    /// `‖T^{(γ)}‖_F` for `γ = 1..=γ_max`.
    pub term_norms: Vec<f64>,
    /// `‖Σ_{γ'≤γ} T^{(γ')} − exact‖_F` for `γ = 1..=γ_max`.
    pub partial_sum_errors: Vec<f64>,
    pub relative_errors: Vec<f64>,
    /// `‖T^{(γ)}‖/‖T^{(γ−1)}‖` for `γ = 2..=γ_max`; `None` once either
    /// norm is zero or subnormal. Each term is its own contour integral, so
    /// small norms keep full relative accuracy.
    pub decay_ratios: Vec<Option<f64>>,
    pub exact_norm: f64,
    pub nodes_used: usize,
}

/// Sums the contour expansion of the resolvent difference and compares the
/// partial sums against the directly computed change: the symmetrized
/// projector difference for `ν = 0`, `sym(Ã_S − A_S)` for `ν = 1`.
///
/// Refuses with a hypothesis error unless `R₁ ∨ R₂ ≤ 1/8`. Without a
/// contour, one is built around `±σ_i, ±σ̃_i, i ∈ S`.
pub fn resolvent_series_check(
    gt: &GroundTruth,
    e: &DenseMatrix,
    s: &[usize],
    nu: u32,
    gamma_max: usize,
    contour: Option<ContourSpec>,
) -> Result<SeriesCheck> {
    if gamma_max == 0 {
        return Err(Error::Argument("gamma_max must be positive".into()));
    }
    if gt.factors.rank != gt.r {
        return Err(Error::Rank { requested: gt.r, rank: gt.factors.rank });
    }
    let report = perturbation_report(gt, e, s, None)?;
    if !report.hypothesis_ok {
        return Err(Error::Hypothesis(format!(
            "R1 v R2 = {:.4} exceeds 1/8; the series is not guaranteed to converge",
            report.r1.max(report.r2)
        )));
    }
    let ft = perturbed_factors(gt, e, s)?;
    let contour = match contour {
        Some(c) => c,
        None => ContourSpec::for_perturbation(gt.sigma(), &ft.sigma, s, DEFAULT_NODE_COUNT)?,
    };
    let f = &gt.factors;
    let exact = if nu == 0 {
        let (m, n) = (gt.m(), gt.n());
        let mut d = DenseMatrix::zeros(m + n, m + n);
        d.view_mut((0, 0), (m, m)).copy_from(&(projector(&ft.select_u(s)) - projector(&f.select_u(s))));
        d.view_mut((m, m), (n, n)).copy_from(&(projector(&ft.select_v(s)) - projector(&f.select_v(s))));
        d
    } else {
        symmetrize(&(ft.subset_sum(s) - f.subset_sum(s)))
    };
    let sys = build_symmetrized_system(f, gt.r)?;
    let terms = resolvent_terms(&sys, e, nu, gamma_max, &contour)?;
    let exact_norm = exact.norm();
    let mut partial = DenseMatrix::zeros(exact.nrows(), exact.ncols());
    let mut term_norms = Vec::with_capacity(gamma_max);
    let mut partial_sum_errors = Vec::with_capacity(gamma_max);
    for t in &terms.terms[1..] {
        partial += t;
        term_norms.push(t.norm());
        partial_sum_errors.push((&partial - &exact).norm());
    }
    let relative_errors = partial_sum_errors
        .iter()
        .map(|&x| if exact_norm > 0.0 { x / exact_norm } else { x })
        .collect();
    let decay_ratios = term_norms
        .windows(2)
        .map(|w| (w[0].is_normal() && w[1].is_normal()).then(|| w[1] / w[0]))
        .collect();
    Ok(SeriesCheck {
        contour,
        nu,
        gamma_max,
        term_norms,
        partial_sum_errors,
        relative_errors,
        decay_ratios,
        exact_norm,
        nodes_used: terms.nodes_used,
    })
}

/// The square fixture: `m = n = 24`, `r = 4`, `σ = (10, 8, 6, 4)·scale`
/// with Haar singular vectors, and a uniform `E` rescaled so that
/// `R₁ ∨ R₂` equals `target` for the subset `s`.
pub fn series_fixture(scale: f64, target: f64, s: &[usize], seed: u64) -> Result<(GroundTruth, DenseMatrix)> {
    const DIM: usize = 24;
    const SIGMA: [f64; 4] = [10.0, 8.0, 6.0, 4.0];
    if !(scale > 0.0 && target > 0.0) {
        return Err(Error::Argument("scale and target must be positive".into()));
    }
    let mut g = stream(seed, STREAM_BASIS);
    let u = random_orthonormal(DIM, 4, &mut g);
    let v = random_orthonormal(DIM, 4, &mut g);
    let d = DenseMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, SIGMA.iter().map(|x| x * scale)));
    let gt = crate::problem::ground_truth_from_matrix(&u * d * v.transpose(), 4, 1.0)?;
    let mut g = stream(seed, STREAM_NOISE);
    let e0 = DenseMatrix::from_fn(DIM, DIM, |_, _| g.gen_range(-1.0..1.0));
    // R₁ and R₂ are both homogeneous of degree one in E.
    let rep = perturbation_report(&gt, &e0, s, None)?;
    let e = e0 * (target / rep.r1.max(rep.r2));
    Ok((gt, e))
}

/// What to do when a lemma's hypothesis fails for a checked pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisPolicy {
    /// Refuse to run.
    Enforce,
    /// Run anyway and record the flag.
    Record,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiIsoConfig {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub m_param: f64,
    pub a_max: usize,
    pub p_moment: u32,
    pub trials: usize,
    pub seed: u64,
    /// Row index `k ∈ [n]` examined.
    pub k: usize,
    pub d_even: f64,
    pub d_odd: f64,
    pub policy: HypothesisPolicy,
}

impl SemiIsoConfig {
    pub fn new(m: usize, n: usize, m_param: f64, a_max: usize, p_moment: u32, trials: usize, seed: u64) -> SemiIsoConfig {
        SemiIsoConfig {
            m,
            n,
            r: 3,
            m_param,
            a_max,
            p_moment,
            trials,
            seed,
            k: 0,
            d_even: 1024.0,
            d_odd: 1024.0,
            policy: HypothesisPolicy::Enforce,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// `‖e_kᵀ(EᵀE)^a V‖ ≤ D p ‖V‖_{2,∞} [2(m+n)]^a`, tail `(2⁴/D)^{2p}`.
    Even,
    /// `‖e_kᵀ(EᵀE)^a EᵀU‖ ≤ D r^{1/2} p^{3/2} √(2a+1) (16 p^{3/2} (2a+1)^{3/2} M ‖U‖_{2,∞}/√r + 1) [2(m+n)]^a`,
    /// tail `(2⁵/D)^{2p}`.
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiIsoRow {
    pub a: usize,
    pub parity: Parity,
    pub d: f64,
    pub failures: usize,
    pub trials: usize,
    pub frequency: f64,
    pub tail: f64,
    /// `m + n ≥ 2⁸ M² p⁶ q⁴` with `q = 2a` (even) or `2a + 1` (odd).
    pub hypothesis_ok: bool,
    /// Largest observed ratio of left side to right side.
    pub max_ratio: f64,
}

impl SemiIsoRow {
    /// Empirical frequency within twice the tail bound.
    pub fn within_twice_tail(&self) -> bool {
        self.frequency <= 2.0 * self.tail
    }
}

fn semi_iso_hypothesis(cfg: &SemiIsoConfig, q: usize) -> bool {
    let p = cfg.p_moment as f64;
    (cfg.m + cfg.n) as f64 >= 256.0 * cfg.m_param * cfg.m_param * p.powi(6) * (q as f64).powi(4)
}

/// Monte Carlo over `trials` draws of a sparse Rademacher `E` (`ς = 1`)
/// and fresh Haar `U`, `V`, counting how often each semi-isotropic bound
/// fails at each `a ≤ a_max`.
pub fn semi_isotropic_check(cfg: &SemiIsoConfig) -> Result<Vec<SemiIsoRow>> {
    let SemiIsoConfig { m, n, r, m_param, a_max, p_moment, trials, seed, k, .. } = *cfg;
    if m == 0 || n == 0 || r == 0 || r > m.min(n) || trials == 0 || p_moment == 0 {
        return Err(Error::Argument("m, n, r, trials and p must be positive with r <= min(m, n)".into()));
    }
    if k >= n {
        return Err(Error::Argument(format!("row index k = {k} outside 0..{n}")));
    }
    if !(cfg.d_even > 0.0 && cfg.d_odd > 0.0) {
        return Err(Error::Argument("D must be positive".into()));
    }
    let model = NoiseModel { varsigma: 1.0, m_param };
    model.validate()?;
    if cfg.policy == HypothesisPolicy::Enforce {
        for a in 0..=a_max {
            for (q, name) in [(2 * a, "even"), (2 * a + 1, "odd")] {
                if !semi_iso_hypothesis(cfg, q) {
                    return Err(Error::Hypothesis(format!(
                        "{name} case a = {a}: m + n = {} is below 2^8 M^2 p^6 {q}^4 = {}",
                        m + n,
                        256.0 * m_param * m_param * (p_moment as f64).powi(6) * (q as f64).powi(4)
                    )));
                }
            }
        }
    }
    let p = p_moment as f64;
    let scale = 2.0 * (m + n) as f64;
    // Per trial: (even ratio, odd ratio) for each a.
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<(f64, f64)>> {
            let mut g = stream(seed, STREAM_TRIAL + t as u64);
            let e = gen_model_noise(m, n, model, &mut g)?;
            let u = random_orthonormal(m, r, &mut g);
            let v = random_orthonormal(n, r, &mut g);
            let (u2, v2) = (two_to_inf(&u), two_to_inf(&v));
            // Row vector e_kᵀ(EᵀE)^a, kept as a 1×n matrix.
            let mut row = DenseMatrix::zeros(1, n);
            row[(0, k)] = 1.0;
            let mut out = Vec::with_capacity(a_max + 1);
            for a in 0..=a_max {
                if a > 0 {
                    row = (&row * e.transpose()) * &e;
                }
                let af = a as f64;
                let grow = scale.powi(a as i32);
                let even_lhs = (&row * &v).norm();
                let even_rhs = cfg.d_even * p * v2 * grow;
                let odd_lhs = (&row * e.transpose() * &u).norm();
                let q = 2.0 * af + 1.0;
                let odd_rhs = cfg.d_odd
                    * (r as f64).sqrt()
                    * p.powf(1.5)
                    * q.sqrt()
                    * (16.0 * p.powf(1.5) * q.powf(1.5) * m_param * u2 / (r as f64).sqrt() + 1.0)
                    * grow;
                out.push((even_lhs / even_rhs, odd_lhs / odd_rhs));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(2 * (a_max + 1));
    for a in 0..=a_max {
        for parity in [Parity::Even, Parity::Odd] {
            let (d, base, q) = match parity {
                Parity::Even => (cfg.d_even, 16.0, 2 * a),
                Parity::Odd => (cfg.d_odd, 32.0, 2 * a + 1),
            };
            let ratios: Vec<f64> = per_trial
                .iter()
                .map(|x| if parity == Parity::Even { x[a].0 } else { x[a].1 })
                .collect();
            let failures = ratios.iter().filter(|&&x| x > 1.0).count();
            rows.push(SemiIsoRow {
                a,
                parity,
                d,
                failures,
                trials,
                frequency: failures as f64 / trials as f64,
                tail: (base / d).powi(2 * p_moment as i32),
                hypothesis_ok: semi_iso_hypothesis(cfg, q),
                max_ratio: ratios.iter().fold(0.0, |a: f64, &b| a.max(b)),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasicEReport {
    pub trials: usize,
    /// Per trial: `‖E‖ ≤ 1.9ς√N`, cross bound `≤ 2‖E‖²`, Bernstein bound.
    pub outcomes: Vec<[bool; 3]>,
    pub norm_frequency: f64,
    pub cross_frequency: f64,
    pub bernstein_frequency: f64,
    /// `M ≤ N^{1/2} log^{−3} N`.
    pub hypothesis_ok: bool,
}

/// Checks the three basic noise facts for `trials` sparse Rademacher draws
/// against the singular vectors of `gt`:
/// `‖E‖ ≤ 1.9ς√N`, `max_{i≠j}(|u_iᵀEEᵀu_j| + |v_iᵀEᵀEv_j|) ≤ 2‖E‖²` and
/// `max_{i,j}|u_iᵀEv_j| ≤ 2ς(√log N + M‖U‖_∞‖V‖_∞ log N)`.
pub fn basic_e_bounds_check(gt: &GroundTruth, model: NoiseModel, trials: usize, seed: u64) -> Result<BasicEReport> {
    if trials == 0 {
        return Err(Error::Argument("trials must be positive".into()));
    }
    let (m, n) = (gt.m(), gt.n());
    let big_n = (m + n) as f64;
    let ln = big_n.ln();
    let (u, v) = (gt.u(), gt.v());
    let bern = 2.0 * model.varsigma * (ln.sqrt() + model.m_param * max_abs(&u) * max_abs(&v) * ln);
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<[bool; 3]> {
            let mut g = stream(seed, STREAM_TRIAL + t as u64);
            let e = gen_model_noise(m, n, model, &mut g)?;
            let e_op = op_norm(&e)?;
            let eu = e.transpose() * &u;
            let ev = &e * &v;
            let (gu, gv) = (eu.transpose() * &eu, ev.transpose() * &ev);
            let mut cross: f64 = 0.0;
            for i in 0..gt.r {
                for j in (0..gt.r).filter(|&j| j != i) {
                    cross = cross.max(gu[(i, j)].abs() + gv[(i, j)].abs());
                }
            }
            Ok([
                e_op <= 1.9 * model.varsigma * big_n.sqrt(),
                cross <= 2.0 * e_op * e_op,
                max_abs(&(u.transpose() * &ev)) <= bern,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let freq = |c: usize| outcomes.iter().filter(|o| o[c]).count() as f64 / trials as f64;
    Ok(BasicEReport {
        trials,
        norm_frequency: freq(0),
        cross_frequency: freq(1),
        bernstein_frequency: freq(2),
        hypothesis_ok: model.m_param <= big_n.sqrt() / ln.powi(3),
        outcomes,
    })
}

/// `‖X‖_∞ / ‖X‖_op`, or 0 for `X = 0`.
pub fn localization_ratio(x: &DenseMatrix) -> Result<f64> {
    let op = op_norm(x)?;
    Ok(if op > 0.0 { max_abs(x) / op } else { 0.0 })
}
