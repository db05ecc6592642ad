//! Seeded execution. Each trial derives its own seed from
//! `(master seed, cell, trial)`, trials run on the rayon pool, and results
//! are collected in task order, so the output does not depend on how many
//! threads ran it.

use std::fs;
use std::path::PathBuf;

use exactcomp_core::coherence::coherence;
use exactcomp_core::contour::verify_coefficient_bounds;
use exactcomp_core::linalg::max_abs;
use exactcomp_core::perturbation::{
    deterministic_dk_bounds, dk_matcom_bound, perturbation_report, resolvent_series_check, semi_isotropic_check,
    series_fixture, subspace_diff_with_op, Parity, SemiIsoConfig,
};
use exactcomp_core::problem::{gen_ground_truth, gen_noise, observe, sample_mask, NoiseKind};
use exactcomp_core::recovery::{ar2_recover, exact_recovery_verdict, recovery_hypotheses, RecoveryConfig, Verdict};
use exactcomp_core::rng::trial_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{io_err, Result};
use crate::record::{join, write_rows, CoeffRecord, SemiIsoRecord, SeriesRecord, TrialRecord, SCHEMA_VERSION};
use crate::summary::{summarize, summarize_coeff, summarize_semi_iso, summarize_series, Summary};

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: Summary,
    pub rows: usize,
    pub rows_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs the configured experiment and writes `rows.csv`, `summary.json`
/// and the resolved `config.toml` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rows_path = dir.join(ROWS_FILE);
    let summary_path = dir.join(SUMMARY_FILE);
    let config_path = dir.join(CONFIG_FILE);
    fs::write(&config_path, cfg.to_toml()).map_err(io_err(&config_path))?;

    let (rows, summary) = match cfg.kind {
        ExperimentKind::RecoverySweep | ExperimentKind::BoundCampaign => persist(&rows_path, recovery_rows(cfg)?, |r| summarize(r))?,
        ExperimentKind::SeriesCheck => persist(&rows_path, series_rows(cfg)?, |r| Ok(summarize_series(r)))?,
        ExperimentKind::CoeffVerify => persist(&rows_path, coeff_rows(cfg)?, |r| Ok(summarize_coeff(r)))?,
        ExperimentKind::SemiIsoCheck => persist(&rows_path, semi_iso_rows(cfg)?, |r| Ok(summarize_semi_iso(r)))?,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(io_err(&summary_path))?;
    Ok(RunOutput { summary, rows, rows_path, summary_path })
}

fn persist<T: Serialize>(
    path: &std::path::Path,
    rows: Vec<T>,
    summarize: impl FnOnce(&[T]) -> Result<Summary>,
) -> Result<(usize, Summary)> {
    write_rows(path, &rows)?;
    Ok((rows.len(), summarize(&rows)?))
}

/// All trials of a `recovery_sweep` or `bound_campaign`, ordered by
/// `(cell, trial)`.
pub fn recovery_rows(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let tasks: Vec<(usize, f64, usize)> = cfg
        .densities
        .iter()
        .enumerate()
        .flat_map(|(cell, &p)| (0..cfg.trials).map(move |t| (cell, p, t)))
        .collect();
    tasks.par_iter().map(|&(cell, p, t)| recovery_trial(cfg, cell, p, t)).collect()
}

/// One trial: draw `A`, `Ω` and `Z`, run AR2, and record the diagnostics.
/// A `recovery_sweep` evaluates the perturbation quantities at the cutoff
/// AR2 chose (capped at `r`); a `bound_campaign` always uses `s = r`.
pub fn recovery_trial(cfg: &ExperimentConfig, cell: usize, p: f64, trial: usize) -> Result<TrialRecord> {
    let (m, n, r, r_max, eps0) = (cfg.m, cfg.n, cfg.r, cfg.r_max(), cfg.eps0);
    let seed = trial_seed(cfg.seed, cell as u64, trial as u64);
    let gt = gen_ground_truth(m, n, r, cfg.b, eps0, seed)?;
    let mask = sample_mask(m, n, p, seed)?;
    let z = gen_noise(m, n, cfg.noise.spec(), seed)?;
    let obs = observe(&gt, &mask, &z)?;
    let k_z = cfg.noise.bound();
    let rc = RecoveryConfig { eps0, r_max, k_a: gt.k_a, k_z, gap_constant: cfg.gap_constant };
    let res = ar2_recover(&obs.observed, mask.omega_size, &rc)?;
    let (error_count, max_abs_dev) = match exact_recovery_verdict(&res.a_out, &gt)? {
        Verdict::Exact => (0, 0.0),
        Verdict::EntryErrors { count, max_abs_dev } => (count, max_abs_dev),
    };
    let coh = coherence(&gt.factors, r)?;
    let k = gt.k_a + k_z;
    let sigma = gt.sigma();
    let hyp = recovery_hypotheses(sigma[0], m, n, r, r_max, k, eps0, coh.mu0, p);

    let s_eval = match cfg.kind {
        ExperimentKind::BoundCampaign => r,
        _ => res.s.min(r),
    };
    let set: Vec<usize> = (0..s_eval).collect();
    let rep = perturbation_report(&gt, &obs.e, &set, None)?;
    let diff = subspace_diff_with_op(&gt, &obs.e, &set, rep.e_op)?;
    let approx = diff.approx_norms.expect("leading index set");
    let dk = dk_matcom_bound(&gt, p, k, coh.mu0, s_eval)?;
    let det = deterministic_dk_bounds(&rep, &gt);
    let det_bound = det.approx_entry.expect("leading index set");
    let ratio = |bound: f64| bound / approx.inf;

    Ok(TrialRecord {
        schema_version: SCHEMA_VERSION,
        kind: cfg.kind.name().to_string(),
        m,
        n,
        r,
        r_max,
        eps0,
        b: cfg.b,
        noise_kind: noise_name(cfg.noise.kind).to_string(),
        k_z,
        gap_constant: cfg.gap_constant,
        master_seed: cfg.seed,
        p,
        cell,
        trial,
        trial_seed: seed,
        k_a: gt.k_a,
        sigma_1: sigma[0],
        sigma_r: sigma[r - 1],
        mu_u: coh.mu_u,
        mu_v: coh.mu_v,
        mu0: coh.mu0,
        mu1: coh.mu1,
        u_inf: coh.u_inf,
        v_inf: coh.v_inf,
        u_2inf: coh.u_2inf,
        v_2inf: coh.v_2inf,
        omega_size: mask.omega_size,
        p_hat: mask.p_hat,
        rho: mask.rho,
        s: res.s,
        threshold: res.threshold_used,
        gap_at_s: res.gap_at_s,
        exact: error_count == 0,
        error_count,
        max_abs_dev,
        pre_round_err_inf: max_abs(&(&res.a_hat_s - &gt.a)),
        hyp_gap: dk.gap_ok,
        hyp_density: hyp.density,
        hyp_large_signal: hyp.large_signal,
        hyp_density_log: dk.density_ok,
        s_eval,
        sigma_s: rep.sigma_s,
        delta_s: rep.delta_s,
        e_op: rep.e_op,
        uev_inf: rep.uev_inf,
        y: rep.y,
        r1: rep.r1,
        r2: rep.r2,
        r3: rep.r3,
        hyp_perturbation: rep.hypothesis_ok,
        tau1_det: rep.tau1_det,
        tau2_det: rep.tau2_det,
        approx_err_inf: approx.inf,
        approx_err_op: approx.op,
        localization: if approx.op > 0.0 { approx.inf / approx.op } else { 0.0 },
        dk_bound: dk.value,
        dk_ratio: ratio(dk.value),
        det_bound,
        det_ratio: ratio(det_bound),
    })
}

pub(crate) fn noise_name(kind: NoiseKind) -> &'static str {
    match kind {
        NoiseKind::UniformBounded => "uniform_bounded",
        NoiseKind::RademacherScaled => "rademacher_scaled",
        NoiseKind::Zero => "zero",
    }
}

/// One fixture per trial, one row per expansion order.
pub fn series_rows(cfg: &ExperimentConfig) -> Result<Vec<SeriesRecord>> {
    cfg.validate()?;
    let sc = &cfg.series;
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<SeriesRecord>> {
            let fixture_seed = trial_seed(cfg.seed, 0, t as u64);
            let (gt, e) = series_fixture(sc.scale, sc.target, &sc.s, fixture_seed)?;
            let rep = perturbation_report(&gt, &e, &sc.s, None)?;
            let check = resolvent_series_check(&gt, &e, &sc.s, sc.nu, sc.gamma_max, None)?;
            Ok((1..=sc.gamma_max)
                .map(|g| SeriesRecord {
                    schema_version: SCHEMA_VERSION,
                    master_seed: cfg.seed,
                    trial: t,
                    fixture_seed,
                    nu: sc.nu,
                    s: join(&sc.s),
                    r1: rep.r1,
                    r2: rep.r2,
                    gamma: g,
                    term_norm: check.term_norms[g - 1],
                    partial_sum_error: check.partial_sum_errors[g - 1],
                    relative_error: check.relative_errors[g - 1],
                    decay_ratio: if g >= 2 { check.decay_ratios[g - 2].unwrap_or(f64::NAN) } else { f64::NAN },
                    exact_norm: check.exact_norm,
                    nodes_used: check.nodes_used,
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// `trials` random coefficient samples at rank `r`.
pub fn coeff_rows(cfg: &ExperimentConfig) -> Result<Vec<CoeffRecord>> {
    cfg.validate()?;
    let rep = verify_coefficient_bounds(cfg.trials, cfg.coeff.gamma_max, cfg.r, cfg.seed)?;
    Ok(rep
        .rows
        .into_iter()
        .enumerate()
        .map(|(k, x)| CoeffRecord {
            schema_version: SCHEMA_VERSION,
            master_seed: cfg.seed,
            sample: k,
            r: x.sigma_quarters.len(),
            sigma_quarters: join(&x.sigma_quarters),
            s: join(&x.s),
            nu: x.nu,
            gamma: x.gamma,
            indices: join(&x.indices),
            exact: x.exact,
            residue: x.residue_f64,
            quadrature: x.quadrature,
            bound: x.bound,
            local_bound: x.local_bound,
            agree: x.agree,
            within_bound: x.within_bound,
            within_local_bound: x.within_local_bound,
        })
        .collect())
}

pub fn semi_iso_rows(cfg: &ExperimentConfig) -> Result<Vec<SemiIsoRecord>> {
    cfg.validate()?;
    let si = &cfg.semi_iso;
    let mut sc = SemiIsoConfig::new(cfg.m, cfg.n, si.m_param, si.a_max, si.p_moment, cfg.trials, cfg.seed);
    sc.r = cfg.r;
    sc.d_even = si.d_even;
    sc.d_odd = si.d_odd;
    sc.policy = si.policy;
    Ok(semi_isotropic_check(&sc)?
        .into_iter()
        .map(|x| SemiIsoRecord {
            schema_version: SCHEMA_VERSION,
            master_seed: cfg.seed,
            m: cfg.m,
            n: cfg.n,
            r: cfg.r,
            m_param: si.m_param,
            p_moment: si.p_moment,
            a: x.a,
            parity: match x.parity {
                Parity::Even => "even",
                Parity::Odd => "odd",
            }
            .to_string(),
            d: x.d,
            trials: x.trials,
            failures: x.failures,
            frequency: x.frequency,
            tail: x.tail,
            within_twice_tail: x.within_twice_tail(),
            hypothesis_ok: x.hypothesis_ok,
            max_ratio: x.max_ratio,
        })
        .collect())
}
