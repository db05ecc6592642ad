//! Aggregation of persisted rows into the JSON summary. Every statistic is
//! computed from rows sorted within their cell, so it does not depend on the
//! order trials finished in.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{CoeffRecord, SemiIsoRecord, SeriesRecord, TrialRecord, SCHEMA_VERSION};

/// Linear interpolation between closest ranks of an ascending slice:
/// position `q·(n−1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level {q} outside [0, 1]");
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    /// Finite values the quantiles were taken over.
    pub count: usize,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    /// Quantiles over the finite values, `None` if there are none.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Quantiles> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Quantiles {
            count: v.len(),
            min: v[0],
            q05: quantile(&v, 0.05),
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            q95: quantile(&v, 0.95),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRates {
    pub gap: f64,
    pub density: f64,
    pub large_signal: f64,
    pub density_log: f64,
    pub perturbation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub p: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub pre_round_err: Option<Quantiles>,
    pub localization: Option<Quantiles>,
    /// Completion bound over the empirical `‖Ã_s − A_s‖_∞`.
    pub dk_ratio: Option<Quantiles>,
    pub det_ratio: Option<Quantiles>,
    pub hypotheses: HypothesisRates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub schema_version: u32,
    pub kind: String,
    pub master_seed: u64,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub r_max: usize,
    pub rows: usize,
    pub cells: Vec<CellSummary>,
}

impl RecoverySummary {
    pub fn cell(&self, p: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.p == p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub schema_version: u32,
    pub kind: String,
    pub rows: usize,
    pub fixtures: usize,
    pub gamma_max: usize,
    /// Largest relative residual of the full partial sum over fixtures.
    pub final_relative_error: f64,
    /// Largest measured decay ratio at orders above 10.
    pub max_decay_ratio_beyond_10: Option<f64>,
    pub measured_ratios_beyond_10: usize,
    pub unmeasured_ratios_beyond_10: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffSummary {
    pub schema_version: u32,
    pub kind: String,
    pub rows: usize,
    pub disagreements: usize,
    pub bound_violations: usize,
    pub local_bound_violations: usize,
    pub all_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiIsoSummary {
    pub schema_version: u32,
    pub kind: String,
    pub rows: usize,
    pub all_within_twice_tail: bool,
    pub hypothesis_rate: f64,
    /// Largest `frequency / tail` over rows.
    pub max_frequency_over_tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Summary {
    Recovery(RecoverySummary),
    Series(SeriesSummary),
    Coeff(CoeffSummary),
    SemiIso(SemiIsoSummary),
}

impl Summary {
    pub fn rows(&self) -> usize {
        match self {
            Summary::Recovery(s) => s.rows,
            Summary::Series(s) => s.rows,
            Summary::Coeff(s) => s.rows,
            Summary::SemiIso(s) => s.rows,
        }
    }
}

/// Fields every row of one run shares.
fn run_key(r: &TrialRecord) -> impl PartialEq + std::fmt::Debug {
    (
        r.schema_version,
        r.kind.clone(),
        (r.m, r.n, r.r, r.r_max, r.b),
        r.noise_kind.clone(),
        [r.eps0.to_bits(), r.k_z.to_bits(), r.gap_constant.to_bits(), r.master_seed],
    )
}

fn rate(rows: &[&TrialRecord], f: impl Fn(&TrialRecord) -> bool) -> f64 {
    rows.iter().filter(|r| f(r)).count() as f64 / rows.len() as f64
}

/// Per-density success rates, error and ratio quantiles, and hypothesis
/// rates. Rows from different runs, schema versions or cells with
/// inconsistent densities are a schema error.
pub fn summarize(rows: &[TrialRecord]) -> Result<Summary> {
    let first = rows.first().ok_or_else(|| Error::Schema("no rows to summarize".into()))?;
    if first.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!("schema version {} (expected {SCHEMA_VERSION})", first.schema_version)));
    }
    let key = run_key(first);
    let mut cells: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        if run_key(row) != key {
            return Err(Error::Schema(format!("row {i} belongs to a different run: {:?} vs {key:?}", run_key(row))));
        }
        cells.entry(row.cell).or_default().push(row);
    }
    let mut out = Vec::with_capacity(cells.len());
    for (cell, mut group) in cells {
        let p = group[0].p;
        if group.iter().any(|r| r.p.to_bits() != p.to_bits()) {
            return Err(Error::Schema(format!("cell {cell} mixes densities")));
        }
        group.sort_by_key(|r| r.trial);
        let successes = group.iter().filter(|r| r.exact).count();
        out.push(CellSummary {
            cell,
            p,
            trials: group.len(),
            successes,
            success_rate: successes as f64 / group.len() as f64,
            pre_round_err: Quantiles::of(group.iter().map(|r| r.pre_round_err_inf)),
            localization: Quantiles::of(group.iter().map(|r| r.localization)),
            dk_ratio: Quantiles::of(group.iter().map(|r| r.dk_ratio)),
            det_ratio: Quantiles::of(group.iter().map(|r| r.det_ratio)),
            hypotheses: HypothesisRates {
                gap: rate(&group, |r| r.hyp_gap),
                density: rate(&group, |r| r.hyp_density),
                large_signal: rate(&group, |r| r.hyp_large_signal),
                density_log: rate(&group, |r| r.hyp_density_log),
                perturbation: rate(&group, |r| r.hyp_perturbation),
            },
        });
    }
    Ok(Summary::Recovery(RecoverySummary {
        schema_version: SCHEMA_VERSION,
        kind: first.kind.clone(),
        master_seed: first.master_seed,
        m: first.m,
        n: first.n,
        r: first.r,
        r_max: first.r_max,
        rows: rows.len(),
        cells: out,
    }))
}

pub fn summarize_series(rows: &[SeriesRecord]) -> Summary {
    let gamma_max = rows.iter().map(|r| r.gamma).max().unwrap_or(0);
    let mut fixtures: Vec<usize> = rows.iter().map(|r| r.trial).collect();
    fixtures.sort_unstable();
    fixtures.dedup();
    let final_relative_error = rows
        .iter()
        .filter(|r| r.gamma == gamma_max)
        .map(|r| r.relative_error)
        .fold(0.0, f64::max);
    let beyond: Vec<f64> = rows.iter().filter(|r| r.gamma > 10).map(|r| r.decay_ratio).collect();
    let measured: Vec<f64> = beyond.iter().copied().filter(|x| !x.is_nan()).collect();
    Summary::Series(SeriesSummary {
        schema_version: SCHEMA_VERSION,
        kind: "series_check".into(),
        rows: rows.len(),
        fixtures: fixtures.len(),
        gamma_max,
        final_relative_error,
        max_decay_ratio_beyond_10: measured.iter().copied().reduce(f64::max),
        measured_ratios_beyond_10: measured.len(),
        unmeasured_ratios_beyond_10: beyond.len() - measured.len(),
    })
}

pub fn summarize_coeff(rows: &[CoeffRecord]) -> Summary {
    let count = |f: fn(&CoeffRecord) -> bool| rows.iter().filter(|r| !f(r)).count();
    let disagreements = count(|r| r.agree);
    let bound_violations = count(|r| r.within_bound);
    let local_bound_violations = count(|r| r.within_local_bound);
    Summary::Coeff(CoeffSummary {
        schema_version: SCHEMA_VERSION,
        kind: "coeff_verify".into(),
        rows: rows.len(),
        disagreements,
        bound_violations,
        local_bound_violations,
        all_pass: disagreements + bound_violations + local_bound_violations == 0,
    })
}

pub fn summarize_semi_iso(rows: &[SemiIsoRecord]) -> Summary {
    Summary::SemiIso(SemiIsoSummary {
        schema_version: SCHEMA_VERSION,
        kind: "semi_iso_check".into(),
        rows: rows.len(),
        all_within_twice_tail: rows.iter().all(|r| r.within_twice_tail),
        hypothesis_rate: rows.iter().filter(|r| r.hypothesis_ok).count() as f64 / rows.len().max(1) as f64,
        max_frequency_over_tail: rows.iter().map(|r| r.frequency / r.tail).fold(0.0, f64::max),
    })
}
