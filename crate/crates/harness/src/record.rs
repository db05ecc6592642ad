//! Flat row types and their CSV store. Every row carries the schema version
//! so files from different releases are never mixed silently.

use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One recovery trial. Wall time is deliberately absent: rows must be
/// reproducible bit for bit from the seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema_version: u32,
    pub kind: String,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub r_max: usize,
    pub eps0: f64,
    pub b: u32,
    pub noise_kind: String,
    pub k_z: f64,
    pub gap_constant: f64,
    pub master_seed: u64,
    pub p: f64,
    /// Index of `p` in the density grid.
    pub cell: usize,
    pub trial: usize,
    pub trial_seed: u64,

    pub k_a: f64,
    pub sigma_1: f64,
    pub sigma_r: f64,
    pub mu_u: f64,
    pub mu_v: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub u_inf: f64,
    pub v_inf: f64,
    pub u_2inf: f64,
    pub v_2inf: f64,

    pub omega_size: usize,
    pub p_hat: f64,
    pub rho: f64,

    /// Cutoff chosen by AR2.
    pub s: usize,
    pub threshold: f64,
    pub gap_at_s: f64,
    pub exact: bool,
    pub error_count: usize,
    pub max_abs_dev: f64,
    /// `‖Â_s − A‖_∞` before rounding.
    pub pre_round_err_inf: f64,

    /// `δ_s ≥ 40 r K √(N/p)` at `s_eval`, `N = m + n`.
    pub hyp_gap: bool,
    /// Sampling density condition with unit constant.
    pub hyp_density: bool,
    /// `σ₁ ≥ 100 r K √(r_max N/p)`.
    pub hyp_large_signal: bool,
    /// `p ≥ (1/m + 1/n) log N`.
    pub hyp_density_log: bool,

    /// Number of leading triplets the perturbation quantities refer to.
    pub s_eval: usize,
    pub sigma_s: f64,
    pub delta_s: f64,
    pub e_op: f64,
    pub uev_inf: f64,
    pub y: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    /// `R₁ ∨ R₂ ≤ 1/8`.
    pub hyp_perturbation: bool,
    pub tau1_det: f64,
    pub tau2_det: f64,

    /// `‖Ã_s − A_s‖_∞` with `Ã = p⁻¹·observed`.
    pub approx_err_inf: f64,
    pub approx_err_op: f64,
    /// `approx_err_inf / approx_err_op`.
    pub localization: f64,
    /// Completion bound on `‖Ã_s − A_s‖_∞` with unit constant.
    pub dk_bound: f64,
    pub dk_ratio: f64,
    /// Deterministic bound `τ₁τ₂σ_s·r(…)` on the same quantity.
    pub det_bound: f64,
    pub det_ratio: f64,
}

/// One expansion order of one series fixture. `decay_ratio` is NaN at the
/// first order and wherever a term norm is zero or subnormal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub schema_version: u32,
    pub master_seed: u64,
    pub trial: usize,
    pub fixture_seed: u64,
    pub nu: u32,
    pub s: String,
    pub r1: f64,
    pub r2: f64,
    pub gamma: usize,
    pub term_norm: f64,
    pub partial_sum_error: f64,
    pub relative_error: f64,
    pub decay_ratio: f64,
    pub exact_norm: f64,
    pub nodes_used: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub schema_version: u32,
    pub master_seed: u64,
    pub sample: usize,
    pub r: usize,
    /// Spectrum in units of 1/4, space separated.
    pub sigma_quarters: String,
    pub s: String,
    pub nu: u32,
    pub gamma: usize,
    pub indices: String,
    pub exact: f64,
    pub residue: f64,
    pub quadrature: f64,
    pub bound: f64,
    pub local_bound: f64,
    pub agree: bool,
    pub within_bound: bool,
    pub within_local_bound: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SemiIsoRecord {
    pub schema_version: u32,
    pub master_seed: u64,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub m_param: f64,
    pub p_moment: u32,
    pub a: usize,
    pub parity: String,
    pub d: f64,
    pub trials: usize,
    pub failures: usize,
    pub frequency: f64,
    pub tail: f64,
    pub within_twice_tail: bool,
    pub hypothesis_ok: bool,
    pub max_ratio: f64,
}

pub(crate) fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

pub trait Versioned {
    fn version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn version(&self) -> u32 {
                self.schema_version
            }
        })*
    };
}

versioned!(TrialRecord, SeriesRecord, CoeffRecord, SemiIsoRecord);

/// Column names of `T`, read off a serialized default row so they can never
/// drift from the struct.
pub fn columns<T: Serialize + Default>() -> Vec<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(T::default()).expect("default row serializes");
    let text = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf8 header");
    text.lines().next().unwrap_or_default().split(',').map(str::to_string).collect()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.display().to_string(), source }
}

/// Writes the header once, then one row per record, in order.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads rows back. A header that does not match `T` column for column, or
/// a row with another schema version, is a schema error.
pub fn read_rows<T: DeserializeOwned + Serialize + Default + Versioned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rd = csv::Reader::from_reader(file);
    let header = rd.headers().map_err(csv_err(path))?.clone();
    let expected = columns::<T>();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Schema(format!("{}: header does not match the {} columns of this schema", path.display(), expected.len())));
    }
    let mut out = Vec::new();
    for (line, row) in rd.deserialize::<T>().enumerate() {
        let row = row.map_err(csv_err(path))?;
        if row.version() != SCHEMA_VERSION {
            return Err(Error::Schema(format!("{}: row {line} has schema version {}", path.display(), row.version())));
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_rows_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let mut a = TrialRecord { schema_version: SCHEMA_VERSION, ..Default::default() };
        a.kind = "recovery_sweep".into();
        a.p = 0.1 + 0.2;
        a.pre_round_err_inf = std::f64::consts::PI * 1e-7;
        a.master_seed = u64::MAX;
        a.exact = true;
        let mut b = a.clone();
        b.trial = 1;
        b.dk_ratio = f64::INFINITY;
        write_rows(&path, &[a.clone(), b.clone()]).unwrap();
        let back: Vec<TrialRecord> = read_rows(&path).unwrap();
        assert_eq!(back, vec![a, b]);
        assert_eq!(back[0].p.to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn header_lists_every_field_once() {
        let cols = columns::<TrialRecord>();
        assert_eq!(cols[0], "schema_version");
        assert!(cols.iter().any(|c| c == "pre_round_err_inf"));
        assert!(!cols.iter().any(|c| c.contains("time")));
        let mut sorted = cols.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), cols.len());
    }

    #[test]
    fn foreign_header_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_rows(&path, &[SemiIsoRecord { schema_version: SCHEMA_VERSION, ..Default::default() }]).unwrap();
        assert!(matches!(read_rows::<TrialRecord>(&path), Err(Error::Schema(_))));
    }

    #[test]
    fn other_version_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let mut a = TrialRecord { schema_version: SCHEMA_VERSION, ..Default::default() };
        a.schema_version = SCHEMA_VERSION + 1;
        write_rows(&path, &[a]).unwrap();
        assert!(matches!(read_rows::<TrialRecord>(&path), Err(Error::Schema(_))));
    }
}
