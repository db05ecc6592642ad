use std::fs;

use exactcomp_core::problem::NoiseKind;
use exactcomp_harness::record::{read_rows, SeriesRecord};
use exactcomp_harness::run::recovery_rows;
use exactcomp_harness::summary::{quantile, Quantiles};
use exactcomp_harness::{run_experiment, summarize, Error, ExperimentConfig, ExperimentKind, Summary, TrialRecord, SCHEMA_VERSION};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sweep(dir: &std::path::Path) -> ExperimentConfig {
    let text = format!(
        r#"
kind = "recovery_sweep"
m = 40
n = 36
r = 2
r_max = 3
eps0 = 1.0
b = 2
densities = [0.4, 0.7, 1.0]
trials = 4
seed = 2024
output = "{}"

[noise]
kind = "uniform_bounded"
k_z = 0.25
"#,
        dir.display()
    );
    ExperimentConfig::from_toml(&text, "inline").unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn same_seed_gives_byte_identical_artifacts_at_any_thread_count() {
    let root = tempfile::tempdir().unwrap();
    let a = sweep(&root.path().join("a"));
    let b = sweep(&root.path().join("b"));
    let out_a = in_pool(1, || run_experiment(&a).unwrap());
    let out_b = in_pool(4, || run_experiment(&b).unwrap());
    assert_eq!(fs::read(&out_a.rows_path).unwrap(), fs::read(&out_b.rows_path).unwrap());
    assert_eq!(fs::read(&out_a.summary_path).unwrap(), fs::read(&out_b.summary_path).unwrap());

    let mut other = sweep(&root.path().join("c"));
    other.seed += 1;
    let out_c = run_experiment(&other).unwrap();
    assert_ne!(fs::read(&out_a.rows_path).unwrap(), fs::read(&out_c.rows_path).unwrap());
}

#[test]
fn summary_totals_equal_row_counts() {
    let root = tempfile::tempdir().unwrap();
    let cfg = sweep(root.path());
    let out = run_experiment(&cfg).unwrap();
    let rows: Vec<TrialRecord> = read_rows(&out.rows_path).unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(out.rows, 12);
    let Summary::Recovery(s) = &out.summary else { panic!("wrong summary kind") };
    assert_eq!(s.rows, 12);
    assert_eq!(s.cells.iter().map(|c| c.trials).sum::<usize>(), 12);
    let on_disk: Summary = serde_json::from_slice(&fs::read(&out.summary_path).unwrap()).unwrap();
    assert_eq!(&on_disk, &out.summary);
    assert_eq!(summarize(&rows).unwrap(), out.summary);
    let echoed = ExperimentConfig::load(&root.path().join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn full_noiseless_sweep_succeeds_everywhere() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = sweep(root.path());
    cfg.densities = vec![1.0];
    cfg.noise.kind = NoiseKind::Zero;
    cfg.noise.k_z = 0.0;
    let out = run_experiment(&cfg).unwrap();
    let Summary::Recovery(s) = out.summary else { panic!("wrong summary kind") };
    assert_eq!(s.cells.len(), 1);
    assert_eq!(s.cells[0].success_rate, 1.0);
    assert!(s.cells[0].pre_round_err.unwrap().max < 1e-9);
}

#[test]
fn rows_reproduce_from_the_csv() {
    let root = tempfile::tempdir().unwrap();
    let cfg = sweep(root.path());
    let out = run_experiment(&cfg).unwrap();
    let rows: Vec<TrialRecord> = read_rows(&out.rows_path).unwrap();
    assert_eq!(rows, recovery_rows(&cfg).unwrap());
    assert!(rows.iter().all(|r| r.schema_version == SCHEMA_VERSION));
}

#[test]
fn reading_rows_of_another_kind_is_a_schema_error() {
    let root = tempfile::tempdir().unwrap();
    let cfg = sweep(root.path());
    let out = run_experiment(&cfg).unwrap();
    assert!(matches!(read_rows::<SeriesRecord>(&out.rows_path), Err(Error::Schema(_))));
}

/// Value at level `q` of the piecewise-linear curve through
/// `(k/(n−1), x_(k))`, found by walking the segments.
fn oracle(values: &[f64], q: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len();
    if n == 1 {
        return x[0];
    }
    let step = 1.0 / (n - 1) as f64;
    for k in 0..n - 1 {
        let (lo, hi) = (k as f64 * step, (k + 1) as f64 * step);
        if q <= hi || k == n - 2 {
            let t = (q - lo) / step;
            return x[k] * (1.0 - t) + x[k + 1] * t;
        }
    }
    unreachable!()
}

#[test]
fn quantiles_match_sort_oracle_on_1000_rows() {
    let mut g = ChaCha8Rng::seed_from_u64(99);
    let rows: Vec<TrialRecord> = (0..1000)
        .map(|t| TrialRecord {
            schema_version: SCHEMA_VERSION,
            kind: "recovery_sweep".into(),
            m: 10,
            n: 10,
            r: 1,
            r_max: 1,
            p: 0.5,
            trial: t,
            exact: g.gen_bool(0.6),
            pre_round_err_inf: g.gen_range(0.0..3.0f64).powi(3),
            localization: g.gen(),
            ..Default::default()
        })
        .collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.pre_round_err_inf).collect();
    let Summary::Recovery(s) = summarize(&rows).unwrap() else { panic!("wrong summary kind") };
    let c = &s.cells[0];
    let q = c.pre_round_err.unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    assert!(close(q.median, oracle(&errs, 0.5)));
    assert!(close(q.q95, oracle(&errs, 0.95)));
    assert!(close(q.q05, oracle(&errs, 0.05)));
    assert!(close(q.q25, oracle(&errs, 0.25)));
    assert!(close(q.q75, oracle(&errs, 0.75)));
    assert_eq!(q.min, errs.iter().copied().fold(f64::INFINITY, f64::min));
    assert_eq!(q.max, errs.iter().copied().fold(0.0, f64::max));
    assert_eq!(c.successes, rows.iter().filter(|r| r.exact).count());

    for level in [0.0, 0.013, 0.5, 0.999, 1.0] {
        let mut sorted = errs.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(close(quantile(&sorted, level), oracle(&errs, level)), "level {level}");
    }
    assert_eq!(Quantiles::of([f64::NAN, f64::INFINITY]), None);
}

#[test]
fn config_kind_must_be_known() {
    let err = ExperimentConfig::from_toml("kind = \"sweep\"\nm = 1\nn = 1\nr = 1\nseed = 0\n", "inline").unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let cfg = ExperimentConfig::defaults(ExperimentKind::SeriesCheck);
    assert_eq!(cfg.kind.name(), "series_check");
}
