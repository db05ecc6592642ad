use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exactcomp_core::io::{mask_flags, mask_matrix, read_matrix, write_matrix, MatrixFile};
use exactcomp_core::problem::{gen_ground_truth, gen_noise, observe, sample_mask, NoiseKind, NoiseSpec};
use exactcomp_core::recovery::{ar2_recover, ar_recover_baseline, baseline_coherence, verdict_against, RecoveryConfig, Verdict};
use exactcomp_core::DenseMatrix;
use exactcomp_harness::config::NoiseSection;
use exactcomp_harness::{run_experiment, Error, ExperimentConfig, ExperimentKind, Result};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "exactcomp", version, about = "Exact matrix completion experiments")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// What to print on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Draw a ground truth, mask and noisy observation into matrix files.
    Generate(GenerateArgs),
    /// Run AR2 (or the fixed-threshold baseline) on matrix files.
    Recover(RecoverArgs),
    /// Recovery success over a density sweep (kind = "recovery_sweep").
    Sweep,
    /// Entrywise errors against the bounds (kind = "bound_campaign").
    Bounds,
    /// Resolvent series convergence on the 24x24 fixture (kind = "series_check").
    Series,
    /// Residue against quadrature and the coefficient bounds (kind = "coeff_verify").
    VerifyCoeffs,
    /// Semi-isotropic tail frequencies (kind = "semi_iso_check").
    SemiIso,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    b: Option<u32>,
    #[arg(long)]
    eps0: Option<f64>,
    /// Sampling density; defaults to the first density of the config.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long)]
    k_z: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NoiseArg {
    Zero,
    UniformBounded,
    RademacherScaled,
}

impl From<NoiseArg> for NoiseKind {
    fn from(x: NoiseArg) -> NoiseKind {
        match x {
            NoiseArg::Zero => NoiseKind::Zero,
            NoiseArg::UniformBounded => NoiseKind::UniformBounded,
            NoiseArg::RademacherScaled => NoiseKind::RademacherScaled,
        }
    }
}

#[derive(Args, Debug)]
struct RecoverArgs {
    /// Observed matrix, zero off the mask.
    #[arg(long)]
    observed: PathBuf,
    /// 0/1 mask file of the same shape.
    #[arg(long)]
    mask: PathBuf,
    /// Ground truth to score against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Defaults to the `r` header of the observed file.
    #[arg(long)]
    r_max: Option<usize>,
    /// Grid step; defaults to the `eps0` header.
    #[arg(long)]
    eps0: Option<f64>,
    /// Bound on |A_ij|; defaults to the `k_a` header.
    #[arg(long)]
    k_a: Option<f64>,
    /// Bound on |Z_ij|; defaults to the `k_z` header.
    #[arg(long)]
    k_z: Option<f64>,
    /// Constant in the AR2 gap threshold (default 20).
    #[arg(long)]
    gap_constant: Option<f64>,
    /// Use the fixed-threshold baseline instead of AR2.
    #[arg(long)]
    baseline: bool,
    /// Coherence for the baseline threshold; taken from the truth if absent.
    #[arg(long)]
    mu: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::config("threads", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::config("threads", e.to_string()))?;
    }
    let kind = match cli.cmd {
        Cmd::Generate(ref a) => return generate(&cli, a),
        Cmd::Recover(ref a) => return recover(&cli, a),
        Cmd::Sweep => ExperimentKind::RecoverySweep,
        Cmd::Bounds => ExperimentKind::BoundCampaign,
        Cmd::Series => ExperimentKind::SeriesCheck,
        Cmd::VerifyCoeffs => ExperimentKind::CoeffVerify,
        Cmd::SemiIso => ExperimentKind::SemiIsoCheck,
    };
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::defaults(kind),
    };
    if cfg.kind != kind {
        return Err(Error::config("kind", format!("config is `{}` but the command runs `{}`", cfg.kind.name(), kind.name())));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    let start = Instant::now();
    let out = run_experiment(&cfg)?;
    eprintln!(
        "{}: {} rows in {:.1?}, written to {}",
        kind.name(),
        out.rows,
        start.elapsed(),
        cfg.output.display()
    );
    match cli.format {
        Format::Json => print_json(&out.summary),
        Format::Csv => {
            let text = fs::read_to_string(&out.rows_path).map_err(|source| io_error(&out.rows_path, source))?;
            print!("{text}");
            Ok(())
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
    Ok(())
}

fn print_csv<T: Serialize>(value: &T) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.serialize(value).map_err(|source| Error::Csv { path: "<stdout>".into(), source })?;
    w.flush().map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn emit<T: Serialize>(format: Format, value: &T) -> Result<()> {
    match format {
        Format::Json => print_json(value),
        Format::Csv => print_csv(value),
    }
}

#[derive(Serialize)]
struct GenerateReport {
    m: usize,
    n: usize,
    r: usize,
    seed: u64,
    p: f64,
    omega_size: usize,
    p_hat: f64,
    k_a: f64,
    k_z: f64,
    truth: String,
    mask: String,
    observed: String,
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    let base = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::defaults(ExperimentKind::RecoverySweep),
    };
    let m = a.m.unwrap_or(base.m);
    let n = a.n.unwrap_or(base.n);
    let r = a.r.unwrap_or(base.r);
    let b = a.b.unwrap_or(base.b);
    let eps0 = a.eps0.unwrap_or(base.eps0);
    let p = a.p.unwrap_or(base.densities[0]);
    let noise = NoiseSection {
        kind: a.noise.map(NoiseKind::from).unwrap_or(base.noise.kind),
        k_z: a.k_z.unwrap_or(base.noise.k_z),
    };
    let seed = cli.seed.unwrap_or(base.seed);
    let dir = cli.out.clone().unwrap_or(base.output);
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::config("p", format!("{p} outside (0, 1]")));
    }

    let gt = gen_ground_truth(m, n, r, b, eps0, seed)?;
    let mask = sample_mask(m, n, p, seed)?;
    let spec = NoiseSpec { k_z: noise.k_z, kind: noise.kind };
    let z = gen_noise(m, n, spec, seed)?;
    let obs = observe(&gt, &mask, &z)?;
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let tag = |f: MatrixFile| f.with("r", r).with("eps0", eps0).with("seed", seed).with("p", p).with("k_a", gt.k_a).with("k_z", noise.bound());
    let paths = [dir.join("truth.txt"), dir.join("mask.txt"), dir.join("observed.txt")];
    write_matrix(&paths[0], &tag(MatrixFile::new(gt.a.clone())))?;
    write_matrix(&paths[1], &tag(MatrixFile::new(mask_matrix(m, n, &mask.mask))))?;
    write_matrix(&paths[2], &tag(MatrixFile::new(obs.observed)))?;
    emit(
        cli.format,
        &GenerateReport {
            m,
            n,
            r,
            seed,
            p,
            omega_size: mask.omega_size,
            p_hat: mask.p_hat,
            k_a: gt.k_a,
            k_z: noise.bound(),
            truth: paths[0].display().to_string(),
            mask: paths[1].display().to_string(),
            observed: paths[2].display().to_string(),
        },
    )
}

#[derive(Serialize)]
struct RecoverReport {
    method: &'static str,
    s: usize,
    p_hat: f64,
    threshold: f64,
    /// Space separated leading singular values (AR2 only).
    sigma_hat: String,
    exact: Option<bool>,
    error_count: Option<usize>,
    output: String,
}

/// A value from the command line, else from the observed file's header.
fn pick<T: std::str::FromStr>(arg: Option<T>, file: &MatrixFile, key: &str) -> Result<T> {
    match arg {
        Some(x) => Ok(x),
        None => file
            .parse(key)
            .map_err(|reason| Error::config(key, format!("not given on the command line and {reason} in the observed file"))),
    }
}

fn recover(cli: &Cli, a: &RecoverArgs) -> Result<()> {
    let observed = read_matrix(&a.observed)?;
    let mask_file = read_matrix(&a.mask)?;
    let (m, n) = observed.data.shape();
    if mask_file.data.shape() != (m, n) {
        return Err(exactcomp_core::Error::Shape { expected: (m, n), got: mask_file.data.shape() }.into());
    }
    let flags = mask_flags(&mask_file.data).map_err(|reason| Error::Parse { path: a.mask.display().to_string(), message: reason })?;
    let omega_size = flags.iter().filter(|&&x| x).count();
    let truth = a.truth.as_deref().map(read_matrix).transpose()?;
    let eps0: f64 = pick(a.eps0, &observed, "eps0")?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let out_path = dir.join("recovered.txt");

    let (method, s, p_hat, threshold, sigma_hat, a_out) = if a.baseline {
        let r: usize = pick(a.r_max, &observed, "r")?;
        let p: f64 = pick(None, &observed, "p").unwrap_or(omega_size as f64 / (m * n) as f64);
        let mu = match (a.mu, &truth) {
            (Some(mu), _) => mu,
            (None, Some(t)) => baseline_coherence(&exactcomp_core::linalg::svd(&t.data)?, r),
            (None, None) => return Err(Error::config("mu", "required for the baseline without --truth")),
        };
        let res = ar_recover_baseline(&observed.data, p, mu, r, eps0)?;
        ("ar", res.s, p, res.threshold, String::new(), res.a_out)
    } else {
        let r_max: usize = pick(a.r_max, &observed, "r")?;
        let mut cfg = RecoveryConfig::new(eps0, r_max, pick(a.k_a, &observed, "k_a")?, pick(a.k_z, &observed, "k_z")?);
        if let Some(c) = a.gap_constant {
            cfg.gap_constant = c;
        }
        let res = ar2_recover(&observed.data, omega_size, &cfg)?;
        let sig = res.sigma_hat.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        ("ar2", res.s, res.p_hat, res.threshold_used, sig, res.a_out)
    };
    write_matrix(&out_path, &MatrixFile::new(a_out.clone()).with("eps0", eps0).with("s", s))?;
    let verdict = truth.as_ref().map(|t| score(&a_out, &t.data, eps0)).transpose()?;
    emit(
        cli.format,
        &RecoverReport {
            method,
            s,
            p_hat,
            threshold,
            sigma_hat,
            exact: verdict.map(|v| v.is_exact()),
            error_count: verdict.map(|v| match v {
                Verdict::Exact => 0,
                Verdict::EntryErrors { count, .. } => count,
            }),
            output: out_path.display().to_string(),
        },
    )?;
    std::io::stdout().flush().map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn score(a_out: &DenseMatrix, truth: &DenseMatrix, eps0: f64) -> Result<Verdict> {
    Ok(verdict_against(a_out, truth, eps0)?)
}
