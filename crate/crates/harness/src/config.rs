//! Experiment configuration, read from TOML with unknown keys rejected.
//!
//! ```toml
//! kind = "recovery_sweep"
//! m = 500
//! n = 500
//! r = 3
//! r_max = 3
//! eps0 = 1.0
//! b = 2
//! densities = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5]
//! trials = 50
//! seed = 7
//! output = "runs/sweep"
//!
//! [noise]
//! kind = "uniform_bounded"
//! k_z = 1.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use exactcomp_core::perturbation::HypothesisPolicy;
use exactcomp_core::problem::{NoiseKind, NoiseSpec};
use exactcomp_core::recovery::DEFAULT_GAP_CONSTANT;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RecoverySweep,
    BoundCampaign,
    SeriesCheck,
    CoeffVerify,
    SemiIsoCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RecoverySweep => "recovery_sweep",
            ExperimentKind::BoundCampaign => "bound_campaign",
            ExperimentKind::SeriesCheck => "series_check",
            ExperimentKind::CoeffVerify => "coeff_verify",
            ExperimentKind::SemiIsoCheck => "semi_iso_check",
        }
    }

    pub fn is_recovery(self) -> bool {
        matches!(self, ExperimentKind::RecoverySweep | ExperimentKind::BoundCampaign)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    #[serde(default)]
    pub k_z: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { kind: NoiseKind::Zero, k_z: 0.0 }
    }
}

impl NoiseSection {
    pub fn spec(&self) -> NoiseSpec {
        NoiseSpec { k_z: self.k_z, kind: self.kind }
    }

    /// Bound on `|Z_ij|` actually used, 0 for the zero model.
    pub fn bound(&self) -> f64 {
        if self.kind == NoiseKind::Zero {
            0.0
        } else {
            self.k_z
        }
    }
}

/// Settings for `series_check`: one 24×24 fixture per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesSection {
    pub scale: f64,
    /// Value of `R₁ ∨ R₂` the noise is scaled to.
    pub target: f64,
    pub gamma_max: usize,
    pub nu: u32,
    /// 0-based indices of the tracked triplets.
    pub s: Vec<usize>,
}

impl Default for SeriesSection {
    fn default() -> Self {
        SeriesSection { scale: 1.0, target: 0.1, gamma_max: 40, nu: 0, s: vec![0, 1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoeffSection {
    pub gamma_max: usize,
}

impl Default for CoeffSection {
    fn default() -> Self {
        CoeffSection { gamma_max: 6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemiIsoSection {
    pub m_param: f64,
    pub a_max: usize,
    pub p_moment: u32,
    pub d_even: f64,
    pub d_odd: f64,
    pub policy: HypothesisPolicy,
}

impl Default for SemiIsoSection {
    fn default() -> Self {
        SemiIsoSection { m_param: 1.0, a_max: 3, p_moment: 1, d_even: 1024.0, d_odd: 1024.0, policy: HypothesisPolicy::Record }
    }
}

fn default_eps0() -> f64 {
    1.0
}

fn default_b() -> u32 {
    2
}

fn default_densities() -> Vec<f64> {
    vec![1.0]
}

fn default_trials() -> usize {
    1
}

fn default_gap_constant() -> f64 {
    DEFAULT_GAP_CONSTANT
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    /// Defaults to `r`.
    #[serde(default)]
    pub r_max: Option<usize>,
    #[serde(default = "default_eps0")]
    pub eps0: f64,
    /// Factor entries are drawn from `{−b, …, b}`.
    #[serde(default = "default_b")]
    pub b: u32,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default = "default_densities")]
    pub densities: Vec<f64>,
    /// Trials per density cell; sample count for `coeff_verify`.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_gap_constant")]
    pub gap_constant: f64,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub series: SeriesSection,
    #[serde(default)]
    pub coeff: CoeffSection,
    #[serde(default)]
    pub semi_iso: SemiIsoSection,
}

impl ExperimentConfig {
    /// A small valid configuration of the given kind.
    pub fn defaults(kind: ExperimentKind) -> ExperimentConfig {
        let (m, n, r, trials) = match kind {
            ExperimentKind::RecoverySweep | ExperimentKind::BoundCampaign => (100, 100, 3, 10),
            ExperimentKind::SeriesCheck => (24, 24, 4, 1),
            ExperimentKind::CoeffVerify => (8, 8, 4, 500),
            ExperimentKind::SemiIsoCheck => (200, 200, 3, 500),
        };
        ExperimentConfig {
            kind,
            m,
            n,
            r,
            r_max: None,
            eps0: default_eps0(),
            b: default_b(),
            noise: NoiseSection::default(),
            densities: if kind.is_recovery() { vec![0.3, 0.6, 1.0] } else { default_densities() },
            trials,
            gap_constant: default_gap_constant(),
            seed: 0,
            output: default_output(),
            series: SeriesSection::default(),
            coeff: CoeffSection::default(),
            semi_iso: SemiIsoSection::default(),
        }
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_string(), message: e.message().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        ExperimentConfig::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn r_max(&self) -> usize {
        self.r_max.unwrap_or(self.r)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(Error::config(field, "must be positive"))
            } else {
                Ok(())
            }
        };
        let positive_f = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        };
        positive("m", self.m)?;
        positive("n", self.n)?;
        positive("r", self.r)?;
        positive("trials", self.trials)?;
        positive_f("eps0", self.eps0)?;
        positive_f("gap_constant", self.gap_constant)?;
        if self.b == 0 {
            return Err(Error::config("b", "must be positive"));
        }
        let r_max = self.r_max();
        if r_max == 0 {
            return Err(Error::config("r_max", "must be positive"));
        }
        if !(self.noise.k_z >= 0.0 && self.noise.k_z.is_finite()) {
            return Err(Error::config("noise.k_z", format!("must be finite and nonnegative, got {}", self.noise.k_z)));
        }
        if self.densities.is_empty() {
            return Err(Error::config("densities", "must not be empty"));
        }
        for (i, &p) in self.densities.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::config("densities", format!("entry {i} = {p} outside (0, 1]")));
            }
            if i > 0 && p <= self.densities[i - 1] {
                return Err(Error::config("densities", format!("not strictly increasing at entry {i}")));
            }
        }
        let mn = self.m.min(self.n);
        match self.kind {
            ExperimentKind::RecoverySweep | ExperimentKind::BoundCampaign => {
                if self.r > mn {
                    return Err(Error::config("r", format!("{} exceeds min(m, n) = {mn}", self.r)));
                }
                if r_max < self.r || r_max > mn {
                    return Err(Error::config("r_max", format!("{r_max} outside {}..={mn}", self.r)));
                }
            }
            ExperimentKind::SeriesCheck => {
                let s = &self.series;
                positive_f("series.scale", s.scale)?;
                positive_f("series.target", s.target)?;
                positive("series.gamma_max", s.gamma_max)?;
                if s.nu > 1 {
                    return Err(Error::config("series.nu", "must be 0 or 1"));
                }
                if s.s.is_empty() || s.s.iter().any(|&i| i >= 4) {
                    return Err(Error::config("series.s", "must be a nonempty subset of 0..4"));
                }
            }
            ExperimentKind::CoeffVerify => {
                positive("coeff.gamma_max", self.coeff.gamma_max)?;
                if self.r > 32 {
                    return Err(Error::config("r", "coefficient campaigns support r <= 32"));
                }
            }
            ExperimentKind::SemiIsoCheck => {
                let s = &self.semi_iso;
                if self.r > mn {
                    return Err(Error::config("r", format!("{} exceeds min(m, n) = {mn}", self.r)));
                }
                if !(s.m_param >= 1.0 && s.m_param.is_finite()) {
                    return Err(Error::config("semi_iso.m_param", "must be at least 1"));
                }
                if s.p_moment == 0 {
                    return Err(Error::config("semi_iso.p_moment", "must be positive"));
                }
                positive_f("semi_iso.d_even", s.d_even)?;
                positive_f("semi_iso.d_odd", s.d_odd)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "kind = \"recovery_sweep\"\nm = 20\nn = 30\nr = 2\nseed = 1\n";

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_toml(text, "t") {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(BASE, "t").unwrap();
        assert_eq!(cfg.r_max(), 2);
        assert_eq!(cfg.densities, vec![1.0]);
        assert_eq!(cfg.gap_constant, 20.0);
        assert_eq!(cfg.noise.kind, NoiseKind::Zero);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ExperimentConfig::from_toml(&format!("{BASE}rmax = 3\n"), "t").unwrap_err();
        assert!(err.to_string().contains("rmax"), "{err}");
        assert_eq!(err.exit_code(), 1);
        let err = ExperimentConfig::from_toml(&format!("{BASE}[noise]\nkind = \"zero\"\nbound = 1\n"), "t").unwrap_err();
        assert!(err.to_string().contains("bound"), "{err}");
    }

    #[test]
    fn validation_names_the_field() {
        assert_eq!(field_of(&format!("{BASE}densities = [0.5, 0.5]\n")), "densities");
        assert_eq!(field_of(&format!("{BASE}densities = [0.0, 0.5]\n")), "densities");
        assert_eq!(field_of(&format!("{BASE}densities = [0.5, 1.5]\n")), "densities");
        assert_eq!(field_of(&format!("{BASE}trials = 0\n")), "trials");
        assert_eq!(field_of(&format!("{BASE}r_max = 1\n")), "r_max");
        assert_eq!(field_of(&format!("{BASE}eps0 = -1.0\n")), "eps0");
        assert_eq!(field_of(&format!("{BASE}[noise]\nkind = \"uniform_bounded\"\nk_z = -1.0\n")), "noise.k_z");
        assert_eq!(field_of(&BASE.replace("m = 20", "m = 0")), "m");
    }

    #[test]
    fn round_trips_through_toml() {
        for kind in [
            ExperimentKind::RecoverySweep,
            ExperimentKind::BoundCampaign,
            ExperimentKind::SeriesCheck,
            ExperimentKind::CoeffVerify,
            ExperimentKind::SemiIsoCheck,
        ] {
            let cfg = ExperimentConfig::defaults(kind);
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml(), "t").unwrap(), cfg);
        }
    }
}
