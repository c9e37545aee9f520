//! Run configuration: TOML on disk, validated once at load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::GridSpec;
use crate::conditioning::{number_to_moment, subtraction_polynomial, NumberPolynomial};
use crate::error::{Error, Result};
use crate::estimator::BinSpec;
use crate::fock::C64;
use crate::fock::{squeezed_leakage, DEFAULT_N_TRUNC};
use crate::pattern::{ConditionSpec, DEFAULT_STEP, DEFAULT_X_MAX};
use crate::sampler::{AngleSchedule, GaussianModel};
use nalgebra::DMatrix;

pub const DEFAULT_SQUEEZING: f64 = 0.5;
pub const DEFAULT_TAP: f64 = 0.10;
pub const DEFAULT_EFFICIENCY: f64 = 0.98;
pub const DEFAULT_SEED: u64 = 20_231_017;

/// Squeezing source. Give either `r` (optionally with a target `purity`) or
/// both quadrature variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_anti: Option<f64>,
    #[serde(default = "default_tap")]
    pub tap_power: f64,
    #[serde(default = "default_eff")]
    pub eff_a: f64,
    #[serde(default = "default_eff")]
    pub eff_b: f64,
}

fn default_tap() -> f64 {
    DEFAULT_TAP
}

fn default_eff() -> f64 {
    DEFAULT_EFFICIENCY
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            r: Some(DEFAULT_SQUEEZING),
            purity: None,
            v_sq: None,
            v_anti: None,
            tap_power: DEFAULT_TAP,
            eff_a: DEFAULT_EFFICIENCY,
            eff_b: DEFAULT_EFFICIENCY,
        }
    }
}

/// Variances of squeezing `r` followed by loss `lambda`.
fn lossy_variances(r: f64, lambda: f64) -> (f64, f64) {
    (
        lambda * (-2.0 * r).exp() + 1.0 - lambda,
        lambda * (2.0 * r).exp() + 1.0 - lambda,
    )
}

impl ModelConfig {
    pub fn resolve(&self) -> Result<GaussianModel> {
        let (v_sq, v_anti) = match (self.r, self.v_sq, self.v_anti) {
            (Some(r), None, None) => {
                if !(r >= 0.0) {
                    return Err(Error::Config(format!(
                        "squeezing r = {r} must be non-negative"
                    )));
                }
                match self.purity {
                    None => lossy_variances(r, 1.0),
                    Some(p) => {
                        if !(p > 0.0 && p <= 1.0) {
                            return Err(Error::Config(format!("purity {p} must lie in (0, 1]")));
                        }
                        // loss applied after squeezing lowers purity monotonically on [1/2, 1]
                        let purity_at = |l: f64| {
                            let (a, b) = lossy_variances(r, l);
                            1.0 / (a * b).sqrt()
                        };
                        if p < purity_at(0.5) {
                            return Err(Error::Config(format!(
                                "purity {p} below {:.4}, the least reachable by loss at r = {r}",
                                purity_at(0.5)
                            )));
                        }
                        let (mut lo, mut hi) = (0.5, 1.0);
                        for _ in 0..200 {
                            let mid = 0.5 * (lo + hi);
                            if purity_at(mid) < p {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        lossy_variances(r, hi)
                    }
                }
            }
            (None, Some(a), Some(b)) if self.purity.is_none() => (a, b),
            _ => {
                return Err(Error::Config(
                    "model needs either `r` (with optional `purity`) or both `v_sq` and `v_anti`"
                        .into(),
                ))
            }
        };
        GaussianModel::new(v_sq, v_anti, self.tap_power, self.eff_a, self.eff_b)
            .map_err(|e| Error::Config(format!("model: {e}")))
    }
}

/// How records are weighted by the conditioning arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConditioningSpec {
    None,
    Polynomial {
        k: usize,
        j_max: usize,
    },
    RawNumberPoly {
        coeffs: Vec<f64>,
    },
    Pattern {
        n: usize,
    },
    /// Coefficients `c` of `sum c_mn |n><m|`, real and imaginary parts.
    PatternCoefficients {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Vec<Vec<f64>>,
    },
}

impl ConditioningSpec {
    pub fn label(&self) -> String {
        match self {
            ConditioningSpec::None => "unconditioned".into(),
            ConditioningSpec::Polynomial { k, j_max } => format!("poly_k{k}_j{j_max}"),
            ConditioningSpec::RawNumberPoly { coeffs } => {
                let c: Vec<String> = coeffs.iter().map(|c| format!("{c}")).collect();
                format!("poly_raw_{}", c.join("_"))
                    .replace('.', "p")
                    .replace('-', "m")
            }
            ConditioningSpec::Pattern { n } => format!("pattern_n{n}"),
            ConditioningSpec::PatternCoefficients { re, .. } => {
                format!("pattern_coeffs_d{}", re.len())
            }
        }
    }

    /// Photon-number polynomial for the polynomial variants.
    pub fn number_polynomial(&self) -> Result<Option<NumberPolynomial>> {
        Ok(match self {
            ConditioningSpec::Polynomial { k, j_max } => Some(subtraction_polynomial(*k, *j_max)?),
            ConditioningSpec::RawNumberPoly { coeffs } => Some(NumberPolynomial::from_f64(coeffs)?),
            _ => None,
        })
    }

    /// Ancilla operator for the pattern-function variants.
    pub fn condition_spec(&self) -> Result<Option<ConditionSpec>> {
        Ok(match self {
            ConditioningSpec::Pattern { n } => Some(ConditionSpec::number(*n)),
            ConditioningSpec::PatternCoefficients { re, im } => {
                let d = re.len();
                let c = DMatrix::from_fn(d, d, |i, j| {
                    C64::new(re[i][j], if im.is_empty() { 0.0 } else { im[i][j] })
                });
                Some(ConditionSpec::from_coefficients(&c, 1.0)?)
            }
            _ => None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let ConditioningSpec::Pattern { n } = self {
            if *n > crate::pattern::MAX_M {
                return Err(Error::Config(format!(
                    "pattern n = {n} above {}",
                    crate::pattern::MAX_M
                )));
            }
        }
        if let Some(p) = self.number_polynomial()? {
            number_to_moment(&p)?;
        }
        if let ConditioningSpec::PatternCoefficients { re, im } = self {
            let d = re.len();
            let square = |m: &Vec<Vec<f64>>| m.iter().all(|row| row.len() == d);
            if d == 0 || !square(re) || !(im.is_empty() || (im.len() == d && square(im))) {
                return Err(Error::Config(
                    "pattern coefficients must be square matrices".into(),
                ));
            }
            if d > crate::pattern::MAX_M + 1 {
                return Err(Error::Config(format!(
                    "pattern coefficients of size {d} too large"
                )));
            }
            self.condition_spec()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// Fock dimension of the reconstructed matrix, `M + 1`.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub wigner: GridSpec,
    #[serde(default)]
    pub histogram: BinSpec,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_x_max")]
    pub pattern_x_max: f64,
    #[serde(default = "default_step")]
    pub pattern_step: f64,
    /// Truncation of the exact reference states.
    #[serde(default = "default_n_trunc")]
    pub n_trunc: usize,
}

fn default_dim() -> usize {
    6
}

fn default_bootstrap() -> usize {
    200
}

fn default_x_max() -> f64 {
    DEFAULT_X_MAX
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_n_trunc() -> usize {
    DEFAULT_N_TRUNC
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            wigner: GridSpec::default(),
            histogram: BinSpec::default(),
            bootstrap: default_bootstrap(),
            pattern_x_max: DEFAULT_X_MAX,
            pattern_step: DEFAULT_STEP,
            n_trunc: DEFAULT_N_TRUNC,
        }
    }
}

fn default_conditioning() -> Vec<ConditioningSpec> {
    vec![
        ConditioningSpec::Polynomial { k: 1, j_max: 3 },
        ConditioningSpec::Pattern { n: 1 },
    ]
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: AngleSchedule,
    #[serde(default = "default_conditioning")]
    pub conditioning: Vec<ConditioningSpec>,
    #[serde(default)]
    pub reconstruction: ReconstructionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            model: ModelConfig::default(),
            schedule: AngleSchedule::default(),
            conditioning: default_conditioning(),
            reconstruction: ReconstructionConfig::default(),
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.resolve()?;
        self.schedule
            .validate()
            .map_err(|e| Error::Config(format!("schedule: {e}")))?;
        if self.schedule.samples_per_angle == 0 {
            return Err(Error::Config("samples_per_angle must be positive".into()));
        }
        for c in &self.conditioning {
            c.validate()
                .map_err(|e| Error::Config(format!("conditioning {}: {e}", c.label())))?;
        }
        let r = &self.reconstruction;
        r.wigner
            .validate()
            .map_err(|e| Error::Config(format!("wigner grid: {e}")))?;
        BinSpec::new(r.histogram.lo, r.histogram.hi, r.histogram.bins)
            .map_err(|e| Error::Config(format!("histogram: {e}")))?;
        if r.dim < 2 || r.dim > crate::pattern::MAX_M + 1 {
            return Err(Error::Config(format!(
                "reconstruction dim {} outside [2, 31]",
                r.dim
            )));
        }
        if r.bootstrap != 0 && r.bootstrap < crate::estimator::MIN_REPLICATES {
            return Err(Error::Config(format!(
                "bootstrap must be 0 or at least {}",
                crate::estimator::MIN_REPLICATES
            )));
        }
        if r.n_trunc < r.dim {
            return Err(Error::Config(
                "n_trunc must be at least the reconstruction dimension".into(),
            ));
        }
        let _ = model;
        Ok(())
    }

    pub fn gaussian_model(&self) -> Result<GaussianModel> {
        self.model.resolve()
    }

    /// Whether the exact reference states can be built at this truncation.
    pub fn oracle_available(&self) -> Result<bool> {
        let (r, _) = self.gaussian_model()?.pure_equivalent()?;
        Ok(squeezed_leakage(r, self.reconstruction.n_trunc) <= crate::fock::LEAKAGE_TOLERANCE)
    }

    /// SHA-256 of the canonical JSON form, output location excluded.
    pub fn hash(&self) -> [u8; 32] {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = c.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash_hex().len(), 64);
        let m = c.gaussian_model().unwrap();
        assert_eq!(m.tap_power, 0.10);
        assert_eq!(m.eff_a, 0.98);
        assert_eq!(c.schedule.indices.len(), 12);
        assert_eq!(c.schedule.samples_per_angle, 1_000_000);
    }

    #[test]
    fn parses_conditioning_specs() {
        let c = RunConfig::from_toml_str(
            r#"
            seed = 5
            [model]
            r = 0.4
            tap_power = 0.15
            [[conditioning]]
            type = "polynomial"
            k = 2
            j_max = 3
            [[conditioning]]
            type = "raw_number_poly"
            coeffs = [0, 1]
            [[conditioning]]
            type = "pattern"
            n = 2
            [[conditioning]]
            type = "none"
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(
            c.conditioning[0],
            ConditioningSpec::Polynomial { k: 2, j_max: 3 }
        );
        assert_eq!(c.conditioning[3], ConditioningSpec::None);
        assert_eq!(c.conditioning[1].label(), "poly_raw_0_1");
        assert_eq!(c.gaussian_model().unwrap().tap_power, 0.15);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_toml_str("sed = 3").is_err());
        assert!(RunConfig::from_toml_str("[model]\nr = 0.3\nbogus = 1").is_err());
        assert!(RunConfig::from_toml_str("[model]\nr = 0.3\nv_sq = 0.5").is_err());
        assert!(RunConfig::from_toml_str(
            "[[conditioning]]\ntype = \"polynomial\"\nk = 1\nj_max = 6"
        )
        .is_err());
        assert!(
            RunConfig::from_toml_str("[schedule]\nindices = [0, 12]\nsamples_per_angle = 10")
                .is_err()
        );
        assert!(RunConfig::from_toml_str("[reconstruction]\nbootstrap = 10").is_err());
        let e = RunConfig::from_toml_str("[model]\nr = -1.0").unwrap_err();
        assert_eq!(e.kind(), crate::error::ErrorKind::Config);
    }

    #[test]
    fn purity_target_is_met() {
        let m = ModelConfig {
            r: Some(0.6),
            purity: Some(0.9),
            ..ModelConfig::default()
        }
        .resolve()
        .unwrap();
        assert!((m.purity() - 0.9).abs() < 1e-12);
        assert!(m.v_sq < 1.0);
        assert!(ModelConfig {
            r: Some(0.6),
            purity: Some(0.2),
            ..ModelConfig::default()
        }
        .resolve()
        .is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::default();
        let b = RunConfig {
            output_dir: Some("/tmp/x".into()),
            ..RunConfig::default()
        };
        let c = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
