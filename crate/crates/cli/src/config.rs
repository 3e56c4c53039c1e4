//! TOML run configuration.
//!
//! User-facing frequencies are in Hz; they are converted to rad/s once, in
//! [`RunConfig::basis_config`]. Relative paths resolve against the
//! directory holding the config file.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use modred::bases::{BasisConfig, Method, Orthogonalization, RayleighPolicy};
use modred::eigen::BandSpec;
use modred::enrich::{EnrichmentConfig, NormMode};
use modred::model::io::ComponentFiles;
use modred::model::MaterialSpec;
use modred::quality::PairingRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSource,
    pub band: BandHz,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Coupling sampling frequencies; defaults to band start, middle, end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omegas_hz: Option<Vec<f64>>,
    #[serde(default = "default_sv_threshold")]
    pub sv_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rayleigh_keep: Option<usize>,
    #[serde(default)]
    pub rayleigh_policy: RayleighPolicy,
    #[serde(default = "default_orthogonalization")]
    pub orthogonalization: Orthogonalization,
    /// Upper edge of the Craig-Bampton fixed-interface mode band; defaults
    /// to the study band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cb_mode_f_max_hz: Option<f64>,
    #[serde(default)]
    pub pairing: PairingRule,
    #[serde(default)]
    pub enrichment: EnrichmentSection,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSource {
    Chain {
        n1: usize,
        n2: usize,
        #[serde(default = "MaterialSpec::unit")]
        material: MaterialSpec,
        #[serde(default = "one")]
        element_length: f64,
        #[serde(default = "one")]
        area: f64,
    },
    Box {
        divisions1: [usize; 3],
        divisions2: [usize; 3],
        #[serde(default = "MaterialSpec::steel")]
        material: MaterialSpec,
        element_size: f64,
    },
    Files {
        component1: ComponentFiles,
        component2: ComponentFiles,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandHz {
    #[serde(default)]
    pub f_min: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialBasis {
    /// The basis written by `reduce` for the configured method.
    #[default]
    Method,
    /// Free-free modes only.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrichmentSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub initial_basis: InitialBasis,
    #[serde(default = "default_epsilon_tol")]
    pub epsilon_tol: f64,
    #[serde(default = "default_arnoldi")]
    pub arnoldi_per_mode: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub norm: NormMode,
}

impl Default for EnrichmentSection {
    fn default() -> Self {
        let d = EnrichmentConfig::default();
        Self {
            enabled: true,
            initial_basis: InitialBasis::Method,
            epsilon_tol: d.epsilon_tol,
            arnoldi_per_mode: d.arnoldi_per_mode,
            max_rounds: d.max_rounds,
            norm: d.norm_mode,
        }
    }
}

fn default_method() -> Method {
    Method::Svd
}
fn default_sv_threshold() -> f64 {
    0.2
}
fn default_orthogonalization() -> Orthogonalization {
    Orthogonalization::AgainstBase
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_epsilon_tol() -> f64 {
    EnrichmentConfig::default().epsilon_tol
}
fn default_arnoldi() -> usize {
    EnrichmentConfig::default().arnoldi_per_mode
}
fn default_max_rounds() -> usize {
    EnrichmentConfig::default().max_rounds
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl RunConfig {
    /// Reads, resolves relative paths and validates; nothing is written.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let ModelSource::Files { component1, component2 } = &mut self.model {
            for c in [component1, component2] {
                fix(&mut c.mass);
                fix(&mut c.stiffness);
                fix(&mut c.partition);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.model {
            ModelSource::Chain { material, .. } | ModelSource::Box { material, .. } => {
                material.validate().context("model.material")?
            }
            ModelSource::Files { .. } => {}
        }
        let band = self.band().context("band")?;
        if let Some(omegas) = &self.omegas_hz {
            if omegas.is_empty() {
                bail!("omegas_hz: at least one frequency is required");
            }
            for &f in omegas {
                if !(0.0..=2.0 * band.f_max).contains(&f) {
                    bail!(
                        "omegas_hz: {f} Hz lies outside [0, {}] Hz (twice the band's upper edge)",
                        2.0 * band.f_max
                    );
                }
            }
        }
        if !(self.sv_threshold > 0.0) {
            bail!("sv_threshold must be positive, got {}", self.sv_threshold);
        }
        if let Some(f) = self.cb_mode_f_max_hz {
            if !(f > band.f_min) {
                bail!("cb_mode_f_max_hz must exceed band.f_min, got {f}");
            }
        }
        self.enrichment_config().validate().context("enrichment")?;
        Ok(())
    }

    pub fn band(&self) -> Result<BandSpec> {
        Ok(BandSpec::new(self.band.f_min, self.band.f_max)?)
    }

    pub fn basis_config(&self) -> Result<BasisConfig> {
        let band = self.band()?;
        let mut cfg = BasisConfig::new(band);
        if let Some(f) = &self.omegas_hz {
            cfg.omegas = f.iter().map(|f| TAU * f).collect();
        }
        if let (Method::Cb, Some(f)) = (self.method, self.cb_mode_f_max_hz) {
            cfg.mode_band = Some(BandSpec::new(band.f_min, f)?);
        }
        cfg.sv_threshold = self.sv_threshold;
        cfg.rayleigh_keep = self.rayleigh_keep;
        cfg.rayleigh_policy = self.rayleigh_policy;
        cfg.orthogonalization = self.orthogonalization;
        Ok(cfg)
    }

    pub fn enrichment_config(&self) -> EnrichmentConfig {
        let e = &self.enrichment;
        EnrichmentConfig {
            epsilon_tol: e.epsilon_tol,
            arnoldi_per_mode: e.arnoldi_per_mode,
            max_rounds: e.max_rounds,
            norm_mode: e.norm,
            ..EnrichmentConfig::default()
        }
    }

    /// SHA-256 of the effective configuration, after command-line overrides.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
