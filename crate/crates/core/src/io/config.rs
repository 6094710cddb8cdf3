//! Run configuration, read from TOML.
//!
//! Every table rejects unknown keys. Relative paths resolve against the
//! directory holding the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LatentVector;
use crate::prior::{Grid, KernelSpec, PriorSpec};
use crate::sampler::{Algorithm, Init, SamplerConfig};
use crate::uq::DensityEstimator;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSettings {
    /// Endmember CSV. The builtin synthetic set is used when absent.
    pub endmembers: Option<PathBuf>,
    pub cube: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub chain: Option<PathBuf>,
    /// Abundance stack whose first frame supplies the observed pixels.
    pub abundances: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    /// Abundance stack whose first frame initializes the sampler.
    pub init: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub width: usize,
    pub height: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            width: 1,
            height: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSettings {
    /// Number of materials.
    pub p: usize,
    pub sigma_a2: f64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
}

/// Exactly one of the two must be set for steps that need a noise level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSettings {
    /// `inf` produces noiseless data.
    pub snr_db: Option<f64>,
    pub sigma2: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    PriorDraw,
    UniformImage,
    /// First frame of `paths.init`.
    FromFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    pub algorithm: Algorithm,
    pub step_size: f64,
    pub n_steps: usize,
    /// Defaults to a fifth of `n_steps`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "one")]
    pub thinning: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitKind,
}

fn one() -> usize {
    1
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::MirrorLangevin,
            step_size: 1e-3,
            n_steps: 5000,
            burn_in: None,
            thinning: 1,
            seed: 0,
            init: InitKind::PriorDraw,
        }
    }
}

impl SamplerSettings {
    /// Sampler settings; `init` must already be resolved when it comes from a
    /// file.
    pub fn to_config(&self, init: Init) -> SamplerConfig {
        let mut cfg = SamplerConfig::new(self.step_size, self.n_steps, self.seed);
        if let Some(b) = self.burn_in {
            cfg.burn_in = b;
        }
        cfg.thinning = self.thinning;
        cfg.init = init;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UqSettings {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Chosen from P and the sample count when absent.
    #[serde(default)]
    pub estimator: Option<DensityEstimator>,
    /// Pixels that get an HDR and a ternary export.
    #[serde(default)]
    pub hdr_pixels: Vec<usize>,
}

fn default_alpha() -> f64 {
    0.1
}

impl Default for UqSettings {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            estimator: None,
            hdr_pixels: Vec::new(),
        }
    }
}

impl UqSettings {
    pub fn estimator_for(&self, p: usize, samples: usize) -> DensityEstimator {
        self.estimator
            .clone()
            .unwrap_or_else(|| DensityEstimator::default_for(p, samples))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpSettings {
    /// Observation noise variance, in latent units.
    #[serde(default)]
    pub nugget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSettings {
    #[serde(default)]
    pub seed: u64,
    /// Number of prior draws written by `sample-prior`.
    #[serde(default = "one")]
    pub count: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self { seed: 0, count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: PathSettings,
    #[serde(default)]
    pub grid: GridSettings,
    pub prior: PriorSettings,
    #[serde(default)]
    pub noise: NoiseSettings,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub uq: UqSettings,
    #[serde(default)]
    pub interp: InterpSettings,
    #[serde(default)]
    pub synth: SynthSettings,
}

impl RunConfig {
    /// Parses and validates; relative paths are left untouched.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses, validates and resolves relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.endmembers,
            &mut p.cube,
            &mut p.truth,
            &mut p.chain,
            &mut p.abundances,
            &mut p.mask,
            &mut p.init,
            &mut p.output_dir,
        ] {
            if let Some(path) = slot.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.grid.width == 0 || self.grid.height == 0 {
            return bad(format!(
                "grid must be non-empty, got {}x{}",
                self.grid.width, self.grid.height
            ));
        }
        self.prior_spec()
            .map_err(|e| Error::Config(format!("prior: {e}")))?;
        if let (Some(_), Some(_)) = (self.noise.snr_db, self.noise.sigma2) {
            return bad("noise: set either snr_db or sigma2, not both".into());
        }
        if let Some(snr) = self.noise.snr_db {
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return bad(format!("noise: invalid snr_db {snr}"));
            }
        }
        if let Some(s2) = self.noise.sigma2 {
            if !(s2 > 0.0) {
                return bad(format!("noise: sigma2 must be positive, got {s2}"));
            }
        }
        let init = match self.sampler.init {
            InitKind::PriorDraw | InitKind::FromFile => Init::PriorDraw,
            InitKind::UniformImage => Init::UniformImage,
        };
        self.sampler
            .to_config(init)
            .validate()
            .map_err(|e| Error::Config(format!("sampler: {e}")))?;
        if !(self.uq.alpha > 0.0 && self.uq.alpha < 1.0) {
            return bad(format!(
                "uq: alpha must lie in (0, 1), got {}",
                self.uq.alpha
            ));
        }
        if let Some(DensityEstimator::Histogram { bins }) = &self.uq.estimator {
            if *bins == 0 {
                return bad("uq: histogram needs at least one bin".into());
            }
        }
        let n = self.grid.width * self.grid.height;
        if let Some(&px) = self.uq.hdr_pixels.iter().find(|&&px| px >= n) {
            return bad(format!("uq: hdr pixel {px} outside a grid of {n} pixels"));
        }
        if !(self.interp.nugget >= 0.0 && self.interp.nugget.is_finite()) {
            return bad(format!(
                "interp: nugget must be nonnegative, got {}",
                self.interp.nugget
            ));
        }
        if self.synth.count == 0 {
            return bad("synth: count must be at least 1".into());
        }
        Ok(())
    }

    pub fn prior_spec(&self) -> Result<PriorSpec> {
        let spec = PriorSpec::new(self.prior.p, self.prior.sigma_a2, self.prior.kernel.clone())?;
        match &self.prior.mean {
            Some(m) => spec.with_mean(LatentVector::new(m.clone())?),
            None => Ok(spec),
        }
    }

    pub fn grid(&self) -> Grid {
        Grid::raster(self.grid.width, self.grid.height)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Required path, or a configuration error naming the key.
    pub fn require_path<'a>(&self, slot: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        slot.as_deref()
            .ok_or_else(|| Error::Config(format!("paths.{key} is required for this command")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
width = 4
height = 3

[prior]
p = 3
sigma_a2 = 0.25
kernel = { kind = "exponential", length_scale = 2.0 }

[noise]
snr_db = 15.0

[sampler]
algorithm = "mirror-langevin"
step_size = 0.001
n_steps = 100
seed = 7
"#;

    #[test]
    fn parses_minimal_document() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.grid.width * cfg.grid.height, 12);
        assert_eq!(cfg.sampler.to_config(Init::PriorDraw).burn_in, 20);
        assert_eq!(cfg.uq.alpha, 0.1);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\nsteps = 3");
        assert!(matches!(
            RunConfig::from_toml_str(&text),
            Err(Error::Config(_))
        ));
        let text = MINIMAL.replace("[noise]", "[nois]");
        assert!(RunConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn ranges_are_validated() {
        for (from, to) in [
            ("sigma_a2 = 0.25", "sigma_a2 = -1.0"),
            ("p = 3", "p = 1"),
            ("n_steps = 100", "n_steps = 10\nburn_in = 10"),
            ("snr_db = 15.0", "snr_db = 15.0\nsigma2 = 0.1"),
            ("width = 4", "width = 0"),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(RunConfig::from_toml_str(&text).is_err(), "{to} accepted");
        }
    }

    #[test]
    fn infinite_snr_is_allowed() {
        let text = MINIMAL.replace("snr_db = 15.0", "snr_db = inf");
        assert_eq!(
            RunConfig::from_toml_str(&text).unwrap().noise.snr_db,
            Some(f64::INFINITY)
        );
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let text = format!("[paths]\ncube = \"cube.bin\"\n{MINIMAL}");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, text).unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.paths.cube.unwrap(), dir.path().join("cube.bin"));
    }
}
