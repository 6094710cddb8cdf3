//! Scripted experiments.
//!
//! [`run_ternary_scenario`] unmixes one pixel with three materials under a
//! broad prior and extracts the HDR of the abundance posterior.
//! [`run_spatial_comparison`] unmixes a small synthetic image twice, with a
//! spatial and an independent-pixel prior, and compares the uncertainty maps.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, LatentVector, SimplexVector};
use crate::io::{self, builtin_endmembers, synth_observe, AbundanceStackFile, Dtype};
use crate::prior::{
    build_gram, gp_prior_sample_latent, AbundanceImage, Grid, KernelSpec, PriorSpec,
};
use crate::sampler::{
    mirror_langevin, Init, ObservationCube, PosteriorModel, SampleChain, SamplerConfig,
};
use crate::uq::{self, hdr, DensityEstimator, HdrResult, ImageSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TernarySettings {
    pub truth: Vec<f64>,
    pub snr_db: f64,
    pub sigma_a2: f64,
    pub samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub step_size: f64,
    pub seed: u64,
    pub alpha: f64,
    pub estimator: DensityEstimator,
}

impl Default for TernarySettings {
    fn default() -> Self {
        Self {
            truth: vec![0.59, 0.01, 0.4],
            snr_db: 8.0,
            sigma_a2: 5.0,
            samples: 10_000,
            burn_in: 5_000,
            thinning: 40,
            step_size: 2e-3,
            seed: 2,
            alpha: 0.2,
            estimator: DensityEstimator::LatentKde {
                bandwidth: None,
                grid: 60,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct TernaryOutcome {
    pub settings: TernarySettings,
    pub observation: DMatrix<f64>,
    pub sigma2: f64,
    pub chain: SampleChain,
    pub samples: Vec<SimplexVector>,
    pub geodesic_mean: SimplexVector,
    pub euclidean_mean: SimplexVector,
    pub hdr: HdrResult,
}

#[derive(Serialize)]
struct TernaryReport<'a> {
    settings: &'a TernarySettings,
    sigma2: f64,
    retained: usize,
    geodesic_mean: &'a [f64],
    euclidean_mean: &'a [f64],
    hdr_alpha: f64,
    hdr_threshold: f64,
    hdr_components: usize,
    hdr_component_mass: &'a [f64],
    hdr_in_sample_coverage: f64,
}

impl TernaryOutcome {
    /// Ternary CSVs, the SVG overlay, the chain and a JSON report.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let export = io::export_ternary(
            &self.samples,
            &self.geodesic_mean,
            &self.euclidean_mean,
            Some(&self.hdr),
            true,
        )?;
        let mut files = export.write(dir, "ternary")?;
        let chain = dir.join("chain.bin");
        AbundanceStackFile::from_images(&self.chain.samples, Dtype::Float64)?.write(&chain)?;
        files.push(chain);
        let report = dir.join("report.json");
        io::write_json(
            &report,
            &TernaryReport {
                settings: &self.settings,
                sigma2: self.sigma2,
                retained: self.samples.len(),
                geodesic_mean: self.geodesic_mean.as_slice(),
                euclidean_mean: self.euclidean_mean.as_slice(),
                hdr_alpha: self.hdr.alpha,
                hdr_threshold: self.hdr.threshold,
                hdr_components: self.hdr.n_components,
                hdr_component_mass: &self.hdr.component_mass,
                hdr_in_sample_coverage: self.hdr.in_sample_coverage(),
            },
        )?;
        files.push(report);
        Ok(files)
    }
}

pub fn run_ternary_scenario(settings: &TernarySettings) -> Result<TernaryOutcome> {
    let p = settings.truth.len();
    if p != 3 {
        return Err(Error::InvalidDimension(format!(
            "the ternary scenario needs 3 materials, got {p}"
        )));
    }
    let truth = SimplexVector::new(settings.truth.clone())?;
    let endmembers = builtin_endmembers(p)?;
    let image = AbundanceImage::from_pixels(&[truth], 1, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let synth = synth_observe(&endmembers, &image, settings.snr_db, &mut rng)?;

    let prior = PriorSpec::new(p, settings.sigma_a2, KernelSpec::dirac())?;
    let gram = build_gram(&Grid::raster(1, 1), &prior.kernel)?;
    let obs = ObservationCube::new(synth.cube.data.clone(), synth.sigma2, 1, 1)?;
    let model = PosteriorModel::new(endmembers, obs, prior, gram)?;
    let mut cfg = SamplerConfig::with_samples(
        settings.step_size,
        settings.samples,
        settings.burn_in,
        settings.thinning,
        settings.seed.wrapping_add(1),
    );
    cfg.init = Init::UniformImage;
    let chain = mirror_langevin(&model, &cfg)?;
    let samples = chain.pixel_samples(0);
    let basis = &model.prior.basis;
    Ok(TernaryOutcome {
        settings: settings.clone(),
        observation: synth.cube.data,
        sigma2: synth.sigma2,
        geodesic_mean: uq::geodesic_mean(&samples, basis)?,
        euclidean_mean: uq::euclidean_mean(&samples)?,
        hdr: hdr(&samples, settings.alpha, &settings.estimator)?,
        samples,
        chain,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialSettings {
    pub width: usize,
    pub height: usize,
    pub length_scale: f64,
    pub sigma_a2: f64,
    pub snr_db: f64,
    pub samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Abundance of the dominant material in the pure regions of the
    /// ground truth.
    pub pure_level: f64,
    /// Latent variance of the texture added to the designed regions.
    pub texture_sigma_a2: f64,
    /// Pixels whose largest true abundance reaches this are counted as pure.
    pub pure_threshold: f64,
    /// Pixels whose largest true abundance stays below this are mixed.
    pub mixed_threshold: f64,
}

impl Default for SpatialSettings {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            length_scale: 10.0,
            sigma_a2: 0.25,
            snr_db: 15.0,
            samples: 1000,
            burn_in: 2000,
            thinning: 10,
            step_size: 1e-3,
            seed: 5,
            pure_level: 0.96,
            texture_sigma_a2: 0.05,
            pure_threshold: 0.9,
            mixed_threshold: 0.6,
        }
    }
}

/// Maps and diagnostics of one prior choice.
#[derive(Debug, Clone)]
pub struct PriorRun {
    pub name: &'static str,
    pub summary: ImageSummary,
    pub geodesic_std_tv: f64,
    pub euclidean_std_tv: f64,
    pub pure_geodesic_std: f64,
    pub mixed_geodesic_std: f64,
    pub pure_euclidean_std: f64,
    pub mixed_euclidean_std: f64,
}

impl PriorRun {
    /// Geodesic std larger on pure pixels while Euclidean std is smaller.
    pub fn anti_correlated(&self) -> bool {
        self.pure_geodesic_std > self.mixed_geodesic_std
            && self.pure_euclidean_std < self.mixed_euclidean_std
    }
}

#[derive(Debug, Clone)]
pub struct SpatialOutcome {
    pub settings: SpatialSettings,
    pub truth: AbundanceImage,
    pub observation: DMatrix<f64>,
    pub sigma2: f64,
    pub pure: Vec<bool>,
    pub mixed: Vec<bool>,
    pub spatial: PriorRun,
    pub dirac: PriorRun,
}

#[derive(Serialize)]
struct RunReport {
    geodesic_std_tv: f64,
    euclidean_std_tv: f64,
    pure_geodesic_std: f64,
    mixed_geodesic_std: f64,
    pure_euclidean_std: f64,
    mixed_euclidean_std: f64,
    anti_correlated: bool,
}

impl From<&PriorRun> for RunReport {
    fn from(r: &PriorRun) -> Self {
        Self {
            geodesic_std_tv: r.geodesic_std_tv,
            euclidean_std_tv: r.euclidean_std_tv,
            pure_geodesic_std: r.pure_geodesic_std,
            mixed_geodesic_std: r.mixed_geodesic_std,
            pure_euclidean_std: r.pure_euclidean_std,
            mixed_euclidean_std: r.mixed_euclidean_std,
            anti_correlated: r.anti_correlated(),
        }
    }
}

#[derive(Serialize)]
struct SpatialReport<'a> {
    settings: &'a SpatialSettings,
    sigma2: f64,
    pure_pixels: usize,
    mixed_pixels: usize,
    spatial: RunReport,
    dirac: RunReport,
}

impl SpatialOutcome {
    /// Truth, per-prior maps in subdirectories and a JSON report.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        let truth = dir.join("truth.bin");
        AbundanceStackFile::from_images(std::slice::from_ref(&self.truth), Dtype::Float64)?
            .write(&truth)?;
        files.push(truth);
        let (w, h) = (self.settings.width, self.settings.height);
        let labels: Vec<f64> = self
            .pure
            .iter()
            .zip(&self.mixed)
            .map(|(&p, &m)| {
                if p {
                    1.0
                } else if m {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        files.extend(io::export_maps(
            &dir.join("truth_maps"),
            &[("purity".into(), labels)],
            w,
            h,
        )?);
        for run in [&self.spatial, &self.dirac] {
            files.extend(io::export_maps(
                &dir.join(run.name),
                &run.summary.named_maps(),
                w,
                h,
            )?);
        }
        let report = dir.join("report.json");
        io::write_json(
            &report,
            &SpatialReport {
                settings: &self.settings,
                sigma2: self.sigma2,
                pure_pixels: self.pure.iter().filter(|&&b| b).count(),
                mixed_pixels: self.mixed.iter().filter(|&&b| b).count(),
                spatial: (&self.spatial).into(),
                dirac: (&self.dirac).into(),
            },
        )?;
        files.push(report);
        Ok(files)
    }
}

/// Designed ground truth: material 0 on the left, material 1 on the right,
/// material 2 in the lower middle and a mixed block in the upper middle,
/// plus smooth GP texture in ilr space.
pub fn designed_truth(settings: &SpatialSettings, rng: &mut ChaCha8Rng) -> Result<AbundanceImage> {
    let (w, h) = (settings.width, settings.height);
    let p = 3;
    let grid = Grid::raster(w, h);
    let texture_prior = PriorSpec::new(
        p,
        settings.texture_sigma_a2,
        KernelSpec::exponential(settings.length_scale),
    )?;
    let gram = build_gram(&grid, &texture_prior.kernel)?;
    let texture = gp_prior_sample_latent(&texture_prior, &gram, 1, rng)?
        .remove(0)
        .into_matrix();
    let minor = (1.0 - settings.pure_level) / (p - 1) as f64;
    let basis = &texture_prior.basis;
    let vertex = |k: usize| -> Result<LatentVector> {
        let mut v = vec![minor; p];
        v[k] = settings.pure_level;
        geometry::ilr(&SimplexVector::new(v)?, basis)
    };
    let offsets = [vertex(0)?, vertex(1)?, vertex(2)?];
    let (left, right) = (w / 3, w - w / 3);
    let mut z = texture;
    for y in 0..h {
        for x in 0..w {
            let region = if x < left {
                Some(0)
            } else if x >= right {
                Some(1)
            } else if y >= h / 2 {
                Some(2)
            } else {
                None
            };
            if let Some(k) = region {
                let n = y * w + x;
                for d in 0..p - 1 {
                    z[(d, n)] += offsets[k].as_slice()[d];
                }
            }
        }
    }
    Ok(AbundanceImage::from_parts(
        geometry::ilr_inv_columns(&z, basis),
        w,
        h,
    ))
}

fn masked_mean(values: &[f64], mask: &[bool]) -> f64 {
    let (sum, count) = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    sum / count as f64
}

pub fn run_spatial_comparison(settings: &SpatialSettings) -> Result<SpatialOutcome> {
    let (w, h) = (settings.width, settings.height);
    let p = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let truth = designed_truth(settings, &mut rng)?;
    let endmembers = builtin_endmembers(p)?;
    let synth = synth_observe(&endmembers, &truth, settings.snr_db, &mut rng)?;
    let sigma2 = synth.sigma2;
    if sigma2 <= 0.0 {
        return Err(Error::InvalidInput(
            "the spatial comparison needs a finite SNR".into(),
        ));
    }

    let dominant: Vec<f64> = (0..w * h).map(|n| truth.matrix().column(n).max()).collect();
    let pure: Vec<bool> = dominant
        .iter()
        .map(|&m| m >= settings.pure_threshold)
        .collect();
    let mixed: Vec<bool> = dominant
        .iter()
        .map(|&m| m < settings.mixed_threshold)
        .collect();
    if !pure.iter().any(|&b| b) || !mixed.iter().any(|&b| b) {
        return Err(Error::InvalidInput(
            "ground truth lacks pure or mixed pixels".into(),
        ));
    }

    let grid = Grid::raster(w, h);
    let mut runs = Vec::new();
    for (name, kernel, seed_offset) in [
        (
            "spatial",
            KernelSpec::exponential(settings.length_scale),
            1u64,
        ),
        ("dirac", KernelSpec::dirac(), 2u64),
    ] {
        let prior = PriorSpec::new(p, settings.sigma_a2, kernel)?;
        let gram = build_gram(&grid, &prior.kernel)?;
        let obs = ObservationCube::new(synth.cube.data.clone(), sigma2, w, h)?;
        let model = PosteriorModel::new(endmembers.clone(), obs, prior, gram)?;
        let mut cfg = SamplerConfig::with_samples(
            settings.step_size,
            settings.samples,
            settings.burn_in,
            settings.thinning,
            settings.seed.wrapping_add(seed_offset),
        );
        cfg.init = Init::UniformImage;
        let chain = mirror_langevin(&model, &cfg)?;
        let summary = uq::summarize_image(&chain, &model.prior.basis)?;
        let gstd = summary.geodesic_std_map();
        let estd = summary.euclidean_std_map();
        runs.push(PriorRun {
            name,
            geodesic_std_tv: uq::map_total_variation(&gstd, w, h),
            euclidean_std_tv: uq::map_total_variation(&estd, w, h),
            pure_geodesic_std: masked_mean(&gstd, &pure),
            mixed_geodesic_std: masked_mean(&gstd, &mixed),
            pure_euclidean_std: masked_mean(&estd, &pure),
            mixed_euclidean_std: masked_mean(&estd, &mixed),
            summary,
        });
    }
    let dirac = runs.pop().expect("two runs");
    let spatial = runs.pop().expect("two runs");
    Ok(SpatialOutcome {
        settings: settings.clone(),
        truth,
        observation: synth.cube.data,
        sigma2,
        pure,
        mixed,
        spatial,
        dirac,
    })
}
