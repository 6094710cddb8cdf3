//! Synthetic scenes and SNR bookkeeping.
//!
//! Signal power is `‖SA‖_F² / (L N)` and `SNR_dB = 10 log10(power / σ²)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::raster::{AbundanceStackFile, CubeFile, Dtype};
use crate::error::{Error, Result};
use crate::prior::{build_gram, gp_prior_sample, AbundanceImage, Grid, PriorSpec};
use crate::sampler::EndmemberMatrix;

pub const BUILTIN_BANDS: usize = 64;

/// `p` smooth reflectance-like spectra over 64 bands: a flat floor plus one
/// Gaussian bump per material, bumps spread evenly across the range. The
/// bumps are 32 bands wide, so neighbouring spectra overlap strongly and the
/// unmixing problem is mildly ill-conditioned, like real scenes.
pub fn builtin_endmembers(p: usize) -> Result<EndmemberMatrix> {
    gaussian_bump_endmembers(p, BUILTIN_BANDS, BUILTIN_BANDS as f64 / 2.0)
}

/// Gaussian-bump spectra with a given width in bands.
pub fn gaussian_bump_endmembers(p: usize, bands: usize, width: f64) -> Result<EndmemberMatrix> {
    if p < 2 {
        return Err(Error::InvalidDimension(format!(
            "need at least 2 materials, got {p}"
        )));
    }
    let l = bands as f64;
    let s = DMatrix::from_fn(bands, p, |band, k| {
        let center = (k as f64 + 0.5) * l / p as f64;
        let t = (band as f64 - center) / width;
        0.1 + 0.8 * (-0.5 * t * t).exp()
    });
    EndmemberMatrix::new(s, (0..p).map(|k| format!("bump{k}")).collect())
}

fn mean_power(m: &DMatrix<f64>) -> f64 {
    m.norm_squared() / (m.nrows() * m.ncols()) as f64
}

/// Noise variance giving `snr_db` on the clean signal `sa`; zero for `+∞`.
pub fn sigma2_for_snr(sa: &DMatrix<f64>, snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(format!("invalid SNR {snr_db} dB")));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let power = mean_power(sa);
    if power <= 0.0 {
        return Err(Error::InvalidInput("signal has zero power".into()));
    }
    Ok(power / 10f64.powf(snr_db / 10.0))
}

/// Noise variance implied by `snr_db` when only the noisy data are known,
/// using `E‖X‖² / (LN) = power + σ²`.
pub fn sigma2_from_observed_snr(x: &DMatrix<f64>, snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidInput(format!("invalid SNR {snr_db} dB")));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(mean_power(x) / (1.0 + 10f64.powf(snr_db / 10.0)))
}

/// SNR of `noisy` against its clean version.
pub fn empirical_snr_db(clean: &DMatrix<f64>, noisy: &DMatrix<f64>) -> Result<f64> {
    if clean.shape() != noisy.shape() {
        return Err(Error::InvalidInput(
            "clean and noisy arrays differ in shape".into(),
        ));
    }
    let noise = mean_power(&(noisy - clean));
    Ok(10.0 * (mean_power(clean) / noise).log10())
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub cube: CubeFile,
    pub truth: AbundanceStackFile,
    pub truth_image: AbundanceImage,
    pub sigma2: f64,
}

/// `X = S A + noise` for a given abundance image.
pub fn synth_observe<R: Rng + ?Sized>(
    endmembers: &EndmemberMatrix,
    truth: &AbundanceImage,
    snr_db: f64,
    rng: &mut R,
) -> Result<SynthOutput> {
    if truth.components() != endmembers.components() {
        return Err(Error::DimensionMismatch {
            what: "materials",
            expected: endmembers.components(),
            found: truth.components(),
        });
    }
    let clean = endmembers.matrix() * truth.matrix();
    let sigma2 = sigma2_for_snr(&clean, snr_db)?;
    let sd = sigma2.sqrt();
    let mut x = clean;
    if sd > 0.0 {
        for l in 0..x.nrows() {
            for n in 0..x.ncols() {
                x[(l, n)] += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(SynthOutput {
        cube: CubeFile::new(x, truth.width(), truth.height(), Dtype::Float64)?,
        truth: AbundanceStackFile::from_images(std::slice::from_ref(truth), Dtype::Float64)?,
        truth_image: truth.clone(),
        sigma2,
    })
}

/// Draws abundances from the prior on `grid`, then observes them.
pub fn synth_generate(
    endmembers: &EndmemberMatrix,
    grid: &Grid,
    prior: &PriorSpec,
    snr_db: f64,
    seed: u64,
) -> Result<SynthOutput> {
    if prior.components() != endmembers.components() {
        return Err(Error::DimensionMismatch {
            what: "materials",
            expected: endmembers.components(),
            found: prior.components(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gram = build_gram(grid, &prior.kernel)?;
    let truth = gp_prior_sample(prior, &gram, grid, 1, &mut rng)?.remove(0);
    synth_observe(endmembers, &truth, snr_db, &mut rng)
}
