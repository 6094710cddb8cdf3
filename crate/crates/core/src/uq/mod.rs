//! Posterior summaries that respect the simplex constraint.
//!
//! Means and variances come in two flavours: Euclidean (computed on the raw
//! abundance vectors) and geodesic (computed in ilr coordinates). The
//! geodesic mean is the softmax of the latent average and the geodesic total
//! variance is the mean squared Aitchison distance to it.

mod hdr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, LatentVector, OrthonormalBasis, SimplexVector};
use crate::prior::{AbundanceImage, LatentMatrix};
use crate::sampler::SampleChain;

pub use hdr::{hdr, DensityEstimator, HdrCell, HdrResult};

fn latent_samples(samples: &[SimplexVector], basis: &OrthonormalBasis) -> Result<DMatrix<f64>> {
    let mut z = DMatrix::zeros(basis.latent_dim(), samples.len());
    for (m, a) in samples.iter().enumerate() {
        z.set_column(m, geometry::ilr(a, basis)?.as_vector());
    }
    Ok(z)
}

fn need(samples: usize, needed: usize) -> Result<()> {
    if samples < needed {
        return Err(Error::TooFewSamples {
            needed,
            found: samples,
        });
    }
    Ok(())
}

/// Softmax of the average ilr coordinates.
pub fn geodesic_mean(samples: &[SimplexVector], basis: &OrthonormalBasis) -> Result<SimplexVector> {
    need(samples.len(), 1)?;
    let z = latent_samples(samples, basis)?;
    let mean = z.column_mean();
    geometry::ilr_inv(&LatentVector::new(mean.as_slice().to_vec())?, basis)
}

/// Componentwise average; lies on the closed simplex.
pub fn euclidean_mean(samples: &[SimplexVector]) -> Result<SimplexVector> {
    need(samples.len(), 1)?;
    let p = samples[0].dim();
    let mut acc = DVector::zeros(p);
    for a in samples {
        if a.dim() != p {
            return Err(Error::DimensionMismatch {
                what: "sample components",
                expected: p,
                found: a.dim(),
            });
        }
        acc += a.as_vector();
    }
    SimplexVector::closed((acc / samples.len() as f64).as_slice().to_vec())
}

/// Diagonal of the `1/(M-1)` empirical covariance of the columns of `x`.
fn column_variances(x: &DMatrix<f64>) -> DVector<f64> {
    let m = x.ncols() as f64;
    let mean = x.column_mean();
    DVector::from_fn(x.nrows(), |r, _| {
        x.row(r).iter().map(|v| (v - mean[r]).powi(2)).sum::<f64>() / (m - 1.0)
    })
}

/// `1/(M-1) Σ ‖ilr(a^m) - ilr(ā)‖²`, the trace of the latent covariance.
pub fn geodesic_total_variance(samples: &[SimplexVector], basis: &OrthonormalBasis) -> Result<f64> {
    need(samples.len(), 2)?;
    Ok(column_variances(&latent_samples(samples, basis)?).sum())
}

/// Diagonal of the empirical latent covariance.
pub fn ilr_componentwise_variances(
    samples: &[SimplexVector],
    basis: &OrthonormalBasis,
) -> Result<DVector<f64>> {
    need(samples.len(), 2)?;
    Ok(column_variances(&latent_samples(samples, basis)?))
}

/// Trace of the empirical P×P covariance of the raw abundance vectors.
pub fn euclidean_total_variance(samples: &[SimplexVector]) -> Result<f64> {
    need(samples.len(), 2)?;
    let p = samples[0].dim();
    let mut x = DMatrix::zeros(p, samples.len());
    for (m, a) in samples.iter().enumerate() {
        x.set_column(m, a.as_vector());
    }
    Ok(column_variances(&x).sum())
}

/// Per-pixel statistics of a posterior sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UqSummary {
    pub euclidean_mean: Vec<f64>,
    pub geodesic_mean: Vec<f64>,
    pub euclidean_total_variance: f64,
    pub geodesic_total_variance: f64,
    pub ilr_componentwise_variances: Vec<f64>,
}

/// Image-level maps, each stored in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSummary {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<UqSummary>,
}

impl ImageSummary {
    fn map(&self, f: impl Fn(&UqSummary) -> f64) -> Vec<f64> {
        self.pixels.iter().map(f).collect()
    }

    /// Geodesic mean abundance map of material `k`.
    pub fn geodesic_mean_map(&self, k: usize) -> Vec<f64> {
        self.map(|s| s.geodesic_mean[k])
    }

    pub fn euclidean_mean_map(&self, k: usize) -> Vec<f64> {
        self.map(|s| s.euclidean_mean[k])
    }

    /// Square root of the geodesic total variance.
    pub fn geodesic_std_map(&self) -> Vec<f64> {
        self.map(|s| s.geodesic_total_variance.sqrt())
    }

    /// Square root of the Euclidean total variance.
    pub fn euclidean_std_map(&self) -> Vec<f64> {
        self.map(|s| s.euclidean_total_variance.sqrt())
    }

    pub fn components(&self) -> usize {
        self.pixels
            .first()
            .map(|s| s.geodesic_mean.len())
            .unwrap_or(0)
    }

    /// Every exportable map, named.
    pub fn named_maps(&self) -> Vec<(String, Vec<f64>)> {
        let mut maps = Vec::new();
        for k in 0..self.components() {
            maps.push((format!("geodesic_mean_{k}"), self.geodesic_mean_map(k)));
            maps.push((format!("euclidean_mean_{k}"), self.euclidean_mean_map(k)));
        }
        maps.push(("geodesic_std".into(), self.geodesic_std_map()));
        maps.push(("euclidean_std".into(), self.euclidean_std_map()));
        maps
    }
}

/// Summaries for every pixel of a chain.
pub fn summarize_image(chain: &SampleChain, basis: &OrthonormalBasis) -> Result<ImageSummary> {
    summarize_with_latent(&chain.samples, &chain.latent, basis)
}

/// Summaries for every pixel of a sequence of abundance images, e.g. a chain
/// read back from disk.
pub fn summarize_images(
    samples: &[AbundanceImage],
    basis: &OrthonormalBasis,
) -> Result<ImageSummary> {
    let latent = samples
        .iter()
        .map(|img| img.latent(basis))
        .collect::<Result<Vec<_>>>()?;
    summarize_with_latent(samples, &latent, basis)
}

fn summarize_with_latent(
    samples: &[AbundanceImage],
    latent: &[LatentMatrix],
    basis: &OrthonormalBasis,
) -> Result<ImageSummary> {
    need(samples.len(), 2)?;
    let first = &samples[0];
    let pixels = (0..first.pixels())
        .map(|n| {
            let s: Vec<SimplexVector> = samples.iter().map(|img| img.pixel(n)).collect();
            let z = DMatrix::from_fn(basis.latent_dim(), samples.len(), |d, m| {
                latent[m].matrix()[(d, n)]
            });
            let zbar = z.column_mean();
            let ilr_var = column_variances(&z);
            let gmean = geometry::ilr_inv(&LatentVector::new(zbar.as_slice().to_vec())?, basis)?;
            Ok(UqSummary {
                euclidean_mean: euclidean_mean(&s)?.into_vec(),
                geodesic_mean: gmean.into_vec(),
                euclidean_total_variance: euclidean_total_variance(&s)?,
                geodesic_total_variance: ilr_var.sum(),
                ilr_componentwise_variances: ilr_var.as_slice().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageSummary {
        width: first.width(),
        height: first.height(),
        pixels,
    })
}

/// Anisotropic total variation `Σ |m(x+1,y) - m(x,y)| + |m(x,y+1) - m(x,y)|`.
pub fn map_total_variation(map: &[f64], width: usize, height: usize) -> f64 {
    let mut tv = 0.0;
    for y in 0..height {
        for x in 0..width {
            let v = map[y * width + x];
            if x + 1 < width {
                tv += (map[y * width + x + 1] - v).abs();
            }
            if y + 1 < height {
                tv += (map[(y + 1) * width + x] - v).abs();
            }
        }
    }
    tv
}
