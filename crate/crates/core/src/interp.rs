//! Closed-form interpolation of partially observed abundance maps.
//!
//! Observed abundances are moved to ilr space, each latent coordinate is
//! conditioned as an independent GP with covariance `σ_a² K_U`, and the
//! posterior mean field is mapped back with softmax.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::geometry::{self, SimplexVector};
use crate::prior::{AbundanceImage, Grid, LatentMatrix, PriorSpec};

/// Abundances known at a subset of pixels.
#[derive(Debug, Clone)]
pub struct PartialObservation {
    pub indices: Vec<usize>,
    pub values: Vec<SimplexVector>,
    /// Latent-space observation noise variance τ².
    pub nugget: f64,
}

impl PartialObservation {
    pub fn new(indices: Vec<usize>, values: Vec<SimplexVector>) -> Result<Self> {
        Self::with_nugget(indices, values, 0.0)
    }

    pub fn with_nugget(
        indices: Vec<usize>,
        values: Vec<SimplexVector>,
        nugget: f64,
    ) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "observed values",
                expected: indices.len(),
                found: values.len(),
            });
        }
        if !(nugget >= 0.0 && nugget.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "nugget must be nonnegative, got {nugget}"
            )));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(
                "observed pixel indices must be unique".into(),
            ));
        }
        Ok(Self {
            indices,
            values,
            nugget,
        })
    }
}

/// Interpolated field with its latent predictive variance.
#[derive(Debug, Clone)]
pub struct Interpolation {
    pub image: AbundanceImage,
    pub latent_mean: LatentMatrix,
    /// Predictive variance per pixel, shared by every latent coordinate.
    pub latent_variance: Vec<f64>,
}

pub fn interpolate(
    obs: &PartialObservation,
    spec: &PriorSpec,
    grid: &Grid,
) -> Result<Interpolation> {
    spec.validate()?;
    if obs.indices.is_empty() {
        return Err(Error::InvalidInput("no observed pixels".into()));
    }
    if let Some(&bad) = obs.indices.iter().find(|&&i| i >= grid.len()) {
        return Err(Error::InvalidInput(format!(
            "observed pixel {bad} outside a grid of {} pixels",
            grid.len()
        )));
    }
    let n = grid.len();
    let n_obs = obs.indices.len();
    let d = spec.latent_dim();

    let mut z_obs = DMatrix::zeros(d, n_obs);
    for (j, a) in obs.values.iter().enumerate() {
        let z = geometry::ilr(a, &spec.basis)?;
        z_obs.set_column(j, &(z.as_vector() - spec.mean_vector()));
    }

    let cov = |i: usize, j: usize| spec.sigma_a2 * spec.kernel.eval(grid.distance(i, j));
    let mut c_oo = DMatrix::from_fn(n_obs, n_obs, |r, c| cov(obs.indices[r], obs.indices[c]));
    for i in 0..n_obs {
        c_oo[(i, i)] += obs.nugget;
    }
    let chol = Cholesky::new(c_oo)
        .ok_or_else(|| Error::Singular("observed covariance is not positive definite".into()))?;

    // C_{o*} for every grid pixel, then solve once for all of them.
    let c_o_all = DMatrix::from_fn(n_obs, n, |r, c| cov(obs.indices[r], c));
    let weights = chol.solve(&c_o_all); // (C_oo + τ²I)⁻¹ C_{o*}
    let mean = spec.mean_matrix(n) + &z_obs * &weights;
    let latent_variance = (0..n)
        .map(|c| {
            let explained = c_o_all.column(c).dot(&weights.column(c));
            (cov(c, c) - explained).max(0.0)
        })
        .collect();

    let latent_mean = LatentMatrix::from_matrix(mean);
    Ok(Interpolation {
        image: latent_mean.to_image(&spec.basis, grid.width(), grid.height()),
        latent_mean,
        latent_variance,
    })
}
