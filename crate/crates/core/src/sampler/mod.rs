//! Linear-mixing posterior and Langevin samplers.
//!
//! The posterior over an abundance image `A` combines the pushforward-GP
//! prior with a Gaussian likelihood `X ~ N(S A, σ² I)`. Pushed to ilr space
//! the prior Jacobian cancels against the change of variables, so the
//! latent target is
//!
//! ```text
//! U(Z) = ‖(Z - M) K_U^{-1/2}‖_F² / (2σ_a²) + ‖X - S softmax(H Z)‖_F² / (2σ²)
//! ```
//!
//! [`mirror_langevin`] runs unadjusted Langevin on `U`, which is mirror
//! Langevin with the entropy mirror map expressed in ilr coordinates.
//! [`projected_ula`] is the Euclidean baseline: Langevin on `A` itself, with
//! every step projected back onto the simplex.

mod langevin;
mod projection;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::prior::{AbundanceImage, GramMatrix, LatentMatrix, PriorSpec};

pub use langevin::{mirror_langevin, projected_ula, run_chains};
pub use projection::project_simplex;
pub(crate) use projection::project_simplex_into;

/// L×P endmember signatures, one column per material.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberMatrix {
    s: DMatrix<f64>,
    names: Vec<String>,
}

impl EndmemberMatrix {
    pub fn new(s: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if s.ncols() < 2 {
            return Err(Error::InvalidDimension(format!(
                "need at least 2 endmembers, got {}",
                s.ncols()
            )));
        }
        if s.nrows() == 0 {
            return Err(Error::InvalidDimension("endmembers have no bands".into()));
        }
        if names.len() != s.ncols() {
            return Err(Error::DimensionMismatch {
                what: "endmember names",
                expected: s.ncols(),
                found: names.len(),
            });
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "endmember matrix has non-finite entries".into(),
            ));
        }
        for i in 0..s.ncols() {
            for j in 0..i {
                if s.column(i) == s.column(j) {
                    return Err(Error::InvalidInput(format!(
                        "endmembers {j} and {i} are identical"
                    )));
                }
            }
        }
        if s.nrows() < s.ncols() {
            log::warn!(
                "fewer bands ({}) than endmembers ({}): abundances are not identifiable",
                s.nrows(),
                s.ncols()
            );
        }
        Ok(Self { s, names })
    }

    /// Endmembers with placeholder names `em0, em1, ...`.
    pub fn unnamed(s: DMatrix<f64>) -> Result<Self> {
        let names = (0..s.ncols()).map(|i| format!("em{i}")).collect();
        Self::new(s, names)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bands(&self) -> usize {
        self.s.nrows()
    }

    pub fn components(&self) -> usize {
        self.s.ncols()
    }
}

/// L×N observed spectra with the likelihood noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationCube {
    pub x: DMatrix<f64>,
    /// `f64::INFINITY` disables the likelihood.
    pub sigma2: f64,
    pub width: usize,
    pub height: usize,
}

impl ObservationCube {
    pub fn new(x: DMatrix<f64>, sigma2: f64, width: usize, height: usize) -> Result<Self> {
        if x.ncols() != width * height {
            return Err(Error::DimensionMismatch {
                what: "cube pixels",
                expected: width * height,
                found: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "observations have non-finite entries".into(),
            ));
        }
        if !(sigma2 > 0.0) || sigma2.is_nan() {
            return Err(Error::InvalidInput(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self {
            x,
            sigma2,
            width,
            height,
        })
    }
}

/// Everything needed to evaluate the unmixing posterior.
#[derive(Debug, Clone)]
pub struct PosteriorModel {
    pub endmembers: EndmemberMatrix,
    pub obs: ObservationCube,
    pub prior: PriorSpec,
    pub gram: GramMatrix,
}

impl PosteriorModel {
    pub fn new(
        endmembers: EndmemberMatrix,
        obs: ObservationCube,
        prior: PriorSpec,
        gram: GramMatrix,
    ) -> Result<Self> {
        prior.validate()?;
        if endmembers.bands() != obs.x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "spectral bands",
                expected: endmembers.bands(),
                found: obs.x.nrows(),
            });
        }
        if endmembers.components() != prior.components() {
            return Err(Error::DimensionMismatch {
                what: "endmember count",
                expected: prior.components(),
                found: endmembers.components(),
            });
        }
        if gram.n() != obs.x.ncols() {
            return Err(Error::DimensionMismatch {
                what: "Gram matrix size",
                expected: obs.x.ncols(),
                found: gram.n(),
            });
        }
        Ok(Self {
            endmembers,
            obs,
            prior,
            gram,
        })
    }

    /// A model whose posterior is the prior (likelihood disabled).
    pub fn prior_only(
        prior: PriorSpec,
        gram: GramMatrix,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let p = prior.components();
        let endmembers = EndmemberMatrix::unnamed(DMatrix::identity(p, p))?;
        let obs = ObservationCube::new(
            DMatrix::zeros(p, width * height),
            f64::INFINITY,
            width,
            height,
        )?;
        Self::new(endmembers, obs, prior, gram)
    }

    pub fn pixels(&self) -> usize {
        self.obs.x.ncols()
    }

    pub fn components(&self) -> usize {
        self.prior.components()
    }

    pub fn has_likelihood(&self) -> bool {
        self.obs.sigma2.is_finite()
    }

    fn check_latent(&self, z: &DMatrix<f64>) -> Result<()> {
        if z.nrows() != self.prior.latent_dim() || z.ncols() != self.pixels() {
            return Err(Error::DimensionMismatch {
                what: "latent matrix",
                expected: self.prior.latent_dim() * self.pixels(),
                found: z.nrows() * z.ncols(),
            });
        }
        Ok(())
    }

    /// `U(Z)` and `∇U(Z)` together; they share the solve and the residual.
    pub(crate) fn latent_energy_and_gradient(&self, z: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let centered = z - self.prior.mean_matrix(z.ncols());
        let mut grad = self.gram.solve_right(&centered) / self.prior.sigma_a2;
        let mut energy = 0.5 * centered.dot(&grad);
        if self.has_likelihood() {
            let a = geometry::ilr_inv_columns(z, &self.prior.basis);
            let s = self.endmembers.matrix();
            let resid = s * &a - &self.obs.x;
            energy += resid.norm_squared() / (2.0 * self.obs.sigma2);
            // g_a = Sᵀ r / σ², then the softmax Jacobian diag(a) - a aᵀ.
            let mut ga = s.tr_mul(&resid) / self.obs.sigma2;
            for (mut g, col) in ga.column_iter_mut().zip(a.column_iter()) {
                let inner = g.dot(&col);
                for (gk, ak) in g.iter_mut().zip(col.iter()) {
                    *gk = ak * (*gk - inner);
                }
            }
            grad += self.prior.basis.matrix().tr_mul(&ga);
        }
        (energy, grad)
    }

    /// Negative log posterior on the simplex (w.r.t. Lebesgue measure on the
    /// first P-1 coordinates, up to a constant) and its ambient gradient.
    pub(crate) fn simplex_energy_and_gradient(
        &self,
        a: &DMatrix<f64>,
    ) -> Result<(f64, DMatrix<f64>)> {
        let basis = &self.prior.basis;
        let z = geometry::ilr_columns(a, basis)?;
        let centered = &z - self.prior.mean_matrix(z.ncols());
        let g_latent = self.gram.solve_right(&centered) / self.prior.sigma_a2;
        let mut energy = 0.5 * centered.dot(&g_latent) + a.iter().map(|x| x.ln()).sum::<f64>();
        // ∂z/∂a_k = H_k / a_k, so the chain rule gives (1 + (H g)_k) / a_k.
        let hg = basis.matrix() * &g_latent;
        let mut grad =
            DMatrix::from_fn(a.nrows(), a.ncols(), |k, n| (1.0 + hg[(k, n)]) / a[(k, n)]);
        if self.has_likelihood() {
            let s = self.endmembers.matrix();
            let resid = s * a - &self.obs.x;
            energy += resid.norm_squared() / (2.0 * self.obs.sigma2);
            grad += s.tr_mul(&resid) / self.obs.sigma2;
        }
        Ok((energy, grad))
    }
}

/// Latent negative log posterior `U(Z)`, up to an additive constant.
pub fn latent_neg_log_posterior(z: &LatentMatrix, model: &PosteriorModel) -> Result<f64> {
    model.check_latent(z.matrix())?;
    Ok(model.latent_energy_and_gradient(z.matrix()).0)
}

/// Gradient of [`latent_neg_log_posterior`].
pub fn latent_gradient(z: &LatentMatrix, model: &PosteriorModel) -> Result<LatentMatrix> {
    model.check_latent(z.matrix())?;
    Ok(LatentMatrix::from_matrix(
        model.latent_energy_and_gradient(z.matrix()).1,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    MirrorLangevin,
    ProjectedUla,
}

/// How the chain is started.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    PriorDraw,
    UniformImage,
    Latent(LatentMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub step_size: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub init: Init,
    pub seed: u64,
    /// Multiplies the injected noise. `0.0` turns the chain into gradient
    /// descent; anything other than `1.0` no longer targets the posterior.
    pub noise_scale: f64,
}

impl SamplerConfig {
    /// 20% burn-in, no thinning, prior-draw initialization.
    pub fn new(step_size: f64, n_steps: usize, seed: u64) -> Self {
        Self {
            step_size,
            n_steps,
            burn_in: n_steps / 5,
            thinning: 1,
            init: Init::PriorDraw,
            seed,
            noise_scale: 1.0,
        }
    }

    /// Settings that keep exactly `samples` draws after `burn_in` steps.
    pub fn with_samples(
        step_size: f64,
        samples: usize,
        burn_in: usize,
        thinning: usize,
        seed: u64,
    ) -> Self {
        Self {
            step_size,
            n_steps: burn_in + samples * thinning,
            burn_in,
            thinning,
            init: Init::PriorDraw,
            seed,
            noise_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.burn_in >= self.n_steps {
            return Err(Error::InvalidInput(format!(
                "burn-in ({}) must be smaller than the number of steps ({})",
                self.burn_in, self.n_steps
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidInput("thinning must be at least 1".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidInput(
                "noise scale must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Number of retained samples, `(n_steps - burn_in) / thinning`.
    pub fn retained(&self) -> usize {
        (self.n_steps - self.burn_in) / self.thinning
    }
}

/// Retained posterior draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleChain {
    pub algorithm: Algorithm,
    pub samples: Vec<AbundanceImage>,
    /// ilr coordinates of `samples`.
    pub latent: Vec<LatentMatrix>,
    /// `U(Z_t)` for `t = 0..=n_steps`.
    pub energy_trace: Vec<f64>,
}

impl SampleChain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// All draws of pixel `n`.
    pub fn pixel_samples(&self, n: usize) -> Vec<geometry::SimplexVector> {
        self.samples.iter().map(|img| img.pixel(n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{build_gram, Grid, KernelSpec};

    fn toy_model() -> PosteriorModel {
        let s = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.2, 0.1, 0.3, 0.9, 0.2, 0.1, 0.4, 0.8, 0.5, 0.5, 0.5],
        );
        let grid = Grid::raster(2, 1);
        let prior = PriorSpec::new(3, 0.5, KernelSpec::exponential(1.5)).unwrap();
        let gram = build_gram(&grid, &prior.kernel).unwrap();
        let x = DMatrix::from_row_slice(4, 2, &[0.5, 0.3, 0.4, 0.6, 0.3, 0.2, 0.5, 0.5]);
        let obs = ObservationCube::new(x, 0.05, 2, 1).unwrap();
        PosteriorModel::new(EndmemberMatrix::unnamed(s).unwrap(), obs, prior, gram).unwrap()
    }

    #[test]
    fn exact_fit_at_zero_has_zero_energy() {
        let mut model = toy_model();
        let a = geometry::ilr_inv_columns(&DMatrix::zeros(2, 2), &model.prior.basis);
        model.obs.x = model.endmembers.matrix() * a;
        let z = LatentMatrix::zeros(2, 2);
        assert!(latent_neg_log_posterior(&z, &model).unwrap().abs() < 1e-15);
        assert!(latent_gradient(&z, &model).unwrap().matrix().amax() < 1e-12);
    }

    #[test]
    fn prior_only_reduces_to_quadratic_form() {
        let model = toy_model();
        let p = PosteriorModel::prior_only(model.prior.clone(), model.gram.clone(), 2, 1).unwrap();
        let z = LatentMatrix::new(DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.7, 0.1])).unwrap();
        let u = latent_neg_log_posterior(&z, &p).unwrap();
        let q = crate::prior::gp_prior_quadratic(&z, &p.prior, &p.gram).unwrap();
        assert!((u - q).abs() < 1e-14);
        let g0 = latent_gradient(&LatentMatrix::zeros(2, 2), &p).unwrap();
        assert_eq!(g0.matrix().amax(), 0.0);
    }

    #[test]
    fn validation_errors() {
        let model = toy_model();
        assert!(latent_gradient(&LatentMatrix::zeros(2, 3), &model).is_err());
        assert!(EndmemberMatrix::unnamed(DMatrix::zeros(3, 1)).is_err());
        assert!(EndmemberMatrix::unnamed(DMatrix::from_element(3, 2, 1.0)).is_err());
        assert!(ObservationCube::new(DMatrix::zeros(3, 2), 0.0, 2, 1).is_err());
        let mut cfg = SamplerConfig::new(0.1, 10, 0);
        cfg.burn_in = 10;
        assert!(cfg.validate().is_err());
        assert_eq!(SamplerConfig::with_samples(0.1, 7, 3, 2, 0).retained(), 7);
    }
}
