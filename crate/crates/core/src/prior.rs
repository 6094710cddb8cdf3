//! ilr-Gaussian priors on abundance vectors and pushforward-GP priors on
//! abundance images.
//!
//! The latent field `Z = ilr(A)` is matrix normal with row covariance
//! `σ_a² I_{P-1}` and column covariance `K_U`, the spatial Gram matrix. The
//! Kronecker covariance `σ_a² I ⊗ K_U` is never formed; everything goes
//! through the Cholesky factor of `K_U`.
//!
//! The kernel amplitude `σ_k²` is stored inside `K_U` and applied once.
//! Dense Cholesky costs O(N³) time and O(N²) memory, which is fine up to a
//! few thousand pixels.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, LatentVector, OrthonormalBasis, SimplexVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `σ_k² exp(-‖u - u'‖ / l)`
    Exponential,
    /// `σ_k² δ(u, u')`: pixels are independent.
    Dirac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Length scale in pixels. Ignored by the Dirac kernel.
    #[serde(default = "default_length_scale")]
    pub length_scale: f64,
    #[serde(default = "default_sigma_k2")]
    pub sigma_k2: f64,
    /// Diagonal term added before factorization.
    #[serde(default)]
    pub jitter: f64,
}

fn default_length_scale() -> f64 {
    1.0
}

fn default_sigma_k2() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn exponential(length_scale: f64) -> Self {
        Self {
            kind: KernelKind::Exponential,
            length_scale,
            sigma_k2: 1.0,
            jitter: 0.0,
        }
    }

    pub fn dirac() -> Self {
        Self {
            kind: KernelKind::Dirac,
            length_scale: 1.0,
            sigma_k2: 1.0,
            jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel length scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.sigma_k2 > 0.0 && self.sigma_k2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel amplitude must be positive, got {}",
                self.sigma_k2
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "kernel jitter must be nonnegative, got {}",
                self.jitter
            )));
        }
        Ok(())
    }

    /// Kernel value at Euclidean distance `dist`.
    pub fn eval(&self, dist: f64) -> f64 {
        match self.kind {
            KernelKind::Exponential => self.sigma_k2 * (-dist / self.length_scale).exp(),
            KernelKind::Dirac if dist == 0.0 => self.sigma_k2,
            KernelKind::Dirac => 0.0,
        }
    }
}

/// Pixel coordinates. Raster grids index pixel `(x, y)` as `y * width + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    coords: Vec<[f64; 2]>,
    width: usize,
    height: usize,
}

impl Grid {
    pub fn raster(width: usize, height: usize) -> Self {
        let coords = (0..height)
            .flat_map(|y| (0..width).map(move |x| [x as f64, y as f64]))
            .collect();
        Self {
            coords,
            width,
            height,
        }
    }

    /// Scattered points, reported as a `N×1` raster.
    pub fn from_points(coords: Vec<[f64; 2]>) -> Self {
        let width = coords.len();
        Self {
            coords,
            width,
            height: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Sub-grid made of the listed pixels.
    pub fn subset(&self, indices: &[usize]) -> Grid {
        Grid::from_points(indices.iter().map(|&i| self.coords[i]).collect())
    }
}

/// A P×N field of simplex vectors on a raster.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceImage {
    data: DMatrix<f64>,
    width: usize,
    height: usize,
}

impl AbundanceImage {
    /// Columns are checked to lie on the closed simplex (sum within 1e-9).
    pub fn new(data: DMatrix<f64>, width: usize, height: usize) -> Result<Self> {
        if data.ncols() != width * height {
            return Err(Error::DimensionMismatch {
                what: "image pixels",
                expected: width * height,
                found: data.ncols(),
            });
        }
        if data.nrows() < 2 {
            return Err(Error::InvalidDimension("images need P >= 2".into()));
        }
        for (n, col) in data.column_iter().enumerate() {
            if col.iter().any(|x| !x.is_finite() || *x < 0.0) || (col.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "pixel {n} is not on the simplex"
                )));
            }
        }
        Ok(Self {
            data,
            width,
            height,
        })
    }

    pub(crate) fn from_parts(data: DMatrix<f64>, width: usize, height: usize) -> Self {
        Self {
            data,
            width,
            height,
        }
    }

    pub fn from_pixels(pixels: &[SimplexVector], width: usize, height: usize) -> Result<Self> {
        let p = pixels.first().map(|a| a.dim()).unwrap_or(0);
        let mut data = DMatrix::zeros(p, pixels.len());
        for (n, a) in pixels.iter().enumerate() {
            if a.dim() != p {
                return Err(Error::DimensionMismatch {
                    what: "pixel components",
                    expected: p,
                    found: a.dim(),
                });
            }
            data.set_column(n, a.as_vector());
        }
        Self::new(data, width, height)
    }

    pub fn components(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.data.ncols()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn pixel(&self, n: usize) -> SimplexVector {
        SimplexVector::from_normalized(self.data.column(n).into_owned())
    }

    pub fn is_interior(&self) -> bool {
        self.data.iter().all(|&x| x > 0.0)
    }

    pub fn latent(&self, basis: &OrthonormalBasis) -> Result<LatentMatrix> {
        Ok(LatentMatrix(geometry::ilr_columns(&self.data, basis)?))
    }
}

/// ilr coordinates of an abundance image, (P-1)×N.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix(DMatrix<f64>);

impl LatentMatrix {
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "latent matrix has non-finite entries".into(),
            ));
        }
        Ok(Self(z))
    }

    pub fn zeros(latent_dim: usize, pixels: usize) -> Self {
        Self(DMatrix::zeros(latent_dim, pixels))
    }

    pub(crate) fn from_matrix(z: DMatrix<f64>) -> Self {
        Self(z)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn latent_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.0.ncols()
    }

    /// Map every column back to the simplex.
    pub fn to_image(
        &self,
        basis: &OrthonormalBasis,
        width: usize,
        height: usize,
    ) -> AbundanceImage {
        AbundanceImage::from_parts(geometry::ilr_inv_columns(&self.0, basis), width, height)
    }
}

/// Spatial Gram matrix with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    k: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl GramMatrix {
    /// Factor a symmetric positive-definite matrix, escalating the diagonal
    /// jitter from `1e-10·scale` by factors of 10 up to `1e-4·scale` if needed.
    pub fn from_matrix(k: DMatrix<f64>, base_jitter: f64, scale: f64) -> Result<Self> {
        if !k.is_square() || k.nrows() == 0 {
            return Err(Error::InvalidDimension(
                "Gram matrix must be square and nonempty".into(),
            ));
        }
        let mut extra = 0.0;
        let max_extra = 1e-4 * scale;
        loop {
            let jitter = base_jitter + extra;
            let mut kj = k.clone();
            if jitter > 0.0 {
                for i in 0..kj.nrows() {
                    kj[(i, i)] += jitter;
                }
            }
            if let Some(chol) = Cholesky::new(kj.clone()) {
                if extra > 0.0 {
                    log::warn!("Gram matrix needed jitter {jitter:e} to factor");
                }
                return Ok(Self {
                    k: kj,
                    chol,
                    jitter,
                });
            }
            extra = if extra == 0.0 {
                1e-10 * scale
            } else {
                extra * 10.0
            };
            if extra > max_extra * (1.0 + 1e-9) {
                return Err(Error::IllConditioned {
                    max_jitter: base_jitter + max_extra,
                });
            }
        }
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    /// `K_U` including any applied jitter.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Total diagonal term added before factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|x| x.ln())
            .sum::<f64>()
    }

    /// `Z K⁻¹` for a d×N matrix `Z`.
    pub fn solve_right(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(&z.transpose()).transpose()
    }

    /// `‖Z K^{-1/2}‖_F² = tr(Z K⁻¹ Zᵀ)` through one triangular solve.
    pub fn quadratic_form(&self, z: &DMatrix<f64>) -> f64 {
        let mut y = z.transpose();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut y);
        y.norm_squared()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Build the spatial Gram matrix of a kernel on a grid.
pub fn build_gram(grid: &Grid, kernel: &KernelSpec) -> Result<GramMatrix> {
    kernel.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidInput("grid has no pixels".into()));
    }
    let n = grid.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.sigma_k2;
        for j in 0..i {
            let d = grid.distance(i, j);
            if d == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "pixels {j} and {i} share the same coordinates"
                )));
            }
            let v = kernel.eval(d);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    GramMatrix::from_matrix(k, kernel.jitter, kernel.sigma_k2)
}

/// Prior hyperparameters: `ilr(a) ~ N(mean, σ_a² I)` per pixel, spatially
/// correlated through `kernel`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub sigma_a2: f64,
    pub kernel: KernelSpec,
    pub basis: OrthonormalBasis,
    pub mean: Option<LatentVector>,
}

impl PriorSpec {
    pub fn new(p: usize, sigma_a2: f64, kernel: KernelSpec) -> Result<Self> {
        let spec = Self {
            sigma_a2,
            kernel,
            basis: OrthonormalBasis::helmert(p)?,
            mean: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mean(mut self, mean: LatentVector) -> Result<Self> {
        self.mean = Some(mean);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_a2 > 0.0 && self.sigma_a2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "latent variance must be positive, got {}",
                self.sigma_a2
            )));
        }
        self.kernel.validate()?;
        if let Some(m) = &self.mean {
            if m.dim() != self.latent_dim() {
                return Err(Error::DimensionMismatch {
                    what: "prior mean",
                    expected: self.latent_dim(),
                    found: m.dim(),
                });
            }
        }
        Ok(())
    }

    pub fn components(&self) -> usize {
        self.basis.dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.basis.latent_dim()
    }

    pub fn mean_vector(&self) -> DVector<f64> {
        self.mean
            .as_ref()
            .map(|m| m.as_vector().clone())
            .unwrap_or_else(|| DVector::zeros(self.latent_dim()))
    }

    /// The prior mean repeated over `n` pixels.
    pub fn mean_matrix(&self, n: usize) -> DMatrix<f64> {
        let m = self.mean_vector();
        DMatrix::from_fn(self.latent_dim(), n, |d, _| m[d])
    }
}

fn ln_2pi() -> f64 {
    (2.0 * std::f64::consts::PI).ln()
}

/// Log-density of the pixel prior w.r.t. Lebesgue measure on the first P-1
/// coordinates. The ilr Jacobian is `1 / (√P ∏ a_k)`.
pub fn pixel_prior_logpdf(a: &SimplexVector, spec: &PriorSpec) -> Result<f64> {
    let z = geometry::ilr(a, &spec.basis)?;
    let d = spec.latent_dim() as f64;
    let p = spec.components() as f64;
    let r2 = (z.as_vector() - spec.mean_vector()).norm_squared();
    let log_jac = -a.as_slice().iter().map(|x| x.ln()).sum::<f64>() - 0.5 * p.ln();
    Ok(log_jac - 0.5 * d * (ln_2pi() + spec.sigma_a2.ln()) - r2 / (2.0 * spec.sigma_a2))
}

/// Independent draws from the pixel prior.
pub fn pixel_prior_sample<R: Rng + ?Sized>(
    spec: &PriorSpec,
    m: usize,
    rng: &mut R,
) -> Result<Vec<SimplexVector>> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    let sd = spec.sigma_a2.sqrt();
    let mean = spec.mean_vector();
    (0..m)
        .map(|_| {
            let z = DVector::from_fn(spec.latent_dim(), |i, _| {
                mean[i] + sd * rng.sample::<f64, _>(StandardNormal)
            });
            geometry::ilr_inv(&LatentVector::from_vector(z), &spec.basis)
        })
        .collect()
}

fn check_gram(spec: &PriorSpec, gram: &GramMatrix, n: usize) -> Result<()> {
    spec.validate()?;
    if gram.n() != n {
        return Err(Error::DimensionMismatch {
            what: "Gram matrix size",
            expected: n,
            found: gram.n(),
        });
    }
    Ok(())
}

/// Latent draws `Z = mean 1ᵀ + σ_a E Lᵀ` with `E` standard normal.
pub fn gp_prior_sample_latent<R: Rng + ?Sized>(
    spec: &PriorSpec,
    gram: &GramMatrix,
    m: usize,
    rng: &mut R,
) -> Result<Vec<LatentMatrix>> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    let n = gram.n();
    let d = spec.latent_dim();
    let lt = gram.lower().transpose();
    let sd = spec.sigma_a2.sqrt();
    let mean = spec.mean_matrix(n);
    Ok((0..m)
        .map(|_| {
            let e = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            LatentMatrix(&mean + (e * &lt) * sd)
        })
        .collect())
}

/// Simplex-valued draws from the pushforward GP on a raster grid.
pub fn gp_prior_sample<R: Rng + ?Sized>(
    spec: &PriorSpec,
    gram: &GramMatrix,
    grid: &Grid,
    m: usize,
    rng: &mut R,
) -> Result<Vec<AbundanceImage>> {
    check_gram(spec, gram, grid.len())?;
    Ok(gp_prior_sample_latent(spec, gram, m, rng)?
        .into_iter()
        .map(|z| z.to_image(&spec.basis, grid.width(), grid.height()))
        .collect())
}

/// `‖(Z - mean) K^{-1/2}‖_F² / (2 σ_a²)`.
pub fn gp_prior_quadratic(z: &LatentMatrix, spec: &PriorSpec, gram: &GramMatrix) -> Result<f64> {
    check_gram(spec, gram, z.pixels())?;
    let centered = &z.0 - spec.mean_matrix(z.pixels());
    Ok(gram.quadratic_form(&centered) / (2.0 * spec.sigma_a2))
}

/// Normalized log-density of an abundance image under the pushforward GP.
pub fn gp_prior_logpdf(image: &AbundanceImage, spec: &PriorSpec, gram: &GramMatrix) -> Result<f64> {
    check_gram(spec, gram, image.pixels())?;
    let z = image.latent(&spec.basis)?;
    let n = image.pixels() as f64;
    let d = spec.latent_dim() as f64;
    let p = spec.components() as f64;
    let log_jac = -image.data.iter().map(|x| x.ln()).sum::<f64>() - 0.5 * n * p.ln();
    let log_norm = -0.5 * n * d * (ln_2pi() + spec.sigma_a2.ln()) - 0.5 * d * gram.log_det();
    Ok(log_jac + log_norm - gp_prior_quadratic(&z, spec, gram)?)
}
