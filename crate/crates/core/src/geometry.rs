//! Log-ratio geometry of the open probability simplex.
//!
//! The isometric log-ratio transform `ilr(a) = Hᵀ clr(a)` maps the interior of
//! Δ^{P-1} diffeomorphically onto R^{P-1}; its inverse is `softmax(H z)`.
//! Distances, geodesics and means in the simplex are computed by going to ilr
//! coordinates, doing ordinary Euclidean work, and mapping back.
//!
//! `H` is the Helmert sub-matrix by default. Any other orthonormal basis of
//! the zero-sum hyperplane gives the same distances (they only depend on clr).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Components are clamped to at least this value when a simplex vector is
/// built from raw data.
pub const SIMPLEX_EPS: f64 = 1e-12;

/// Sum-to-one tolerance guaranteed after construction.
pub const SUM_TOL: f64 = 1e-12;

/// Raw components more negative than this are rejected instead of clamped.
const NEGATIVE_TOL: f64 = 1e-9;

/// A point of the probability simplex Δ^{P-1}.
///
/// Built with [`SimplexVector::new`] the point is strictly interior. Points on
/// the closed simplex (projection outputs, Euclidean means) come from
/// [`SimplexVector::closed`] and are rejected by the log-ratio transforms if
/// they touch the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(DVector<f64>);

impl SimplexVector {
    /// Clamp to `[SIMPLEX_EPS, 1]` and renormalize.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_raw(&values)?;
        let mut v: Vec<f64> = values
            .into_iter()
            .map(|x| x.clamp(SIMPLEX_EPS, 1.0))
            .collect();
        normalize(&mut v);
        Ok(Self(DVector::from_vec(v)))
    }

    /// Renormalize without clamping; zeros are kept.
    pub fn closed(values: Vec<f64>) -> Result<Self> {
        validate_raw(&values)?;
        let mut v: Vec<f64> = values.into_iter().map(|x| x.max(0.0)).collect();
        normalize(&mut v);
        Ok(Self(DVector::from_vec(v)))
    }

    /// The barycenter (1/P, ..., 1/P).
    pub fn uniform(p: usize) -> Result<Self> {
        check_dim(p)?;
        Ok(Self(DVector::from_element(p, 1.0 / p as f64)))
    }

    /// Wrap values already known to lie on the simplex (e.g. softmax output).
    pub(crate) fn from_normalized(v: DVector<f64>) -> Self {
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0.data.into()
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&x| x > 0.0)
    }

    /// Apply a permutation: output component `i` is input component `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "permutation",
                expected: self.dim(),
                found: perm.len(),
            });
        }
        Ok(Self(DVector::from_iterator(
            perm.len(),
            perm.iter().map(|&i| self.0[i]),
        )))
    }

    fn check_interior(&self) -> Result<()> {
        check_interior_slice(self.as_slice())
    }
}

fn validate_raw(values: &[f64]) -> Result<()> {
    check_dim(values.len())?;
    if let Some(x) = values.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite component {x}")));
    }
    if let Some(x) = values.iter().find(|&&x| x < -NEGATIVE_TOL) {
        return Err(Error::InvalidInput(format!("negative component {x}")));
    }
    if values.iter().all(|&x| x <= 0.0) {
        return Err(Error::InvalidInput("all components are zero".into()));
    }
    Ok(())
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

fn check_dim(p: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::InvalidDimension(format!(
            "simplex needs at least 2 components, got {p}"
        )));
    }
    Ok(())
}

pub(crate) fn check_interior_slice(a: &[f64]) -> Result<()> {
    match a.iter().position(|&x| x <= 0.0) {
        Some(index) => Err(Error::Boundary {
            index,
            value: a[index],
        }),
        None => Ok(()),
    }
}

/// ilr coordinates of a simplex point.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector(DVector<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "latent vector has non-finite entries".into(),
            ));
        }
        Ok(Self(DVector::from_vec(values)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub(crate) fn from_vector(v: DVector<f64>) -> Self {
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Orthonormal basis of the hyperplane `{w : 1ᵀw = 0}` in R^P, stored as the
/// columns of a P×(P-1) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    h: DMatrix<f64>,
}

const BASIS_TOL: f64 = 1e-12;

impl OrthonormalBasis {
    /// Helmert sub-matrix: column `j` has `1/√(j(j+1))` in its first `j`
    /// rows and `-j/√(j(j+1))` in row `j+1` (1-based `j`).
    pub fn helmert(p: usize) -> Result<Self> {
        check_dim(p)?;
        let mut h = DMatrix::zeros(p, p - 1);
        for col in 0..p - 1 {
            let j = (col + 1) as f64;
            let scale = 1.0 / (j * (j + 1.0)).sqrt();
            for row in 0..=col {
                h[(row, col)] = scale;
            }
            h[(col + 1, col)] = -j * scale;
        }
        Ok(Self { h })
    }

    /// Validate an arbitrary P×(P-1) matrix as a basis.
    pub fn from_matrix(h: DMatrix<f64>) -> Result<Self> {
        let p = h.nrows();
        check_dim(p)?;
        if h.ncols() != p - 1 {
            return Err(Error::DimensionMismatch {
                what: "basis columns",
                expected: p - 1,
                found: h.ncols(),
            });
        }
        let basis = Self { h };
        let (ortho, zero_sum) = basis.invariant_errors();
        if ortho > BASIS_TOL * p as f64 || zero_sum > BASIS_TOL * p as f64 {
            return Err(Error::InvalidInput(format!(
                "not an orthonormal zero-sum basis (|HᵀH-I|={ortho:e}, |1ᵀH|={zero_sum:e})"
            )));
        }
        Ok(basis)
    }

    /// Another basis of the same hyperplane, `H Q` for orthogonal `Q`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.latent_dim() || q.ncols() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                what: "rotation",
                expected: self.latent_dim(),
                found: q.nrows(),
            });
        }
        Self::from_matrix(&self.h * q)
    }

    /// Max-abs deviations `(|HᵀH - I|∞, |1ᵀH|∞)`.
    pub fn invariant_errors(&self) -> (f64, f64) {
        let d = self.latent_dim();
        let gram = self.h.transpose() * &self.h;
        let ortho = (gram - DMatrix::<f64>::identity(d, d)).amax();
        let zero_sum = self.h.row_sum().amax();
        (ortho, zero_sum)
    }

    /// Number of simplex components P.
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Latent dimension P-1.
    pub fn latent_dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    fn check_components(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "simplex components",
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

/// Additive log-ratio against the last component.
pub fn alr(a: &SimplexVector) -> Result<DVector<f64>> {
    a.check_interior()?;
    let s = a.as_slice();
    let last = s[s.len() - 1].ln();
    Ok(DVector::from_iterator(
        s.len() - 1,
        s[..s.len() - 1].iter().map(|x| x.ln() - last),
    ))
}

/// Centered log-ratio; the output sums to zero.
pub fn clr(a: &SimplexVector) -> Result<DVector<f64>> {
    a.check_interior()?;
    let mut out = DVector::zeros(a.dim());
    clr_into(a.as_slice(), out.as_mut_slice());
    Ok(out)
}

pub(crate) fn clr_into(a: &[f64], out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(a) {
        *o = x.ln();
    }
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|o| *o -= mean);
}

/// Isometric log-ratio coordinates `Hᵀ clr(a)`.
pub fn ilr(a: &SimplexVector, basis: &OrthonormalBasis) -> Result<LatentVector> {
    basis.check_components(a.dim())?;
    let w = clr(a)?;
    Ok(LatentVector(basis.h.tr_mul(&w)))
}

/// Inverse ilr: `softmax(H z)`.
pub fn ilr_inv(z: &LatentVector, basis: &OrthonormalBasis) -> Result<SimplexVector> {
    if z.dim() != basis.latent_dim() {
        return Err(Error::DimensionMismatch {
            what: "latent dimension",
            expected: basis.latent_dim(),
            found: z.dim(),
        });
    }
    if z.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "latent vector has non-finite entries".into(),
        ));
    }
    let mut w = &basis.h * &z.0;
    softmax_in_place(w.as_mut_slice());
    Ok(SimplexVector(w))
}

/// Numerically stable softmax (max subtraction). Entries that underflow are
/// lifted to the smallest positive double so the output stays interior.
pub(crate) fn softmax_in_place(w: &mut [f64]) {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in w.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in w.iter_mut() {
        *x = (*x / total).max(f64::MIN_POSITIVE);
    }
}

/// ilr applied to every column of a P×N matrix.
pub fn ilr_columns(a: &DMatrix<f64>, basis: &OrthonormalBasis) -> Result<DMatrix<f64>> {
    basis.check_components(a.nrows())?;
    let mut w = a.clone();
    for mut col in w.column_iter_mut() {
        check_interior_slice(col.as_slice())?;
        let raw: Vec<f64> = col.iter().copied().collect();
        clr_into(&raw, col.as_mut_slice());
    }
    Ok(basis.h.tr_mul(&w))
}

/// Inverse ilr applied to every column of a (P-1)×N matrix.
pub fn ilr_inv_columns(z: &DMatrix<f64>, basis: &OrthonormalBasis) -> DMatrix<f64> {
    let mut w = &basis.h * z;
    for mut col in w.column_iter_mut() {
        softmax_in_place(col.as_mut_slice());
    }
    w
}

/// Aitchison distance, the Euclidean distance between ilr images.
pub fn geodesic_distance(
    a: &SimplexVector,
    b: &SimplexVector,
    basis: &OrthonormalBasis,
) -> Result<f64> {
    let za = ilr(a, basis)?;
    let zb = ilr(b, basis)?;
    Ok((za.0 - zb.0).norm())
}

/// Point at parameter `t` on the Aitchison geodesic from `a` to `b`.
pub fn geodesic_path(
    a: &SimplexVector,
    b: &SimplexVector,
    t: f64,
    basis: &OrthonormalBasis,
) -> Result<SimplexVector> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!(
            "geodesic parameter t={t} outside [0, 1]"
        )));
    }
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    let za = ilr(a, basis)?;
    let zb = ilr(b, basis)?;
    let z = LatentVector(za.0 * (1.0 - t) + zb.0 * t);
    ilr_inv(&z, basis)
}

/// Negative Shannon entropy `Σ a_k log a_k` (nats), the mirror potential.
pub fn entropy(a: &SimplexVector) -> Result<f64> {
    a.check_interior()?;
    Ok(a.0.iter().map(|x| x * x.ln()).sum())
}

/// Ambient gradient of [`entropy`]: `log a_k + 1`.
pub fn entropy_gradient(a: &SimplexVector) -> Result<DVector<f64>> {
    a.check_interior()?;
    Ok(a.0.map(|x| x.ln() + 1.0))
}

/// Orthogonal projection onto the zero-sum hyperplane.
pub fn project_zero_sum(v: &DVector<f64>) -> DVector<f64> {
    let mean = v.mean();
    v.map(|x| x - mean)
}

/// The mirror map of the entropy potential expressed in ilr coordinates.
///
/// The ambient gradient `log a + 1` is not itself zero-sum; it equals
/// `clr(a)` after projection onto the hyperplane, so
/// `Hᵀ P_H(∇h(a)) = ilr(a)`. This returns `ilr(a)`.
pub fn mirror_map(a: &SimplexVector, basis: &OrthonormalBasis) -> Result<LatentVector> {
    ilr(a, basis)
}
