//! Bayesian hyperspectral unmixing on the probability simplex.
//!
//! Abundance vectors are handled through the isometric log-ratio (ilr)
//! transform: priors are Gaussian (or Gaussian processes) in ilr space and
//! pushed forward to the simplex, posteriors are sampled with Langevin
//! dynamics in ilr coordinates, and uncertainty is summarized with geodesic
//! means, variances and highest-density regions.
//!
//! ```
//! use aitchison_unmix::geometry::{ilr, ilr_inv, OrthonormalBasis, SimplexVector};
//!
//! let basis = OrthonormalBasis::helmert(3).unwrap();
//! let a = SimplexVector::new(vec![0.2, 0.3, 0.5]).unwrap();
//! let z = ilr(&a, &basis).unwrap();
//! let back = ilr_inv(&z, &basis).unwrap();
//! assert!((back.as_slice()[2] - 0.5).abs() < 1e-12);
//! ```

pub mod cli;
pub mod error;
pub mod geometry;
pub mod interp;
pub mod io;
pub mod prior;
pub mod repro;
pub mod sampler;
pub mod uq;

pub use error::{Error, Result};
