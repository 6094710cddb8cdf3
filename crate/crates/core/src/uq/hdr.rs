//! Highest-density regions from posterior samples.
//!
//! The density is estimated at every sample, the samples are sorted by
//! density, and the threshold is the `⌊αM⌋`-th smallest value. The region is
//! the set of estimator cells whose density reaches the threshold; samples
//! tied with the threshold are inside, so the in-sample coverage is at least
//! `1 - α`.
//!
//! Two estimators are available: a histogram on a regular barycentric grid
//! (P = 2 or 3) and a Gaussian KDE in ilr coordinates (P ≤ 4), converted to a
//! simplex density with the ilr Jacobian. Densities are with respect to
//! Lebesgue measure on the first P-1 coordinates.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, OrthonormalBasis, SimplexVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityEstimator {
    /// Regular grid with `bins` cells per simplex edge.
    Histogram { bins: usize },
    /// Gaussian KDE in ilr space. `bandwidth` overrides Scott's rule with an
    /// isotropic value; `grid` is the number of evaluation points per latent
    /// axis used for component counting.
    LatentKde {
        #[serde(default)]
        bandwidth: Option<f64>,
        #[serde(default = "default_kde_grid")]
        grid: usize,
    },
}

fn default_kde_grid() -> usize {
    40
}

impl DensityEstimator {
    /// For `m` samples: a histogram with `⌈2 m^(1/3)⌉` bins when P = 2, the
    /// latent KDE otherwise.
    pub fn default_for(p: usize, m: usize) -> Self {
        if p == 2 {
            DensityEstimator::Histogram {
                bins: ((2.0 * (m as f64).cbrt()).ceil() as usize).max(2),
            }
        } else {
            DensityEstimator::LatentKde {
                bandwidth: None,
                grid: default_kde_grid(),
            }
        }
    }
}

/// One cell of an HDR region.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HdrCell {
    /// Interval `[index/bins, (index+1)/bins]` of the first component, P = 2.
    Segment { index: usize, bins: usize },
    /// Triangle of the barycentric grid. Upward when `i + j + k = bins - 1`,
    /// downward when `i + j + k = bins - 2`.
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        bins: usize,
    },
    /// Evaluation point of the latent grid, mapped to the simplex.
    Latent { center: Vec<f64> },
}

impl HdrCell {
    /// Barycentric coordinates of the cell's vertices (just the center for
    /// latent cells).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match *self {
            HdrCell::Segment { index, bins } => {
                let (lo, hi) = (index as f64 / bins as f64, (index + 1) as f64 / bins as f64);
                vec![vec![lo, 1.0 - lo], vec![hi, 1.0 - hi]]
            }
            HdrCell::Triangle { i, j, k, bins } => {
                let n = bins as f64;
                let v =
                    |a: usize, b: usize, c: usize| vec![a as f64 / n, b as f64 / n, c as f64 / n];
                if i + j + k + 1 == bins {
                    vec![v(i + 1, j, k), v(i, j + 1, k), v(i, j, k + 1)]
                } else {
                    vec![v(i + 1, j + 1, k), v(i + 1, j, k + 1), v(i, j + 1, k + 1)]
                }
            }
            HdrCell::Latent { ref center } => vec![center.clone()],
        }
    }
}

#[derive(Debug, Clone)]
enum Fitted {
    Segment {
        bins: usize,
        density: Vec<f64>,
    },
    Triangle {
        bins: usize,
        density: Vec<f64>,
    },
    Kde {
        basis: OrthonormalBasis,
        /// Latent samples sorted by their first coordinate, one per column.
        z: DMatrix<f64>,
        h: Vec<f64>,
    },
}

/// Output of [`hdr`].
#[derive(Debug, Clone)]
pub struct HdrResult {
    pub alpha: f64,
    pub estimator: DensityEstimator,
    /// Estimated density at every input sample, in input order.
    pub densities: Vec<f64>,
    pub threshold: f64,
    pub region: Vec<HdrCell>,
    pub n_components: usize,
    /// Fraction of the input samples in each component, largest first.
    pub component_mass: Vec<f64>,
    fitted: Fitted,
}

impl HdrResult {
    /// Density of the fitted estimator at an arbitrary point.
    pub fn density(&self, a: &SimplexVector) -> Result<f64> {
        self.fitted.density(a)
    }

    /// Whether `a` falls inside the region.
    pub fn contains(&self, a: &SimplexVector) -> Result<bool> {
        Ok(self.density(a)? >= self.threshold)
    }

    /// Fraction of the input samples with density at or above the threshold.
    pub fn in_sample_coverage(&self) -> f64 {
        let inside = self
            .densities
            .iter()
            .filter(|&&d| d >= self.threshold)
            .count();
        inside as f64 / self.densities.len() as f64
    }
}

fn segment_index(a: &[f64], bins: usize) -> usize {
    ((a[0] * bins as f64).floor() as usize).min(bins - 1)
}

/// `(i, j, k)` of the triangular cell containing `a`.
pub(crate) fn triangle_index(a: &[f64], bins: usize) -> (usize, usize, usize) {
    let n = bins as f64;
    let mut idx = [0usize; 3];
    for (o, &x) in idx.iter_mut().zip(a) {
        *o = ((x * n).floor().max(0.0) as usize).min(bins - 1);
    }
    // floor sums lie in {bins-2, bins-1, bins}; a sum of `bins` only happens
    // on a grid line, resolved into the upward cell.
    while idx.iter().sum::<usize>() > bins - 1 {
        let (pos, _) = idx
            .iter()
            .enumerate()
            .max_by_key(|(_, &v)| v)
            .expect("3 entries");
        idx[pos] -= 1;
    }
    while idx.iter().sum::<usize>() + 2 < bins {
        let (pos, _) = idx
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| v)
            .expect("3 entries");
        idx[pos] += 1;
    }
    (idx[0], idx[1], idx[2])
}

fn triangle_slot(i: usize, j: usize, k: usize, bins: usize) -> usize {
    if i + j + k + 1 == bins {
        i * bins + j
    } else {
        bins * bins + i * bins + j
    }
}

fn triangle_from_slot(slot: usize, bins: usize) -> Option<(usize, usize, usize)> {
    let (up, rest) = if slot < bins * bins {
        (true, slot)
    } else {
        (false, slot - bins * bins)
    };
    let (i, j) = (rest / bins, rest % bins);
    let target = if up { bins - 1 } else { bins.checked_sub(2)? };
    (i + j <= target).then(|| (i, j, target - i - j))
}

fn triangle_neighbors(i: usize, j: usize, k: usize, bins: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(3);
    if i + j + k + 1 == bins {
        if i > 0 {
            out.push(triangle_slot(i - 1, j, k, bins));
        }
        if j > 0 {
            out.push(triangle_slot(i, j - 1, k, bins));
        }
        if k > 0 {
            out.push(triangle_slot(i, j, k - 1, bins));
        }
    } else {
        out.push(triangle_slot(i + 1, j, k, bins));
        out.push(triangle_slot(i, j + 1, k, bins));
        out.push(triangle_slot(i, j, k + 1, bins));
    }
    out
}

/// Kernels beyond this many bandwidths (Mahalanobis radius) are dropped.
const KDE_CUTOFF: f64 = 6.0;
const MIN_BANDWIDTH: f64 = 1e-10;

fn kde_latent_density(z: &DMatrix<f64>, h: &[f64], point: &[f64]) -> f64 {
    // columns of `z` are sorted by their first coordinate
    let (d, m) = z.shape();
    let data = z.as_slice();
    let lo = point[0] - KDE_CUTOFF * h[0];
    let hi = point[0] + KDE_CUTOFF * h[0];
    let (mut start, mut end) = (0, m);
    while start < end {
        let mid = (start + end) / 2;
        if data[mid * d] < lo {
            start = mid + 1;
        } else {
            end = mid;
        }
    }
    let inv_h: Vec<f64> = h.iter().map(|x| 1.0 / x).collect();
    let cutoff2 = KDE_CUTOFF * KDE_CUTOFF;
    let mut total = 0.0;
    for col in data[start * d..].chunks_exact(d) {
        if col[0] > hi {
            break;
        }
        let mut q = 0.0;
        for k in 0..d {
            let u = (point[k] - col[k]) * inv_h[k];
            q += u * u;
        }
        if q < cutoff2 {
            total += (-0.5 * q).exp();
        }
    }
    let norm: f64 = h.iter().product::<f64>() * (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0);
    total / (m as f64 * norm)
}

/// log of `1 / (√P ∏ a_k)`.
fn log_ilr_jacobian(a: &[f64]) -> f64 {
    -a.iter().map(|x| x.ln()).sum::<f64>() - 0.5 * (a.len() as f64).ln()
}

impl Fitted {
    fn density(&self, a: &SimplexVector) -> Result<f64> {
        match self {
            Fitted::Segment { bins, density } => {
                check_p(a, 2)?;
                Ok(density[segment_index(a.as_slice(), *bins)])
            }
            Fitted::Triangle { bins, density } => {
                check_p(a, 3)?;
                let (i, j, k) = triangle_index(a.as_slice(), *bins);
                Ok(density[triangle_slot(i, j, k, *bins)])
            }
            Fitted::Kde { basis, z, h } => {
                let lat = geometry::ilr(a, basis)?;
                let f = kde_latent_density(z, h, lat.as_slice());
                Ok(f * log_ilr_jacobian(a.as_slice()).exp())
            }
        }
    }
}

fn check_p(a: &SimplexVector, p: usize) -> Result<()> {
    if a.dim() != p {
        return Err(Error::DimensionMismatch {
            what: "simplex components",
            expected: p,
            found: a.dim(),
        });
    }
    Ok(())
}

/// Connected components of `inside` under `neighbors`; returns the component
/// label of each cell (`usize::MAX` outside) and the component count.
fn label_components(
    inside: &[bool],
    neighbors: impl Fn(usize) -> Vec<usize>,
) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; inside.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..inside.len() {
        if !inside[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for nb in neighbors(c) {
                if inside[nb] && label[nb] == usize::MAX {
                    label[nb] = count;
                    queue.push_back(nb);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

fn component_masses(
    sample_labels: impl Iterator<Item = usize>,
    count: usize,
    m: usize,
) -> Vec<f64> {
    let mut hits = vec![0usize; count];
    for l in sample_labels {
        if l != usize::MAX {
            hits[l] += 1;
        }
    }
    hits.sort_unstable_by(|a, b| b.cmp(a));
    hits.into_iter().map(|h| h as f64 / m as f64).collect()
}

/// Estimate the highest-density region at level `alpha`.
pub fn hdr(
    samples: &[SimplexVector],
    alpha: f64,
    estimator: &DensityEstimator,
) -> Result<HdrResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let m = samples.len();
    let rank = (alpha * m as f64).floor() as usize;
    if rank == 0 {
        return Err(Error::TooFewSamples {
            needed: (1.0 / alpha).ceil() as usize,
            found: m,
        });
    }
    let p = samples[0].dim();
    if let Some(bad) = samples.iter().find(|a| a.dim() != p) {
        return Err(Error::DimensionMismatch {
            what: "sample components",
            expected: p,
            found: bad.dim(),
        });
    }
    if p > 4 {
        return Err(Error::InvalidDimension(format!(
            "HDR regions are only computed up to P = 4, got {p}"
        )));
    }
    match estimator {
        DensityEstimator::Histogram { bins } => {
            if *bins < 2 {
                return Err(Error::InvalidInput(
                    "histogram needs at least 2 bins".into(),
                ));
            }
            match p {
                2 => histogram_segment(samples, alpha, rank, *bins, estimator),
                3 => histogram_triangle(samples, alpha, rank, *bins, estimator),
                _ => Err(Error::InvalidDimension(
                    "barycentric histograms support P = 2 or 3; use the latent KDE".into(),
                )),
            }
        }
        DensityEstimator::LatentKde { bandwidth, grid } => {
            latent_kde(samples, alpha, rank, *bandwidth, *grid, estimator)
        }
    }
}

fn threshold_at(densities: &[f64], rank: usize) -> f64 {
    let mut sorted = densities.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted[rank - 1]
}

fn histogram_segment(
    samples: &[SimplexVector],
    alpha: f64,
    rank: usize,
    bins: usize,
    estimator: &DensityEstimator,
) -> Result<HdrResult> {
    let m = samples.len();
    let cells: Vec<usize> = samples
        .iter()
        .map(|a| segment_index(a.as_slice(), bins))
        .collect();
    let mut density = vec![0.0; bins];
    let unit = bins as f64 / m as f64;
    for &c in &cells {
        density[c] += unit;
    }
    let densities: Vec<f64> = cells.iter().map(|&c| density[c]).collect();
    let threshold = threshold_at(&densities, rank);
    let inside: Vec<bool> = density.iter().map(|&d| d >= threshold).collect();
    let (label, n_components) = label_components(&inside, |c| {
        let mut v = Vec::with_capacity(2);
        if c > 0 {
            v.push(c - 1);
        }
        if c + 1 < bins {
            v.push(c + 1);
        }
        v
    });
    let region = (0..bins)
        .filter(|&c| inside[c])
        .map(|index| HdrCell::Segment { index, bins })
        .collect();
    Ok(HdrResult {
        alpha,
        estimator: estimator.clone(),
        component_mass: component_masses(cells.iter().map(|&c| label[c]), n_components, m),
        densities,
        threshold,
        region,
        n_components,
        fitted: Fitted::Segment { bins, density },
    })
}

fn histogram_triangle(
    samples: &[SimplexVector],
    alpha: f64,
    rank: usize,
    bins: usize,
    estimator: &DensityEstimator,
) -> Result<HdrResult> {
    let m = samples.len();
    let slots: Vec<usize> = samples
        .iter()
        .map(|a| {
            let (i, j, k) = triangle_index(a.as_slice(), bins);
            triangle_slot(i, j, k, bins)
        })
        .collect();
    // each small triangle has area 1/(2 bins²) in (a1, a2) coordinates
    let unit = 2.0 * (bins * bins) as f64 / m as f64;
    let mut density = vec![0.0; 2 * bins * bins];
    for &s in &slots {
        density[s] += unit;
    }
    let densities: Vec<f64> = slots.iter().map(|&s| density[s]).collect();
    let threshold = threshold_at(&densities, rank);
    let inside: Vec<bool> = (0..density.len())
        .map(|s| triangle_from_slot(s, bins).is_some() && density[s] >= threshold)
        .collect();
    let (label, n_components) = label_components(&inside, |s| {
        let (i, j, k) = triangle_from_slot(s, bins).expect("valid slot");
        triangle_neighbors(i, j, k, bins)
    });
    let region = (0..density.len())
        .filter(|&s| inside[s])
        .map(|s| {
            let (i, j, k) = triangle_from_slot(s, bins).expect("valid slot");
            HdrCell::Triangle { i, j, k, bins }
        })
        .collect();
    Ok(HdrResult {
        alpha,
        estimator: estimator.clone(),
        component_mass: component_masses(slots.iter().map(|&s| label[s]), n_components, m),
        densities,
        threshold,
        region,
        n_components,
        fitted: Fitted::Triangle { bins, density },
    })
}

fn latent_kde(
    samples: &[SimplexVector],
    alpha: f64,
    rank: usize,
    bandwidth: Option<f64>,
    grid: usize,
    estimator: &DensityEstimator,
) -> Result<HdrResult> {
    let m = samples.len();
    let p = samples[0].dim();
    let d = p - 1;
    if grid < 2 {
        return Err(Error::InvalidInput(
            "KDE evaluation grid needs at least 2 points per axis".into(),
        ));
    }
    let basis = OrthonormalBasis::helmert(p)?;
    let mut z = DMatrix::zeros(d, m);
    for (c, a) in samples.iter().enumerate() {
        z.set_column(c, geometry::ilr(a, &basis)?.as_vector());
    }
    let h: Vec<f64> = match bandwidth {
        Some(b) => vec![b; d],
        None => {
            let scott = (m as f64).powf(-1.0 / (d as f64 + 4.0));
            let mean = z.column_mean();
            (0..d)
                .map(|r| {
                    let var = z.row(r).iter().map(|v| (v - mean[r]).powi(2)).sum::<f64>()
                        / (m.max(2) - 1) as f64;
                    scott * var.sqrt()
                })
                .collect()
        }
    };
    if h.iter().any(|&x| !(x > MIN_BANDWIDTH && x.is_finite())) {
        return Err(Error::DegenerateBandwidth);
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| z[(0, a)].total_cmp(&z[(0, b)]));
    let sorted = DMatrix::from_fn(d, m, |r, c| z[(r, order[c])]);

    let simplex_density = |lat: &[f64]| -> f64 {
        let a = crate::geometry::ilr_inv_columns(&DMatrix::from_column_slice(d, 1, lat), &basis);
        kde_latent_density(&sorted, &h, lat) * log_ilr_jacobian(a.as_slice()).exp()
    };
    let densities: Vec<f64> = (0..m)
        .map(|c| simplex_density(z.column(c).as_slice()))
        .collect();
    let threshold = threshold_at(&densities, rank);

    // evaluation grid over the sample bounding box padded by 3 bandwidths
    let lo: Vec<f64> = (0..d).map(|r| z.row(r).min() - 3.0 * h[r]).collect();
    let hi: Vec<f64> = (0..d).map(|r| z.row(r).max() + 3.0 * h[r]).collect();
    let step: Vec<f64> = (0..d)
        .map(|r| (hi[r] - lo[r]) / (grid - 1) as f64)
        .collect();
    let total = grid.pow(d as u32);
    let coords = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; d];
        for o in out.iter_mut() {
            *o = idx % grid;
            idx /= grid;
        }
        out
    };
    let point =
        |c: &[usize]| -> Vec<f64> { (0..d).map(|r| lo[r] + c[r] as f64 * step[r]).collect() };
    let inside: Vec<bool> = (0..total)
        .map(|g| simplex_density(&point(&coords(g))) >= threshold)
        .collect();
    let (label, n_components) = label_components(&inside, |g| {
        let c = coords(g);
        let mut out = Vec::with_capacity(2 * d);
        let mut stride = 1;
        for &cr in c.iter() {
            if cr > 0 {
                out.push(g - stride);
            }
            if cr + 1 < grid {
                out.push(g + stride);
            }
            stride *= grid;
        }
        out
    });
    let nearest = |c: usize| -> usize {
        let mut g = 0;
        let mut stride = 1;
        for r in 0..d {
            let idx = ((z[(r, c)] - lo[r]) / step[r])
                .round()
                .clamp(0.0, (grid - 1) as f64) as usize;
            g += idx * stride;
            stride *= grid;
        }
        g
    };
    let region = (0..total)
        .filter(|&g| inside[g])
        .map(|g| {
            let lat = point(&coords(g));
            let a =
                crate::geometry::ilr_inv_columns(&DMatrix::from_column_slice(d, 1, &lat), &basis);
            HdrCell::Latent {
                center: a.as_slice().to_vec(),
            }
        })
        .collect();
    Ok(HdrResult {
        alpha,
        estimator: estimator.clone(),
        component_mass: component_masses((0..m).map(|c| label[nearest(c)]), n_components, m),
        densities,
        threshold,
        region,
        n_components,
        fitted: Fitted::Kde {
            basis,
            z: sorted,
            h,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_cells_partition_the_grid() {
        let bins = 5;
        let valid = (0..2 * bins * bins)
            .filter(|&s| triangle_from_slot(s, bins).is_some())
            .count();
        assert_eq!(valid, bins * bins);
        for s in 0..2 * bins * bins {
            if let Some((i, j, k)) = triangle_from_slot(s, bins) {
                assert_eq!(triangle_slot(i, j, k, bins), s);
                for nb in triangle_neighbors(i, j, k, bins) {
                    let (a, b, c) = triangle_from_slot(nb, bins).unwrap();
                    assert!(triangle_neighbors(a, b, c, bins).contains(&s));
                }
            }
        }
    }

    #[test]
    fn triangle_index_of_centroid_and_vertices() {
        let bins = 4;
        let (i, j, k) = triangle_index(&[1.0, 0.0, 0.0], bins);
        assert_eq!((i, j, k), (3, 0, 0));
        let (i, j, k) = triangle_index(&[0.5, 0.5, 0.0], bins);
        assert_eq!(i + j + k, bins - 1);
        // cell vertices bracket the point
        let a = [0.31, 0.42, 0.27];
        let (i, j, k) = triangle_index(&a, bins);
        let verts = HdrCell::Triangle { i, j, k, bins }.vertices();
        for (c, &x) in a.iter().enumerate() {
            let lo = verts.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min);
            let hi = verts.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
            assert!(lo <= x && x <= hi);
        }
    }

    #[test]
    fn point_mass_gives_single_cell() {
        let a = SimplexVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let s = vec![a; 50];
        for alpha in [0.05, 0.5, 0.9] {
            let r = hdr(&s, alpha, &DensityEstimator::Histogram { bins: 16 }).unwrap();
            assert_eq!(r.region.len(), 1);
            assert_eq!(r.n_components, 1);
            assert_eq!(r.component_mass, vec![1.0]);
        }
    }

    #[test]
    fn degenerate_bandwidth_and_domain_errors() {
        let a = SimplexVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let s = vec![a; 50];
        let kde = DensityEstimator::LatentKde {
            bandwidth: None,
            grid: 10,
        };
        assert!(matches!(
            hdr(&s, 0.1, &kde),
            Err(Error::DegenerateBandwidth)
        ));
        assert!(hdr(&s, 1.5, &DensityEstimator::default_for(3, 100)).is_err());
        assert!(matches!(
            hdr(&s[..5], 0.1, &DensityEstimator::default_for(3, 100)),
            Err(Error::TooFewSamples {
                needed: 10,
                found: 5
            })
        ));
        let five = vec![SimplexVector::uniform(5).unwrap(); 20];
        assert!(hdr(&five, 0.1, &kde).is_err());
    }

    #[test]
    fn segment_histogram_finds_two_bumps() {
        let mut s = Vec::new();
        for i in 0..200 {
            let t = (i % 20) as f64 / 1000.0;
            s.push(SimplexVector::new(vec![0.1 + t, 0.9 - t]).unwrap());
            s.push(SimplexVector::new(vec![0.8 + t, 0.2 - t]).unwrap());
        }
        let r = hdr(&s, 0.1, &DensityEstimator::Histogram { bins: 20 }).unwrap();
        assert_eq!(r.n_components, 2);
        assert!(r.in_sample_coverage() >= 0.9);
    }
}
