//! Checks against independent reference computations.

use aitchison_unmix::geometry::{self, OrthonormalBasis, SimplexVector};
use aitchison_unmix::io::{builtin_endmembers, empirical_snr_db, synth_generate};
use aitchison_unmix::prior::{
    build_gram, gp_prior_logpdf, gp_prior_quadratic, gp_prior_sample_latent, pixel_prior_sample,
    Grid, KernelSpec, LatentMatrix, PriorSpec,
};
use aitchison_unmix::sampler::{
    latent_neg_log_posterior, project_simplex, projected_ula, EndmemberMatrix, Init,
    ObservationCube, PosteriorModel, SamplerConfig,
};
use aitchison_unmix::uq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Projection onto the simplex by bisection on the KKT multiplier.
fn projection_by_bisection(v: &[f64]) -> Vec<f64> {
    let mass = |tau: f64| v.iter().map(|x| (x - tau).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (
        v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0,
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

#[test]
fn projection_matches_kkt_oracle() {
    let mut r = rng(1);
    for _ in 0..100 {
        let p = r.random_range(2..10);
        let v: Vec<f64> = (0..p)
            .map(|_| 2.0 * r.sample::<f64, _>(StandardNormal))
            .collect();
        let got = project_simplex(&v).unwrap();
        let want = projection_by_bisection(&v);
        for (x, y) in got.as_slice().iter().zip(&want) {
            assert!((x - y).abs() < 1e-9, "{v:?}");
        }
        // Optimality: (v - x)·(e_k - x) ≤ 0 for every vertex e_k.
        let x = got.as_slice();
        let base: f64 = v.iter().zip(x).map(|(vi, xi)| (vi - xi) * -xi).sum();
        for k in 0..p {
            assert!(base + (v[k] - x[k]) <= 1e-9);
        }
    }
}

#[test]
fn latent_energy_composes_prior_and_likelihood() {
    // U(Z) = -log p(A) + log|J(A)| + ‖X - S A‖²/(2σ²) + const.
    let mut r = rng(2);
    let grid = Grid::raster(3, 2);
    let prior = PriorSpec::new(4, 0.8, KernelSpec::exponential(1.7)).unwrap();
    let gram = build_gram(&grid, &prior.kernel).unwrap();
    let s = DMatrix::from_fn(7, 4, |_, _| r.random_range(0.1..1.0));
    let x = DMatrix::from_fn(7, 6, |_, _| r.random_range(0.0..1.0));
    let sigma2 = 0.03;
    let model = PosteriorModel::new(
        EndmemberMatrix::unnamed(s.clone()).unwrap(),
        ObservationCube::new(x.clone(), sigma2, 3, 2).unwrap(),
        prior.clone(),
        gram.clone(),
    )
    .unwrap();
    let oracle = |z: &DMatrix<f64>| {
        let img = LatentMatrix::new(z.clone())
            .unwrap()
            .to_image(&prior.basis, 3, 2);
        let a = img.matrix();
        let log_jac = -a.iter().map(|v| v.ln()).sum::<f64>() - 0.5 * 6.0 * 4f64.ln();
        let loglik = (&x - &s * a).norm_squared() / (2.0 * sigma2);
        -gp_prior_logpdf(&img, &prior, &gram).unwrap() + log_jac + loglik
    };
    let draws: Vec<DMatrix<f64>> = (0..10)
        .map(|_| DMatrix::from_fn(3, 6, |_, _| r.sample::<f64, _>(StandardNormal)))
        .collect();
    let offsets: Vec<f64> = draws
        .iter()
        .map(|z| {
            latent_neg_log_posterior(&LatentMatrix::new(z.clone()).unwrap(), &model).unwrap()
                - oracle(z)
        })
        .collect();
    for o in &offsets {
        assert!((o - offsets[0]).abs() < 1e-8, "{offsets:?}");
    }
}

#[test]
fn quadratic_term_is_a_trace() {
    let mut r = rng(7);
    let grid = Grid::raster(4, 3);
    let prior = PriorSpec::new(4, 0.4, KernelSpec::exponential(2.5)).unwrap();
    let gram = build_gram(&grid, &prior.kernel).unwrap();
    let z = DMatrix::from_fn(3, 12, |_, _| r.sample::<f64, _>(StandardNormal));
    let k_inv = gram.matrix().clone().try_inverse().unwrap();
    let oracle = (k_inv * z.transpose() * &z).trace() / (2.0 * 0.4);
    let got = gp_prior_quadratic(&LatentMatrix::new(z).unwrap(), &prior, &gram).unwrap();
    assert!((got - oracle).abs() < 1e-10 * oracle.max(1.0));
}

#[test]
fn pixel_prior_moments() {
    let spec = PriorSpec::new(4, 0.6, KernelSpec::dirac()).unwrap();
    let m = 100_000;
    let samples = pixel_prior_sample(&spec, m, &mut rng(3)).unwrap();
    let z: Vec<DVector<f64>> = samples
        .iter()
        .map(|a| geometry::ilr(a, &spec.basis).unwrap().as_vector().clone())
        .collect();
    let mean = z.iter().fold(DVector::zeros(3), |acc, v| acc + v) / m as f64;
    let sd = 0.6f64.sqrt();
    assert!(mean.iter().all(|x| x.abs() < 4.0 * sd / (m as f64).sqrt()));
    let mut cov = DMatrix::zeros(3, 3);
    for v in &z {
        let c = v - &mean;
        cov += &c * c.transpose();
    }
    cov /= (m - 1) as f64;
    // var of a sample variance is 2σ⁴/M, of a covariance σ⁴/M
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 0.6 } else { 0.0 };
            let se = 0.6 * ((1.0 + (i == j) as u8 as f64) / m as f64).sqrt();
            assert!((cov[(i, j)] - target).abs() < 5.0 * se);
        }
    }
}

#[test]
fn dirac_kernel_gives_independent_pixels() {
    let grid = Grid::raster(3, 3);
    let spec = PriorSpec::new(3, 1.0, KernelSpec::dirac()).unwrap();
    let gram = build_gram(&grid, &spec.kernel).unwrap();
    let m = 50_000;
    let draws = gp_prior_sample_latent(&spec, &gram, m, &mut rng(4)).unwrap();
    for (i, j) in [(0, 1), (0, 4), (3, 8)] {
        let c = draws
            .iter()
            .map(|z| z.matrix()[(0, i)] * z.matrix()[(0, j)])
            .sum::<f64>()
            / m as f64;
        assert!(c.abs() < 5.0 / (m as f64).sqrt(), "pixels {i},{j}: {c}");
    }
}

#[test]
fn prior_total_variance_matches_latent_dimension() {
    let (p, sigma_a2) = (4, 0.3);
    let spec = PriorSpec::new(p, sigma_a2, KernelSpec::dirac()).unwrap();
    let m = 100_000;
    let samples = pixel_prior_sample(&spec, m, &mut rng(5)).unwrap();
    let tv = uq::geodesic_total_variance(&samples, &spec.basis).unwrap();
    // Var of a sum of d independent σ²χ²₁/M terms.
    let se = sigma_a2 * (2.0 * (p - 1) as f64 / m as f64).sqrt();
    assert!((tv - (p - 1) as f64 * sigma_a2).abs() < 3.0 * se, "{tv}");
    let comp = uq::ilr_componentwise_variances(&samples, &spec.basis).unwrap();
    let per = sigma_a2 * (2.0 / m as f64).sqrt();
    assert!(
        comp.iter().all(|v| (v - sigma_a2).abs() < 4.0 * per),
        "{comp}"
    );
}

#[test]
fn geodesic_mean_minimizes_squared_distance_on_a_grid() {
    let mut r = rng(6);
    let basis = OrthonormalBasis::helmert(3).unwrap();
    let samples: Vec<SimplexVector> = (0..15)
        .map(|_| {
            SimplexVector::closed(vec![
                r.random_range(0.1..1.0),
                r.random_range(0.1..1.0),
                r.random_range(0.1..1.0),
            ])
            .unwrap()
        })
        .collect();
    let bins = 400usize;
    let mut best = (f64::INFINITY, vec![]);
    for i in 1..bins {
        for j in 1..bins - i {
            let c = vec![
                i as f64 / bins as f64,
                j as f64 / bins as f64,
                (bins - i - j) as f64 / bins as f64,
            ];
            let a = SimplexVector::new(c.clone()).unwrap();
            let cost: f64 = samples
                .iter()
                .map(|s| geometry::geodesic_distance(&a, s, &basis).unwrap().powi(2))
                .sum();
            if cost < best.0 {
                best = (cost, c);
            }
        }
    }
    let mean = uq::geodesic_mean(&samples, &basis).unwrap();
    for (x, y) in mean.as_slice().iter().zip(&best.1) {
        assert!((x - y).abs() <= 1.0 / bins as f64 + 1e-12);
    }
}

#[test]
fn noiseless_projected_chain_reaches_stationary_point() {
    let s = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.2, 0.2, 0.8, 0.1, 0.1, 0.3, 0.7]);
    let x = DMatrix::from_column_slice(3, 1, &[0.5, 0.4, 0.3]);
    let (sigma2, sigma_a2) = (0.05, 2.0);
    let prior = PriorSpec::new(3, sigma_a2, KernelSpec::dirac()).unwrap();
    let gram = build_gram(&Grid::raster(1, 1), &prior.kernel).unwrap();
    let basis = prior.basis.clone();
    let model = PosteriorModel::new(
        EndmemberMatrix::unnamed(s.clone()).unwrap(),
        ObservationCube::new(x.clone(), sigma2, 1, 1).unwrap(),
        prior,
        gram,
    )
    .unwrap();
    let step = 1e-3;
    let mut cfg = SamplerConfig::new(step, 40_000, 0);
    cfg.noise_scale = 0.0;
    cfg.init = Init::UniformImage;
    let chain = projected_ula(&model, &cfg).unwrap();
    let a = chain.samples.last().unwrap().pixel(0);
    let av = a.as_vector();
    // Gradient of the simplex energy written out independently.
    let h = basis.matrix();
    let logs = av.map(f64::ln);
    let z = h.transpose() * logs.add_scalar(-logs.mean());
    let hg = h * (z / sigma_a2);
    let resid = &s * av - x.column(0);
    let grad = DVector::from_fn(3, |k, _| (1.0 + hg[k]) / av[k]) + s.transpose() * resid / sigma2;
    let moved = project_simplex((av - grad * step).as_slice()).unwrap();
    let residual = (moved.as_vector() - av).norm();
    assert!(residual < 1e-6, "residual {residual}");
}

#[test]
fn generated_cube_has_requested_snr() {
    let endmembers = builtin_endmembers(3).unwrap();
    let grid = Grid::raster(32, 32);
    let prior = PriorSpec::new(3, 0.5, KernelSpec::exponential(4.0)).unwrap();
    for (snr, seed) in [(8.0, 1), (15.0, 2), (30.0, 3)] {
        let out = synth_generate(&endmembers, &grid, &prior, snr, seed).unwrap();
        let clean = endmembers.matrix() * out.truth_image.matrix();
        let measured = empirical_snr_db(&clean, &out.cube.data).unwrap();
        assert!(
            (measured - snr).abs() < 0.1,
            "{snr} dB requested, {measured} measured"
        );
    }
}
