use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{project_simplex_into, Algorithm, Init, PosteriorModel, SampleChain, SamplerConfig};
use crate::error::{Error, Result};
use crate::geometry::{self, SIMPLEX_EPS};
use crate::prior::{gp_prior_sample_latent, LatentMatrix};

fn initial_latent(
    model: &PosteriorModel,
    cfg: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let (d, n) = (model.prior.latent_dim(), model.pixels());
    match &cfg.init {
        Init::PriorDraw => Ok(gp_prior_sample_latent(&model.prior, &model.gram, 1, rng)?
            .pop()
            .expect("one draw")
            .into_matrix()),
        Init::UniformImage => Ok(DMatrix::zeros(d, n)),
        Init::Latent(z) => {
            model.check_latent(z.matrix())?;
            Ok(z.matrix().clone())
        }
    }
}

fn add_noise(target: &mut DMatrix<f64>, scale: f64, rng: &mut ChaCha8Rng) {
    if scale == 0.0 {
        return;
    }
    for x in target.iter_mut() {
        *x += scale * rng.sample::<f64, _>(StandardNormal);
    }
}

fn keep(step: usize, cfg: &SamplerConfig) -> bool {
    step > cfg.burn_in && (step - cfg.burn_in) % cfg.thinning == 0
}

/// Unadjusted Langevin in ilr coordinates:
/// `Z ← Z - γ ∇U(Z) + √(2γ) E`.
///
/// Each retained state is mapped back pixelwise with softmax, so every
/// sample is strictly inside the simplex.
pub fn mirror_langevin(model: &PosteriorModel, cfg: &SamplerConfig) -> Result<SampleChain> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let basis = &model.prior.basis;
    let (width, height) = (model.obs.width, model.obs.height);
    let noise = (2.0 * cfg.step_size).sqrt() * cfg.noise_scale;

    let mut z = initial_latent(model, cfg, &mut rng)?;
    let (mut energy, mut grad) = model.latent_energy_and_gradient(&z);
    if !energy.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            step_size: cfg.step_size,
        });
    }
    let mut energy_trace = Vec::with_capacity(cfg.n_steps + 1);
    energy_trace.push(energy);
    let mut samples = Vec::with_capacity(cfg.retained());
    let mut latent = Vec::with_capacity(cfg.retained());

    for step in 1..=cfg.n_steps {
        z -= &grad * cfg.step_size;
        add_noise(&mut z, noise, &mut rng);
        (energy, grad) = model.latent_energy_and_gradient(&z);
        if !energy.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                step,
                step_size: cfg.step_size,
            });
        }
        energy_trace.push(energy);
        if keep(step, cfg) {
            let zm = LatentMatrix::from_matrix(z.clone());
            samples.push(zm.to_image(basis, width, height));
            latent.push(zm);
        }
    }
    Ok(SampleChain {
        algorithm: Algorithm::MirrorLangevin,
        samples,
        latent,
        energy_trace,
    })
}

/// Euclidean Langevin on the abundances with projection onto the simplex
/// after every step. Projected points are lifted to at least `SIMPLEX_EPS`
/// so the log-ratio prior stays defined.
pub fn projected_ula(model: &PosteriorModel, cfg: &SamplerConfig) -> Result<SampleChain> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let basis = &model.prior.basis;
    let (width, height) = (model.obs.width, model.obs.height);
    let noise = (2.0 * cfg.step_size).sqrt() * cfg.noise_scale;
    let p = model.components();

    let z0 = initial_latent(model, cfg, &mut rng)?;
    let mut a = geometry::ilr_inv_columns(&z0, basis);
    let (_, mut grad) = model.simplex_energy_and_gradient(&a)?;
    let mut energy_trace = Vec::with_capacity(cfg.n_steps + 1);
    energy_trace.push(model.latent_energy_and_gradient(&z0).0);
    let mut samples = Vec::with_capacity(cfg.retained());
    let mut latent = Vec::with_capacity(cfg.retained());
    let mut buf = vec![0.0; p];

    for step in 1..=cfg.n_steps {
        a -= &grad * cfg.step_size;
        add_noise(&mut a, noise, &mut rng);
        for mut col in a.column_iter_mut() {
            project_simplex_into(col.as_slice(), &mut buf).map_err(|_| Error::Divergence {
                step,
                step_size: cfg.step_size,
            })?;
            let mut total = 0.0;
            for (c, &b) in col.iter_mut().zip(&buf) {
                *c = b.max(SIMPLEX_EPS);
                total += *c;
            }
            col.iter_mut().for_each(|c| *c /= total);
        }
        let (_, g) = model.simplex_energy_and_gradient(&a)?;
        grad = g;
        let z = geometry::ilr_columns(&a, basis)?;
        let energy = model.latent_energy_and_gradient(&z).0;
        if !energy.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                step,
                step_size: cfg.step_size,
            });
        }
        energy_trace.push(energy);
        if keep(step, cfg) {
            samples.push(crate::prior::AbundanceImage::from_parts(
                a.clone(),
                width,
                height,
            ));
            latent.push(LatentMatrix::from_matrix(z));
        }
    }
    Ok(SampleChain {
        algorithm: Algorithm::ProjectedUla,
        samples,
        latent,
        energy_trace,
    })
}

/// Run independent chains concurrently, one thread per config.
pub fn run_chains(
    model: &PosteriorModel,
    algorithm: Algorithm,
    configs: &[SamplerConfig],
) -> Vec<Result<SampleChain>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                scope.spawn(move || match algorithm {
                    Algorithm::MirrorLangevin => mirror_langevin(model, cfg),
                    Algorithm::ProjectedUla => projected_ula(model, cfg),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{build_gram, Grid, KernelSpec, PriorSpec};
    use crate::sampler::{EndmemberMatrix, ObservationCube};

    fn one_pixel_model(sigma2: f64) -> PosteriorModel {
        let s = DMatrix::from_row_slice(3, 3, &[0.9, 0.1, 0.2, 0.2, 0.8, 0.1, 0.1, 0.3, 0.7]);
        let truth = DMatrix::from_column_slice(3, 1, &[0.5, 0.3, 0.2]);
        let x = &s * truth;
        let prior = PriorSpec::new(3, 1.0, KernelSpec::dirac()).unwrap();
        let gram = build_gram(&Grid::raster(1, 1), &prior.kernel).unwrap();
        let obs = ObservationCube::new(x, sigma2, 1, 1).unwrap();
        PosteriorModel::new(EndmemberMatrix::unnamed(s).unwrap(), obs, prior, gram).unwrap()
    }

    #[test]
    fn chains_are_bitwise_reproducible() {
        let model = one_pixel_model(0.01);
        let cfg = SamplerConfig::new(1e-3, 200, 9);
        assert_eq!(
            mirror_langevin(&model, &cfg).unwrap(),
            mirror_langevin(&model, &cfg).unwrap()
        );
        assert_eq!(
            projected_ula(&model, &cfg).unwrap(),
            projected_ula(&model, &cfg).unwrap()
        );
    }

    #[test]
    fn noiseless_small_steps_descend() {
        let model = one_pixel_model(0.01);
        let mut cfg = SamplerConfig::new(1e-4, 300, 1);
        cfg.noise_scale = 0.0;
        let chain = mirror_langevin(&model, &cfg).unwrap();
        assert!(chain.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn huge_steps_report_divergence() {
        let model = one_pixel_model(1e-6);
        let mut cfg = SamplerConfig::new(10.0, 500, 0);
        cfg.init = Init::UniformImage;
        match mirror_langevin(&model, &cfg) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn retained_count_matches_config() {
        let model = one_pixel_model(0.01);
        let cfg = SamplerConfig::with_samples(1e-3, 13, 5, 3, 2);
        let chain = mirror_langevin(&model, &cfg).unwrap();
        assert_eq!(chain.len(), 13);
        assert_eq!(chain.energy_trace.len(), cfg.n_steps + 1);
    }

    #[test]
    fn parallel_chains_match_sequential() {
        let model = one_pixel_model(0.01);
        let cfgs: Vec<_> = (0..3).map(|s| SamplerConfig::new(1e-3, 100, s)).collect();
        let par = run_chains(&model, Algorithm::MirrorLangevin, &cfgs);
        for (cfg, chain) in cfgs.iter().zip(par) {
            assert_eq!(chain.unwrap(), mirror_langevin(&model, cfg).unwrap());
        }
    }
}
