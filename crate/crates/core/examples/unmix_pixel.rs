//! Posterior sampling for one pixel with both samplers.

use aitchison_unmix::geometry::SimplexVector;
use aitchison_unmix::io::{builtin_endmembers, synth_observe};
use aitchison_unmix::prior::{build_gram, AbundanceImage, Grid, KernelSpec, PriorSpec};
use aitchison_unmix::sampler::{
    mirror_langevin, projected_ula, Init, ObservationCube, PosteriorModel, SamplerConfig,
};
use aitchison_unmix::uq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> aitchison_unmix::Result<()> {
    let endmembers = builtin_endmembers(3)?;
    let truth = AbundanceImage::from_pixels(&[SimplexVector::new(vec![0.5, 0.3, 0.2])?], 1, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let obs = synth_observe(&endmembers, &truth, 25.0, &mut rng)?;
    println!("noise variance for 25 dB: {:.3e}", obs.sigma2);

    let prior = PriorSpec::new(3, 1.0, KernelSpec::dirac())?;
    let gram = build_gram(&Grid::raster(1, 1), &prior.kernel)?;
    let basis = prior.basis.clone();
    let model = PosteriorModel::new(
        endmembers,
        ObservationCube::new(obs.cube.data, obs.sigma2, 1, 1)?,
        prior,
        gram,
    )?;

    for (name, step) in [("mirror-langevin", 1e-3), ("projected-ula", 2e-5)] {
        let mut cfg = SamplerConfig::with_samples(step, 4000, 5000, 10, 1);
        cfg.init = Init::UniformImage;
        let chain = if name == "mirror-langevin" {
            mirror_langevin(&model, &cfg)?
        } else {
            projected_ula(&model, &cfg)?
        };
        let draws = chain.pixel_samples(0);
        println!(
            "{name:>16}: geodesic mean {:.3?}, Euclidean mean {:.3?}, geodesic variance {:.4}",
            uq::geodesic_mean(&draws, &basis)?.as_slice(),
            uq::euclidean_mean(&draws)?.as_slice(),
            uq::geodesic_total_variance(&draws, &basis)?
        );
    }
    Ok(())
}
