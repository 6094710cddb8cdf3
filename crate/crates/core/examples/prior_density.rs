//! The pushforward pixel prior for a narrow and a broad latent variance.
//!
//! A narrow prior peaks at the uniform composition; a broad one piles its
//! mass next to the vertices.

use aitchison_unmix::geometry::SimplexVector;
use aitchison_unmix::prior::{pixel_prior_logpdf, pixel_prior_sample, KernelSpec, PriorSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> aitchison_unmix::Result<()> {
    let bins = 30;
    for sigma_a2 in [0.25, 5.0] {
        let spec = PriorSpec::new(3, sigma_a2, KernelSpec::dirac())?;
        let mut best = (f64::NEG_INFINITY, vec![]);
        for i in 1..bins {
            for j in 1..bins - i {
                let a = vec![
                    i as f64 / bins as f64,
                    j as f64 / bins as f64,
                    (bins - i - j) as f64 / bins as f64,
                ];
                let lp = pixel_prior_logpdf(&SimplexVector::new(a.clone())?, &spec)?;
                if lp > best.0 {
                    best = (lp, a);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = pixel_prior_sample(&spec, 5000, &mut rng)?;
        let near_vertex = draws
            .iter()
            .filter(|a| a.as_slice().iter().any(|&x| x > 0.9))
            .count();
        println!(
            "σ_a² = {sigma_a2}: grid mode {:.3?}, {:.1}% of draws have a component above 0.9",
            best.1,
            100.0 * near_vertex as f64 / draws.len() as f64
        );
    }
    Ok(())
}
