//! Spatially correlated abundance images from the GP prior, written as maps.
//!
//! Usage: cargo run --example gp_draw -- [output dir]

use aitchison_unmix::io::export_maps;
use aitchison_unmix::prior::{build_gram, gp_prior_sample, Grid, KernelSpec, PriorSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> aitchison_unmix::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "gp_draw_out".into());
    let grid = Grid::raster(48, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (name, kernel) in [
        ("smooth", KernelSpec::exponential(8.0)),
        ("rough", KernelSpec::exponential(1.0)),
        ("independent", KernelSpec::dirac()),
    ] {
        let spec = PriorSpec::new(3, 0.5, kernel)?;
        let gram = build_gram(&grid, &spec.kernel)?;
        let img = gp_prior_sample(&spec, &gram, &grid, 1, &mut rng)?.remove(0);
        let maps: Vec<(String, Vec<f64>)> = (0..3)
            .map(|k| {
                (
                    format!("a{k}"),
                    img.matrix().row(k).iter().copied().collect(),
                )
            })
            .collect();
        let dir = std::path::Path::new(&out).join(name);
        export_maps(&dir, &maps, grid.width(), grid.height())?;
        println!("{name}: wrote {}", dir.display());
    }
    Ok(())
}
