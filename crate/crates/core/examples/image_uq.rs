//! Spatial versus independent priors on a small synthetic scene: std maps,
//! their total variation, and how uncertainty differs in pure and mixed
//! areas.
//!
//! Usage: cargo run --release --example image_uq -- [output dir]

use aitchison_unmix::repro::{run_spatial_comparison, SpatialSettings};

fn main() -> aitchison_unmix::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "image_uq_out".into());
    let settings = SpatialSettings {
        width: 16,
        height: 16,
        length_scale: 5.0,
        samples: 300,
        burn_in: 1000,
        ..SpatialSettings::default()
    };
    let outcome = run_spatial_comparison(&settings)?;
    for run in [&outcome.spatial, &outcome.dirac] {
        println!(
            "{:>8}: std-map TV geodesic {:.2}, Euclidean {:.2}; geodesic std pure {:.3} mixed {:.3}; \
             Euclidean std pure {:.4} mixed {:.4}",
            run.name,
            run.geodesic_std_tv,
            run.euclidean_std_tv,
            run.pure_geodesic_std,
            run.mixed_geodesic_std,
            run.pure_euclidean_std,
            run.mixed_euclidean_std
        );
    }
    outcome.write(std::path::Path::new(&out))?;
    println!("maps in {out}");
    Ok(())
}
