//! Fill an abundance map from a handful of observed pixels.

use aitchison_unmix::geometry::SimplexVector;
use aitchison_unmix::interp::{interpolate, PartialObservation};
use aitchison_unmix::prior::{Grid, KernelSpec, PriorSpec};

fn main() -> aitchison_unmix::Result<()> {
    let (w, h) = (9, 5);
    let grid = Grid::raster(w, h);
    let spec = PriorSpec::new(3, 0.5, KernelSpec::exponential(3.0))?;
    let obs = PartialObservation::with_nugget(
        vec![0, w - 1, (h - 1) * w + w / 2],
        vec![
            SimplexVector::new(vec![0.8, 0.1, 0.1])?,
            SimplexVector::new(vec![0.1, 0.8, 0.1])?,
            SimplexVector::new(vec![0.1, 0.1, 0.8])?,
        ],
        1e-4,
    )?;
    let out = interpolate(&obs, &spec, &grid)?;
    println!("dominant material (latent std in brackets):");
    for y in 0..h {
        let row: Vec<String> = (0..w)
            .map(|x| {
                let n = y * w + x;
                let a = out.image.pixel(n);
                let (k, v) = a
                    .as_slice()
                    .iter()
                    .enumerate()
                    .fold(
                        (0, 0.0),
                        |best, (k, &v)| if v > best.1 { (k, v) } else { best },
                    );
                format!("{k}:{v:.2}({:.2})", out.latent_variance[n].sqrt())
            })
            .collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
