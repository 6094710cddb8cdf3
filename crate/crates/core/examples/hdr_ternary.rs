//! A broad prior, a nearly pure ground truth and low SNR give a multimodal
//! posterior. Writes the ternary sample cloud, both means and the HDR.
//!
//! Usage: cargo run --release --example hdr_ternary -- [output dir]

use aitchison_unmix::repro::{run_ternary_scenario, TernarySettings};

fn main() -> aitchison_unmix::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "hdr_ternary_out".into());
    let settings = TernarySettings::default();
    let outcome = run_ternary_scenario(&settings)?;
    println!("truth           {:?}", settings.truth);
    println!("geodesic mean   {:.3?}", outcome.geodesic_mean.as_slice());
    println!("Euclidean mean  {:.3?}", outcome.euclidean_mean.as_slice());
    println!(
        "HDR at α = {}: {} component(s), masses {:.3?}",
        outcome.hdr.alpha, outcome.hdr.n_components, outcome.hdr.component_mass
    );
    for path in outcome.write(std::path::Path::new(&out))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
