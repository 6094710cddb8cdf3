//! File formats, run configuration, synthetic data and plot-ready exports.

mod config;
mod export;
mod raster;
mod synth;
mod tables;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::{
    GridSettings, InitKind, InterpSettings, NoiseSettings, PathSettings, PriorSettings, RunConfig,
    SamplerSettings, SynthSettings, UqSettings,
};
pub use export::{
    barycentric_from_cartesian, export_maps, export_ternary, map_to_pgm, ternary_coordinates,
    MapScale, TernaryExport,
};
pub use raster::{
    AbundanceStackFile, BandOrder, CubeFile, CubeHeader, Dtype, StackHeader, STACK_SUM_TOL,
};
pub use synth::{
    builtin_endmembers, empirical_snr_db, gaussian_bump_endmembers, sigma2_for_snr,
    sigma2_from_observed_snr, synth_generate, synth_observe, SynthOutput, BUILTIN_BANDS,
};
pub use tables::{
    format_float, load_endmembers, load_mask, load_samson_matrix, read_vectors, read_vectors_from,
    write_endmembers, write_mask, write_vectors, write_vectors_to,
};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
