//! Writing and reading cubes, abundance stacks and endmember tables.

use aitchison_unmix::io::{
    builtin_endmembers, load_endmembers, synth_generate, write_endmembers, AbundanceStackFile,
    CubeFile,
};
use aitchison_unmix::prior::{Grid, KernelSpec, PriorSpec};

fn main() -> aitchison_unmix::Result<()> {
    let dir = std::env::temp_dir().join(format!("aitchison_formats_{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let endmembers = builtin_endmembers(3)?;
    let prior = PriorSpec::new(3, 0.5, KernelSpec::exponential(2.0))?;
    let out = synth_generate(&endmembers, &Grid::raster(8, 6), &prior, 20.0, 1)?;

    let cube_path = dir.join("cube.bin");
    out.cube.write(&cube_path)?;
    let cube = CubeFile::read(&cube_path)?;
    println!("cube header: {}", serde_json::to_string(&cube.header)?);

    let stack_path = dir.join("truth.bin");
    out.truth.write(&stack_path)?;
    let stack = AbundanceStackFile::read(&stack_path)?;
    println!("stack header: {}", serde_json::to_string(&stack.header)?);

    let csv = dir.join("endmembers.csv");
    write_endmembers(&csv, &endmembers)?;
    let back = load_endmembers(&csv)?;
    println!(
        "endmembers {:?}: {} bands, identical after reload: {}",
        back.names(),
        back.bands(),
        back.matrix() == endmembers.matrix()
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
