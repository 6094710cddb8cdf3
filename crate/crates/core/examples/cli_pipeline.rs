//! synth, unmix and uq driven through the command-line entry point.

use aitchison_unmix::cli;

const CONFIG: &str = r#"
[paths]
cube = "cube.bin"
truth = "truth.bin"
chain = "chain.bin"
output_dir = "out"

[grid]
width = 6
height = 5

[prior]
p = 3
sigma_a2 = 0.25
kernel = { kind = "exponential", length_scale = 3.0 }

[noise]
snr_db = 15.0

[sampler]
algorithm = "mirror-langevin"
step_size = 1e-3
n_steps = 2000
thinning = 4
seed = 7

[uq]
hdr_pixels = [0]
"#;

fn main() {
    let dir = std::env::temp_dir().join(format!("aitchison_cli_{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let config = dir.join("run.toml");
    std::fs::write(&config, CONFIG).expect("write config");
    for step in ["synth", "unmix", "uq"] {
        let code = cli::run([
            "aitchison-unmix",
            "-v",
            step,
            "--config",
            config.to_str().unwrap(),
        ]);
        println!("{step}: exit {code}");
        if code != 0 {
            std::process::exit(code);
        }
    }
    let summary = std::fs::read_to_string(dir.join("out/uq/summary.json")).expect("summary");
    println!(
        "summary.json: {} bytes, outputs under {}",
        summary.len(),
        dir.display()
    );
}
