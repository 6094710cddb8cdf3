use std::path::Path;
use std::process::{Command, Output};

use aitchison_unmix::io::{read_vectors, AbundanceStackFile};

const BIN: &str = env!("CARGO_BIN_EXE_aitchison-unmix");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

const PIPELINE: &str = r#"
[paths]
cube = "cube.bin"
truth = "truth.bin"
chain = "chain.bin"
output_dir = "out"

[grid]
width = 5
height = 4

[prior]
p = 3
sigma_a2 = 0.25
kernel = { kind = "exponential", length_scale = 2.0 }

[noise]
snr_db = 15.0

[sampler]
algorithm = "mirror-langevin"
step_size = 1e-3
n_steps = 600
thinning = 2
seed = 11

[uq]
alpha = 0.1
hdr_pixels = [3]

[synth]
seed = 4
"#;

#[test]
fn ilr_of_uniform_rows_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("in.csv"), "a,b,c,d\n0.25,0.25,0.25,0.25\n").unwrap();
    let out = run(
        dir.path(),
        &[
            "transform",
            "--op",
            "ilr",
            "--input",
            "in.csv",
            "--output",
            "z.csv",
        ],
    );
    assert!(out.status.success());
    let (header, rows) = read_vectors(&dir.path().join("z.csv")).unwrap();
    assert_eq!(header.unwrap(), ["z0", "z1", "z2"]);
    assert_eq!(rows, vec![vec![0.0, 0.0, 0.0]]);
}

#[test]
fn softmax_inverts_ilr_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("in.csv"), "0.7,0.2,0.1\n").unwrap();
    assert!(run(
        dir.path(),
        &[
            "transform",
            "--op",
            "ilr",
            "--input",
            "in.csv",
            "--output",
            "z.csv"
        ]
    )
    .status
    .success());
    let out = run(
        dir.path(),
        &["transform", "--op", "softmax", "--input", "z.csv"],
    );
    assert!(out.status.success());
    let (_, rows) = aitchison_unmix::io::read_vectors_from(&out.stdout[..]).unwrap();
    for (x, y) in rows[0].iter().zip([0.7, 0.2, 0.1]) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn synth_unmix_uq_pipeline_keeps_sums_at_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), PIPELINE).unwrap();
    for cmd in ["synth", "unmix", "uq"] {
        let out = run(dir.path(), &[cmd, "--config", "run.toml"]);
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let chain = AbundanceStackFile::read(&dir.path().join("chain.bin")).unwrap();
    assert_eq!(chain.header.frames, (600 - 120) / 2);
    for frame in &chain.frames {
        for col in frame.column_iter() {
            assert!((col.sum() - 1.0).abs() < 1e-12);
            assert!(col.iter().all(|&x| x > 0.0));
        }
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/uq/summary.json")).unwrap())
            .unwrap();
    let pixels = summary["pixels"].as_array().unwrap();
    assert_eq!(pixels.len(), 20);
    for px in pixels {
        for key in ["geodesic_mean", "euclidean_mean"] {
            let sum: f64 = px[key]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
    assert!(dir.path().join("out/uq/maps/geodesic_std.pgm").exists());
    assert!(dir.path().join("out/uq/pixel_3_hdr.json").exists());
    let sidecar: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("cube.bin.json")).unwrap()).unwrap();
    assert!((sidecar["empirical_snr_db"].as_f64().unwrap() - 15.0).abs() < 1.0);
}

#[test]
fn unmix_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), PIPELINE).unwrap();
    assert!(run(dir.path(), &["synth", "--config", "run.toml"])
        .status
        .success());
    assert!(run(dir.path(), &["unmix", "--config", "run.toml"])
        .status
        .success());
    let first = std::fs::read(dir.path().join("chain.bin")).unwrap();
    assert!(run(dir.path(), &["unmix", "--config", "run.toml"])
        .status
        .success());
    assert_eq!(std::fs::read(dir.path().join("chain.bin")).unwrap(), first);

    assert!(run(
        dir.path(),
        &[
            "unmix",
            "--config",
            "run.toml",
            "--algorithm",
            "projected-ula"
        ]
    )
    .status
    .success());
    assert_ne!(std::fs::read(dir.path().join("chain.bin")).unwrap(), first);
}

#[test]
fn sample_prior_and_interpolate() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), PIPELINE).unwrap();
    assert!(run(dir.path(), &["synth", "--config", "run.toml"])
        .status
        .success());
    std::fs::write(dir.path().join("mask.csv"), "index\n0\n7\n19\n").unwrap();
    let cfg = PIPELINE.replace(
        "output_dir = \"out\"",
        "output_dir = \"out\"\nabundances = \"truth.bin\"\nmask = \"mask.csv\"",
    );
    std::fs::write(dir.path().join("interp.toml"), cfg).unwrap();
    let out = run(dir.path(), &["interpolate", "--config", "interp.toml"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let truth = AbundanceStackFile::read(&dir.path().join("truth.bin")).unwrap();
    let filled = AbundanceStackFile::read(&dir.path().join("out/interpolated.bin")).unwrap();
    for n in [0, 7, 19] {
        for k in 0..3 {
            assert!((filled.frames[0][(k, n)] - truth.frames[0][(k, n)]).abs() < 1e-8);
        }
    }

    let out = run(
        dir.path(),
        &[
            "sample-prior",
            "--config",
            "run.toml",
            "--output",
            "draws.bin",
        ],
    );
    assert!(out.status.success());
    let draws = AbundanceStackFile::read(&dir.path().join("draws.bin")).unwrap();
    assert_eq!((draws.header.width, draws.header.height), (5, 4));
}

#[test]
fn errors_report_kind_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["--error-json", "unmix", "--config", "missing.toml"],
    );
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_slice(String::from_utf8_lossy(&out.stderr).trim().as_bytes()).unwrap();
    assert_eq!(report["exit_code"], 1);
    assert!(report["error"].is_string());

    let out = run(
        dir.path(),
        &["transform", "--op", "nope", "--input", "x.csv"],
    );
    assert_eq!(out.status.code(), Some(1));

    // A step far too large for the likelihood diverges: numerical failure.
    std::fs::write(dir.path().join("run.toml"), PIPELINE).unwrap();
    assert!(run(dir.path(), &["synth", "--config", "run.toml"])
        .status
        .success());
    let wild = PIPELINE.replace("step_size = 1e-3", "step_size = 50.0");
    std::fs::write(dir.path().join("wild.toml"), wild).unwrap();
    let out = run(
        dir.path(),
        &["--error-json", "unmix", "--config", "wild.toml"],
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(String::from_utf8_lossy(&out.stderr).trim().as_bytes()).unwrap();
    assert_eq!(report["exit_code"], 2);
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["repro", "--help"]).status.code(), Some(0));
}
