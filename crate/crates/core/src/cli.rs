//! Command-line entry points.
//!
//! Exit codes: 0 on success, 1 for validation and I/O errors, 2 for numerical
//! failures (divergence, Cholesky breakdown).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::LevelFilter;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, LatentVector, OrthonormalBasis, SimplexVector};
use crate::interp::{interpolate, PartialObservation};
use crate::io::{
    self, builtin_endmembers, load_endmembers, AbundanceStackFile, CubeFile, Dtype, InitKind,
    RunConfig,
};
use crate::prior::{build_gram, gp_prior_sample};
use crate::repro::{self, SpatialSettings, TernarySettings};
use crate::sampler::{
    mirror_langevin, projected_ula, Algorithm, EndmemberMatrix, Init, ObservationCube,
    PosteriorModel,
};
use crate::uq;

#[derive(Debug, Parser)]
#[command(
    name = "aitchison-unmix",
    version,
    about = "Bayesian unmixing on the simplex"
)]
pub struct Cli {
    /// Print failures as one line of JSON on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformOp {
    Ilr,
    Clr,
    Alr,
    /// Inverse ilr: latent rows of length P-1 to simplex rows of length P.
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    MirrorLangevin,
    ProjectedUla,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::MirrorLangevin => Algorithm::MirrorLangevin,
            AlgorithmArg::ProjectedUla => Algorithm::ProjectedUla,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a log-ratio transform to every row of a CSV file.
    Transform {
        #[arg(long, value_enum)]
        op: TransformOp,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Draw abundances from the prior and simulate a noisy cube.
    Synth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write prior draws on the configured grid as an abundance stack.
    SamplePrior {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `prior_samples.bin` in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fill in unobserved pixels of an abundance map.
    Interpolate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample the unmixing posterior of a cube.
    Unmix {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `sampler.algorithm`.
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
    },
    /// Means, variances, maps and HDRs of a stored chain.
    Uq {
        #[arg(long)]
        config: PathBuf,
    },
    /// Scripted experiments.
    Repro {
        #[command(subcommand)]
        experiment: ReproCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReproCommand {
    /// One pixel, three materials, broad prior: sample cloud and HDR.
    Fig2 {
        /// TOML file overriding the scenario settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// 32×32 synthetic scene unmixed with spatial and independent priors.
    SamsonSynthetic {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let wants_json = argv.iter().any(|a| a == "--error-json");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if wants_json {
                report_json("usage", e.to_string().trim().to_string(), 1);
            } else {
                let _ = e.print();
            }
            return 1;
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            if cli.error_json {
                report_json(e.kind(), e.to_string(), code);
            } else {
                eprintln!("error: {e}");
            }
            code
        }
    }
}

fn report_json(kind: &str, message: String, exit_code: i32) {
    let report = ErrorReport {
        error: kind,
        message,
        exit_code,
    };
    eprintln!(
        "{}",
        serde_json::to_string(&report).expect("error report serializes")
    );
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Transform { op, input, output } => transform(*op, input, output.as_deref()),
        Command::Synth { config } => synth(&RunConfig::load(config)?),
        Command::SamplePrior { config, output } => {
            sample_prior(&RunConfig::load(config)?, output.as_deref())
        }
        Command::Interpolate { config } => interpolate_cmd(&RunConfig::load(config)?),
        Command::Unmix { config, algorithm } => {
            unmix(&RunConfig::load(config)?, algorithm.map(Into::into))
        }
        Command::Uq { config } => uq_cmd(&RunConfig::load(config)?),
        Command::Repro { experiment } => match experiment {
            ReproCommand::Fig2 { config, out } => {
                let settings: TernarySettings = load_settings(config.as_deref())?;
                let outcome = repro::run_ternary_scenario(&settings)?;
                outcome.write(out)?;
                log::info!(
                    "HDR at alpha {} has {} component(s)",
                    outcome.hdr.alpha,
                    outcome.hdr.n_components
                );
                Ok(())
            }
            ReproCommand::SamsonSynthetic { config, out } => {
                let settings: SpatialSettings = load_settings(config.as_deref())?;
                repro::run_spatial_comparison(&settings)?.write(out)?;
                Ok(())
            }
        },
    }
}

fn load_settings<T: Default + serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
        }
    }
}

fn transform(op: TransformOp, input: &Path, output: Option<&Path>) -> Result<()> {
    let (header, rows) = io::read_vectors(input)?;
    let width = rows.first().map(Vec::len).unwrap_or(0);
    let p = match op {
        TransformOp::Softmax => width + 1,
        _ => width,
    };
    let basis = OrthonormalBasis::helmert(p)?;
    let out_rows = rows
        .into_iter()
        .map(|row| -> Result<Vec<f64>> {
            Ok(match op {
                TransformOp::Ilr => geometry::ilr(&SimplexVector::new(row)?, &basis)?
                    .as_slice()
                    .to_vec(),
                TransformOp::Clr => geometry::clr(&SimplexVector::new(row)?)?
                    .as_slice()
                    .to_vec(),
                TransformOp::Alr => geometry::alr(&SimplexVector::new(row)?)?
                    .as_slice()
                    .to_vec(),
                TransformOp::Softmax => {
                    geometry::ilr_inv(&LatentVector::new(row)?, &basis)?.into_vec()
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out_header: Option<Vec<String>> = header.map(|h| match op {
        TransformOp::Clr => h.iter().map(|n| format!("clr_{n}")).collect(),
        TransformOp::Ilr => (0..p - 1).map(|d| format!("z{d}")).collect(),
        TransformOp::Alr => h[..p - 1].iter().map(|n| format!("alr_{n}")).collect(),
        TransformOp::Softmax => (0..p).map(|k| format!("a{k}")).collect(),
    });
    match output {
        Some(path) => io::write_vectors(path, out_header.as_deref(), &out_rows),
        None => io::write_vectors_to(std::io::stdout().lock(), out_header.as_deref(), &out_rows),
    }
}

fn endmembers_for(cfg: &RunConfig) -> Result<(EndmemberMatrix, String)> {
    match &cfg.paths.endmembers {
        Some(path) => Ok((load_endmembers(path)?, path.display().to_string())),
        None => Ok((builtin_endmembers(cfg.prior.p)?, "builtin".to_string())),
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".json");
    path.with_file_name(name)
}

#[derive(Serialize)]
struct CubeSidecar {
    endmembers: String,
    endmember_names: Vec<String>,
    bands: usize,
    snr_db: f64,
    empirical_snr_db: Option<f64>,
    sigma2: f64,
    seed: u64,
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let cube_path = cfg.require_path(&cfg.paths.cube, "cube")?;
    let truth_path = cfg.require_path(&cfg.paths.truth, "truth")?;
    let snr_db = cfg
        .noise
        .snr_db
        .ok_or_else(|| Error::Config("synth needs noise.snr_db".into()))?;
    let (endmembers, provenance) = endmembers_for(cfg)?;
    let prior = cfg.prior_spec()?;
    let out = io::synth_generate(&endmembers, &cfg.grid(), &prior, snr_db, cfg.synth.seed)?;
    out.cube.write(cube_path)?;
    out.truth.write(truth_path)?;
    let clean = endmembers.matrix() * out.truth_image.matrix();
    let empirical = (out.sigma2 > 0.0)
        .then(|| io::empirical_snr_db(&clean, &out.cube.data))
        .transpose()?;
    io::write_json(
        &sidecar_path(cube_path),
        &CubeSidecar {
            endmembers: provenance,
            endmember_names: endmembers.names().to_vec(),
            bands: endmembers.bands(),
            snr_db,
            empirical_snr_db: empirical,
            sigma2: out.sigma2,
            seed: cfg.synth.seed,
        },
    )
}

fn sample_prior(cfg: &RunConfig, output: Option<&Path>) -> Result<()> {
    let prior = cfg.prior_spec()?;
    let grid = cfg.grid();
    let gram = build_gram(&grid, &prior.kernel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.synth.seed);
    let draws = gp_prior_sample(&prior, &gram, &grid, cfg.synth.count, &mut rng)?;
    let path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir().join("prior_samples.bin"));
    AbundanceStackFile::from_images(&draws, Dtype::Float64)?.write(&path)
}

fn interpolate_cmd(cfg: &RunConfig) -> Result<()> {
    let stack = AbundanceStackFile::read(cfg.require_path(&cfg.paths.abundances, "abundances")?)?;
    let mask = io::load_mask(cfg.require_path(&cfg.paths.mask, "mask")?)?;
    let grid = cfg.grid();
    let (w, h) = (stack.header.width, stack.header.height);
    if w * h != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "abundance map pixels",
            expected: grid.len(),
            found: w * h,
        });
    }
    let image = stack
        .images()?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Format("abundance stack has no frames".into()))?;
    if let Some(&bad) = mask.iter().find(|&&i| i >= grid.len()) {
        return Err(Error::InvalidInput(format!(
            "mask index {bad} outside a grid of {} pixels",
            grid.len()
        )));
    }
    let values = mask.iter().map(|&i| image.pixel(i)).collect();
    let obs = PartialObservation::with_nugget(mask, values, cfg.interp.nugget)?;
    let result = interpolate(&obs, &cfg.prior_spec()?, &grid)?;
    let dir = cfg.output_dir();
    AbundanceStackFile::from_images(std::slice::from_ref(&result.image), Dtype::Float64)?
        .write(&dir.join("interpolated.bin"))?;
    io::export_maps(
        &dir.join("interp_maps"),
        &[("latent_variance".into(), result.latent_variance.clone())],
        grid.width(),
        grid.height(),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct ChainSidecar<'a> {
    algorithm: Algorithm,
    endmembers: String,
    sigma2: f64,
    step_size: f64,
    n_steps: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
    retained: usize,
    config: &'a RunConfig,
    energy_trace: &'a [f64],
}

fn unmix(cfg: &RunConfig, algorithm: Option<Algorithm>) -> Result<()> {
    let cube = CubeFile::read(cfg.require_path(&cfg.paths.cube, "cube")?)?;
    let chain_path = cfg.require_path(&cfg.paths.chain, "chain")?;
    let (w, h) = (cube.header.width, cube.header.height);
    if (w, h) != (cfg.grid.width, cfg.grid.height) {
        return Err(Error::Config(format!(
            "cube is {w}x{h} but the configured grid is {}x{}",
            cfg.grid.width, cfg.grid.height
        )));
    }
    let sigma2 = match (cfg.noise.sigma2, cfg.noise.snr_db) {
        (Some(s2), _) => s2,
        (None, Some(snr)) => io::sigma2_from_observed_snr(&cube.data, snr)?,
        (None, None) => {
            return Err(Error::Config(
                "unmix needs noise.sigma2 or noise.snr_db".into(),
            ))
        }
    };
    if !(sigma2 > 0.0) {
        return Err(Error::Config(
            "unmix needs a finite SNR; an infinite one implies zero noise".into(),
        ));
    }
    let (endmembers, provenance) = endmembers_for(cfg)?;
    let prior = cfg.prior_spec()?;
    let grid = cfg.grid();
    let gram = build_gram(&grid, &prior.kernel)?;
    let obs = ObservationCube::new(cube.data, sigma2, w, h)?;
    let model = PosteriorModel::new(endmembers, obs, prior, gram)?;
    let init = match cfg.sampler.init {
        InitKind::PriorDraw => Init::PriorDraw,
        InitKind::UniformImage => Init::UniformImage,
        InitKind::FromFile => {
            let stack = AbundanceStackFile::read(cfg.require_path(&cfg.paths.init, "init")?)?;
            let first = stack
                .images()?
                .into_iter()
                .next()
                .ok_or_else(|| Error::Format("init stack has no frames".into()))?;
            Init::Latent(first.latent(&model.prior.basis)?)
        }
    };
    let sampler = cfg.sampler.to_config(init);
    let algorithm = algorithm.unwrap_or(cfg.sampler.algorithm);
    let chain = match algorithm {
        Algorithm::MirrorLangevin => mirror_langevin(&model, &sampler)?,
        Algorithm::ProjectedUla => projected_ula(&model, &sampler)?,
    };
    AbundanceStackFile::from_images(&chain.samples, Dtype::Float64)?.write(chain_path)?;
    io::write_json(
        &sidecar_path(chain_path),
        &ChainSidecar {
            algorithm,
            endmembers: provenance,
            sigma2,
            step_size: sampler.step_size,
            n_steps: sampler.n_steps,
            burn_in: sampler.burn_in,
            thinning: sampler.thinning,
            seed: sampler.seed,
            retained: chain.len(),
            config: cfg,
            energy_trace: &chain.energy_trace,
        },
    )
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    width: usize,
    height: usize,
    samples: usize,
    pixels: &'a [uq::UqSummary],
}

#[derive(Serialize)]
struct HdrFile<'a> {
    pixel: usize,
    alpha: f64,
    estimator: &'a uq::DensityEstimator,
    threshold: f64,
    n_components: usize,
    component_mass: &'a [f64],
    in_sample_coverage: f64,
}

fn uq_cmd(cfg: &RunConfig) -> Result<()> {
    let stack = AbundanceStackFile::read(cfg.require_path(&cfg.paths.chain, "chain")?)?;
    let images = stack.images()?;
    let p = stack.header.components;
    if p != cfg.prior.p {
        return Err(Error::DimensionMismatch {
            what: "materials",
            expected: cfg.prior.p,
            found: p,
        });
    }
    let basis = OrthonormalBasis::helmert(p)?;
    let summary = uq::summarize_images(&images, &basis)?;
    let dir = cfg.output_dir().join("uq");
    io::write_json(
        &dir.join("summary.json"),
        &SummaryFile {
            width: summary.width,
            height: summary.height,
            samples: images.len(),
            pixels: &summary.pixels,
        },
    )?;
    io::export_maps(
        &dir.join("maps"),
        &summary.named_maps(),
        summary.width,
        summary.height,
    )?;
    let estimator = cfg.uq.estimator_for(p, images.len());
    for &n in &cfg.uq.hdr_pixels {
        if n >= summary.pixels.len() {
            return Err(Error::InvalidInput(format!(
                "HDR pixel {n} outside a chain of {} pixels",
                summary.pixels.len()
            )));
        }
        let samples: Vec<SimplexVector> = images.iter().map(|img| img.pixel(n)).collect();
        let region = uq::hdr(&samples, cfg.uq.alpha, &estimator)?;
        let gm = SimplexVector::new(summary.pixels[n].geodesic_mean.clone())?;
        let em = SimplexVector::closed(summary.pixels[n].euclidean_mean.clone())?;
        io::export_ternary(&samples, &gm, &em, Some(&region), true)?
            .write(&dir, &format!("pixel_{n}"))?;
        io::write_json(
            &dir.join(format!("pixel_{n}_hdr.json")),
            &HdrFile {
                pixel: n,
                alpha: region.alpha,
                estimator: &region.estimator,
                threshold: region.threshold,
                n_components: region.n_components,
                component_mass: &region.component_mass,
                in_sample_coverage: region.in_sample_coverage(),
            },
        )?;
    }
    Ok(())
}
