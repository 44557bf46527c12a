use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use beamsketch::analysis::{self, PairSpectrumOptions};
use beamsketch::forward::{build_operator, simulate, MeasurementSet};
use beamsketch::geometry::{make_scene, RangeProfile, SceneKind, SceneSupport};
use beamsketch::harness::{self, ExperimentConfig, OutputFormats, Scale, Scenario};
use beamsketch::io::{self, Precision};
use beamsketch::sketch;
use beamsketch::solve::SvdSolver;
use beamsketch::{Error, Result};

#[derive(Parser)]
#[command(
    name = "beamsketch",
    version,
    about = "Broadband array imaging with randomized aperture codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in desk-scale configuration, by scenario name.
    #[arg(long)]
    preset: Option<Scenario>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured scale; `full` lifts the desk element limit.
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Pgm,
    Both,
}

impl Format {
    fn formats(self) -> OutputFormats {
        OutputFormats {
            csv: matches!(self, Format::Csv | Format::Both),
            pgm: matches!(self, Format::Pgm | Format::Both),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    /// Innovation-rank condition `l >= d_0`.
    Thm1,
    /// Real-eigenvalue condition on the first two wavelength blocks.
    Thm2,
    /// Generic-basis condition, sampled over `--trials` bases.
    Thm3,
    /// Rank increments across wavelengths.
    Nested,
}

#[derive(Subcommand)]
enum Command {
    /// Build the stacked forward operator and write it in binary form.
    BuildOperator {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Store entries as single-precision complex numbers.
        #[arg(long)]
        single: bool,
    },
    /// Simulate measurements of the configured scene.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct from a stored operator and measurement set.
    Reconstruct {
        #[arg(long)]
        operator: PathBuf,
        #[arg(long)]
        measurements: PathBuf,
        /// Gaussian codes per wavelength; omit for full least squares.
        #[arg(long)]
        codes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tikhonov regularization.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Image shape as rows,cols for the PGM output.
        #[arg(long, value_delimiter = ',')]
        shape: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        format: Format,
    },
    /// Singular spectrum and nestedness profile of the configured operator.
    Spectrum {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Relative threshold for the rank counts.
        #[arg(long, default_value_t = harness::EFFECTIVE_RANK_EPS)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Numerical checks of the sketching conditions on the configured operator blocks.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Codes per wavelength.
        #[arg(long)]
        codes: Option<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = analysis::DEFAULT_EPS)]
        eps: f64,
        /// Writes the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configured experiment sweep.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        format: Format,
    },
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(s)) => ExperimentConfig::preset(s),
        (None, None) => return Err(Error::Config("pass --config or --preset".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match args.scale {
        Some(ScaleArg::Full) => cfg.scale = Scale::Full,
        Some(ScaleArg::Desk) => cfg.scale = Scale::Desk,
        None => {}
    }
    cfg.validate()?;
    if cfg.scale == Scale::Full {
        log::warn!("full-scale configuration: expect long runtimes and large memory use");
    }
    Ok(cfg)
}

fn operator_for(cfg: &ExperimentConfig) -> Result<beamsketch::forward::ForwardOperator> {
    let exc = cfg.excitation_spec()?;
    let geom = cfg.geometry(&exc)?;
    let support = SceneSupport::new(
        SceneKind::DeltaConstantRange,
        cfg.grid()?,
        RangeProfile::Constant(cfg.scene.range_m),
    )?;
    build_operator(&geom, &exc, &support)
}

fn write_json_or_print<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => io::write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildOperator { cfg, out, single } => {
            let cfg = load(&cfg)?;
            let op = operator_for(&cfg)?;
            let precision = if single {
                Precision::Complex64
            } else {
                Precision::Complex128
            };
            io::write_operator(&out, &op, precision)?;
            println!(
                "{} x {} operator ({} elements, {} wavelengths) -> {}",
                op.rows(),
                op.cols(),
                op.elements(),
                op.blocks(),
                out.display()
            );
        }
        Command::Simulate { cfg, out } => {
            let cfg = load(&cfg)?;
            let exc = cfg.excitation_spec()?;
            let geom = cfg.geometry(&exc)?;
            let support = SceneSupport::new(
                SceneKind::DeltaConstantRange,
                cfg.grid()?,
                RangeProfile::Constant(cfg.scene.range_m),
            )?;
            let op = build_operator(&geom, &exc, &support)?;
            let scene = make_scene(
                support.kind,
                support.grid.clone(),
                support.range.clone(),
                &cfg.scene.source,
            )?;
            let data = simulate(&op, &scene, cfg.noise, cfg.seed)?;
            std::fs::create_dir_all(&out)?;
            io::write_operator(&out.join("operator.bin"), &op, Precision::Complex128)?;
            io::write_json(&out.join("measurements.json"), &data)?;
            io::write_real_csv(&out.join("truth.csv"), "reflectivity", &scene.reflectivity)?;
            println!("{} measurements -> {}", data.y.len(), out.display());
        }
        Command::Reconstruct {
            operator,
            measurements,
            codes,
            seed,
            delta,
            shape,
            out,
            format,
        } => {
            let (op, _) = io::read_operator(&operator)?;
            let data: MeasurementSet = io::read_json(&measurements)?;
            let x = match codes {
                Some(l) => {
                    let s = sketch::gaussian_code(l, op.elements(), op.blocks(), seed)?;
                    beamsketch::solve::sketched_least_squares(&s, op.matrix(), &data.y, delta)?.x
                }
                None => SvdSolver::new(op.matrix(), beamsketch::solve::DEFAULT_RANK_EPS)?
                    .solve(&data.y, delta)?,
            };
            let re: Vec<f64> = x.iter().map(|z| z.re).collect();
            std::fs::create_dir_all(&out)?;
            let formats = format.formats();
            if formats.csv {
                io::write_real_csv(&out.join("x.csv"), "reflectivity", &re)?;
            }
            if formats.pgm {
                let (r, c) = match shape.as_deref() {
                    Some([r, c]) => (*r, *c),
                    _ => (1, re.len()),
                };
                io::write_pgm(&out.join("x.pgm"), &re, r, c)?;
            }
            println!("{} pixels -> {}", re.len(), out.display());
        }
        Command::Spectrum { cfg, eps, out } => {
            let cfg = load(&cfg)?;
            let op = operator_for(&cfg)?;
            let spectrum = analysis::singular_spectrum(op.matrix())?;
            let prof = analysis::nestedness_profile(&op.block_refs(), eps)?;
            std::fs::create_dir_all(&out)?;
            io::write_real_csv(&out.join("spectrum.csv"), "singular_value", &spectrum)?;
            io::write_json(&out.join("nestedness.json"), &prof)?;
            println!(
                "stacked rank {} (lambda_min block {}) at eps {eps:e}; increments {:?}",
                prof.stacked_rank(),
                prof.block_ranks.last().copied().unwrap_or(0),
                prof.increments
            );
        }
        Command::Check {
            kind,
            cfg,
            codes,
            trials,
            eps,
            out,
        } => {
            let cfg = load(&cfg)?;
            let op = operator_for(&cfg)?;
            let blocks = op.block_refs();
            let need_codes = || codes.ok_or_else(|| Error::Config("--codes is required".into()));
            match kind {
                CheckKind::Thm1 => {
                    let r = analysis::check_innovation(&blocks, need_codes()?, cfg.seed, eps)?;
                    write_json_or_print(out.as_deref(), &r)?;
                }
                CheckKind::Thm2 => {
                    if blocks.len() < 2 {
                        return Err(Error::Config("need at least two wavelengths".into()));
                    }
                    let r = analysis::check_pair_spectrum(
                        blocks[0],
                        blocks[1],
                        &PairSpectrumOptions::default(),
                    )?;
                    write_json_or_print(out.as_deref(), &r)?;
                }
                CheckKind::Thm3 => {
                    let r = analysis::check_generic_basis(
                        &blocks,
                        need_codes()?,
                        trials,
                        cfg.seed,
                        eps,
                    )?;
                    write_json_or_print(out.as_deref(), &r)?;
                }
                CheckKind::Nested => {
                    let r = analysis::nestedness_profile(&blocks, eps)?;
                    write_json_or_print(out.as_deref(), &r)?;
                }
            }
        }
        Command::Experiment { cfg, out, format } => {
            let cfg = load(&cfg)?;
            let bundle = harness::run_experiment_with(&cfg, Some(&out), format.formats())?;
            println!(
                "{} ({:?}), seed {}, config {}",
                cfg.name, cfg.scenario, bundle.seed, bundle.config_hash
            );
            for (k, v) in &bundle.reference {
                println!("  reference {k} = {v:e}");
            }
            for p in &bundle.points {
                match &p.error {
                    Some(e) => println!("  {}: failed: {e}", p.label),
                    None => {
                        let metrics: Vec<String> = p
                            .metrics
                            .iter()
                            .map(|(k, v)| format!("{k}={v:.3e}"))
                            .collect();
                        println!("  {}: {}", p.label, metrics.join(" "));
                    }
                }
            }
            println!("outputs in {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
