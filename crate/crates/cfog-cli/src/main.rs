//! `cfog` command line: register multimodal image pairs, inspect
//! similarity maps, and run the synthetic evaluation suites.
//!
//! Exit codes are a stable contract: 0 success, 1 usage/I-O/parameter
//! error, 2 outlier rejection failed to converge.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfog::config::RunConfig;
use cfog::control_point::{read_cp_csv, write_cp_csv};
use cfog::error::CfogError;
use cfog::evaluation::{
    self, extraction_seconds, noise_csv, param_study_csv, precision_csv, run_noise_sweep,
    run_param_study, run_precision_sweep, summary_text, EvalParams,
};
use cfog::image::Image;
use cfog::io::{load_image, save_image, world_file_path, write_world_file, RasterFormat};
use cfog::pipeline::{self, rejection_report_text};
use cfog::registration::write_model_file;
use cfog::similarity::{
    mi_match_at, ncc_match_at, ssd_match_fft_at, MatchConfig, Measure, SimilarityMap,
};
use cfog::synth::Scene;

#[derive(Parser)]
#[command(
    name = "cfog",
    about = "Multimodal image registration via pixel-wise structural descriptors",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Configuration file (key = value sections); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config entry, e.g. --set match.measure=ncc (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Similarity measure (shorthand for --set match.measure=...).
    #[arg(long)]
    measure: Option<String>,
    /// Template side in pixels (odd).
    #[arg(long)]
    template_size: Option<usize>,
    /// Peak-offset search radius in pixels.
    #[arg(long)]
    search_radius: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores). Results are identical at any setting.
    #[arg(long)]
    jobs: Option<usize>,
    /// Validate the configuration, print the resolved parameters and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: detect, match, reject outliers, triangulate, rectify.
    Register {
        #[command(flatten)]
        common: CommonOpts,
        /// Reference raster (pgm or png; world file picked up if present).
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Sensed raster.
        #[arg(long = "sen")]
        sensed: PathBuf,
        /// After rectifying, bootstrap check points between the reference
        /// and the rectified raster and report the residual check RMSE.
        #[arg(long)]
        check: bool,
    },
    /// Detection and matching only; writes the control-point CSV.
    Match {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "sen")]
        sensed: PathBuf,
    },
    /// Fit, reject outliers and rectify from an existing control-point CSV.
    Rectify {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "sen")]
        sensed: PathBuf,
        /// Control points produced by `match` or `register`.
        #[arg(long)]
        cps: PathBuf,
    },
    /// Similarity maps of one point for the requested measures.
    Simmap {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "sen")]
        sensed: PathBuf,
        /// Reference-image pixel column.
        #[arg(long)]
        x: usize,
        /// Reference-image pixel row.
        #[arg(long)]
        y: usize,
        /// Comma-separated measures (default: all six).
        #[arg(long)]
        measures: Option<String>,
    },
    /// Synthetic evaluation suites (precision, noise and parameter sweeps).
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// `quick` or `paper`.
        #[arg(long, default_value = "quick")]
        suite: String,
        /// Suite seed (shorthand for --set run.seed=...).
        #[arg(long)]
        seed: Option<u64>,
        /// Also time descriptor extraction on a 512x512 scene.
        #[arg(long)]
        timings: bool,
        /// Dump per-measure similarity heatmaps of the first suite pair.
        #[arg(long)]
        heatmaps: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_config(common: &CommonOpts) -> Result<RunConfig, CfogError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CfogError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for spec in &common.overrides {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CfogError::Config(format!("--set expects KEY=VALUE, got {spec:?}")))?;
        cfg.set(key.trim(), value.trim())
            .map_err(CfogError::Config)?;
    }
    if let Some(m) = &common.measure {
        cfg.set("match.measure", m).map_err(CfogError::Config)?;
    }
    if let Some(t) = common.template_size {
        cfg.set("match.template_size", &t.to_string())
            .map_err(CfogError::Config)?;
    }
    if let Some(r) = common.search_radius {
        cfg.set("match.search_radius", &r.to_string())
            .map_err(CfogError::Config)?;
    }
    if let Some(dir) = &common.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `f` inside a bounded thread pool when --jobs limits workers.
/// Worker count never changes outputs, only wall-clock time.
fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    pool.install(f)
}

fn run(cli: Cli) -> Result<ExitCode, CfogError> {
    match cli.command {
        Command::Register {
            common,
            reference,
            sensed,
            check,
        } => {
            let cfg = load_config(&common)?;
            if common.dry_run {
                print!("{}", cfg.resolved_text());
                return Ok(ExitCode::SUCCESS);
            }
            let (ref_img, _) = load_image(&reference)?;
            let (sen_img, sen_fmt) = load_image(&sensed)?;
            let art = with_jobs(cfg.jobs, || {
                pipeline::register_images(&ref_img, &sen_img, &cfg)
            })?;
            std::fs::create_dir_all(&cfg.output_dir)
                .map_err(|e| CfogError::Io { path: cfg.output_dir.clone(), message: e.to_string() })?;

            write_cp_csv(&cfg.output_dir.join("cps.csv"), &art.matched)?;
            write_cp_csv(
                &cfg.output_dir.join("cps_surviving.csv"),
                &art.rejection.survivors,
            )?;
            std::fs::write(
                cfg.output_dir.join("rejection.txt"),
                rejection_report_text(&art.rejection),
            )
            .map_err(|e| CfogError::Io { path: cfg.output_dir.clone(), message: e.to_string() })?;

            let out_raster = cfg.output_dir.join(registered_name(&sensed, sen_fmt));
            if let Some(rect) = &art.rectified {
                let mut out = rect.image.clone();
                // The rectified frame is the reference frame.
                out.set_geo(ref_img.geo().copied());
                save_image(&out, &out_raster, sen_fmt)?;
                if let Some(geo) = ref_img.geo() {
                    write_world_file(&world_file_path(&out_raster), geo)?;
                }
                write_model_file(
                    &out_raster.with_extension("model"),
                    &art.rejection.model,
                    art.tin.as_ref(),
                )?;
            }
            std::fs::write(cfg.output_dir.join("summary.txt"), &art.summary)
                .map_err(|e| CfogError::Io { path: cfg.output_dir.clone(), message: e.to_string() })?;
            print!("{}", art.summary);
            print!("{}", art.timing_log);
            if check {
                match &art.rectified {
                    Some(rect) => {
                        // Residual misalignment between the reference and
                        // the rectified raster: check points should map
                        // through the identity.
                        let params = EvalParams {
                            bank: cfg.bank.clone(),
                            ..EvalParams::default()
                        };
                        let cps = with_jobs(cfg.jobs, || {
                            evaluation::bootstrap_check_points(
                                &ref_img, &rect.image, 50, 1.0, &params,
                            )
                        })?;
                        let rmse = evaluation::check_point_rmse(&cps, |x, y| (x, y));
                        println!("check rmse {:.3}px over {} check points", rmse, cps.len());
                    }
                    None => eprintln!("check skipped: no rectified output"),
                }
            }
            Ok(if art.rejection.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("outlier rejection did not converge");
                ExitCode::from(2)
            })
        }

        Command::Match {
            common,
            reference,
            sensed,
        } => {
            let cfg = load_config(&common)?;
            if common.dry_run {
                print!("{}", cfg.resolved_text());
                return Ok(ExitCode::SUCCESS);
            }
            let (ref_img, _) = load_image(&reference)?;
            let (sen_img, _) = load_image(&sensed)?;
            let outcome = with_jobs(cfg.jobs, || {
                pipeline::detect_and_match(&ref_img, &sen_img, &cfg)
            })?;
            std::fs::create_dir_all(&cfg.output_dir)
                .map_err(|e| CfogError::Io { path: cfg.output_dir.clone(), message: e.to_string() })?;
            write_cp_csv(&cfg.output_dir.join("cps.csv"), &outcome.control_points)?;
            println!(
                "matched {} control points ({} skipped) -> {}",
                outcome.control_points.len(),
                outcome.skipped.len(),
                cfg.output_dir.join("cps.csv").display()
            );
            for s in &outcome.skipped {
                eprintln!("skipped point {}: {}", s.index, s.reason);
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Rectify {
            common,
            reference,
            sensed,
            cps,
        } => {
            let cfg = load_config(&common)?;
            if common.dry_run {
                print!("{}", cfg.resolved_text());
                return Ok(ExitCode::SUCCESS);
            }
            let (ref_img, _) = load_image(&reference)?;
            let (sen_img, sen_fmt) = load_image(&sensed)?;
            let points = read_cp_csv(&cps)?;
            let (rejection, tin, rectified) = with_jobs(cfg.jobs, || {
                pipeline::model_and_rectify(
                    &sen_img,
                    &points,
                    ref_img.width(),
                    ref_img.height(),
                    &cfg,
                )
            })?;
            std::fs::create_dir_all(&cfg.output_dir)
                .map_err(|e| CfogError::Io { path: cfg.output_dir.clone(), message: e.to_string() })?;
            std::fs::write(
                cfg.output_dir.join("rejection.txt"),
                rejection_report_text(&rejection),
            )
            .map_err(|e| CfogError::Io { path: cfg.output_dir.clone(), message: e.to_string() })?;
            write_cp_csv(&cfg.output_dir.join("cps_surviving.csv"), &rejection.survivors)?;
            if let Some(rect) = &rectified {
                let out_raster = cfg.output_dir.join(registered_name(&sensed, sen_fmt));
                let mut out = rect.image.clone();
                out.set_geo(ref_img.geo().copied());
                save_image(&out, &out_raster, sen_fmt)?;
                write_model_file(
                    &out_raster.with_extension("model"),
                    &rejection.model,
                    tin.as_ref(),
                )?;
            }
            println!(
                "rejection converged {} final_rmse {:.6} survivors {}",
                rejection.converged,
                rejection.final_rmse,
                rejection.survivors.len()
            );
            Ok(if rejection.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }

        Command::Simmap {
            common,
            reference,
            sensed,
            x,
            y,
            measures,
        } => {
            let cfg = load_config(&common)?;
            if common.dry_run {
                print!("{}", cfg.resolved_text());
                return Ok(ExitCode::SUCCESS);
            }
            let (ref_img, _) = load_image(&reference)?;
            let (sen_img, _) = load_image(&sensed)?;
            let list: Vec<Measure> = match measures {
                Some(s) => s
                    .split(',')
                    .map(|t| t.trim().parse::<Measure>())
                    .collect::<Result<_, _>>()?,
                None => Measure::ALL.to_vec(),
            };
            std::fs::create_dir_all(&cfg.output_dir)
                .map_err(|e| CfogError::Io { path: cfg.output_dir.clone(), message: e.to_string() })?;
            for measure in list {
                let map = with_jobs(cfg.jobs, || {
                    simmap_at(&ref_img, &sen_img, (x, y), measure, &cfg)
                })?;
                let base = cfg.output_dir.join(format!("simmap_{}", measure.name()));
                map.write_heatmap_pgm(&base.with_extension("pgm"))?;
                map.write_text_matrix(&base.with_extension("txt"))?;
                println!(
                    "{}: peak ({}, {}) subpixel ({:.3}, {:.3}) -> {}",
                    measure.name(),
                    map.peak.0,
                    map.peak.1,
                    map.subpixel.0,
                    map.subpixel.1,
                    base.with_extension("pgm").display()
                );
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Bench {
            common,
            suite,
            seed,
            timings,
            heatmaps,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if common.dry_run {
                print!("{}", cfg.resolved_text());
                return Ok(ExitCode::SUCCESS);
            }
            if suite != "quick" && suite != "paper" {
                return Err(CfogError::Config(format!(
                    "unknown suite {suite:?} (quick|paper)"
                )));
            }
            let pairs = evaluation::suite(&suite, cfg.seed);
            let sizes = evaluation::suite_template_sizes(&suite);
            let params = EvalParams {
                bank: cfg.bank.clone(),
                ..EvalParams::default()
            };
            let out = with_jobs(cfg.jobs, || -> Result<_, CfogError> {
                let reports =
                    run_precision_sweep(&pairs, &Measure::ALL, &sizes, &params)?;
                let variances = [0.0, 0.0025, 0.005, 0.0075, 0.01];
                let noise_measures: &[Measure] = if suite == "paper" {
                    &Measure::ALL
                } else {
                    &[Measure::Cfog, Measure::Fhog, Measure::Ncc]
                };
                let noise = run_noise_sweep(&pairs, noise_measures, &variances, &params)?;
                let study = if suite == "paper" {
                    Some(run_param_study(
                        &pairs,
                        &[0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6],
                        &[4, 6, 9, 12, 18],
                        &params,
                    )?)
                } else {
                    None
                };
                Ok((reports, noise, study))
            })?;
            let (reports, noise, study) = out;

            std::fs::create_dir_all(&cfg.output_dir)
                .map_err(|e| CfogError::Io { path: cfg.output_dir.clone(), message: e.to_string() })?;
            let write = |name: &str, text: String| -> Result<(), CfogError> {
                let path = cfg.output_dir.join(name);
                std::fs::write(&path, text)
                    .map_err(|e| CfogError::Io { path, message: e.to_string() })
            };
            write("precision.csv", precision_csv(&reports))?;
            write("noise.csv", noise_csv(&noise))?;
            if let Some(study) = &study {
                write("param_study.csv", param_study_csv(study))?;
            }
            let summary = summary_text(&reports, &noise, study.as_ref());
            write("summary.txt", summary.clone())?;
            print!("{summary}");

            if heatmaps {
                // Fig-8-style dump: per-measure similarity maps of the
                // first suite pair, matched at the frame center.
                let pair = cfog::synth::generate_pair(&pairs[0].spec, pairs[0].seed)?;
                let mut hm_cfg = cfg.clone();
                hm_cfg.match_cfg.template_size = 61;
                hm_cfg.match_cfg.search_radius = 10;
                let center = pair.reference.width() / 2;
                for measure in Measure::ALL {
                    let map = with_jobs(cfg.jobs, || {
                        simmap_at(&pair.reference, &pair.sensed, (center, center), measure, &hm_cfg)
                    })?;
                    let path = cfg
                        .output_dir
                        .join(format!("heatmap_{}.pgm", measure.name()));
                    map.write_heatmap_pgm(&path)?;
                    println!("wrote {}", path.display());
                }
            }
            if timings {
                // Wall-clock numbers go to stdout only; report files stay
                // byte-identical across runs.
                let scene = Scene::Blobs { count: 160 };
                let img = bench_image(&scene, cfg.seed)?;
                println!("descriptor extraction on 512x512 (seconds):");
                for (m, secs) in extraction_seconds(&img, &params.bank) {
                    println!("  {:<6} {:.3}", m.name(), secs);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn registered_name(sensed: &Path, fmt: RasterFormat) -> String {
    let stem = sensed
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sensed");
    let ext = match fmt {
        RasterFormat::Pgm8 | RasterFormat::Pgm16 => "pgm",
        RasterFormat::Png8 | RasterFormat::Png16 => "png",
    };
    format!("{stem}_registered.{ext}")
}

fn simmap_at(
    ref_img: &Image,
    sen_img: &Image,
    point: (usize, usize),
    measure: Measure,
    cfg: &RunConfig,
) -> Result<SimilarityMap, CfogError> {
    let mcfg = MatchConfig {
        measure,
        ..cfg.match_cfg
    };
    match measure {
        Measure::Ncc => ncc_match_at(ref_img, point, sen_img, point, &mcfg),
        Measure::Mi => mi_match_at(ref_img, point, sen_img, point, &mcfg),
        _ => {
            let desc = cfg
                .bank
                .for_measure(measure)
                .expect("descriptor measures carry a descriptor");
            let d1 = desc.build(ref_img)?;
            let d2 = desc.build(sen_img)?;
            ssd_match_fft_at(&d1, point, &d2, point, &mcfg)
        }
    }
}

fn bench_image(scene: &Scene, seed: u64) -> Result<Image, CfogError> {
    use cfog::synth::{generate_pair, PlantedTransform, RadiometricMap, SyntheticPairSpec};
    let spec = SyntheticPairSpec {
        width: 512,
        height: 512,
        scene: scene.clone(),
        radiometric: RadiometricMap::Identity,
        noise_variance: 0.0,
        transform: PlantedTransform::identity(),
    };
    Ok(generate_pair(&spec, seed)?.reference)
}
