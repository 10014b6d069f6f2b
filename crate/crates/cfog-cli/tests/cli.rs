//! End-to-end tests of the `cfog` binary: artifacts, exit codes, and
//! byte-identical outputs across worker counts.

use std::path::{Path, PathBuf};
use std::process::Command;

use cfog::image::Image;
use cfog::io::{save_image, RasterFormat};
use cfog::synth::{generate_pair, PlantedTransform, RadiometricMap, Scene, SyntheticPairSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cfog"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cfog-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Writes a synthetic pair to disk and returns (ref, sen) paths.
fn synth_pair(dir: &Path, transform: PlantedTransform, seed: u64) -> (PathBuf, PathBuf) {
    let spec = SyntheticPairSpec {
        width: 200,
        height: 200,
        scene: Scene::FilteredNoise { sigma: 2.0 },
        radiometric: RadiometricMap::Gamma(0.6),
        noise_variance: 0.0005,
        transform,
    };
    let pair = generate_pair(&spec, seed).unwrap();
    let ref_path = dir.join("ref.pgm");
    let sen_path = dir.join("sen.pgm");
    save_image(&pair.reference, &ref_path, RasterFormat::Pgm16).unwrap();
    save_image(&pair.sensed, &sen_path, RasterFormat::Pgm16).unwrap();
    (ref_path, sen_path)
}

fn small_run_args(out: &Path) -> Vec<String> {
    [
        "--set",
        "match.template_size=41",
        "--set",
        "match.search_radius=8",
        "--set",
        "harris.grid_n=5",
        "--set",
        "harris.chip_size=40",
        "--set",
        "harris.min_response=1e-9",
        "--set",
        "registration.rmse_threshold=1.0",
        "--out-dir",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.display().to_string()])
    .collect()
}

#[test]
fn register_self_produces_all_artifacts_and_exit_zero() {
    let dir = workdir("self");
    let (ref_path, _) = synth_pair(&dir, PlantedTransform::identity(), 1);
    let out = dir.join("out");
    let status = bin()
        .args(["register", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&ref_path)
        .args(small_run_args(&out))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for name in [
        "cps.csv",
        "cps_surviving.csv",
        "rejection.txt",
        "summary.txt",
        "ref_registered.pgm",
        "ref_registered.model",
    ] {
        assert!(out.join(name).exists(), "missing artifact {name}");
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("rejection converged true"));
    // Self-registration: RMSE well under a tenth of a pixel.
    let rejection = std::fs::read_to_string(out.join("rejection.txt")).unwrap();
    let rmse_line = rejection
        .lines()
        .find(|l| l.starts_with("final_rmse"))
        .unwrap();
    let rmse: f64 = rmse_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(rmse < 0.1, "self-registration rmse {rmse}");
}

#[test]
fn register_planted_translation_converges_and_rectifies() {
    let dir = workdir("translate");
    let (ref_path, sen_path) = synth_pair(
        &dir,
        PlantedTransform::Translation { dx: 5.0, dy: -3.0 },
        7,
    );
    let out = dir.join("out");
    let status = bin()
        .args(["register", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .args(small_run_args(&out))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // The rectified raster must align with the reference: re-measure a few
    // control points between them and demand sub-pixel agreement.
    let (rect, _) = cfog::io::load_image(&out.join("sen_registered.pgm")).unwrap();
    let (ref_img, _) = cfog::io::load_image(&ref_path).unwrap();
    let cfg = cfog::similarity::MatchConfig {
        template_size: 41,
        search_radius: 6,
        measure: cfog::similarity::Measure::Cfog,
        mi_bins: 32,
    };
    let bank = cfog::matching::DescriptorBank::default();
    let desc = bank.for_measure(cfog::similarity::Measure::Cfog).unwrap();
    let d1 = desc.build(&ref_img).unwrap();
    let d2 = desc.build(&rect).unwrap();
    let mut errors = Vec::new();
    for &p in &[(60usize, 60usize), (140, 60), (60, 140), (140, 140), (100, 100)] {
        let map = cfog::similarity::ssd_match_fft(&d1, &d2, p, &cfg).unwrap();
        errors.push((map.subpixel.0.powi(2) + map.subpixel.1.powi(2)).sqrt());
    }
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = errors[errors.len() / 2];
    assert!(median < 1.0, "rectified-vs-reference error {median:.3}px");
}

#[test]
fn register_check_reports_subpixel_residual() {
    let dir = workdir("check");
    let (ref_path, sen_path) = synth_pair(
        &dir,
        PlantedTransform::Translation { dx: 4.0, dy: -2.0 },
        17,
    );
    let out = dir.join("out");
    let output = bin()
        .args(["register", "--check", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .args(small_run_args(&out))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    let line = stdout
        .lines()
        .find(|l| l.starts_with("check rmse"))
        .expect("check line");
    let rmse: f64 = line
        .split_whitespace()
        .nth(2)
        .unwrap()
        .trim_end_matches("px")
        .parse()
        .unwrap();
    assert!(rmse < 1.0, "post-registration check rmse {rmse}");
}

#[test]
fn match_then_rectify_round_trip() {
    let dir = workdir("two-stage");
    let (ref_path, sen_path) = synth_pair(
        &dir,
        PlantedTransform::Translation { dx: 3.0, dy: 2.0 },
        11,
    );
    let out = dir.join("out");
    let status = bin()
        .args(["match", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .args(small_run_args(&out))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let cps = out.join("cps.csv");
    assert!(cps.exists());

    let out2 = dir.join("out2");
    let status = bin()
        .args(["rectify", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .arg("--cps")
        .arg(&cps)
        .args(small_run_args(&out2))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out2.join("sen_registered.pgm").exists());
    assert!(out2.join("sen_registered.model").exists());

    // The model sidecar parses back.
    let (model, tin) =
        cfog::registration::read_model_file(&out2.join("sen_registered.model")).unwrap();
    assert_eq!(model.order, 3);
    assert!(tin.is_some());
}

#[test]
fn simmap_emits_one_heatmap_per_measure() {
    let dir = workdir("simmap");
    let spec = SyntheticPairSpec {
        width: 160,
        height: 160,
        scene: Scene::FilteredNoise { sigma: 2.0 },
        radiometric: RadiometricMap::Inversion,
        noise_variance: 0.0,
        transform: PlantedTransform::identity(),
    };
    let pair = generate_pair(&spec, 3).unwrap();
    let ref_path = dir.join("ref.pgm");
    let sen_path = dir.join("sen.pgm");
    save_image(&pair.reference, &ref_path, RasterFormat::Pgm8).unwrap();
    save_image(&pair.sensed, &sen_path, RasterFormat::Pgm8).unwrap();
    let out = dir.join("maps");
    let status = bin()
        .args(["simmap", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .args([
            "--x",
            "80",
            "--y",
            "80",
            "--set",
            "match.template_size=41",
            "--set",
            "match.search_radius=8",
            "--out-dir",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for m in ["cfog", "fhog", "flss", "fsurf", "ncc", "mi"] {
        assert!(out.join(format!("simmap_{m}.pgm")).exists(), "missing {m} heatmap");
        assert!(out.join(format!("simmap_{m}.txt")).exists(), "missing {m} matrix");
    }

    // Out-of-footprint point names the margin and fails with exit 1.
    let output = bin()
        .args(["simmap", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .args(["--x", "5", "--y", "5", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("footprint"), "stderr: {stderr}");
}

#[test]
fn dry_run_prints_resolved_config_without_touching_outputs() {
    let dir = workdir("dry");
    let (ref_path, sen_path) = synth_pair(&dir, PlantedTransform::identity(), 5);
    let out = dir.join("never-created");
    let output = bin()
        .args(["register", "--dry-run", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .args(["--measure", "ncc", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("measure = ncc"));
    assert!(stdout.contains("template_size = 81"));
    assert!(!out.exists(), "--dry-run must not create outputs");
}

#[test]
fn config_file_applies_and_bad_keys_exit_one() {
    let dir = workdir("config");
    let (ref_path, sen_path) = synth_pair(&dir, PlantedTransform::identity(), 6);
    let conf = dir.join("run.conf");
    std::fs::write(&conf, "[match]\nmeasure = mi\ntemplate_size = 45\n").unwrap();
    let output = bin()
        .args(["register", "--dry-run", "--config"])
        .arg(&conf)
        .args(["--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("measure = mi"));
    assert!(stdout.contains("template_size = 45"));

    std::fs::write(&conf, "[match]\nbogus_key = 1\n").unwrap();
    let output = bin()
        .args(["register", "--dry-run", "--config"])
        .arg(&conf)
        .args(["--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("bogus_key"));
}

#[test]
fn unrelated_images_fail_to_converge_with_exit_two() {
    let dir = workdir("noconv");
    // Two unrelated noise fields: matches are garbage, rejection cannot
    // reach a 0.05 px RMSE before hitting the survivor floor.
    let a = {
        let spec = SyntheticPairSpec {
            width: 200,
            height: 200,
            scene: Scene::FilteredNoise { sigma: 1.5 },
            radiometric: RadiometricMap::Identity,
            noise_variance: 0.0,
            transform: PlantedTransform::identity(),
        };
        generate_pair(&spec, 100).unwrap().reference
    };
    let b = {
        let spec = SyntheticPairSpec {
            width: 200,
            height: 200,
            scene: Scene::FilteredNoise { sigma: 1.5 },
            radiometric: RadiometricMap::Identity,
            noise_variance: 0.0,
            transform: PlantedTransform::identity(),
        };
        generate_pair(&spec, 999).unwrap().reference
    };
    let ref_path = dir.join("a.pgm");
    let sen_path = dir.join("b.pgm");
    save_image(&a, &ref_path, RasterFormat::Pgm8).unwrap();
    save_image(&b, &sen_path, RasterFormat::Pgm8).unwrap();
    let out = dir.join("out");
    let status = bin()
        .args(["register", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .args([
            "--set",
            "match.template_size=41",
            "--set",
            "match.search_radius=8",
            "--set",
            "harris.grid_n=5",
            "--set",
            "harris.chip_size=40",
            "--set",
            "harris.min_response=1e-9",
            "--set",
            "registration.rmse_threshold=0.05",
            "--out-dir",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // Partial artifacts still written.
    assert!(out.join("rejection.txt").exists());
}

#[test]
fn outputs_are_byte_identical_across_jobs_and_reruns() {
    let dir = workdir("determinism");
    let (ref_path, sen_path) = synth_pair(
        &dir,
        PlantedTransform::Translation { dx: 4.0, dy: 1.0 },
        13,
    );
    let run = |out: &Path, jobs: &str| {
        let status = bin()
            .args(["register", "--jobs", jobs, "--ref"])
            .arg(&ref_path)
            .arg("--sen")
            .arg(&sen_path)
            .args(small_run_args(out))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        let mut bytes = Vec::new();
        for name in ["cps.csv", "cps_surviving.csv", "rejection.txt", "summary.txt"] {
            bytes.extend(std::fs::read(out.join(name)).unwrap());
        }
        bytes
    };
    let first = run(&dir.join("o1"), "1");
    let second = run(&dir.join("o2"), "2");
    let rerun = run(&dir.join("o3"), "1");
    assert_eq!(first, second, "jobs=1 vs jobs=2 artifacts differ");
    assert_eq!(first, rerun, "repeated runs differ");
}

#[test]
fn bench_quick_reports_are_reproducible() {
    let dir = workdir("bench");
    let run = |out: &Path| {
        let status = bin()
            .args(["bench", "--suite", "quick", "--seed", "9", "--out-dir"])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        let mut bytes = Vec::new();
        for name in ["precision.csv", "noise.csv", "summary.txt"] {
            bytes.extend(std::fs::read(out.join(name)).unwrap());
        }
        bytes
    };
    let a = run(&dir.join("b1"));
    let b = run(&dir.join("b2"));
    assert_eq!(a, b, "bench reports differ across reruns");
}

#[test]
fn world_files_follow_rasters_through_registration() {
    let dir = workdir("geo");
    let spec = SyntheticPairSpec {
        width: 200,
        height: 200,
        scene: Scene::FilteredNoise { sigma: 2.0 },
        radiometric: RadiometricMap::Identity,
        noise_variance: 0.0,
        transform: PlantedTransform::Translation { dx: 6.0, dy: 0.0 },
    };
    let pair = generate_pair(&spec, 21).unwrap();
    let ref_path = dir.join("ref.pgm");
    let sen_path = dir.join("sen.pgm");
    // Georeference both frames so the search centers come from the geo
    // prediction rather than the identity guess.
    let ref_img: Image = pair
        .reference
        .clone()
        .with_geo(cfog::geo::GeoTransform::north_up(2.0, 1000.0, 5000.0));
    let sen_img: Image = pair
        .sensed
        .clone()
        .with_geo(cfog::geo::GeoTransform::north_up(2.0, 1000.0 - 12.0, 5000.0));
    save_image(&ref_img, &ref_path, RasterFormat::Pgm8).unwrap();
    save_image(&sen_img, &sen_path, RasterFormat::Pgm8).unwrap();
    assert!(dir.join("ref.wld").exists());

    let out = dir.join("out");
    let status = bin()
        .args(["register", "--ref"])
        .arg(&ref_path)
        .arg("--sen")
        .arg(&sen_path)
        .args(small_run_args(&out))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    // Output world file copied from the reference frame.
    let wld = out.join("sen_registered.wld");
    assert!(wld.exists());
    let geo = cfog::io::read_world_file(&wld).unwrap();
    assert_eq!(geo, *ref_img.geo().unwrap());
}
