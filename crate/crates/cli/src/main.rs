//! `rfdepth`: simulate, dual-photograph, calibrate, reconstruct and evaluate.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfdepth_core::eval::{lambertian_baseline, rms_error};
use rfdepth_core::geometry::{calibrate_planar, CheckerboardSpec, PlanarView, RectifiedRig};
use rfdepth_core::io::{
    read_pfm, read_pgm, read_tmat, write_atomic, write_pfm, write_pgm, write_tmat, ByteImage, FloatImage,
};
use rfdepth_core::reconstruct::{forward_irradiance, reconstruct_depthmap, render_depth_map, ReconstructionParams};
use rfdepth_core::{build_transport_matrix, dual_photograph, Error, HeightField, LightFieldVector, Rig};

#[derive(Parser)]
#[command(name = "rfdepth", version, about = "Depth from reflectance fields of camera-projector rigs")]
struct Cli {
    /// Seed for every random choice (calibration noise).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the transport matrix of a scene, plus optional irradiance and true depth.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Camera irradiance image (PFM); needs a canonical rectified rig.
        #[arg(long)]
        irradiance: Option<PathBuf>,
        /// Ground-truth camera depth map (PFM); needs a canonical rectified rig.
        #[arg(long)]
        depth: Option<PathBuf>,
    },
    /// Synthesize the projector's view of a camera image through the transposed transport.
    Dualphoto {
        #[arg(long)]
        tmat: PathBuf,
        #[arg(long)]
        illum: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rig file giving the projector image size; without it the projector must be square.
        #[arg(long)]
        rig: Option<PathBuf>,
    },
    /// Calibrate camera and projector from planar views and write a rig file.
    Calibrate {
        /// Directory with camera_*.pts and projector_*.pts correspondence files.
        #[arg(long)]
        views: PathBuf,
        /// Board as ROWSxCOLSxSIZE (inner corners and square size).
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
        /// Uniform pixel noise amplitude added to every image point.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Recover a camera depth map from irradiance and transport.
    Reconstruct {
        #[arg(long)]
        tmat: PathBuf,
        #[arg(long)]
        irradiance: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Compare a reconstruction with ground truth and write a JSON report.
    Evaluate {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Constant BRDF value for a Lambertian baseline reconstruction.
        #[arg(long, requires_all = ["irradiance", "tmat", "rig"])]
        baseline_fr: Option<f64>,
        #[arg(long)]
        irradiance: Option<PathBuf>,
        #[arg(long)]
        tmat: Option<PathBuf>,
        #[arg(long)]
        rig: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn load_rig(path: &Path) -> anyhow::Result<Rig> {
    config::parse_rig(&read_text(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_params(path: Option<&Path>) -> anyhow::Result<ReconstructionParams> {
    match path {
        Some(p) => config::parse_params(&read_text(p)?).with_context(|| format!("in {}", p.display())),
        None => Ok(ReconstructionParams::default()),
    }
}

fn load_pfm(path: &Path) -> anyhow::Result<FloatImage> {
    read_pfm(path).with_context(|| format!("reading {}", path.display()))
}

fn load_tmat(path: &Path) -> anyhow::Result<rfdepth_core::TransportMatrix> {
    read_tmat(path).with_context(|| format!("reading {}", path.display()))
}

fn depth_image(h: &HeightField) -> anyhow::Result<FloatImage> {
    if !h.mask().iter().any(|ok| *ok) {
        return Err(Error::AllInvalid.into());
    }
    Ok(FloatImage::from_heightfield(h))
}

fn simulate(
    scene_path: &Path,
    rig_path: &Path,
    out: &Path,
    irradiance: Option<&Path>,
    depth: Option<&Path>,
) -> anyhow::Result<()> {
    let base = scene_path.parent().unwrap_or(Path::new("."));
    let cfg = config::parse_scene(&read_text(scene_path)?, base).with_context(|| format!("in {}", scene_path.display()))?;
    let scene = cfg.scene()?;
    let rig = load_rig(rig_path)?;
    let t = build_transport_matrix(&scene, &rig)?;
    let rectified = if irradiance.is_some() || depth.is_some() {
        Some(RectifiedRig::canonical(&rig)?)
    } else {
        None
    };
    // derived images use the matrix exactly as it is stored
    let stored = t.rounded_to_f32();
    let e = match (irradiance, &rectified) {
        (Some(_), Some(r)) => Some(forward_irradiance(&scene, r, &stored)?),
        _ => None,
    };
    let z = match (depth, &rectified) {
        (Some(_), Some(r)) => Some(render_depth_map(&scene, r)?),
        _ => None,
    };
    write_tmat(out, &t)?;
    if let (Some(path), Some(e)) = (irradiance, e) {
        write_pfm(path, &FloatImage::from_irradiance(&e))?;
    }
    if let (Some(path), Some(z)) = (depth, z) {
        write_pfm(path, &depth_image(&z)?)?;
    }
    Ok(())
}

fn dualphoto(tmat: &Path, illum: &Path, out: &Path, rig: Option<&Path>) -> anyhow::Result<()> {
    let t = load_tmat(tmat)?;
    let img = read_pgm(illum).with_context(|| format!("reading {}", illum.display()))?;
    let (pw, ph) = match rig {
        Some(p) => {
            let rig = load_rig(p)?;
            if rig.camera.pixel_count() != t.rows() {
                return Err(Error::DimensionMismatch {
                    what: "camera pixels in rig vs transport rows",
                    expected: t.rows(),
                    got: rig.camera.pixel_count(),
                }
                .into());
            }
            (rig.projector.width, rig.projector.height)
        }
        None => {
            let side = (t.cols() as f64).sqrt().round() as usize;
            if side * side != t.cols() {
                return Err(Error::Validation {
                    key: "rig".into(),
                    message: format!("{} projector pixels is not a square image; pass --rig", t.cols()),
                }
                .into());
            }
            (side, side)
        }
    };
    let c = LightFieldVector::new(img.to_unit())?;
    let d = dual_photograph(&t, &c)?;
    write_pgm(out, &ByteImage::from_normalized(pw, ph, d.values())?)?;
    Ok(())
}

fn parse_board(spec: &str) -> anyhow::Result<CheckerboardSpec> {
    let bad = || Error::Validation {
        key: "spec".into(),
        message: format!("expected ROWSxCOLSxSIZE, got `{spec}`"),
    };
    let parts: Vec<&str> = spec.split('x').collect();
    if parts.len() != 3 {
        return Err(bad().into());
    }
    let rows = parts[0].parse().map_err(|_| bad())?;
    let cols = parts[1].parse().map_err(|_| bad())?;
    let size = parts[2].parse().map_err(|_| bad())?;
    Ok(CheckerboardSpec::new(rows, cols, size)?)
}

/// Reads a `.pts` file: a `size W H` line, then one `bx by u v` line per corner.
fn read_pts(path: &Path) -> anyhow::Result<((usize, usize), PlanarView)> {
    let text = read_text(path)?;
    let mut size = None;
    let mut correspondences = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| {
            anyhow::Error::from(Error::Parse {
                line: k + 1,
                column: 1,
                message,
            })
            .context(format!("in {}", path.display()))
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "size" {
            match (fields.len(), fields.get(1).and_then(|s| s.parse().ok()), fields.get(2).and_then(|s| s.parse().ok())) {
                (3, Some(w), Some(h)) if size.is_none() => size = Some((w, h)),
                _ => return Err(err("expected a single `size W H` line".into())),
            }
            continue;
        }
        let nums: Option<Vec<f64>> = fields.iter().map(|s| s.parse().ok().filter(|v: &f64| v.is_finite())).collect();
        match nums {
            Some(v) if v.len() == 4 => correspondences.push(((v[0], v[1]), (v[2], v[3]))),
            _ => return Err(err(format!("expected `bx by u v`, got `{line}`"))),
        }
    }
    let size = size.ok_or_else(|| {
        anyhow::Error::from(Error::Parse {
            line: 1,
            column: 1,
            message: "missing `size W H` line".into(),
        })
        .context(format!("in {}", path.display()))
    })?;
    Ok((size, PlanarView { correspondences }))
}

fn device_views(dir: &Path, prefix: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(Error::from)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().map_or(false, |x| x == "pts")
                && p.file_name().and_then(|n| n.to_str()).map_or(false, |n| n.starts_with(prefix))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

fn calibrate_device(
    dir: &Path,
    prefix: &str,
    spec: &CheckerboardSpec,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> anyhow::Result<rfdepth_core::PinholeDevice> {
    let mut views = Vec::new();
    let mut size = None;
    for path in device_views(dir, prefix)? {
        let (s, mut view) = read_pts(&path)?;
        if *size.get_or_insert(s) != s {
            return Err(Error::Validation {
                key: "size".into(),
                message: format!("{} disagrees with earlier {prefix} views", path.display()),
            }
            .into());
        }
        if noise > 0.0 {
            for (_, px) in view.correspondences.iter_mut() {
                px.0 += rng.gen_range(-noise..=noise);
                px.1 += rng.gen_range(-noise..=noise);
            }
        }
        views.push(view);
    }
    let size = size.unwrap_or((0, 0));
    let cal = calibrate_planar(&views, spec, size).with_context(|| format!("calibrating {prefix} views"))?;
    Ok(cal.device)
}

fn calibrate(views: &Path, spec: &str, out: &Path, noise: f64, seed: u64) -> anyhow::Result<()> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Validation {
            key: "noise".into(),
            message: "must be finite and nonnegative".into(),
        }
        .into());
    }
    let spec = parse_board(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let camera = calibrate_device(views, "camera_", &spec, noise, &mut rng)?;
    let projector = calibrate_device(views, "projector_", &spec, noise, &mut rng)?;
    let rig = Rig::new(camera, projector)?;
    write_atomic(out, config::write_rig(&rig).as_bytes())?;
    Ok(())
}

fn reconstruct(tmat: &Path, irradiance: &Path, rig: &Path, out: &Path, params: Option<&Path>) -> anyhow::Result<()> {
    let t = load_tmat(tmat)?;
    let e = load_pfm(irradiance)?.to_irradiance()?;
    let rig = RectifiedRig::canonical(&load_rig(rig)?)?;
    let params = load_params(params)?;
    let z = reconstruct_depthmap(&e, &t, &rig, &params)?;
    write_pfm(out, &depth_image(&z)?)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    recon: &Path,
    truth: &Path,
    out: &Path,
    baseline_fr: Option<f64>,
    irradiance: Option<&Path>,
    tmat: Option<&Path>,
    rig: Option<&Path>,
    params: Option<&Path>,
) -> anyhow::Result<()> {
    let r = load_pfm(recon)?.to_heightfield()?;
    let g = load_pfm(truth)?.to_heightfield()?;
    let mut report = rms_error(&r, &g)?;
    if let (Some(fr), Some(e), Some(t), Some(rig)) = (baseline_fr, irradiance, tmat, rig) {
        let e = load_pfm(e)?.to_irradiance()?;
        let t = load_tmat(t)?;
        let rig = RectifiedRig::canonical(&load_rig(rig)?)?;
        let base = lambertian_baseline(&e, &t, &rig, fr, &load_params(params)?)?;
        report.baseline_rms_percent = match rms_error(&base, &g) {
            Ok(b) => Some(b.rms_percent),
            Err(Error::NoOverlap) => Some(f64::INFINITY),
            Err(err) => return Err(err.into()),
        };
    }
    let mut json = serde_json::to_string_pretty(&report).context("serializing report")?;
    json.push('\n');
    write_atomic(out, json.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            scene,
            rig,
            out,
            irradiance,
            depth,
        } => simulate(&scene, &rig, &out, irradiance.as_deref(), depth.as_deref()),
        Command::Dualphoto { tmat, illum, out, rig } => dualphoto(&tmat, &illum, &out, rig.as_deref()),
        Command::Calibrate { views, spec, out, noise } => calibrate(&views, &spec, &out, noise, cli.seed),
        Command::Reconstruct {
            tmat,
            irradiance,
            rig,
            out,
            params,
        } => reconstruct(&tmat, &irradiance, &rig, &out, params.as_deref()),
        Command::Evaluate {
            recon,
            truth,
            out,
            baseline_fr,
            irradiance,
            tmat,
            rig,
            params,
        } => evaluate(
            &recon,
            &truth,
            &out,
            baseline_fr,
            irradiance.as_deref(),
            tmat.as_deref(),
            rig.as_deref(),
            params.as_deref(),
        ),
    }
}

fn exit_code(err: Option<&Error>) -> u8 {
    match err {
        Some(Error::Parse { .. } | Error::Validation { .. } | Error::Format { .. }) => 2,
        Some(
            Error::NotRectified(_)
            | Error::ZeroBaseline
            | Error::InsufficientViews { .. }
            | Error::DegenerateViews(_),
        ) => 2,
        Some(Error::DimensionMismatch { .. }) => 3,
        Some(Error::Io(_)) => 5,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let core = err.chain().find_map(|e| e.downcast_ref::<Error>());
            let class = core.map_or("Error", Error::class);
            eprintln!("error[{class}]: {err:#}");
            ExitCode::from(exit_code(core))
        }
    }
}
