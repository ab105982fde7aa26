//! Command-line front end: one verb per toolkit capability, wired for
//! piping through the flat binary formats.
//!
//! Exit codes: 0 success, 1 validation, 2 I/O, 3 integrity. Every failure
//! prints a single `error: <category>: <message>` line to stderr.

use bevkit::config::ToolkitConfig;
use bevkit::convert::{convert_tree, RecordSet};
use bevkit::error::Error;
use bevkit::eval::{
    angular_sectors_120deg, evaluate, load_detections, stratified_map, Strata, StratifiedReport,
};
use bevkit::rectify::{build_remap, fov_coverage, make_virtual_cameras};
use bevkit::view::{lift_frustum, petr_pe_inputs, splat, FeatureCloud, FeatureGrid, PeMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "bevkit",
    version,
    about = "Geometry toolkit for mixed pinhole/fisheye BEV 3D detection"
)]
struct Cli {
    /// Toolkit configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for synthetic fixtures (e.g. random lift features).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a KITTI-360-style source tree into a nuScenes-style record set.
    Convert(ConvertArgs),
    /// Build virtual pinhole views and remap tables for every fisheye camera.
    Rectify(RectifyArgs),
    /// Emit per-azimuth field-of-view coverage of the configured rig.
    Coverage(CoverageArgs),
    /// Lift per-pixel features along camera rays into an ego-frame cloud.
    Lift(LiftArgs),
    /// Sum-pool a feature cloud into the configured BEV grid.
    Splat(SplatArgs),
    /// Emit position-encoding input tensors for one camera.
    Encode(EncodeArgs),
    /// Score detections against a record set.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Source root holding one directory per sequence.
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RectifyArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also write the lossless text form of each remap table.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct CoverageArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 72)]
    bins: usize,
}

#[derive(Args)]
struct LiftArgs {
    /// Camera name from the calibration set.
    #[arg(long)]
    camera: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    stride: u32,
    /// Feature source: `ones` or `random` (seeded by --seed).
    #[arg(long, default_value = "ones")]
    features: FeatureSource,
    #[arg(long, default_value_t = 1)]
    channels: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeatureSource {
    Ones,
    Random,
}

#[derive(Args)]
struct SplatArgs {
    /// Feature cloud file written by `lift`.
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    camera: String,
    #[arg(long, value_enum)]
    mode: EncodeMode,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    stride: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncodeMode {
    Cartesian,
    Polar,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Detection JSON keyed by sample token.
    #[arg(long)]
    detections: PathBuf,
    /// Record-set directory produced by `convert`.
    #[arg(long)]
    recordset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Stratification axis; both run when omitted.
    #[arg(long, value_enum)]
    strata: Option<StrataKind>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrataKind {
    Distance,
    Angular,
}

fn error_category(e: &Error) -> (&'static str, i32) {
    match e {
        Error::Io(_) | Error::IoAt { .. } => ("io", 2),
        Error::DanglingToken { .. } | Error::UnknownSampleTokens(_) => ("integrity", 3),
        _ => ("validation", 1),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("bad arguments")
                .to_string();
            eprintln!("error: validation: {first}");
            std::process::exit(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Some(n) = cli.threads {
        // Ignore failure: the pool may only be configured once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    if let Err(e) = run(&cli) {
        let (category, code) = error_category(&e);
        eprintln!("error: {category}: {e}");
        std::process::exit(code);
    }
}

fn load_config(cli: &Cli) -> Result<ToolkitConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    if !path.exists() {
        return Err(Error::Config(format!(
            "config file not found: {}",
            path.display()
        )));
    }
    ToolkitConfig::load(path)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Convert(args) => cmd_convert(cli, args),
        Command::Rectify(args) => cmd_rectify(cli, args),
        Command::Coverage(args) => cmd_coverage(cli, args),
        Command::Lift(args) => cmd_lift(cli, args),
        Command::Splat(args) => cmd_splat(cli, args),
        Command::Encode(args) => cmd_encode(cli, args),
        Command::Evaluate(args) => cmd_evaluate(cli, args),
    }
}

fn cmd_convert(cli: &Cli, args: &ConvertArgs) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    if !args.src.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("source root not found: {}", args.src.display()),
        )));
    }
    let (rs, summary) = convert_tree(&args.src, &cfg.rig(), &cfg.convert_options())?;
    rs.write_dir(&args.out)?;
    println!(
        "{} scenes, {} samples, {} annotations",
        summary.scenes, summary.samples, summary.annotations
    );
    Ok(())
}

fn cmd_rectify(cli: &Cli, args: &RectifyArgs) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let rect = cfg
        .rectification
        .as_ref()
        .ok_or_else(|| Error::Config("[rectification] section required".into()))?;
    std::fs::create_dir_all(&args.out)?;

    let mut virtual_entries: Vec<bevkit::config::CameraEntry> = cfg
        .cameras
        .iter()
        .filter(|c| !c.camera().is_fisheye())
        .cloned()
        .collect();
    let mut n_tables = 0;
    for entry in cfg.fisheye_cameras() {
        let fisheye = entry.camera();
        let fisheye_pose = entry.pose();
        let virtuals =
            make_virtual_cameras(rect.front_focal, rect.virtual_width, rect.virtual_height);
        for (vp, suffix) in virtuals.iter().zip(["forward", "backward"]) {
            let table = build_remap(&fisheye, vp);
            let stem = format!("{}_{suffix}", entry.name);
            let mut f = std::fs::File::create(args.out.join(format!("{stem}.remap")))?;
            table.write_binary(&mut f)?;
            if args.text {
                let mut f = std::fs::File::create(args.out.join(format!("{stem}.remap.txt")))?;
                table.write_text(&mut f)?;
            }
            n_tables += 1;

            let ego = vp.ego_pose(&fisheye_pose);
            virtual_entries.push(bevkit::config::CameraEntry {
                name: stem,
                xi: 0.0,
                k1: 0.0,
                k2: 0.0,
                fx: vp.fx,
                fy: vp.fy,
                cx: vp.cx,
                cy: vp.cy,
                width: vp.width,
                height: vp.height,
                crop_u0: 0.0,
                crop_v0: 0.0,
                translation: ego.translation.into(),
                rotation: [
                    ego.rotation.w,
                    ego.rotation.x,
                    ego.rotation.y,
                    ego.rotation.z,
                ],
            });
        }
    }

    #[derive(serde::Serialize)]
    struct VirtualRig {
        cameras: Vec<bevkit::config::CameraEntry>,
    }
    let doc = toml::to_string_pretty(&VirtualRig {
        cameras: virtual_entries.clone(),
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(args.out.join("virtual_cameras.toml"), doc)?;

    println!(
        "{n_tables} remap tables, {} virtual calibration entries",
        virtual_entries.len()
    );
    Ok(())
}

fn cmd_coverage(cli: &Cli, args: &CoverageArgs) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let cameras: Vec<(bevkit::MeiCamera, bevkit::Pose)> =
        cfg.cameras.iter().map(|c| (c.camera(), c.pose())).collect();
    if cameras.is_empty() {
        return Err(Error::Config("no cameras in calibration set".into()));
    }
    let report = fov_coverage(&cameras, args.bins)?;
    let mut out = String::new();
    out.push_str("azimuth_deg");
    for c in &cfg.cameras {
        out.push(',');
        out.push_str(&c.name);
    }
    out.push_str(",covered\n");
    let mut covered = 0;
    for (b, theta) in report.azimuth_centers.iter().enumerate() {
        out.push_str(&format!("{:.6}", theta.to_degrees()));
        for &seen in &report.seen[b] {
            out.push_str(if seen { ",1" } else { ",0" });
        }
        let any = report.covered(b);
        covered += usize::from(any);
        out.push_str(if any { ",1\n" } else { ",0\n" });
    }
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(&args.out, out)?;
    println!("{covered}/{} azimuth bins covered", args.bins);
    Ok(())
}

/// splitmix64: tiny deterministic generator for synthetic features.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn cmd_lift(cli: &Cli, args: &LiftArgs) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let entry = cfg.find_camera(&args.camera)?;
    let cam = entry.camera();
    let depths = cfg.depth_ladder();
    let rays = bevkit::camera::generate_ray_grid(&cam, args.stride, &depths)?;
    let features = match args.features {
        FeatureSource::Ones => FeatureGrid::ones(rays.n_u, rays.n_v, args.channels),
        FeatureSource::Random => {
            let mut state = cli.seed;
            let data: Vec<f64> = (0..rays.n_u * rays.n_v * args.channels)
                .map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64)
                .collect();
            FeatureGrid::new(rays.n_u, rays.n_v, args.channels, data)?
        }
    };
    let camera_id = cfg
        .cameras
        .iter()
        .position(|c| c.name == args.camera)
        .unwrap() as u32;
    let cloud = lift_frustum(
        &cam,
        &entry.pose(),
        args.stride,
        &depths,
        &features,
        camera_id,
    )?;
    write_binary_file(&args.out, |w| cloud.write_binary(w))?;
    println!(
        "lifted {} points ({} channels) from {}",
        cloud.len(),
        cloud.channels,
        args.camera
    );
    Ok(())
}

fn cmd_splat(cli: &Cli, args: &SplatArgs) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let mut f = std::fs::File::open(&args.cloud).map_err(|e| Error::IoAt {
        path: args.cloud.display().to_string(),
        source: e,
    })?;
    let cloud = FeatureCloud::read_binary(&mut f)?;
    let grid = cfg.bev_grid()?;
    let map = splat(&cloud, &grid)?;
    write_binary_file(&args.out, |w| map.write_binary(w))?;
    let sums: Vec<String> = (0..map.channels)
        .map(|c| format!("{:.6}", map.channel_sum(c)))
        .collect();
    println!(
        "splatted {} points into {} bins; channel sums [{}]",
        cloud.len(),
        map.n_bins(),
        sums.join(", ")
    );
    Ok(())
}

fn cmd_encode(cli: &Cli, args: &EncodeArgs) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let entry = cfg.find_camera(&args.camera)?;
    let mode = match args.mode {
        EncodeMode::Cartesian => PeMode::Cartesian,
        EncodeMode::Polar => PeMode::Polar,
    };
    let pe = petr_pe_inputs(
        &entry.camera(),
        &entry.pose(),
        args.stride,
        &cfg.depth_ladder(),
        &cfg.bev_grid()?,
        mode,
    )?;
    write_binary_file(&args.out, |w| pe.write_binary(w))?;
    println!(
        "encoded {} x {} x {} samples ({} values each)",
        pe.n_v, pe.n_u, pe.n_d, pe.enc_len
    );
    Ok(())
}

fn cmd_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let rs = RecordSet::read_dir(&args.recordset)?;
    rs.validate_integrity()?;
    let dets = load_detections(&args.detections)?;

    let known: BTreeSet<&str> = rs.samples.iter().map(|s| s.token.as_str()).collect();
    let mut offenders: Vec<&str> = dets
        .iter()
        .map(|d| d.sample_token.as_str())
        .filter(|t| !known.contains(t))
        .collect();
    offenders.sort_unstable();
    offenders.dedup();
    if !offenders.is_empty() {
        return Err(Error::UnknownSampleTokens(offenders.join(", ")));
    }

    let gts = rs.ground_truth();
    let eval_cfg = cfg.eval_config();
    let report = evaluate(&dets, &gts, &eval_cfg)?;
    std::fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("metrics.json"), &report)?;

    let run_distance = args.strata.is_none_or(|s| s == StrataKind::Distance);
    let run_angular = args.strata.is_none_or(|s| s == StrataKind::Angular);
    if run_distance {
        let strata = cfg.distance_strata();
        let sr = stratified_map(&dets, &gts, &strata, &eval_cfg)?;
        write_json(&args.out.join("stratified_distance.json"), &sr)?;
        write_stratified_csv(&args.out.join("stratified_distance.csv"), &sr)?;
    }
    if run_angular {
        let strata = Strata::Angular(angular_sectors_120deg());
        let sr = stratified_map(&dets, &gts, &strata, &eval_cfg)?;
        write_json(&args.out.join("stratified_angular.json"), &sr)?;
        write_stratified_csv(&args.out.join("stratified_angular.csv"), &sr)?;
    }

    println!(
        "mAP {:.4}  NDS {:.4}  (mATE {:.4}, mASE {:.4}, mAOE {:.4}, mAVE {:.4})",
        report.mean_ap, report.nds, report.mate, report.mase, report.maoe, report.mave
    );
    Ok(())
}

fn write_stratified_csv(path: &Path, report: &StratifiedReport) -> Result<(), Error> {
    let mut out = String::from("stratum,n_gt,n_det,map_percent\n");
    for s in &report.strata {
        out.push_str(&format!(
            "{},{},{},{:.2}\n",
            s.name,
            s.n_gt,
            s.n_det,
            s.mean_ap * 100.0
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut f = std::fs::File::create(path)?;
    let body = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    f.write_all(body.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_binary_file(
    path: &Path,
    write: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<(), Error>,
) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write(&mut w)?;
    Ok(())
}
