//! Command-line benchmark runner: manifest-driven evaluation, standalone
//! registration, synthetic scene generation, and report re-rendering.
//!
//! Exit codes: 0 on success, 1 when some scenes failed (the rest are still
//! processed and written), 2 on configuration or usage errors.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use recon_eval::geom::{AxisAlignedBox, Point3, RigidPose};
use recon_eval::io::manifest::{write_manifest, GroundTruthObject, SceneManifest};
use recon_eval::io::ply::{write_ply_pointcloud, PlyFormat};
use recon_eval::pipeline::{
    evaluate_scene, read_scene_record, register_scene, write_registration_record,
    write_scene_record, EvaluateOptions, GtSampling, RegistrationRecord, SceneRecord,
};
use recon_eval::report::{aggregate_runs, write_csv, write_markdown, BenchmarkRun};
use recon_eval::synth::{
    degrade, make_box_cloud_with_normals, make_sphere_cloud_with_normals, DegradationSpec,
};
use recon_eval::{Error, ToleranceSpec};

#[derive(Parser)]
#[command(
    name = "recon-eval",
    version,
    about = "Geometric accuracy benchmark for 3D reconstructions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate reconstructions against ground truth, scene by scene.
    Evaluate(EvaluateArgs),
    /// Estimate the metric registration for one scene and write the
    /// transformed cloud plus the transform and residuals.
    Register(RegisterArgs),
    /// Generate a synthetic ground-truth/reconstruction pair with a manifest.
    Synth(SynthArgs),
    /// Re-render comparison tables from stored per-scene JSON results.
    Report(ReportArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Scene manifest path; repeat for multiple scenes.
    #[arg(long = "manifest", required = true, num_args = 1..)]
    manifests: Vec<PathBuf>,

    /// Method name recorded in results and tables.
    #[arg(long)]
    method: String,

    /// Output directory for per-scene JSON, summary tables, and exports.
    #[arg(long)]
    out: PathBuf,

    /// Tolerance in millimeters; repeat to override the manifest list.
    #[arg(long = "tau")]
    taus: Vec<f64>,

    /// Ground-truth conversion: `vertices` or `surface:<n>` samples.
    #[arg(long = "gt-sampling", default_value = "vertices")]
    gt_sampling: String,

    /// Also write each scene's reconstruction colored by forward NN error.
    #[arg(long = "export-colored")]
    export_colored: bool,

    /// Worker threads (default: available parallelism). Affects wall time
    /// only, never values.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RegisterArgs {
    #[arg(long)]
    manifest: PathBuf,

    /// Output directory for the registered cloud and registration JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Shape of the ground-truth surface: `sphere` or `box`.
    shape: String,

    /// Points in the ground-truth cloud.
    #[arg(long, default_value_t = 100_000)]
    n: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Sphere radius, meters.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,

    /// Box corner `x,y,z` (box shape only), meters.
    #[arg(long = "box-min", default_value = "-0.5,-0.5,-0.5")]
    box_min: String,

    #[arg(long = "box-max", default_value = "0.5,0.5,0.5")]
    box_max: String,

    /// Gaussian noise sigma along surface normals, meters.
    #[arg(long = "noise-sigma", default_value_t = 0.0)]
    noise_sigma: f64,

    /// Probability of dropping each reconstruction point, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,

    /// Uniform outlier points appended to the reconstruction.
    #[arg(long, default_value_t = 0)]
    outliers: usize,

    #[arg(long = "offset-x", default_value_t = 0.0)]
    offset_x: f64,

    #[arg(long = "offset-y", default_value_t = 0.0)]
    offset_y: f64,

    #[arg(long = "offset-z", default_value_t = 0.0)]
    offset_z: f64,

    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-scene JSON files or directories containing them; repeatable.
    #[arg(long = "results", required = true, num_args = 1..)]
    results: Vec<PathBuf>,

    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Register(args) => cmd_register(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_gt_sampling(text: &str) -> anyhow::Result<GtSampling> {
    if text == "vertices" {
        return Ok(GtSampling::Vertices);
    }
    if let Some(n) = text.strip_prefix("surface:") {
        let n: usize = n
            .parse()
            .with_context(|| format!("bad surface sample count `{n}`"))?;
        if n == 0 {
            bail!("surface sample count must be positive");
        }
        return Ok(GtSampling::Surface(n));
    }
    bail!("--gt-sampling must be `vertices` or `surface:<n>`, got `{text}`");
}

fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already configured")?;
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<ExitCode> {
    configure_threads(args.threads)?;
    let gt_sampling = parse_gt_sampling(&args.gt_sampling)?;
    let tolerances = if args.taus.is_empty() {
        None
    } else {
        Some(ToleranceSpec::new(args.taus.clone()).map_err(|e| anyhow::anyhow!("{e}"))?)
    };
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;

    struct SceneFailure {
        manifest: PathBuf,
        error: Error,
    }

    let outcomes: Vec<Result<SceneRecord, SceneFailure>> = args
        .manifests
        .par_iter()
        .map(|path| {
            let run = || -> Result<SceneRecord, Error> {
                let manifest = recon_eval::read_manifest(path)?;
                let options = EvaluateOptions {
                    tolerances: tolerances.clone(),
                    gt_sampling,
                    error_cloud_path: args
                        .export_colored
                        .then(|| args.out.join(format!("{}_error.ply", manifest.scene_id))),
                };
                let eval = evaluate_scene(&manifest, &options)?;
                Ok(SceneRecord::from_evaluation(&args.method, &eval))
            };
            run().map_err(|error| SceneFailure {
                manifest: path.clone(),
                error,
            })
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(record) => records.push(record),
            Err(failure) => failures.push(failure),
        }
    }

    for record in &records {
        write_scene_record(record, args.out.join(format!("{}.json", record.scene_id)))
            .map_err(|e| anyhow::anyhow!("{e}"))?;
    }

    if !records.is_empty() {
        let scenes = records
            .iter()
            .map(|r| (r.scene_id.clone(), r.metrics.clone()))
            .collect();
        let run = BenchmarkRun::new(&args.method, scenes).map_err(|e| anyhow::anyhow!("{e}"))?;
        let table =
            aggregate_runs(std::slice::from_ref(&run)).map_err(|e| anyhow::anyhow!("{e}"))?;
        write_csv(&table, args.out.join("summary.csv")).map_err(|e| anyhow::anyhow!("{e}"))?;
        write_markdown(&table, args.out.join("summary.md")).map_err(|e| anyhow::anyhow!("{e}"))?;
    }

    for failure in &failures {
        // One machine-readable line per failed scene on the diagnostic stream.
        eprintln!(
            "{}",
            serde_json::json!({
                "failed_manifest": failure.manifest.display().to_string(),
                "error": failure.error.to_string(),
            })
        );
    }

    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_register(args: RegisterArgs) -> anyhow::Result<ExitCode> {
    let manifest = recon_eval::read_manifest(&args.manifest).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (registered, registration) =
        register_scene(&manifest).map_err(|e| anyhow::anyhow!("{e}"))?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    write_ply_pointcloud(
        &registered,
        args.out
            .join(format!("{}_registered.ply", manifest.scene_id)),
        PlyFormat::BinaryLittleEndian,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let record = RegistrationRecord::new(&manifest.scene_id, &registration);
    write_registration_record(
        &record,
        args.out
            .join(format!("{}_registration.json", manifest.scene_id)),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    println!(
        "registered `{}`: scale {:.6}, rms residual {} mm",
        manifest.scene_id, record.transform.scale, record.rms_residual_mm
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_triple(text: &str, flag: &str) -> anyhow::Result<Point3> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|w| w.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("{flag} expects `x,y,z`, got `{text}`"))?;
    if parts.len() != 3 {
        bail!("{flag} expects exactly three comma-separated values");
    }
    Ok(Point3::new(parts[0], parts[1], parts[2]))
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<ExitCode> {
    if args.n == 0 {
        bail!("--n must be positive");
    }
    if !(0.0..1.0).contains(&args.dropout) {
        bail!("--dropout must lie in [0, 1)");
    }
    if args.noise_sigma < 0.0 || !args.noise_sigma.is_finite() {
        bail!("--noise-sigma must be non-negative");
    }

    let (gt, normals, gt_bounds) = match args.shape.as_str() {
        "sphere" => {
            if args.radius <= 0.0 {
                bail!("--radius must be positive");
            }
            let (cloud, normals) = make_sphere_cloud_with_normals(args.radius, args.n, args.seed);
            let r = args.radius;
            let bounds =
                AxisAlignedBox::new(Point3::new(-r, -r, -r), Point3::new(r, r, r)).unwrap();
            (cloud, normals, bounds)
        }
        "box" => {
            let min = parse_triple(&args.box_min, "--box-min")?;
            let max = parse_triple(&args.box_max, "--box-max")?;
            let bounds = AxisAlignedBox::new(min, max).map_err(|e| anyhow::anyhow!("{e}"))?;
            let (cloud, normals) = make_box_cloud_with_normals(&bounds, args.n, args.seed);
            (cloud, normals, bounds)
        }
        other => bail!("unknown shape `{other}`, expected `sphere` or `box`"),
    };

    let inflate = |b: &AxisAlignedBox, margin: f64| {
        AxisAlignedBox::new(
            Point3::new(b.min.x - margin, b.min.y - margin, b.min.z - margin),
            Point3::new(b.max.x + margin, b.max.y + margin, b.max.z + margin),
        )
        .unwrap()
    };
    let offset = recon_eval::nalgebra::Vector3::new(args.offset_x, args.offset_y, args.offset_z);
    let outlier_box = inflate(
        &gt_bounds,
        0.1 * (gt_bounds.max.x - gt_bounds.min.x).max(0.05),
    );
    let spec = DegradationSpec {
        normal_noise_sigma: args.noise_sigma,
        dropout_fraction: args.dropout,
        outlier_count: args.outliers,
        outlier_box,
        uniform_offset: offset,
        // Decoupled from the surface-sampling stream so dropout draws do not
        // correlate with point positions.
        seed: args.seed.wrapping_add(1),
    };
    let recon = degrade(&gt, &normals, &spec);

    // The crop box covers everything the generator can emit, so evaluations
    // of undegraded pairs see every point.
    let margin = 6.0 * args.noise_sigma
        + offset.norm()
        + 0.05 * (gt_bounds.max.x - gt_bounds.min.x).max(1.0);
    let crop_box = inflate(&outlier_box, margin);

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    write_ply_pointcloud(&gt, args.out.join("gt.ply"), PlyFormat::BinaryLittleEndian)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    write_ply_pointcloud(
        &recon,
        args.out.join("recon.ply"),
        PlyFormat::BinaryLittleEndian,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let manifest = SceneManifest {
        scene_id: format!("synth_{}_{}", args.shape, args.seed),
        reconstruction_path: PathBuf::from("recon.ply"),
        objects: vec![GroundTruthObject {
            mesh_path: PathBuf::from("gt.ply"),
            pose: RigidPose::identity(),
        }],
        crop_box,
        table_height: crop_box.min.z,
        marker_correspondences: None,
        tolerances_mm: vec![2.0, 5.0],
    };
    write_manifest(&manifest, args.out.join("manifest.json"))
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    println!(
        "wrote {} ({} gt points, {} reconstruction points)",
        args.out.display(),
        gt.len(),
        recon.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn collect_result_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("cannot list {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "json"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        bail!("no result JSON files found");
    }
    Ok(files)
}

fn cmd_report(args: ReportArgs) -> anyhow::Result<ExitCode> {
    let files = collect_result_files(&args.results)?;
    let mut records: Vec<SceneRecord> = Vec::new();
    for file in &files {
        records.push(read_scene_record(file).map_err(|e| anyhow::anyhow!("{e}"))?);
    }

    // Group records per method, keeping first-appearance order.
    let mut method_order: Vec<String> = Vec::new();
    for r in &records {
        if !method_order.contains(&r.method) {
            method_order.push(r.method.clone());
        }
    }
    let mut runs = Vec::new();
    for method in &method_order {
        let scenes: Vec<(String, _)> = records
            .iter()
            .filter(|r| &r.method == method)
            .map(|r| (r.scene_id.clone(), r.metrics.clone()))
            .collect();
        let ids: BTreeSet<&String> = scenes.iter().map(|(id, _)| id).collect();
        if ids.len() != scenes.len() {
            bail!("method `{method}` has duplicate scene ids in the inputs");
        }
        runs.push(BenchmarkRun::new(method, scenes).map_err(|e| anyhow::anyhow!("{e}"))?);
    }

    let table = aggregate_runs(&runs).map_err(|e| anyhow::anyhow!("{e}"))?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    write_csv(&table, args.out.join("summary.csv")).map_err(|e| anyhow::anyhow!("{e}"))?;
    write_markdown(&table, args.out.join("summary.md")).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!(
        "wrote {} ({} methods, {} scenes each)",
        args.out.join("summary.csv").display(),
        runs.len(),
        runs.first().map(|r| r.scenes.len()).unwrap_or(0)
    );
    Ok(ExitCode::SUCCESS)
}
