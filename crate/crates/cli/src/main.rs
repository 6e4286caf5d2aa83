//! `polclust`: cluster 2-D datasets by embedding them as polarization states,
//! optimizing a variational waveplate stack, and reading the results back,
//! with dataset generation, landscape scans, and a device protocol server.

mod config;
mod svg;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use polclust_core::clustering::ClusterProblem;
use polclust_core::datasets::{
    gaussian_blobs, load_dataset, save_blob_metadata, save_dataset, BlobSpec, Dataset, Layout,
};
use polclust_core::embedding::{
    build_lut, fit_embedding, EmbedMode, DEFAULT_LUT_RESOLUTION, DEFAULT_MARGIN,
};
use polclust_core::hardware::protocol::serve_device;
use polclust_core::hardware::SimulatedDevice;
use polclust_core::landscape::{scan, ScanSpec};
use polclust_core::optimizer::{optimize, optimize_on_device, traces_to_csv, RunResult};
use polclust_core::{CircuitParams, Error, Result};

use config::FileConfig;

const DEFAULT_LAYERS: usize = 2;
const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Parser)]
#[command(name = "polclust", version, about = "Variational clustering on simulated polarization optics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian-blob dataset CSV (plus a metadata sidecar).
    Gen(GenArgs),
    /// Cluster a dataset and write assignments, traces, and figures.
    Cluster(Box<ClusterArgs>),
    /// Scan the cost over two parameters and write the heatmap.
    Landscape(Box<LandscapeArgs>),
    /// Serve a simulated device over the wire protocol.
    ServeDevice(ServeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of blobs.
    #[arg(long)]
    k: usize,
    /// Points per blob.
    #[arg(long)]
    n: usize,
    /// Separation ratio d/σ between blob centers.
    #[arg(long = "d-over-sigma")]
    d_over_sigma: f64,
    /// Blob standard deviation in feature units.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Center arrangement.
    #[arg(long, value_enum, default_value_t = LayoutArg::Ring)]
    layout: LayoutArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Ring,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeviceArg {
    /// Pure Jones pipeline.
    Ideal,
    /// Through the simulated bench (quantization, retardance errors, noise).
    Noisy,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedModeArg {
    Analytic,
    Lut,
}

/// Flags shared by `cluster` and `landscape` for sourcing the dataset.
#[derive(Args)]
struct DataArgs {
    /// Dataset CSV (header `x,y[,label]`).
    #[arg(long, conflicts_with_all = ["gen_k", "gen_n", "gen_d_over_sigma", "gen_seed"])]
    data: Option<PathBuf>,
    /// Generate blobs in-memory instead of reading --data: blob count.
    #[arg(long, requires_all = ["gen_n", "gen_d_over_sigma"])]
    gen_k: Option<usize>,
    /// Points per generated blob.
    #[arg(long)]
    gen_n: Option<usize>,
    /// Separation ratio of the generated blobs.
    #[arg(long)]
    gen_d_over_sigma: Option<f64>,
    /// Seed for the generated blobs.
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        match (&self.data, self.gen_k) {
            (Some(path), _) => load_dataset(path),
            (None, Some(k)) => gaussian_blobs(&BlobSpec {
                k,
                n_per_blob: self.gen_n.expect("clap requires gen_n"),
                d_over_sigma: self.gen_d_over_sigma.expect("clap requires gen_d_over_sigma"),
                sigma: 1.0,
                layout: Layout::Ring,
                seed: self.gen_seed,
            }),
            (None, None) => Err(Error::InvalidArgument(
                "either --data or --gen-k/--gen-n/--gen-d-over-sigma is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct ProblemArgs {
    /// Cluster count (defaults to the dataset's label count when present).
    #[arg(short, long)]
    k: Option<usize>,
    /// Regularization weight λ of the centroid-distance term.
    #[arg(long)]
    lambda: Option<f64>,
    /// Variational layers m (one layer = one QWP + one HWP).
    #[arg(short = 'm', long)]
    layers: Option<usize>,
    /// Embedding margin fraction inside the sphere window.
    #[arg(long)]
    margin: Option<f64>,
    /// Angle source for state preparation.
    #[arg(long, value_enum)]
    embed_mode: Option<EmbedModeArg>,
    /// Look-up-table grid step in radians (lut mode).
    #[arg(long)]
    lut_resolution: Option<f64>,
    /// Drop the i = j terms of the cost's double sum.
    #[arg(long)]
    exclude_diagonal: bool,
}

#[derive(Args)]
struct OptimizerArgs {
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    mc_step: Option<f64>,
    #[arg(long)]
    mc_temperature: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    fd_eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DeviceArgs {
    /// Execution backend.
    #[arg(long, value_enum)]
    device: Option<DeviceArg>,
    /// Rotary-stage resolution, degrees.
    #[arg(long)]
    angle_quantum: Option<f64>,
    /// Rotary-stage speed, degrees per second.
    #[arg(long)]
    max_speed: Option<f64>,
    /// Polarimeter noise std-dev per Stokes component.
    #[arg(long)]
    stokes_sigma: Option<f64>,
    #[arg(long)]
    hwp_retardance_error: Option<f64>,
    #[arg(long)]
    qwp_retardance_error: Option<f64>,
    #[arg(long)]
    device_seed: Option<u64>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[command(flatten)]
    device: DeviceArgs,
    /// Min-max normalize the cost-evolution figure to [0, 1].
    #[arg(long)]
    normalize_cost: bool,
    /// JSON config file (CLI flags take precedence).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    outdir: PathBuf,
}

#[derive(Args)]
struct LandscapeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    /// The two scanned parameter indices, e.g. `0,1`.
    #[arg(long, default_value = "0,1")]
    axes: String,
    /// Axis-0 range `lo:hi` in radians (default one plate period).
    #[arg(long)]
    range0: Option<String>,
    /// Axis-1 range `lo:hi` in radians.
    #[arg(long)]
    range1: Option<String>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    /// Fixed values of the non-scanned parameters, comma separated.
    #[arg(long)]
    base: Option<String>,
    /// Overlay this many single-restart optimization trajectories.
    #[arg(long, default_value_t = 0)]
    overlay: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file (CLI flags take precedence).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    outdir: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:7878")]
    bind: String,
    /// Number of plates on the bench (preparation pair + 2 per layer).
    #[arg(long, default_value_t = 2 + 2 * DEFAULT_LAYERS)]
    plates: usize,
    #[command(flatten)]
    device: DeviceArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Cluster(args) => cmd_cluster(*args),
        Command::Landscape(args) => cmd_landscape(*args),
        Command::ServeDevice(args) => cmd_serve_device(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::UnsupportedK(_)
                | Error::UnsupportedDimension(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = BlobSpec {
        k: args.k,
        n_per_blob: args.n,
        d_over_sigma: args.d_over_sigma,
        sigma: args.sigma,
        layout: match args.layout {
            LayoutArg::Ring => Layout::Ring,
            LayoutArg::Grid => Layout::Grid,
        },
        seed: args.seed,
    };
    let dataset = gaussian_blobs(&spec)?;
    save_dataset(&dataset, &args.output)?;
    save_blob_metadata(&spec, sidecar_path(&args.output))?;
    println!(
        "wrote {} points ({} blobs, d/sigma = {}, seed {}) to {}",
        dataset.len(),
        spec.k,
        spec.d_over_sigma,
        spec.seed,
        args.output.display()
    );
    Ok(())
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    csv.with_file_name(name)
}

struct ResolvedProblem {
    problem: ClusterProblem,
    layers: usize,
}

fn build_problem(
    dataset: Dataset,
    args: &ProblemArgs,
    file: &FileConfig,
) -> Result<ResolvedProblem> {
    let k = match args.k.or(file.k) {
        Some(k) => k,
        None => {
            let truth = dataset.truth_labels().ok_or_else(|| {
                Error::InvalidArgument(
                    "--k is required when the dataset carries no labels".into(),
                )
            })?;
            truth.iter().max().map_or(1, |m| m + 1)
        }
    };
    let lambda = config::layer(args.lambda, file.lambda, DEFAULT_LAMBDA);
    let layers = config::layer(args.layers, file.layers, DEFAULT_LAYERS);
    let margin = config::layer(args.margin, file.margin, DEFAULT_MARGIN);
    let map = fit_embedding(&dataset, margin)?;

    let mode_is_lut = match (&args.embed_mode, &file.embed_mode) {
        (Some(EmbedModeArg::Lut), _) => true,
        (Some(EmbedModeArg::Analytic), _) => false,
        (None, Some(s)) if s == "lut" => true,
        (None, Some(s)) if s == "analytic" => false,
        (None, Some(other)) => {
            return Err(Error::InvalidArgument(format!(
                "config embed_mode `{other}` (expected analytic|lut)"
            )))
        }
        (None, None) => false,
    };
    let mut problem = if mode_is_lut {
        let resolution =
            config::layer(args.lut_resolution, file.lut_resolution, DEFAULT_LUT_RESOLUTION);
        let lut = build_lut(resolution)?;
        ClusterProblem::new(dataset, k, lambda, layers, map, EmbedMode::Lut(&lut))?
    } else {
        ClusterProblem::new(dataset, k, lambda, layers, map, EmbedMode::Analytic)?
    };
    if args.exclude_diagonal || file.exclude_diagonal == Some(true) {
        problem.set_exclude_diagonal(true);
    }
    Ok(ResolvedProblem { problem, layers })
}

fn run_optimization(
    problem: &ClusterProblem,
    layers: usize,
    opt_args: &OptimizerArgs,
    dev_args: &DeviceArgs,
    file: &FileConfig,
) -> Result<RunResult> {
    let cfg = config::optimizer_config(
        file,
        opt_args.restarts,
        opt_args.mc_samples,
        opt_args.mc_step,
        opt_args.mc_temperature,
        opt_args.lr,
        opt_args.fd_eps,
        opt_args.max_iters,
        opt_args.rel_tol,
        opt_args.patience,
        opt_args.seed,
    );
    let noisy = match (&dev_args.device, file.device.as_deref()) {
        (Some(DeviceArg::Noisy), _) => true,
        (Some(DeviceArg::Ideal), _) => false,
        (None, Some("noisy")) => true,
        (None, Some("ideal")) | (None, None) => false,
        (None, Some(other)) => {
            return Err(Error::InvalidArgument(format!(
                "config device `{other}` (expected ideal|noisy)"
            )))
        }
    };
    if noisy {
        let device_cfg = config::device_config(
            file,
            dev_args.angle_quantum,
            dev_args.max_speed,
            dev_args.stokes_sigma,
            dev_args.hwp_retardance_error,
            dev_args.qwp_retardance_error,
            dev_args.device_seed,
        );
        let mut device = SimulatedDevice::new(2 + 2 * layers, device_cfg)?;
        optimize_on_device(problem, &mut device, &cfg)
    } else {
        optimize(problem, &cfg)
    }
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let dataset = args.data.load()?;
    let resolved = build_problem(dataset, &args.problem, &file)?;
    let result = run_optimization(
        &resolved.problem,
        resolved.layers,
        &args.optimizer,
        &args.device,
        &file,
    )?;

    std::fs::create_dir_all(&args.outdir)?;
    let diagnostics = result.report.diagnostics();
    write(
        &args.outdir.join("assignments.json"),
        serde_json::to_string_pretty(&diagnostics)? + "\n",
    )?;
    write(
        &args.outdir.join("best_params.json"),
        serde_json::to_string_pretty(&result.best_params)? + "\n",
    )?;
    write(&args.outdir.join("trace.csv"), traces_to_csv(&result.traces))?;
    write(
        &args.outdir.join("clusters.svg"),
        svg::cluster_scatter(
            resolved.problem.dataset(),
            result.report.assignment.labels(),
            result.report.centroids.points(),
        ),
    )?;
    let normalize = args.normalize_cost || file.normalize_cost == Some(true);
    let curves: Vec<Vec<f64>> = result
        .traces
        .iter()
        .map(|t| t.best_so_far())
        .collect();
    write(
        &args.outdir.join("cost_evolution.svg"),
        svg::cost_evolution(&curves, normalize),
    )?;

    println!("final cost: {:.6}", result.report.value);
    match result.success_ratio {
        Some(ratio) => println!("success ratio: {ratio}"),
        None => println!("success ratio: unavailable (dataset has no labels)"),
    }
    println!("outputs in {}", args.outdir.display());
    Ok(())
}

fn parse_pair<T: std::str::FromStr>(s: &str, sep: char, what: &str) -> Result<(T, T)> {
    let parts: Vec<&str> = s.split(sep).collect();
    if parts.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "{what} must be two values separated by `{sep}`, got `{s}`"
        )));
    }
    let a = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad {what} component `{}`", parts[0])))?;
    let b = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad {what} component `{}`", parts[1])))?;
    Ok((a, b))
}

fn cmd_landscape(args: LandscapeArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let dataset = args.data.load()?;
    let resolved = build_problem(dataset, &args.problem, &file)?;

    let base = match &args.base {
        None => CircuitParams::from_flat(&vec![0.0; 2 * resolved.layers])?,
        Some(list) => {
            let values: std::result::Result<Vec<f64>, _> =
                list.split(',').map(|v| v.trim().parse::<f64>()).collect();
            CircuitParams::from_flat(&values.map_err(|e| {
                Error::InvalidArgument(format!("bad --base value: {e}"))
            })?)?
        }
    };
    let axes = parse_pair::<usize>(&args.axes, ',', "--axes")?;
    let range0 = match &args.range0 {
        Some(r) => parse_pair::<f64>(r, ':', "--range0")?,
        None => (0.0, PI),
    };
    let range1 = match &args.range1 {
        Some(r) => parse_pair::<f64>(r, ':', "--range1")?,
        None => (0.0, PI),
    };

    let spec = ScanSpec {
        problem: &resolved.problem,
        base,
        axes,
        ranges: [range0, range1],
        resolution: args.resolution,
    };
    let mut result = scan(&spec)?;

    if args.overlay > 0 {
        let cfg = config::optimizer_config(
            &file,
            Some(args.overlay),
            None,
            None,
            None,
            None,
            None,
            None,
            None,
            None,
            args.seed,
        );
        let run = optimize(&resolved.problem, &cfg)?;
        for trace in &run.traces {
            result.overlay_trajectory(trace);
        }
    }

    std::fs::create_dir_all(&args.outdir)?;
    write(&args.outdir.join("scan.csv"), result.matrix_to_csv())?;
    write(&args.outdir.join("scan.json"), result.sidecar_json()? + "\n")?;
    write(
        &args.outdir.join("landscape.svg"),
        svg::landscape_heatmap(&result),
    )?;
    println!(
        "scanned {}×{} nodes over axes {:?}; outputs in {}",
        args.resolution,
        args.resolution,
        axes,
        args.outdir.display()
    );
    Ok(())
}

fn cmd_serve_device(args: ServeArgs) -> Result<()> {
    let file = FileConfig::default();
    let device_cfg = config::device_config(
        &file,
        args.device.angle_quantum,
        args.device.max_speed,
        args.device.stokes_sigma,
        args.device.hwp_retardance_error,
        args.device.qwp_retardance_error,
        args.device.device_seed,
    );
    let device = SimulatedDevice::new(args.plates, device_cfg)?;
    let server = serve_device(device, args.bind.as_str(), true)?;
    println!("device server listening on {}", server.local_addr());
    // Serve until the process is interrupted.
    loop {
        std::thread::park();
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}
