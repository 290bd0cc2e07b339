//! Command-line front end for the `pat` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_config, render_config};
use crate::error::{PatError, Result};
use crate::experiments::{
    run_delta_sweep_with, run_uncertainty_sweep_with, write_delta_outputs, write_sweep_outputs, Profile,
    SweepConfig,
};
use crate::filter::{BandPass, DEFAULT_ORDER};
use crate::forward_fd::{FdModel, FdStorage, FrequencyGrid};
use crate::forward_td::{TdModel, TofWindow};
use crate::geometry::{shepp_logan, AcousticConfig, GridSpec, SensorArray};
use crate::io;
use crate::metrics::pearson;
use crate::recon::{backproject, tikhonov_solve, ForwardModel, Measurement, Method, SolverSettings};
use crate::seed::{derive_seed, stream};
use crate::uncertainty::{add_complex_noise, add_noise, NoiseSpec};

/// Environment variable naming the default output directory for sweeps.
pub const OUT_DIR_ENV: &str = "PAT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "pat", version, about = "Photoacoustic tomography reconstruction and uncertainty studies")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed for every random draw; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a Shepp-Logan phantom.
    Phantom(PhantomArgs),
    /// Simulate detector data from an image.
    Forward(ForwardArgs),
    /// Reconstruct an image from detector data.
    Recon(ReconArgs),
    /// Monte-Carlo image quality versus sensor radius uncertainty.
    SweepUncertainty(SweepArgs),
    /// Operator sensitivity δ versus sensor radius offset.
    SweepDelta(SweepArgs),
    /// Image comparison metrics.
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Debug, Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 64)]
    nx: usize,
    #[arg(long, default_value_t = 64)]
    ny: usize,
    /// Side of the square field of view, m.
    #[arg(long, default_value_t = 30e-3)]
    side_length: f64,
    /// Output image (`.pgm` also writes an exact `.pgm.f64` copy).
    #[arg(short, long)]
    output: PathBuf,
    /// Also export the image as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Acquisition geometry; unset values come from the profile.
#[derive(Debug, Args, Serialize)]
struct GeometryArgs {
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
    /// Sensor positions as `x_m,y_m` CSV instead of a ring.
    #[arg(long)]
    sensors: Option<PathBuf>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    n_sensors: Option<usize>,
    #[arg(long)]
    vs: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    f_lo: Option<f64>,
    #[arg(long)]
    f_hi: Option<f64>,
    /// Out-of-record times of flight: refuse (strict) or drop (truncate).
    #[arg(long, value_enum)]
    tof_window: Option<WindowArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum WindowArg {
    Strict,
    Truncate,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum Domain {
    Td,
    Fd,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum MethodArg {
    Tdmm,
    Fdmm,
    Bp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Tdmm => Method::Tdmm,
            MethodArg::Fdmm => Method::Fdmm,
            MethodArg::Bp => Method::Bp,
        }
    }
}

struct Geometry {
    sensors: SensorArray,
    acoustic: AcousticConfig,
    window: TofWindow,
}

impl GeometryArgs {
    fn resolve(&self) -> Result<Geometry> {
        let base = SweepConfig::for_profile(match self.profile {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        });
        let acoustic = AcousticConfig {
            sound_speed: self.vs.unwrap_or(base.acoustic.sound_speed),
            dt: self.dt.unwrap_or(base.acoustic.dt),
            nt: self.nt.unwrap_or(base.acoustic.nt),
            f_lo: self.f_lo.unwrap_or(base.acoustic.f_lo),
            f_hi: self.f_hi.unwrap_or(base.acoustic.f_hi),
        };
        acoustic.validate()?;
        let sensors = match &self.sensors {
            Some(path) => io::read_sensors_csv(path)?,
            None => SensorArray::ring(
                self.radius.unwrap_or(base.radius),
                self.n_sensors.unwrap_or(base.n_sensors),
                [0.0, 0.0],
            )?,
        };
        let window = match self.tof_window {
            Some(WindowArg::Strict) => TofWindow::Strict,
            Some(WindowArg::Truncate) => TofWindow::Truncate,
            None => base.tof_window,
        };
        Ok(Geometry {
            sensors,
            acoustic,
            window,
        })
    }
}

#[derive(Debug, Args)]
struct ForwardArgs {
    #[arg(long, value_enum)]
    domain: Domain,
    /// Input image.
    #[arg(short, long)]
    image: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
    /// Apply the detector band-pass to the simulated data.
    #[arg(long)]
    bandpass: bool,
    /// Add Gaussian noise with this standard deviation relative to the peak.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Sinogram (tdmm, bp) or spectra (fdmm) file.
    #[arg(short, long)]
    data: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long, default_value_t = 30e-3)]
    side_length: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    /// Reference image; prints the Pearson correlation against it.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `out_dir` from the config and the PAT_OUT_DIR variable.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Suppress per-row progress on stderr.
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum MetricsCommand {
    /// Pearson correlation of two images.
    Pc { a: PathBuf, b: PathBuf },
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 for usage or input errors, 2 for numerical failures.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 2;
        }
    };
    let args_echo: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match pool.install(|| run(&cli, &args_echo)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                1
            } else {
                2
            }
        }
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct Manifest {
    started: f64,
    argv: Vec<String>,
}

impl Manifest {
    fn write(&self, path: &Path, body: serde_json::Value, outputs: &[PathBuf]) -> Result<()> {
        let mut doc = json!({
            "tool": "pat",
            "version": env!("CARGO_PKG_VERSION"),
            "argv": self.argv,
            "started_unix_s": self.started,
            "finished_unix_s": unix_now(),
            "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        });
        if let (Some(doc), serde_json::Value::Object(extra)) = (doc.as_object_mut(), body) {
            doc.extend(extra);
        }
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| PatError::io(path, e))
    }
}

fn manifest_path_for(output: &Path) -> PathBuf {
    io::sidecar_path(output, ".manifest.json")
}

fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    let manifest = Manifest {
        started: unix_now(),
        argv: argv.to_vec(),
    };
    match &cli.command {
        Command::Phantom(a) => {
            let img = shepp_logan(GridSpec::new(a.nx, a.ny, a.side_length)?);
            io::write_image(&a.output, &img)?;
            let mut outputs = vec![a.output.clone()];
            if let Some(csv) = &a.csv {
                io::write_image_csv(csv, &img)?;
                outputs.push(csv.clone());
            }
            manifest.write(
                &manifest_path_for(&a.output),
                json!({ "phantom": "shepp_logan", "nx": a.nx, "ny": a.ny, "side_length_m": a.side_length }),
                &outputs,
            )
        }
        Command::Forward(a) => forward(cli, a, &manifest),
        Command::Recon(a) => recon(a, &manifest),
        Command::SweepUncertainty(a) => sweep(cli, a, &manifest, false),
        Command::SweepDelta(a) => sweep(cli, a, &manifest, true),
        Command::Metrics(MetricsCommand::Pc { a, b }) => {
            let pc = pearson(&io::read_image(a)?, &io::read_image(b)?)?;
            println!("{pc:.12}");
            Ok(())
        }
    }
}

fn forward(cli: &Cli, a: &ForwardArgs, manifest: &Manifest) -> Result<()> {
    let img = io::read_image(&a.image)?;
    let g = a.geometry.resolve()?;
    let seed = cli.seed.unwrap_or(0);
    let filter = BandPass::new(g.acoustic.f_lo, g.acoustic.f_hi, 1.0 / g.acoustic.dt, DEFAULT_ORDER)?;
    let hash = io::geometry_hash(&img.spec, &g.sensors, &g.acoustic);
    let mut outputs = vec![a.output.clone()];
    match a.domain {
        Domain::Td => {
            let model = TdModel::assemble(img.spec, &g.sensors, &g.acoustic, g.window)?;
            let mut sino = model.forward(&img)?;
            if a.bandpass {
                sino = filter.apply_sinogram(&sino);
            }
            if let Some(f) = a.noise {
                sino = add_noise(&sino, &NoiseSpec::new(f, derive_seed(seed, &[stream::TIME_NOISE]))?)?;
            }
            io::write_sinogram(&a.output, &sino)?;
            if let Some(csv) = &a.csv {
                io::write_sinogram_csv(csv, &sino)?;
                outputs.push(csv.clone());
            }
        }
        Domain::Fd => {
            let freqs = FrequencyGrid::from_config(&g.acoustic)?;
            let model = FdModel::assemble(img.spec, &g.sensors, freqs, &g.acoustic, FdStorage::default())?;
            let mut spectra = model.forward(&img)?;
            if a.bandpass {
                spectra = filter.apply_spectra(&spectra);
            }
            if let Some(f) = a.noise {
                spectra = add_complex_noise(&spectra, &NoiseSpec::new(f, derive_seed(seed, &[stream::SPECTRAL_NOISE]))?)?;
            }
            io::write_spectra(&a.output, &spectra)?;
            if let Some(csv) = &a.csv {
                io::write_spectra_csv(csv, &spectra)?;
                outputs.push(csv.clone());
            }
        }
    }
    manifest.write(
        &manifest_path_for(&a.output),
        json!({
            "geometry": a.geometry,
            "geometry_hash": hash,
            "seed": seed,
            "bandpass": a.bandpass.then(|| filter.describe()),
            "noise_fraction": a.noise,
        }),
        &outputs,
    )
}

fn recon(a: &ReconArgs, manifest: &Manifest) -> Result<()> {
    let method = Method::from(a.method);
    let g = a.geometry.resolve()?;
    let settings = SolverSettings {
        alpha: a.alpha,
        max_iters: a.max_iters,
        rel_tolerance: a.rel_tol,
    };
    let base = SweepConfig::for_profile(match a.geometry.profile {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Paper => Profile::Paper,
    });
    let grid = GridSpec::new(
        a.nx.unwrap_or(base.grid.nx),
        a.ny.unwrap_or(base.grid.ny),
        a.side_length,
    )?;
    let result = match method {
        Method::Tdmm | Method::Bp => {
            let sino = io::read_sinogram(&a.data)?;
            let acoustic = AcousticConfig {
                dt: sino.dt,
                nt: sino.nt,
                ..g.acoustic
            };
            if method == Method::Bp {
                backproject(&sino, &g.sensors, grid, &acoustic)?
            } else {
                if sino.t0 != 0.0 {
                    return Err(PatError::invalid(
                        "the time-domain model assumes records that start at t = 0",
                    ));
                }
                let model = TdModel::assemble(grid, &g.sensors, &acoustic, g.window)?;
                tikhonov_solve(&ForwardModel::Td(model), &Measurement::Time(sino), &settings)?
            }
        }
        Method::Fdmm => {
            let spectra = io::read_spectra(&a.data)?;
            let acoustic = AcousticConfig {
                sound_speed: spectra.freqs.sound_speed,
                ..g.acoustic
            };
            let model = FdModel::assemble(grid, &g.sensors, spectra.freqs, &acoustic, FdStorage::default())?;
            tikhonov_solve(&ForwardModel::Fd(model), &Measurement::Spectral(spectra), &settings)?
        }
    };
    io::write_image(&a.output, &result.image)?;
    let mut outputs = vec![a.output.clone()];
    if let Some(csv) = &a.csv {
        io::write_image_csv(csv, &result.image)?;
        outputs.push(csv.clone());
    }
    let pc = match &a.reference {
        Some(r) => {
            let pc = pearson(&result.image, &io::read_image(r)?)?;
            println!("pc={pc:.12}");
            Some(pc)
        }
        None => None,
    };
    eprintln!(
        "{method}: {} iterations, relative residual {:.3e}",
        result.iterations_used, result.final_residual_norm
    );
    manifest.write(
        &manifest_path_for(&a.output),
        json!({
            "method": method,
            "geometry": a.geometry,
            "geometry_hash": io::geometry_hash(&grid, &g.sensors, &g.acoustic),
            "solver": settings,
            "iterations": result.iterations_used,
            "final_residual_norm": result.final_residual_norm,
            "pc_vs_reference": pc,
        }),
        &outputs,
    )
}

fn sweep(cli: &Cli, a: &SweepArgs, manifest: &Manifest, delta: bool) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = a
        .out_dir
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("pat_out"));
    let rendered = render_config(&cfg);
    let ring = cfg.ring()?;
    let common = json!({
        "config": rendered,
        "config_hash": io::sha256_hex(rendered.as_bytes()),
        "geometry_hash": io::geometry_hash(&cfg.grid, &ring, &cfg.acoustic),
        "seed": cfg.seed,
        "filter": cfg.bandpass()?.describe(),
        "noise_fraction": cfg.noise_fraction,
        "tof_window": cfg.tof_window,
    });
    let quiet = a.quiet;
    let outputs = if delta {
        let rows = run_delta_sweep_with(&cfg, |r| {
            if !quiet {
                eprintln!("x={}% delta_td={:.6} delta_fd={:.6}", r.x_percent, r.delta_td, r.delta_fd);
            }
        })?;
        vec![write_delta_outputs(&rows, &out_dir)?]
    } else {
        let result = run_uncertainty_sweep_with(&cfg, |r| {
            if !quiet {
                eprintln!(
                    "x={}% trial={} {} pc={:.4} iters={} {:.2}s",
                    r.x_percent, r.trial, r.method, r.pc, r.iterations, r.wall_time_s
                );
            }
        })?;
        for s in &result.summary {
            println!("x={}% {} mean_pc={:.4} std={:.4}", s.x_percent, s.method, s.mean_pc, s.std_pc);
        }
        write_sweep_outputs(&result, &out_dir)?
    };
    let name = if delta { "sweep_delta" } else { "sweep_uncertainty" };
    manifest.write(&out_dir.join(format!("{name}.manifest.json")), common, &outputs)
}
