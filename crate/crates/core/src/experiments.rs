//! Monte-Carlo uncertainty sweeps and δ-metric sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::filter::{BandPass, DEFAULT_ORDER};
use crate::forward_fd::{FdModel, FdStorage, FrequencyGrid, SpectralData};
use crate::forward_td::{Sinogram, TdModel, TofWindow};
use crate::geometry::{shepp_logan, AcousticConfig, GridSpec, ImageGrid, PerturbMode, SensorArray};
use crate::io::write_image;
use crate::metrics::{delta_of, pearson, spectral_norm};
use crate::recon::{backproject, tikhonov_solve, ForwardModel, Measurement, Method, SolverSettings};
use crate::seed::{derive_seed, stream};
use crate::uncertainty::{add_complex_noise, add_noise, NoiseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = PatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(PatError::invalid(format!(
                "unknown profile '{other}' (expected desk or paper)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub profile: Profile,
    pub grid: GridSpec,
    pub radius: f64,
    pub n_sensors: usize,
    pub acoustic: AcousticConfig,
    pub x_percents: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub mode: PerturbMode,
    pub seed: u64,
    pub solver: SolverSettings,
    pub noise_fraction: f64,
    pub tof_window: TofWindow,
    /// Relative tolerance and cap for the power iterations of the δ sweep.
    pub power_tol: f64,
    pub power_max_iters: usize,
    pub out_dir: Option<PathBuf>,
}

impl SweepConfig {
    /// 32×32 grid, 60 sensors, 1024 samples of 30 ns, band 0.1 to 2 MHz.
    ///
    /// The fine step keeps the time-domain discretization close to the
    /// frequency-domain model over the whole band; runs in minutes.
    pub fn desk() -> Self {
        Self {
            profile: Profile::Desk,
            grid: GridSpec {
                nx: 32,
                ny: 32,
                side_length: 30e-3,
            },
            radius: 22.5e-3,
            n_sensors: 60,
            acoustic: AcousticConfig {
                sound_speed: 1500.0,
                dt: 30e-9,
                nt: 1024,
                f_lo: 0.1e6,
                f_hi: 2e6,
            },
            x_percents: vec![0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 5.0, 10.0],
            trials: 10,
            methods: Method::ALL.to_vec(),
            mode: PerturbMode::Common,
            seed: 2021,
            solver: SolverSettings::default(),
            noise_fraction: 0.01,
            tof_window: TofWindow::Strict,
            power_tol: 1e-6,
            power_max_iters: 10_000,
            out_dir: None,
        }
    }

    /// 64×64 grid, 120 sensors, 420 samples of 50 ns, 50 trials.
    ///
    /// The 21 µs record is shorter than the longest time of flight across
    /// the 30 mm field, so late arrivals are truncated.
    pub fn paper() -> Self {
        Self {
            profile: Profile::Paper,
            grid: GridSpec {
                nx: 64,
                ny: 64,
                side_length: 30e-3,
            },
            n_sensors: 120,
            acoustic: AcousticConfig {
                sound_speed: 1500.0,
                dt: 50e-9,
                nt: 420,
                f_lo: 0.1e6,
                f_hi: 20e6,
            },
            trials: 50,
            tof_window: TofWindow::Truncate,
            ..Self::desk()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.acoustic.validate()?;
        self.solver.validate()?;
        GridSpec::new(self.grid.nx, self.grid.ny, self.grid.side_length)?;
        if !(self.radius > 0.0) {
            return Err(PatError::invalid(format!("radius must be positive, got {}", self.radius)));
        }
        if self.n_sensors == 0 {
            return Err(PatError::invalid("n_sensors must be at least 1"));
        }
        if self.x_percents.is_empty() {
            return Err(PatError::invalid("x_percents is empty"));
        }
        if let Some(x) = self.x_percents.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(PatError::invalid(format!("uncertainty {x}% is negative or not finite")));
        }
        if self.trials == 0 {
            return Err(PatError::invalid("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(PatError::invalid("methods is empty"));
        }
        NoiseSpec::new(self.noise_fraction, 0)?;
        Ok(())
    }

    pub fn ring(&self) -> Result<SensorArray> {
        SensorArray::ring(self.radius, self.n_sensors, [0.0, 0.0])
    }

    pub fn bandpass(&self) -> Result<BandPass> {
        BandPass::new(self.acoustic.f_lo, self.acoustic.f_hi, 1.0 / self.acoustic.dt, DEFAULT_ORDER)
    }

    /// Seed for one trial; independent of every other trial.
    pub fn trial_seed(&self, x_percent: f64, trial: usize) -> u64 {
        derive_seed(self.seed, &[x_percent.to_bits(), trial as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub x_percent: f64,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub pc: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub x_percent: f64,
    pub method: Method,
    pub mean_pc: f64,
    pub std_pc: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct AveragedImage {
    pub x_percent: f64,
    pub method: Method,
    pub image: ImageGrid,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
    pub averages: Vec<AveragedImage>,
}

impl SweepResult {
    pub fn mean_pc(&self, x_percent: f64, method: Method) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.x_percent == x_percent && s.method == method)
            .map(|s| s.mean_pc)
    }
}

/// Data generated once with the true models and shared by all trials.
struct Truth {
    phantom: ImageGrid,
    ring: SensorArray,
    td: Option<Sinogram>,
    fd: Option<SpectralData>,
    freqs: Option<FrequencyGrid>,
}

fn prepare(cfg: &SweepConfig) -> Result<Truth> {
    let phantom = shepp_logan(cfg.grid);
    let ring = cfg.ring()?;
    let filter = cfg.bandpass()?;
    let needs_td = cfg.methods.iter().any(|m| matches!(m, Method::Tdmm | Method::Bp));
    let needs_fd = cfg.methods.contains(&Method::Fdmm);
    let td = if needs_td {
        let model = TdModel::assemble(cfg.grid, &ring, &cfg.acoustic, cfg.tof_window)?;
        Some(filter.apply_sinogram(&model.forward(&phantom)?))
    } else {
        None
    };
    let (fd, freqs) = if needs_fd {
        let freqs = FrequencyGrid::from_config(&cfg.acoustic)?;
        let model = FdModel::assemble(cfg.grid, &ring, freqs, &cfg.acoustic, FdStorage::MatrixFree)?;
        (Some(filter.apply_spectra(&model.forward(&phantom)?)), Some(freqs))
    } else {
        (None, None)
    };
    Ok(Truth {
        phantom,
        ring,
        td,
        fd,
        freqs,
    })
}

fn run_trial(cfg: &SweepConfig, truth: &Truth, x_percent: f64, trial: usize) -> Result<Vec<(TrialRow, ImageGrid)>> {
    let seed = cfg.trial_seed(x_percent, trial);
    let wrap = |method: Method, e: PatError| PatError::Trial {
        x_percent,
        trial,
        method: method.to_string(),
        source: Box::new(e),
    };
    let perturbed = truth
        .ring
        .perturb_radius(x_percent, cfg.mode, derive_seed(seed, &[stream::PERTURBATION]))
        .map_err(|e| wrap(cfg.methods[0], e))?;
    let td_noisy = match &truth.td {
        Some(clean) => Some(add_noise(
            clean,
            &NoiseSpec::new(cfg.noise_fraction, derive_seed(seed, &[stream::TIME_NOISE]))?,
        )?),
        None => None,
    };
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let result = (|| -> Result<_> {
            match method {
                Method::Tdmm => {
                    let model = TdModel::assemble(cfg.grid, &perturbed, &cfg.acoustic, cfg.tof_window)?;
                    let data = Measurement::Time(td_noisy.clone().expect("time data prepared"));
                    tikhonov_solve(&ForwardModel::Td(model), &data, &cfg.solver)
                }
                Method::Fdmm => {
                    let clean = truth.fd.as_ref().expect("spectra prepared");
                    let noise = NoiseSpec::new(cfg.noise_fraction, derive_seed(seed, &[stream::SPECTRAL_NOISE]))?;
                    let data = Measurement::Spectral(add_complex_noise(clean, &noise)?);
                    let freqs = truth.freqs.expect("frequencies prepared");
                    let model = FdModel::assemble(cfg.grid, &perturbed, freqs, &cfg.acoustic, FdStorage::default())?;
                    tikhonov_solve(&ForwardModel::Fd(model), &data, &cfg.solver)
                }
                Method::Bp => backproject(
                    td_noisy.as_ref().expect("time data prepared"),
                    &perturbed,
                    cfg.grid,
                    &cfg.acoustic,
                ),
            }
        })()
        .map_err(|e| wrap(method, e))?;
        let pc = pearson(&result.image, &truth.phantom).map_err(|e| wrap(method, e))?;
        out.push((
            TrialRow {
                x_percent,
                trial,
                seed,
                method,
                pc,
                iterations: result.iterations_used,
                wall_time_s: start.elapsed().as_secs_f64(),
            },
            result.image,
        ));
    }
    Ok(out)
}

pub fn run_uncertainty_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    run_uncertainty_sweep_with(cfg, |_| {})
}

/// Runs the sweep, calling `on_row` as each reconstruction finishes.
pub fn run_uncertainty_sweep_with<F>(cfg: &SweepConfig, on_row: F) -> Result<SweepResult>
where
    F: Fn(&TrialRow) + Sync,
{
    cfg.validate()?;
    let truth = prepare(cfg)?;
    let jobs: Vec<(f64, usize)> = cfg
        .x_percents
        .iter()
        .flat_map(|&x| (0..cfg.trials).map(move |t| (x, t)))
        .collect();
    let per_trial: Vec<Vec<(TrialRow, ImageGrid)>> = jobs
        .par_iter()
        .map(|&(x, t)| {
            let rows = run_trial(cfg, &truth, x, t)?;
            rows.iter().for_each(|(r, _)| on_row(r));
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut flat: Vec<(TrialRow, ImageGrid)> = per_trial.into_iter().flatten().collect();
    flat.sort_by(|(a, _), (b, _)| {
        a.x_percent
            .total_cmp(&b.x_percent)
            .then(a.trial.cmp(&b.trial))
            .then(a.method.cmp(&b.method))
    });

    let mut groups: BTreeMap<(u64, Method), (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (row, img) in &flat {
        let entry = groups
            .entry((row.x_percent.to_bits(), row.method))
            .or_insert_with(|| (row.x_percent, Vec::new(), vec![0.0; img.len()]));
        entry.1.push(row.pc);
        entry.2.iter_mut().zip(&img.values).for_each(|(a, v)| *a += v);
    }
    let mut summary = Vec::new();
    let mut averages = Vec::new();
    for ((_, method), (x, pcs, sum)) in groups {
        let n = pcs.len() as f64;
        let mean = pcs.iter().sum::<f64>() / n;
        let var = if pcs.len() > 1 {
            pcs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        summary.push(SummaryRow {
            x_percent: x,
            method,
            mean_pc: mean,
            std_pc: var.sqrt(),
            trials: pcs.len(),
        });
        averages.push(AveragedImage {
            x_percent: x,
            method,
            image: ImageGrid {
                spec: cfg.grid,
                values: sum.into_iter().map(|v| v / n).collect(),
            },
        });
    }
    let by_x = |a: &f64, b: &f64| a.total_cmp(b);
    summary.sort_by(|a, b| by_x(&a.x_percent, &b.x_percent).then(a.method.cmp(&b.method)));
    averages.sort_by(|a, b| by_x(&a.x_percent, &b.x_percent).then(a.method.cmp(&b.method)));
    Ok(SweepResult {
        rows: flat.into_iter().map(|(r, _)| r).collect(),
        summary,
        averages,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub x_percent: f64,
    pub delta_td: f64,
    pub delta_fd: f64,
}

/// δ of the time- and frequency-domain models for every X in the config.
///
/// Both models are applied matrix-free; `‖M‖` is computed once per domain.
pub fn run_delta_sweep(cfg: &SweepConfig) -> Result<Vec<DeltaRow>> {
    run_delta_sweep_with(cfg, |_| {})
}

pub fn run_delta_sweep_with<F>(cfg: &SweepConfig, on_row: F) -> Result<Vec<DeltaRow>>
where
    F: Fn(&DeltaRow),
{
    cfg.validate()?;
    if !cfg.mode.is_deterministic() {
        return Err(PatError::invalid(format!(
            "the delta sweep needs a deterministic perturbation mode, got {}",
            cfg.mode
        )));
    }
    let ring = cfg.ring()?;
    let freqs = FrequencyGrid::from_config(&cfg.acoustic)?;
    let td = TdModel::assemble(cfg.grid, &ring, &cfg.acoustic, cfg.tof_window)?;
    let fd = FdModel::assemble(cfg.grid, &ring, freqs, &cfg.acoustic, FdStorage::MatrixFree)?;
    let (tol, cap) = (cfg.power_tol, cfg.power_max_iters);
    let norm_td = spectral_norm(&td, tol, cap)?;
    let norm_fd = spectral_norm(&fd, tol, cap)?;
    let mut rows = Vec::with_capacity(cfg.x_percents.len());
    for &x in &cfg.x_percents {
        let moved = ring.perturb_radius(x, cfg.mode, cfg.seed)?;
        let td_n = TdModel::assemble(cfg.grid, &moved, &cfg.acoustic, cfg.tof_window)?;
        let fd_n = FdModel::assemble(cfg.grid, &moved, freqs, &cfg.acoustic, FdStorage::MatrixFree)?;
        let row = DeltaRow {
            x_percent: x,
            delta_td: delta_with_norm(&td, &td_n, norm_td, tol, cap)?,
            delta_fd: delta_with_norm(&fd, &fd_n, norm_fd, tol, cap)?,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

fn delta_with_norm<A, B>(m: &A, mn: &B, norm: f64, tol: f64, cap: usize) -> Result<f64>
where
    A: crate::operator::LinearOperator,
    B: crate::operator::LinearOperator<Scalar = A::Scalar>,
{
    let diff = spectral_norm(&crate::operator::Difference::new(m, mn), tol, cap)?;
    Ok(diff / norm)
}

/// Same as [`run_delta_sweep`] but recomputes `‖M‖` for every X through
/// [`delta_of`]; used to cross-check the cached norm.
pub fn delta_at(cfg: &SweepConfig, x_percent: f64) -> Result<DeltaRow> {
    let ring = cfg.ring()?;
    let moved = ring.perturb_radius(x_percent, cfg.mode, cfg.seed)?;
    let freqs = FrequencyGrid::from_config(&cfg.acoustic)?;
    let (tol, cap) = (cfg.power_tol, cfg.power_max_iters);
    let td = TdModel::assemble(cfg.grid, &ring, &cfg.acoustic, cfg.tof_window)?;
    let td_n = TdModel::assemble(cfg.grid, &moved, &cfg.acoustic, cfg.tof_window)?;
    let fd = FdModel::assemble(cfg.grid, &ring, freqs, &cfg.acoustic, FdStorage::MatrixFree)?;
    let fd_n = FdModel::assemble(cfg.grid, &moved, freqs, &cfg.acoustic, FdStorage::MatrixFree)?;
    Ok(DeltaRow {
        x_percent,
        delta_td: delta_of(&td, &td_n, tol, cap)?,
        delta_fd: delta_of(&fd, &fd_n, tol, cap)?,
    })
}

pub const TRIALS_HEADER: &str = "x_percent,trial,seed,method,pc,iterations,wall_time_s";
pub const SUMMARY_HEADER: &str = "x_percent,method,mean_pc,std_pc,trials";
pub const DELTA_HEADER: &str = "x_percent,delta_td,delta_fd";

pub fn trials_csv(rows: &[TrialRow]) -> String {
    let mut s = String::from(TRIALS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:?},{},{:.6}",
            r.x_percent, r.trial, r.seed, r.method, r.pc, r.iterations, r.wall_time_s
        );
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{:?},{:?},{}", r.x_percent, r.method, r.mean_pc, r.std_pc, r.trials);
    }
    s
}

pub fn delta_csv(rows: &[DeltaRow]) -> String {
    let mut s = String::from(DELTA_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{:?},{:?}", r.x_percent, r.delta_td, r.delta_fd);
    }
    s
}

pub fn average_image_name(method: Method, x_percent: f64) -> String {
    format!("avg_{method}_x{x_percent}.pgm")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| PatError::io(path, e))
}

/// Writes `sweep_uncertainty.csv`, `sweep_uncertainty_summary.csv` and the
/// averaged images into `dir`; returns the written paths.
pub fn write_sweep_outputs(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| PatError::io(dir, e))?;
    let mut written = Vec::new();
    let trials = dir.join("sweep_uncertainty.csv");
    write_text(&trials, &trials_csv(&result.rows))?;
    written.push(trials);
    let summary = dir.join("sweep_uncertainty_summary.csv");
    write_text(&summary, &summary_csv(&result.summary))?;
    written.push(summary);
    for avg in &result.averages {
        let path = dir.join(average_image_name(avg.method, avg.x_percent));
        write_image(&path, &avg.image)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_delta_outputs(rows: &[DeltaRow], dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| PatError::io(dir, e))?;
    let path = dir.join("sweep_delta.csv");
    write_text(&path, &delta_csv(rows))?;
    Ok(path)
}

/// Drops the wall-time column so that two runs can be compared byte-wise.
pub fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
