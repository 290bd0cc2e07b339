//! Time-domain model matrix `A = A_oa · A_s`.
//!
//! `A_s` maps pixels to time-of-flight bins: pixel `j` contributes to exactly
//! one sample per detector, the bin whose half-open window contains
//! `|r_d - r_j| / v_s`, with weight `ΔV / (4π v_s² Δt² |r_d - r_j|)`.
//! `A_oa` is a per-detector central difference in time.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::geometry::{distance, AcousticConfig, GridSpec, ImageGrid, SensorArray};
use crate::operator::LinearOperator;

/// What to do with a time of flight that falls outside the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TofWindow {
    /// Refuse to assemble.
    #[default]
    Strict,
    /// Drop the sensor–pixel pair; the pixel is unseen by that sensor.
    Truncate,
}

/// Detector data, `n_sensors × nt`, sensor-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub n_sensors: usize,
    pub nt: usize,
    pub dt: f64,
    pub t0: f64,
    pub data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(n_sensors: usize, nt: usize, dt: f64) -> Self {
        Self {
            n_sensors,
            nt,
            dt,
            t0: 0.0,
            data: vec![0.0; n_sensors * nt],
        }
    }

    pub fn from_data(n_sensors: usize, nt: usize, dt: f64, t0: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_sensors * nt {
            return Err(PatError::DimensionMismatch {
                what: "sinogram data",
                expected: n_sensors * nt,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(PatError::NonFinite("sinogram"));
        }
        Ok(Self {
            n_sensors,
            nt,
            dt,
            t0,
            data,
        })
    }

    pub fn trace(&self, l: usize) -> &[f64] {
        &self.data[l * self.nt..(l + 1) * self.nt]
    }

    pub fn trace_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.data[l * self.nt..(l + 1) * self.nt]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Index of the sample window `[t_k - Δt/2, t_k + Δt/2)` containing `tof`.
/// A time exactly on a window edge goes to the lower bin.
pub fn tof_bin(tof: f64, dt: f64) -> i64 {
    (tof / dt - 0.5).ceil() as i64
}

/// `A_s` stored as one (bin, weight) pair per sensor–pixel combination.
#[derive(Debug, Clone, PartialEq)]
pub struct TofMatrix {
    pub n_sensors: usize,
    pub nt: usize,
    pub n_pixels: usize,
    /// `bins[l * n_pixels + j]`, `u32::MAX` when the pair was dropped.
    pub bins: Vec<u32>,
    pub weights: Vec<f64>,
}

const DROPPED: u32 = u32::MAX;

impl TofMatrix {
    pub fn assemble(
        grid: GridSpec,
        sensors: &SensorArray,
        cfg: &AcousticConfig,
        window: TofWindow,
    ) -> Result<Self> {
        cfg.validate()?;
        if sensors.is_empty() {
            return Err(PatError::invalid("sensor array is empty"));
        }
        let n = grid.len();
        let centers = grid.centers();
        let prefactor =
            grid.voxel_volume() / (4.0 * PI * cfg.sound_speed.powi(2) * cfg.dt.powi(2));
        let blocks: Vec<Result<(Vec<u32>, Vec<f64>)>> = sensors
            .positions
            .par_iter()
            .enumerate()
            .map(|(l, &rd)| {
                let mut bins = Vec::with_capacity(n);
                let mut weights = Vec::with_capacity(n);
                for (j, &rj) in centers.iter().enumerate() {
                    let d = distance(rd, rj);
                    if d == 0.0 {
                        return Err(PatError::ZeroDistance { sensor: l, pixel: j });
                    }
                    let tof = d / cfg.sound_speed;
                    let k = tof_bin(tof, cfg.dt);
                    if k < 0 || k >= cfg.nt as i64 {
                        match window {
                            TofWindow::Strict => {
                                return Err(PatError::TofOutOfWindow {
                                    sensor: l,
                                    pixel: j,
                                    tof_s: tof,
                                    t_max_s: cfg.record_end(),
                                })
                            }
                            TofWindow::Truncate => {
                                bins.push(DROPPED);
                                weights.push(0.0);
                                continue;
                            }
                        }
                    }
                    bins.push(k as u32);
                    weights.push(prefactor / d);
                }
                Ok((bins, weights))
            })
            .collect();
        let mut bins = Vec::with_capacity(n * sensors.len());
        let mut weights = Vec::with_capacity(n * sensors.len());
        for block in blocks {
            let (b, w) = block?;
            bins.extend(b);
            weights.extend(w);
        }
        Ok(Self {
            n_sensors: sensors.len(),
            nt: cfg.nt,
            n_pixels: n,
            bins,
            weights,
        })
    }

    /// Bin of sensor `l` for pixel `j`, `None` if dropped.
    pub fn bin(&self, l: usize, j: usize) -> Option<usize> {
        let b = self.bins[l * self.n_pixels + j];
        (b != DROPPED).then_some(b as usize)
    }

    pub fn weight(&self, l: usize, j: usize) -> f64 {
        self.weights[l * self.n_pixels + j]
    }

    pub fn nnz(&self) -> usize {
        self.bins.iter().filter(|&&b| b != DROPPED).count()
    }

    /// Coordinate-list triples `(row, col, value)` with `row = l·nt + k`.
    pub fn triplets(&self) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        (0..self.n_sensors).flat_map(move |l| {
            (0..self.n_pixels).filter_map(move |j| {
                self.bin(l, j).map(|k| {
                    (
                        (l * self.nt + k) as u64,
                        j as u64,
                        self.weights[l * self.n_pixels + j],
                    )
                })
            })
        })
    }

    /// Rebuilds the matrix from coordinate-list triples.
    pub fn from_triplets(
        n_sensors: usize,
        nt: usize,
        n_pixels: usize,
        triplets: impl IntoIterator<Item = (u64, u64, f64)>,
    ) -> Result<Self> {
        let mut bins = vec![DROPPED; n_sensors * n_pixels];
        let mut weights = vec![0.0; n_sensors * n_pixels];
        for (row, col, value) in triplets {
            let (row, col) = (row as usize, col as usize);
            if row >= n_sensors * nt || col >= n_pixels {
                return Err(PatError::invalid(format!(
                    "triplet ({row}, {col}) outside {}x{n_pixels}",
                    n_sensors * nt
                )));
            }
            let (l, k) = (row / nt, row % nt);
            let slot = l * n_pixels + col;
            if bins[slot] != DROPPED {
                return Err(PatError::invalid(format!(
                    "sensor {l} has two entries for pixel {col}"
                )));
            }
            bins[slot] = k as u32;
            weights[slot] = value;
        }
        Ok(Self {
            n_sensors,
            nt,
            n_pixels,
            bins,
            weights,
        })
    }
}

impl LinearOperator for TofMatrix {
    type Scalar = f64;

    fn nrows(&self) -> usize {
        self.n_sensors * self.nt
    }
    fn ncols(&self) -> usize {
        self.n_pixels
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_pixels;
        y.par_chunks_mut(self.nt)
            .enumerate()
            .for_each(|(l, trace)| {
                trace.iter_mut().for_each(|v| *v = 0.0);
                let bins = &self.bins[l * n..(l + 1) * n];
                let weights = &self.weights[l * n..(l + 1) * n];
                for ((&b, &w), &xj) in bins.iter().zip(weights).zip(x) {
                    if b != DROPPED {
                        trace[b as usize] += w * xj;
                    }
                }
            });
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let n = self.n_pixels;
        x.par_iter_mut().enumerate().for_each(|(j, xj)| {
            let mut acc = 0.0;
            for l in 0..self.n_sensors {
                let b = self.bins[l * n + j];
                if b != DROPPED {
                    acc += self.weights[l * n + j] * y[l * self.nt + b as usize];
                }
            }
            *xj = acc;
        });
    }
}

/// Block-diagonal first difference in time: `(x[k+1] - x[k-1]) / 2` inside
/// each detector trace, one-sided at the trace ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeDerivative {
    pub n_sensors: usize,
    pub nt: usize,
}

impl TimeDerivative {
    pub fn new(n_sensors: usize, nt: usize) -> Result<Self> {
        if nt < 3 {
            return Err(PatError::invalid(format!(
                "time derivative needs at least 3 samples, got {nt}"
            )));
        }
        Ok(Self { n_sensors, nt })
    }

    fn diff_trace(x: &[f64], y: &mut [f64]) {
        let n = x.len();
        y[0] = x[1] - x[0];
        for k in 1..n - 1 {
            y[k] = 0.5 * (x[k + 1] - x[k - 1]);
        }
        y[n - 1] = x[n - 1] - x[n - 2];
    }

    fn diff_trace_adjoint(y: &[f64], x: &mut [f64]) {
        let n = y.len();
        x.iter_mut().for_each(|v| *v = 0.0);
        x[0] -= y[0];
        x[1] += y[0];
        for k in 1..n - 1 {
            x[k + 1] += 0.5 * y[k];
            x[k - 1] -= 0.5 * y[k];
        }
        x[n - 1] += y[n - 1];
        x[n - 2] -= y[n - 1];
    }
}

impl LinearOperator for TimeDerivative {
    type Scalar = f64;

    fn nrows(&self) -> usize {
        self.n_sensors * self.nt
    }
    fn ncols(&self) -> usize {
        self.n_sensors * self.nt
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_chunks_mut(self.nt)
            .zip(x.par_chunks(self.nt))
            .for_each(|(yo, xi)| Self::diff_trace(xi, yo));
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        x.par_chunks_mut(self.nt)
            .zip(y.par_chunks(self.nt))
            .for_each(|(xo, yi)| Self::diff_trace_adjoint(yi, xo));
    }
}

/// The assembled time-domain forward model.
#[derive(Debug, Clone)]
pub struct TdModel {
    pub tof: TofMatrix,
    pub derivative: TimeDerivative,
    pub config: AcousticConfig,
    pub sensors: SensorArray,
    pub grid: GridSpec,
    pub window: TofWindow,
}

impl TdModel {
    pub fn assemble(
        grid: GridSpec,
        sensors: &SensorArray,
        cfg: &AcousticConfig,
        window: TofWindow,
    ) -> Result<Self> {
        let tof = TofMatrix::assemble(grid, sensors, cfg, window)?;
        let derivative = TimeDerivative::new(sensors.len(), cfg.nt)?;
        Ok(Self {
            tof,
            derivative,
            config: *cfg,
            sensors: sensors.clone(),
            grid,
            window,
        })
    }

    pub fn forward(&self, p0: &ImageGrid) -> Result<Sinogram> {
        if p0.len() != self.ncols() {
            return Err(PatError::DimensionMismatch {
                what: "image for time-domain forward model",
                expected: self.ncols(),
                got: p0.len(),
            });
        }
        let mut data = vec![0.0; self.nrows()];
        self.apply(&p0.values, &mut data);
        Ok(Sinogram {
            n_sensors: self.sensors.len(),
            nt: self.config.nt,
            dt: self.config.dt,
            t0: 0.0,
            data,
        })
    }
}

impl LinearOperator for TdModel {
    type Scalar = f64;

    fn nrows(&self) -> usize {
        self.tof.nrows()
    }
    fn ncols(&self) -> usize {
        self.tof.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; self.nrows()];
        self.tof.apply(x, &mut tmp);
        self.derivative.apply(&tmp, y);
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let mut tmp = vec![0.0; self.nrows()];
        self.derivative.apply_adjoint(y, &mut tmp);
        self.tof.apply_adjoint(&tmp, x);
    }
}

/// `A p0` reshaped to detectors × samples.
pub fn forward_td(p0: &ImageGrid, model: &TdModel) -> Result<Sinogram> {
    model.forward(p0)
}
