//! Frequency-domain model matrix `K`.
//!
//! `K[(l, p), j] = -i k_p ΔV exp(+i k_p d_lj) / (4π d_lj)` with
//! `k_p = 2π f_p / v_s` and `d_lj = |r_d,l − r_j|`. This sign matches the
//! time-to-frequency transform `P(ω) = v_s ∫ p(t) exp(+iωt) dt` (see
//! [`spectrum_of_sinogram`]).
//!
//! Frequencies are the positive DFT bins `p / (N_t Δt)` inside the band, so
//! consecutive rows of a sensor block differ by a fixed phase step per pixel.
//! The matrix-free path exploits that with a phasor recurrence, refreshed
//! from an exact exponential every [`RESYNC_EVERY`] steps.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{PatError, Result};
use crate::forward_td::Sinogram;
use crate::geometry::{distance, AcousticConfig, GridSpec, ImageGrid, SensorArray};
use crate::operator::LinearOperator;

/// Sign convention written into exported files.
pub const SIGN_CONVENTION: &str =
    "K = -i k dV exp(+i k |r_d - r_j|) / (4 pi |r_d - r_j|); spectrum P(w) = v_s * sum_n p[n] exp(+i w t_n) dt";

/// Default ceiling for an explicit `K`, bytes.
pub const DEFAULT_MEMORY_CAP: u64 = 1 << 30;

const RESYNC_EVERY: usize = 32;

/// Uniformly spaced positive frequencies `(first + p) · df`, `p = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub df: f64,
    /// DFT index of the first frequency (≥ 1).
    pub first_index: usize,
    pub count: usize,
    pub sound_speed: f64,
}

impl FrequencyGrid {
    /// Positive DFT frequencies of an `nt`-sample record inside
    /// `[f_lo, min(f_hi, Nyquist)]`.
    pub fn from_config(cfg: &AcousticConfig) -> Result<Self> {
        cfg.validate()?;
        let df = 1.0 / (cfg.nt as f64 * cfg.dt);
        let f_hi = cfg.f_hi.min(cfg.nyquist());
        // tolerate rounding at the band edges
        let eps = 1e-9 * df;
        let indices: Vec<usize> = (1..=cfg.nt / 2)
            .filter(|&p| {
                let f = p as f64 * df;
                f >= cfg.f_lo - eps && f <= f_hi + eps
            })
            .collect();
        match (indices.first(), indices.last()) {
            (Some(&a), Some(&b)) => Ok(Self {
                df,
                first_index: a,
                count: b - a + 1,
                sound_speed: cfg.sound_speed,
            }),
            _ => Err(PatError::EmptyBand { f_lo: cfg.f_lo, f_hi }),
        }
    }

    /// A grid at explicitly chosen frequencies `(first + p) · df`.
    pub fn uniform(df: f64, first_index: usize, count: usize, sound_speed: f64) -> Result<Self> {
        if !(df > 0.0) || first_index == 0 || count == 0 || !(sound_speed > 0.0) {
            return Err(PatError::invalid(
                "frequency grid needs df > 0, first index >= 1, count >= 1 and v_s > 0",
            ));
        }
        Ok(Self {
            df,
            first_index,
            count,
            sound_speed,
        })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn frequency(&self, p: usize) -> f64 {
        (self.first_index + p) as f64 * self.df
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.count).map(|p| self.frequency(p)).collect()
    }

    /// Wavenumber `2π f_p / v_s`, rad/m.
    pub fn wavenumber(&self, p: usize) -> f64 {
        2.0 * PI * self.frequency(p) / self.sound_speed
    }

    fn wavenumber_step(&self) -> f64 {
        2.0 * PI * self.df / self.sound_speed
    }
}

/// Detector spectra, `n_sensors × nf`, sensor-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub n_sensors: usize,
    pub freqs: FrequencyGrid,
    pub data: Vec<Complex64>,
}

impl SpectralData {
    pub fn from_data(n_sensors: usize, freqs: FrequencyGrid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n_sensors * freqs.len() {
            return Err(PatError::DimensionMismatch {
                what: "spectral data",
                expected: n_sensors * freqs.len(),
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(PatError::NonFinite("spectral data"));
        }
        Ok(Self {
            n_sensors,
            freqs,
            data,
        })
    }

    pub fn nf(&self) -> usize {
        self.freqs.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// One entry of `K` for wavenumber `k` and distance `d`.
pub fn fd_entry(k: f64, d: f64, voxel_volume: f64) -> Complex64 {
    Complex64::new(0.0, -k) * voxel_volume * Complex64::cis(k * d) / (4.0 * PI * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStorage {
    /// Explicit when it fits under the cap, otherwise matrix-free.
    Auto { cap_bytes: u64 },
    /// Explicit or an error.
    Explicit { cap_bytes: u64 },
    MatrixFree,
}

impl Default for FdStorage {
    fn default() -> Self {
        FdStorage::Auto {
            cap_bytes: DEFAULT_MEMORY_CAP,
        }
    }
}

/// The assembled frequency-domain forward model.
#[derive(Debug, Clone)]
pub struct FdModel {
    pub grid: GridSpec,
    pub sensors: SensorArray,
    pub config: AcousticConfig,
    pub freqs: FrequencyGrid,
    /// `d[l * n_pixels + j]`, meters.
    distances: Vec<f64>,
    explicit: Option<Vec<Complex64>>,
}

impl FdModel {
    pub fn assemble(
        grid: GridSpec,
        sensors: &SensorArray,
        freqs: FrequencyGrid,
        cfg: &AcousticConfig,
        storage: FdStorage,
    ) -> Result<Self> {
        if sensors.is_empty() {
            return Err(PatError::invalid("sensor array is empty"));
        }
        let n = grid.len();
        let centers = grid.centers();
        let mut distances = Vec::with_capacity(n * sensors.len());
        for (l, &rd) in sensors.positions.iter().enumerate() {
            for (j, &rj) in centers.iter().enumerate() {
                let d = distance(rd, rj);
                if d == 0.0 {
                    return Err(PatError::ZeroDistance { sensor: l, pixel: j });
                }
                distances.push(d);
            }
        }
        let mut model = Self {
            grid,
            sensors: sensors.clone(),
            config: *cfg,
            freqs,
            distances,
            explicit: None,
        };
        let needed = model.explicit_bytes();
        let build = match storage {
            FdStorage::Auto { cap_bytes } => needed <= cap_bytes,
            FdStorage::Explicit { cap_bytes } => {
                if needed > cap_bytes {
                    return Err(PatError::MemoryCap {
                        needed,
                        cap: cap_bytes,
                    });
                }
                true
            }
            FdStorage::MatrixFree => false,
        };
        if build {
            let rows: Vec<Vec<Complex64>> = (0..model.nrows())
                .into_par_iter()
                .map(|row| model.row(row / freqs.len(), row % freqs.len()))
                .collect();
            model.explicit = Some(rows.concat());
        }
        Ok(model)
    }

    pub fn is_explicit(&self) -> bool {
        self.explicit.is_some()
    }

    /// Size an explicit `K` would take, bytes.
    pub fn explicit_bytes(&self) -> u64 {
        (self.nrows() as u64) * (self.ncols() as u64) * 16
    }

    pub fn distance(&self, l: usize, j: usize) -> f64 {
        self.distances[l * self.grid.len() + j]
    }

    /// Row `(l, p)` of `K`, computed directly from the closed form.
    pub fn row(&self, l: usize, p: usize) -> Vec<Complex64> {
        let k = self.freqs.wavenumber(p);
        let dv = self.grid.voxel_volume();
        let n = self.grid.len();
        self.distances[l * n..(l + 1) * n]
            .iter()
            .map(|&d| fd_entry(k, d, dv))
            .collect()
    }

    pub fn entry(&self, l: usize, p: usize, j: usize) -> Complex64 {
        fd_entry(self.freqs.wavenumber(p), self.distance(l, j), self.grid.voxel_volume())
    }

    /// Drops the explicit matrix, keeping only the matrix-free path.
    pub fn into_matrix_free(mut self) -> Self {
        self.explicit = None;
        self
    }

    pub fn forward(&self, p0: &ImageGrid) -> Result<SpectralData> {
        if p0.len() != self.ncols() {
            return Err(PatError::DimensionMismatch {
                what: "image for frequency-domain forward model",
                expected: self.ncols(),
                got: p0.len(),
            });
        }
        let x: Vec<Complex64> = p0.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut y = vec![Complex64::default(); self.nrows()];
        self.apply(&x, &mut y);
        Ok(SpectralData {
            n_sensors: self.sensors.len(),
            freqs: self.freqs,
            data: y,
        })
    }

    fn apply_matrix_free(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.grid.len();
        let nf = self.freqs.len();
        let scale = self.grid.voxel_volume() / (4.0 * PI);
        let k0 = self.freqs.wavenumber(0);
        let dk = self.freqs.wavenumber_step();
        y.par_chunks_mut(nf).enumerate().for_each(|(l, out)| {
            let d = &self.distances[l * n..(l + 1) * n];
            let wr: Vec<f64> = x.iter().zip(d).map(|(v, &dj)| v.re * scale / dj).collect();
            let wi: Vec<f64> = x.iter().zip(d).map(|(v, &dj)| v.im * scale / dj).collect();
            let mut zr = vec![0.0; n];
            let mut zi = vec![0.0; n];
            let mut sr = vec![0.0; n];
            let mut si = vec![0.0; n];
            for j in 0..n {
                let (s, c) = (dk * d[j]).sin_cos();
                sr[j] = c;
                si[j] = s;
            }
            for (p, slot) in out.iter_mut().enumerate() {
                if p % RESYNC_EVERY == 0 {
                    let k = k0 + p as f64 * dk;
                    for j in 0..n {
                        let (s, c) = (k * d[j]).sin_cos();
                        zr[j] = c;
                        zi[j] = s;
                    }
                }
                let mut acc_r = [0.0f64; 4];
                let mut acc_i = [0.0f64; 4];
                let chunks = n / 4 * 4;
                for j0 in (0..chunks).step_by(4) {
                    for q in 0..4 {
                        let j = j0 + q;
                        acc_r[q] += wr[j] * zr[j] - wi[j] * zi[j];
                        acc_i[q] += wr[j] * zi[j] + wi[j] * zr[j];
                    }
                }
                let mut tail_r = 0.0;
                let mut tail_i = 0.0;
                for j in chunks..n {
                    tail_r += wr[j] * zr[j] - wi[j] * zi[j];
                    tail_i += wr[j] * zi[j] + wi[j] * zr[j];
                }
                let sum = Complex64::new(
                    (acc_r[0] + acc_r[1]) + (acc_r[2] + acc_r[3]) + tail_r,
                    (acc_i[0] + acc_i[1]) + (acc_i[2] + acc_i[3]) + tail_i,
                );
                let k = self.freqs.wavenumber(p);
                *slot = Complex64::new(0.0, -k) * sum;
                for j in 0..n {
                    let r = zr[j] * sr[j] - zi[j] * si[j];
                    zi[j] = zr[j] * si[j] + zi[j] * sr[j];
                    zr[j] = r;
                }
            }
        });
    }

    fn apply_adjoint_matrix_free(&self, y: &[Complex64], x: &mut [Complex64]) {
        let n = self.grid.len();
        let nf = self.freqs.len();
        let scale = self.grid.voxel_volume() / (4.0 * PI);
        let k0 = self.freqs.wavenumber(0);
        let dk = self.freqs.wavenumber_step();
        // per-sensor partial images, summed in sensor order afterwards
        let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..self.sensors.len())
            .into_par_iter()
            .map(|l| {
                let d = &self.distances[l * n..(l + 1) * n];
                let mut ar = vec![0.0; n];
                let mut ai = vec![0.0; n];
                let mut zr = vec![0.0; n];
                let mut zi = vec![0.0; n];
                let mut sr = vec![0.0; n];
                let mut si = vec![0.0; n];
                for j in 0..n {
                    let (s, c) = (dk * d[j]).sin_cos();
                    sr[j] = c;
                    si[j] = s;
                }
                for p in 0..nf {
                    if p % RESYNC_EVERY == 0 {
                        let k = k0 + p as f64 * dk;
                        for j in 0..n {
                            let (s, c) = (k * d[j]).sin_cos();
                            zr[j] = c;
                            zi[j] = s;
                        }
                    }
                    // conj(-i k) = +i k
                    let v = Complex64::new(0.0, self.freqs.wavenumber(p)) * y[l * nf + p];
                    // acc += v * conj(z)
                    for j in 0..n {
                        ar[j] += v.re * zr[j] + v.im * zi[j];
                        ai[j] += v.im * zr[j] - v.re * zi[j];
                    }
                    for j in 0..n {
                        let r = zr[j] * sr[j] - zi[j] * si[j];
                        zi[j] = zr[j] * si[j] + zi[j] * sr[j];
                        zr[j] = r;
                    }
                }
                for j in 0..n {
                    let w = scale / d[j];
                    ar[j] *= w;
                    ai[j] *= w;
                }
                (ar, ai)
            })
            .collect();
        x.iter_mut().for_each(|v| *v = Complex64::default());
        for (ar, ai) in partial {
            for ((xj, r), i) in x.iter_mut().zip(ar).zip(ai) {
                *xj += Complex64::new(r, i);
            }
        }
    }
}

impl LinearOperator for FdModel {
    type Scalar = Complex64;

    fn nrows(&self) -> usize {
        self.sensors.len() * self.freqs.len()
    }
    fn ncols(&self) -> usize {
        self.grid.len()
    }
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        match &self.explicit {
            Some(k) => {
                let n = self.ncols();
                y.par_iter_mut()
                    .zip(k.par_chunks(n))
                    .for_each(|(yi, row)| {
                        *yi = row
                            .iter()
                            .zip(x)
                            .fold(Complex64::default(), |acc, (a, b)| acc + a * b);
                    });
            }
            None => self.apply_matrix_free(x, y),
        }
    }
    fn apply_adjoint(&self, y: &[Complex64], x: &mut [Complex64]) {
        match &self.explicit {
            Some(k) => {
                let n = self.ncols();
                x.par_iter_mut().enumerate().for_each(|(j, xj)| {
                    *xj = k
                        .chunks(n)
                        .zip(y)
                        .fold(Complex64::default(), |acc, (row, yi)| acc + row[j].conj() * yi);
                });
            }
            None => self.apply_adjoint_matrix_free(y, x),
        }
    }
}

/// `K p0` reshaped to detectors × frequencies.
pub fn forward_fd(p0: &ImageGrid, model: &FdModel) -> Result<SpectralData> {
    model.forward(p0)
}

/// Spectrum of time-domain data at the frequencies of `freqs`, scaled so it is
/// directly comparable with [`FdModel`] output:
/// `P(ω_p) = v_s Δt Σ_n p[n] exp(+i ω_p t_n)`.
pub fn spectrum_of_sinogram(sino: &Sinogram, freqs: &FrequencyGrid) -> Result<SpectralData> {
    let last = freqs.first_index + freqs.count - 1;
    if last > sino.nt / 2 {
        return Err(PatError::invalid(format!(
            "frequency index {last} exceeds half the record length {}",
            sino.nt
        )));
    }
    let df_record = 1.0 / (sino.nt as f64 * sino.dt);
    if (df_record - freqs.df).abs() > 1e-9 * freqs.df {
        return Err(PatError::invalid(format!(
            "frequency spacing {} Hz does not match record spacing {} Hz",
            freqs.df, df_record
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    // inverse transform = sum with exp(+2πi pn/N), unnormalized
    let fft = planner.plan_fft_inverse(sino.nt);
    let scale = freqs.sound_speed * sino.dt;
    let mut data = Vec::with_capacity(sino.n_sensors * freqs.len());
    let mut buf = vec![Complex64::default(); sino.nt];
    for l in 0..sino.n_sensors {
        for (b, &v) in buf.iter_mut().zip(sino.trace(l)) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        for p in 0..freqs.len() {
            let idx = freqs.first_index + p;
            let shift = Complex64::cis(2.0 * PI * freqs.frequency(p) * sino.t0);
            data.push(buf[idx] * scale * shift);
        }
    }
    Ok(SpectralData {
        n_sensors: sino.n_sensors,
        freqs: *freqs,
        data,
    })
}

/// `‖a − b‖₂ / ‖b‖₂` over all entries.
pub fn relative_l2_error(a: &SpectralData, b: &SpectralData) -> Result<f64> {
    if a.data.len() != b.data.len() {
        return Err(PatError::DimensionMismatch {
            what: "spectra",
            expected: b.data.len(),
            got: a.data.len(),
        });
    }
    let num: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.data.iter().map(|y| y.norm_sqr()).sum();
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_source;
    use crate::operator::test_util::*;
    use crate::operator::DenseMatrix;

    fn cfg() -> AcousticConfig {
        AcousticConfig {
            sound_speed: 1500.0,
            dt: 50e-9,
            nt: 420,
            f_lo: 0.1e6,
            f_hi: 20e6,
        }
    }

    #[test]
    fn frequency_grid_paper_settings() {
        let g = FrequencyGrid::from_config(&cfg()).unwrap();
        assert!((g.df - 47_619.047_619).abs() < 1e-3);
        assert!(g.frequency(g.count - 1) <= 10e6 * (1.0 + 1e-12));
        assert!((g.frequency(g.count - 1) - 10e6).abs() < 1.0);
        assert_eq!(g.first_index, 3);
        assert!(g.frequency(0) >= 0.1e6);
        let f = g.frequencies();
        assert!(f.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn frequency_grid_edge_cases() {
        let tiny = AcousticConfig {
            nt: 2,
            f_lo: 0.0,
            f_hi: f64::INFINITY,
            ..cfg()
        };
        let g = FrequencyGrid::from_config(&tiny).unwrap();
        assert_eq!(g.count, 1);
        assert!((g.frequency(0) - 1.0 / (2.0 * 50e-9)).abs() < 1e-3);
        let empty = AcousticConfig {
            f_lo: 10.5e6,
            f_hi: 20e6,
            ..cfg()
        };
        assert!(matches!(
            FrequencyGrid::from_config(&empty),
            Err(PatError::EmptyBand { .. })
        ));
    }

    #[test]
    fn worked_phasors() {
        let k = 2.0 * PI * 1e6 / 1500.0;
        let nominal = Complex64::cis(k * 22.5e-3);
        assert!((nominal.re - 1.0).abs() < 0.01 && nominal.im.abs() < 0.01);
        let perturbed = Complex64::cis(k * 22.275e-3);
        assert!((perturbed.re - 0.59).abs() < 0.01 && (perturbed.im + 0.81).abs() < 0.01);
    }

    #[test]
    fn zero_wavenumber_row_vanishes() {
        assert_eq!(fd_entry(0.0, 0.02, 1e-8), Complex64::new(0.0, 0.0));
    }

    fn small_model(storage: FdStorage) -> FdModel {
        let grid = GridSpec::new(6, 5, 0.02).unwrap();
        let ring = SensorArray::ring(15e-3, 7, [0.0, 0.0]).unwrap();
        let c = AcousticConfig {
            nt: 128,
            dt: 100e-9,
            ..cfg()
        };
        let fg = FrequencyGrid::from_config(&c).unwrap();
        FdModel::assemble(grid, &ring, fg, &c, storage).unwrap()
    }

    #[test]
    fn explicit_and_matrix_free_agree() {
        let explicit = small_model(FdStorage::Explicit { cap_bytes: u64::MAX });
        let free = small_model(FdStorage::MatrixFree);
        assert!(explicit.is_explicit() && !free.is_explicit());
        let mut r = rng(21);
        let x = random_complex(&mut r, explicit.ncols());
        let mut a = vec![Complex64::default(); explicit.nrows()];
        let mut b = a.clone();
        explicit.apply(&x, &mut a);
        free.apply(&x, &mut b);
        let diff: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = a.iter().map(|u| u.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-10, "{}", diff / norm);

        let y = random_complex(&mut r, explicit.nrows());
        let mut xa = vec![Complex64::default(); explicit.ncols()];
        let mut xb = xa.clone();
        explicit.apply_adjoint(&y, &mut xa);
        free.apply_adjoint(&y, &mut xb);
        let diff: f64 = xa.iter().zip(&xb).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = xa.iter().map(|u| u.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-10);

        assert!(adjoint_mismatch(&free, &x, &y) < 1e-10);
        // matrix-free adjoint against the explicit conjugate transpose
        let dense = DenseMatrix::from_operator(&explicit);
        let mut xd = vec![Complex64::default(); explicit.ncols()];
        dense.apply_adjoint(&y, &mut xd);
        let diff: f64 = xd.iter().zip(&xb).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-10);
    }

    #[test]
    fn memory_cap_is_enforced() {
        let grid = GridSpec::new(6, 5, 0.02).unwrap();
        let ring = SensorArray::ring(15e-3, 7, [0.0, 0.0]).unwrap();
        let fg = FrequencyGrid::from_config(&cfg()).unwrap();
        let err = FdModel::assemble(grid, &ring, fg, &cfg(), FdStorage::Explicit { cap_bytes: 1024 });
        assert!(matches!(err, Err(PatError::MemoryCap { .. })));
        let auto = FdModel::assemble(grid, &ring, fg, &cfg(), FdStorage::Auto { cap_bytes: 1024 }).unwrap();
        assert!(!auto.is_explicit());
    }

    #[test]
    fn single_pixel_single_frequency_matches_closed_form() {
        let grid = GridSpec::new(3, 3, 0.01).unwrap();
        let ring = SensorArray::ring(12e-3, 5, [0.0, 0.0]).unwrap();
        let fg = FrequencyGrid::uniform(0.8e6, 2, 1, 1500.0).unwrap();
        let m = FdModel::assemble(grid, &ring, fg, &cfg(), FdStorage::MatrixFree).unwrap();
        let p0 = point_source(grid, 2, 0).unwrap();
        let out = forward_fd(&p0, &m).unwrap();
        let k = 2.0 * PI * 1.6e6 / 1500.0;
        let rj = grid.center(grid.index(2, 0));
        for l in 0..5 {
            let d = distance(ring.positions[l], rj);
            let want = Complex64::new(0.0, -k) * grid.voxel_volume() * Complex64::cis(k * d)
                / (4.0 * PI * d);
            assert!((out.data[l] - want).norm() < 1e-12 * want.norm());
        }
        let zero = forward_fd(&ImageGrid::zeros(grid), &m).unwrap();
        assert!(zero.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn mirrored_geometry_matches_mirrored_pixels() {
        let grid = GridSpec::new(6, 6, 0.02).unwrap();
        let ring = SensorArray::ring(15e-3, 9, [0.0, 0.0]).unwrap();
        let mirrored_positions: Vec<_> = ring.positions.iter().map(|p| [p[0], -p[1]]).collect();
        let mirrored = SensorArray::from_positions(mirrored_positions, 15e-3, [0.0, 0.0]).unwrap();
        let fg = FrequencyGrid::uniform(0.5e6, 1, 4, 1500.0).unwrap();
        let a = FdModel::assemble(grid, &ring, fg, &cfg(), FdStorage::default()).unwrap();
        let b = FdModel::assemble(grid, &mirrored, fg, &cfg(), FdStorage::default()).unwrap();
        for l in 0..9 {
            for p in 0..4 {
                for iy in 0..6 {
                    for ix in 0..6 {
                        let j = grid.index(ix, iy);
                        let jm = grid.index(ix, 5 - iy);
                        assert_eq!(b.entry(l, p, j), a.entry(l, p, jm));
                    }
                }
            }
        }
    }

    #[test]
    fn spectrum_of_single_tone() {
        // a cosine at bin 5 has spectrum v_s Δt N / 2 at that bin
        let nt = 64;
        let dt = 1e-7;
        let data: Vec<f64> = (0..nt).map(|n| (2.0 * PI * 5.0 * n as f64 / nt as f64).cos()).collect();
        let sino = Sinogram::from_data(1, nt, dt, 0.0, data).unwrap();
        let fg = FrequencyGrid::uniform(1.0 / (nt as f64 * dt), 4, 3, 1500.0).unwrap();
        let s = spectrum_of_sinogram(&sino, &fg).unwrap();
        let want = 1500.0 * dt * nt as f64 / 2.0;
        assert!((s.data[1].re - want).abs() < 1e-9 * want);
        assert!(s.data[0].norm() < 1e-9 * want && s.data[2].norm() < 1e-9 * want);
    }
}
