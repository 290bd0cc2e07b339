//! Measurement noise and true-vs-assumed model pairs.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::forward_fd::{FdModel, FdStorage, FrequencyGrid, SpectralData};
use crate::forward_td::{Sinogram, TdModel, TofWindow};
use crate::geometry::{AcousticConfig, GridSpec, PerturbMode, SensorArray};
use crate::recon::ForwardModel;

/// Gaussian noise with standard deviation `fraction × max |data|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction.is_finite()) {
            return Err(PatError::invalid(format!(
                "noise fraction must be positive, got {fraction}"
            )));
        }
        Ok(Self { fraction, seed })
    }

    /// Peak-amplitude signal-to-noise ratio, dB.
    pub fn snr_db(&self) -> f64 {
        -20.0 * self.fraction.log10()
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            fraction: 0.01,
            seed: 0,
        }
    }
}

pub fn add_noise(sino: &Sinogram, spec: &NoiseSpec) -> Result<Sinogram> {
    let peak = sino.max_abs();
    if peak == 0.0 {
        return Err(PatError::Degenerate(
            "cannot scale noise to an all-zero sinogram".into(),
        ));
    }
    let sigma = spec.fraction * peak;
    let normal = Normal::new(0.0, sigma).map_err(|e| PatError::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = sino.clone();
    out.data.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    Ok(out)
}

/// Circular complex Gaussian noise with `E|n|² = (fraction × max |data|)²`.
pub fn add_complex_noise(spectra: &SpectralData, spec: &NoiseSpec) -> Result<SpectralData> {
    let peak = spectra.max_abs();
    if peak == 0.0 {
        return Err(PatError::Degenerate(
            "cannot scale noise to all-zero spectra".into(),
        ));
    }
    let sigma = spec.fraction * peak / std::f64::consts::SQRT_2;
    let normal = Normal::new(0.0, sigma).map_err(|e| PatError::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = spectra.clone();
    out.data.iter_mut().for_each(|v| {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *v += Complex64::new(re, im);
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Td,
    Fd,
}

/// Assembly choices shared by every model built for a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelOptions {
    pub tof_window: TofWindow,
    pub fd_storage: FdStorage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub x_percent: f64,
    pub mode: PerturbMode,
    pub seed: u64,
}

/// The operator that generated the data and the one the solver assumes.
#[derive(Debug, Clone)]
pub struct ModelPair {
    /// Built from the nominal ring.
    pub truth: ForwardModel,
    /// Built from the perturbed ring.
    pub nominal: ForwardModel,
    pub perturbation: PerturbationRecord,
}

pub fn build_model(
    kind: ModelKind,
    grid: GridSpec,
    sensors: &SensorArray,
    cfg: &AcousticConfig,
    options: &ModelOptions,
) -> Result<ForwardModel> {
    Ok(match kind {
        ModelKind::Td => ForwardModel::Td(TdModel::assemble(grid, sensors, cfg, options.tof_window)?),
        ModelKind::Fd => {
            let freqs = FrequencyGrid::from_config(cfg)?;
            ForwardModel::Fd(FdModel::assemble(grid, sensors, freqs, cfg, options.fd_storage)?)
        }
    })
}

#[allow(clippy::too_many_arguments)]
pub fn make_model_pair(
    kind: ModelKind,
    grid: GridSpec,
    cfg: &AcousticConfig,
    radius: f64,
    n_sensors: usize,
    x_percent: f64,
    mode: PerturbMode,
    seed: u64,
    options: &ModelOptions,
) -> Result<ModelPair> {
    let ring = SensorArray::ring(radius, n_sensors, [0.0, 0.0])?;
    let perturbed = ring.perturb_radius(x_percent, mode, seed)?;
    Ok(ModelPair {
        truth: build_model(kind, grid, &ring, cfg, options)?,
        nominal: build_model(kind, grid, &perturbed, cfg, options)?,
        perturbation: PerturbationRecord {
            x_percent,
            mode,
            seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{DenseMatrix, LinearOperator};
    use std::f64::consts::PI;

    fn sino(n: usize) -> Sinogram {
        let data: Vec<f64> = (0..n).map(|k| ((k as f64) * 0.01).sin()).collect();
        Sinogram::from_data(1, n, 1e-8, 0.0, data).unwrap()
    }

    #[test]
    fn one_percent_is_forty_db() {
        let spec = NoiseSpec::new(0.01, 0).unwrap();
        assert!((spec.snr_db() - 40.0).abs() < 1e-12);
        let s = sino(1000);
        let sigma = spec.fraction * s.max_abs();
        assert!((20.0 * (s.max_abs() / sigma).log10() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn noise_is_reproducible_white_and_scaled() {
        let s = sino(200_000);
        let spec = NoiseSpec::new(0.01, 77).unwrap();
        let a = add_noise(&s, &spec).unwrap();
        let b = add_noise(&s, &spec).unwrap();
        assert_eq!(a, b);
        let noise: Vec<f64> = a.data.iter().zip(&s.data).map(|(x, y)| x - y).collect();
        let n = noise.len() as f64;
        let mean = noise.iter().sum::<f64>() / n;
        let var = noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sigma = 0.01 * s.max_abs();
        assert!((var.sqrt() - sigma).abs() < 0.02 * sigma);
        let lag1 = noise.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0);
        assert!((lag1 / var).abs() < 0.01);
        let other = add_noise(&s, &NoiseSpec::new(0.01, 78).unwrap()).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn zero_sinogram_rejected() {
        let z = Sinogram::zeros(2, 10, 1e-8);
        assert!(matches!(add_noise(&z, &NoiseSpec::default()), Err(PatError::Degenerate(_))));
        assert!(NoiseSpec::new(0.0, 1).is_err());
    }

    fn cfg() -> AcousticConfig {
        AcousticConfig {
            sound_speed: 1500.0,
            dt: 50e-9,
            nt: 1000,
            f_lo: 0.1e6,
            f_hi: 2e6,
        }
    }

    #[test]
    fn zero_uncertainty_pairs_agree() {
        let grid = GridSpec::new(6, 6, 0.03).unwrap();
        for kind in [ModelKind::Td, ModelKind::Fd] {
            let pair = make_model_pair(
                kind,
                grid,
                &cfg(),
                22.5e-3,
                8,
                0.0,
                PerturbMode::Common,
                5,
                &ModelOptions::default(),
            )
            .unwrap();
            match (&pair.truth, &pair.nominal) {
                (ForwardModel::Td(a), ForwardModel::Td(b)) => assert_eq!(a.tof, b.tof),
                (ForwardModel::Fd(a), ForwardModel::Fd(b)) => {
                    assert_eq!(DenseMatrix::from_operator(a), DenseMatrix::from_operator(b))
                }
                _ => panic!("mixed domains"),
            }
        }
    }

    #[test]
    fn fd_pair_reproduces_single_entry_phasors() {
        // single pixel at the origin, one sensor, 1 MHz
        let grid = GridSpec::new(1, 1, 1e-4).unwrap();
        let c = AcousticConfig {
            nt: 300,
            dt: 1.0 / (300.0 * 1e6),
            f_lo: 0.9e6,
            f_hi: 1.1e6,
            ..cfg()
        };
        let pair = make_model_pair(
            ModelKind::Fd,
            grid,
            &c,
            22.5e-3,
            1,
            1.0,
            PerturbMode::DeterministicInward,
            0,
            &ModelOptions::default(),
        )
        .unwrap();
        let (ForwardModel::Fd(t), ForwardModel::Fd(n)) = (&pair.truth, &pair.nominal) else {
            panic!("expected frequency-domain models");
        };
        assert_eq!(t.freqs.count, 1);
        assert!((t.freqs.frequency(0) - 1e6).abs() < 1e-3);
        let k = 2.0 * PI * 1e6 / 1500.0;
        let unscale = |v: Complex64| v / (Complex64::new(0.0, -k) * grid.voxel_volume() / (4.0 * PI));
        let term_true = unscale(t.entry(0, 0, 0));
        let term_nom = unscale(n.entry(0, 0, 0));
        assert!((term_true - Complex64::new(44.44, 0.0)).norm() < 0.01 * 44.44);
        assert!((term_nom - Complex64::new(26.4, -36.3)).norm() < 0.01 * 44.9);
        let phasor = term_nom * n.distance(0, 0);
        assert!((phasor.re - 0.59).abs() < 0.01 && (phasor.im + 0.81).abs() < 0.01);
    }

    #[test]
    fn td_pair_shifts_bins_and_kernels_slightly() {
        let grid = GridSpec::new(5, 5, 0.02).unwrap();
        let pair = make_model_pair(
            ModelKind::Td,
            grid,
            &cfg(),
            22.5e-3,
            12,
            1.0,
            PerturbMode::Deterministic,
            0,
            &ModelOptions::default(),
        )
        .unwrap();
        let (ForwardModel::Td(t), ForwardModel::Td(n)) = (&pair.truth, &pair.nominal) else {
            panic!("expected time-domain models");
        };
        for l in 0..12 {
            for j in 0..grid.len() {
                let d_true = crate::geometry::distance(t.sensors.positions[l], grid.center(j));
                let d_nom = crate::geometry::distance(n.sensors.positions[l], grid.center(j));
                let shift = ((d_nom - d_true) / 1500.0 / 50e-9).round() as i64;
                let kb = t.tof.bin(l, j).unwrap() as i64;
                let kn = n.tof.bin(l, j).unwrap() as i64;
                assert!((kn - kb - shift).abs() <= 1);
                let ratio = n.tof.weight(l, j) / t.tof.weight(l, j);
                // worst case is the corner pixel closest to a sensor
                assert!((ratio - 1.0).abs() <= 0.011 * 22.5 / (22.5 - 10.0 * 2f64.sqrt()));
            }
        }
        let center = grid.index(2, 2);
        // 1 % of 22.5 mm is 150 ns, three samples
        assert_eq!(n.tof.bin(0, center).unwrap() - t.tof.bin(0, center).unwrap(), 3);
        let ratio = t.tof.weight(0, center) / n.tof.weight(0, center);
        assert!((ratio - 1.01).abs() < 1e-9);
        assert_eq!(t.nrows(), n.nrows());
    }

    #[test]
    fn pairs_are_reproducible() {
        let grid = GridSpec::new(4, 4, 0.02).unwrap();
        let make = || {
            make_model_pair(
                ModelKind::Td,
                grid,
                &cfg(),
                22.5e-3,
                10,
                3.0,
                PerturbMode::PerSensor,
                123,
                &ModelOptions::default(),
            )
            .unwrap()
        };
        let (a, b) = (make(), make());
        let (ForwardModel::Td(x), ForwardModel::Td(y)) = (&a.nominal, &b.nominal) else {
            panic!()
        };
        assert_eq!(x.sensors, y.sensors);
        assert_eq!(x.tof, y.tof);
    }
}
