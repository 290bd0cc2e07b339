//! Imaging grids, detector rings, the Shepp–Logan phantom and the radial
//! perturbation model for detector positions.
//!
//! All coordinates are in meters in the plane of the detector ring. The image
//! region is a square centered on the origin; pixels are treated as point
//! sources at their centers with a voxel volume of `pixel area × 1 m`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};

/// A point in the imaging plane, meters.
pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Shape and physical extent of a square imaging region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Edge length of the square region, meters.
    pub side_length: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, side_length: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(PatError::invalid(format!(
                "grid must have at least one pixel, got {nx}x{ny}"
            )));
        }
        if !(side_length > 0.0 && side_length.is_finite()) {
            return Err(PatError::invalid(format!(
                "side length must be positive, got {side_length}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            side_length,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel_width(&self) -> f64 {
        self.side_length / self.nx as f64
    }

    pub fn pixel_height(&self) -> f64 {
        self.side_length / self.ny as f64
    }

    /// Pixel area times a unit thickness, m³.
    pub fn voxel_volume(&self) -> f64 {
        self.pixel_width() * self.pixel_height()
    }

    /// Linear index of pixel `(ix, iy)`; `ix` runs along x, `iy` along y.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, j: usize) -> (usize, usize) {
        (j % self.nx, j / self.nx)
    }

    /// Center of pixel `j`. Mirrored pixels get exactly negated coordinates.
    pub fn center(&self, j: usize) -> Point {
        let (ix, iy) = self.coords(j);
        [
            centered_offset(ix, self.nx) * (self.side_length / (2.0 * self.nx as f64)),
            centered_offset(iy, self.ny) * (self.side_length / (2.0 * self.ny as f64)),
        ]
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|j| self.center(j)).collect()
    }
}

/// `2i + 1 - n` as a float: the pixel center in units of half a pixel.
fn centered_offset(i: usize, n: usize) -> f64 {
    (2 * i + 1) as f64 - n as f64
}

/// Initial-pressure image on a [`GridSpec`], row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            values: vec![0.0; spec.len()],
            spec,
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(PatError::DimensionMismatch {
                what: "image values",
                expected: spec.len(),
                got: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.spec.index(ix, iy)]
    }

    /// Pixel coordinates of the largest value (first one on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (j, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = j;
            }
        }
        self.spec.coords(best)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// An ellipse of the analytic phantom, in normalized coordinates where the
/// image region spans `[-1, 1]` on both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: Point,
    pub semi_axes: [f64; 2],
    pub angle_deg: f64,
    pub intensity: f64,
}

impl Ellipse {
    const fn new(cx: f64, cy: f64, a: f64, b: f64, angle_deg: f64, intensity: f64) -> Self {
        Self {
            center: [cx, cy],
            semi_axes: [a, b],
            angle_deg,
            intensity,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_axes[0]).powi(2) + (v / self.semi_axes[1]).powi(2) <= 1.0
    }
}

/// The original ten-ellipse Shepp–Logan head phantom.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse::new(0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    Ellipse::new(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    Ellipse::new(0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    Ellipse::new(-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    Ellipse::new(0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    Ellipse::new(0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    Ellipse::new(0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    Ellipse::new(-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    Ellipse::new(0.0, -0.605, 0.023, 0.023, 0.0, 0.01),
    Ellipse::new(0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
];

/// Sum of ellipse intensities at each pixel center (no rescaling).
pub fn rasterize_ellipses(ellipses: &[Ellipse], spec: GridSpec) -> ImageGrid {
    let values = (0..spec.len())
        .map(|j| {
            let (ix, iy) = spec.coords(j);
            let p = [
                centered_offset(ix, spec.nx) / spec.nx as f64,
                centered_offset(iy, spec.ny) / spec.ny as f64,
            ];
            ellipses
                .iter()
                .filter(|e| e.contains(p))
                .map(|e| e.intensity)
                .sum()
        })
        .collect();
    ImageGrid { spec, values }
}

/// Shepp–Logan phantom sampled at pixel centers and rescaled to `[0, 1]`.
pub fn shepp_logan(spec: GridSpec) -> ImageGrid {
    let mut img = rasterize_ellipses(&SHEPP_LOGAN, spec);
    let (lo, hi) = img.min_max();
    if hi > lo {
        for v in &mut img.values {
            *v = (*v - lo) / (hi - lo);
        }
    } else {
        // single-valued raster: nothing to stretch
        for v in &mut img.values {
            *v = if *v != 0.0 { 1.0 } else { 0.0 };
        }
    }
    img
}

/// Image with a single unit pixel.
pub fn point_source(spec: GridSpec, ix: usize, iy: usize) -> Result<ImageGrid> {
    if ix >= spec.nx || iy >= spec.ny {
        return Err(PatError::invalid(format!(
            "pixel ({ix}, {iy}) outside {}x{} grid",
            spec.nx, spec.ny
        )));
    }
    let mut img = ImageGrid::zeros(spec);
    img.values[spec.index(ix, iy)] = 1.0;
    Ok(img)
}

/// How detector radii are drawn when perturbing a ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    /// One radius drawn uniformly from `[R(1-X), R(1+X)]` for the whole ring.
    Common,
    /// An independent uniform radius for every sensor.
    PerSensor,
    /// Every radius set to `R(1+X)`.
    Deterministic,
    /// Every radius set to `R(1-X)`.
    DeterministicInward,
}

impl PerturbMode {
    pub fn is_deterministic(self) -> bool {
        matches!(self, Self::Deterministic | Self::DeterministicInward)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Common => "common",
            Self::PerSensor => "per_sensor",
            Self::Deterministic => "deterministic",
            Self::DeterministicInward => "deterministic_inward",
        }
    }
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PerturbMode {
    type Err = PatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "common" => Ok(Self::Common),
            "per_sensor" => Ok(Self::PerSensor),
            "deterministic" => Ok(Self::Deterministic),
            "deterministic_inward" => Ok(Self::DeterministicInward),
            other => Err(PatError::invalid(format!(
                "unknown perturbation mode '{other}' (expected common, per_sensor, deterministic or deterministic_inward)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Nominal,
    Perturbed {
        x_percent: f64,
        mode: PerturbMode,
        seed: u64,
    },
}

/// Point detectors on (or near) a circle.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorArray {
    pub positions: Vec<Point>,
    pub nominal_radius: f64,
    pub center: Point,
    pub provenance: Provenance,
}

impl SensorArray {
    /// `n` equispaced detectors at angles `2πl/n` on a circle of radius `radius`.
    pub fn ring(radius: f64, n: usize, center: Point) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PatError::invalid(format!(
                "ring radius must be positive, got {radius}"
            )));
        }
        if n == 0 {
            return Err(PatError::invalid("ring needs at least one sensor"));
        }
        let positions = (0..n)
            .map(|l| {
                let (s, c) = (2.0 * PI * l as f64 / n as f64).sin_cos();
                [center[0] + radius * c, center[1] + radius * s]
            })
            .collect();
        Ok(Self {
            positions,
            nominal_radius: radius,
            center,
            provenance: Provenance::Nominal,
        })
    }

    /// Detectors at arbitrary positions, e.g. loaded from a file.
    pub fn from_positions(positions: Vec<Point>, nominal_radius: f64, center: Point) -> Result<Self> {
        if positions.is_empty() {
            return Err(PatError::invalid("sensor array is empty"));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PatError::NonFinite("sensor positions"));
        }
        Ok(Self {
            positions,
            nominal_radius,
            center,
            provenance: Provenance::Nominal,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.positions
            .iter()
            .map(|&p| distance(p, self.center))
            .collect()
    }

    /// Moves every detector along its radius. The bounds of the draw are
    /// `R(1 ± x_percent/100)`; see [`PerturbMode`] for how radii are picked.
    pub fn perturb_radius(&self, x_percent: f64, mode: PerturbMode, seed: u64) -> Result<Self> {
        if self.provenance != Provenance::Nominal {
            return Err(PatError::AlreadyPerturbed);
        }
        if !(x_percent >= 0.0 && x_percent.is_finite()) {
            return Err(PatError::invalid(format!(
                "uncertainty must be a non-negative percentage, got {x_percent}"
            )));
        }
        let r = self.nominal_radius;
        let lo = r * (1.0 - x_percent / 100.0);
        let hi = r * (1.0 + x_percent / 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radii: Vec<f64> = match mode {
            PerturbMode::Common => vec![rng.random_range(lo..=hi); self.len()],
            PerturbMode::PerSensor => (0..self.len()).map(|_| rng.random_range(lo..=hi)).collect(),
            PerturbMode::Deterministic => vec![hi; self.len()],
            PerturbMode::DeterministicInward => vec![lo; self.len()],
        };
        let positions = self
            .positions
            .iter()
            .zip(&radii)
            .map(|(&p, &new_r)| {
                if new_r == r {
                    return p;
                }
                let old_r = distance(p, self.center);
                let scale = new_r / old_r;
                [
                    self.center[0] + (p[0] - self.center[0]) * scale,
                    self.center[1] + (p[1] - self.center[1]) * scale,
                ]
            })
            .collect();
        Ok(Self {
            positions,
            nominal_radius: r,
            center: self.center,
            provenance: Provenance::Perturbed {
                x_percent,
                mode,
                seed,
            },
        })
    }
}

/// Acoustic medium and sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcousticConfig {
    /// Speed of sound, m/s.
    pub sound_speed: f64,
    /// Sampling interval, s.
    pub dt: f64,
    /// Number of time samples per detector.
    pub nt: usize,
    /// Transducer band, Hz.
    pub f_lo: f64,
    pub f_hi: f64,
}

impl AcousticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sound_speed > 0.0 && self.sound_speed.is_finite()) {
            return Err(PatError::invalid(format!(
                "speed of sound must be positive, got {}",
                self.sound_speed
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PatError::invalid(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.nt < 2 {
            return Err(PatError::invalid(format!(
                "need at least two time samples, got {}",
                self.nt
            )));
        }
        if !(self.f_lo >= 0.0 && self.f_lo < self.f_hi) {
            return Err(PatError::invalid(format!(
                "band must satisfy 0 <= f_lo < f_hi, got [{}, {}]",
                self.f_lo, self.f_hi
            )));
        }
        Ok(())
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }

    /// Time of the last sample, s.
    pub fn record_end(&self) -> f64 {
        (self.nt - 1) as f64 * self.dt
    }
}
