//! Universal back-projection for point detectors on a ring.
//!
//! Each pixel collects `b_l(t) = 2 p_l(t) − 2 t ∂p_l/∂t` from every detector
//! at `t = |r_d,l − r_j| / v_s`, weighted by `cos θ / |r_d,l − r_j|` and
//! normalized by the sum of weights. `θ` is the angle between the inward
//! normal of the ring at the detector and the direction to the pixel.

use rayon::prelude::*;

use crate::error::{PatError, Result};
use crate::forward_td::Sinogram;
use crate::geometry::{distance, AcousticConfig, GridSpec, ImageGrid, SensorArray};

use super::{Method, ReconResult};

/// `2 p[k] − 2 t_k (p[k+1] − p[k−1]) / (2Δt)` with one-sided differences at
/// the ends; `t_k = t0 + kΔt`.
pub fn bp_term(signal: &[f64], dt: f64, t0: f64) -> Result<Vec<f64>> {
    let n = signal.len();
    if n < 3 {
        return Err(PatError::invalid(format!(
            "back-projection term needs at least 3 samples, got {n}"
        )));
    }
    Ok((0..n)
        .map(|k| {
            let deriv = if k == 0 {
                (signal[1] - signal[0]) / dt
            } else if k == n - 1 {
                (signal[n - 1] - signal[n - 2]) / dt
            } else {
                (signal[k + 1] - signal[k - 1]) / (2.0 * dt)
            };
            let t = t0 + k as f64 * dt;
            2.0 * signal[k] - 2.0 * t * deriv
        })
        .collect())
}

fn interpolate(trace: &[f64], pos: f64) -> Option<f64> {
    if !(pos >= 0.0) || pos > (trace.len() - 1) as f64 {
        return None;
    }
    let k = pos.floor() as usize;
    if k + 1 >= trace.len() {
        return Some(trace[trace.len() - 1]);
    }
    let frac = pos - k as f64;
    Some(trace[k] + frac * (trace[k + 1] - trace[k]))
}

pub fn backproject(
    sino: &Sinogram,
    sensors: &SensorArray,
    grid: GridSpec,
    cfg: &AcousticConfig,
) -> Result<ReconResult> {
    backproject_scaled(sino, sensors, grid, cfg, 1.0)
}

/// Back-projection with every solid-angle weight multiplied by
/// `weight_scale`; the normalization makes the result independent of it.
pub(crate) fn backproject_scaled(
    sino: &Sinogram,
    sensors: &SensorArray,
    grid: GridSpec,
    cfg: &AcousticConfig,
    weight_scale: f64,
) -> Result<ReconResult> {
    if sensors.is_empty() {
        return Err(PatError::invalid("back-projection needs at least one sensor"));
    }
    if sino.n_sensors != sensors.len() {
        return Err(PatError::DimensionMismatch {
            what: "sinogram sensors",
            expected: sensors.len(),
            got: sino.n_sensors,
        });
    }
    let terms: Vec<Vec<f64>> = (0..sino.n_sensors)
        .map(|l| bp_term(sino.trace(l), sino.dt, sino.t0))
        .collect::<Result<_>>()?;
    let normals: Vec<[f64; 2]> = sensors
        .positions
        .iter()
        .map(|&rd| {
            let dx = sensors.center[0] - rd[0];
            let dy = sensors.center[1] - rd[1];
            let len = dx.hypot(dy);
            if len > 0.0 {
                [dx / len, dy / len]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let rj = grid.center(j);
            let mut num = 0.0;
            let mut den = 0.0;
            for (l, &rd) in sensors.positions.iter().enumerate() {
                let d = distance(rd, rj);
                if d == 0.0 {
                    continue;
                }
                let cos_theta = (normals[l][0] * (rj[0] - rd[0]) + normals[l][1] * (rj[1] - rd[1])) / d;
                let w = weight_scale * cos_theta / d;
                let pos = (d / cfg.sound_speed - sino.t0) / sino.dt;
                if let Some(b) = interpolate(&terms[l], pos) {
                    num += w * b;
                    den += w;
                }
            }
            if den != 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect();
    Ok(ReconResult {
        image: ImageGrid { spec: grid, values },
        iterations_used: 0,
        final_residual_norm: 0.0,
        method: Method::Bp,
    })
}
