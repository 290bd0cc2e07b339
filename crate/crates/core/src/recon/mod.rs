//! Image reconstruction: Tikhonov-regularized least squares on either model
//! matrix, and universal back-projection.

mod backprojection;
mod lsqr;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::forward_fd::{FdModel, SpectralData};
use crate::forward_td::{Sinogram, TdModel};
use crate::geometry::ImageGrid;
use crate::operator::{stack_real_imag, LinearOperator, RealRestricted};

pub use backprojection::{backproject, bp_term};
pub use lsqr::{lsqr, LsqrParams, LsqrSolution, StopReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Tdmm,
    Fdmm,
    Bp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Tdmm, Method::Fdmm, Method::Bp];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Tdmm => "tdmm",
            Method::Fdmm => "fdmm",
            Method::Bp => "bp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = PatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tdmm" => Ok(Method::Tdmm),
            "fdmm" => Ok(Method::Fdmm),
            "bp" => Ok(Method::Bp),
            other => Err(PatError::invalid(format!(
                "unknown method '{other}' (expected tdmm, fdmm or bp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Tikhonov weight α ≥ 0.
    pub alpha: f64,
    pub max_iters: usize,
    pub rel_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            max_iters: 100,
            rel_tolerance: 1e-6,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(PatError::invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.max_iters == 0 {
            return Err(PatError::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(PatError::invalid(format!(
                "rel_tolerance must be positive, got {}",
                self.rel_tolerance
            )));
        }
        Ok(())
    }

    fn lsqr_params(&self) -> LsqrParams {
        LsqrParams {
            damp: self.alpha.sqrt(),
            tol: self.rel_tolerance,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub image: ImageGrid,
    pub iterations_used: usize,
    /// Damped residual relative to the data norm; 0 for back-projection.
    pub final_residual_norm: f64,
    pub method: Method,
}

/// A model matrix of either domain.
#[derive(Debug, Clone)]
pub enum ForwardModel {
    Td(TdModel),
    Fd(FdModel),
}

/// Data matching a [`ForwardModel`].
#[derive(Debug, Clone)]
pub enum Measurement {
    Time(Sinogram),
    Spectral(SpectralData),
}

/// Minimizes `‖A x − b‖² + α ‖x‖²` over real `x` with damped LSQR.
pub fn tikhonov_solve_operator<A: LinearOperator<Scalar = f64>>(
    op: &A,
    data: &[f64],
    settings: &SolverSettings,
) -> Result<LsqrSolution> {
    settings.validate()?;
    if data.len() != op.nrows() {
        return Err(PatError::DimensionMismatch {
            what: "data for least-squares solve",
            expected: op.nrows(),
            got: data.len(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(PatError::NonFinite("data"));
    }
    Ok(lsqr(op, data, &settings.lsqr_params()))
}

/// Same as [`tikhonov_solve_operator`] for a complex operator, restricted to
/// real-valued `x`.
pub fn tikhonov_solve_complex<A: LinearOperator<Scalar = Complex64>>(
    op: &A,
    data: &[Complex64],
    settings: &SolverSettings,
) -> Result<LsqrSolution> {
    if data.len() != op.nrows() {
        return Err(PatError::DimensionMismatch {
            what: "data for least-squares solve",
            expected: op.nrows(),
            got: data.len(),
        });
    }
    let restricted = RealRestricted { inner: op };
    tikhonov_solve_operator(&restricted, &stack_real_imag(data), settings)
}

/// Tikhonov-regularized reconstruction with a model matrix.
pub fn tikhonov_solve(
    model: &ForwardModel,
    data: &Measurement,
    settings: &SolverSettings,
) -> Result<ReconResult> {
    let (sol, grid, method) = match (model, data) {
        (ForwardModel::Td(m), Measurement::Time(s)) => {
            if s.n_sensors != m.sensors.len() || s.nt != m.config.nt {
                return Err(PatError::DimensionMismatch {
                    what: "sinogram samples",
                    expected: m.nrows(),
                    got: s.data.len(),
                });
            }
            (tikhonov_solve_operator(m, &s.data, settings)?, m.grid, Method::Tdmm)
        }
        (ForwardModel::Fd(m), Measurement::Spectral(s)) => {
            if s.n_sensors != m.sensors.len() || s.nf() != m.freqs.len() {
                return Err(PatError::DimensionMismatch {
                    what: "spectral samples",
                    expected: m.nrows(),
                    got: s.data.len(),
                });
            }
            (tikhonov_solve_complex(m, &s.data, settings)?, m.grid, Method::Fdmm)
        }
        _ => {
            return Err(PatError::invalid(
                "time-domain models need sinograms and frequency-domain models need spectra",
            ))
        }
    };
    Ok(ReconResult {
        iterations_used: sol.iterations,
        final_residual_norm: sol.final_residual(),
        image: ImageGrid {
            spec: grid,
            values: sol.x,
        },
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::test_util::*;
    use crate::operator::DenseMatrix;
    use nalgebra::DMatrix;

    fn to_na(m: &DenseMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(m.rows, m.cols, &m.data)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den
    }

    fn tight(alpha: f64) -> SolverSettings {
        SolverSettings {
            alpha,
            max_iters: 500,
            rel_tolerance: 1e-14,
        }
    }

    #[test]
    fn recovers_generating_vector() {
        let mut r = rng(1);
        let a = DenseMatrix::new(12, 8, random_real(&mut r, 96));
        let truth = random_real(&mut r, 8);
        let mut b = vec![0.0; 12];
        a.apply(&truth, &mut b);
        let sol = tikhonov_solve_operator(&a, &b, &tight(0.0)).unwrap();
        assert!(rel_err(&sol.x, &truth) < 1e-8);
        // independent dense solve
        let qr = to_na(&a).svd(true, true);
        let x = qr.solve(&nalgebra::DVector::from_vec(b.clone()), 1e-14).unwrap();
        assert!(rel_err(x.as_slice(), &truth) < 1e-10);
    }

    #[test]
    fn matches_regularized_normal_equations() {
        let mut r = rng(2);
        let a = DenseMatrix::new(10, 8, random_real(&mut r, 80));
        let b = random_real(&mut r, 10);
        let alpha = 0.1;
        let sol = tikhonov_solve_operator(&a, &b, &tight(alpha)).unwrap();
        let m = to_na(&a);
        let lhs = m.transpose() * &m + DMatrix::identity(8, 8) * alpha;
        let rhs = m.transpose() * nalgebra::DVector::from_vec(b);
        let want = lhs.lu().solve(&rhs).unwrap();
        assert!(rel_err(&sol.x, want.as_slice()) < 1e-6);
    }

    #[test]
    fn complex_system_over_real_images() {
        let mut r = rng(3);
        let a = DenseMatrix::new(9, 5, random_complex(&mut r, 45));
        let b = random_complex(&mut r, 9);
        let alpha = 0.05;
        let sol = tikhonov_solve_complex(&a, &b, &tight(alpha)).unwrap();
        // closed form over reals: (Re(AᴴA) + αI) x = Re(Aᴴ b)
        let mut g = DMatrix::<f64>::zeros(5, 5);
        let mut h = nalgebra::DVector::<f64>::zeros(5);
        for i in 0..5 {
            for j in 0..5 {
                g[(i, j)] = (0..9).map(|k| (a.get(k, i).conj() * a.get(k, j)).re).sum::<f64>();
            }
            g[(i, i)] += alpha;
            h[i] = (0..9).map(|k| (a.get(k, i).conj() * b[k]).re).sum::<f64>();
        }
        let want = g.lu().solve(&h).unwrap();
        assert!(rel_err(&sol.x, want.as_slice()) < 1e-8);
    }

    #[test]
    fn heavy_regularization_shrinks_to_zero() {
        let mut r = rng(4);
        let a = DenseMatrix::new(10, 8, random_real(&mut r, 80));
        let b = random_real(&mut r, 10);
        let ls = tikhonov_solve_operator(&a, &b, &tight(0.0)).unwrap();
        let m = to_na(&a);
        let gram_norm = (m.transpose() * &m).norm();
        let sol = tikhonov_solve_operator(&a, &b, &tight(1e12 * gram_norm)).unwrap();
        let n_ls: f64 = ls.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n_reg: f64 = sol.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(n_reg < 1e-6 * n_ls, "{n_reg} vs {n_ls}");
    }

    #[test]
    fn residual_history_is_monotone_and_deterministic() {
        let mut r = rng(5);
        let a = DenseMatrix::new(30, 20, random_real(&mut r, 600));
        let b = random_real(&mut r, 30);
        let s = SolverSettings {
            alpha: 0.01,
            max_iters: 15,
            rel_tolerance: 1e-14,
        };
        let one = tikhonov_solve_operator(&a, &b, &s).unwrap();
        let two = tikhonov_solve_operator(&a, &b, &s).unwrap();
        assert_eq!(one.x, two.x);
        assert!(one.iterations <= 15);
        for w in one.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = DenseMatrix::<f64>::identity(3);
        assert!(tikhonov_solve_operator(&a, &[1.0, 2.0], &SolverSettings::default()).is_err());
        assert!(tikhonov_solve_operator(&a, &[1.0, f64::NAN, 0.0], &SolverSettings::default()).is_err());
        let bad = SolverSettings {
            alpha: -1.0,
            ..Default::default()
        };
        assert!(tikhonov_solve_operator(&a, &[1.0, 2.0, 3.0], &bad).is_err());
        let zero = tikhonov_solve_operator(&a, &[0.0; 3], &SolverSettings::default()).unwrap();
        assert_eq!(zero.stop, StopReason::ZeroRhs);
        assert_eq!(zero.x, vec![0.0; 3]);
    }
}
