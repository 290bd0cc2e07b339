//! Image agreement and operator sensitivity metrics.

use serde::{Deserialize, Serialize};

use crate::error::{PatError, Result};
use crate::geometry::ImageGrid;
use crate::operator::{norm2, Difference, LinearOperator, Scalar};
use crate::recon::{ForwardModel, Method};
use crate::uncertainty::ModelPair;

pub const DEFAULT_POWER_TOL: f64 = 1e-8;
pub const DEFAULT_POWER_MAX_ITERS: usize = 10_000;

/// Sample Pearson correlation of two equally long slices.
pub fn pearson_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(PatError::DimensionMismatch {
            what: "pearson inputs",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(PatError::Degenerate("correlation needs at least two samples".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(PatError::Degenerate(
            "correlation is undefined for a constant image".into(),
        ));
    }
    if !(sab.is_finite() && saa.is_finite() && sbb.is_finite()) {
        return Err(PatError::NonFinite("pearson inputs"));
    }
    // saa and sbb are multiplied under one root so that swapping the
    // arguments gives a bit-identical result
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    if (a.spec.nx, a.spec.ny) != (b.spec.nx, b.spec.ny) {
        return Err(PatError::invalid(format!(
            "images differ in size: {}x{} vs {}x{}",
            a.spec.nx, a.spec.ny, b.spec.nx, b.spec.ny
        )));
    }
    pearson_slices(&a.values, &b.values)
}

/// A start vector that is not the normalized all-ones vector, used when the
/// operator annihilates the latter.
fn fallback_start<S: Scalar>(n: usize) -> Vec<S> {
    let v: Vec<S> = (0..n)
        .map(|i| S::from_real(((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5))
        .collect();
    let nv = norm2(&v);
    v.into_iter().map(|x| x.scale(1.0 / nv)).collect()
}

/// Largest singular value by power iteration on `MᴴM`.
///
/// Starts from the normalized all-ones vector and stops when two successive
/// estimates differ by less than `tol` relative. An operator that maps both
/// start vectors to zero has norm 0 as far as this routine can tell.
pub fn spectral_norm<A: LinearOperator>(op: &A, tol: f64, max_iters: usize) -> Result<f64> {
    let (m, n) = (op.nrows(), op.ncols());
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    if !(tol > 0.0) || max_iters == 0 {
        return Err(PatError::invalid("power iteration needs tol > 0 and max_iters >= 1"));
    }
    let mut v = vec![A::Scalar::from_real(1.0 / (n as f64).sqrt()); n];
    let mut w = vec![A::Scalar::default(); m];
    op.apply(&v, &mut w);
    if norm2(&w) == 0.0 {
        v = fallback_start(n);
        op.apply(&v, &mut w);
        if norm2(&w) == 0.0 {
            return Ok(0.0);
        }
    }
    let mut u = vec![A::Scalar::default(); n];
    let mut sigma = norm2(&w);
    let mut change = f64::INFINITY;
    for _ in 0..max_iters {
        op.apply_adjoint(&w, &mut u);
        let nu = norm2(&u);
        if nu == 0.0 || !nu.is_finite() {
            return Err(PatError::NonFinite("power iteration"));
        }
        v.iter_mut().zip(&u).for_each(|(a, &b)| *a = b.scale(1.0 / nu));
        op.apply(&v, &mut w);
        let next = norm2(&w);
        change = (next - sigma).abs() / next;
        sigma = next;
        if change < tol {
            return Ok(sigma);
        }
    }
    Err(PatError::NoConvergence {
        iterations: max_iters,
        last_change: change,
    })
}

/// `‖M − M_N‖₂ / ‖M‖₂` with the difference applied matrix-free.
pub fn delta_metric(pair: &ModelPair, tol: f64, max_iters: usize) -> Result<f64> {
    match (&pair.truth, &pair.nominal) {
        (ForwardModel::Td(m), ForwardModel::Td(mn)) => delta_of(m, mn, tol, max_iters),
        (ForwardModel::Fd(m), ForwardModel::Fd(mn)) => delta_of(m, mn, tol, max_iters),
        _ => Err(PatError::invalid("model pair mixes time and frequency domains")),
    }
}

/// `‖M − M_N‖₂ / ‖M‖₂` for any two operators of equal shape.
pub fn delta_of<A, B>(m: &A, m_nominal: &B, tol: f64, max_iters: usize) -> Result<f64>
where
    A: LinearOperator,
    B: LinearOperator<Scalar = A::Scalar>,
{
    if (m.nrows(), m.ncols()) != (m_nominal.nrows(), m_nominal.ncols()) {
        return Err(PatError::DimensionMismatch {
            what: "model pair",
            expected: m.nrows() * m.ncols(),
            got: m_nominal.nrows() * m_nominal.ncols(),
        });
    }
    let norm = spectral_norm(m, tol, max_iters)?;
    if norm == 0.0 {
        return Err(PatError::Degenerate("true model has zero norm".into()));
    }
    let diff = spectral_norm(&Difference::new(m, m_nominal), tol, max_iters)?;
    Ok(diff / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Pc,
    Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub name: MetricName,
    pub value: f64,
    pub method: Option<Method>,
    pub x_percent: f64,
    pub trial: Option<usize>,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridSpec;
    use crate::operator::test_util::*;
    use crate::operator::{DenseMatrix, Scaled};
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let a: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        assert!((pearson_slices(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = a.iter().map(|v| 4.0 - v).collect();
        assert!((pearson_slices(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        // checkerboards along different axes: zero mean, orthogonal
        let spec = GridSpec::new(4, 4, 1.0).unwrap();
        let c1: Vec<f64> = (0..16).map(|j| if spec.coords(j).0 % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c2: Vec<f64> = (0..16).map(|j| if spec.coords(j).1 % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(pearson_slices(&c1, &c2).unwrap().abs() < 1e-12);
        assert!(pearson_slices(&c1, &[2.0; 16]).is_err());
        assert!(pearson_slices(&c1, &c2[..4]).is_err());
    }

    proptest! {
        #[test]
        fn pearson_symmetric_bounded_and_affine_invariant(
            a in prop::collection::vec(-10.0f64..10.0, 8..40),
            seed in any::<u64>(),
            alpha in 0.01f64..100.0,
            beta in -50.0f64..50.0,
        ) {
            let mut r = rng(seed);
            let b: Vec<f64> = random_real(&mut r, a.len());
            let spread = a.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
                - a.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            prop_assume!(spread > 1e-3);
            let p = pearson_slices(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&p));
            prop_assert_eq!(p, pearson_slices(&b, &a).unwrap());
            let t: Vec<f64> = a.iter().map(|v| alpha * v + beta).collect();
            prop_assert!((pearson_slices(&t, &b).unwrap() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_norm_small_cases() {
        let id = DenseMatrix::<f64>::identity(5);
        assert!((spectral_norm(&id, 1e-12, 100).unwrap() - 1.0).abs() < 1e-12);
        let d = DenseMatrix::new(2, 2, vec![3.0, 0.0, 0.0, 1.0]);
        assert!((spectral_norm(&d, 1e-14, 1000).unwrap() - 3.0).abs() < 1e-6);
        let zero = DenseMatrix::new(3, 2, vec![0.0; 6]);
        assert_eq!(spectral_norm(&zero, 1e-8, 10).unwrap(), 0.0);
    }

    #[test]
    fn start_vector_in_null_space() {
        // rows sum to zero, so the all-ones vector is annihilated
        let m = DenseMatrix::new(2, 2, vec![1.0, -1.0, 2.0, -2.0]);
        let want = 10f64.sqrt();
        assert!((spectral_norm(&m, 1e-14, 1000).unwrap() - want).abs() < 1e-9);
    }

    fn svd_max(m: &DenseMatrix<f64>) -> f64 {
        DMatrix::from_row_slice(m.rows, m.cols, &m.data)
            .singular_values()
            .max()
    }

    #[test]
    fn matches_dense_svd() {
        let mut r = rng(11);
        let a = DenseMatrix::new(6, 4, random_real(&mut r, 24));
        let got = spectral_norm(&a, 1e-12, 10_000).unwrap();
        let want = svd_max(&a);
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn complex_matches_dense_svd() {
        let mut r = rng(12);
        let data = random_complex(&mut r, 35);
        let a = DenseMatrix::new(7, 5, data.clone());
        let want = nalgebra::DMatrix::<Complex64>::from_row_slice(7, 5, &data)
            .singular_values()
            .max();
        let got = spectral_norm(&a, 1e-12, 10_000).unwrap();
        assert!((got - want).abs() < 1e-6 * want);
    }

    #[test]
    fn homogeneous() {
        let mut r = rng(13);
        let a = DenseMatrix::new(8, 5, random_real(&mut r, 40));
        let base = spectral_norm(&a, 1e-12, 10_000).unwrap();
        for c in [-3.0, 0.5, 7.0] {
            let s = spectral_norm(&Scaled { inner: &a, factor: c }, 1e-12, 10_000).unwrap();
            assert!((s - c.abs() * base).abs() < 1e-8 * s);
        }
    }

    #[test]
    fn delta_limits_and_scaling() {
        let mut r = rng(14);
        let m = DenseMatrix::new(9, 6, random_real(&mut r, 54));
        let mn = DenseMatrix::new(9, 6, random_real(&mut r, 54));
        assert_eq!(delta_of(&m, &m, 1e-10, 1000).unwrap(), 0.0);
        let zero = DenseMatrix::new(9, 6, vec![0.0; 54]);
        assert!((delta_of(&m, &zero, 1e-12, 10_000).unwrap() - 1.0).abs() < 1e-9);
        let d = delta_of(&m, &mn, 1e-12, 10_000).unwrap();
        let c = -2.5;
        let ds = delta_of(
            &Scaled { inner: &m, factor: c },
            &Scaled { inner: &mn, factor: c },
            1e-12,
            10_000,
        )
        .unwrap();
        assert!((d - ds).abs() < 1e-8 * d);
    }

    #[test]
    fn cap_reports_non_convergence() {
        let mut r = rng(15);
        let a = DenseMatrix::new(20, 20, random_real(&mut r, 400));
        assert!(matches!(
            spectral_norm(&a, 1e-15, 2),
            Err(PatError::NoConvergence { iterations: 2, .. })
        ));
    }
}
