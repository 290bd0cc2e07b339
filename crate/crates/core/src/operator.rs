//! Matrix-free linear operators over real or complex vectors.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

/// Field element an operator acts on: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Default
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    fn conj(self) -> Self;
    fn norm_sqr(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn from_real(r: f64) -> Self;
    fn real(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn conj(self) -> Self {
        self
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn from_real(r: f64) -> Self {
        r
    }
    fn real(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn from_real(r: f64) -> Self {
        Complex64::new(r, 0.0)
    }
    fn real(self) -> f64 {
        self.re
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// A linear map `x ↦ M x` with its adjoint `y ↦ Mᴴ y`.
///
/// Both methods overwrite their output buffer.
pub trait LinearOperator: Sync {
    type Scalar: Scalar;

    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[Self::Scalar], y: &mut [Self::Scalar]);
    fn apply_adjoint(&self, y: &[Self::Scalar], x: &mut [Self::Scalar]);
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    type Scalar = T::Scalar;

    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &[Self::Scalar], y: &mut [Self::Scalar]) {
        (**self).apply(x, y)
    }
    fn apply_adjoint(&self, y: &[Self::Scalar], x: &mut [Self::Scalar]) {
        (**self).apply_adjoint(y, x)
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::default(), |acc, (&x, &y)| acc + x.conj() * y)
}

pub fn norm2<S: Scalar>(v: &[S]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense matrix data length");
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![S::default(); n * n];
        for i in 0..n {
            data[i * n + i] = S::from_real(1.0);
        }
        Self::new(n, n, data)
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    /// Materializes any operator column by column.
    pub fn from_operator<A: LinearOperator<Scalar = S>>(op: &A) -> Self {
        let (rows, cols) = (op.nrows(), op.ncols());
        let mut data = vec![S::default(); rows * cols];
        let mut e = vec![S::default(); cols];
        let mut col = vec![S::default(); rows];
        for c in 0..cols {
            e[c] = S::from_real(1.0);
            op.apply(&e, &mut col);
            for r in 0..rows {
                data[r * cols + c] = col[r];
            }
            e[c] = S::default();
        }
        Self::new(rows, cols, data)
    }
}

impl<S: Scalar> LinearOperator for DenseMatrix<S> {
    type Scalar = S;

    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[S], y: &mut [S]) {
        y.par_iter_mut()
            .zip(self.data.par_chunks(self.cols.max(1)))
            .for_each(|(yi, row)| {
                *yi = row
                    .iter()
                    .zip(x)
                    .fold(S::default(), |acc, (&a, &b)| acc + a * b);
            });
    }
    fn apply_adjoint(&self, y: &[S], x: &mut [S]) {
        x.iter_mut().for_each(|v| *v = S::default());
        for (row, &yi) in self.data.chunks(self.cols.max(1)).zip(y) {
            for (xj, &a) in x.iter_mut().zip(row) {
                *xj += a.conj() * yi;
            }
        }
    }
}

/// `u ↦ A u − B u`, never materialized.
pub struct Difference<A, B> {
    pub left: A,
    pub right: B,
}

impl<A, B> Difference<A, B>
where
    A: LinearOperator,
    B: LinearOperator<Scalar = A::Scalar>,
{
    pub fn new(left: A, right: B) -> Self {
        assert_eq!(left.nrows(), right.nrows(), "difference operator rows");
        assert_eq!(left.ncols(), right.ncols(), "difference operator cols");
        Self { left, right }
    }
}

impl<A, B> LinearOperator for Difference<A, B>
where
    A: LinearOperator,
    B: LinearOperator<Scalar = A::Scalar>,
{
    type Scalar = A::Scalar;

    fn nrows(&self) -> usize {
        self.left.nrows()
    }
    fn ncols(&self) -> usize {
        self.left.ncols()
    }
    fn apply(&self, x: &[Self::Scalar], y: &mut [Self::Scalar]) {
        let mut tmp = vec![Self::Scalar::default(); y.len()];
        self.left.apply(x, y);
        self.right.apply(x, &mut tmp);
        y.iter_mut().zip(tmp).for_each(|(a, b)| *a = *a - b);
    }
    fn apply_adjoint(&self, y: &[Self::Scalar], x: &mut [Self::Scalar]) {
        let mut tmp = vec![Self::Scalar::default(); x.len()];
        self.left.apply_adjoint(y, x);
        self.right.apply_adjoint(y, &mut tmp);
        x.iter_mut().zip(tmp).for_each(|(a, b)| *a = *a - b);
    }
}

/// `u ↦ c A u` for a real constant `c`.
pub struct Scaled<A> {
    pub inner: A,
    pub factor: f64,
}

impl<A: LinearOperator> LinearOperator for Scaled<A> {
    type Scalar = A::Scalar;

    fn nrows(&self) -> usize {
        self.inner.nrows()
    }
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }
    fn apply(&self, x: &[Self::Scalar], y: &mut [Self::Scalar]) {
        self.inner.apply(x, y);
        y.iter_mut().for_each(|v| *v = v.scale(self.factor));
    }
    fn apply_adjoint(&self, y: &[Self::Scalar], x: &mut [Self::Scalar]) {
        self.inner.apply_adjoint(y, x);
        x.iter_mut().for_each(|v| *v = v.scale(self.factor));
    }
}

/// Restricts a complex operator to real inputs and stacks the real and
/// imaginary parts of its output: `x ↦ [Re(Ax); Im(Ax)]`.
///
/// Least squares over this operator is least squares of the complex system
/// over real-valued images.
pub struct RealRestricted<A> {
    pub inner: A,
}

impl<A: LinearOperator<Scalar = Complex64>> LinearOperator for RealRestricted<A> {
    type Scalar = f64;

    fn nrows(&self) -> usize {
        2 * self.inner.nrows()
    }
    fn ncols(&self) -> usize {
        self.inner.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.inner.nrows();
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut yc = vec![Complex64::default(); m];
        self.inner.apply(&xc, &mut yc);
        let (re, im) = y.split_at_mut(m);
        for ((r, i), v) in re.iter_mut().zip(im.iter_mut()).zip(yc) {
            *r = v.re;
            *i = v.im;
        }
    }
    fn apply_adjoint(&self, y: &[f64], x: &mut [f64]) {
        let m = self.inner.nrows();
        let yc: Vec<Complex64> = y[..m]
            .iter()
            .zip(&y[m..])
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let mut xc = vec![Complex64::default(); x.len()];
        self.inner.apply_adjoint(&yc, &mut xc);
        x.iter_mut().zip(xc).for_each(|(a, b)| *a = b.re);
    }
}

/// Splits complex data into the `[Re; Im]` layout used by [`RealRestricted`].
pub fn stack_real_imag(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|c| c.re).chain(v.iter().map(|c| c.im)).collect()
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    #[test]
    fn dense_adjoint_is_conjugate_transpose() {
        let mut r = rng(3);
        let m = DenseMatrix::new(5, 3, random_complex(&mut r, 15));
        let x = random_complex(&mut r, 3);
        let y = random_complex(&mut r, 5);
        assert!(adjoint_mismatch(&m, &x, &y) < 1e-14);
    }

    #[test]
    fn real_restriction_adjoint() {
        let mut r = rng(4);
        let m = DenseMatrix::new(6, 4, random_complex(&mut r, 24));
        let op = RealRestricted { inner: &m };
        let x = random_real(&mut r, 4);
        let y = random_real(&mut r, 12);
        assert!(adjoint_mismatch(&op, &x, &y) < 1e-14);
        let mut out = vec![0.0; 12];
        op.apply(&x, &mut out);
        let mut full = vec![Complex64::default(); 6];
        let xc: Vec<Complex64> = x.iter().map(|&v| v.into()).collect();
        m.apply(&xc, &mut full);
        assert_eq!(out, stack_real_imag(&full));
    }

    #[test]
    fn difference_and_scaling() {
        let mut r = rng(5);
        let a = DenseMatrix::new(4, 4, random_real(&mut r, 16));
        let b = DenseMatrix::new(4, 4, random_real(&mut r, 16));
        let d = Difference::new(&a, &b);
        let dm = DenseMatrix::from_operator(&d);
        for i in 0..16 {
            assert!((dm.data[i] - (a.data[i] - b.data[i])).abs() < 1e-15);
        }
        let x = random_real(&mut r, 4);
        let y = random_real(&mut r, 4);
        assert!(adjoint_mismatch(&d, &x, &y) < 1e-14);
        let s = Scaled {
            inner: &a,
            factor: -2.5,
        };
        assert!(adjoint_mismatch(&s, &x, &y) < 1e-14);
    }
}
