//! Small dense helpers shared by the numerical modules.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{cabs, Scalar};

pub type CMatrix<T> = DMatrix<Complex<T>>;

pub fn identity<T: Scalar>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

pub fn trace<T: Scalar>(m: &CMatrix<T>) -> Complex<T> {
    (0..m.nrows().min(m.ncols())).fold(Complex::zero(), |acc, i| acc + m[(i, i)])
}

pub fn frobenius<T: Scalar>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

pub fn max_abs<T: Scalar>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}

/// `(m + m^H) / 2`.
pub fn hermitian_part<T: Scalar>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()) * Complex::new(T::lit(0.5), T::zero())
}

pub fn hermitian_defect<T: Scalar>(m: &CMatrix<T>) -> T {
    max_abs(&(m - m.adjoint()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh<T: Scalar>(m: &CMatrix<T>) -> Vec<T> {
    let mut ev: Vec<T> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Largest singular value.
pub fn spectral_norm<T: Scalar>(m: &CMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(T::zero(), |acc, s| acc.max(*s))
}

pub fn inverse<T: Scalar>(m: CMatrix<T>) -> Result<CMatrix<T>> {
    let n = m.nrows();
    m.try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("singular {n}x{n} matrix")))
}

pub fn scale<T: Scalar>(m: &CMatrix<T>, s: Complex<T>) -> CMatrix<T> {
    m.map(|z| z * s)
}

pub fn block_diagonal<T: Scalar>(blocks: &[CMatrix<T>]) -> CMatrix<T> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols()))
            .copy_from(b);
        off += b.nrows();
    }
    out
}

pub fn is_one<T: Scalar>(z: Complex<T>, tol: T) -> bool {
    cabs(z - Complex::one()) <= tol
}

fn split<T: Scalar>(w: &CMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    (w.map(|z| z.re), w.map(|z| z.im))
}

/// `W W^H` through real products, which take the optimized real kernel.
pub fn gram<T: Scalar>(w: &CMatrix<T>) -> CMatrix<T> {
    let (a, b) = split(w);
    let re = &a * a.transpose() + &b * b.transpose();
    let im = &b * a.transpose() - &a * b.transpose();
    let mut out = CMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
        Complex::new(re[(i, j)], im[(i, j)])
    });
    for i in 0..out.nrows() {
        out[(i, i)].im = T::zero();
    }
    out
}

/// Complex product through real products.
pub fn matmul<T: Scalar>(x: &CMatrix<T>, y: &CMatrix<T>) -> CMatrix<T> {
    let (a, b) = split(x);
    let (c, d) = split(y);
    let re = &a * &c - &b * &d;
    let im = &a * &d + &b * &c;
    CMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
        Complex::new(re[(i, j)], im[(i, j)])
    })
}
