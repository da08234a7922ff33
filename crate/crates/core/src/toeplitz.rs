//! Diagonal averaging `tau`, the covariance-weighted Toeplitzification
//! operators `Psi_K`, the block operator `Psi` and its averaging adjoint
//! `Psi_bar`.
//!
//! A Toeplitz matrix is stored by its coefficients `c(l)`, `l = -(K-1)..K-1`,
//! with entry `(i, j) = c(i - j)`. The shift `J_K` has ones on the first upper
//! diagonal and `J_K^{-1}` denotes its transpose.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cabs, Scalar};
use crate::tsmodel::{CovarianceModel, ModelBank};

/// Above this size the covariance convolution goes through the FFT.
pub const DIRECT_CONVOLUTION_LIMIT: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzSymbol<T: Scalar> {
    size: usize,
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> ToeplitzSymbol<T> {
    /// `coeffs[l + size - 1] = c(l)`.
    pub fn new(size: usize, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if size == 0 || coeffs.len() != 2 * size - 1 {
            return Err(Error::Dimension(format!(
                "Toeplitz symbol of size {size} needs {} coefficients, got {}",
                (2 * size).saturating_sub(1),
                coeffs.len()
            )));
        }
        Ok(Self { size, coeffs })
    }

    pub fn from_fn(size: usize, f: impl Fn(i64) -> Complex<T>) -> Self {
        let c = size as i64 - 1;
        Self {
            size,
            coeffs: (-c..=c).map(f).collect(),
        }
    }

    pub fn zeros(size: usize) -> Self {
        Self::from_fn(size, |_| Complex::zero())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeff(&self, l: i64) -> Complex<T> {
        let i = l + self.size as i64 - 1;
        if i < 0 || i as usize >= self.coeffs.len() {
            Complex::zero()
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        CMatrix::from_fn(self.size, self.size, |i, j| self.coeff(i as i64 - j as i64))
    }

    pub fn transpose(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Self {
            size: self.size,
            coeffs,
        }
    }

    /// Largest violation of `c(-l) = conj(c(l))`.
    pub fn hermitian_defect(&self) -> T {
        let k = self.size as i64 - 1;
        (0..=k).fold(T::zero(), |acc, l| {
            acc.max(cabs(self.coeff(-l) - self.coeff(l).conj()))
        })
    }

    pub fn trace(&self) -> Complex<T> {
        self.coeff(0) * T::lit(self.size as f64)
    }

    /// Squared Frobenius norm, `sum_l (K - |l|) |c(l)|^2`.
    pub fn frobenius_sq(&self) -> T {
        let k = self.size as i64;
        (-(k - 1)..k).fold(T::zero(), |acc, l| {
            acc + T::lit((k - l.abs()) as f64) * self.coeff(l).norm_sqr()
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            size: self.size,
            coeffs: self.coeffs.iter().map(|c| *c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.size != other.size {
            return Err(Error::Dimension(
                "adding Toeplitz symbols of different sizes".into(),
            ));
        }
        Ok(Self {
            size: self.size,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

/// `J_k^power`; negative powers are transposes.
pub fn shift_matrix<T: Scalar>(k: usize, power: i64) -> CMatrix<T> {
    CMatrix::from_fn(k, k, |i, j| {
        if j as i64 - i as i64 == power {
            Complex::new(T::one(), T::zero())
        } else {
            Complex::zero()
        }
    })
}

/// `(1/R) Tr(M J^l)`, the normalized sum of the entries with `i - j = l`.
pub fn tau<T: Scalar>(m: &CMatrix<T>, l: i64) -> Result<Complex<T>> {
    let r = m.nrows();
    if m.ncols() != r {
        return Err(Error::Dimension("tau needs a square matrix".into()));
    }
    if l.unsigned_abs() as usize >= r.max(1) {
        return Err(Error::Domain(format!(
            "lag {l} out of range for a {r}x{r} matrix"
        )));
    }
    Ok(diagonal_sum(m, l) / T::lit(r as f64))
}

fn diagonal_sum<T: Scalar>(m: &CMatrix<T>, l: i64) -> Complex<T> {
    let r = m.nrows() as i64;
    let (i0, j0) = if l >= 0 { (l, 0) } else { (0, -l) };
    (0..r - l.abs()).fold(Complex::zero(), |acc, t| {
        acc + m[((i0 + t) as usize, (j0 + t) as usize)]
    })
}

/// `tau(M)(l)` for `l = -(R-1)..R-1`.
pub fn tau_sequence<T: Scalar>(m: &CMatrix<T>) -> Vec<Complex<T>> {
    let r = m.nrows() as i64;
    let inv = T::one() / T::lit(r as f64);
    (-(r - 1)..r).map(|l| diagonal_sum(m, l) * inv).collect()
}

fn covariance_window<T: Scalar>(model: &CovarianceModel<T>, r: usize, k: usize) -> Vec<Complex<T>> {
    model.covariance_sequence(r + k - 2)
}

/// `c(n) = sum_l r(n - l) tau(l)` by direct summation.
pub fn convolve_direct<T: Scalar>(
    model: &CovarianceModel<T>,
    tau: &[Complex<T>],
    k: usize,
) -> ToeplitzSymbol<T> {
    let r = tau.len().div_ceil(2);
    let cov = covariance_window(model, r, k);
    let off = (r + k - 2) as i64;
    let ri = r as i64;
    let support = model.support().map(|s| s as i64);
    ToeplitzSymbol::from_fn(k, |n| {
        let mut acc = Complex::zero();
        for l in -(ri - 1)..ri {
            let lag = n - l;
            if support.is_some_and(|s| lag.abs() > s) {
                continue;
            }
            acc += cov[(lag + off) as usize] * tau[(l + ri - 1) as usize];
        }
        acc
    })
}

/// Same convolution through zero-padded FFTs.
pub fn convolve_fft<T: Scalar>(
    model: &CovarianceModel<T>,
    tau: &[Complex<T>],
    k: usize,
) -> ToeplitzSymbol<T> {
    let r = tau.len().div_ceil(2);
    let cov = covariance_window(model, r, k);
    let total = tau.len() + cov.len() - 1;
    let len = total.next_power_of_two();
    let mut a = vec![Complex::zero(); len];
    let mut b = vec![Complex::zero(); len];
    a[..tau.len()].copy_from_slice(tau);
    b[..cov.len()].copy_from_slice(&cov);
    T::fft(&mut a, false);
    T::fft(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    T::fft(&mut a, true);
    let inv = T::one() / T::lit(len as f64);
    let shift = (2 * r + k - 3) as i64;
    ToeplitzSymbol::from_fn(k, |n| a[(n + shift) as usize] * inv)
}

/// `Psi_K(M)` for a model, given `tau(M)`.
pub fn convolve_covariance<T: Scalar>(
    model: &CovarianceModel<T>,
    tau: &[Complex<T>],
    k: usize,
) -> ToeplitzSymbol<T> {
    let r = tau.len().div_ceil(2);
    if r > DIRECT_CONVOLUTION_LIMIT || k > DIRECT_CONVOLUTION_LIMIT {
        convolve_fft(model, tau, k)
    } else {
        convolve_direct(model, tau, k)
    }
}

/// `Psi_K^{(m)}(M)` as a Toeplitz symbol.
pub fn psi_m_symbol<T: Scalar>(
    model: &CovarianceModel<T>,
    m: &CMatrix<T>,
    k: usize,
) -> Result<ToeplitzSymbol<T>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 || k == 0 {
        return Err(Error::Dimension(
            "psi needs a nonempty square matrix and K >= 1".into(),
        ));
    }
    Ok(convolve_covariance(model, &tau_sequence(m), k))
}

/// `Psi_K^{(m)}(M)`, `K x K` dense.
pub fn psi_m<T: Scalar>(
    model: &CovarianceModel<T>,
    m: &CMatrix<T>,
    k: usize,
) -> Result<CMatrix<T>> {
    Ok(psi_m_symbol(model, m, k)?.to_dense())
}

/// Diagonal blocks of `Psi(M)` for an `N x N` matrix.
pub fn psi_blocks<T: Scalar>(
    bank: &ModelBank<T>,
    m: &CMatrix<T>,
    l: usize,
) -> Result<Vec<CMatrix<T>>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 || l == 0 {
        return Err(Error::Dimension(
            "psi needs a nonempty square matrix and L >= 1".into(),
        ));
    }
    let tau = tau_sequence(m);
    let first = bank.distinct_index();
    let mut out: Vec<CMatrix<T>> = Vec::with_capacity(bank.len());
    for (i, model) in bank.models().iter().enumerate() {
        let block = if first[i] < i {
            out[first[i]].clone()
        } else {
            convolve_covariance(model, &tau, l).to_dense()
        };
        out.push(block);
    }
    Ok(out)
}

/// `Psi(M)`: `ML x ML` block diagonal with block `m` equal to `Psi_L^{(m)}(M)`.
pub fn psi_block<T: Scalar>(bank: &ModelBank<T>, m: &CMatrix<T>, l: usize) -> Result<CMatrix<T>> {
    Ok(crate::linalg::block_diagonal(&psi_blocks(bank, m, l)?))
}

/// `Psi_bar` from the diagonal blocks of an `ML x ML` matrix.
pub fn psi_bar_from_blocks<T: Scalar>(
    bank: &ModelBank<T>,
    blocks: &[CMatrix<T>],
    n: usize,
) -> Result<ToeplitzSymbol<T>> {
    if blocks.len() != bank.len() {
        return Err(Error::Dimension(format!(
            "{} blocks for a bank of {}",
            blocks.len(),
            bank.len()
        )));
    }
    let mut acc = ToeplitzSymbol::zeros(n);
    for (model, block) in bank.models().iter().zip(blocks) {
        acc = acc.add(&psi_m_symbol(model, block, n)?)?;
    }
    Ok(acc.scale(T::one() / T::lit(bank.len() as f64)))
}

/// Splits the diagonal blocks out of an `ML x ML` matrix.
pub fn diagonal_blocks<T: Scalar>(mtx: &CMatrix<T>, m: usize) -> Result<Vec<CMatrix<T>>> {
    let ml = mtx.nrows();
    if m == 0 || !ml.is_multiple_of(m) || mtx.ncols() != ml {
        return Err(Error::Dimension(format!(
            "{ml}x{} matrix is not made of {m} square blocks",
            mtx.ncols()
        )));
    }
    let l = ml / m;
    Ok((0..m)
        .map(|i| mtx.view((i * l, i * l), (l, l)).into_owned())
        .collect())
}

/// `Psi_bar(M) = (1/M) sum_m Psi_N^{(m)}(M_mm)` as an `N x N` Toeplitz symbol.
pub fn psi_bar_symbol<T: Scalar>(
    bank: &ModelBank<T>,
    mtx: &CMatrix<T>,
    n: usize,
) -> Result<ToeplitzSymbol<T>> {
    psi_bar_from_blocks(bank, &diagonal_blocks(mtx, bank.len())?, n)
}

pub fn psi_bar<T: Scalar>(bank: &ModelBank<T>, mtx: &CMatrix<T>, n: usize) -> Result<CMatrix<T>> {
    Ok(psi_bar_symbol(bank, mtx, n)?.to_dense())
}

/// Toeplitz matrix `int f(nu) d_K d_K^H dnu` from samples of `f` on the
/// uniform grid `g / G`.
pub fn toeplitz_from_samples<T: Scalar>(
    samples: &[Complex<T>],
    k: usize,
) -> Result<ToeplitzSymbol<T>> {
    let g = samples.len();
    if g < 4 * k {
        return Err(Error::Grid {
            grid: g,
            needed: 4 * k,
        });
    }
    let mut buf = samples.to_vec();
    T::fft(&mut buf, true);
    let inv = T::one() / T::lit(g as f64);
    let gi = g as i64;
    Ok(ToeplitzSymbol::from_fn(k, |l| {
        buf[l.rem_euclid(gi) as usize] * inv
    }))
}

pub fn toeplitz_from_symbol<T: Scalar>(
    symbol: impl Fn(T) -> Complex<T>,
    k: usize,
    grid_size: usize,
) -> Result<ToeplitzSymbol<T>> {
    if grid_size < 4 * k {
        return Err(Error::Grid {
            grid: grid_size,
            needed: 4 * k,
        });
    }
    let samples: Vec<Complex<T>> = (0..grid_size)
        .map(|g| symbol(T::lit(g as f64) / T::lit(grid_size as f64)))
        .collect();
    toeplitz_from_samples(&samples, k)
}
