//! Levinson-Szegő recursion for a covariance model, the factorization of
//! `R_L^{-1}` it induces, the normalized error `eps_L(nu)` and the averaged
//! error matrix `E_N`.
//!
//! Polynomials follow `Phi_{n+1}(z) = z Phi_n(z) - alpha_n Phi_n*(z)` and
//! `Phi*_{n+1}(z) = Phi*_n(z) - conj(alpha_n) z Phi_n(z)`, with
//! `Phi*_l(z) = 1 + sum_{k=1}^{l} a_{k,l} z^k`.

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{trace, CMatrix};
use crate::scalar::{cabs, cis, real, Scalar};
use crate::toeplitz::{psi_bar_from_blocks, psi_blocks, toeplitz_from_samples, ToeplitzSymbol};
use crate::tsmodel::{CovarianceModel, ModelBank};

#[derive(Clone, Debug, PartialEq)]
pub struct SzegoChain<T: Scalar> {
    reflection: Vec<Complex<T>>,
    sigma2: Vec<T>,
    predictors: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> SzegoChain<T> {
    pub fn order(&self) -> usize {
        self.reflection.len()
    }

    /// `alpha_0 .. alpha_{order-1}`.
    pub fn reflection(&self) -> &[Complex<T>] {
        &self.reflection
    }

    /// `sigma^2_0 .. sigma^2_order`.
    pub fn sigma2(&self) -> &[T] {
        &self.sigma2
    }

    /// `(1, a_{1,l}, ..., a_{l,l})`.
    pub fn predictor(&self, l: usize) -> &[Complex<T>] {
        &self.predictors[l]
    }

    pub fn phi_star(&self, l: usize, z: Complex<T>) -> Complex<T> {
        self.predictors[l]
            .iter()
            .rev()
            .fold(Complex::zero(), |acc, a| acc * z + a)
    }

    /// Monic `Phi_l(z) = sum_k conj(a_{k,l}) z^{l-k}`.
    pub fn phi(&self, l: usize, z: Complex<T>) -> Complex<T> {
        self.predictors[l]
            .iter()
            .fold(Complex::zero(), |acc, a| acc * z + a.conj())
    }

    /// `sum_k |a_{k,l}|`, at most `2^l`.
    pub fn l1_norm(&self, l: usize) -> T {
        self.predictors[l]
            .iter()
            .fold(T::zero(), |acc, a| acc + cabs(*a))
    }

    /// `(1/L) sum_{l<L} |Phi*_l(z)|^2 / sigma^2_l`, evaluated by the recursion.
    pub fn mean_square_orthonormal(&self, l_count: usize, z: Complex<T>) -> T {
        let mut phi = Complex::<T>::one();
        let mut star = Complex::<T>::one();
        let mut acc = T::zero();
        for l in 0..l_count {
            acc += star.norm_sqr() / self.sigma2[l];
            if l + 1 < l_count {
                let a = self.reflection[l];
                let next_phi = z * phi - a * star;
                star -= a.conj() * z * phi;
                phi = next_phi;
            }
        }
        acc / T::lit(l_count as f64)
    }
}

fn chain<T: Scalar>(model: &CovarianceModel<T>, order: usize) -> Result<SzegoChain<T>> {
    let r0 = model.autocov(0).re;
    if !(r0 > T::zero()) {
        return Err(Error::NonPositiveVariance {
            order: 0,
            value: r0.to_f64(),
        });
    }
    let cov: Vec<Complex<T>> = (0..=order as i64).map(|k| model.autocov(-k)).collect();
    let mut a = vec![Complex::<T>::one()];
    let mut sigma2 = vec![r0];
    let mut reflection = Vec::with_capacity(order);
    let mut predictors = vec![a.clone()];
    for n in 0..order {
        // Residual of the order-n predictor against the next Yule-Walker row.
        let delta = a
            .iter()
            .enumerate()
            .fold(Complex::zero(), |acc, (j, aj)| acc + *aj * cov[n + 1 - j]);
        let s = sigma2[n];
        let alpha = delta.conj() / s;
        let mut next = a.clone();
        next.push(Complex::zero());
        for k in 1..=n + 1 {
            next[k] -= alpha.conj() * a[n + 1 - k].conj();
        }
        let s_next = s * (T::one() - alpha.norm_sqr());
        if !(s_next > T::zero()) || cabs(alpha) >= T::one() {
            return Err(Error::NonPositiveVariance {
                order: n + 1,
                value: s_next.to_f64(),
            });
        }
        reflection.push(alpha);
        sigma2.push(s_next);
        predictors.push(next.clone());
        a = next;
    }
    Ok(SzegoChain {
        reflection,
        sigma2,
        predictors,
    })
}

/// Runs the recursion up to `order`.
pub fn levinson<T: Scalar>(model: &CovarianceModel<T>, order: usize) -> Result<SzegoChain<T>> {
    if order == 0 {
        return Err(Error::Domain("Levinson order must be at least 1".into()));
    }
    chain(model, order)
}

/// `(A, d)` with `R_L^{-1} = A diag(1/d) A^H`, `A` upper unitriangular.
pub fn cholesky_inverse_factor<T: Scalar>(
    model: &CovarianceModel<T>,
    l: usize,
) -> Result<(CMatrix<T>, Vec<T>)> {
    if l == 0 {
        return Err(Error::Dimension("L must be at least 1".into()));
    }
    let ch = chain(model, l - 1)?;
    let a = CMatrix::from_fn(l, l, |i, j| {
        if i <= j {
            ch.predictor(j)[j - i]
        } else {
            Complex::zero()
        }
    });
    Ok((a, ch.sigma2[..l].to_vec()))
}

fn unit_circle<T: Scalar>(nu: T) -> Complex<T> {
    cis(T::two_pi() * nu)
}

/// `a_L(nu)^H R_L^{-1} a_L(nu)` through the Szegő polynomials.
pub fn quad_form_identity<T: Scalar>(model: &CovarianceModel<T>, l: usize, nu: T) -> Result<T> {
    Ok(chain(model, l.saturating_sub(1))?.mean_square_orthonormal(l, unit_circle(nu)))
}

/// Same quadratic form by a dense solve.
pub fn quad_form_dense<T: Scalar>(model: &CovarianceModel<T>, l: usize, nu: T) -> Result<T> {
    let r = model.toeplitz_covariance(l)?;
    let chol =
        nalgebra::Cholesky::new(r).ok_or_else(|| Error::NotPositiveDefinite("R_L".into()))?;
    let s = T::one() / T::lit(l as f64).sqrt();
    let a = nalgebra::DVector::from_fn(l, |k, _| unit_circle(nu * T::lit(k as f64)) * s);
    let x = chol.solve(&a);
    Ok(a.dotc(&x).re)
}

/// `eps_L(nu) = S(nu) a_L^H R_L^{-1} a_L - 1` on a grid.
pub fn epsilon<T: Scalar>(model: &CovarianceModel<T>, l: usize, nu_grid: &[T]) -> Result<Vec<T>> {
    if model.is_white() {
        return Ok(vec![T::zero(); nu_grid.len()]);
    }
    let ch = chain(model, l.saturating_sub(1))?;
    Ok(nu_grid
        .iter()
        .map(|&nu| model.density_at(nu) * ch.mean_square_orthonormal(l, unit_circle(nu)) - T::one())
        .collect())
}

/// Grid size used for `eps` and the symbol of `E_N`.
pub fn default_grid_size(l: usize, n: usize) -> usize {
    4096.max(16 * l).max(4 * n).next_power_of_two()
}

pub fn uniform_grid<T: Scalar>(size: usize) -> Vec<T> {
    (0..size).map(|g| T::lit(g as f64 / size as f64)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorMatrixReport<T: Scalar + Serialize> {
    /// `eps_{m,L}` on the grid, one row per series.
    #[serde(skip)]
    pub eps_grid: DMatrix<T>,
    #[serde(skip)]
    pub e_n: ToeplitzSymbol<T>,
    pub sup_eps: T,
    pub trace_e: T,
    /// `(1/N) Tr(E_N (I + E_N))`.
    pub correction: T,
    pub grid_size: usize,
}

impl<T: Scalar + Serialize> ErrorMatrixReport<T> {
    /// Trapezoid value of `int eps_{m,L}` for each series.
    pub fn eps_integrals(&self) -> Vec<T> {
        let g = T::lit(self.eps_grid.ncols() as f64);
        self.eps_grid
            .row_iter()
            .map(|row| row.iter().fold(T::zero(), |a, b| a + *b) / g)
            .collect()
    }
}

/// `(1/N) Tr(E (I + E))` for a Hermitian Toeplitz `E`.
pub fn correction_of<T: Scalar>(e: &ToeplitzSymbol<T>) -> T {
    (e.trace().re + e.frobenius_sq()) / T::lit(e.size() as f64)
}

pub fn error_matrix<T: Scalar + Serialize>(
    bank: &ModelBank<T>,
    l: usize,
    n: usize,
    grid_size: usize,
) -> Result<ErrorMatrixReport<T>> {
    if grid_size < 4 * n {
        return Err(Error::Grid {
            grid: grid_size,
            needed: 4 * n,
        });
    }
    let grid = uniform_grid::<T>(grid_size);
    let first = bank.distinct_index();
    let mut eps_grid = DMatrix::<T>::zeros(bank.len(), grid_size);
    for (i, model) in bank.models().iter().enumerate() {
        if first[i] < i {
            let row = eps_grid.row(first[i]).into_owned();
            eps_grid.row_mut(i).copy_from(&row);
        } else {
            let e = epsilon(model, l, &grid)?;
            for (g, v) in e.into_iter().enumerate() {
                eps_grid[(i, g)] = v;
            }
        }
    }
    let inv_m = T::one() / T::lit(bank.len() as f64);
    let mean: Vec<Complex<T>> = (0..grid_size)
        .map(|g| real(eps_grid.column(g).sum() * inv_m))
        .collect();
    let e_n = toeplitz_from_samples(&mean, n)?;
    let sup_eps = eps_grid.iter().fold(T::zero(), |a, b| a.max(b.abs()));
    Ok(ErrorMatrixReport {
        sup_eps,
        trace_e: e_n.trace().re,
        correction: correction_of(&e_n),
        eps_grid,
        e_n,
        grid_size,
    })
}

/// `E_N = Psi_bar(B_L^{-1}) - I_N`, with no frequency grid involved.
pub fn error_matrix_direct<T: Scalar>(
    bank: &ModelBank<T>,
    l: usize,
    n: usize,
) -> Result<ToeplitzSymbol<T>> {
    let first = bank.distinct_index();
    let mut inverses: Vec<CMatrix<T>> = Vec::with_capacity(bank.len());
    for (i, model) in bank.models().iter().enumerate() {
        let inv = if first[i] < i {
            inverses[first[i]].clone()
        } else {
            crate::linalg::inverse(model.toeplitz_covariance(l)?)?
        };
        inverses.push(inv);
    }
    let identity = ToeplitzSymbol::from_fn(n, |k| {
        if k == 0 {
            Complex::one()
        } else {
            Complex::zero()
        }
    });
    psi_bar_from_blocks(bank, &inverses, n)?.add(&identity.scale(-T::one()))
}

/// `(1/ML) Tr(B_L^{-1} Psi(E_N))`.
pub fn correction_via_psi<T: Scalar>(
    bank: &ModelBank<T>,
    l: usize,
    e_n: &ToeplitzSymbol<T>,
) -> Result<T> {
    let blocks = psi_blocks(bank, &e_n.to_dense(), l)?;
    let mut acc = T::zero();
    for (model, block) in bank.models().iter().zip(&blocks) {
        let r = model.toeplitz_covariance(l)?;
        let chol =
            nalgebra::Cholesky::new(r).ok_or_else(|| Error::NotPositiveDefinite("R_L".into()))?;
        acc += trace(&chol.solve(block)).re;
    }
    Ok(acc / T::lit((bank.len() * l) as f64))
}
