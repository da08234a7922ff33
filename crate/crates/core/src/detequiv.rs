//! Deterministic equivalent of the block correlation spectrum: the pair
//! `(T(z), T~(z))` solving
//!
//! `T  = -(1/z) (I_ML + B^{-1/2} Psi(T~^T) B^{-1/2})^{-1}`
//! `T~ = -(1/z) (I_N + c Psi_bar^T(B^{-1/2} T B^{-1/2}))^{-1}`
//!
//! and the measure `mu_N` whose Stieltjes transform is `(1/ML) Tr T(z)`.

use num_complex::Complex;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigvalsh, frobenius, identity, inverse, spectral_norm, trace, CMatrix};
use crate::mplaw::MarchenkoPastur;
use crate::sampling::bank_inv_sqrt;
use crate::scalar::{real, Scalar};
use crate::szego::{correction_via_psi, default_grid_size, error_matrix};
use crate::toeplitz::{convolve_covariance, tau_sequence, ToeplitzSymbol};
use crate::tsmodel::ModelBank;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T: Scalar> {
    /// Relative Frobenius change at which iteration stops.
    pub tol: T,
    pub max_iter: usize,
    /// Relaxation weight on the new iterate.
    pub damping: T,
    /// Halve the weight to 0.5 once the change grows three times in a row.
    pub auto_damp: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 500,
            damping: T::one(),
            auto_damp: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StieltjesPair<T: Scalar> {
    pub z: Complex<T>,
    /// Diagonal blocks of `T`, one per series.
    pub t_blocks: Vec<CMatrix<T>>,
    pub t_tilde: CMatrix<T>,
    pub iterations: usize,
    /// Relative residual of the `T` equation at the returned pair; the `T~`
    /// equation holds exactly by construction.
    pub residual: T,
}

impl<T: Scalar> StieltjesPair<T> {
    /// `(1/ML) Tr T(z)`, the Stieltjes transform of `mu_N`.
    pub fn trace_stieltjes(&self) -> Complex<T> {
        let ml: usize = self.t_blocks.iter().map(|b| b.nrows()).sum();
        self.t_blocks
            .iter()
            .fold(Complex::zero(), |acc, b| acc + trace(b))
            / T::lit(ml as f64)
    }

    pub fn t_dense(&self) -> CMatrix<T> {
        crate::linalg::block_diagonal(&self.t_blocks)
    }

    /// Worst violations of `Im T >= 0`, `Im(zT) >= 0` and `||T|| <= 1/Im z`
    /// over `T` and `T~`, as nonnegative numbers.
    pub fn class_defects(&self) -> ClassDefects<T> {
        let mut d = ClassDefects::<T>::default();
        let mats = self.t_blocks.iter().chain(std::iter::once(&self.t_tilde));
        for m in mats {
            let im = imaginary_part(m);
            let zim = imaginary_part(&(m * self.z));
            d.im = d.im.max(-eigvalsh(&im)[0]);
            d.z_im = d.z_im.max(-eigvalsh(&zim)[0]);
            d.norm = d.norm.max(spectral_norm(m) - T::one() / self.z.im);
        }
        d.im = d.im.max(T::zero());
        d.z_im = d.z_im.max(T::zero());
        d.norm = d.norm.max(T::zero());
        d
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassDefects<T: Scalar> {
    pub im: T,
    pub z_im: T,
    pub norm: T,
}

impl<T: Scalar> ClassDefects<T> {
    pub fn max(&self) -> T {
        self.im.max(self.z_im).max(self.norm)
    }
}

/// `(X - X^H) / 2i`.
pub fn imaginary_part<T: Scalar>(x: &CMatrix<T>) -> CMatrix<T> {
    (x - x.adjoint()) * Complex::new(T::zero(), T::lit(-0.5))
}

fn rel_change<T: Scalar>(new: &[CMatrix<T>], old: &[CMatrix<T>]) -> T {
    let (mut num, mut den) = (T::zero(), T::zero());
    for (a, b) in new.iter().zip(old) {
        num += frobenius(&(a - b)).powi(2);
        den += frobenius(a).powi(2);
    }
    (num / den).sqrt()
}

/// Canonical system for a bank at fixed `(L, N)`, with `B^{-1/2}` precomputed.
pub struct CanonicalSystem<T: Scalar> {
    bank: ModelBank<T>,
    l: usize,
    n: usize,
    c: T,
    law: MarchenkoPastur<T>,
    b_inv_sqrt: Vec<CMatrix<T>>,
    /// Representative of each distinct model and its multiplicity.
    groups: Vec<(usize, usize)>,
    first: Vec<usize>,
}

impl<T: Scalar> CanonicalSystem<T> {
    pub fn new(bank: &ModelBank<T>, l: usize, n: usize) -> Result<Self> {
        if l == 0 || n == 0 {
            return Err(Error::Dimension("L and N must be at least 1".into()));
        }
        let c = T::lit((bank.len() * l) as f64) / T::lit(n as f64);
        let first = bank.distinct_index();
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for (i, &f) in first.iter().enumerate() {
            if f == i {
                groups.push((i, 1));
            } else if let Some(g) = groups.iter_mut().find(|g| g.0 == f) {
                g.1 += 1;
            }
        }
        Ok(Self {
            bank: bank.clone(),
            l,
            n,
            c,
            law: MarchenkoPastur::new(c)?,
            b_inv_sqrt: bank_inv_sqrt(bank, l)?,
            groups,
            first,
        })
    }

    /// `(M, L, N)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.bank.len(), self.l, self.n)
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn law(&self) -> &MarchenkoPastur<T> {
        &self.law
    }

    /// `T~` from `T`.
    pub fn tilde_update(&self, z: Complex<T>, t_blocks: &[CMatrix<T>]) -> Result<CMatrix<T>> {
        let m = T::lit(self.bank.len() as f64);
        let mut sym = ToeplitzSymbol::zeros(self.n);
        for &(i, count) in &self.groups {
            let d = &self.b_inv_sqrt[i];
            let x = d * &t_blocks[i] * d;
            let part = convolve_covariance(self.bank.get(i), &tau_sequence(&x), self.n);
            sym = sym.add(&part.scale(T::lit(count as f64) / m))?;
        }
        // Non-identical members of a group only share the model, not T.
        for (i, &f) in self.first.iter().enumerate() {
            if f != i && t_blocks[i] != t_blocks[f] {
                let d = &self.b_inv_sqrt[i];
                let x = d * &t_blocks[i] * d;
                let y = d * &t_blocks[f] * d;
                let diff = convolve_covariance(self.bank.get(i), &tau_sequence(&(x - y)), self.n);
                sym = sym.add(&diff.scale(T::one() / m))?;
            }
        }
        let a = identity::<T>(self.n) + sym.transpose().to_dense() * real(self.c);
        Ok(inverse(a)? * (-Complex::<T>::one() / z))
    }

    /// `T` from `T~`.
    pub fn t_update(&self, z: Complex<T>, t_tilde: &CMatrix<T>) -> Result<Vec<CMatrix<T>>> {
        let mut tau = tau_sequence(t_tilde);
        tau.reverse();
        let scale = -Complex::<T>::one() / z;
        let mut out: Vec<CMatrix<T>> = Vec::with_capacity(self.bank.len());
        for (i, model) in self.bank.models().iter().enumerate() {
            if self.first[i] < i {
                out.push(out[self.first[i]].clone());
                continue;
            }
            let d = &self.b_inv_sqrt[i];
            let p = convolve_covariance(model, &tau, self.l).to_dense();
            let a = identity::<T>(self.l) + d * p * d;
            out.push(inverse(a)? * scale);
        }
        Ok(out)
    }

    /// MP starting point `T = t I`, `T~ = t~ I`.
    pub fn initial(&self, z: Complex<T>) -> Result<Vec<CMatrix<T>>> {
        let t = self.law.stieltjes_t(z)?;
        Ok(vec![identity::<T>(self.l) * t; self.bank.len()])
    }

    pub fn solve(&self, z: Complex<T>, opts: &SolverOptions<T>) -> Result<StieltjesPair<T>> {
        self.solve_from(z, None, opts)
    }

    /// Iterates from `init` (or the MP point) until the relative change of
    /// `(T, T~)` drops below `opts.tol`.
    pub fn solve_from(
        &self,
        z: Complex<T>,
        init: Option<&[CMatrix<T>]>,
        opts: &SolverOptions<T>,
    ) -> Result<StieltjesPair<T>> {
        if !(z.im > T::zero()) {
            return Err(Error::Domain("canonical equations need Im z > 0".into()));
        }
        let mut t = match init {
            Some(b) => b.to_vec(),
            None => self.initial(z)?,
        };
        let mut t_tilde = identity::<T>(self.n) * self.law.stieltjes_t_tilde(z)?;
        let mut omega = opts.damping;
        let mut prev = T::max_value().unwrap();
        let mut growth = 0;
        let mut change = prev;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            iterations += 1;
            let tt_new = self.tilde_update(z, &t)?;
            let cand = self.t_update(z, &tt_new)?;
            let t_new: Vec<CMatrix<T>> = if omega == T::one() {
                cand
            } else {
                t.iter()
                    .zip(&cand)
                    .map(|(a, b)| a * real(T::one() - omega) + b * real(omega))
                    .collect()
            };
            change = rel_change(&t_new, &t).max(rel_change(
                std::slice::from_ref(&tt_new),
                std::slice::from_ref(&t_tilde),
            ));
            t = t_new;
            t_tilde = tt_new;
            if change < opts.tol {
                break;
            }
            growth = if change > prev { growth + 1 } else { 0 };
            if opts.auto_damp && growth >= 3 && omega > T::lit(0.5) {
                omega = T::lit(0.5);
                growth = 0;
            }
            prev = change;
        }
        if !(change < opts.tol) {
            return Err(Error::NoConvergence {
                iterations,
                change: change.to_f64(),
            });
        }
        let t_tilde = self.tilde_update(z, &t)?;
        let residual = rel_change(&self.t_update(z, &t_tilde)?, &t);
        Ok(StieltjesPair {
            z,
            t_blocks: t,
            t_tilde,
            iterations,
            residual,
        })
    }

    /// Relative residuals of the two equations at an arbitrary pair.
    pub fn residuals(&self, pair: &StieltjesPair<T>) -> Result<(T, T)> {
        let t = self.t_update(pair.z, &pair.t_tilde)?;
        let tt = self.tilde_update(pair.z, &pair.t_blocks)?;
        Ok((
            rel_change(&t, &pair.t_blocks),
            rel_change(
                std::slice::from_ref(&tt),
                std::slice::from_ref(&pair.t_tilde),
            ),
        ))
    }

    /// `pi^{-1} Im (1/ML) Tr T(x + i eta)` along a grid, warm-starting each
    /// point from the previous one.
    pub fn smoothed_density(
        &self,
        x_grid: &[T],
        eta: T,
        opts: &SolverOptions<T>,
    ) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(x_grid.len());
        let mut warm: Option<Vec<CMatrix<T>>> = None;
        for &x in x_grid {
            let z = Complex::new(x, eta);
            let pair = match self.solve_from(z, warm.as_deref(), opts) {
                Ok(p) => p,
                Err(_) if warm.is_some() => self.solve(z, opts)?,
                Err(e) => return Err(e),
            };
            out.push(pair.trace_stieltjes().im / T::pi());
            warm = Some(pair.t_blocks);
        }
        Ok(out)
    }

    /// `int lambda^k dmu_N` for `k = 0, 1, 2` from the Stieltjes transform on
    /// the circle `|z - center| = radius`, which must enclose the support.
    pub fn moments_by_contour(
        &self,
        center: T,
        radius: T,
        points: usize,
        opts: &SolverOptions<T>,
    ) -> Result<[T; 3]> {
        let mut m = [T::zero(); 3];
        let mut warm: Option<Vec<CMatrix<T>>> = None;
        let half = points / 2;
        for j in 0..half {
            let theta = T::pi() * T::lit((j as f64 + 0.5) / half as f64);
            let e = Complex::new(theta.cos(), theta.sin());
            let z = Complex::new(center, T::zero()) + e * radius;
            let pair = self.solve_from(z, warm.as_deref(), opts)?;
            let s = pair.trace_stieltjes();
            warm = Some(pair.t_blocks);
            // The lower half contributes the conjugate, so only real parts add up.
            let mut zk = Complex::<T>::one();
            for mk in m.iter_mut() {
                *mk -= (zk * s * e * radius).re / T::lit(half as f64);
                zk *= z;
            }
        }
        Ok(m)
    }
}

pub fn solve_canonical<T: Scalar>(
    bank: &ModelBank<T>,
    l: usize,
    n: usize,
    z: Complex<T>,
    opts: &SolverOptions<T>,
) -> Result<StieltjesPair<T>> {
    CanonicalSystem::new(bank, l, n)?.solve(z, opts)
}

pub fn density_mu_n<T: Scalar>(
    bank: &ModelBank<T>,
    l: usize,
    n: usize,
    x_grid: &[T],
    eta: T,
    opts: &SolverOptions<T>,
) -> Result<Vec<T>> {
    CanonicalSystem::new(bank, l, n)?.smoothed_density(x_grid, eta, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SqDevIntegral<T: Scalar + Serialize> {
    pub c: T,
    /// `int (lambda - 1)^2 dmu_mp = c`.
    pub mp: T,
    /// `c (1/N) Tr(E_N (I + E_N))`.
    pub correction: T,
    /// `int (lambda - 1)^2 dmu_N = c + correction`.
    pub integral: T,
    /// `c (1/ML) Tr(B^{-1} Psi(E_N))`, the same quantity by duality.
    pub correction_via_psi: T,
}

/// `int (lambda - 1)^2 dmu_N` in closed form.
pub fn sq_dev_integral<T: Scalar + Serialize>(
    bank: &ModelBank<T>,
    l: usize,
    n: usize,
) -> Result<SqDevIntegral<T>> {
    let c = T::lit((bank.len() * l) as f64) / T::lit(n as f64);
    let rep = error_matrix(bank, l, n, default_grid_size(l, n))?;
    let correction = c * rep.correction;
    let via = c * correction_via_psi(bank, l, &rep.e_n)?;
    Ok(SqDevIntegral {
        c,
        mp: c,
        correction,
        integral: c + correction,
        correction_via_psi: via,
    })
}

/// Report z-grid: `Im z` in `{1e-2, 1e-1, 1}` and real parts spanning
/// `[-1, lambda_+ + 1]`.
pub fn default_z_grid(c: f64, points: usize) -> Vec<Complex<f64>> {
    let hi = (1.0 + c.sqrt()).powi(2) + 1.0;
    let mut out = Vec::new();
    for im in [0.05, 0.1, 1.0] {
        for k in 0..points {
            let re = -1.0 + (hi + 1.0) * k as f64 / (points.max(2) - 1) as f64;
            out.push(Complex::new(re, im));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct DetEquivReport {
    pub dims: [usize; 3],
    pub c: f64,
    pub z_grid: Vec<[f64; 2]>,
    pub trace_t: Vec<[f64; 2]>,
    pub mp_trace: Vec<[f64; 2]>,
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
    pub sq_dev_integral: f64,
    pub mp_sq_dev: f64,
    pub correction: f64,
}

/// Solves on every grid point (in parallel) and collects the closed-form
/// statistic integral.
pub fn report(
    bank: &ModelBank<f64>,
    l: usize,
    n: usize,
    z_grid: &[Complex<f64>],
    opts: &SolverOptions<f64>,
) -> Result<DetEquivReport> {
    let system = CanonicalSystem::new(bank, l, n)?;
    let pairs: Vec<StieltjesPair<f64>> = z_grid
        .par_iter()
        .map(|&z| system.solve(z, opts))
        .collect::<Result<_>>()?;
    let sq = sq_dev_integral(bank, l, n)?;
    let pair = |z: Complex<f64>| [z.re, z.im];
    Ok(DetEquivReport {
        dims: [bank.len(), n, l],
        c: system.c(),
        z_grid: z_grid.iter().map(|z| pair(*z)).collect(),
        trace_t: pairs.iter().map(|p| pair(p.trace_stieltjes())).collect(),
        mp_trace: z_grid
            .iter()
            .map(|&z| system.law().stieltjes_t(z).map(pair))
            .collect::<Result<_>>()?,
        iterations: pairs.iter().map(|p| p.iterations).collect(),
        residuals: pairs.iter().map(|p| p.residual).collect(),
        sq_dev_integral: sq.integral,
        mp_sq_dev: sq.mp,
        correction: sq.correction,
    })
}

/// `||T - t I||_F / ||T||_F`.
pub fn distance_to_mp<T: Scalar>(pair: &StieltjesPair<T>, t: Complex<T>) -> T {
    let (mut num, mut den) = (T::zero(), T::zero());
    for b in &pair.t_blocks {
        num += frobenius(&(b - identity::<T>(b.nrows()) * t)).powi(2);
        den += frobenius(b).powi(2);
    }
    (num / den).sqrt()
}
