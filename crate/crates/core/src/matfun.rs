//! Hermitian functional calculus: inverse square roots and the differential
//! of `A -> A^{-1/2}`.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, spectral_norm, CMatrix};
use crate::scalar::{real, Scalar};

/// Relative gap under which eigenvalues share a projector.
pub const GROUPING_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SpectralDecomposition<T: Scalar> {
    pub eigenvalues: Vec<T>,
    pub projectors: Vec<CMatrix<T>>,
}

struct Eigen<T: Scalar> {
    values: Vec<T>,
    vectors: CMatrix<T>,
}

fn eigh<T: Scalar>(h: &CMatrix<T>) -> Result<Eigen<T>> {
    if h.nrows() != h.ncols() {
        return Err(Error::Dimension("Hermitian matrix must be square".into()));
    }
    let e = hermitian_part(h).symmetric_eigen();
    Ok(Eigen {
        values: e.eigenvalues.iter().copied().collect(),
        vectors: e.eigenvectors,
    })
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn from_hermitian(h: &CMatrix<T>) -> Result<Self> {
        let e = eigh(h)?;
        let n = e.values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            e.values[a]
                .partial_cmp(&e.values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let tol = T::lit(GROUPING_TOLERANCE);
        let mut eigenvalues: Vec<T> = Vec::new();
        let mut projectors: Vec<CMatrix<T>> = Vec::new();
        let mut members: Vec<usize> = Vec::new();
        let flush = |members: &mut Vec<usize>,
                     eigenvalues: &mut Vec<T>,
                     projectors: &mut Vec<CMatrix<T>>| {
            if members.is_empty() {
                return;
            }
            let mut p = CMatrix::zeros(n, n);
            let mut mean = T::zero();
            for &k in members.iter() {
                let v = e.vectors.column(k);
                p += v * v.adjoint();
                mean += e.values[k];
            }
            eigenvalues.push(mean / T::lit(members.len() as f64));
            projectors.push(p);
            members.clear();
        };
        for &k in &order {
            if let Some(&last) = members.last() {
                let a = e.values[last];
                if (e.values[k] - a).abs() > tol * T::one().max(a.abs()) {
                    flush(&mut members, &mut eigenvalues, &mut projectors);
                }
            }
            members.push(k);
        }
        flush(&mut members, &mut eigenvalues, &mut projectors);
        Ok(Self {
            eigenvalues,
            projectors,
        })
    }

    pub fn reconstruct(&self) -> CMatrix<T> {
        let n = self.projectors.first().map_or(0, |p| p.nrows());
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(CMatrix::zeros(n, n), |acc, (l, p)| acc + p * real(*l))
    }
}

/// `f(H)` for Hermitian `H`.
pub fn hermitian_function<T: Scalar>(h: &CMatrix<T>, f: impl Fn(T) -> T) -> Result<CMatrix<T>> {
    let e = eigh(h)?;
    let scaled = DMatrix::from_fn(e.vectors.nrows(), e.vectors.ncols(), |i, j| {
        e.vectors[(i, j)] * f(e.values[j])
    });
    Ok(hermitian_part(&(scaled * e.vectors.adjoint())))
}

/// `H^{-1/2}` together with the condition number of `H`.
pub fn inv_sqrt_with_condition<T: Scalar>(h: &CMatrix<T>) -> Result<(CMatrix<T>, T)> {
    let e = eigh(h)?;
    let lo = e
        .values
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| a.min(b));
    let hi = e.values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if !(lo > T::zero()) {
        return Err(Error::NotPositiveDefinite(format!(
            "smallest eigenvalue {:.3e}",
            lo.to_f64()
        )));
    }
    let n = e.vectors.nrows();
    let scaled = DMatrix::from_fn(n, n, |i, j| e.vectors[(i, j)] / e.values[j].sqrt());
    Ok((hermitian_part(&(scaled * e.vectors.adjoint())), hi / lo))
}

pub fn inv_sqrt<T: Scalar>(h: &CMatrix<T>) -> Result<CMatrix<T>> {
    inv_sqrt_with_condition(h).map(|(m, _)| m)
}

/// `D(X) = sum_{k,l} P_k X P_l / (sqrt(l_k) sqrt(l_l) (sqrt(l_k) + sqrt(l_l)))`,
/// the derivative of `A -> A^{-1/2}` at `H` applied to `-X`.
pub fn d_operator<T: Scalar>(h: &CMatrix<T>, x: &CMatrix<T>) -> Result<CMatrix<T>> {
    if x.shape() != h.shape() {
        return Err(Error::Dimension(
            "D operator arguments must have equal shapes".into(),
        ));
    }
    let sd = SpectralDecomposition::from_hermitian(h)?;
    if sd.eigenvalues.iter().any(|l| !(*l > T::zero())) {
        return Err(Error::NotPositiveDefinite(
            "D operator needs a positive definite base point".into(),
        ));
    }
    let roots: Vec<T> = sd.eigenvalues.iter().map(|l| l.sqrt()).collect();
    let n = h.nrows();
    let mut out = CMatrix::zeros(n, n);
    let left: Vec<CMatrix<T>> = sd.projectors.iter().map(|p| p * x).collect();
    for (k, pk_x) in left.iter().enumerate() {
        for (l, pl) in sd.projectors.iter().enumerate() {
            let w = T::one() / (roots[k] * roots[l] * (roots[k] + roots[l]));
            out += pk_x * pl * real(w);
        }
    }
    Ok(out)
}

/// Random Hermitian direction of unit spectral norm.
pub fn unit_hermitian_direction<T: Scalar>(n: usize, seed: u64) -> CMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::<T>::from_fn(n, n, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        Complex::new(T::lit(a), T::lit(b))
    });
    let h = hermitian_part(&g);
    let norm = spectral_norm(&h);
    h * real(T::one() / norm)
}

/// `(s, ||(H + s D0)^{-1/2} - H^{-1/2} + D(s D0)||)` for each scale.
pub fn perturbation_check<T: Scalar>(
    h: &CMatrix<T>,
    delta0: &CMatrix<T>,
    scales: &[T],
) -> Result<Vec<(T, T)>> {
    let base = inv_sqrt(h)?;
    let d = d_operator(h, delta0)?;
    scales
        .iter()
        .map(|&s| {
            if s.is_zero() {
                return Ok((s, T::zero()));
            }
            let moved = inv_sqrt(&(h + delta0 * real(s)))?;
            Ok((s, spectral_norm(&(moved - &base + &d * real(s)))))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, identity, inverse, trace};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn spd(n: usize, seed: u64) -> CMatrix<f64> {
        let g = unit_hermitian_direction::<f64>(n, seed);
        &g * &g + identity(n) * c(0.5, 0.)
    }

    #[test]
    fn inv_sqrt_examples() {
        assert!(frobenius(&(inv_sqrt(&identity::<f64>(3)).unwrap() - identity(3))) < 1e-15);
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(4., 0.), c(9., 0.)]));
        let r = inv_sqrt(&d).unwrap();
        assert!((r[(0, 0)] - c(0.5, 0.)).norm() < 1e-15);
        assert!((r[(1, 1)] - c(1. / 3., 0.)).norm() < 1e-15);
        let h = spd(6, 4);
        let r = inv_sqrt(&h).unwrap();
        assert!(frobenius(&(&r * &r * &h - identity(6))) < 1e-9);
        assert!(frobenius(&(&r * &r - inverse(h.clone()).unwrap())) < 1e-9);
        assert!(inv_sqrt(&(identity::<f64>(2) * c(-1., 0.))).is_err());
    }

    #[test]
    fn decomposition_invariants() {
        let mut h = spd(5, 9);
        let sd = SpectralDecomposition::from_hermitian(&h).unwrap();
        let sum = sd
            .projectors
            .iter()
            .fold(CMatrix::zeros(5, 5), |a, p| a + p);
        assert!(frobenius(&(sum - identity(5))) < 1e-10);
        for (i, p) in sd.projectors.iter().enumerate() {
            for (j, q) in sd.projectors.iter().enumerate() {
                let want = if i == j {
                    p.clone()
                } else {
                    CMatrix::zeros(5, 5)
                };
                assert!(frobenius(&(p * q - want)) < 1e-9);
            }
        }
        assert!(frobenius(&(sd.reconstruct() - &h)) < 1e-9);
        h = identity(4) * c(2., 0.);
        assert_eq!(
            SpectralDecomposition::from_hermitian(&h)
                .unwrap()
                .eigenvalues
                .len(),
            1
        );
    }

    #[test]
    fn d_at_identity_halves() {
        let x = unit_hermitian_direction::<f64>(4, 1);
        let d = d_operator(&identity(4), &x).unwrap();
        assert!(frobenius(&(d - x * c(0.5, 0.))) < 1e-14);
    }

    #[test]
    fn d_trace_swap_and_bound() {
        let h = spd(5, 2);
        let a = unit_hermitian_direction::<f64>(5, 3);
        let b = unit_hermitian_direction::<f64>(5, 4) * c(0.3, 0.7);
        let lhs = trace(&(d_operator(&h, &a).unwrap() * &b));
        let rhs = trace(&(&a * d_operator(&h, &b).unwrap()));
        assert!((lhs - rhs).norm() < 1e-10);
        let smin = crate::linalg::eigvalsh(&h)[0];
        let kappa = 1.0 / (2.0 * smin.powf(1.5));
        assert!(spectral_norm(&d_operator(&h, &a).unwrap()) <= kappa * spectral_norm(&a) + 1e-12);
    }

    #[test]
    fn scalar_taylor_remainder() {
        let eps = 1e-4;
        let rows = perturbation_check(&identity::<f64>(3), &identity(3), &[0.0, eps]).unwrap();
        assert_eq!(rows[0].1, 0.0);
        assert!((rows[1].1 - 3.0 * eps * eps / 8.0).abs() < 1e-10);
    }

    #[test]
    fn second_order_remainder() {
        let h = spd(6, 11);
        let d0 = unit_hermitian_direction::<f64>(6, 12);
        let rows = perturbation_check(&h, &d0, &[1e-2, 1e-3, 1e-4]).unwrap();
        let ratios: Vec<f64> = rows.iter().map(|(s, e)| e / (s * s)).collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
        assert!(hi / lo < 2.0, "{ratios:?}");
    }

    #[test]
    fn f32_instantiation() {
        let h = identity::<f32>(3) * Complex::new(4.0f32, 0.0);
        let r = inv_sqrt(&h).unwrap();
        assert!((r[(1, 1)].re - 0.5).abs() < 1e-6);
    }
}
