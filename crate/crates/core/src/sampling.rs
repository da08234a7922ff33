//! Sample matrices built from an ensemble: the stacked lag matrix `W`, the
//! sample covariance, block normalizations, lag-window estimates and linear
//! spectral statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigvalsh, gram, hermitian_defect, hermitian_part, max_abs, CMatrix};
use crate::matfun::inv_sqrt_with_condition;
use crate::scalar::{cis, Scalar};
use crate::tsmodel::{CovarianceModel, Ensemble, ModelBank};

/// Condition number beyond which a diagonal block cannot be normalized.
pub const MAX_BLOCK_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `(lambda - 1)^2`
    SqDev,
    /// `log lambda`
    #[serde(rename = "logdet")]
    LogDet,
    /// `lambda`
    Mean,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::SqDev, Statistic::LogDet, Statistic::Mean];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::SqDev => "sq_dev",
            Statistic::LogDet => "logdet",
            Statistic::Mean => "mean",
        }
    }

    pub fn apply<T: Scalar>(self, lambda: T) -> Result<T> {
        match self {
            Statistic::SqDev => Ok((lambda - T::one()).powi(2)),
            Statistic::Mean => Ok(lambda),
            Statistic::LogDet => {
                if lambda > T::lit(1e-12) {
                    Ok(lambda.ln())
                } else {
                    Err(Error::Domain(format!(
                        "log of eigenvalue {:.3e}",
                        lambda.to_f64()
                    )))
                }
            }
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown statistic {s:?} (expected sq_dev, logdet or mean)"
                ))
            })
    }
}

/// `ML x ML` Hermitian matrix made of `M x M` blocks of size `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockHermitian<T: Scalar> {
    m: usize,
    l: usize,
    mat: CMatrix<T>,
}

impl<T: Scalar> BlockHermitian<T> {
    pub fn new(m: usize, l: usize, mat: CMatrix<T>) -> Result<Self> {
        if m == 0 || l == 0 || mat.nrows() != m * l || mat.ncols() != m * l {
            return Err(Error::Dimension(format!(
                "{}x{} matrix does not have {m}x{m} blocks of size {l}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let scale = T::one().max(max_abs(&mat));
        if hermitian_defect(&mat) > T::lit(1e-12) * scale {
            return Err(Error::Dimension("matrix is not Hermitian".into()));
        }
        Ok(Self {
            m,
            l,
            mat: hermitian_part(&mat),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.l)
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.mat
    }

    pub fn block(&self, i: usize, j: usize) -> nalgebra::DMatrixView<'_, Complex<T>> {
        self.mat.view((i * self.l, j * self.l), (self.l, self.l))
    }

    pub fn diagonal_blocks(&self) -> Vec<CMatrix<T>> {
        (0..self.m).map(|i| self.block(i, i).into_owned()).collect()
    }
}

/// Column `n` is `y_n^L / sqrt(N)`, the lag vectors of all series stacked
/// series by series.
pub fn build_w<T: Scalar>(ens: &Ensemble<T>) -> CMatrix<T> {
    let (m, n, l) = ens.dims();
    let s = T::one() / T::lit(n as f64).sqrt();
    CMatrix::from_fn(m * l, n, |row, col| ens.sample(row / l, col + row % l) * s)
}

/// Same rows ordered lag by lag.
pub fn build_w_lagged<T: Scalar>(ens: &Ensemble<T>) -> CMatrix<T> {
    let (m, n, _) = ens.dims();
    let s = T::one() / T::lit(n as f64).sqrt();
    CMatrix::from_fn(ens.m * ens.l, n, |row, col| {
        ens.sample(row % m, col + row / m) * s
    })
}

/// `W W^H`.
pub fn sample_cov<T: Scalar>(ens: &Ensemble<T>) -> BlockHermitian<T> {
    BlockHermitian {
        m: ens.m,
        l: ens.l,
        mat: gram(&build_w(ens)),
    }
}

/// Keeps the diagonal blocks.
pub fn block_diag<T: Scalar>(b: &BlockHermitian<T>) -> BlockHermitian<T> {
    let mut mat = CMatrix::zeros(b.mat.nrows(), b.mat.ncols());
    for i in 0..b.m {
        mat.view_mut((i * b.l, i * b.l), (b.l, b.l))
            .copy_from(&b.block(i, i));
    }
    BlockHermitian {
        m: b.m,
        l: b.l,
        mat,
    }
}

/// `D R D` for a block diagonal `D` given by its blocks.
pub fn normalize<T: Scalar>(r: &BlockHermitian<T>, d: &[CMatrix<T>]) -> BlockHermitian<T> {
    let (m, l) = r.dims();
    let mut mat = CMatrix::zeros(m * l, m * l);
    for i in 0..m {
        for j in i..m {
            let b = &d[i] * r.block(i, j) * &d[j];
            mat.view_mut((i * l, j * l), (l, l)).copy_from(&b);
            if j != i {
                mat.view_mut((j * l, i * l), (l, l)).copy_from(&b.adjoint());
            }
        }
    }
    BlockHermitian {
        m,
        l,
        mat: hermitian_part(&mat),
    }
}

/// `B^{-1/2} R B^{-1/2}` with `B` the block diagonal of `R`.
pub fn block_corr<T: Scalar>(r: &BlockHermitian<T>) -> Result<BlockHermitian<T>> {
    let mut d = Vec::with_capacity(r.m);
    for (i, block) in r.diagonal_blocks().iter().enumerate() {
        let (root, cond) = inv_sqrt_with_condition(block).map_err(|_| Error::SingularBlock {
            block: i,
            cond: f64::INFINITY,
        })?;
        if !(cond.to_f64() <= MAX_BLOCK_CONDITION) {
            return Err(Error::SingularBlock {
                block: i,
                cond: cond.to_f64(),
            });
        }
        d.push(root);
    }
    Ok(normalize(r, &d))
}

/// Sample block correlation matrix.
pub fn sample_block_corr<T: Scalar>(ens: &Ensemble<T>) -> Result<BlockHermitian<T>> {
    block_corr(&sample_cov(ens))
}

/// Normalization by the true block covariances of the bank.
pub fn oracle_block_corr<T: Scalar>(
    ens: &Ensemble<T>,
    bank: &ModelBank<T>,
) -> Result<BlockHermitian<T>> {
    if bank.len() != ens.m {
        return Err(Error::Dimension(format!(
            "bank has {} series, ensemble {}",
            bank.len(),
            ens.m
        )));
    }
    let d = bank_inv_sqrt(bank, ens.l)?;
    Ok(normalize(&sample_cov(ens), &d))
}

/// `R_{m,L}^{-1/2}` for every series of the bank.
pub fn bank_inv_sqrt<T: Scalar>(bank: &ModelBank<T>, l: usize) -> Result<Vec<CMatrix<T>>> {
    let first = bank.distinct_index();
    let mut out: Vec<CMatrix<T>> = Vec::with_capacity(bank.len());
    for (i, model) in bank.models().iter().enumerate() {
        let d = if first[i] < i {
            out[first[i]].clone()
        } else {
            crate::matfun::inv_sqrt(&model.toeplitz_covariance(l)?)?
        };
        out.push(d);
    }
    Ok(out)
}

/// `r^_m(l) = (1/N) sum_{n=1}^{N-l} y_{m,n+l} conj(y_{m,n})` for `l = 0..=max_lag`.
pub fn sample_autocov<T: Scalar>(ens: &Ensemble<T>, m: usize, max_lag: usize) -> Vec<Complex<T>> {
    let n = ens.n;
    let inv = T::one() / T::lit(n as f64);
    (0..=max_lag)
        .map(|l| {
            let mut acc = Complex::zero();
            for t in 0..n.saturating_sub(l) {
                acc += ens.sample(m, t + l) * ens.sample(m, t).conj();
            }
            acc * inv
        })
        .collect()
}

/// `S^_m(nu) = sum_{|l| <= L-1} r^_m(l) exp(-2 i pi l nu)`, one row per series.
pub fn lag_window_estimator<T: Scalar>(ens: &Ensemble<T>, nu_grid: &[T]) -> DMatrix<T> {
    let l = ens.l;
    let r: Vec<Vec<Complex<T>>> = (0..ens.m).map(|m| sample_autocov(ens, m, l - 1)).collect();
    DMatrix::from_fn(ens.m, nu_grid.len(), |m, g| {
        let w = T::two_pi() * nu_grid[g];
        let mut s = r[m][0].re;
        for (k, rk) in r[m].iter().enumerate().skip(1) {
            s += T::lit(2.0) * (*rk * cis(-w * T::lit(k as f64))).re;
        }
        s
    })
}

/// Toeplitz matrix of the sample autocovariances of series `m`.
pub fn toeplitz_block_estimate<T: Scalar>(ens: &Ensemble<T>, m: usize) -> CMatrix<T> {
    let r = sample_autocov(ens, m, ens.l - 1);
    CMatrix::from_fn(ens.l, ens.l, |i, j| {
        if i >= j {
            r[i - j]
        } else {
            r[j - i].conj()
        }
    })
}

/// `sum_{|l| <= L-2} (1 - |l|/L) r(l) exp(-2 i pi l nu) - S(nu)`.
pub fn expected_periodogram_bias<T: Scalar>(model: &CovarianceModel<T>, l: usize, nu: T) -> T {
    let w = T::two_pi() * nu;
    let top = l as i64 - 2;
    let mut s = T::zero();
    for k in -top..=top {
        let weight = T::one() - T::lit(k.abs() as f64) / T::lit(l as f64);
        s += (model.autocov(k) * cis(-w * T::lit(k as f64))).re * weight;
    }
    s - model.density_at(nu)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralStats<T: Scalar + Serialize> {
    pub dims: [usize; 3],
    pub eigenvalues: Vec<T>,
    pub lss: BTreeMap<String, T>,
}

/// `(1/ML) sum_k phi(lambda_k)`.
pub fn lss_from_eigenvalues<T: Scalar>(eigenvalues: &[T], stat: Statistic) -> Result<T> {
    let mut acc = T::zero();
    for &l in eigenvalues {
        acc += stat.apply(l)?;
    }
    Ok(acc / T::lit(eigenvalues.len() as f64))
}

/// `(1/ML) ||X - I||_F^2`, equal to the `sq_dev` statistic of a Hermitian `X`.
pub fn sq_dev_direct<T: Scalar>(x: &CMatrix<T>) -> T {
    let n = x.nrows();
    let mut acc = T::zero();
    for j in 0..n {
        for i in 0..n {
            let v = if i == j {
                x[(i, j)] - Complex::new(T::one(), T::zero())
            } else {
                x[(i, j)]
            };
            acc += v.norm_sqr();
        }
    }
    acc / T::lit(n as f64)
}

pub fn eigen_stats<T: Scalar + Serialize>(
    mat: &BlockHermitian<T>,
    n: usize,
    statistics: &[Statistic],
) -> Result<SpectralStats<T>> {
    let eigenvalues = eigvalsh(mat.matrix());
    let mut lss = BTreeMap::new();
    for &s in statistics {
        lss.insert(s.name().to_string(), lss_from_eigenvalues(&eigenvalues, s)?);
    }
    let (m, l) = mat.dims();
    Ok(SpectralStats {
        dims: [m, n, l],
        eigenvalues,
        lss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, identity, spectral_norm};
    use crate::tsmodel::sample_ensemble;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn ar1_bank(m: usize) -> ModelBank<f64> {
        ModelBank::repeat(CovarianceModel::ar1(c(0.5, 0.)).unwrap(), m).unwrap()
    }

    fn white_bank(m: usize) -> ModelBank<f64> {
        ModelBank::repeat(CovarianceModel::white(), m).unwrap()
    }

    #[test]
    fn w_layout_small_cases() {
        let data = CMatrix::from_fn(2, 2, |i, j| c((10 * i + j) as f64, 0.));
        let ens = Ensemble::from_data(data, 2).unwrap();
        assert_eq!(ens.n, 1);
        let w = build_w(&ens);
        assert_eq!(
            w.column(0).iter().map(|z| z.re).collect::<Vec<_>>(),
            vec![0., 1., 10., 11.]
        );
        let data = CMatrix::from_fn(1, 4, |_, j| c(j as f64, 0.));
        let w = build_w(&Ensemble::from_data(data, 1).unwrap());
        assert!((w[(0, 3)] - c(1.5, 0.)).norm() < 1e-15);
    }

    #[test]
    fn gram_matches_brute_force_sum() {
        let ens = sample_ensemble(&ar1_bank(3), 17, 4, 5).unwrap();
        let r = sample_cov(&ens);
        let (m, n, l) = ens.dims();
        let mut want = CMatrix::zeros(m * l, m * l);
        for t in 0..n {
            let y = nalgebra::DVector::from_fn(m * l, |row, _| ens.sample(row / l, t + row % l));
            want += &y * y.adjoint();
        }
        want /= c(n as f64, 0.);
        assert!(frobenius(&(r.matrix() - want)) < 1e-12);
        let single = sample_ensemble(&ar1_bank(2), 1, 3, 1).unwrap();
        let ev = eigvalsh(sample_cov(&single).matrix());
        assert_eq!(ev.iter().filter(|v| v.abs() > 1e-10).count(), 1);
    }

    #[test]
    fn lagged_layout_has_same_spectrum() {
        for seed in 0..4 {
            let ens = sample_ensemble(
                &ar1_bank(1 + seed as usize * 2),
                30,
                1 + seed as usize,
                seed,
            )
            .unwrap();
            let a = eigvalsh(&gram(&build_w(&ens)));
            let b = eigvalsh(&gram(&build_w_lagged(&ens)));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn white_sample_cov_norm_bound() {
        let ens = sample_ensemble(&white_bank(4), 4096, 2, 11).unwrap();
        let r = sample_cov(&ens);
        let ratio = 8.0 / 4096.0f64;
        assert!(spectral_norm(&(r.matrix() - identity(8))) <= 3.0 * (ratio.sqrt() + ratio));
    }

    #[test]
    fn block_diag_is_idempotent() {
        let ens = sample_ensemble(&ar1_bank(2), 20, 2, 3).unwrap();
        let b = block_diag(&sample_cov(&ens));
        assert_eq!(block_diag(&b), b);
        let ones = BlockHermitian::new(2, 1, CMatrix::from_element(2, 2, c(1., 0.))).unwrap();
        assert_eq!(block_diag(&ones).into_matrix(), identity(2));
    }

    #[test]
    fn correlation_has_identity_blocks() {
        let ens = sample_ensemble(&ar1_bank(3), 50, 4, 2).unwrap();
        let r = sample_block_corr(&ens).unwrap();
        for b in r.diagonal_blocks() {
            assert!(frobenius(&(b - identity(4))) < 1e-10);
        }
        let one = sample_block_corr(&sample_ensemble(&ar1_bank(1), 50, 4, 2).unwrap()).unwrap();
        assert!(frobenius(&(one.into_matrix() - identity(4))) < 1e-10);
        let stats = eigen_stats(&r, 50, &[Statistic::SqDev]).unwrap();
        assert!((stats.lss["sq_dev"] - sq_dev_direct(r.matrix())).abs() < 1e-10);
    }

    #[test]
    fn singular_block_is_reported() {
        let ens = sample_ensemble(&white_bank(2), 1, 3, 1).unwrap();
        assert!(matches!(
            sample_block_corr(&ens),
            Err(Error::SingularBlock { .. })
        ));
    }

    #[test]
    fn scalar_correlation_clt() {
        let ens = sample_ensemble(&white_bank(2), 20_000, 1, 9).unwrap();
        let r = sample_block_corr(&ens).unwrap();
        assert!(r.matrix()[(0, 1)].norm() < 3.0 / (20_000f64).sqrt());
    }

    #[test]
    fn oracle_normalization() {
        let ens = sample_ensemble(&white_bank(3), 40, 2, 4).unwrap();
        assert!(
            frobenius(
                &(oracle_block_corr(&ens, &white_bank(3))
                    .unwrap()
                    .into_matrix()
                    - sample_cov(&ens).into_matrix())
            ) < 1e-13
        );
        let ens = sample_ensemble(&ar1_bank(1), 2048, 2, 4).unwrap();
        let r = oracle_block_corr(&ens, &ar1_bank(1)).unwrap();
        assert!(spectral_norm(&(r.into_matrix() - identity(2))) <= 0.2);
    }

    #[test]
    fn oracle_trace_has_unit_mean() {
        let bank = ar1_bank(2);
        let reps = 400;
        let vals: Vec<f64> = (0..reps)
            .map(|s| {
                let r =
                    oracle_block_corr(&sample_ensemble(&bank, 30, 3, s).unwrap(), &bank).unwrap();
                crate::linalg::trace(r.matrix()).re / 6.0
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() <= 3.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn mean_eigenvalue_is_mean_block_trace() {
        let bank = ar1_bank(3);
        let ens = sample_ensemble(&bank, 25, 3, 8).unwrap();
        let r = oracle_block_corr(&ens, &bank).unwrap();
        let stats = eigen_stats(&r, 25, &[Statistic::Mean]).unwrap();
        let d = bank_inv_sqrt(&bank, 3).unwrap();
        let rhat = sample_cov(&ens);
        let want = (0..3)
            .map(|m| crate::linalg::trace(&(&d[m] * rhat.block(m, m) * &d[m])).re / 3.0)
            .sum::<f64>()
            / 3.0;
        assert!((stats.lss["mean"] - want).abs() < 1e-12);
    }

    #[test]
    fn lag_window_properties() {
        let ens = sample_ensemble(&ar1_bank(2), 64, 1, 3).unwrap();
        let s = lag_window_estimator(&ens, &[0.0, 0.2, 0.7]);
        let r0 = sample_autocov(&ens, 1, 0)[0].re;
        for g in 0..3 {
            assert!((s[(1, g)] - r0).abs() < 1e-14);
        }
        let ens = sample_ensemble(&ar1_bank(1), 100, 5, 3).unwrap();
        let t = toeplitz_block_estimate(&ens, 0);
        for i in 1..5 {
            for j in 1..5 {
                assert_eq!(t[(i, j)], t[(i - 1, j - 1)]);
            }
        }
        // Toeplitz estimate is the integral of the lag-window estimate.
        let g = 64;
        let grid: Vec<f64> = (0..g).map(|k| k as f64 / g as f64).collect();
        let sh = lag_window_estimator(&ens, &grid);
        let samples: Vec<Complex<f64>> = (0..g).map(|k| c(sh[(0, k)], 0.)).collect();
        let via = crate::toeplitz::toeplitz_from_samples(&samples, 5)
            .unwrap()
            .to_dense();
        assert!(frobenius(&(via - t)) < 1e-12);
    }

    #[test]
    fn lag_window_expectation() {
        let bank = ar1_bank(1);
        let (n, l, reps) = (40, 4, 3000);
        let nu = 0.1;
        let want: f64 = (-(l as i64 - 1)..l as i64)
            .map(|k| {
                (1.0 - k.abs() as f64 / n as f64)
                    * (bank.get(0).autocov(k) * cis(-std::f64::consts::TAU * nu * k as f64)).re
            })
            .sum();
        let vals: Vec<f64> = (0..reps)
            .map(|s| lag_window_estimator(&sample_ensemble(&bank, n, l, s).unwrap(), &[nu])[(0, 0)])
            .collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - want).abs() <= 4.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn white_lag_window_is_flat() {
        let (n, l) = (20_000, 8);
        let ens = sample_ensemble(&white_bank(1), n, l, 6).unwrap();
        let grid: Vec<f64> = (0..64).map(|k| k as f64 / 64.0).collect();
        let s = lag_window_estimator(&ens, &grid);
        let bound = 4.0 * (l as f64 / n as f64 * (l as f64).ln()).sqrt();
        assert!(s.iter().all(|v| (v - 1.0).abs() <= bound));
    }

    #[test]
    fn periodogram_bias() {
        let white = CovarianceModel::<f64>::white();
        assert!(expected_periodogram_bias(&white, 5, 0.3).abs() < 1e-15);
        let m = CovarianceModel::ar1(c(0.5, 0.)).unwrap();
        // Brute force: minus the tail beyond L-2 and minus the triangular taper term.
        let l = 32i64;
        let tail: f64 = (l - 1..400).map(|k| 2.0 * 0.5f64.powi(k as i32)).sum();
        let taper: f64 = (-(l - 2)..=l - 2)
            .map(|k| k.abs() as f64 * 0.5f64.powi(k.abs() as i32))
            .sum::<f64>()
            / l as f64;
        assert!((expected_periodogram_bias(&m, 32, 0.0) + tail + taper).abs() < 1e-12);
        assert!(
            expected_periodogram_bias(&m, 64, 0.0).abs()
                <= expected_periodogram_bias(&m, 16, 0.0).abs()
        );
    }

    #[test]
    fn statistic_values() {
        let id = BlockHermitian::new(2, 2, identity::<f64>(4)).unwrap();
        let s = eigen_stats(&id, 10, &Statistic::ALL).unwrap();
        assert_eq!(s.lss["sq_dev"], 0.0);
        assert_eq!(s.lss["mean"], 1.0);
        assert!(s.lss["logdet"].abs() < 1e-15);
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2., 0.), c(0., 0.)]));
        let m = BlockHermitian::new(2, 1, d).unwrap();
        let s = eigen_stats(&m, 3, &[Statistic::Mean, Statistic::SqDev]).unwrap();
        assert!((s.lss["mean"] - 1.0).abs() < 1e-15);
        assert!((s.lss["sq_dev"] - 1.0).abs() < 1e-15);
        assert!(matches!(
            eigen_stats(&m, 3, &[Statistic::LogDet]),
            Err(Error::Domain(_))
        ));
        assert_eq!("sq_dev".parse::<Statistic>().unwrap(), Statistic::SqDev);
        assert!("median".parse::<Statistic>().is_err());
        assert_eq!(
            serde_json::to_string(&Statistic::LogDet).unwrap(),
            "\"logdet\""
        );
    }
}
