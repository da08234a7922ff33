//! Stationary circular complex Gaussian series: covariance sequences, spectral
//! densities, model banks and sample paths.
//!
//! Conventions: `r(k) = E[y_{n+k} conj(y_n)]`, `r(-k) = conj(r(k))`, and
//! `S(nu) = sum_k r(k) exp(-2 i pi nu k)`, so that the Toeplitz matrix with
//! entries `r(i - j)` equals `int S(nu) d(nu) d(nu)^H dnu` for
//! `d(nu) = (1, exp(2 i pi nu), ...)`.

use nalgebra::{Cholesky, DVector};
use num_complex::Complex;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{cabs, cis, from_c64, to_c64, Scalar};

/// Grid used to validate custom spectral densities.
pub const VALIDATION_GRID: usize = 8192;
/// Size of the Toeplitz section factorized when validating custom sequences.
pub const VALIDATION_SECTION: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind<T: Scalar> {
    White,
    /// Unit-power AR(1) with coefficient `rho`, `|rho| < 1`.
    Ar1 {
        rho: Complex<T>,
    },
    /// One-sided sequence `r(0), r(1), ..., r(q)`, zero beyond `q`.
    Custom {
        r: Vec<Complex<T>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceModel<T: Scalar> {
    kind: ModelKind<T>,
    s_min: T,
    s_max: T,
}

impl<T: Scalar> CovarianceModel<T> {
    pub fn white() -> Self {
        Self {
            kind: ModelKind::White,
            s_min: T::one(),
            s_max: T::one(),
        }
    }

    pub fn ar1(rho: Complex<T>) -> Result<Self> {
        let a = cabs(rho);
        if !(a < T::one()) {
            return Err(Error::Domain(format!(
                "AR(1) coefficient must satisfy |rho| < 1, got {}",
                a.to_f64()
            )));
        }
        Ok(Self {
            kind: ModelKind::Ar1 { rho },
            s_min: (T::one() - a) / (T::one() + a),
            s_max: (T::one() + a) / (T::one() - a),
        })
    }

    /// Validates `r(0..=q)` by the minimum of the spectral density on an
    /// 8192-point grid and by factorizing a 256x256 Toeplitz section.
    pub fn custom(r: Vec<Complex<T>>) -> Result<Self> {
        let model = Self::custom_unchecked(r)?;
        if !(model.s_min > T::zero()) {
            return Err(Error::Positivity {
                min: model.s_min.to_f64(),
            });
        }
        let section = model.toeplitz_unchecked(VALIDATION_SECTION);
        if Cholesky::new(section).is_none() {
            return Err(Error::Positivity {
                min: model.s_min.to_f64(),
            });
        }
        Ok(model)
    }

    /// Builds a custom model, checking only the shape of the sequence. The
    /// density bounds are still measured on the validation grid.
    pub fn custom_unchecked(r: Vec<Complex<T>>) -> Result<Self> {
        let r0 = *r
            .first()
            .ok_or_else(|| Error::Domain("empty covariance sequence".into()))?;
        let tol = T::lit(1e-12) * (T::one() + cabs(r0));
        if r0.im.abs() > tol || !(r0.re > T::zero()) {
            return Err(Error::Domain("r(0) must be real and positive".into()));
        }
        let mut r = r;
        r[0] = Complex::new(r0.re, T::zero());
        let mut model = Self {
            kind: ModelKind::Custom { r },
            s_min: T::zero(),
            s_max: T::zero(),
        };
        let mut lo = T::max_value().unwrap();
        let mut hi = T::min_value().unwrap();
        for g in 0..VALIDATION_GRID {
            let s = model.density_at(T::lit(g as f64 / VALIDATION_GRID as f64));
            lo = lo.min(s);
            hi = hi.max(s);
        }
        model.s_min = lo;
        model.s_max = hi;
        Ok(model)
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    pub fn is_white(&self) -> bool {
        matches!(self.kind, ModelKind::White)
    }

    pub fn unit_power(&self) -> bool {
        cabs(self.autocov(0) - Complex::one()) <= T::lit(1e-12)
    }

    /// Lower bound of the spectral density.
    pub fn s_min(&self) -> T {
        self.s_min
    }

    /// Upper bound of the spectral density.
    pub fn s_max(&self) -> T {
        self.s_max
    }

    /// Largest lag with a nonzero covariance, `None` for infinite support.
    pub fn support(&self) -> Option<usize> {
        match &self.kind {
            ModelKind::White => Some(0),
            ModelKind::Ar1 { rho } if rho.is_zero() => Some(0),
            ModelKind::Ar1 { .. } => None,
            ModelKind::Custom { r } => Some(r.len() - 1),
        }
    }

    /// `r(k)` for any integer lag.
    pub fn autocov(&self, k: i64) -> Complex<T> {
        let a = k.unsigned_abs() as usize;
        let v = match &self.kind {
            ModelKind::White => {
                if a == 0 {
                    Complex::one()
                } else {
                    Complex::zero()
                }
            }
            ModelKind::Ar1 { rho } => rho.powu(a as u32),
            ModelKind::Custom { r } => r.get(a).copied().unwrap_or_else(Complex::zero),
        };
        if k < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// `r(-max_lag), ..., r(max_lag)`.
    pub fn covariance_sequence(&self, max_lag: usize) -> Vec<Complex<T>> {
        let q = max_lag as i64;
        (-q..=q).map(|k| self.autocov(k)).collect()
    }

    pub fn density_at(&self, nu: T) -> T {
        let w = T::two_pi() * nu;
        match &self.kind {
            ModelKind::White => T::one(),
            ModelKind::Ar1 { rho } => {
                let den = (Complex::<T>::one() - *rho * cis(-w)).norm_sqr();
                (T::one() - rho.norm_sqr()) / den
            }
            ModelKind::Custom { r } => {
                let mut s = r[0].re;
                for (k, rk) in r.iter().enumerate().skip(1) {
                    s += T::lit(2.0) * (*rk * cis(-w * T::lit(k as f64))).re;
                }
                s
            }
        }
    }

    pub fn spectral_density(&self, nu_grid: &[T]) -> Result<Vec<T>> {
        let out: Vec<T> = nu_grid.iter().map(|&nu| self.density_at(nu)).collect();
        match out.iter().copied().reduce(|a, b| a.min(b)) {
            Some(min) if !(min > T::zero()) => Err(Error::Positivity { min: min.to_f64() }),
            _ => Ok(out),
        }
    }

    fn toeplitz_unchecked(&self, size: usize) -> CMatrix<T> {
        let seq = self.covariance_sequence(size.saturating_sub(1));
        let c = size as i64 - 1;
        CMatrix::from_fn(size, size, |i, j| seq[(i as i64 - j as i64 + c) as usize])
    }

    /// `R_size` with entries `r(i - j)`.
    pub fn toeplitz_covariance(&self, size: usize) -> Result<CMatrix<T>> {
        let m = self.toeplitz_unchecked(size);
        if let ModelKind::Custom { .. } = self.kind {
            if Cholesky::new(m.clone()).is_none() {
                return Err(Error::Positivity {
                    min: self.s_min.to_f64(),
                });
            }
        }
        Ok(m)
    }

    /// Lower Cholesky factor `C` of `R_size`, `R = C C^H`.
    pub fn cholesky_factor(&self, size: usize) -> Result<CMatrix<T>> {
        Cholesky::new(self.toeplitz_unchecked(size))
            .map(|c| c.unpack())
            .ok_or(Error::Positivity {
                min: self.s_min.to_f64(),
            })
    }
}

/// The `M` series of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBank<T: Scalar> {
    models: Vec<CovarianceModel<T>>,
}

impl<T: Scalar> ModelBank<T> {
    pub fn new(models: Vec<CovarianceModel<T>>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Domain(
                "model bank must contain at least one series".into(),
            ));
        }
        Ok(Self { models })
    }

    pub fn repeat(model: CovarianceModel<T>, m: usize) -> Result<Self> {
        Self::new(vec![model; m])
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[CovarianceModel<T>] {
        &self.models
    }

    pub fn get(&self, m: usize) -> &CovarianceModel<T> {
        &self.models[m]
    }

    pub fn is_white(&self) -> bool {
        self.models.iter().all(|m| m.is_white())
    }

    pub fn s_min(&self) -> T {
        self.models
            .iter()
            .map(|m| m.s_min())
            .fold(T::max_value().unwrap(), |a, b| a.min(b))
    }

    pub fn s_max(&self) -> T {
        self.models
            .iter()
            .map(|m| m.s_max())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Index of the first model equal to each model, for sharing work
    /// between identical series.
    pub fn distinct_index(&self) -> Vec<usize> {
        (0..self.len())
            .map(|i| (0..=i).find(|&j| self.models[j] == self.models[i]).unwrap())
            .collect()
    }
}

/// JSON form of a single model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    White,
    Ar1 { rho: [f64; 2] },
    Custom { r: Vec<[f64; 2]> },
}

/// JSON form of a bank: either an explicit `models` list or `repeat` with `M`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat: Option<ModelSpec>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl ModelSpec {
    pub fn build<T: Scalar>(&self) -> Result<CovarianceModel<T>> {
        match self {
            ModelSpec::White => Ok(CovarianceModel::white()),
            ModelSpec::Ar1 { rho } => CovarianceModel::ar1(from_c64(Complex::new(rho[0], rho[1]))),
            ModelSpec::Custom { r } => CovarianceModel::custom(
                r.iter()
                    .map(|p| from_c64(Complex::new(p[0], p[1])))
                    .collect(),
            ),
        }
    }

    pub fn from_model<T: Scalar>(model: &CovarianceModel<T>) -> Self {
        let pair = |z: Complex<T>| {
            let z = to_c64(z);
            [z.re, z.im]
        };
        match model.kind() {
            ModelKind::White => ModelSpec::White,
            ModelKind::Ar1 { rho } => ModelSpec::Ar1 { rho: pair(*rho) },
            ModelKind::Custom { r } => ModelSpec::Custom {
                r: r.iter().map(|z| pair(*z)).collect(),
            },
        }
    }
}

impl BankSpec {
    pub fn repeat(model: ModelSpec, m: usize) -> Self {
        Self {
            models: Vec::new(),
            repeat: Some(model),
            m: Some(m),
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<ModelBank<T>> {
        match (&self.repeat, self.models.is_empty()) {
            (Some(spec), true) => {
                let m = self
                    .m
                    .ok_or_else(|| Error::Config("\"repeat\" requires \"M\"".into()))?;
                ModelBank::repeat(spec.build()?, m)
            }
            (None, false) => {
                if let Some(m) = self.m {
                    if m != self.models.len() {
                        return Err(Error::Config(format!(
                            "\"M\" is {m} but {} models are listed",
                            self.models.len()
                        )));
                    }
                }
                ModelBank::new(
                    self.models
                        .iter()
                        .map(|s| s.build())
                        .collect::<Result<_>>()?,
                )
            }
            (Some(_), false) => Err(Error::Config(
                "use either \"models\" or \"repeat\", not both".into(),
            )),
            (None, true) => Err(Error::Config("bank needs \"models\" or \"repeat\"".into())),
        }
    }

    pub fn from_bank<T: Scalar>(bank: &ModelBank<T>) -> Self {
        Self {
            models: bank.models().iter().map(ModelSpec::from_model).collect(),
            repeat: None,
            m: Some(bank.len()),
        }
    }
}

/// `M x (N + L - 1)` sample array.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<T: Scalar> {
    pub data: CMatrix<T>,
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub seed: u64,
}

impl<T: Scalar> Ensemble<T> {
    /// Wraps observed data; `N` is inferred as `columns - L + 1`.
    pub fn from_data(data: CMatrix<T>, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Dimension("L must be at least 1".into()));
        }
        if data.nrows() == 0 || data.ncols() < l {
            return Err(Error::Dimension(format!(
                "{} samples per series leave no lag vector for L = {l}",
                data.ncols()
            )));
        }
        let (m, n) = (data.nrows(), data.ncols() + 1 - l);
        Ok(Self {
            data,
            m,
            n,
            l,
            seed: 0,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.l)
    }

    pub fn sample(&self, m: usize, t: usize) -> Complex<T> {
        self.data[(m, t)]
    }
}

/// RNG for series `m` of replication `rep`. Streams are disjoint for
/// `m, rep < 2^32`.
pub fn stream_rng(seed: u64, m: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_key(m, rep));
    rng
}

pub fn stream_key(m: usize, rep: usize) -> u64 {
    ((rep as u64) << 32) | (m as u64 & 0xffff_ffff)
}

/// Lower Cholesky factor of `R_n`. For white and AR(1) series the factor is
/// the recursion `y_0 = x_0`, `y_t = rho y_{t-1} + sqrt(1 - |rho|^2) x_t`,
/// applied in linear time.
enum Factor<T: Scalar> {
    Identity,
    Ar1 { rho: Complex<T>, gain: T },
    Dense(CMatrix<T>),
}

impl<T: Scalar> Factor<T> {
    fn new(model: &CovarianceModel<T>, len: usize) -> Result<Self> {
        Ok(match model.kind() {
            ModelKind::White => Factor::Identity,
            ModelKind::Ar1 { rho } => Factor::Ar1 {
                rho: *rho,
                gain: (T::one() - rho.norm_sqr()).sqrt(),
            },
            ModelKind::Custom { .. } => Factor::Dense(model.cholesky_factor(len)?),
        })
    }

    fn apply(&self, x: DVector<Complex<T>>) -> DVector<Complex<T>> {
        match self {
            Factor::Identity => x,
            Factor::Ar1 { rho, gain } => {
                let mut y = x;
                for t in 1..y.len() {
                    y[t] = y[t - 1] * *rho + y[t] * *gain;
                }
                y
            }
            Factor::Dense(c) => c * x,
        }
    }
}

/// Draws ensembles for a fixed bank and dimensions, reusing the factors of
/// `R_{N+L-1}` across replications.
pub struct EnsembleSampler<T: Scalar> {
    factors: Vec<Factor<T>>,
    which: Vec<usize>,
    n: usize,
    l: usize,
}

impl<T: Scalar> EnsembleSampler<T> {
    pub fn new(bank: &ModelBank<T>, n: usize, l: usize) -> Result<Self> {
        if n == 0 || l == 0 {
            return Err(Error::Dimension("N and L must be at least 1".into()));
        }
        let len = n + l - 1;
        let first = bank.distinct_index();
        let mut factors = Vec::new();
        let mut slot = vec![0; bank.len()];
        for m in 0..bank.len() {
            if first[m] == m {
                slot[m] = factors.len();
                factors.push(Factor::new(bank.get(m), len)?);
            } else {
                slot[m] = slot[first[m]];
            }
        }
        Ok(Self {
            factors,
            which: slot,
            n,
            l,
        })
    }

    pub fn draw(&self, seed: u64, rep: usize) -> Ensemble<T> {
        let len = self.n + self.l - 1;
        let m_count = self.which.len();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let mut data = CMatrix::zeros(m_count, len);
        for m in 0..m_count {
            let mut rng = stream_rng(seed, m, rep);
            let x = DVector::from_fn(len, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(T::lit(re * half), T::lit(im * half))
            });
            let y = self.factors[self.which[m]].apply(x);
            for t in 0..len {
                data[(m, t)] = y[t];
            }
        }
        Ensemble {
            data,
            m: m_count,
            n: self.n,
            l: self.l,
            seed,
        }
    }
}

/// One ensemble drawn with replication index 0.
pub fn sample_ensemble<T: Scalar>(
    bank: &ModelBank<T>,
    n: usize,
    l: usize,
    seed: u64,
) -> Result<Ensemble<T>> {
    Ok(EnsembleSampler::new(bank, n, l)?.draw(seed, 0))
}

/// Row `m` of the ensemble as a column vector.
pub fn series<T: Scalar>(ens: &Ensemble<T>, m: usize) -> DVector<Complex<T>> {
    ens.data.row(m).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn white_sequence() {
        let s = CovarianceModel::<f64>::white().covariance_sequence(2);
        assert_eq!(
            s,
            vec![c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]
        );
    }

    #[test]
    fn ar1_sequence() {
        let s = CovarianceModel::ar1(c(0.5, 0.))
            .unwrap()
            .covariance_sequence(2);
        let want = [0.25, 0.5, 1.0, 0.5, 0.25];
        for (a, b) in s.iter().zip(want) {
            assert!((a - c(b, 0.)).norm() < 1e-15);
        }
    }

    #[test]
    fn complex_ar1_lag_one_matches_recursion_moment() {
        // y_{n+1} = rho y_n + w_n gives E[y_{n+1} conj(y_n)] = rho.
        let s = CovarianceModel::ar1(c(0., 0.5))
            .unwrap()
            .covariance_sequence(1);
        assert!((s[0] - c(0., -0.5)).norm() < 1e-15);
        assert!((s[1] - c(1., 0.)).norm() < 1e-15);
        assert!((s[2] - c(0., 0.5)).norm() < 1e-15);
    }

    #[test]
    fn ar1_density_values() {
        let m = CovarianceModel::ar1(c(0.5, 0.)).unwrap();
        assert!((m.density_at(0.0) - 3.0).abs() < 1e-14);
        assert!((m.density_at(0.5) - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(CovarianceModel::<f64>::white().density_at(0.3), 1.0);
    }

    #[test]
    fn toeplitz_small_cases() {
        let w = CovarianceModel::<f64>::white()
            .toeplitz_covariance(3)
            .unwrap();
        assert_eq!(w, CMatrix::identity(3, 3));
        let a = CovarianceModel::ar1(c(0.5, 0.))
            .unwrap()
            .toeplitz_covariance(2)
            .unwrap();
        assert_eq!(a[(0, 1)], c(0.5, 0.));
        assert_eq!(a[(1, 0)], c(0.5, 0.));
    }

    #[test]
    fn ar1_min_eigenvalue_above_density_floor() {
        let m = CovarianceModel::ar1(c(0.9, 0.)).unwrap();
        let ev = crate::linalg::eigvalsh(&m.toeplitz_covariance(64).unwrap());
        let floor = (0..100_000)
            .map(|g| m.density_at(g as f64 / 100_000.0))
            .fold(f64::MAX, f64::min);
        assert!((floor - 0.1 / 1.9).abs() < 1e-9);
        assert!(ev[0] >= floor - 1e-9);
    }

    #[test]
    fn fourier_consistency() {
        for rho in [c(0.3, 0.), c(0.9, 0.), c(0.5, -0.6)] {
            let m = CovarianceModel::ar1(rho).unwrap();
            let g = 4096;
            for k in 0..6i64 {
                let q: Complex<f64> = (0..g)
                    .map(|j| {
                        let nu = j as f64 / g as f64;
                        cis(std::f64::consts::TAU * nu * k as f64) * m.density_at(nu)
                    })
                    .sum::<Complex<f64>>()
                    / g as f64;
                assert!((q - m.autocov(k)).norm() < 1e-8, "rho={rho} k={k}");
            }
        }
    }

    #[test]
    fn custom_validation() {
        assert!(CovarianceModel::custom(vec![c(1., 0.), c(0.4, 0.1)]).is_ok());
        assert!(matches!(
            CovarianceModel::custom(vec![c(1., 0.), c(0.6, 0.)]),
            Err(Error::Positivity { .. })
        ));
        assert!(CovarianceModel::<f64>::custom(vec![]).is_err());
        assert!(CovarianceModel::ar1(c(1.0, 0.)).is_err());
    }

    #[test]
    fn bank_json_roundtrip() {
        let text = r#"{"models":[{"kind":"ar1","rho":[0.5,0.0]},{"kind":"white"},{"kind":"custom","r":[[1,0],[0.3,0.1]]}],"M":3}"#;
        let spec: BankSpec = serde_json::from_str(text).unwrap();
        let bank = spec.build::<f64>().unwrap();
        assert_eq!(bank.len(), 3);
        let back = BankSpec::from_bank(&bank);
        assert_eq!(back.build::<f64>().unwrap(), bank);
        let rep: BankSpec = serde_json::from_str(r#"{"repeat":{"kind":"white"},"M":4}"#).unwrap();
        assert_eq!(rep.build::<f64>().unwrap().len(), 4);
        assert!(
            serde_json::from_str::<BankSpec>(r#"{"repeat":{"kind":"white"},"M":4,"x":1}"#).is_err()
        );
        let bad: BankSpec = serde_json::from_str(r#"{"models":[{"kind":"white"}],"M":2}"#).unwrap();
        assert!(bad.build::<f64>().is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let bank = ModelBank::repeat(CovarianceModel::ar1(c(0.5, 0.)).unwrap(), 3).unwrap();
        let a = sample_ensemble(&bank, 20, 3, 7).unwrap();
        let b = sample_ensemble(&bank, 20, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data.shape(), (3, 22));
        let other = sample_ensemble(&bank, 20, 3, 8).unwrap();
        assert_ne!(a.data, other.data);
    }

    #[test]
    fn white_second_moment() {
        let bank = ModelBank::repeat(CovarianceModel::<f64>::white(), 2).unwrap();
        let ens = sample_ensemble(&bank, 10_000, 1, 1).unwrap();
        for m in 0..2 {
            let p = ens.data.row(m).iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e4;
            assert!((p - 1.0).abs() < 5.0 / 100.0);
        }
    }

    #[test]
    fn ar1_lag_one_autocorrelation() {
        let bank = ModelBank::repeat(CovarianceModel::ar1(c(0.5, 0.)).unwrap(), 1).unwrap();
        let ens = sample_ensemble(&bank, 10_000, 1, 3).unwrap();
        let y = ens.data.row(0);
        let lag1: Complex<f64> = (0..9_999)
            .map(|t| y[t + 1] * y[t].conj())
            .sum::<Complex<f64>>()
            / 9_999.0;
        assert!((lag1 - c(0.5, 0.)).norm() < 5.0 / 100.0);
    }

    #[test]
    fn recursion_is_the_cholesky_factor() {
        for rho in [c(0.5, 0.), c(0.3, -0.6)] {
            let model = CovarianceModel::ar1(rho).unwrap();
            let dense = model.cholesky_factor(12).unwrap();
            let fast = Factor::new(&model, 12).unwrap();
            for k in 0..12 {
                let e = DVector::from_fn(12, |i, _| if i == k { c(1., 0.) } else { c(0., 0.) });
                let col = fast.apply(e);
                for i in 0..12 {
                    assert!((col[i] - dense[(i, k)]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn population_covariance_by_monte_carlo() {
        let model = CovarianceModel::custom(vec![c(1.0, 0.), c(0.3, 0.1), c(-0.1, 0.1)]).unwrap();
        let bank = ModelBank::repeat(model.clone(), 1).unwrap();
        let sampler = EnsembleSampler::new(&bank, 6, 1).unwrap();
        let u = DVector::from_fn(6, |i, _| c(1.0 / (1.0 + i as f64), 0.3 * i as f64));
        let v = DVector::from_fn(6, |i, _| c((i as f64).cos(), -0.2));
        let want = u.dotc(&(model.toeplitz_covariance(6).unwrap() * &v));
        let reps = 20_000;
        let vals: Vec<Complex<f64>> = (0..reps)
            .map(|r| {
                let y = sampler.draw(5, r).data.row(0).transpose();
                u.dotc(&y) * v.dotc(&y).conj()
            })
            .collect();
        let mean = vals.iter().sum::<Complex<f64>>() / reps as f64;
        let sd =
            (vals.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - want).norm() <= 3.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn stream_keys_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for rep in 0..200 {
            for m in 0..100 {
                assert!(seen.insert(stream_key(m, rep)));
            }
        }
    }
}
