//! Operator-algebra properties shared by the proptest suite and the
//! acceptance runner. Each check returns `Err` with a description on failure.

#![allow(dead_code)]

use blockcorr::linalg::{eigvalsh, frobenius, hermitian_part, identity, trace, CMatrix};
use blockcorr::matfun::{d_operator, perturbation_check};
use blockcorr::toeplitz::{psi_bar, psi_block, psi_m, tau, tau_sequence, ToeplitzSymbol};
use blockcorr::tsmodel::{CovarianceModel, ModelBank};
use num_complex::Complex;
use proptest::prelude::*;

pub type C = Complex<f64>;

pub const TRIALS: u32 = 100;

#[derive(Clone, Debug)]
pub enum ModelSeed {
    White,
    Ar1(f64, f64),
    /// Moving-average coefficients plus a white floor, positive by construction.
    Ma(Vec<(f64, f64)>),
}

impl ModelSeed {
    pub fn build(&self) -> CovarianceModel<f64> {
        match self {
            ModelSeed::White => CovarianceModel::white(),
            ModelSeed::Ar1(r, th) => CovarianceModel::ar1(C::from_polar(*r, *th)).unwrap(),
            ModelSeed::Ma(b) => {
                let b: Vec<C> = b.iter().map(|&(x, y)| C::new(x, y)).collect();
                let mut r: Vec<C> = (0..b.len())
                    .map(|k| (0..b.len() - k).map(|j| b[j + k] * b[j].conj()).sum())
                    .collect();
                r[0] += C::new(0.2, 0.0);
                let s = r[0].re;
                CovarianceModel::custom(r.into_iter().map(|v| v / s).collect()).unwrap()
            }
        }
    }
}

pub fn arb_model() -> impl Strategy<Value = ModelSeed> {
    prop_oneof![
        Just(ModelSeed::White),
        (0.0..0.9f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| ModelSeed::Ar1(r, t)),
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..4).prop_map(ModelSeed::Ma),
    ]
}

pub fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix<f64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), rows * cols).prop_map(move |v| {
        CMatrix::from_fn(rows, cols, |i, j| {
            C::new(v[i * cols + j].0, v[i * cols + j].1)
        })
    })
}

pub fn arb_square() -> impl Strategy<Value = CMatrix<f64>> {
    (1usize..10).prop_flat_map(|n| arb_matrix(n, n))
}

fn close(a: C, b: C, scale: f64, tol: f64, what: &str) -> Result<(), String> {
    if (a - b).norm() <= tol * scale.max(1e-300) {
        Ok(())
    } else {
        Err(format!("{what}: {a} vs {b} (scale {scale:e})"))
    }
}

/// `(1/K) Tr[A Psi_K(B)] = (1/R) Tr[Psi_R(A) B]`.
pub fn commutation(
    model: &CovarianceModel<f64>,
    a: &CMatrix<f64>,
    b: &CMatrix<f64>,
) -> Result<(), String> {
    let (k, r) = (a.nrows(), b.nrows());
    let lhs = trace(&(a * psi_m(model, b, k).map_err(|e| e.to_string())?)) / k as f64;
    let rhs = trace(&(psi_m(model, a, r).map_err(|e| e.to_string())? * b)) / r as f64;
    let scale = model.s_max() * frobenius(a) * frobenius(b);
    close(lhs, rhs, scale, 1e-10, "commutation")
}

/// `(1/N) Tr[Psi_bar(A) B] = (1/ML) Tr[A Psi(B)]`.
pub fn duality(
    bank: &ModelBank<f64>,
    l: usize,
    a: &CMatrix<f64>,
    b: &CMatrix<f64>,
) -> Result<(), String> {
    let n = b.nrows();
    let ml = a.nrows();
    let lhs = trace(&(psi_bar(bank, a, n).map_err(|e| e.to_string())? * b)) / n as f64;
    let rhs = trace(&(a * psi_block(bank, b, l).map_err(|e| e.to_string())?)) / ml as f64;
    let scale = bank.s_max() * frobenius(a) * frobenius(b);
    close(lhs, rhs, scale, 1e-10, "duality")
}

/// `sum_r |tau(M)(r)|^2 <= (1/R) Tr(M M^H)`.
pub fn parseval(m: &CMatrix<f64>) -> Result<(), String> {
    let lhs: f64 = tau_sequence(m).iter().map(|t| t.norm_sqr()).sum();
    let rhs = frobenius(m).powi(2) / m.nrows() as f64;
    if lhs <= rhs * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(format!("parseval: {lhs} > {rhs}"))
    }
}

/// `(1/R) Tr(A B) = sum_l a(l) tau(B)(-l)` for Toeplitz `A`.
pub fn trace_by_diagonals(a: &ToeplitzSymbol<f64>, b: &CMatrix<f64>) -> Result<(), String> {
    let r = b.nrows();
    let lhs = trace(&(a.to_dense() * b)) / r as f64;
    let mut rhs = C::new(0.0, 0.0);
    for l in -(r as i64 - 1)..r as i64 {
        rhs += a.coeff(l) * tau(b, -l).map_err(|e| e.to_string())?;
    }
    let scale = frobenius(&a.to_dense()) * frobenius(b);
    close(lhs, rhs, scale, 1e-10, "trace by diagonals")
}

/// `Psi_K(M) > 0` for `M > 0`, and `||Psi_K(M)|| <= max S ||M||`.
pub fn positivity(model: &CovarianceModel<f64>, g: &CMatrix<f64>, k: usize) -> Result<(), String> {
    let m = hermitian_part(&(g * g.adjoint())) + identity::<f64>(g.nrows()) * C::new(0.1, 0.0);
    let p = hermitian_part(&psi_m(model, &m, k).map_err(|e| e.to_string())?);
    let ev = eigvalsh(&p);
    if !(ev[0] > 0.0) {
        return Err(format!("positivity: min eigenvalue {}", ev[0]));
    }
    let grid: Vec<f64> = (0..4096).map(|g| g as f64 / 4096.0).collect();
    let smax = model
        .spectral_density(&grid)
        .map_err(|e| e.to_string())?
        .into_iter()
        .fold(0.0, f64::max);
    let norm_m = *eigvalsh(&m).last().unwrap();
    let top = ev.last().unwrap().abs().max(ev[0].abs());
    if top <= smax * norm_m * (1.0 + 1e-9) {
        Ok(())
    } else {
        Err(format!("norm bound: {top} > {smax} * {norm_m}"))
    }
}

fn base_point(model: &CovarianceModel<f64>, l: usize) -> CMatrix<f64> {
    model.toeplitz_covariance(l).unwrap()
}

/// `Tr(D(A) B) = Tr(A D(B))`.
pub fn d_trace_swap(
    model: &CovarianceModel<f64>,
    a: &CMatrix<f64>,
    b: &CMatrix<f64>,
) -> Result<(), String> {
    let h = base_point(model, a.nrows());
    let lhs = trace(&(d_operator(&h, a).map_err(|e| e.to_string())? * b));
    let rhs = trace(&(a * d_operator(&h, b).map_err(|e| e.to_string())?));
    let smin = eigvalsh(&h)[0];
    let scale = frobenius(a) * frobenius(b) / (2.0 * smin.powf(1.5));
    close(lhs, rhs, scale, 1e-10, "D trace swap")
}

/// `(1/L) Tr(D(A) D(A)^H) <= kappa (1/L) Tr(A A^H)` with
/// `kappa = 1 / (4 s^3)`, `s` the smallest eigenvalue of the base point.
pub fn d_contraction(model: &CovarianceModel<f64>, a: &CMatrix<f64>) -> Result<(), String> {
    let h = base_point(model, a.nrows());
    let smin = eigvalsh(&h)[0];
    let kappa = 1.0 / (4.0 * smin.powi(3));
    let d = d_operator(&h, a).map_err(|e| e.to_string())?;
    let (lhs, rhs) = (frobenius(&d).powi(2), kappa * frobenius(a).powi(2));
    if lhs <= rhs * (1.0 + 1e-10) {
        Ok(())
    } else {
        Err(format!("D contraction: {lhs} > {rhs}"))
    }
}

/// `(H + s X)^{-1/2} - H^{-1/2} + D(s X)` vanishes at second order in `s`.
pub fn perturbation_second_order(
    model: &CovarianceModel<f64>,
    x: &CMatrix<f64>,
) -> Result<(), String> {
    let h = base_point(model, x.nrows());
    let dir = hermitian_part(x);
    let norm = frobenius(&dir);
    if norm < 1e-3 {
        return Ok(());
    }
    let dir = dir / C::new(norm, 0.0);
    let smin = eigvalsh(&h)[0];
    let scales: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|s| s * smin).collect();
    let errs = perturbation_check(&h, &dir, &scales).map_err(|e| e.to_string())?;
    let order = (errs[0].1 / errs[2].1).ln() / (scales[0] / scales[2]).ln();
    if errs[2].1 < 1e-13 || order >= 1.8 {
        Ok(())
    } else {
        Err(format!("perturbation order {order:.3} ({errs:?})"))
    }
}

/// Bank seeds, `L`, an `ML x ML` matrix and an `N x N` matrix.
pub fn arb_duality_case(
) -> impl Strategy<Value = (Vec<ModelSeed>, usize, CMatrix<f64>, CMatrix<f64>)> {
    (
        prop::collection::vec(arb_model(), 1..4),
        1usize..5,
        1usize..12,
    )
        .prop_flat_map(|(models, l, n)| {
            let ml = models.len() * l;
            (Just(models), Just(l), arb_matrix(ml, ml), arb_matrix(n, n))
        })
}

pub fn bank_of(seeds: &[ModelSeed]) -> ModelBank<f64> {
    ModelBank::new(seeds.iter().map(ModelSeed::build).collect()).unwrap()
}
