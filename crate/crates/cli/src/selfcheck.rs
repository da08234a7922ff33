//! Fast invariant checks: operator identities, Szego identities, MP axioms
//! and the white-bank reduction of the canonical equations.

use std::time::Instant;

use blockcorr::detequiv::{distance_to_mp, CanonicalSystem, SolverOptions};
use blockcorr::linalg::{frobenius, trace};
use blockcorr::matfun::unit_hermitian_direction;
use blockcorr::szego::{default_grid_size, error_matrix, quad_form_dense, quad_form_identity};
use blockcorr::toeplitz::{psi_bar, psi_block, psi_m, tau_sequence};
use blockcorr::{CMatrix, Complex64, CovarianceModel, MarchenkoPastur, ModelBank};
use serde::Serialize;

#[derive(Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Non-Hermitian test matrix.
fn random(n: usize, seed: u64) -> CMatrix {
    unit_hermitian_direction::<f64>(n, seed) * unit_hermitian_direction::<f64>(n, seed + 1000)
        + unit_hermitian_direction::<f64>(n, seed + 2000)
}

fn bank(inject: bool) -> Result<ModelBank, String> {
    let custom = vec![c(1.0, 0.0), c(0.3, 0.1), c(-0.1, 0.05)];
    let last = if inject {
        CovarianceModel::custom_unchecked(vec![c(1.0, 0.0), c(0.9, 0.0), c(0.9, 0.0)])
    } else {
        CovarianceModel::custom(custom)
    }
    .map_err(|e| e.to_string())?;
    let ar1 = CovarianceModel::ar1(c(0.5, 0.2)).map_err(|e| e.to_string())?;
    ModelBank::new(vec![ar1, CovarianceModel::white(), last]).map_err(|e| e.to_string())
}

fn within(v: f64, tol: f64, what: &str) -> Check {
    if v <= tol {
        Ok(format!("{what} {v:.1e}"))
    } else {
        Err(format!("{what} {v:.2e} > {tol:.0e}"))
    }
}

fn model_positivity(b: &ModelBank) -> Check {
    for (i, m) in b.models().iter().enumerate() {
        if !(m.s_min() > 0.0) {
            return Err(format!(
                "series {i}: spectral density minimum {:.3e}",
                m.s_min()
            ));
        }
        m.toeplitz_covariance(64)
            .map_err(|e| format!("series {i}: {e}"))?;
    }
    Ok(format!("{} series, min S = {:.3e}", b.len(), b.s_min()))
}

fn commutation(b: &ModelBank) -> Check {
    let mut worst: f64 = 0.0;
    for (i, m) in b.models().iter().enumerate() {
        let (a, x) = (random(5, i as u64), random(7, 50 + i as u64));
        let lhs = trace(&(&a * psi_m(m, &x, 5).map_err(|e| e.to_string())?)) / 5.0;
        let rhs = trace(&(psi_m(m, &a, 7).map_err(|e| e.to_string())? * &x)) / 7.0;
        worst = worst.max((lhs - rhs).norm() / (frobenius(&a) * frobenius(&x)));
    }
    within(worst, 1e-10, "max relative gap")
}

fn duality(b: &ModelBank) -> Check {
    let (l, n) = (3, 11);
    let a = random(b.len() * l, 7);
    let x = random(n, 8);
    let lhs = trace(&(psi_bar(b, &a, n).map_err(|e| e.to_string())? * &x)) / n as f64;
    let rhs = trace(&(&a * psi_block(b, &x, l).map_err(|e| e.to_string())?)) / (b.len() * l) as f64;
    within(
        (lhs - rhs).norm() / (frobenius(&a) * frobenius(&x)),
        1e-10,
        "relative gap",
    )
}

fn parseval() -> Check {
    let mut worst = f64::MIN;
    for s in 0..5 {
        let m = random(4 + s as usize, 100 + s);
        let lhs: f64 = tau_sequence(&m).iter().map(|t| t.norm_sqr()).sum();
        worst = worst.max(lhs - frobenius(&m).powi(2) / m.nrows() as f64);
    }
    if worst <= 1e-12 {
        Ok(format!("max excess {worst:.1e}"))
    } else {
        Err(format!("bound exceeded by {worst:.2e}"))
    }
}

fn szego(b: &ModelBank) -> Check {
    let mut worst: f64 = 0.0;
    for m in b.models() {
        for l in [1, 4, 16] {
            for k in 0..16 {
                let nu = k as f64 / 16.0;
                let a = quad_form_identity(m, l, nu).map_err(|e| e.to_string())?;
                let d = quad_form_dense(m, l, nu).map_err(|e| e.to_string())?;
                worst = worst.max((a - d).abs() / d.abs());
            }
        }
    }
    within(worst, 1e-9, "max relative gap")
}

fn error_trace(b: &ModelBank) -> Check {
    let (l, n) = (8, 64);
    let rep = error_matrix(b, l, n, default_grid_size(l, n)).map_err(|e| e.to_string())?;
    within(rep.trace_e.abs(), 1e-8 * n as f64, "|Tr E_N|")
}

fn mp_axioms() -> Check {
    let mut worst: f64 = 0.0;
    for cc in [0.25, 1.0, 2.0] {
        let law = MarchenkoPastur::new(cc).map_err(|e| e.to_string())?;
        for re in [-1.0, 0.5, 2.0, 5.0] {
            for im in [0.05, 1.0] {
                let z = c(re, im);
                let t = law.stieltjes_t(z).map_err(|e| e.to_string())?;
                worst = worst.max(-t.im).max(-(z * t).im).max(t.norm() - 1.0 / im);
                worst = worst.max(law.residual(z, t));
            }
        }
        let y = 1e8;
        let far = law.stieltjes_t(c(0.0, y)).map_err(|e| e.to_string())?;
        worst = worst.max((c(0.0, -y) * far - c(1.0, 0.0)).norm() - 1e-6);
        worst = worst.max((law.cdf(1e9) - 1.0).abs());
    }
    within(worst.max(0.0), 1e-9, "worst violation")
}

fn white_reduction() -> Check {
    let b = ModelBank::repeat(CovarianceModel::white(), 4).map_err(|e| e.to_string())?;
    let sys = CanonicalSystem::new(&b, 4, 32).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for z in [c(-1.0, 0.05), c(0.5, 0.5), c(2.0, 1.0), c(4.0, 0.05)] {
        let p = sys
            .solve(z, &SolverOptions::default())
            .map_err(|e| e.to_string())?;
        let t = sys.law().stieltjes_t(z).map_err(|e| e.to_string())?;
        worst = worst.max(distance_to_mp(&p, t));
    }
    within(worst, 1e-10, "max ||T - tI||/||T||")
}

fn canonical(b: &ModelBank) -> Check {
    let sys = CanonicalSystem::new(b, 3, 24).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for z in [c(0.5, 0.1), c(1.5, 0.5)] {
        let p = sys
            .solve(z, &SolverOptions::default())
            .map_err(|e| e.to_string())?;
        let (r1, r2) = sys.residuals(&p).map_err(|e| e.to_string())?;
        worst = worst.max(r1).max(r2).max(p.class_defects().max());
    }
    within(worst, 1e-8, "worst residual or class defect")
}

fn row(name: &'static str, f: impl FnOnce() -> Check) -> CheckRow {
    let start = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|_| Err("panicked".into()));
    let seconds = start.elapsed().as_secs_f64();
    match out {
        Ok(detail) => CheckRow {
            name,
            pass: true,
            detail,
            seconds,
        },
        Err(detail) => CheckRow {
            name,
            pass: false,
            detail,
            seconds,
        },
    }
}

pub fn run(inject: bool) -> Vec<CheckRow> {
    let b = bank(inject);
    let on_bank = |f: fn(&ModelBank) -> Check| b.as_ref().map_err(Clone::clone).and_then(f);
    vec![
        row("model positivity", || on_bank(model_positivity)),
        row("Psi commutation", || on_bank(commutation)),
        row("Psi_bar / Psi duality", || on_bank(duality)),
        row("tau Parseval bound", parseval),
        row("Szego quadratic form", || on_bank(szego)),
        row("error matrix trace", || on_bank(error_trace)),
        row("MP Stieltjes axioms", mp_axioms),
        row("white-bank reduction", white_reduction),
        row("canonical residual", || on_bank(canonical)),
    ]
}
