//! Monte-Carlo experiments: eigenvalue histograms against the MP density,
//! error curves along the `M = [(c N)^{1-beta}]`, `L = [(c N)^beta]`
//! protocol, and the exact-mean identity for the oracle-normalized matrix.
//!
//! Replications run on the rayon pool and are folded in index order, so
//! results do not depend on the number of workers.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detequiv::sq_dev_integral;
use crate::error::{Error, Result};
use crate::linalg::eigvalsh;
use crate::mplaw::MarchenkoPastur;
use crate::sampling::{oracle_block_corr, sample_block_corr, sq_dev_direct, Statistic};
use crate::tsmodel::{CovarianceModel, EnsembleSampler, ModelBank};

/// Eigenvalues below this fraction of the largest are treated as exact zeros.
pub const ZERO_EIGENVALUE_FRACTION: f64 = 1e-9;

/// The integer closest to `x`, halves rounded away from zero.
pub fn closest_integer(x: f64) -> i64 {
    x.round() as i64
}

/// `(M, L) = ([(c N)^{1-beta}], [(c N)^beta])`.
pub fn dims_for(c_star: f64, n: usize, beta: f64) -> (usize, usize) {
    let base = c_star * n as f64;
    let m = closest_integer(base.powf(1.0 - beta)).max(0) as usize;
    let l = closest_integer(base.powf(beta)).max(0) as usize;
    (m, l)
}

/// Series model from an AR(1) coefficient; zero gives white noise.
pub fn model_from_rho(rho: [f64; 2]) -> Result<CovarianceModel<f64>> {
    if rho == [0.0, 0.0] {
        Ok(CovarianceModel::white())
    } else {
        CovarianceModel::ar1(Complex::new(rho[0], rho[1]))
    }
}

/// Seed of cell `index` of a multi-cell experiment.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    Ok(())
}

/// Runs `f` for every replication and returns the successes in index order
/// with the number of replications dropped for a singular diagonal block.
fn replicate<F>(reps: usize, f: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let raw: Vec<Result<f64>> = (0..reps).into_par_iter().map(f).collect();
    let mut kept = Vec::with_capacity(reps);
    let mut dropped = 0;
    for r in raw {
        match r {
            Ok(v) => kept.push(v),
            Err(Error::SingularBlock { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((kept, dropped))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard error of the mean; infinite for fewer than two values.
fn std_error(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::INFINITY;
    }
    let mu = mean(v);
    let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub rho: [f64; 2],
    pub reps: usize,
    pub seed: u64,
    /// Bin count; Freedman-Diaconis when absent.
    #[serde(default)]
    pub bins: Option<usize>,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            m: 80,
            n: 600,
            l: 10,
            rho: [0.5, 0.0],
            reps: 20,
            seed: 1,
            bins: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub dims: [usize; 3],
    pub c: f64,
    pub edges: Vec<f64>,
    pub empirical_density: Vec<f64>,
    pub mp_density: Vec<f64>,
    /// Fraction of pooled eigenvalues treated as exact zeros.
    pub zero_fraction: f64,
    pub mp_atom: f64,
    pub ks_distance: f64,
    pub pooled: usize,
    pub dropped: usize,
}

/// Freedman-Diaconis bin count of sorted data, between 1 and 1000.
pub fn freedman_diaconis_bins(sorted: &[f64]) -> usize {
    let n = sorted.len();
    if n < 2 {
        return 1;
    }
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let (i, f) = (pos.floor() as usize, pos.fract());
        sorted[i] + f * (sorted[(i + 1).min(n - 1)] - sorted[i])
    };
    let width = 2.0 * (q(0.75) - q(0.25)) / (n as f64).cbrt();
    let range = sorted[n - 1] - sorted[0];
    if !(width > 0.0) || !(range > 0.0) {
        return 1;
    }
    ((range / width).ceil() as usize).clamp(1, 1000)
}

/// `sup_x |F_n(x) - F(x)|` for sorted data, checking both sides of every
/// jump. `cdf_left(x)` is `F(x-)`.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64, cdf_left: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let upto = j as f64 / n;
        d = d
            .max((cdf_left(x) - below).abs())
            .max((cdf(x) - upto).abs());
        i = j;
    }
    d
}

/// Eigenvalues of the sample block correlation matrix pooled over
/// replications, with near-zero values set to zero.
pub fn pooled_eigenvalues(
    bank: &ModelBank<f64>,
    n: usize,
    l: usize,
    reps: usize,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    check_reps(reps)?;
    let sampler = EnsembleSampler::new(bank, n, l)?;
    let raw: Vec<Result<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let corr = sample_block_corr(&sampler.draw(seed, rep))?;
            let mut ev = eigvalsh(corr.matrix());
            let floor = ZERO_EIGENVALUE_FRACTION * ev.last().copied().unwrap_or(0.0);
            for v in ev.iter_mut() {
                if *v < floor {
                    *v = 0.0;
                }
            }
            Ok(ev)
        })
        .collect();
    let mut pooled = Vec::new();
    let mut dropped = 0;
    for r in raw {
        match r {
            Ok(ev) => pooled.extend(ev),
            Err(Error::SingularBlock { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    pooled.sort_by(f64::total_cmp);
    Ok((pooled, dropped))
}

pub fn run_histogram(cfg: &HistogramConfig) -> Result<Histogram> {
    check_reps(cfg.reps)?;
    if cfg.bins == Some(0) {
        return Err(Error::Config("bins must be at least 1".into()));
    }
    let bank = ModelBank::repeat(model_from_rho(cfg.rho)?, cfg.m)?;
    let (pooled, dropped) = pooled_eigenvalues(&bank, cfg.n, cfg.l, cfg.reps, cfg.seed)?;
    if pooled.is_empty() {
        return Err(Error::Config("every replication was dropped".into()));
    }
    let c = (cfg.m * cfg.l) as f64 / cfg.n as f64;
    let law = MarchenkoPastur::new(c)?;
    let zeros = pooled.iter().take_while(|v| **v == 0.0).count();
    let nonzero = &pooled[zeros..];
    let (lo, hi) = match (nonzero.first(), nonzero.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        (Some(a), _) => (*a - 0.5, *a + 0.5),
        _ => (0.0, 1.0),
    };
    let bins = cfg.bins.unwrap_or_else(|| freedman_diaconis_bins(nonzero));
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in nonzero {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let total = pooled.len() as f64;
    let ks = ks_distance(
        &pooled,
        |x| law.cdf(x),
        |x| if x > 0.0 { law.cdf(x) } else { 0.0 },
    );
    // A point mass at exactly zero is only reached from the left by `F(0-)`,
    // which is zero; `cdf` includes the atom from zero onwards.
    Ok(Histogram {
        dims: [cfg.m, cfg.n, cfg.l],
        c,
        empirical_density: counts.iter().map(|&k| k as f64 / (total * width)).collect(),
        mp_density: edges
            .windows(2)
            .map(|w| law.density_at(0.5 * (w[0] + w[1])))
            .collect(),
        edges,
        zero_fraction: zeros as f64 / total,
        mp_atom: law.atom_mass(),
        ks_distance: ks,
        pooled: pooled.len(),
        dropped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub c_star: f64,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub beta_list: Vec<f64>,
    pub rho: [f64; 2],
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_statistic")]
    pub statistic: Statistic,
    #[serde(default)]
    pub outputs: Option<String>,
}

fn default_statistic() -> Statistic {
    Statistic::SqDev
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            c_star: 0.5,
            n_list: vec![600],
            beta_list: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            rho: [0.5, 0.0],
            reps: 200,
            seed: 1,
            statistic: Statistic::SqDev,
            outputs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_reps(self.reps)?;
        if !(self.c_star > 0.0) {
            return Err(Error::Config("c_star must be positive".into()));
        }
        if let Some(b) = self.beta_list.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Config(format!("beta {b} outside (0, 1)")));
        }
        if self.statistic != Statistic::SqDev {
            return Err(Error::Config(format!(
                "statistic {} has no closed-form deterministic-equivalent integral; use sq_dev",
                self.statistic
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorCell {
    pub beta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub c: f64,
    pub err_total: f64,
    pub err1: f64,
    pub err2: f64,
    /// Standard error of `err1` by the delta method.
    pub stderr1: f64,
    pub mu_n_integral: f64,
    pub mp_integral: f64,
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedCell {
    pub beta: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorCurves {
    pub cells: Vec<ErrorCell>,
    pub skipped: Vec<SkippedCell>,
}

impl ErrorCurves {
    /// Cells of one `N`, in the order of `beta_list`.
    pub fn for_n(&self, n: usize) -> Vec<&ErrorCell> {
        self.cells.iter().filter(|c| c.n == n).collect()
    }
}

/// RMS errors at one `(M, N, L)`.
pub fn error_cell(
    bank: &ModelBank<f64>,
    n: usize,
    l: usize,
    reps: usize,
    seed: u64,
) -> Result<ErrorCell> {
    check_reps(reps)?;
    let sampler = EnsembleSampler::new(bank, n, l)?;
    let (phi, dropped) = replicate(reps, |rep| {
        Ok(sq_dev_direct(
            sample_block_corr(&sampler.draw(seed, rep))?.matrix(),
        ))
    })?;
    if phi.is_empty() {
        return Err(Error::Config("every replication was dropped".into()));
    }
    let sq = sq_dev_integral(bank, l, n)?;
    let d1: Vec<f64> = phi.iter().map(|p| (p - sq.integral).powi(2)).collect();
    let err1 = mean(&d1).sqrt();
    let err_total = mean(&phi.iter().map(|p| (p - sq.mp).powi(2)).collect::<Vec<_>>()).sqrt();
    let stderr1 = if err1 > 0.0 {
        std_error(&d1) / (2.0 * err1)
    } else {
        0.0
    };
    Ok(ErrorCell {
        beta: f64::NAN,
        n,
        m: bank.len(),
        l,
        c: sq.c,
        err_total,
        err1,
        err2: (sq.integral - sq.mp).abs(),
        stderr1,
        mu_n_integral: sq.integral,
        mp_integral: sq.mp,
        kept: phi.len(),
        dropped,
    })
}

pub fn run_error_curves(cfg: &ExperimentConfig) -> Result<ErrorCurves> {
    cfg.validate()?;
    let model = model_from_rho(cfg.rho)?;
    let mut plan = Vec::new();
    let mut skipped = Vec::new();
    for &n in &cfg.n_list {
        for &beta in &cfg.beta_list {
            let (m, l) = dims_for(cfg.c_star, n, beta);
            if m < 2 || l < 1 {
                skipped.push(SkippedCell {
                    beta,
                    n,
                    reason: format!("M = {m}, L = {l}"),
                });
            } else {
                plan.push((n, beta, m, l));
            }
        }
    }
    let cells = plan
        .par_iter()
        .enumerate()
        .map(|(i, &(n, beta, m, l))| {
            let bank = ModelBank::repeat(model.clone(), m)?;
            let mut cell = error_cell(&bank, n, l, cfg.reps, cell_seed(cfg.seed, i))?;
            cell.beta = beta;
            Ok(cell)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorCurves { cells, skipped })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossover {
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Where `err1` and `err2` meet, by linear interpolation of
/// `ln err1 - ln err2` between the first bracketing pair of grid points.
pub fn crossover_estimate(beta: &[f64], err1: &[f64], err2: &[f64]) -> Option<Crossover> {
    let g: Vec<Option<f64>> = err1
        .iter()
        .zip(err2)
        .map(|(a, b)| {
            if *a > 0.0 && *b > 0.0 {
                Some(a.ln() - b.ln())
            } else {
                None
            }
        })
        .collect();
    for k in 0..beta.len().saturating_sub(1) {
        if let (Some(g0), Some(g1)) = (g[k], g[k + 1]) {
            if g0 == 0.0 {
                return Some(Crossover {
                    beta: beta[k],
                    lower: beta[k],
                    upper: beta[k],
                });
            }
            if g0 * g1 < 0.0 || g1 == 0.0 {
                let t = g0 / (g0 - g1);
                return Some(Crossover {
                    beta: beta[k] + t * (beta[k + 1] - beta[k]),
                    lower: beta[k],
                    upper: beta[k + 1],
                });
            }
        }
    }
    None
}

/// Crossover of the curves of one `N`.
pub fn curves_crossover(curves: &ErrorCurves, n: usize) -> Option<Crossover> {
    let cells = curves.for_n(n);
    let beta: Vec<f64> = cells.iter().map(|c| c.beta).collect();
    let e1: Vec<f64> = cells.iter().map(|c| c.err1).collect();
    let e2: Vec<f64> = cells.iter().map(|c| c.err2).collect();
    crossover_estimate(&beta, &e1, &e2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanIdentityConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub rho: [f64; 2],
    pub reps: usize,
    pub seed: u64,
}

impl Default for MeanIdentityConfig {
    fn default() -> Self {
        Self {
            m: 16,
            n: 512,
            l: 8,
            rho: [0.5, 0.0],
            reps: 2000,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanIdentityReport {
    pub dims: [usize; 3],
    pub mean: f64,
    pub std_error: f64,
    pub exact: f64,
    pub mp: f64,
    pub z_score: f64,
    /// Set when a single replication leaves the standard error undefined.
    pub infinite_width: bool,
    pub kept: usize,
    pub dropped: usize,
}

/// Monte-Carlo mean of `(1/ML) Tr((R_bar - I)^2)` against its exact value.
pub fn run_mean_identity(cfg: &MeanIdentityConfig) -> Result<MeanIdentityReport> {
    check_reps(cfg.reps)?;
    let bank = ModelBank::repeat(model_from_rho(cfg.rho)?, cfg.m)?;
    mean_identity(&bank, cfg.n, cfg.l, cfg.reps, cfg.seed)
}

pub fn mean_identity(
    bank: &ModelBank<f64>,
    n: usize,
    l: usize,
    reps: usize,
    seed: u64,
) -> Result<MeanIdentityReport> {
    check_reps(reps)?;
    let sampler = EnsembleSampler::new(bank, n, l)?;
    let (v, dropped) = replicate(reps, |rep| {
        Ok(sq_dev_direct(
            oracle_block_corr(&sampler.draw(seed, rep), bank)?.matrix(),
        ))
    })?;
    let sq = sq_dev_integral(bank, l, n)?;
    let mu = mean(&v);
    let se = std_error(&v);
    Ok(MeanIdentityReport {
        dims: [bank.len(), n, l],
        mean: mu,
        std_error: se,
        exact: sq.integral,
        mp: sq.mp,
        z_score: if se.is_finite() && se > 0.0 {
            (mu - sq.integral) / se
        } else {
            0.0
        },
        infinite_width: !se.is_finite(),
        kept: v.len(),
        dropped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeTable {
    #[serde(rename = "L")]
    pub l: usize,
    pub c: f64,
    pub rows: Vec<SlopeRow>,
    /// Least-squares slope of `ln rms` against `ln M`.
    pub slope: f64,
}

/// `RMS(phi^_N - phi_bar_N)` for the `sq_dev` statistic as `M` grows at
/// fixed `L` and `c = ML/N`.
pub fn slope_table(
    rho: [f64; 2],
    l: usize,
    c: f64,
    m_list: &[usize],
    reps: usize,
    seed: u64,
) -> Result<SlopeTable> {
    check_reps(reps)?;
    let model = model_from_rho(rho)?;
    let mut rows = Vec::new();
    for (i, &m) in m_list.iter().enumerate() {
        let n = closest_integer((m * l) as f64 / c).max(1) as usize;
        let bank = ModelBank::repeat(model.clone(), m)?;
        let sampler = EnsembleSampler::new(&bank, n, l)?;
        let s = cell_seed(seed, i);
        let (d, _) = replicate(reps, |rep| {
            let ens = sampler.draw(s, rep);
            let hat = sq_dev_direct(sample_block_corr(&ens)?.matrix());
            let bar = sq_dev_direct(oracle_block_corr(&ens, &bank)?.matrix());
            Ok((hat - bar).powi(2))
        })?;
        rows.push(SlopeRow {
            m,
            n,
            rms: mean(&d).sqrt(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.m as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.rms.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(SlopeTable {
        l,
        c,
        rows,
        slope: if sxx > 0.0 { sxy / sxx } else { f64::NAN },
    })
}

/// Hex SHA-256 of `blob <len>\0<bytes>`, the git object hash layout.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub input_hash: String,
    pub results: serde_json::Value,
}

impl Manifest {
    pub fn new<C: Serialize, R: Serialize>(command: &str, config: &C, results: &R) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let input_hash = content_hash(serde_json::to_string(&config)?.as_bytes());
        Ok(Self {
            tool: "blockcorr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            input_hash,
            results: serde_json::to_value(results)?,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut f = fs::File::create(dir.join("manifest.json"))?;
        f.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

pub fn write_fig1_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_left", "bin_right", "empirical_density", "mp_density"])?;
    for k in 0..h.empirical_density.len() {
        w.serialize((
            h.edges[k],
            h.edges[k + 1],
            h.empirical_density[k],
            h.mp_density[k],
        ))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fig2_csv(path: &Path, curves: &ErrorCurves) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "beta",
        "N",
        "M",
        "L",
        "err_total",
        "err1",
        "err2",
        "stderr1",
    ])?;
    for c in &curves.cells {
        w.serialize((
            c.beta,
            c.n,
            c.m,
            c.l,
            c.err_total,
            c.err1,
            c.err2,
            c.stderr1,
        ))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_dimensions() {
        let got: Vec<(usize, usize)> = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
            .iter()
            .map(|b| dims_for(0.5, 600, *b))
            .collect();
        assert_eq!(
            got,
            vec![(96, 3), (54, 6), (31, 10), (17, 17), (10, 31), (6, 54)]
        );
        assert_eq!(closest_integer(2.5), 3);
        assert_eq!(closest_integer(-2.5), -3);
        assert_eq!(closest_integer(2.49), 2);
    }

    #[test]
    fn synthetic_crossover_is_one_third() {
        let n: f64 = 1000.0;
        let beta: Vec<f64> = (0..10).map(|k| 0.15 + 0.05 * k as f64).collect();
        let e1: Vec<f64> = beta.iter().map(|b| n.powf(-(1.0 - b))).collect();
        let e2: Vec<f64> = beta.iter().map(|b| n.powf(-2.0 * b)).collect();
        let c = crossover_estimate(&beta, &e1, &e2).unwrap();
        assert!((c.beta - 1.0 / 3.0).abs() < 1e-12);
        assert!(c.lower <= c.beta && c.beta <= c.upper);
        assert!(crossover_estimate(&beta, &e1, &[0.0; 10]).is_none());
    }

    #[test]
    fn ks_handles_atoms() {
        let data = vec![0.0, 0.0, 1.0, 2.0];
        let cdf = |x: f64| {
            if x < 0.0 {
                0.0
            } else if x < 1.0 {
                0.5
            } else if x < 2.0 {
                0.75
            } else {
                1.0
            }
        };
        let left = |x: f64| {
            if x <= 0.0 {
                0.0
            } else if x <= 1.0 {
                0.5
            } else if x <= 2.0 {
                0.75
            } else {
                1.0
            }
        };
        assert_eq!(ks_distance(&data, cdf, left), 0.0);
        let unif: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&unif, |x| x.clamp(0.0, 1.0), |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn fd_bins() {
        let v: Vec<f64> = (0..1000).map(|k| k as f64 / 999.0).collect();
        // IQR = 0.5, width = 1 / 1000^{1/3} = 0.1.
        assert_eq!(freedman_diaconis_bins(&v), 10);
        assert_eq!(freedman_diaconis_bins(&[1.0]), 1);
        assert_eq!(freedman_diaconis_bins(&[1.0, 1.0, 1.0]), 1);
    }

    #[test]
    fn zero_reps_rejected() {
        let cfg = HistogramConfig {
            reps: 0,
            ..HistogramConfig::default()
        };
        assert!(matches!(run_histogram(&cfg), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            reps: 0,
            ..ExperimentConfig::default()
        };
        assert!(matches!(run_error_curves(&cfg), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            beta_list: vec![1.0],
            ..ExperimentConfig::default()
        };
        assert!(matches!(run_error_curves(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn white_curves_have_no_bias() {
        let cfg = ExperimentConfig {
            rho: [0.0, 0.0],
            reps: 8,
            n_list: vec![64],
            beta_list: vec![0.3, 0.5],
            ..ExperimentConfig::default()
        };
        let c = run_error_curves(&cfg).unwrap();
        assert_eq!(c.cells.len(), 2);
        for cell in &c.cells {
            assert_eq!(cell.err2, 0.0);
            assert_eq!(cell.err1, cell.err_total);
            assert!(cell.err_total.powi(2) <= 2.0 * (cell.err1.powi(2) + cell.err2.powi(2)));
        }
        assert!(curves_crossover(&c, 64).is_none());
    }

    #[test]
    fn small_cells_are_skipped() {
        let cfg = ExperimentConfig {
            n_list: vec![8],
            beta_list: vec![0.9],
            reps: 2,
            ..ExperimentConfig::default()
        };
        let c = run_error_curves(&cfg).unwrap();
        assert!(c.cells.is_empty());
        assert_eq!(c.skipped.len(), 1);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let cfg = ExperimentConfig {
            reps: 6,
            n_list: vec![48],
            beta_list: vec![0.4, 0.6],
            ..ExperimentConfig::default()
        };
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let curves = pool.install(|| run_error_curves(&cfg)).unwrap();
            serde_json::to_string(&Manifest::new("error-curves", &cfg, &curves).unwrap()).unwrap()
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn single_replication_flags_width() {
        let cfg = MeanIdentityConfig {
            m: 2,
            n: 32,
            l: 2,
            reps: 1,
            ..MeanIdentityConfig::default()
        };
        let r = run_mean_identity(&cfg).unwrap();
        assert!(r.infinite_width);
        assert!(r.std_error.is_infinite());
    }

    #[test]
    fn white_histogram_overlay() {
        let cfg = HistogramConfig {
            m: 20,
            n: 200,
            l: 1,
            rho: [0.0, 0.0],
            reps: 4,
            seed: 3,
            bins: None,
        };
        let h = run_histogram(&cfg).unwrap();
        assert_eq!(h.pooled, 80);
        let mass: f64 = h
            .empirical_density
            .iter()
            .zip(h.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(h.ks_distance < 0.2);
    }

    #[test]
    fn atom_fraction_for_wide_matrices() {
        let cfg = HistogramConfig {
            m: 6,
            n: 40,
            l: 10,
            rho: [0.5, 0.0],
            reps: 2,
            seed: 5,
            bins: Some(10),
        };
        let h = run_histogram(&cfg).unwrap();
        assert!((h.mp_atom - 1.0 / 3.0).abs() < 1e-12);
        assert!((h.zero_fraction - 20.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn csv_and_manifest_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = HistogramConfig {
            m: 4,
            n: 40,
            l: 2,
            reps: 2,
            ..HistogramConfig::default()
        };
        let h = run_histogram(&cfg).unwrap();
        write_fig1_csv(&dir.path().join("fig1_t.csv"), &h).unwrap();
        let text = fs::read_to_string(dir.path().join("fig1_t.csv")).unwrap();
        assert!(text.starts_with("bin_left,bin_right,empirical_density,mp_density\n"));
        assert_eq!(text.lines().count(), h.empirical_density.len() + 1);
        let m = Manifest::new("histogram", &cfg, &h).unwrap();
        m.write(dir.path()).unwrap();
        let back: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(back, m);
        let again: HistogramConfig = serde_json::from_value(back.config).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(
            content_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }
}
