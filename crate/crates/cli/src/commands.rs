use std::path::{Path, PathBuf};

use blockcorr::detequiv::{
    default_z_grid, report, sq_dev_integral, CanonicalSystem, SolverOptions,
};
use blockcorr::harness::{
    curves_crossover, run_error_curves, run_histogram, run_mean_identity, write_fig1_csv,
    write_fig2_csv, ExperimentConfig, HistogramConfig, Manifest, MeanIdentityConfig,
};
use blockcorr::sampling::{sample_block_corr, sq_dev_direct};
use blockcorr::tsmodel::{sample_ensemble, BankSpec, ModelSpec};
use blockcorr::{Complex64, Ensemble, ModelBank};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{object, resolve, Overrides};
use crate::data::{self, DataFormat};
use crate::{selfcheck, Cli, CliError, Command, TestArgs};

const DEFAULT_OUT: &str = "blockcorr-out";

struct Run<'a> {
    cli: &'a Cli,
    sets: Vec<String>,
}

impl Run<'_> {
    fn resolve<C: Serialize + for<'de> Deserialize<'de>>(
        &self,
        defaults: &C,
    ) -> Result<(C, Value), CliError> {
        let ov = Overrides {
            file: self.cli.config.as_deref(),
            sets: &self.sets,
            seed: self.cli.seed,
            reps: self.cli.reps,
        };
        resolve(defaults, &ov)
    }

    fn out_dir(&self, fallback: Option<&str>) -> Result<PathBuf, CliError> {
        let dir = self
            .cli
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(fallback.unwrap_or(DEFAULT_OUT)));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn manifest<R: Serialize>(
        &self,
        dir: &Path,
        name: &str,
        config: &Value,
        results: &R,
    ) -> Result<(), CliError> {
        let mut argv: Vec<String> = std::env::args().skip(1).collect();
        argv.insert(0, "blockcorr".into());
        let mut m = Manifest::new(name, config, results)?;
        m.command = argv.join(" ");
        m.write(dir)?;
        Ok(())
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let run = Run {
        cli,
        sets: cli.set.clone(),
    };
    match &cli.command {
        Command::Simulate => simulate(&run),
        Command::Detequiv => detequiv(&run),
        Command::Histogram { tag } => histogram(&run, tag.as_deref()),
        Command::ErrorCurves { tag } => error_curves(&run, tag.as_deref()),
        Command::MeanIdentity => mean_identity(&run),
        Command::Test(args) => test(run, args),
        Command::Selfcheck { inject_corrupt_r } => self_check(&run, *inject_corrupt_r),
    }
}

fn default_bank(m: usize) -> BankSpec {
    BankSpec::repeat(ModelSpec::Ar1 { rho: [0.5, 0.0] }, m)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    bank: BankSpec,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    l: usize,
    seed: u64,
    format: DataFormat,
}

fn simulate(run: &Run) -> Result<(), CliError> {
    let defaults = SimulateConfig {
        bank: default_bank(4),
        n: 256,
        l: 4,
        seed: 1,
        format: DataFormat::Complex,
    };
    let (cfg, value) = run.resolve(&defaults)?;
    let bank: ModelBank = cfg.bank.build()?;
    let ens = sample_ensemble(&bank, cfg.n, cfg.l, cfg.seed)?;
    let dir = run.out_dir(None)?;
    let path = dir.join("data.csv");
    data::write(&path, &ens.data, cfg.format).map_err(|e| io_err(&path, e))?;
    let bank_path = dir.join("bank.json");
    std::fs::write(
        &bank_path,
        serde_json::to_string_pretty(&cfg.bank).map_err(blockcorr::Error::from)?,
    )
    .map_err(|e| io_err(&bank_path, e))?;
    let (m, n, l) = ens.dims();
    let results = object(vec![
        ("dims", serde_json::json!([m, n, l])),
        ("data", Value::from("data.csv")),
        ("bank", Value::from("bank.json")),
    ]);
    run.manifest(&dir, "simulate", &value, &results)?;
    println!(
        "wrote {} series x {} samples to {}",
        m,
        ens.data.ncols(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityConfig {
    points: usize,
    eta: f64,
    x_min: f64,
    x_max: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetEquivConfig {
    bank: BankSpec,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    l: usize,
    /// Grid points `[re, im]`; empty selects the default grid.
    z: Vec<[f64; 2]>,
    tol: f64,
    max_iter: usize,
    density: DensityConfig,
}

fn detequiv(run: &Run) -> Result<(), CliError> {
    let defaults = DetEquivConfig {
        bank: default_bank(8),
        n: 64,
        l: 4,
        z: Vec::new(),
        tol: 1e-10,
        max_iter: 500,
        density: DensityConfig {
            points: 0,
            eta: 0.05,
            x_min: 0.0,
            x_max: 4.0,
        },
    };
    let (cfg, value) = run.resolve(&defaults)?;
    let bank: ModelBank = cfg.bank.build()?;
    let c = (bank.len() * cfg.l) as f64 / cfg.n as f64;
    let grid: Vec<Complex64> = if cfg.z.is_empty() {
        default_z_grid(c, 9)
    } else {
        cfg.z.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    };
    let opts = SolverOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        ..SolverOptions::default()
    };
    let rep = report(&bank, cfg.l, cfg.n, &grid, &opts)?;
    let dir = run.out_dir(None)?;
    if cfg.density.points > 0 {
        let d = &cfg.density;
        let xs: Vec<f64> = (0..d.points)
            .map(|k| d.x_min + (d.x_max - d.x_min) * k as f64 / (d.points.max(2) - 1) as f64)
            .collect();
        let sys = CanonicalSystem::new(&bank, cfg.l, cfg.n)?;
        let dens = sys.smoothed_density(&xs, d.eta, &opts)?;
        let path = dir.join("density.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(["x", "density_muN", "density_mp"])
            .map_err(|e| io_err(&path, e))?;
        for (x, v) in xs.iter().zip(&dens) {
            w.serialize((x, v, sys.law().density_at(*x)))
                .map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    run.manifest(&dir, "detequiv", &value, &rep)?;
    println!(
        "c = {:.6}, M = {}, N = {}, L = {}",
        rep.c, rep.dims[0], rep.dims[1], rep.dims[2]
    );
    println!(
        "int (x-1)^2 dmu_N = {:.8e}  (MP {:.8e}, correction {:.3e})",
        rep.sq_dev_integral, rep.mp_sq_dev, rep.correction
    );
    println!(
        "{:>10} {:>10} {:>14} {:>14} {:>6} {:>10}",
        "Re z", "Im z", "Re s_N", "Im s_N", "iter", "residual"
    );
    for k in 0..rep.z_grid.len() {
        let (z, t) = (rep.z_grid[k], rep.trace_t[k]);
        println!(
            "{:>10.4} {:>10.4} {:>14.6e} {:>14.6e} {:>6} {:>10.2e}",
            z[0], z[1], t[0], t[1], rep.iterations[k], rep.residuals[k]
        );
    }
    Ok(())
}

fn histogram(run: &Run, tag: Option<&str>) -> Result<(), CliError> {
    let (cfg, value) = run.resolve(&HistogramConfig::default())?;
    let h = run_histogram(&cfg)?;
    let dir = run.out_dir(None)?;
    let tag = tag
        .map(str::to_string)
        .unwrap_or_else(|| format!("M{}_N{}_L{}", cfg.m, cfg.n, cfg.l));
    let path = dir.join(format!("fig1_{tag}.csv"));
    write_fig1_csv(&path, &h)?;
    run.manifest(&dir, "histogram", &value, &h)?;
    println!(
        "c = {:.4}, {} pooled eigenvalues in {} bins, KS distance {:.4}, zero fraction {:.4} (MP atom {:.4}), dropped {}",
        h.c,
        h.pooled,
        h.empirical_density.len(),
        h.ks_distance,
        h.zero_fraction,
        h.mp_atom,
        h.dropped
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn error_curves(run: &Run, tag: Option<&str>) -> Result<(), CliError> {
    let (cfg, value) = run.resolve(&ExperimentConfig::default())?;
    let curves = run_error_curves(&cfg)?;
    let dir = run.out_dir(cfg.outputs.as_deref())?;
    let tag = tag
        .map(str::to_string)
        .unwrap_or_else(|| format!("c{}", cfg.c_star));
    let path = dir.join(format!("fig2_{tag}.csv"));
    write_fig2_csv(&path, &curves)?;
    let crossovers: Vec<Value> = cfg
        .n_list
        .iter()
        .map(|&n| serde_json::json!({ "N": n, "crossover": curves_crossover(&curves, n) }))
        .collect();
    let results = serde_json::json!({ "curves": curves, "crossovers": crossovers });
    run.manifest(&dir, "error-curves", &value, &results)?;
    println!(
        "{:>6} {:>6} {:>5} {:>5} {:>11} {:>11} {:>11} {:>11}",
        "beta", "N", "M", "L", "err_total", "err1", "err2", "stderr1"
    );
    for c in &curves.cells {
        println!(
            "{:>6.3} {:>6} {:>5} {:>5} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.2e}",
            c.beta, c.n, c.m, c.l, c.err_total, c.err1, c.err2, c.stderr1
        );
    }
    for s in &curves.skipped {
        eprintln!(
            "warning: skipped beta = {}, N = {}: {}",
            s.beta, s.n, s.reason
        );
    }
    for &n in &cfg.n_list {
        match curves_crossover(&curves, n) {
            Some(x) => println!(
                "N = {n}: crossover at beta = {:.4} (between {} and {})",
                x.beta, x.lower, x.upper
            ),
            None => println!("N = {n}: no crossover"),
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Largest |z-score| accepted by `mean-identity`.
const MAX_Z: f64 = 4.0;

fn mean_identity(run: &Run) -> Result<(), CliError> {
    let (cfg, value) = run.resolve(&MeanIdentityConfig::default())?;
    let r = run_mean_identity(&cfg)?;
    let dir = run.out_dir(None)?;
    run.manifest(&dir, "mean-identity", &value, &r)?;
    println!(
        "mean {:.6e} +- {:.3e} over {} replications, exact {:.6e}, z = {:.3}",
        r.mean, r.std_error, r.kept, r.exact, r.z_score
    );
    if r.infinite_width {
        println!("standard error undefined for a single replication");
        return Ok(());
    }
    if r.z_score.abs() > MAX_Z {
        return Err(CliError::Check(format!(
            "|z| = {:.3} exceeds {MAX_Z}",
            r.z_score.abs()
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestConfig {
    data: String,
    #[serde(rename = "L")]
    l: usize,
    alpha: f64,
    format: DataFormat,
    bank: Option<BankSpec>,
}

#[derive(Serialize)]
struct TestReport {
    dims: [usize; 3],
    c: f64,
    statistic: f64,
    mp_reference: f64,
    corrected_reference: Option<f64>,
    deviation: f64,
    alpha: f64,
    verdict: &'static str,
}

fn test(mut run: Run, args: &TestArgs) -> Result<(), CliError> {
    let mut push = |k: &str, v: Value| run.sets.push(format!("{k}={v}"));
    if let Some(p) = &args.data {
        push("data", Value::from(p.display().to_string()));
    }
    if let Some(l) = args.l {
        push("L", Value::from(l));
    }
    if let Some(a) = args.alpha {
        push("alpha", Value::from(a));
    }
    if let Some(f) = args.format {
        push(
            "format",
            serde_json::to_value(f).map_err(blockcorr::Error::from)?,
        );
    }
    if let Some(p) = &args.bank {
        let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| io_err(p, e))?;
        push("bank", v);
    }
    let defaults = TestConfig {
        data: String::new(),
        l: 4,
        alpha: 0.1,
        format: DataFormat::Complex,
        bank: None,
    };
    let (cfg, value) = run.resolve(&defaults)?;
    if cfg.data.is_empty() {
        return Err(CliError::Usage("test needs --data <file>".into()));
    }
    let raw = data::read(Path::new(&cfg.data), cfg.format).map_err(blockcorr::Error::Parse)?;
    let ens = Ensemble::from_data(raw, cfg.l)?;
    let (m, n, l) = ens.dims();
    let phi = sq_dev_direct(sample_block_corr(&ens)?.matrix());
    let c = (m * l) as f64 / n as f64;
    let corrected = match &cfg.bank {
        Some(spec) => {
            let bank: ModelBank = spec.build()?;
            if bank.len() != m {
                return Err(blockcorr::Error::Dimension(format!(
                    "bank has {} series, data {m}",
                    bank.len()
                ))
                .into());
            }
            Some(sq_dev_integral(&bank, l, n)?.integral)
        }
        None => None,
    };
    let reference = corrected.unwrap_or(c);
    let deviation = (phi - reference).abs() / reference;
    let consistent = deviation <= cfg.alpha;
    let rep = TestReport {
        dims: [m, n, l],
        c,
        statistic: phi,
        mp_reference: c,
        corrected_reference: corrected,
        deviation,
        alpha: cfg.alpha,
        verdict: if consistent {
            "consistent-with-H0"
        } else {
            "inconsistent-with-H0"
        },
    };
    let dir = run.out_dir(None)?;
    run.manifest(&dir, "test", &value, &rep)?;
    println!("M = {m}, N = {n}, L = {l}, c = {c:.6}");
    println!("statistic (1/ML)||R_corr - I||_F^2 = {phi:.6e}");
    println!("reference (MP) = {c:.6e}");
    if let Some(v) = corrected {
        println!("reference (corrected) = {v:.6e}");
    }
    println!(
        "relative deviation = {deviation:.4e}, alpha = {}",
        cfg.alpha
    );
    println!("verdict: {}", rep.verdict);
    if consistent {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "deviation {deviation:.4e} exceeds alpha {}",
            cfg.alpha
        )))
    }
}

fn self_check(run: &Run, inject: bool) -> Result<(), CliError> {
    let rows = selfcheck::run(inject);
    println!("{:<34} {:<6} {:>8}  detail", "check", "status", "seconds");
    for r in &rows {
        println!(
            "{:<34} {:<6} {:>8.3}  {}",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.seconds,
            r.detail
        );
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    let dir = run.out_dir(None)?;
    run.manifest(
        &dir,
        "selfcheck",
        &object(vec![("inject_corrupt_r", Value::from(inject))]),
        &rows,
    )?;
    if failed > 0 {
        return Err(CliError::Check(format!(
            "{failed} of {} checks failed",
            rows.len()
        )));
    }
    println!("all {} checks passed", rows.len());
    Ok(())
}
