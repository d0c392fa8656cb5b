//! `subplane`: generate data, fit one plane coordinate, run sweeps, run the
//! invariant checks.
//!
//! Exit codes: 0 success, 1 config or input error, 2 numerical divergence or
//! failed check, 3 I/O error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use subplane_core::checks::run_checks;
use subplane_core::harness::{
    fit_at, plot_curves, run_sweep, write_csv, write_csv_to, BasisKind, Method, ModelSpec,
    PlanePoint, SweepConfig,
};
use subplane_core::matrix_io::{load_matrix, save_matrix};
use subplane_core::metrics::{
    sup_in_sample, sup_out_of_sample, unsup_in_sample, unsup_in_sample_s,
    unsup_out_of_sample_trace, SupEval,
};
use subplane_core::model::{grow_feature_orders, sample_dataset, Dataset, FeatureSet, GroundTruthModel};
use subplane_core::{Error, Result};

#[derive(Parser)]
#[command(name = "subplane", version, about = "Subspace estimation across the supervision-orthonormality plane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a ground-truth model and a sampled dataset to a directory.
    Gen {
        #[arg(long, default_value = "hadamard")]
        basis: String,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        nsup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one estimate at a plane coordinate on a generated dataset.
    Fit {
        /// Constraint softness; `inf` removes the constraint.
        #[arg(long)]
        alpha: f64,
        /// Supervised samples; defaults to the dataset's own split.
        #[arg(long)]
        nsup: Option<usize>,
        #[arg(long)]
        p: usize,
        /// Target dimension for unsupervised fits; defaults to m.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        order_seed: u64,
        /// Report file; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a sweep described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_plot: Option<PathBuf>,
    },
    /// Run the invariant and oracle suite on small random instances.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Divergence { .. } => 2,
        Error::Io { .. } | Error::Schema(_) => 3,
        _ => 1,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn model_cfg(spec: &ModelSpec, n: usize, n_sup: usize) -> String {
    format!(
        "basis = {}\nd = {}\nm = {}\nsigma = {}\nseed = {}\nn = {n}\nn_sup = {n_sup}\n",
        spec.basis, spec.d, spec.m, spec.sigma, spec.seed
    )
}

#[allow(clippy::too_many_arguments)]
fn gen(basis: &str, d: usize, m: usize, sigma: f64, n: usize, nsup: usize, seed: u64, out: &Path) -> Result<()> {
    let spec = ModelSpec { basis: basis.parse::<BasisKind>()?, d, m, sigma, seed };
    let model = spec.build()?;
    let data = sample_dataset(&model, n, nsup, seed)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.into(), source: e })?;
    save_matrix(out.join("basis.txt"), model.basis())?;
    save_matrix(out.join("x.txt"), &data.x)?;
    save_matrix(out.join("z.txt"), data.targets()?)?;
    write_text(&out.join("model.cfg"), &model_cfg(&spec, n, nsup))
}

struct Stored {
    model: GroundTruthModel,
    data: Dataset,
}

fn load_stored(dir: &Path) -> Result<Stored> {
    let cfg_path = dir.join("model.cfg");
    let text = std::fs::read_to_string(&cfg_path).map_err(|e| Error::Io { path: cfg_path.clone(), source: e })?;
    let mut sigma = None;
    let mut n_sup = 0;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}: expected `key = value`", cfg_path.display())))?;
        let bad = || Error::Config(format!("{}: bad value for {}", cfg_path.display(), k.trim()));
        match k.trim() {
            "sigma" => sigma = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
            "n_sup" => n_sup = v.trim().parse().map_err(|_| bad())?,
            _ => {}
        }
    }
    let sigma = sigma.ok_or_else(|| Error::Config(format!("{}: missing sigma", cfg_path.display())))?;
    let model = GroundTruthModel::new(load_matrix(dir.join("basis.txt"))?, sigma)?;
    let x = load_matrix(dir.join("x.txt"))?;
    let z = load_matrix(dir.join("z.txt"))?;
    if x.nrows() != model.ambient_dim() || z.nrows() != model.latent_dim() {
        return Err(Error::Config(format!(
            "data shapes {}x{} / {}x{} do not match the {}x{} basis",
            x.nrows(),
            x.ncols(),
            z.nrows(),
            z.ncols(),
            model.ambient_dim(),
            model.latent_dim()
        )));
    }
    let data = Dataset::new(x, Some(z), n_sup)?;
    Ok(Stored { model, data })
}

#[allow(clippy::too_many_arguments)]
fn fit(
    alpha: f64,
    nsup: Option<usize>,
    p: usize,
    k: Option<usize>,
    dir: &Path,
    order_seed: u64,
    report: Option<&Path>,
) -> Result<()> {
    let Stored { model, data } = load_stored(dir)?;
    let (d, m) = (model.ambient_dim(), model.latent_dim());
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Config(format!("alpha must be >= 0 or inf, got {alpha}")));
    }
    let point = PlanePoint::new(alpha, nsup.unwrap_or(data.n_sup));
    let k = k.unwrap_or(m);
    let order = grow_feature_orders(d, 1, order_seed)?.remove(0);
    let features = FeatureSet::from_prefix(&order, p, d).map_err(|e| Error::Config(e.to_string()))?;
    let opts = Default::default();
    let fit = fit_at(point, &data, &features, k, &opts)?;
    let u = fit.estimate.embed();

    let mut out = String::new();
    let _ = writeln!(out, "method = {:?}", fit.method);
    let _ = writeln!(out, "alpha = {alpha}\nn_sup = {}\np = {p}\nk = {}", point.n_sup, fit.estimate.target_dim());
    let idx: Vec<String> = features.indices().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "features = {}", idx.join(","));
    let _ = writeln!(out, "iterations = {}", fit.iterations);
    if fit.method == Method::Pca || fit.method == Method::UnsupervisedPgd {
        let x_s = features.restrict_rows(&data.x)?;
        let _ = writeln!(out, "e_in = {}", unsup_in_sample(&u, &data.x));
        let _ = writeln!(out, "e_in_S = {}", unsup_in_sample_s(&fit.estimate.matrix, &x_s));
        let _ = writeln!(out, "e_out = {}", unsup_out_of_sample_trace(&u, &model.true_covariance()));
    } else {
        let _ = writeln!(out, "e_in = {}", sup_in_sample(&u, &data)?);
        let _ = writeln!(out, "e_out = {}", sup_out_of_sample(&u, &model, SupEval::Analytic));
    }
    match report {
        Some(path) => write_text(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn sweep(config: &Path, out_csv: Option<PathBuf>, out_plot: Option<PathBuf>) -> Result<()> {
    let cfg = SweepConfig::load(config)?;
    let result = run_sweep(&cfg)?;
    match out_csv.or_else(|| cfg.out_csv.clone()) {
        Some(path) => write_csv(&result, &path)?,
        None => write_csv_to(&result, std::io::stdout().lock())?,
    }
    if let Some(path) = out_plot.or_else(|| cfg.out_plot.clone()) {
        plot_curves(&result, &path, cfg.plot)?;
    }
    Ok(())
}

fn check(seed: u64) -> ExitCode {
    let outcomes = run_checks(seed);
    for c in &outcomes {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen { basis, d, m, sigma, n, nsup, seed, out } => gen(&basis, d, m, sigma, n, nsup, seed, &out),
        Command::Fit { alpha, nsup, p, k, data, order_seed, report } => {
            fit(alpha, nsup, p, k, &data, order_seed, report.as_deref())
        }
        Command::Sweep { config, out_csv, out_plot } => sweep(&config, out_csv, out_plot),
        Command::Check { seed } => return check(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
