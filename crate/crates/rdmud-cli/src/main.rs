//! `rdmud` — reduced-dimension multiuser detection toolkit CLI.

mod config;
mod presets;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use rdmud_core::bounds::{pe_bound_decorrelator, snr_requirement, BoundParams};
use rdmud_core::detect::{conventional_decorrelator, DetectorFamily, DetectorSpec, SymbolStage};
use rdmud_core::factory::{self, MatrixRecipe};
use rdmud_core::matfile;
use rdmud_core::mc::{self, rows_to_csv, ExperimentSpec, GramSpec, SweepPlan};
use rdmud_core::model::{AmplitudeProfile, GramMatrix};
use rdmud_core::{MatrixKind, MeasurementMatrix};

#[derive(Parser)]
#[command(
    name = "rdmud",
    version,
    about = "Reduced-dimension multiuser detection: matrices, detectors, bounds, Monte Carlo",
    long_about = None
)]
struct Cli {
    /// Cap the rayon worker count (results are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a measurement matrix and write it in RDMUD-MAT v1 format.
    GenMatrix(GenMatrixArgs),
    /// Report the coherence (and friends) of a matrix file.
    Coherence {
        /// RDMUD-MAT file.
        #[arg(long)]
        matrix: PathBuf,
        /// Renormalize columns on load.
        #[arg(long)]
        normalize: bool,
    },
    /// Run one detector on an observation file.
    Detect(DetectArgs),
    /// Run a probability-of-symbol-error sweep from a config (CSV out).
    PeSweep(PeSweepArgs),
    /// Evaluate recovery conditions, threshold ranges and error bounds.
    Bounds {
        /// Experiment config with a [bounds] section.
        #[arg(long)]
        config: PathBuf,
    },
    /// Numerically tune a detection threshold over a grid.
    Tune(TuneArgs),
    /// Run a named preset experiment (or list them).
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct GenMatrixArgs {
    /// gaussian | partial-dft | kerdock | file
    #[arg(long)]
    kind: String,
    /// Correlator count M.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    rows: u64,
    /// User count N (kerdock default: M^2).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    cols: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Min-coherence search candidates.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    search: u64,
    /// Source file for --kind file.
    #[arg(long)]
    path: Option<PathBuf>,
    /// Renormalize columns (file kind only).
    #[arg(long)]
    normalize: bool,
    /// Output file (defaults to stdout summary only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Observation vector file: y for front-end detectors, z (real) for the
    /// decorrelator.
    #[arg(long)]
    observation: PathBuf,
    /// Measurement matrix file.
    #[arg(long)]
    matrix: PathBuf,
    /// Gram matrix file (identity when omitted).
    #[arg(long)]
    gram: Option<PathBuf>,
    /// rdd | rddt | rddf | rddft | rd-ls | rd-mmse | rd-ml | decorrelator
    #[arg(long)]
    detector: String,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Noise variance (MMSE stage and rd-ml).
    #[arg(long, default_value_t = 0.0)]
    sigma2: f64,
    /// Apply the noise-whitening transform first.
    #[arg(long)]
    whiten: bool,
    /// Symbol stage for the feedback detectors: sign | ls | mmse.
    #[arg(long, default_value = "sign")]
    stage: String,
    /// Constant channel gain for every user.
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
}

#[derive(Args)]
struct PeSweepArgs {
    /// Experiment config (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see `reproduce --list`).
    #[arg(long)]
    preset: Option<String>,
    /// Output CSV path (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trial-count override.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    config: PathBuf,
    /// rddt | rddft
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 0.3)]
    grid_start: f64,
    #[arg(long, default_value_t = 1.0)]
    grid_stop: f64,
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Preset name; see --list.
    #[arg(long)]
    preset: Option<String>,
    /// List available presets.
    #[arg(long)]
    list: bool,
    /// Directory for the CSV artifacts.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Trial-count override for quick runs.
    #[arg(long)]
    trials: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized; --threads ignored");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenMatrix(args) => cmd_gen_matrix(args),
        Command::Coherence { matrix, normalize } => cmd_coherence(&matrix, normalize),
        Command::Detect(args) => cmd_detect(args),
        Command::PeSweep(args) => cmd_pe_sweep(args),
        Command::Bounds { config } => cmd_bounds(&config),
        Command::Tune(args) => cmd_tune(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    }
}

fn matrix_summary(a: &MeasurementMatrix) {
    let mu = a
        .coherence()
        .map(|m| format!("{m}"))
        .unwrap_or_else(|_| "undefined".into());
    println!("M = {}", a.m());
    println!("N = {}", a.n());
    println!("mu = {mu}");
    println!("welch_bound = {}", factory::welch_bound(a.m(), a.n()));
    println!("row_energy = {}", a.row_energy());
}

fn cmd_gen_matrix(args: GenMatrixArgs) -> Result<()> {
    let kind: MatrixKind = args.kind.parse()?;
    let rows = args.rows as usize;
    let cols = match kind {
        MatrixKind::Kerdock => args.cols.map(|c| c as usize).unwrap_or(rows * rows),
        _ => args.cols.context("--cols is required for this kind")? as usize,
    };
    let mut recipe =
        MatrixRecipe::new(kind, rows, cols, args.seed).with_search(args.search as usize);
    recipe.path = args.path;
    recipe.normalize = args.normalize;
    let (a, report) = factory::search_min_coherence(&recipe)?;
    matrix_summary(&a);
    if args.search > 1 {
        println!(
            "search: best candidate {} of {}",
            report.best_index, report.candidates
        );
    }
    if let Some(out) = args.out {
        factory::save_matrix(&a, &out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_coherence(path: &Path, normalize: bool) -> Result<()> {
    let a = factory::load_matrix(path, normalize)?;
    matrix_summary(&a);
    Ok(())
}

fn load_gram(path: &Option<PathBuf>, n: usize) -> Result<GramMatrix> {
    match path {
        None => Ok(GramMatrix::identity(n)),
        Some(p) => GramSpec::File(p.clone()).resolve(n).map_err(Into::into),
    }
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let a = factory::load_matrix(&args.matrix, false)?;
    let g = load_gram(&args.gram, a.n())?;
    let r = AmplitudeProfile::constant(a.n(), args.gain)?;
    let family: DetectorFamily = args.detector.parse()?;
    let obs = matfile::read_vector(&args.observation)?;

    let symbols: Vec<i8>;
    let support: Vec<usize>;
    if family == DetectorFamily::Decorrelator {
        if obs.iter().any(|c| c.im != 0.0) {
            bail!("decorrelator expects a real MF-bank observation z");
        }
        let z = obs.map(|c| c.re);
        symbols = conventional_decorrelator(&z, &g, &r)?;
        support = symbols
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != 0)
            .map(|(i, _)| i)
            .collect();
    } else {
        if obs.len() != a.m() {
            bail!(
                "observation length {} does not match M = {}",
                obs.len(),
                a.m()
            );
        }
        let stage = match args.stage.as_str() {
            "sign" => SymbolStage::Sign,
            "ls" => SymbolStage::LeastSquares,
            "mmse" => SymbolStage::Mmse,
            other => bail!("unknown stage `{other}`"),
        };
        let spec = DetectorSpec {
            family,
            k: args.k,
            xi: args.xi,
            eps: args.eps,
            whiten: args.whiten,
            symbol_stage: stage,
        };
        let res = spec.run_front_end(&obs, &a, &g, &r, args.sigma2)?;
        symbols = res.symbols;
        support = res.support;
    }
    // user indices are reported 1-based, matching the usual convention
    let shown: Vec<String> = support.iter().map(|i| (i + 1).to_string()).collect();
    println!("support = [{}]", shown.join(", "));
    println!(
        "symbols = [{}]",
        symbols
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn run_plan_to_csv(plans: &[(String, SweepPlan)], out: &PathBuf) -> Result<()> {
    let started = Instant::now();
    let mut all_rows = Vec::new();
    let mut total_trials = 0u64;
    for (name, plan) in plans {
        let rows = mc::sweep(plan)?;
        total_trials += rows.iter().map(|r| r.estimate.trials).sum::<u64>();
        eprintln!("  part `{name}`: {} rows", rows.len());
        all_rows.extend(rows);
    }
    let csv = rows_to_csv(&all_rows);
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(out, &csv).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {} ({} rows, {} trials, {:.1}s)",
        out.display(),
        all_rows.len(),
        total_trials,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_pe_sweep(args: PeSweepArgs) -> Result<()> {
    let (plans, default_out) = if let Some(path) = &args.config {
        let cfg = ExperimentConfig::load(path)?;
        let out = cfg
            .experiment
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from("sweep.csv"));
        (
            vec![(
                cfg.experiment
                    .name
                    .clone()
                    .unwrap_or_else(|| "sweep".into()),
                cfg.sweep_plan(args.trials)?,
            )],
            out,
        )
    } else if let Some(name) = &args.preset {
        presets::build(name, args.trials)?
    } else {
        bail!("pass --config <file> or --preset <name>");
    };
    let out = args.out.unwrap_or(default_out);
    run_plan_to_csv(&plans, &out)
}

fn cmd_bounds(path: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(path)?;
    let bounds_cfg = cfg
        .bounds
        .as_ref()
        .context("config has no [bounds] section")?;
    let m = cfg.base_m();
    let recipe = cfg.matrix.recipe(m, cfg.model.n)?;
    let (a, _) = factory::search_min_coherence(&recipe)?;
    let g = cfg.gram.resolve()?.resolve(a.n())?;
    let k = cfg.model.k;
    let (r_min, r_max) = match cfg.amplitude.resolve()? {
        mc::AmplitudeRule::Constant(c) => (c.abs(), c.abs()),
        mc::AmplitudeRule::Uniform { lo, hi } => (lo, hi),
    };
    // representative sorted gains: strongest users at r_max, weakest at r_min
    let mut sorted_gains = vec![r_max; k];
    if k > 0 {
        sorted_gains[k - 1] = r_min;
    }
    let params = BoundParams {
        alpha: bounds_cfg.alpha,
        n: a.n(),
        k,
        sigma2: cfg.model.sigma2,
        mu: a.coherence()?,
        r_min,
        r_max,
        sorted_gains,
        lambda_max_g_inv: g.lambda_max_inv(),
        row_energy: a.row_energy(),
    };
    params.validate()?;

    let k0 = bounds_cfg.k0.unwrap_or(k);
    let tau = params.tau();
    let snr = params.snr_min();
    let rdd = params.check_rdd_condition();
    let rddf = params.check_rddf_condition();
    let fmt_bound = |b: f64| {
        if b.is_infinite() {
            "+inf (no guarantee)".to_string()
        } else {
            format!("{b:.6e}")
        }
    };
    let fmt_range = |r: Option<(f64, f64)>| match r {
        Some((lo, hi)) => format!("({lo:.6}, {hi:.6})"),
        None => "empty".to_string(),
    };

    println!("N                    = {}", params.n);
    println!("M                    = {m}");
    println!("K                    = {k}");
    println!("mu                   = {:.6}", params.mu);
    println!("row_energy           = {:.6}", params.row_energy);
    println!("lambda_max_g_inv     = {:.6}", params.lambda_max_g_inv);
    println!("sigma2               = {}", params.sigma2);
    println!("alpha                = {}", params.alpha);
    println!("tau                  = {tau:.6}");
    println!("snr_min              = {snr:.4}");
    println!("snr_min_db           = {:.2}", 10.0 * snr.log10());
    println!("snr_requirement      = {:.4}", snr_requirement(params.n));
    println!("rdd_condition_lhs    = {:.6}", rdd.lhs);
    println!("rdd_condition_rhs    = {:.6}", rdd.rhs);
    println!("rdd_condition_holds  = {}", rdd.holds);
    println!("rddf_condition_holds = {}", rddf.holds);
    println!("implied_pe_bound     = {:.6e}", rdd.implied_pe_bound);
    println!(
        "xi_range(K0 = {k0})    = {}",
        fmt_range(params.xi_range(k0))
    );
    println!("eps_range            = {}", fmt_range(params.eps_range()));
    println!(
        "pe_bound_rdd         = {}",
        fmt_bound(params.pe_bound_rdd())
    );
    println!(
        "pe_bound_rddf        = {}",
        fmt_bound(params.pe_bound_rddf())
    );
    println!(
        "pe_bound_decorrelator = {}",
        fmt_bound(pe_bound_decorrelator(snr, params.n))
    );

    // machine-readable summary row
    println!(
        "csv: N,M,K,mu,row_energy,lambda_max_g_inv,sigma2,alpha,tau,snr_min,\
         rdd_holds,rddf_holds,implied_pe_bound,pe_bound_rdd,pe_bound_rddf"
    );
    println!(
        "csv: {},{m},{k},{},{},{},{},{},{tau},{snr},{},{},{},{},{}",
        params.n,
        params.mu,
        params.row_energy,
        params.lambda_max_g_inv,
        params.sigma2,
        params.alpha,
        rdd.holds,
        rddf.holds,
        rdd.implied_pe_bound,
        params.pe_bound_rdd(),
        params.pe_bound_rddf()
    );
    Ok(())
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let family: DetectorFamily = args.family.parse()?;
    if !matches!(family, DetectorFamily::Rddt | DetectorFamily::Rddft) {
        bail!("tuning applies to rddt and rddft");
    }
    let m = cfg.base_m();
    let recipe = cfg.matrix.recipe(m, cfg.model.n)?;
    let (a, _) = factory::search_min_coherence(&recipe)?;
    let g = cfg.gram.resolve()?.resolve(a.n())?;
    let base = ExperimentSpec {
        a: Arc::new(a),
        g: Arc::new(g),
        k: cfg.model.k,
        amplitude: cfg.amplitude.resolve()?,
        sigma2: cfg.model.sigma2,
        master_seed: cfg.master_seed()?,
        fixed_support: None,
    };
    let mut grid = Vec::new();
    let mut t = args.grid_start;
    while t <= args.grid_stop + 1e-12 {
        grid.push(t);
        t += args.grid_step;
    }
    let trials = args.trials.unwrap_or(cfg.experiment.trials);
    let result = mc::tune_threshold(&base, family, &DetectorSpec::new(family), &grid, trials)?;
    println!("threshold,pe,ci_halfwidth");
    for (thr, est) in &result.grid {
        println!("{thr},{},{}", est.pe, est.ci_half_width);
    }
    println!("best_threshold = {}", result.best_threshold);
    println!("best_pe = {}", result.best.pe);
    Ok(())
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<()> {
    if args.list {
        println!("available presets:");
        for (name, about) in presets::catalog() {
            println!("  {name:<10} {about}");
        }
        return Ok(());
    }
    let name = args.preset.context("pass --preset <name> or --list")?;
    let (plans, default_out) = presets::build(&name, args.trials)?;
    let out = args.out_dir.join(
        default_out
            .file_name()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(format!("{name}.csv"))),
    );
    run_plan_to_csv(&plans, &out)
}
