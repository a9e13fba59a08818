//! Command-line entry point: dataset generation, training, sweeps,
//! metrics, interventions, regression, and plot-data emission.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ctxlab::config::RunConfig;
use ctxlab::error::CtxError;
use ctxlab::interventions::{
    read_study_rows, run_intervention_study, InterventionKind, StudyConfig, StudyModel,
    StudyResult,
};
use ctxlab::metrics::{full_report, MetricConfig, CSV_HEADER};
use ctxlab::mlp::{evaluate, load_checkpoint, save_checkpoint, train, TrainConfig};
use ctxlab::numerics::random::mix;
use ctxlab::population::{
    binned_curve, metric_column, mixing_curve, regression_study, run_sweep, tradeoff_study,
    FeatureSet, PopulationTable, RegressionTarget, SweepConfig,
};
use ctxlab::synthenv::{generate, make_ood1, make_ood2, Dataset, EnvironmentSpec};
use ctxlab::textio::fmt_float;
use ctxlab::{plots, Result};

type Dataset64 = Dataset<f64>;

#[derive(Parser)]
#[command(name = "ctxlab", version, about = "Deterministic laboratory for the \
background-invariance vs. object-disambiguation tradeoff on synthetic Gaussian environments")]
struct Cli {
    /// Cap the worker-thread count (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/ID-test/OOD1/OOD2 datasets plus spec sidecars.
    Gen(GenArgs),
    /// Train one MLP on a generated bundle; write checkpoint + eval summary.
    Train(TrainArgs),
    /// Train and score a model population over an environment grid.
    Sweep(SweepArgs),
    /// Compute the full metric report for one checkpoint.
    Metrics(MetricsArgs),
    /// Run a representation intervention study over freshly trained ERM models.
    Intervene(Intervene),
    /// Bootstrap regression of OOD accuracy on metric subsets.
    Regress(RegressArgs),
    /// Emit plot-data files from a population table.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "p-co")]
    p_co: Option<f64>,
    #[arg(long = "sigma-eps")]
    sigma_eps: Option<f64>,
    /// Samples per dataset.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory produced by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `erm` (14x14 environment grid) or `aug` (mixing-weight sweep).
    #[arg(long, default_value = "erm")]
    mode: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "n-train")]
    n_train: Option<usize>,
    #[arg(long = "n-test")]
    n_test: Option<usize>,
    #[arg(long = "seeds-per-cell")]
    seeds_per_cell: Option<usize>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Directory produced by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "model-id", default_value = "model")]
    model_id: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Intervene {
    #[arg(long)]
    config: Option<PathBuf>,
    /// rotation | boost_fg | boost_bg
    #[arg(long)]
    which: String,
    /// Boost factor (ignored by rotation).
    #[arg(long)]
    g: Option<f64>,
    /// Run the full boost-factor grid {1/64,...,64} instead of one g.
    #[arg(long = "g-sweep", default_value_t = false)]
    g_sweep: bool,
    #[arg(long = "n-models")]
    n_models: Option<usize>,
    #[arg(long = "p-co")]
    p_co: Option<f64>,
    #[arg(long = "sigma-eps")]
    sigma_eps: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Use the extended orthogonal rotation map instead of the literal
    /// low-rank formula.
    #[arg(long = "extended-rotation", default_value_t = false)]
    extended_rotation: bool,
}

#[derive(Args)]
struct RegressArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    population: PathBuf,
    /// id_only | id_obj | id_obj_factor | id_obj_ftwgt | all
    #[arg(long, default_value = "all")]
    features: String,
    /// avg_ood | ood1 | ood2
    #[arg(long, default_value = "avg_ood")]
    target: String,
    #[arg(long = "n-boot")]
    n_boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    population: PathBuf,
    /// Study CSV from `intervene --g-sweep`; enables the boost-factor curve.
    #[arg(long = "boost-study")]
    boost_study: Option<PathBuf>,
    #[arg(long = "n-bins")]
    n_bins: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CtxError::Degenerate(_) | CtxError::NonFinite(_) | CtxError::Diverged(_) => {
                    ExitCode::from(3)
                }
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Intervene(a) => cmd_intervene(a),
        Command::Regress(a) => cmd_regress(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// Environment spec from config/flags; every EnvironmentSpec field name
/// is accepted as a config key.
fn build_env_spec(
    cfg: &RunConfig,
    p_co: Option<f64>,
    sigma_eps: Option<f64>,
    n: Option<usize>,
    seed: u64,
) -> Result<EnvironmentSpec> {
    let p_co = cfg.f64_required("p_co", p_co)?;
    let sigma_eps = cfg.f64_required("sigma_eps", sigma_eps)?;
    let n_samples = cfg.usize_or("n_samples", n, 1000)?;
    let defaults = EnvironmentSpec::new(p_co, sigma_eps, n_samples, seed);
    let spec = EnvironmentSpec {
        mu_c0: cfg.f64_or("mu_c0", None, defaults.mu_c0)?,
        mu_c1: cfg.f64_or("mu_c1", None, defaults.mu_c1)?,
        mu_s0: cfg.f64_or("mu_s0", None, defaults.mu_s0)?,
        mu_s1: cfg.f64_or("mu_s1", None, defaults.mu_s1)?,
        sigma_c: cfg.f64_or("sigma_c", None, defaults.sigma_c)?,
        sigma_s: cfg.f64_or("sigma_s", None, defaults.sigma_s)?,
        mu_n: cfg.f64_or("mu_n", None, defaults.mu_n)?,
        sigma_n: cfg.f64_or("sigma_n", None, defaults.sigma_n)?,
        dim_irrelevant: cfg.usize_or("dim_irrelevant", None, defaults.dim_irrelevant)?,
        dim_causal: cfg.usize_or("dim_causal", None, defaults.dim_causal)?,
        dim_spurious: cfg.usize_or("dim_spurious", None, defaults.dim_spurious)?,
        ..defaults
    };
    spec.validate()?;
    Ok(spec)
}

const BUNDLE_NAMES: [&str; 4] = ["train", "id_test", "ood1", "ood2"];

fn bundle_spec(base: &EnvironmentSpec, name: &str) -> EnvironmentSpec {
    match name {
        "train" => EnvironmentSpec {
            seed: mix(base.seed, &[0]),
            ..base.clone()
        },
        "id_test" => EnvironmentSpec {
            seed: mix(base.seed, &[1]),
            ..base.clone()
        },
        "ood1" => EnvironmentSpec {
            seed: mix(base.seed, &[2]),
            ..make_ood1(base)
        },
        "ood2" => EnvironmentSpec {
            seed: mix(base.seed, &[3]),
            ..make_ood2(base)
        },
        _ => unreachable!("unknown bundle dataset"),
    }
}

fn load_bundle_dataset(dir: &Path, name: &str) -> Result<Dataset64> {
    let spec = EnvironmentSpec::read_sidecar(&dir.join(format!("{name}.spec")))?;
    Dataset::read_csv(&dir.join(format!("{name}.csv")), spec)
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let seed = cfg.seed(a.seed)?;
    let base = build_env_spec(&cfg, a.p_co, a.sigma_eps, a.n, seed)?;
    ensure_dir(&a.out)?;
    for name in BUNDLE_NAMES {
        let spec = bundle_spec(&base, name);
        let ds: Dataset64 = generate(&spec)?;
        ds.write_csv(&a.out.join(format!("{name}.csv")))?;
        spec.write_sidecar(&a.out.join(format!("{name}.spec")))?;
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let seed = cfg.seed(a.seed)?;
    let train_ds = load_bundle_dataset(&a.data, "train")?;
    let defaults = TrainConfig::erm(seed);
    let tcfg = TrainConfig {
        lr: cfg.f64_or("lr", a.lr, defaults.lr)?,
        epochs: cfg.usize_or("epochs", a.epochs, defaults.epochs)?,
        lr_decay_every: cfg.usize_or("lr_decay_every", None, defaults.lr_decay_every)?,
        lr_decay_factor: cfg.f64_or("lr_decay_factor", None, defaults.lr_decay_factor)?,
        batch_size: cfg.usize_or("batch_size", a.batch_size, defaults.batch_size)?,
        alpha0: cfg.f64_or("alpha0", None, 1.0)?,
        alpha1: cfg.f64_or("alpha1", a.alpha1, 0.0)?,
        alpha2: cfg.f64_or("alpha2", a.alpha2, 0.0)?,
        seed,
    };
    let model = train(&train_ds, &tcfg)?;
    ensure_dir(&a.out)?;
    save_checkpoint(&model, &tcfg, &a.out.join("model.ckpt"))?;

    let mut summary: Vec<(&str, String)> = Vec::new();
    for name in ["id_test", "ood1", "ood2"] {
        let ds = load_bundle_dataset(&a.data, name)?;
        let acc = evaluate(&model, &ds)?;
        let key = match name {
            "id_test" => "id_acc",
            "ood1" => "ood1_acc",
            _ => "ood2_acc",
        };
        summary.push((key, fmt_float(acc)));
    }
    ctxlab::textio::write_kv(&a.out.join("eval.txt"), &summary)?;
    Ok(())
}

fn metric_config_from(cfg: &RunConfig, seed: u64) -> Result<MetricConfig> {
    let defaults = MetricConfig::new(seed);
    Ok(MetricConfig {
        n_anchor: cfg.usize_or("n_anchor", None, defaults.n_anchor)?,
        n_perturb: cfg.usize_or("n_perturb", None, defaults.n_perturb)?,
        fbps_samples: cfg.usize_or("fbps_samples", None, defaults.fbps_samples)?,
        rsa_cap: cfg.usize_or("rsa_cap", None, defaults.rsa_cap)?,
        probe_l2: cfg.f64_or("probe_l2", None, defaults.probe_l2)?,
        seed,
    })
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let seed = cfg.seed(a.seed)?;
    let mode = cfg.string_or("mode", Some(a.mode.clone()), "erm");
    let mut sweep = match mode.as_str() {
        "erm" => SweepConfig::erm_default(seed),
        "aug" => SweepConfig::augmentation_default(seed),
        other => {
            return Err(CtxError::InvalidSpec(format!(
                "unknown sweep mode {other:?} (expected erm|aug)"
            )))
        }
    };
    sweep.epochs = cfg.usize_or("epochs", a.epochs, sweep.epochs)?;
    sweep.n_train = cfg.usize_or("n_train", a.n_train, sweep.n_train)?;
    sweep.n_test = cfg.usize_or("n_test", a.n_test, sweep.n_test)?;
    sweep.seeds_per_cell = cfg.usize_or("seeds_per_cell", a.seeds_per_cell, sweep.seeds_per_cell)?;
    sweep.metric = metric_config_from(&cfg, 0)?;

    let table = run_sweep::<f64>(&sweep)?;
    ensure_dir(&a.out)?;
    table.write_csv(&a.out.join("population.csv"))?;
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let (model, tcfg) = load_checkpoint::<f64>(&a.model)?;
    let seed = cfg.seed(a.seed)?;
    let id_test = load_bundle_dataset(&a.data, "id_test")?;
    let ood1 = load_bundle_dataset(&a.data, "ood1")?;
    let ood2 = load_bundle_dataset(&a.data, "ood2")?;
    let spec = EnvironmentSpec::read_sidecar(&a.data.join("train.spec"))?;
    let mcfg = metric_config_from(&cfg, seed)?;
    let report = full_report(
        &model, &a.model_id, &spec, &id_test, &ood1, &ood2, tcfg.alpha1, tcfg.alpha2, &mcfg,
    )?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    out.push_str(&report.to_csv_row());
    out.push('\n');
    std::fs::write(&a.out, out)?;
    Ok(())
}

const BOOST_GRID: [f64; 7] = [
    1.0 / 64.0,
    1.0 / 16.0,
    1.0 / 4.0,
    1.0,
    4.0,
    16.0,
    64.0,
];

fn cmd_intervene(a: Intervene) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let seed = cfg.seed(a.seed)?;
    let which = InterventionKind::parse(&a.which)?;
    let n_models = cfg.usize_or("n_models", a.n_models, 10)?;
    // Default study environments: the rotation effects need a
    // foreground-dominated readout, the boost effects a population where
    // both pathways carry weight.
    let default_p_co = if which == InterventionKind::Rotation { 0.55 } else { 0.9 };
    let p_co = cfg.f64_or("p_co", a.p_co, default_p_co)?;
    let sigma_eps = cfg.f64_or("sigma_eps", a.sigma_eps, 1.0)?;
    let epochs = cfg.usize_or("epochs", a.epochs, 750)?;

    // Fresh ERM study population.
    let models: Vec<StudyModel<f64>> = (0..n_models)
        .map(|i| -> Result<StudyModel<f64>> {
            let spec = EnvironmentSpec::new(p_co, sigma_eps, 1000, mix(seed, &[100, i as u64]));
            let ds: Dataset64 = generate(&spec)?;
            let mut tcfg = TrainConfig::erm(mix(seed, &[101, i as u64]));
            tcfg.epochs = epochs;
            Ok(StudyModel {
                id: format!("erm_{i:02}"),
                model: train(&ds, &tcfg)?,
                spec,
            })
        })
        .collect::<Result<_>>()?;

    let mut scfg = StudyConfig::new(mix(seed, &[102]));
    scfg.head_l2 = cfg.f64_or("head_l2", None, scfg.head_l2)?;
    scfg.literal_rotation = !a.extended_rotation;

    let gs: Vec<f64> = if a.g_sweep && which != InterventionKind::Rotation {
        BOOST_GRID.to_vec()
    } else {
        vec![cfg.f64_or("g", a.g, 1.0 / 64.0)?]
    };

    let mut combined = StudyResult {
        rows: Vec::new(),
        ttests: Vec::new(),
    };
    let multi = gs.len() > 1;
    for &g in &gs {
        let mut result = run_intervention_study(&models, which, g, &scfg)?;
        if multi {
            for t in &mut result.ttests {
                t.quantity = format!("{}@g={}", t.quantity, fmt_float(g));
            }
        }
        combined.rows.extend(result.rows);
        combined.ttests.extend(result.ttests);
    }

    ensure_dir(&a.out)?;
    std::fs::write(a.out.join("study.csv"), combined.rows_csv())?;
    std::fs::write(a.out.join("ttests.csv"), combined.ttests_csv())?;
    Ok(())
}

fn cmd_regress(a: RegressArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let seed = cfg.seed(a.seed)?;
    let table = PopulationTable::read_csv(&a.population)?;
    let features = FeatureSet::parse(&a.features)?;
    let target = RegressionTarget::parse(&a.target)?;
    let n_boot = cfg.usize_or("n_boot", a.n_boot, 1000)?;

    let study = regression_study(&table, features, target, n_boot, seed)?;
    ensure_dir(&a.out)?;

    let mut coef = String::from("feature,coef,p_value\n");
    coef.push_str(&format!(
        "intercept,{},\n",
        fmt_float(ctxlab::scalar::to_f64(study.summary.full_fit.intercept))
    ));
    for (i, name) in study.feature_names.iter().enumerate() {
        coef.push_str(&format!(
            "{name},{},{}\n",
            fmt_float(study.summary.full_fit.coefficients[i]),
            fmt_float(study.summary.full_fit.p_values[i])
        ));
    }
    std::fs::write(a.out.join("coefficients.csv"), coef)?;

    let mut summary = String::from("feature_set,mean_r2,std_r2,n_boot\n");
    summary.push_str(&format!(
        "{},{},{},{}\n",
        features.as_str(),
        fmt_float(study.summary.mean_r2_test),
        fmt_float(study.summary.std_r2_test),
        study.summary.n_boot
    ));
    std::fs::write(a.out.join("summary.csv"), summary)?;
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let table = PopulationTable::read_csv(&a.population)?;
    let n_bins = cfg.usize_or("n_bins", a.n_bins, 8)?;
    ensure_dir(&a.out)?;

    let (r, p, scatter) = tradeoff_study(&table)?;
    plots::write_tradeoff_scatter(&a.out.join("tradeoff_scatter.dat"), &scatter, r, p)?;

    let xs: Vec<f64> = table
        .rows
        .iter()
        .map(|row| metric_column(row, "fbps_kl_out"))
        .collect::<Result<_>>()?;
    let ys: Vec<f64> = table.rows.iter().map(|row| row.avg_ood()).collect();
    let bins = binned_curve(&xs, &ys, n_bins)?;
    plots::write_fbps_curve(&a.out.join("fbps_curve.dat"), &bins)?;

    let curve = mixing_curve(&table)?;
    plots::write_mixing_curve(&a.out.join("mixing_curve.dat"), &curve)?;

    let boost_points = match &a.boost_study {
        Some(path) => plots::boost_curve_points(&read_study_rows(path)?),
        None => Vec::new(),
    };
    plots::write_boost_curve(&a.out.join("boost_curve.dat"), &boost_points)?;
    Ok(())
}
