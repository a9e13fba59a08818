//! Population-level orchestration: the environment-grid training sweep,
//! the augmentation mixing-weight sweep, the OOD1-vs-OOD2 tradeoff study,
//! bootstrap regressions predicting OOD accuracy from metrics, and binned
//! summary curves.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{CtxError, Result};
use crate::metrics::{full_report, MetricConfig, MetricReport, CSV_HEADER};
use crate::mlp::{train, TrainConfig};
use crate::numerics::random::mix;
use crate::numerics::{ols_bootstrap, pearson, BootstrapSummary, Matrix};
use crate::scalar::Scalar;
use crate::synthenv::{generate, make_ood1, make_ood2, EnvironmentSpec};

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Grid and objective axes of one training sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub p_co_grid: Vec<f64>,
    pub sigma_eps_grid: Vec<f64>,
    /// Objective points `(alpha1, alpha2)`; `alpha0` is fixed at 1.
    pub alphas: Vec<(f64, f64)>,
    pub seeds_per_cell: usize,
    pub master_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub metric: MetricConfig,
}

impl SweepConfig {
    /// The 14x14 ERM grid: one plain-cross-entropy model per environment.
    pub fn erm_default(master_seed: u64) -> Self {
        SweepConfig {
            p_co_grid: linspace(0.5, 0.98, 14),
            sigma_eps_grid: linspace(0.6, 1.6, 14),
            alphas: vec![(0.0, 0.0)],
            seeds_per_cell: 1,
            master_seed,
            n_train: 1000,
            n_test: 1000,
            epochs: 750,
            metric: MetricConfig::new(0),
        }
    }

    /// The mixing-weight sweep at one environment: alpha1 from 0 to 1 in
    /// steps of 0.1 with alpha1 + alpha2 = 1, 10 seeds each.
    pub fn augmentation_default(master_seed: u64) -> Self {
        SweepConfig {
            p_co_grid: vec![0.9],
            sigma_eps_grid: vec![1.0],
            alphas: (0..=10)
                .map(|i| {
                    let a1 = i as f64 / 10.0;
                    (a1, 1.0 - a1)
                })
                .collect(),
            seeds_per_cell: 10,
            master_seed,
            n_train: 1000,
            n_test: 1000,
            epochs: 750,
            metric: MetricConfig::new(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_co_grid.is_empty() || self.sigma_eps_grid.is_empty() || self.alphas.is_empty() {
            return Err(CtxError::InvalidSpec("empty sweep axis".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(CtxError::InvalidSpec("seeds_per_cell must be positive".into()));
        }
        if let Some(&p) = self.p_co_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(CtxError::InvalidSpec(format!("grid p_co {p} outside [0,1]")));
        }
        if let Some(&s) = self.sigma_eps_grid.iter().find(|s| **s < 0.0) {
            return Err(CtxError::InvalidSpec(format!("grid sigma_eps {s} negative")));
        }
        if let Some(&(a1, a2)) = self.alphas.iter().find(|(a1, a2)| *a1 < 0.0 || *a2 < 0.0) {
            return Err(CtxError::InvalidSpec(format!(
                "negative objective weights ({a1}, {a2})"
            )));
        }
        if self.n_train == 0 || self.n_test == 0 || self.epochs == 0 {
            return Err(CtxError::InvalidSpec(
                "n_train, n_test, epochs must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn n_models(&self) -> usize {
        self.p_co_grid.len() * self.sigma_eps_grid.len() * self.alphas.len() * self.seeds_per_cell
    }
}

/// One metric row per trained model; failures kept separately.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PopulationTable {
    pub rows: Vec<MetricReport>,
    /// `(model_id, diagnostic)` for cells whose training failed.
    pub failures: Vec<(String, String)>,
}

impl PopulationTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (id, msg) in &self.failures {
            out.push_str(&format!("# failed {id}: {}\n", msg.replace('\n', " ")));
        }
        for row in &self.rows {
            out.push_str(&row.to_csv_row());
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<PopulationTable> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CtxError::Parse("empty population file".into()))?;
        if header != CSV_HEADER {
            return Err(CtxError::Parse(format!("unexpected population header {header:?}")));
        }
        let mut table = PopulationTable::default();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# failed ") {
                let (id, msg) = rest.split_once(": ").unwrap_or((rest, ""));
                table.failures.push((id.to_string(), msg.to_string()));
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            table.rows.push(MetricReport::from_csv_row(line)?);
        }
        Ok(table)
    }
}

/// Train and score every model in the sweep. Deterministic given
/// `master_seed`; cells run in parallel with independent derived seeds.
pub fn run_sweep<S: Scalar>(cfg: &SweepConfig) -> Result<PopulationTable> {
    cfg.validate()?;
    struct Cell {
        id: String,
        p_co: f64,
        sigma_eps: f64,
        alpha1: f64,
        alpha2: f64,
        seed_base: u64,
    }
    let mut cells = Vec::with_capacity(cfg.n_models());
    for (pi, &p_co) in cfg.p_co_grid.iter().enumerate() {
        for (si, &sigma_eps) in cfg.sigma_eps_grid.iter().enumerate() {
            for (ai, &(alpha1, alpha2)) in cfg.alphas.iter().enumerate() {
                for ki in 0..cfg.seeds_per_cell {
                    cells.push(Cell {
                        id: format!("m_{pi:02}_{si:02}_{ai:02}_{ki:02}"),
                        p_co,
                        sigma_eps,
                        alpha1,
                        alpha2,
                        seed_base: mix(
                            cfg.master_seed,
                            &[pi as u64, si as u64, ai as u64, ki as u64],
                        ),
                    });
                }
            }
        }
    }

    let outcomes: Vec<std::result::Result<MetricReport, (String, String)>> = cells
        .par_iter()
        .map(|cell| {
            run_cell::<S>(cfg, cell.id.clone(), cell.p_co, cell.sigma_eps, cell.alpha1,
                cell.alpha2, cell.seed_base)
                .map_err(|e| (cell.id.clone(), format!("{e}")))
        })
        .collect();

    let mut table = PopulationTable::default();
    for outcome in outcomes {
        match outcome {
            Ok(row) => table.rows.push(row),
            Err(failure) => table.failures.push(failure),
        }
    }
    Ok(table)
}

fn run_cell<S: Scalar>(
    cfg: &SweepConfig,
    id: String,
    p_co: f64,
    sigma_eps: f64,
    alpha1: f64,
    alpha2: f64,
    seed_base: u64,
) -> Result<MetricReport> {
    let spec = EnvironmentSpec::new(p_co, sigma_eps, cfg.n_train, mix(seed_base, &[0]));
    let train_ds = generate::<S>(&spec)?;
    let mut tcfg = TrainConfig::augmented(alpha1, alpha2, mix(seed_base, &[1]));
    tcfg.epochs = cfg.epochs;
    let model = train(&train_ds, &tcfg)?;

    let id_test = generate::<S>(&EnvironmentSpec {
        n_samples: cfg.n_test,
        seed: mix(seed_base, &[2]),
        ..spec.clone()
    })?;
    let ood1 = generate::<S>(&EnvironmentSpec {
        n_samples: cfg.n_test,
        seed: mix(seed_base, &[3]),
        ..make_ood1(&spec)
    })?;
    let ood2 = generate::<S>(&EnvironmentSpec {
        n_samples: cfg.n_test,
        seed: mix(seed_base, &[4]),
        ..make_ood2(&spec)
    })?;

    let mcfg = MetricConfig {
        seed: mix(seed_base, &[5]),
        ..cfg.metric
    };
    full_report(&model, &id, &spec, &id_test, &ood1, &ood2, alpha1, alpha2, &mcfg)
}

/// Pearson correlation of OOD1 vs OOD2 accuracy across the population,
/// plus the raw scatter points.
pub fn tradeoff_study(table: &PopulationTable) -> Result<(f64, f64, Vec<(f64, f64)>)> {
    if table.rows.len() < 10 {
        return Err(CtxError::InvalidSpec(format!(
            "tradeoff study needs >= 10 rows, got {}",
            table.rows.len()
        )));
    }
    let ood1: Vec<f64> = table.rows.iter().map(|r| r.ood1_acc).collect();
    let ood2: Vec<f64> = table.rows.iter().map(|r| r.ood2_acc).collect();
    let (r, p) = pearson(&ood1, &ood2)?;
    let scatter = ood1.into_iter().zip(ood2).collect();
    Ok((r, p, scatter))
}

/// Regressor subsets mirroring the nested rows of the regression table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    IdOnly,
    IdObj,
    IdObjFactor,
    IdObjFtwgt,
    All,
}

impl FeatureSet {
    pub const ALL_SETS: [FeatureSet; 5] = [
        FeatureSet::IdOnly,
        FeatureSet::IdObj,
        FeatureSet::IdObjFactor,
        FeatureSet::IdObjFtwgt,
        FeatureSet::All,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::IdOnly => "id_only",
            FeatureSet::IdObj => "id_obj",
            FeatureSet::IdObjFactor => "id_obj_factor",
            FeatureSet::IdObjFtwgt => "id_obj_ftwgt",
            FeatureSet::All => "all",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "id_only" => Ok(FeatureSet::IdOnly),
            "id_obj" => Ok(FeatureSet::IdObj),
            "id_obj_factor" => Ok(FeatureSet::IdObjFactor),
            "id_obj_ftwgt" => Ok(FeatureSet::IdObjFtwgt),
            "all" => Ok(FeatureSet::All),
            _ => Err(CtxError::InvalidSpec(format!(
                "unknown feature set {s:?} (expected id_only|id_obj|id_obj_factor|id_obj_ftwgt|all)"
            ))),
        }
    }

    /// Ordered feature names; the objective is encoded as the continuous
    /// pair (alpha1, alpha2).
    pub fn feature_names(self) -> Vec<&'static str> {
        let mut names = vec!["id_acc"];
        if self != FeatureSet::IdOnly {
            names.push("alpha1");
            names.push("alpha2");
        }
        let factor = [
            "probe_1", "probe_2", "probe_3", "rsa_1", "rsa_2", "rsa_3", "geom_1", "geom_2",
            "geom_3",
        ];
        let ftwgt = ["fbps_l2_1", "fbps_l2_2", "fbps_l2_3", "fbps_kl_out"];
        match self {
            FeatureSet::IdOnly | FeatureSet::IdObj => {}
            FeatureSet::IdObjFactor => names.extend(factor),
            FeatureSet::IdObjFtwgt => names.extend(ftwgt),
            FeatureSet::All => {
                names.extend(factor);
                names.extend(ftwgt);
            }
        }
        names
    }
}

/// Regression targets; `avg_ood` is the headline quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionTarget {
    AvgOod,
    Ood1,
    Ood2,
}

impl RegressionTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            RegressionTarget::AvgOod => "avg_ood",
            RegressionTarget::Ood1 => "ood1_acc",
            RegressionTarget::Ood2 => "ood2_acc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "avg_ood" => Ok(RegressionTarget::AvgOod),
            "ood1_acc" | "ood1" => Ok(RegressionTarget::Ood1),
            "ood2_acc" | "ood2" => Ok(RegressionTarget::Ood2),
            _ => Err(CtxError::InvalidSpec(format!(
                "unknown regression target {s:?} (expected avg_ood|ood1|ood2)"
            ))),
        }
    }
}

/// Column lookup by the names used in the population CSV header.
pub fn metric_column(row: &MetricReport, name: &str) -> Result<f64> {
    let v = match name {
        "p_co" => row.p_co,
        "sigma_eps" => row.sigma_eps,
        "alpha1" => row.alpha1,
        "alpha2" => row.alpha2,
        "id_acc" => row.id_acc,
        "ood1_acc" => row.ood1_acc,
        "ood2_acc" => row.ood2_acc,
        "avg_ood" => row.avg_ood(),
        "probe_1" => row.probe[0],
        "probe_2" => row.probe[1],
        "probe_3" => row.probe[2],
        "rsa_1" => row.rsa[0],
        "rsa_2" => row.rsa[1],
        "rsa_3" => row.rsa[2],
        "geom_1" => row.geom[0],
        "geom_2" => row.geom[1],
        "geom_3" => row.geom[2],
        "fbps_l2_1" => row.fbps_l2[0],
        "fbps_l2_2" => row.fbps_l2[1],
        "fbps_l2_3" => row.fbps_l2[2],
        "fbps_kl_out" => row.fbps_kl_out,
        _ => return Err(CtxError::InvalidSpec(format!("unknown column {name:?}"))),
    };
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct RegressionStudy {
    pub feature_set: FeatureSet,
    pub target: RegressionTarget,
    pub feature_names: Vec<&'static str>,
    pub summary: BootstrapSummary<f64>,
}

/// Bootstrap OLS of the chosen target on the chosen feature subset with
/// 80/20 train/test splits.
pub fn regression_study(
    table: &PopulationTable,
    feature_set: FeatureSet,
    target: RegressionTarget,
    n_boot: usize,
    seed: u64,
) -> Result<RegressionStudy> {
    let names = feature_set.feature_names();
    if table.rows.len() <= names.len() + 1 {
        return Err(CtxError::InvalidSpec(format!(
            "{} rows cannot support {} features",
            table.rows.len(),
            names.len()
        )));
    }
    let mut x = Matrix::<f64>::zeros(table.rows.len(), names.len());
    let mut y = Vec::with_capacity(table.rows.len());
    for (r, row) in table.rows.iter().enumerate() {
        for (c, name) in names.iter().enumerate() {
            x.set(r, c, metric_column(row, name)?);
        }
        y.push(metric_column(row, target.as_str())?);
    }
    let summary = ols_bootstrap(&x, &y, n_boot, 0.8, seed)?;
    Ok(RegressionStudy {
        feature_set,
        target,
        feature_names: names,
        summary,
    })
}

/// One bin of a binned summary curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub x_center: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Equal-width binning of `ys` over the range of `xs`; empty bins are
/// `None` (gaps).
pub fn binned_curve(xs: &[f64], ys: &[f64], n_bins: usize) -> Result<Vec<Option<Bin>>> {
    if n_bins < 2 {
        return Err(CtxError::InvalidSpec(format!("n_bins must be >= 2, got {n_bins}")));
    }
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(CtxError::DimMismatch("binned_curve needs equal nonempty x/y".into()));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (&x, &y) in xs.iter().zip(ys) {
        let i = if width > 0.0 {
            (((x - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        buckets[i].push(y);
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(i, values)| {
            if values.is_empty() {
                return None;
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = if values.len() > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Some(Bin {
                x_center: lo + width * (i as f64 + 0.5),
                mean,
                std,
                count: values.len(),
            })
        })
        .collect())
}

/// Mixing-weight curve from an augmentation sweep: per alpha1 value, mean
/// OOD1 and OOD2 accuracy over seeds, sorted by alpha1.
pub fn mixing_curve(table: &PopulationTable) -> Result<Vec<(f64, f64, f64)>> {
    if table.rows.is_empty() {
        return Err(CtxError::InvalidSpec("empty population".into()));
    }
    let mut groups: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for row in &table.rows {
        match groups.iter_mut().find(|(a, _, _)| (*a - row.alpha1).abs() < 1e-12) {
            Some((_, o1, o2)) => {
                o1.push(row.ood1_acc);
                o2.push(row.ood2_acc);
            }
            None => groups.push((row.alpha1, vec![row.ood1_acc], vec![row.ood2_acc])),
        }
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite alpha1"));
    Ok(groups
        .into_iter()
        .map(|(a, o1, o2)| {
            let m1 = o1.iter().sum::<f64>() / o1.len() as f64;
            let m2 = o2.iter().sum::<f64>() / o2.len() as f64;
            (a, m1, m2)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank_row(id: &str) -> MetricReport {
        MetricReport {
            model_id: id.to_string(),
            p_co: 0.9,
            sigma_eps: 1.0,
            alpha1: 0.0,
            alpha2: 0.0,
            id_acc: 0.9,
            ood1_acc: 0.5,
            ood2_acc: 0.5,
            probe: [0.0; 3],
            rsa: [0.0; 3],
            geom: [0.0; 3],
            fbps_l2: [0.0; 3],
            fbps_kl_out: 0.0,
            degenerate: Vec::new(),
        }
    }

    #[test]
    fn linspace_covers_endpoints() {
        let g = linspace(0.5, 0.98, 14);
        assert_eq!(g.len(), 14);
        assert!((g[0] - 0.5).abs() < 1e-15);
        assert!((g[13] - 0.98).abs() < 1e-15);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn default_sweeps_have_expected_sizes() {
        let erm = SweepConfig::erm_default(1);
        assert_eq!(erm.n_models(), 196);
        erm.validate().unwrap();
        let aug = SweepConfig::augmentation_default(1);
        assert_eq!(aug.n_models(), 110);
        assert_eq!(aug.alphas.len(), 11);
        assert!(aug
            .alphas
            .iter()
            .all(|(a1, a2)| (a1 + a2 - 1.0).abs() < 1e-12));
        aug.validate().unwrap();
    }

    fn tiny_sweep(master_seed: u64) -> SweepConfig {
        let mut metric = MetricConfig::new(0);
        metric.n_anchor = 20;
        metric.n_perturb = 10;
        metric.fbps_samples = 200;
        SweepConfig {
            p_co_grid: vec![0.7, 0.95],
            sigma_eps_grid: vec![0.8, 1.4],
            alphas: vec![(0.0, 0.0)],
            seeds_per_cell: 1,
            master_seed,
            n_train: 200,
            n_test: 200,
            epochs: 30,
            metric,
        }
    }

    #[test]
    fn tiny_sweep_is_deterministic() {
        let cfg = tiny_sweep(17);
        let a = run_sweep::<f64>(&cfg).unwrap();
        let b = run_sweep::<f64>(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 4);
        assert!(a.failures.is_empty());
        let mut ids: Vec<&str> = a.rows.iter().map(|r| r.model_id.as_str()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 4);
        for row in &a.rows {
            assert!((row.avg_ood() - (row.ood1_acc + row.ood2_acc) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn population_csv_roundtrip_with_failures() {
        let dir = tempfile::tempdir().unwrap();
        let mut table = PopulationTable::default();
        table.rows.push(blank_row("a"));
        table.rows.push(blank_row("b"));
        table.failures.push(("c".into(), "diverged".into()));
        let path = dir.path().join("pop.csv");
        table.write_csv(&path).unwrap();
        let back = PopulationTable::read_csv(&path).unwrap();
        assert_eq!(back.rows.len(), 2);
        assert_eq!(back.failures, vec![("c".to_string(), "diverged".to_string())]);
    }

    #[test]
    fn tradeoff_handles_anticorrelated_and_degenerate_tables() {
        let mut table = PopulationTable::default();
        for i in 0..10 {
            let mut row = blank_row(&format!("r{i}"));
            row.ood1_acc = 0.5 + 0.04 * i as f64;
            row.ood2_acc = 0.9 - 0.04 * i as f64;
            table.rows.push(row);
        }
        let (r, p, scatter) = tradeoff_study(&table).unwrap();
        assert!((r + 1.0).abs() < 1e-12, "r {r}");
        assert!(p < 1e-6);
        assert_eq!(scatter.len(), 10);

        let constant = PopulationTable {
            rows: (0..10).map(|i| blank_row(&format!("c{i}"))).collect(),
            failures: Vec::new(),
        };
        assert!(matches!(
            tradeoff_study(&constant),
            Err(CtxError::Degenerate(_))
        ));
        let small = PopulationTable {
            rows: vec![blank_row("x")],
            failures: Vec::new(),
        };
        assert!(tradeoff_study(&small).is_err());
    }

    #[test]
    fn regression_recovers_exact_linear_target() {
        let mut table = PopulationTable::default();
        for i in 0..30 {
            let mut row = blank_row(&format!("r{i}"));
            row.id_acc = 0.5 + 0.01 * i as f64;
            // avg_ood exactly linear in id_acc.
            let target = 0.2 + 0.8 * row.id_acc;
            row.ood1_acc = target;
            row.ood2_acc = target;
            table.rows.push(row);
        }
        let study = regression_study(&table, FeatureSet::IdOnly, RegressionTarget::AvgOod, 50, 3)
            .unwrap();
        assert!((study.summary.mean_r2_test - 1.0).abs() < 1e-9);
        assert!((study.summary.full_fit.coefficients[0] - 0.8).abs() < 1e-9);
        assert_eq!(study.feature_names, vec!["id_acc"]);

        assert_eq!(FeatureSet::All.feature_names().len(), 16);
        assert_eq!(FeatureSet::IdObjFactor.feature_names().len(), 12);
        assert_eq!(FeatureSet::IdObjFtwgt.feature_names().len(), 7);
    }

    #[test]
    fn binned_curve_basics() {
        // Constant y.
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let ys = vec![2.5; 40];
        let bins = binned_curve(&xs, &ys, 4).unwrap();
        for bin in bins.iter().flatten() {
            assert_eq!(bin.mean, 2.5);
            assert_eq!(bin.std, 0.0);
        }

        // Monotone y = x.
        let bins = binned_curve(&xs, &xs, 4).unwrap();
        let means: Vec<f64> = bins.iter().flatten().map(|b| b.mean).collect();
        assert!(means.windows(2).all(|w| w[0] < w[1]));

        // Gap in the middle.
        let xs = vec![0.0, 0.1, 3.9, 4.0];
        let ys = vec![1.0, 1.0, 2.0, 2.0];
        let bins = binned_curve(&xs, &ys, 4).unwrap();
        assert!(bins[0].is_some());
        assert!(bins[1].is_none());
        assert!(bins[2].is_none());
        assert!(bins[3].is_some());

        assert!(binned_curve(&xs, &ys, 1).is_err());
    }

    #[test]
    fn mixing_curve_groups_by_alpha1() {
        let mut table = PopulationTable::default();
        for (a1, o1) in [(0.0, 0.4), (0.0, 0.6), (0.5, 0.7), (1.0, 0.9)] {
            let mut row = blank_row("x");
            row.alpha1 = a1;
            row.ood1_acc = o1;
            row.ood2_acc = 1.0 - o1;
            table.rows.push(row);
        }
        let curve = mixing_curve(&table).unwrap();
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[0].0, 0.0);
        assert!((curve[0].1 - 0.5).abs() < 1e-12);
        assert!((curve[2].2 - 0.1).abs() < 1e-12);
    }
}
