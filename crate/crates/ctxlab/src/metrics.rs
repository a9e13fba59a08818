//! The four interpretability metrics: linear-probe factorization, RSA
//! against a reference RDM, geometric factorization, and the
//! foreground/background perturbation score (FBPS). Together with ID/OOD
//! accuracies they form the 13 regressors collected in a [`MetricReport`].

use rand::Rng;

use crate::error::{CtxError, Result};
use crate::mlp::{forward, MlpModel, RepresentationSet};
use crate::numerics::random::{mix, rng_from_seed, shuffled_indices};
use crate::numerics::{kfold_cv_accuracy, pca, pearson, top_k_for_variance, Matrix};
use crate::scalar::{cast, to_f64, Scalar};
use crate::synthenv::{make_block_only, Block, Dataset, EnvironmentSpec};
use crate::textio::{fmt_float, parse_float};

/// The three hidden layers metrics are computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    H1,
    H2,
    H3,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::H1, Layer::H2, Layer::H3];

    pub fn index(self) -> usize {
        match self {
            Layer::H1 => 1,
            Layer::H2 => 2,
            Layer::H3 => 3,
        }
    }

    pub fn from_index(i: usize) -> Result<Layer> {
        match i {
            1 => Ok(Layer::H1),
            2 => Ok(Layer::H2),
            3 => Ok(Layer::H3),
            _ => Err(CtxError::InvalidSpec(format!("layer index {i} not in 1..=3"))),
        }
    }
}

/// Where FBPS measures representation change: a hidden layer (L2
/// distance) or the task-head output (KL divergence).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbpsTarget {
    Hidden(Layer),
    Output,
}

pub fn layer_activations<S: Scalar>(reps: &RepresentationSet<S>, layer: Layer) -> &Matrix<S> {
    match layer {
        Layer::H1 => &reps.h1,
        Layer::H2 => &reps.h2,
        Layer::H3 => &reps.h3,
    }
}

/// Knobs shared by all metrics; defaults are the documented desk-scale
/// settings (the source analysis uses 1000x100 anchors and 10k-scale
/// perturbation sets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub n_anchor: usize,
    pub n_perturb: usize,
    pub fbps_samples: usize,
    /// RSA subsample cap per (block, class) group.
    pub rsa_cap: usize,
    pub probe_l2: f64,
    pub seed: u64,
}

impl MetricConfig {
    pub fn new(seed: u64) -> Self {
        MetricConfig {
            n_anchor: 200,
            n_perturb: 50,
            fbps_samples: 5000,
            rsa_cap: 200,
            probe_l2: 1e-2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_anchor < 10 || self.n_perturb < 10 {
            return Err(CtxError::InvalidSpec(
                "geometric factorization needs n_anchor >= 10 and n_perturb >= 10".into(),
            ));
        }
        if self.fbps_samples < 100 {
            return Err(CtxError::InvalidSpec("fbps needs at least 100 samples".into()));
        }
        if self.rsa_cap < 2 {
            return Err(CtxError::InvalidSpec("rsa_cap must be >= 2".into()));
        }
        if self.probe_l2 < 0.0 {
            return Err(CtxError::InvalidSpec("probe_l2 must be nonnegative".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Linear probe
// ---------------------------------------------------------------------------

/// 5-fold CV accuracy of a multinomial probe on raw representation rows.
/// Degenerate (constant) representations score chance level with a flag
/// instead of erroring.
pub fn probe_core<S: Scalar>(
    x: &Matrix<S>,
    labels: &[usize],
    n_classes: usize,
    l2: f64,
    seed: u64,
) -> Result<(f64, bool)> {
    if to_f64(x.summed_column_variance()) < 1e-12 {
        return Ok((1.0 / n_classes as f64, true));
    }
    let acc = kfold_cv_accuracy(x, labels, n_classes, 5, cast::<S>(l2), seed)?;
    Ok((acc, false))
}

fn vstack<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    debug_assert_eq!(a.cols(), b.cols());
    let mut out = Matrix::zeros(a.rows() + b.rows(), a.cols());
    for r in 0..a.rows() {
        out.row_mut(r).copy_from_slice(a.row(r));
    }
    for r in 0..b.rows() {
        out.row_mut(a.rows() + r).copy_from_slice(b.row(r));
    }
    out
}

/// Block-only probing inputs: causal-only and spurious-only variants of
/// `ds`, stacked, with the 4-way probe labels.
fn block_only_pair<S: Scalar>(
    m: &MlpModel<S>,
    ds: &Dataset<S>,
) -> Result<(RepresentationSet<S>, RepresentationSet<S>, Vec<usize>)> {
    let causal_only = make_block_only(ds, Block::Causal)?;
    let spurious_only = make_block_only(ds, Block::Spurious)?;
    let reps_c = forward(m, &causal_only.to_matrix())?;
    let reps_s = forward(m, &spurious_only.to_matrix())?;
    let mut labels = causal_only.labels();
    labels.extend(spurious_only.labels());
    Ok((reps_c, reps_s, labels))
}

/// 4-way probe accuracy at one hidden layer (2 causal + 2 spurious
/// classes over block-only inputs).
pub fn probe_factorization<S: Scalar>(
    m: &MlpModel<S>,
    ds: &Dataset<S>,
    layer: Layer,
    cfg: &MetricConfig,
) -> Result<(f64, bool)> {
    let (reps_c, reps_s, labels) = block_only_pair(m, ds)?;
    let x = vstack(layer_activations(&reps_c, layer), layer_activations(&reps_s, layer));
    probe_core(
        &x,
        &labels,
        4,
        cfg.probe_l2,
        mix(cfg.seed, &[1, layer.index() as u64]),
    )
}

// ---------------------------------------------------------------------------
// RSA
// ---------------------------------------------------------------------------

fn euclidean<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = to_f64(x) - to_f64(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Pearson r between the model RDM of `items` and the 0/1 reference RDM
/// induced by `groups`, over the strict upper triangle.
pub fn rsa_core<S: Scalar>(items: &Matrix<S>, groups: &[usize]) -> Result<f64> {
    let n = items.rows();
    if n != groups.len() {
        return Err(CtxError::DimMismatch(format!(
            "{n} items vs {} group labels",
            groups.len()
        )));
    }
    if n < 3 {
        return Err(CtxError::InvalidSpec("rsa needs at least 3 items".into()));
    }
    let mut model_rdm = Vec::with_capacity(n * (n - 1) / 2);
    let mut reference = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            model_rdm.push(euclidean(items.row(i), items.row(j)));
            reference.push(if groups[i] == groups[j] { 0.0 } else { 1.0 });
        }
    }
    pearson(&model_rdm, &reference).map(|(r, _)| r)
}

/// RSA factorization at one hidden layer over block-only inputs,
/// deterministically subsampled to at most `rsa_cap` items per
/// (block, class) group.
pub fn rsa_factorization<S: Scalar>(
    m: &MlpModel<S>,
    ds: &Dataset<S>,
    layer: Layer,
    cfg: &MetricConfig,
) -> Result<f64> {
    let (reps_c, reps_s, labels) = block_only_pair(m, ds)?;
    let stacked = vstack(layer_activations(&reps_c, layer), layer_activations(&reps_s, layer));
    let (items, groups) = rsa_subsample(&stacked, &labels, cfg.rsa_cap, mix(cfg.seed, &[2]));
    rsa_core(&items, &groups)
}

fn rsa_subsample<S: Scalar>(
    stacked: &Matrix<S>,
    labels: &[usize],
    cap: usize,
    seed: u64,
) -> (Matrix<S>, Vec<usize>) {
    let n_groups = labels.iter().max().map_or(0, |&m| m + 1);
    let mut chosen = Vec::new();
    for g in 0..n_groups {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == g).collect();
        if members.len() <= cap {
            chosen.extend(members);
        } else {
            let mut rng = rng_from_seed(mix(seed, &[g as u64]));
            let order = shuffled_indices(members.len(), &mut rng);
            chosen.extend(order[..cap].iter().map(|&k| members[k]));
        }
    }
    let mut items = Matrix::zeros(chosen.len(), stacked.cols());
    let mut groups = Vec::with_capacity(chosen.len());
    for (r, &i) in chosen.iter().enumerate() {
        items.row_mut(r).copy_from_slice(stacked.row(i));
        groups.push(labels[i]);
    }
    (items, groups)
}

// ---------------------------------------------------------------------------
// Geometric factorization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct GeomValue {
    /// `1 - var_fg|bg / var_fg`.
    pub value: f64,
    /// Set when the background PCA was degenerate and the subspace fell
    /// back to a single axis.
    pub warned: bool,
}

/// Anchor means and the mean within-anchor covariance (flattened d×d) of
/// per-anchor representation matrices.
fn anchor_means_and_cov<S: Scalar>(anchor_reps: &[Matrix<S>]) -> Result<(Matrix<S>, Vec<f64>)> {
    let n_anchor = anchor_reps.len();
    if n_anchor < 2 {
        return Err(CtxError::InvalidSpec("need at least 2 anchors".into()));
    }
    let d = anchor_reps[0].cols();
    let mut anchor_means = Matrix::<S>::zeros(n_anchor, d);
    let mut cov = vec![0.0f64; d * d];
    for (a, reps) in anchor_reps.iter().enumerate() {
        if reps.cols() != d || reps.rows() < 2 {
            return Err(CtxError::DimMismatch("ragged anchor representations".into()));
        }
        let mean = reps.column_means();
        anchor_means.row_mut(a).copy_from_slice(&mean);
        let denom = (reps.rows() - 1) as f64;
        for row in reps.iter_rows() {
            for i in 0..d {
                let di = to_f64(row[i]) - to_f64(mean[i]);
                for j in i..d {
                    let dj = to_f64(row[j]) - to_f64(mean[j]);
                    cov[i * d + j] += di * dj / denom / n_anchor as f64;
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[i * d + j] = cov[j * d + i];
        }
    }
    Ok((anchor_means, cov))
}

/// Background subspace for the statistic: the 99%-variance PCs of the
/// per-anchor mean representations.
pub fn geom_background_subspace<S: Scalar>(
    anchor_reps: &[Matrix<S>],
) -> Result<crate::numerics::TopKComponents<S>> {
    let (anchor_means, _) = anchor_means_and_cov(anchor_reps)?;
    let bg_pca = pca(&anchor_means)?;
    top_k_for_variance(&bg_pca, cast::<S>(0.99))
}

/// The statistic against an externally supplied background subspace
/// (orthonormal rows): used by intervention studies that hold the
/// subspace fixed while the representations are transformed.
pub fn geom_against_subspace<S: Scalar>(
    anchor_reps: &[Matrix<S>],
    u_bg: &Matrix<S>,
) -> Result<GeomValue> {
    let (_, cov) = anchor_means_and_cov(anchor_reps)?;
    let d = anchor_reps[0].cols();
    if u_bg.cols() != d {
        return Err(CtxError::DimMismatch(format!(
            "subspace dim {} vs representation dim {d}",
            u_bg.cols()
        )));
    }
    let var_fg: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    if var_fg < 1e-12 {
        return Err(CtxError::Degenerate(
            "no foreground-induced representation variance".into(),
        ));
    }
    let mut var_fg_bg = 0.0;
    for axis in u_bg.iter_rows() {
        // u' C u for each subspace axis.
        for i in 0..d {
            for j in 0..d {
                var_fg_bg += to_f64(axis[i]) * cov[i * d + j] * to_f64(axis[j]);
            }
        }
    }
    Ok(GeomValue {
        value: 1.0 - var_fg_bg / var_fg,
        warned: false,
    })
}

/// Core statistic from per-anchor representation matrices (one matrix of
/// foreground perturbations per background anchor): var_fg is the mean
/// summed per-dimension variance within anchors; the background subspace
/// is the 99%-variance PCA of anchor means; var_fg|bg is the same
/// variance after projecting onto that subspace.
pub fn geom_from_anchor_data<S: Scalar>(anchor_reps: &[Matrix<S>]) -> Result<GeomValue> {
    let u_bg = geom_background_subspace(anchor_reps)?;
    let mut out = geom_against_subspace(anchor_reps, &u_bg.components)?;
    out.warned = u_bg.warned;
    Ok(out)
}

/// Generate anchor inputs from the environment spec and map them to
/// per-anchor representation matrices: each anchor fixes one background
/// (a spurious feature draw; the irrelevant block sits at its neutral
/// mean) and pairs it with `n_perturb` class-balanced foreground vectors.
/// Foregrounds carry only the base feature noise (no extra corruption),
/// and classes alternate per row, so anchor means differ through the
/// background draw alone and the 99%-variance subspace below stays a
/// background subspace.
pub fn geom_anchor_reps<S, F>(
    spec: &EnvironmentSpec,
    n_anchor: usize,
    n_perturb: usize,
    seed: u64,
    rep_fn: F,
) -> Result<Vec<Matrix<S>>>
where
    S: Scalar,
    F: Fn(&Matrix<S>) -> Result<Matrix<S>>,
{
    if n_anchor < 10 || n_perturb < 10 {
        return Err(CtxError::InvalidSpec(
            "geometric factorization needs n_anchor >= 10 and n_perturb >= 10".into(),
        ));
    }
    let clean = EnvironmentSpec {
        sigma_eps: 0.0,
        ..spec.clone()
    };
    let layout = clean.layout();
    let dim = clean.total_dim();
    let fill = cast::<S>(clean.mu_n);
    let mut rng = rng_from_seed(seed);
    let mut anchor_reps = Vec::with_capacity(n_anchor);
    for _ in 0..n_anchor {
        let mut base = vec![fill; dim];
        let z_s = usize::from(rng.random::<f64>() < 0.5);
        clean.fill_spurious(z_s, &mut rng, &mut base[layout.spurious.clone()]);
        let mut x = Matrix::zeros(n_perturb, dim);
        for r in 0..n_perturb {
            let row = x.row_mut(r);
            row.copy_from_slice(&base);
            clean.fill_causal(r % 2, &mut rng, &mut row[layout.causal.clone()]);
        }
        anchor_reps.push(rep_fn(&x)?);
    }
    Ok(anchor_reps)
}

/// Generate anchors and score an arbitrary representation map.
pub fn geometric_factorization_with<S, F>(
    spec: &EnvironmentSpec,
    n_anchor: usize,
    n_perturb: usize,
    seed: u64,
    rep_fn: F,
) -> Result<GeomValue>
where
    S: Scalar,
    F: Fn(&Matrix<S>) -> Result<Matrix<S>>,
{
    geom_from_anchor_data(&geom_anchor_reps(spec, n_anchor, n_perturb, seed, rep_fn)?)
}

/// Geometric factorization of one hidden layer of the model.
pub fn geometric_factorization<S: Scalar>(
    m: &MlpModel<S>,
    spec: &EnvironmentSpec,
    layer: Layer,
    cfg: &MetricConfig,
) -> Result<GeomValue> {
    geometric_factorization_with(spec, cfg.n_anchor, cfg.n_perturb, mix(cfg.seed, &[3]), |x| {
        forward(m, x).map(|reps| layer_activations(&reps, layer).clone())
    })
}

// ---------------------------------------------------------------------------
// FBPS
// ---------------------------------------------------------------------------

/// Base inputs with independent uniform classes plus single-factor flips:
/// `(x, x with causal block resampled from the opposite class, x with
/// spurious block resampled from the opposite class)`.
pub fn fbps_inputs<S: Scalar>(
    spec: &EnvironmentSpec,
    n_samples: usize,
    seed: u64,
) -> Result<(Matrix<S>, Matrix<S>, Matrix<S>)> {
    if n_samples < 100 {
        return Err(CtxError::InvalidSpec("fbps needs at least 100 samples".into()));
    }
    let layout = spec.layout();
    let dim = spec.total_dim();
    let mut rng = rng_from_seed(seed);
    let mut x = Matrix::<S>::zeros(n_samples, dim);
    let mut x_fg = Matrix::<S>::zeros(n_samples, dim);
    let mut x_bg = Matrix::<S>::zeros(n_samples, dim);
    for r in 0..n_samples {
        let z_c = usize::from(rng.random::<f64>() < 0.5);
        let z_s = usize::from(rng.random::<f64>() < 0.5);
        let row = x.row_mut(r);
        spec.fill_irrelevant(&mut rng, &mut row[layout.irrelevant.clone()]);
        spec.fill_causal(z_c, &mut rng, &mut row[layout.causal.clone()]);
        spec.fill_spurious(z_s, &mut rng, &mut row[layout.spurious.clone()]);
        let base = row.to_vec();
        let fg_row = x_fg.row_mut(r);
        fg_row.copy_from_slice(&base);
        spec.fill_causal(1 - z_c, &mut rng, &mut fg_row[layout.causal.clone()]);
        let bg_row = x_bg.row_mut(r);
        bg_row.copy_from_slice(&base);
        spec.fill_spurious(1 - z_s, &mut rng, &mut bg_row[layout.spurious.clone()]);
    }
    Ok((x, x_fg, x_bg))
}

/// Mean row-wise L2 distance between two equal-shaped matrices.
pub fn mean_l2_rowwise<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(CtxError::DimMismatch("mean_l2_rowwise shapes differ".into()));
    }
    let total: f64 = (0..a.rows()).map(|r| euclidean(a.row(r), b.row(r))).sum();
    Ok(total / a.rows() as f64)
}

/// Mean row-wise KL(p || q) between two probability matrices, with
/// probabilities floored at 1e-12.
pub fn mean_kl_rowwise<S: Scalar>(p: &Matrix<S>, q: &Matrix<S>) -> Result<f64> {
    if p.rows() != q.rows() || p.cols() != q.cols() {
        return Err(CtxError::DimMismatch("mean_kl_rowwise shapes differ".into()));
    }
    let mut total = 0.0;
    for r in 0..p.rows() {
        for (&pi, &qi) in p.row(r).iter().zip(q.row(r)) {
            let pi = to_f64(pi).max(1e-12);
            let qi = to_f64(qi).max(1e-12);
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total / p.rows() as f64)
}

fn fbps_distance<S: Scalar>(
    base: &RepresentationSet<S>,
    flipped: &RepresentationSet<S>,
    target: FbpsTarget,
) -> Result<f64> {
    match target {
        FbpsTarget::Hidden(layer) => {
            mean_l2_rowwise(layer_activations(base, layer), layer_activations(flipped, layer))
        }
        FbpsTarget::Output => mean_kl_rowwise(&base.task_probs, &flipped.task_probs),
    }
}

/// FBPS = delta_fg - delta_bg: mean representation change under a
/// foreground flip minus the change under a background flip.
pub fn fbps<S: Scalar>(
    m: &MlpModel<S>,
    spec: &EnvironmentSpec,
    target: FbpsTarget,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let (x, x_fg, x_bg) = fbps_inputs::<S>(spec, n_samples, seed)?;
    let base = forward(m, &x)?;
    let fg = forward(m, &x_fg)?;
    let bg = forward(m, &x_bg)?;
    Ok(fbps_distance(&base, &fg, target)? - fbps_distance(&base, &bg, target)?)
}

/// All four FBPS values (three hidden layers + output) from one shared
/// input draw.
pub fn fbps_all<S: Scalar>(
    m: &MlpModel<S>,
    spec: &EnvironmentSpec,
    n_samples: usize,
    seed: u64,
) -> Result<([f64; 3], f64)> {
    let (x, x_fg, x_bg) = fbps_inputs::<S>(spec, n_samples, seed)?;
    let base = forward(m, &x)?;
    let fg = forward(m, &x_fg)?;
    let bg = forward(m, &x_bg)?;
    let mut hidden = [0.0; 3];
    for (i, layer) in Layer::ALL.into_iter().enumerate() {
        let t = FbpsTarget::Hidden(layer);
        hidden[i] = fbps_distance(&base, &fg, t)? - fbps_distance(&base, &bg, t)?;
    }
    let t = FbpsTarget::Output;
    let out = fbps_distance(&base, &fg, t)? - fbps_distance(&base, &bg, t)?;
    Ok((hidden, out))
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

/// All 13 metric regressors plus accuracies and objective descriptors for
/// one trained model; one CSV row in the population table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub model_id: String,
    pub p_co: f64,
    pub sigma_eps: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub id_acc: f64,
    pub ood1_acc: f64,
    pub ood2_acc: f64,
    pub probe: [f64; 3],
    pub rsa: [f64; 3],
    pub geom: [f64; 3],
    pub fbps_l2: [f64; 3],
    pub fbps_kl_out: f64,
    /// Names of metrics that hit a degenerate case and were recorded as
    /// 0.0 / chance level instead of aborting the report.
    pub degenerate: Vec<String>,
}

pub const CSV_HEADER: &str = "model_id,p_co,sigma_eps,alpha1,alpha2,id_acc,ood1_acc,ood2_acc,\
probe_1,probe_2,probe_3,rsa_1,rsa_2,rsa_3,geom_1,geom_2,geom_3,\
fbps_l2_1,fbps_l2_2,fbps_l2_3,fbps_kl_out";

impl MetricReport {
    pub fn avg_ood(&self) -> f64 {
        (self.ood1_acc + self.ood2_acc) / 2.0
    }

    /// The 13 regressors in header order.
    pub fn metric_values(&self) -> [f64; 13] {
        [
            self.probe[0],
            self.probe[1],
            self.probe[2],
            self.rsa[0],
            self.rsa[1],
            self.rsa[2],
            self.geom[0],
            self.geom[1],
            self.geom[2],
            self.fbps_l2[0],
            self.fbps_l2[1],
            self.fbps_l2[2],
            self.fbps_kl_out,
        ]
    }

    pub fn to_csv_row(&self) -> String {
        let mut fields = vec![self.model_id.clone()];
        for v in [self.p_co, self.sigma_eps, self.alpha1, self.alpha2, self.id_acc,
            self.ood1_acc, self.ood2_acc]
        {
            fields.push(fmt_float(v));
        }
        for v in self.metric_values() {
            fields.push(fmt_float(v));
        }
        fields.join(",")
    }

    pub fn from_csv_row(line: &str) -> Result<MetricReport> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 21 {
            return Err(CtxError::Parse(format!(
                "metric row has {} fields, expected 21",
                fields.len()
            )));
        }
        let f = |i: usize| parse_float(fields[i]);
        Ok(MetricReport {
            model_id: fields[0].to_string(),
            p_co: f(1)?,
            sigma_eps: f(2)?,
            alpha1: f(3)?,
            alpha2: f(4)?,
            id_acc: f(5)?,
            ood1_acc: f(6)?,
            ood2_acc: f(7)?,
            probe: [f(8)?, f(9)?, f(10)?],
            rsa: [f(11)?, f(12)?, f(13)?],
            geom: [f(14)?, f(15)?, f(16)?],
            fbps_l2: [f(17)?, f(18)?, f(19)?],
            fbps_kl_out: f(20)?,
            degenerate: Vec::new(),
        })
    }
}

/// Compute every metric for one trained model. Per-metric degeneracies
/// are recorded in `degenerate` (with the value set to 0.0 or chance)
/// rather than aborting; other errors propagate.
#[allow(clippy::too_many_arguments)]
pub fn full_report<S: Scalar>(
    m: &MlpModel<S>,
    model_id: &str,
    spec: &EnvironmentSpec,
    id_test: &Dataset<S>,
    ood1_test: &Dataset<S>,
    ood2_test: &Dataset<S>,
    alpha1: f64,
    alpha2: f64,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    let mut degenerate = Vec::new();

    let id_acc = crate::mlp::evaluate(m, id_test)?;
    let ood1_acc = crate::mlp::evaluate(m, ood1_test)?;
    let ood2_acc = crate::mlp::evaluate(m, ood2_test)?;

    // Shared block-only forward passes for probe and RSA.
    let (reps_c, reps_s, labels) = block_only_pair(m, id_test)?;
    let mut probe = [0.0; 3];
    let mut rsa = [0.0; 3];
    let mut geom = [0.0; 3];
    for (i, layer) in Layer::ALL.into_iter().enumerate() {
        let li = layer.index() as u64;
        let stacked = vstack(layer_activations(&reps_c, layer), layer_activations(&reps_s, layer));

        let (acc, flagged) =
            probe_core(&stacked, &labels, 4, cfg.probe_l2, mix(cfg.seed, &[1, li]))?;
        probe[i] = acc;
        if flagged {
            degenerate.push(format!("probe_{li}"));
        }

        let (items, groups) = rsa_subsample(&stacked, &labels, cfg.rsa_cap, mix(cfg.seed, &[2]));
        match rsa_core(&items, &groups) {
            Ok(r) => rsa[i] = r,
            Err(CtxError::Degenerate(_)) => {
                rsa[i] = 0.0;
                degenerate.push(format!("rsa_{li}"));
            }
            Err(e) => return Err(e),
        }

        match geometric_factorization(m, spec, layer, cfg) {
            Ok(g) => {
                geom[i] = g.value;
                if g.warned {
                    degenerate.push(format!("geom_{li}_bg_subspace"));
                }
            }
            Err(CtxError::Degenerate(_)) => {
                geom[i] = 0.0;
                degenerate.push(format!("geom_{li}"));
            }
            Err(e) => return Err(e),
        }
    }

    let (fbps_l2, fbps_kl_out) = fbps_all(m, spec, cfg.fbps_samples, mix(cfg.seed, &[4]))?;

    Ok(MetricReport {
        model_id: model_id.to_string(),
        p_co: spec.p_co,
        sigma_eps: spec.sigma_eps,
        alpha1,
        alpha2,
        id_acc,
        ood1_acc,
        ood2_acc,
        probe,
        rsa,
        geom,
        fbps_l2,
        fbps_kl_out,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{init, train, TrainConfig};
    use crate::numerics::random::standard_normal;
    use crate::synthenv::generate;

    // -- probe ------------------------------------------------------------

    #[test]
    fn probe_perfect_on_square_corners() {
        // Four classes at the corners of a square: linearly separable.
        let corners = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for rep in 0..40 {
            for (c, corner) in corners.iter().enumerate() {
                let jitter = 0.01 * (rep as f64 / 40.0 - 0.5);
                rows.push(vec![corner[0] + jitter, corner[1] - jitter]);
                labels.push(c);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let (acc, flagged) = probe_core(&x, &labels, 4, 1e-2, 0).unwrap();
        assert!(!flagged);
        assert!((acc - 1.0).abs() < 1e-12, "acc {acc}");
    }

    #[test]
    fn probe_chance_on_shuffled_labels() {
        let mut rng = rng_from_seed(3);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| (0..5).map(|_| standard_normal(&mut rng)).collect())
            .collect();
        let labels: Vec<usize> = (0..2000).map(|_| rng.random_range(0..4)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let (acc, flagged) = probe_core(&x, &labels, 4, 1e-2, 1).unwrap();
        assert!(!flagged);
        assert!((acc - 0.25).abs() < 0.04, "acc {acc}");
    }

    #[test]
    fn probe_degenerate_representations_score_chance_with_flag() {
        let x = Matrix::from_rows(&vec![vec![0.7, 0.7]; 40]).unwrap();
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let (acc, flagged) = probe_core(&x, &labels, 4, 1e-2, 0).unwrap();
        assert!(flagged);
        assert_eq!(acc, 0.25);
    }

    // -- rsa ---------------------------------------------------------------

    #[test]
    fn rsa_is_one_on_reference_proportional_rdm() {
        // Two tight clusters: model RDM is exactly proportional to the
        // 0/1 reference, so Pearson r = 1 by affine invariance.
        let items = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![3.0, 4.0],
            vec![3.0, 4.0],
        ])
        .unwrap();
        let r = rsa_core(&items, &[0, 0, 1, 1]).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "r {r}");
    }

    #[test]
    fn rsa_four_items_match_hand_computation() {
        let items = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![3.0, 4.0],
        ])
        .unwrap();
        let r = rsa_core(&items, &[0, 0, 1, 1]).unwrap();

        // Hand-computed distances for the 6 pairs in (0,1),(0,2),(0,3),
        // (1,2),(1,3),(2,3) order, then a literal Pearson evaluation.
        let d = [1.0, 2.0, 5.0, 5.0f64.sqrt(), 20.0f64.sqrt(), 13.0f64.sqrt()];
        let g = [0.0, 1.0, 1.0, 1.0, 1.0, 0.0];
        let n = 6.0;
        let md = d.iter().sum::<f64>() / n;
        let mg = g.iter().sum::<f64>() / n;
        let cov: f64 = d.iter().zip(&g).map(|(a, b)| (a - md) * (b - mg)).sum();
        let vd: f64 = d.iter().map(|a| (a - md) * (a - md)).sum();
        let vg: f64 = g.iter().map(|b| (b - mg) * (b - mg)).sum();
        let expected = cov / (vd.sqrt() * vg.sqrt());
        assert!((r - expected).abs() < 1e-12, "r {r} vs {expected}");
    }

    #[test]
    fn rsa_invariant_to_global_translation() {
        let mut rng = rng_from_seed(8);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| standard_normal(&mut rng)).collect())
            .collect();
        let groups: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let items = Matrix::from_rows(&rows).unwrap();
        let shifted_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r[0] + 5.0, r[1] - 2.0, r[2] + 0.25])
            .collect();
        let shifted = Matrix::from_rows(&shifted_rows).unwrap();
        let a = rsa_core(&items, &groups).unwrap();
        let b = rsa_core(&shifted, &groups).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rsa_degenerate_rdm_errors() {
        let items = Matrix::from_rows(&vec![vec![1.0, 1.0]; 4]).unwrap();
        assert!(matches!(
            rsa_core(&items, &[0, 0, 1, 1]),
            Err(CtxError::Degenerate(_))
        ));
    }

    // -- geometric factorization -------------------------------------------

    /// Anchors with means in span(e1,e2) and perturbations along `axis`,
    /// arranged so the perturbations average to exactly zero per anchor.
    fn synthetic_anchors(axis: usize, n_anchor: usize, n_perturb: usize) -> Vec<Matrix<f64>> {
        let mut rng = rng_from_seed(11);
        (0..n_anchor)
            .map(|_| {
                let m1 = standard_normal(&mut rng);
                let m2 = standard_normal(&mut rng);
                let mut reps = Matrix::zeros(n_perturb, 3);
                for r in 0..n_perturb {
                    let t = if r % 2 == 0 { 1.0 } else { -1.0 };
                    let row = reps.row_mut(r);
                    row[0] = m1;
                    row[1] = m2;
                    row[axis] += t * (1.0 + 0.1 * (r as f64));
                }
                reps
            })
            .collect()
    }

    #[test]
    fn geom_is_one_when_perturbations_orthogonal_to_bg_subspace() {
        let anchors = synthetic_anchors(2, 40, 20);
        let g = geom_from_anchor_data(&anchors).unwrap();
        assert!(!g.warned);
        assert!((g.value - 1.0).abs() < 1e-6, "value {}", g.value);
    }

    #[test]
    fn geom_is_zero_when_perturbations_inside_bg_subspace() {
        let anchors = synthetic_anchors(0, 40, 20);
        let g = geom_from_anchor_data(&anchors).unwrap();
        assert!(g.value.abs() < 1e-6, "value {}", g.value);
    }

    #[test]
    fn geom_matches_brute_force_covariance_projection() {
        // Random 3-D anchors; compare against a direct recomputation of
        // both variance statistics with an explicitly projected dataset.
        let mut rng = rng_from_seed(21);
        let anchors: Vec<Matrix<f64>> = (0..30)
            .map(|_| {
                let rows: Vec<Vec<f64>> = (0..15)
                    .map(|_| (0..3).map(|_| standard_normal(&mut rng)).collect())
                    .collect();
                Matrix::from_rows(&rows).unwrap()
            })
            .collect();
        let g = geom_from_anchor_data(&anchors).unwrap();

        let means: Vec<Vec<f64>> = anchors.iter().map(|a| a.column_means()).collect();
        let u_bg = top_k_for_variance(&pca(&Matrix::from_rows(&means).unwrap()).unwrap(), 0.99)
            .unwrap()
            .components;
        let variance_stat = |project: bool| -> f64 {
            anchors
                .iter()
                .map(|a| {
                    let data: Matrix<f64> = if project {
                        a.matmul_transpose(&u_bg).unwrap()
                    } else {
                        a.clone()
                    };
                    data.summed_column_variance()
                })
                .sum::<f64>()
                / anchors.len() as f64
        };
        let expected = 1.0 - variance_stat(true) / variance_stat(false);
        assert!((g.value - expected).abs() < 1e-10, "{} vs {expected}", g.value);
    }

    #[test]
    fn geom_invariant_under_joint_orthogonal_transform() {
        let anchors = synthetic_anchors(2, 30, 16);
        // Givens rotation mixing axes 0 and 2.
        let (c, s) = (0.6, 0.8);
        let rotated: Vec<Matrix<f64>> = anchors
            .iter()
            .map(|a| {
                let rows: Vec<Vec<f64>> = a
                    .iter_rows()
                    .map(|r| vec![c * r[0] - s * r[2], r[1], s * r[0] + c * r[2]])
                    .collect();
                Matrix::from_rows(&rows).unwrap()
            })
            .collect();
        let g0 = geom_from_anchor_data(&anchors).unwrap();
        let g1 = geom_from_anchor_data(&rotated).unwrap();
        assert!((g0.value - g1.value).abs() < 1e-6);
    }

    #[test]
    fn geom_degenerate_without_foreground_variance() {
        let anchors: Vec<Matrix<f64>> = (0..12)
            .map(|a| Matrix::from_rows(&vec![vec![a as f64, 1.0]; 12]).unwrap())
            .collect();
        assert!(matches!(
            geom_from_anchor_data(&anchors),
            Err(CtxError::Degenerate(_))
        ));
    }

    // -- fbps ---------------------------------------------------------------

    /// Model whose first hidden unit is the mean of the causal block; all
    /// other paths zero except an identity-like pass-through of h1_0.
    fn causal_mean_model(spec: &EnvironmentSpec) -> crate::mlp::MlpModel<f64> {
        let mut m = init::<f64>(0, spec.total_dim()).unwrap();
        for slice in m.param_slices_mut() {
            slice.fill(0.0);
        }
        let causal = spec.layout().causal;
        let k = causal.len() as f64;
        for i in causal {
            m.w1.set(0, i, 1.0 / k);
        }
        m.w2.set(0, 0, 1.0);
        m.w3.set(0, 0, 1.0);
        m
    }

    #[test]
    fn fbps_ignoring_background_gives_nonnegative_score() {
        let mut spec = EnvironmentSpec::new(0.9, 0.0, 1000, 2);
        spec.sigma_eps = 0.0;
        let m = causal_mean_model(&spec);
        let (x, _x_fg, x_bg) = fbps_inputs::<f64>(&spec, 1000, 5).unwrap();
        let base = forward(&m, &x).unwrap();
        let bg = forward(&m, &x_bg).unwrap();
        // Background flips do not move the representation at all.
        let delta_bg = mean_l2_rowwise(&base.h1, &bg.h1).unwrap();
        assert_eq!(delta_bg, 0.0);
        let score = fbps(&m, &spec, FbpsTarget::Hidden(Layer::H1), 1000, 5).unwrap();
        assert!(score >= 0.0);
    }

    #[test]
    fn fbps_matches_analytic_flip_distance() {
        // Flipping the causal class moves the block mean by 0.6; the
        // sampling noise around it is symmetric and small, so the mean
        // absolute change of the causal-mean unit is approximately 0.6.
        let spec = EnvironmentSpec::new(0.5, 0.0, 1000, 3);
        let m = causal_mean_model(&spec);
        let score = fbps(&m, &spec, FbpsTarget::Hidden(Layer::H1), 5000, 7).unwrap();
        assert!((score - 0.6).abs() < 0.01, "score {score}");
    }

    #[test]
    fn fbps_symmetric_model_scores_near_zero() {
        // Equal weighting of the causal and spurious blocks with matching
        // generative parameters makes both flip distances identically
        // distributed.
        let spec = EnvironmentSpec::new(0.5, 0.0, 1000, 4);
        let mut m = init::<f64>(0, spec.total_dim()).unwrap();
        for slice in m.param_slices_mut() {
            slice.fill(0.0);
        }
        let layout = spec.layout();
        for i in layout.causal.clone().chain(layout.spurious.clone()) {
            m.w1.set(0, i, 0.1);
        }
        m.w2.set(0, 0, 1.0);
        m.w3.set(0, 0, 1.0);
        let score = fbps(&m, &spec, FbpsTarget::Hidden(Layer::H3), 5000, 8).unwrap();
        assert!(score.abs() < 0.02, "score {score}");
    }

    #[test]
    fn fbps_flips_sign_when_blocks_swap_roles() {
        let spec = EnvironmentSpec::new(0.5, 0.0, 1000, 9);
        let m_causal = causal_mean_model(&spec);
        let mut m_spurious = m_causal.clone();
        let layout = spec.layout();
        for (ci, si) in layout.causal.clone().zip(layout.spurious.clone()) {
            let v = m_causal.w1.get(0, ci);
            m_spurious.w1.set(0, ci, 0.0);
            m_spurious.w1.set(0, si, v);
        }
        let a = fbps(&m_causal, &spec, FbpsTarget::Hidden(Layer::H1), 5000, 10).unwrap();
        let b = fbps(&m_spurious, &spec, FbpsTarget::Hidden(Layer::H1), 5000, 10).unwrap();
        assert!(a > 0.5);
        assert!((a + b).abs() < 0.02, "a {a}, b {b}");
    }

    // -- full report ---------------------------------------------------------

    #[test]
    fn full_report_is_complete_and_deterministic() {
        let spec = EnvironmentSpec::new(0.9, 0.8, 300, 13);
        let train_ds = generate::<f64>(&spec).unwrap();
        let mut tcfg = TrainConfig::erm(13);
        tcfg.epochs = 40;
        let model = train(&train_ds, &tcfg).unwrap();

        let id_test = generate::<f64>(&EnvironmentSpec { seed: 14, ..spec.clone() }).unwrap();
        let ood1 = generate::<f64>(&crate::synthenv::make_ood1(&EnvironmentSpec {
            seed: 15,
            ..spec.clone()
        }))
        .unwrap();
        let ood2 = generate::<f64>(&crate::synthenv::make_ood2(&EnvironmentSpec {
            seed: 16,
            ..spec.clone()
        }))
        .unwrap();

        let mut mcfg = MetricConfig::new(99);
        mcfg.n_anchor = 40;
        mcfg.n_perturb = 20;
        mcfg.fbps_samples = 500;
        let a = full_report(&model, "m0", &spec, &id_test, &ood1, &ood2, 0.0, 0.0, &mcfg).unwrap();
        let b = full_report(&model, "m0", &spec, &id_test, &ood1, &ood2, 0.0, 0.0, &mcfg).unwrap();
        assert_eq!(a, b);

        assert_eq!(a.metric_values().len(), 13);
        assert!(a.metric_values().iter().all(|v| v.is_finite()));
        assert!((a.avg_ood() - (a.ood1_acc + a.ood2_acc) / 2.0).abs() < 1e-15);

        // CSV row round-trip (degeneracy notes are not serialized).
        let row = a.to_csv_row();
        assert_eq!(CSV_HEADER.split(',').count(), row.split(',').count());
        let parsed = MetricReport::from_csv_row(&row).unwrap();
        assert_eq!(parsed.model_id, a.model_id);
        assert_eq!(parsed.probe, a.probe);
        assert_eq!(parsed.fbps_kl_out, a.fbps_kl_out);
    }

    #[test]
    fn layer_index_mapping() {
        assert_eq!(Layer::from_index(2).unwrap(), Layer::H2);
        assert!(Layer::from_index(0).is_err());
        assert!(Layer::from_index(4).is_err());
        assert_eq!(Layer::H3.index(), 3);
    }
}
