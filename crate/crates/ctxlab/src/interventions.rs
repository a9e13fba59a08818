//! Causal manipulations of final-hidden-layer representations: a rotation
//! that destroys factorization by mapping inter-class directions onto
//! intra-class directions, and a subspace boost that re-weights features
//! before retraining an L2-regularized head (with a uniform-scaling
//! control).

use rand::Rng;

use crate::error::{CtxError, Result};
use crate::metrics::{geom_against_subspace, geom_anchor_reps, geom_background_subspace, geom_from_anchor_data};
use crate::mlp::{forward, MlpModel};
use crate::numerics::logistic::argmax;
use crate::numerics::random::{mix, rng_from_seed};
use crate::numerics::{kfold_cv_accuracy, logistic_fit, paired_ttest, pca, Matrix, PcaResult};
use crate::scalar::{cast, Scalar};
use crate::synthenv::{generate, make_ood1, make_ood2, Block, EnvironmentSpec};
use crate::textio::fmt_float;

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

/// Change-of-basis plan pairing inter-class PCs with intra-class PCs.
#[derive(Debug, Clone)]
pub struct RotationPlan<S: Scalar> {
    pub u_inter: Matrix<S>,
    pub u_intra: Matrix<S>,
    /// Number of paired PCs.
    pub n_pairs: usize,
    /// Full-dimension orthogonal map: performs the paired rotation on the
    /// spanned subspace and identity on its orthogonal complement.
    pub transform: Matrix<S>,
    /// The literal low-rank product `(u_intra[:k])^T * u_inter[:k]`, kept
    /// for exact replication behind a flag.
    pub transform_raw: Matrix<S>,
}

/// Orthonormalize `candidates` rows by modified Gram-Schmidt, dropping
/// near-dependent vectors.
fn gram_schmidt<S: Scalar>(candidates: &[Vec<S>], dim: usize) -> Matrix<S> {
    let tol = cast::<S>(1e-10);
    let mut basis: Vec<Vec<S>> = Vec::new();
    for cand in candidates {
        let mut v = cand.clone();
        for b in &basis {
            let proj = crate::numerics::matrix::dot(&v, b);
            for (vi, &bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let norm = crate::numerics::matrix::dot(&v, &v).sqrt();
        if norm > tol {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
        }
        if basis.len() == dim {
            break;
        }
    }
    Matrix::from_rows(&basis).expect("gram_schmidt rows share one dimension")
}

/// Complete `rows` (orthonormal, in an m-dimensional space) to a full
/// orthonormal basis using canonical axes as extra candidates.
fn complete_basis<S: Scalar>(rows: &Matrix<S>, m: usize) -> Matrix<S> {
    let mut candidates: Vec<Vec<S>> = rows.iter_rows().map(|r| r.to_vec()).collect();
    for i in 0..m {
        let mut e = vec![S::zero(); m];
        e[i] = S::one();
        candidates.push(e);
    }
    gram_schmidt(&candidates, m)
}

/// Build the rotation plan from representations and their causal classes.
/// Inter-class PCs come from the class-center matrix, intra-class PCs
/// from center-subtracted representations; PC `j` of the former is paired
/// with PC `j` of the latter.
pub fn build_rotation<S: Scalar>(reps: &Matrix<S>, class_of: &[usize]) -> Result<RotationPlan<S>> {
    if reps.rows() != class_of.len() {
        return Err(CtxError::DimMismatch(format!(
            "{} representations vs {} class labels",
            reps.rows(),
            class_of.len()
        )));
    }
    let n_classes = class_of.iter().max().map_or(0, |&m| m + 1);
    if n_classes < 2 {
        return Err(CtxError::InvalidSpec("rotation needs at least 2 classes".into()));
    }
    let d = reps.cols();
    let mut counts = vec![0usize; n_classes];
    for &c in class_of {
        counts[c] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(CtxError::InvalidSpec(format!(
            "class {c} has fewer than 2 samples"
        )));
    }

    let mut centers = Matrix::<S>::zeros(n_classes, d);
    for (row, &c) in reps.iter_rows().zip(class_of) {
        for (acc, &v) in centers.row_mut(c).iter_mut().zip(row) {
            *acc += v;
        }
    }
    for c in 0..n_classes {
        let n = cast::<S>(counts[c] as f64);
        for v in centers.row_mut(c) {
            *v /= n;
        }
    }

    let mut centered = reps.clone();
    for (r, &c) in class_of.iter().enumerate() {
        let center = centers.row(c).to_vec();
        for (v, m) in centered.row_mut(r).iter_mut().zip(center) {
            *v -= m;
        }
    }

    let inter = pca(&centers)?;
    if inter.degenerate {
        return Err(CtxError::Degenerate("class centers coincide".into()));
    }
    let intra = pca(&centered)?;
    if intra.degenerate {
        return Err(CtxError::Degenerate("no intra-class variance".into()));
    }
    let k = inter.components.rows().min(n_classes);
    if intra.components.rows() < k {
        return Err(CtxError::Degenerate(format!(
            "only {} intra-class PCs for {k} pairings",
            intra.components.rows()
        )));
    }

    let (transform, raw) = assemble_transforms(&inter.components, &intra.components, k, d)?;
    Ok(RotationPlan {
        u_inter: inter.components,
        u_intra: intra.components,
        n_pairs: k,
        transform,
        transform_raw: raw,
    })
}

/// Build the extended orthogonal and raw low-rank maps for a given pairing
/// of inter- and intra-class PCs.
fn assemble_transforms<S: Scalar>(
    inter: &Matrix<S>,
    intra: &Matrix<S>,
    k: usize,
    d: usize,
) -> Result<(Matrix<S>, Matrix<S>)> {
    // Raw low-rank map: sum_j outer(a_j, b_j) with a = intra, b = inter.
    let mut raw = Matrix::<S>::zeros(d, d);
    for j in 0..k {
        let a = intra.row(j);
        let b = inter.row(j);
        for r in 0..d {
            for c in 0..d {
                let add = a[r] * b[c];
                raw.set(r, c, raw.get(r, c) + add);
            }
        }
    }

    // Extended orthogonal map: rotate within span(a_1..a_k, b_1..b_k),
    // identity on the complement.
    let mut span_candidates: Vec<Vec<S>> = Vec::new();
    for j in 0..k {
        span_candidates.push(inter.row(j).to_vec());
    }
    for j in 0..k {
        span_candidates.push(intra.row(j).to_vec());
    }
    let q = gram_schmidt(&span_candidates, d);
    let m = q.rows();
    // Subspace coordinates of the paired vectors.
    let coords = |vecs: &Matrix<S>| -> Matrix<S> {
        let mut out = Matrix::zeros(k, m);
        for j in 0..k {
            for i in 0..m {
                out.set(j, i, crate::numerics::matrix::dot(vecs.row(j), q.row(i)));
            }
        }
        out
    };
    let b_q = complete_basis(&coords(inter), m);
    let a_q = complete_basis(&coords(intra), m);
    // R maps b_j -> a_j inside the subspace: R = A^T B with orthonormal
    // row bases A, B.
    let r_sub = a_q.transpose().matmul(&b_q)?;
    // U = Q^T R Q + (I - Q^T Q).
    let qt_r = q.transpose().matmul(&r_sub)?;
    let mut transform = qt_r.matmul(&q)?;
    let qtq = q.transpose().matmul(&q)?;
    for i in 0..d {
        for j in 0..d {
            let identity = if i == j { S::one() } else { S::zero() };
            transform.set(i, j, transform.get(i, j) + identity - qtq.get(i, j));
        }
    }
    Ok((transform, raw))
}

/// Rebuild the plan with the sign of intra-class PC `j` flipped. PCA axis
/// signs are arbitrary; studies orient them so the swap does not also
/// negate the signal it moves into the readout direction.
pub fn flip_intra_sign<S: Scalar>(plan: &RotationPlan<S>, j: usize) -> Result<RotationPlan<S>> {
    if j >= plan.n_pairs {
        return Err(CtxError::InvalidSpec(format!(
            "pair index {j} out of range ({} pairs)",
            plan.n_pairs
        )));
    }
    let mut intra = plan.u_intra.clone();
    for v in intra.row_mut(j) {
        *v = -*v;
    }
    let d = intra.cols();
    let (transform, raw) = assemble_transforms(&plan.u_inter, &intra, plan.n_pairs, d)?;
    Ok(RotationPlan {
        u_inter: plan.u_inter.clone(),
        u_intra: intra,
        n_pairs: plan.n_pairs,
        transform,
        transform_raw: raw,
    })
}

/// `reps * transform^T` with the extended orthogonal map.
pub fn apply_rotation<S: Scalar>(plan: &RotationPlan<S>, reps: &Matrix<S>) -> Result<Matrix<S>> {
    reps.matmul_transpose(&plan.transform)
}

/// `reps * transform^T` with the literal low-rank map.
pub fn apply_rotation_raw<S: Scalar>(
    plan: &RotationPlan<S>,
    reps: &Matrix<S>,
) -> Result<Matrix<S>> {
    reps.matmul_transpose(&plan.transform_raw)
}

// ---------------------------------------------------------------------------
// Boost
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoostTarget {
    Foreground,
    Background,
}

/// Per-dimension importance weights for one factor's subspace, and the
/// boost factor applied to them.
#[derive(Debug, Clone)]
pub struct BoostPlan<S: Scalar> {
    /// Nonnegative, normalized to mean 1.
    pub importance: Vec<S>,
    pub g: f64,
    pub target: BoostTarget,
}

/// `e_i = sum_j |U[j,i]| * sqrt(r_j)`, normalized to mean 1.
pub fn importance_from_pca<S: Scalar>(p: &PcaResult<S>) -> Result<Vec<S>> {
    if p.degenerate {
        return Err(CtxError::Degenerate("boost PCA carries no variance".into()));
    }
    let d = p.components.cols();
    let mut e = vec![S::zero(); d];
    for (j, row) in p.components.iter_rows().enumerate() {
        let w = p.explained_ratio[j].sqrt();
        for (acc, &u) in e.iter_mut().zip(row) {
            *acc += u.abs() * w;
        }
    }
    let mean = e.iter().copied().sum::<S>() / cast::<S>(d as f64);
    if mean <= S::zero() {
        return Err(CtxError::Degenerate("importance vector is all zero".into()));
    }
    for v in e.iter_mut() {
        *v /= mean;
    }
    Ok(e)
}

/// PCA of per-class mean representations of the target factor.
pub fn build_boost<S: Scalar>(
    class_mean_reps: &Matrix<S>,
    target: BoostTarget,
    g: f64,
) -> Result<BoostPlan<S>> {
    if g <= 0.0 {
        return Err(CtxError::InvalidSpec(format!("boost factor must be positive, got {g}")));
    }
    let p = pca(class_mean_reps)?;
    let importance = importance_from_pca(&p)?;
    Ok(BoostPlan {
        importance,
        g,
        target,
    })
}

/// Elementwise `reps * e * g`.
pub fn apply_boost<S: Scalar>(plan: &BoostPlan<S>, reps: &Matrix<S>) -> Result<Matrix<S>> {
    if reps.cols() != plan.importance.len() {
        return Err(CtxError::DimMismatch(format!(
            "{} columns vs {} importance weights",
            reps.cols(),
            plan.importance.len()
        )));
    }
    let g = cast::<S>(plan.g);
    let mut out = reps.clone();
    for r in 0..out.rows() {
        for (v, &e) in out.row_mut(r).iter_mut().zip(&plan.importance) {
            *v *= e * g;
        }
    }
    Ok(out)
}

/// Uniform-scaling control `reps * g`.
pub fn apply_control<S: Scalar>(plan: &BoostPlan<S>, reps: &Matrix<S>) -> Result<Matrix<S>> {
    let g = cast::<S>(plan.g);
    let mut out = reps.clone();
    for v in out.data_mut() {
        *v *= g;
    }
    Ok(out)
}

/// 5-fold CV accuracies of retrained L2 heads on the boosted and control
/// representations.
pub fn apply_boost_and_retrain<S: Scalar>(
    plan: &BoostPlan<S>,
    reps: &Matrix<S>,
    labels: &[usize],
    n_classes: usize,
    l2: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let boosted = apply_boost(plan, reps)?;
    let control = apply_control(plan, reps)?;
    let acc_b = kfold_cv_accuracy(&boosted, labels, n_classes, 5, cast::<S>(l2), seed)?;
    let acc_c = kfold_cv_accuracy(&control, labels, n_classes, 5, cast::<S>(l2), seed)?;
    Ok((acc_b, acc_c))
}

// ---------------------------------------------------------------------------
// Study driver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterventionKind {
    Rotation,
    BoostFg,
    BoostBg,
}

impl InterventionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InterventionKind::Rotation => "rotation",
            InterventionKind::BoostFg => "boost_fg",
            InterventionKind::BoostBg => "boost_bg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(InterventionKind::Rotation),
            "boost_fg" => Ok(InterventionKind::BoostFg),
            "boost_bg" => Ok(InterventionKind::BoostBg),
            _ => Err(CtxError::InvalidSpec(format!(
                "unknown intervention {s:?} (expected rotation|boost_fg|boost_bg)"
            ))),
        }
    }
}

/// One trained model plus the environment it was trained in.
#[derive(Debug, Clone)]
pub struct StudyModel<S: Scalar> {
    pub id: String,
    pub model: MlpModel<S>,
    pub spec: EnvironmentSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub seed: u64,
    /// Samples per evaluation dataset.
    pub n_eval: usize,
    /// Samples used to estimate plan statistics (centers, subspaces).
    pub n_plan: usize,
    pub n_anchor: usize,
    pub n_perturb: usize,
    /// Regularization of retrained boost heads.
    pub head_l2: f64,
    /// Use the literal low-rank rotation formula instead of the extended
    /// orthogonal map.
    pub literal_rotation: bool,
}

impl StudyConfig {
    pub fn new(seed: u64) -> Self {
        StudyConfig {
            seed,
            // Intervention effects are a few accuracy points at most;
            // large evaluation sets keep them above evaluation noise.
            n_eval: 4000,
            n_plan: 500,
            n_anchor: 200,
            // Anchor means must resolve weak background responses, so the
            // background subspace does not absorb estimation noise.
            n_perturb: 600,
            // Small enough that the retrained heads stay usable at the
            // g = 1/64 overall scale, nonzero so reliance follows the
            // surviving coordinates' relative magnitudes.
            head_l2: 3e-3,
            literal_rotation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub model_id: String,
    pub intervention: String,
    pub g: f64,
    pub metric: String,
    pub pre: f64,
    pub post: f64,
}

impl StudyRow {
    pub fn delta(&self) -> f64 {
        self.post - self.pre
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtestRow {
    pub intervention: String,
    pub quantity: String,
    pub t: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub ttests: Vec<TtestRow>,
}

pub const STUDY_CSV_HEADER: &str = "model_id,intervention,g,metric,pre,post,delta";
pub const TTEST_CSV_HEADER: &str = "intervention,quantity,t,p,n";

impl StudyResult {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(STUDY_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.model_id,
                r.intervention,
                fmt_float(r.g),
                r.metric,
                fmt_float(r.pre),
                fmt_float(r.post),
                fmt_float(r.delta())
            ));
        }
        out
    }

    pub fn ttests_csv(&self) -> String {
        let mut out = String::from(TTEST_CSV_HEADER);
        out.push('\n');
        for r in &self.ttests {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.intervention,
                r.quantity,
                fmt_float(r.t),
                fmt_float(r.p),
                r.n
            ));
        }
        out
    }
}

/// Parse rows back from the study CSV (header `model_id,intervention,g,
/// metric,pre,post,delta`).
pub fn read_study_rows(path: &std::path::Path) -> Result<Vec<StudyRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CtxError::Parse("empty study file".into()))?;
    if header != STUDY_CSV_HEADER {
        return Err(CtxError::Parse(format!("unexpected study header {header:?}")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CtxError::Parse(format!(
                "study row has {} fields, expected 7",
                fields.len()
            )));
        }
        rows.push(StudyRow {
            model_id: fields[0].to_string(),
            intervention: fields[1].to_string(),
            g: crate::textio::parse_float(fields[2])?,
            metric: fields[3].to_string(),
            pre: crate::textio::parse_float(fields[4])?,
            post: crate::textio::parse_float(fields[5])?,
        });
    }
    Ok(rows)
}

/// Inputs with one factor's class balanced deterministically (row parity)
/// and the other sampled uniformly; returns the balanced factor's labels.
/// The irrelevant block sits at its neutral mean so plan statistics
/// isolate factor-induced variation.
fn balanced_inputs<S: Scalar>(
    spec: &EnvironmentSpec,
    n: usize,
    seed: u64,
    balanced: Block,
) -> Result<(Matrix<S>, Vec<usize>)> {
    spec.validate()?;
    let layout = spec.layout();
    let fill = cast::<S>(spec.mu_n);
    let mut rng = rng_from_seed(seed);
    let mut x = Matrix::<S>::zeros(n, spec.total_dim());
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let fixed = r % 2;
        let random = usize::from(rng.random::<f64>() < 0.5);
        let (z_c, z_s) = match balanced {
            Block::Causal => (fixed, random),
            Block::Spurious => (random, fixed),
        };
        let row = x.row_mut(r);
        for v in &mut row[layout.irrelevant.clone()] {
            *v = fill;
        }
        spec.fill_causal(z_c, &mut rng, &mut row[layout.causal.clone()]);
        spec.fill_spurious(z_s, &mut rng, &mut row[layout.spurious.clone()]);
        labels.push(fixed);
    }
    Ok((x, labels))
}

/// Accuracy of the model's own task head applied to (possibly
/// transformed) final-hidden-layer representations.
fn task_head_accuracy<S: Scalar>(m: &MlpModel<S>, h3: &Matrix<S>, labels: &[usize]) -> Result<f64> {
    let mut logits = h3.matmul_transpose(&m.task_w)?;
    let mut hits = 0usize;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row_mut(r);
        for (v, &b) in row.iter_mut().zip(&m.task_b) {
            *v += b;
        }
        if argmax(row) == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len().max(1) as f64)
}

fn rotation_rows<S: Scalar>(
    sm: &StudyModel<S>,
    idx: u64,
    cfg: &StudyConfig,
) -> Result<Vec<StudyRow>> {
    let m = &sm.model;
    // Plan statistics come from noise-free foregrounds paired with random
    // backgrounds, so intra-class PCs capture background (not foreground
    // noise) variability.
    let plan_spec = EnvironmentSpec {
        sigma_eps: 0.0,
        ..sm.spec.clone()
    };
    let (x_plan, labels) = balanced_inputs::<S>(
        &plan_spec,
        cfg.n_plan,
        mix(cfg.seed, &[idx, 0]),
        Block::Causal,
    )?;
    let mut plan = build_rotation(&forward(m, &x_plan)?.h3, &labels)?;

    // Orient the arbitrary intra-PC signs so that the swap preserves the
    // readout's in-distribution behavior as far as possible (the map
    // should destroy factorization, not flip the decision rule).
    let id_ds = generate::<S>(&EnvironmentSpec {
        n_samples: cfg.n_eval,
        seed: mix(cfg.seed, &[idx, 5]),
        ..sm.spec.clone()
    })?;
    let h3_id = forward(m, &id_ds.to_matrix())?.h3;
    let id_labels = id_ds.labels();
    let apply = |plan: &RotationPlan<S>, reps: &Matrix<S>| -> Result<Matrix<S>> {
        if cfg.literal_rotation {
            apply_rotation_raw(plan, reps)
        } else {
            apply_rotation(plan, reps)
        }
    };
    let mut best = task_head_accuracy(m, &apply(&plan, &h3_id)?, &id_labels)?;
    for j in 0..plan.n_pairs {
        let candidate = flip_intra_sign(&plan, j)?;
        let acc = task_head_accuracy(m, &apply(&candidate, &h3_id)?, &id_labels)?;
        if acc > best {
            best = acc;
            plan = candidate;
        }
    }
    let rotate = |reps: &Matrix<S>| -> Result<Matrix<S>> { apply(&plan, reps) };

    // The literal transform concentrates foreground-induced variation
    // along the paired intra-class directions, which re-enter the
    // re-estimated background subspace: factorization collapses. The
    // extended orthogonal map leaves the re-estimated statistic unchanged
    // by construction, so in that case the post value is measured against
    // the unrotated representations' (fixed) background subspace instead.
    let geom_seed = mix(cfg.seed, &[idx, 1]);
    let anchors = geom_anchor_reps(&sm.spec, cfg.n_anchor, cfg.n_perturb, geom_seed, |x| {
        forward(m, x).map(|r| r.h3)
    })?;
    let rotated: Vec<Matrix<S>> = anchors.iter().map(|a| rotate(a)).collect::<Result<_>>()?;
    let (pre_geom, post_geom) = if cfg.literal_rotation {
        (geom_from_anchor_data(&anchors)?, geom_from_anchor_data(&rotated)?)
    } else {
        let u_bg = geom_background_subspace(&anchors)?;
        (
            geom_against_subspace(&anchors, &u_bg.components)?,
            geom_against_subspace(&rotated, &u_bg.components)?,
        )
    };

    let mut rows = vec![StudyRow {
        model_id: sm.id.clone(),
        intervention: InterventionKind::Rotation.as_str().into(),
        g: 1.0,
        metric: "geom_3".into(),
        pre: pre_geom.value,
        post: post_geom.value,
    }];

    for (name, make) in [("ood1_acc", true), ("ood2_acc", false)] {
        let shifted = if make { make_ood1(&sm.spec) } else { make_ood2(&sm.spec) };
        let ds = generate::<S>(&EnvironmentSpec {
            n_samples: cfg.n_eval,
            seed: mix(cfg.seed, &[idx, if make { 2 } else { 3 }]),
            ..shifted
        })?;
        let h3 = forward(m, &ds.to_matrix())?.h3;
        let pre = task_head_accuracy(m, &h3, &ds.labels())?;
        let post = task_head_accuracy(m, &rotate(&h3)?, &ds.labels())?;
        rows.push(StudyRow {
            model_id: sm.id.clone(),
            intervention: InterventionKind::Rotation.as_str().into(),
            g: 1.0,
            metric: name.into(),
            pre,
            post,
        });
    }
    Ok(rows)
}

/// PCA of the per-class mean representations of one factor, estimated
/// from balanced plan inputs.
fn factor_mean_pca<S: Scalar>(
    m: &MlpModel<S>,
    spec: &EnvironmentSpec,
    n_plan: usize,
    seed: u64,
    block: Block,
) -> Result<PcaResult<S>> {
    let (x_plan, labels) = balanced_inputs::<S>(spec, n_plan, seed, block)?;
    let h3_plan = forward(m, &x_plan)?.h3;
    let mut means = Matrix::<S>::zeros(2, h3_plan.cols());
    let mut counts = [0usize; 2];
    for (row, &c) in h3_plan.iter_rows().zip(&labels) {
        counts[c] += 1;
        for (acc, &v) in means.row_mut(c).iter_mut().zip(row) {
            *acc += v;
        }
    }
    for c in 0..2 {
        let n = cast::<S>(counts[c].max(1) as f64);
        for v in means.row_mut(c) {
            *v /= n;
        }
    }
    pca(&means)
}

fn boost_rows<S: Scalar>(
    sm: &StudyModel<S>,
    idx: u64,
    which: InterventionKind,
    g: f64,
    cfg: &StudyConfig,
) -> Result<Vec<StudyRow>> {
    let m = &sm.model;
    // Plan statistics from clean foregrounds, as for the rotation.
    let plan_spec = EnvironmentSpec {
        sigma_eps: 0.0,
        ..sm.spec.clone()
    };
    let p_fg = factor_mean_pca(m, &plan_spec, cfg.n_plan, mix(cfg.seed, &[idx, 0]), Block::Causal)?;
    let p_bg = factor_mean_pca(
        m,
        &plan_spec,
        cfg.n_plan,
        mix(cfg.seed, &[idx, 6]),
        Block::Spurious,
    )?;

    // The importance formula describes per-coordinate membership of a
    // subspace; with a 5-d hidden layer the raw axes are arbitrary
    // mixtures of both factors, so the boost operates in an orthonormal
    // basis aligned with the estimated factor directions: foreground mean
    // PCs first, then the background mean PCs residualized against them
    // (the variation unique to the background), then a completion. The
    // uniform control is unaffected by the basis change.
    // Both factors share most of a single evidence direction at this
    // width; the factor-specific pathway is its mean direction
    // residualized against the other factor's. Ordering the basis with
    // the other factor first makes the target's coordinates exactly that
    // unique part.
    let d = p_fg.components.cols();
    let (other, targ, target) = match which {
        InterventionKind::BoostFg => (&p_bg, &p_fg, BoostTarget::Foreground),
        InterventionKind::BoostBg => (&p_fg, &p_bg, BoostTarget::Background),
        InterventionKind::Rotation => unreachable!("boost_rows called for rotation"),
    };
    let other_rows: Vec<Vec<S>> = other.components.iter_rows().map(|r| r.to_vec()).collect();
    let other_basis = gram_schmidt(&other_rows, d);
    let k_other = other_basis.rows();
    let mut cands: Vec<Vec<S>> = other_basis.iter_rows().map(|r| r.to_vec()).collect();
    cands.extend(targ.components.iter_rows().map(|r| r.to_vec()));
    let span = gram_schmidt(&cands, d);
    let k_targ = span.rows() - k_other;
    let q = complete_basis(&span, d);

    // "Decreasing" a subspace means scaling the factor's coordinates by
    // g relative to the rest, with mean-1 importance: g = 1 is exactly
    // the identity, g < 1 starves the L2-retrained head of that pathway,
    // g > 1 amplifies it.
    let (lo, hi) = (k_other, k_other + k_targ);
    if hi - lo >= d {
        return Err(CtxError::Degenerate(
            "boost would rescale the entire representation".into(),
        ));
    }
    let n_t = (hi - lo) as f64;
    let kept_w = d as f64 / (n_t * g + (d as f64 - n_t));
    let targ_w = kept_w * g;
    let importance: Vec<S> = (0..d)
        .map(|i| cast::<S>(if i >= lo && i < hi { targ_w } else { kept_w }))
        .collect();
    let plan = BoostPlan {
        importance,
        g,
        target,
    };
    let to_basis = |reps: &Matrix<S>| -> Result<Matrix<S>> { reps.matmul_transpose(&q) };

    // Heads are fit on ID representations and evaluated on OOD
    // representations.
    let id_ds = generate::<S>(&EnvironmentSpec {
        n_samples: cfg.n_eval,
        seed: mix(cfg.seed, &[idx, 4]),
        ..sm.spec.clone()
    })?;
    let h3_id = to_basis(&forward(m, &id_ds.to_matrix())?.h3)?;
    let head_b = logistic_fit(
        &apply_boost(&plan, &h3_id)?,
        &id_ds.labels(),
        2,
        cast::<S>(cfg.head_l2),
    )?;
    let head_c = logistic_fit(
        &apply_control(&plan, &h3_id)?,
        &id_ds.labels(),
        2,
        cast::<S>(cfg.head_l2),
    )?;

    let mut rows = Vec::new();
    for (name, ood1) in [("ood1_acc", true), ("ood2_acc", false)] {
        let shifted = if ood1 { make_ood1(&sm.spec) } else { make_ood2(&sm.spec) };
        let ds = generate::<S>(&EnvironmentSpec {
            n_samples: cfg.n_eval,
            seed: mix(cfg.seed, &[idx, if ood1 { 2 } else { 3 }]),
            ..shifted
        })?;
        let h3 = to_basis(&forward(m, &ds.to_matrix())?.h3)?;
        let post = head_b.accuracy(&apply_boost(&plan, &h3)?, &ds.labels())?;
        let pre = head_c.accuracy(&apply_control(&plan, &h3)?, &ds.labels())?;
        rows.push(StudyRow {
            model_id: sm.id.clone(),
            intervention: which.as_str().into(),
            g,
            metric: name.into(),
            pre,
            post,
        });
    }
    Ok(rows)
}

/// Run one intervention over a model population: per-model pre/post rows
/// plus paired t-tests on each metric's deltas. Per-model failures are
/// recorded as flagged rows and excluded from the tests.
pub fn run_intervention_study<S: Scalar>(
    models: &[StudyModel<S>],
    which: InterventionKind,
    g: f64,
    cfg: &StudyConfig,
) -> Result<StudyResult> {
    if models.len() < 2 {
        return Err(CtxError::InvalidSpec(
            "intervention study needs at least 2 models".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, sm) in models.iter().enumerate() {
        let result = match which {
            InterventionKind::Rotation => rotation_rows(sm, i as u64, cfg),
            _ => boost_rows(sm, i as u64, which, g, cfg),
        };
        match result {
            Ok(model_rows) => rows.extend(model_rows),
            Err(e) => rows.push(StudyRow {
                model_id: sm.id.clone(),
                intervention: which.as_str().into(),
                g,
                metric: format!("error({})", format!("{e}").replace(',', ";")),
                pre: 0.0,
                post: 0.0,
            }),
        }
    }

    let mut quantities: Vec<String> = Vec::new();
    for r in &rows {
        if !r.metric.starts_with("error") && !quantities.contains(&r.metric) {
            quantities.push(r.metric.clone());
        }
    }
    let mut ttests = Vec::new();
    for q in quantities {
        let pre: Vec<f64> = rows.iter().filter(|r| r.metric == q).map(|r| r.pre).collect();
        let post: Vec<f64> = rows.iter().filter(|r| r.metric == q).map(|r| r.post).collect();
        let (t, p) = match paired_ttest(&post, &pre) {
            Ok(tp) => tp,
            // All deltas identical and zero: no effect, maximal p.
            Err(CtxError::Degenerate(_)) => (0.0, 1.0),
            Err(e) => return Err(e),
        };
        ttests.push(TtestRow {
            intervention: which.as_str().into(),
            quantity: q,
            t,
            p,
            n: pre.len(),
        });
    }
    Ok(StudyResult { rows, ttests })
}
