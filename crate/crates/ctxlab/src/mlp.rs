//! Three-hidden-layer ReLU MLP with a task head and an auxiliary
//! background head. Trained by seeded mini-batch SGD under either plain
//! cross-entropy or the weighted objective
//! `L = alpha0 * L_task + alpha1 * L_fg + alpha2 * L_bg`, where `L_fg`
//! scores the task head on random-background variants and `L_bg` scores
//! the background head on background-only variants.

use std::path::Path;

use rand::Rng;
use serde_json::Value;

use crate::error::{CtxError, Result};
use crate::numerics::logistic::{argmax, softmax_row_in_place};
use crate::numerics::random::{mix, rng_from_seed, shuffled_indices, standard_normal, CtxRng};
use crate::numerics::Matrix;
use crate::scalar::{cast, to_f64, Scalar};
use crate::synthenv::Dataset;
use crate::textio::fmt_float;

/// Width of every hidden layer.
pub const HIDDEN: usize = 5;
/// Binary task: two output classes on both heads.
pub const N_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<S: Scalar> {
    pub w1: Matrix<S>,
    pub b1: Vec<S>,
    pub w2: Matrix<S>,
    pub b2: Vec<S>,
    pub w3: Matrix<S>,
    pub b3: Vec<S>,
    pub task_w: Matrix<S>,
    pub task_b: Vec<S>,
    pub bg_w: Matrix<S>,
    pub bg_b: Vec<S>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub batch_size: usize,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn erm(seed: u64) -> Self {
        TrainConfig {
            lr: 0.1,
            epochs: 750,
            lr_decay_every: 250,
            lr_decay_factor: 10.0,
            batch_size: 64,
            alpha0: 1.0,
            alpha1: 0.0,
            alpha2: 0.0,
            seed,
        }
    }

    /// ERM defaults plus augmentation weights; the reported configuration
    /// is `(1, 0.7, 0.3)`.
    pub fn augmented(alpha1: f64, alpha2: f64, seed: u64) -> Self {
        TrainConfig {
            alpha1,
            alpha2,
            ..TrainConfig::erm(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || self.lr_decay_factor <= 0.0 {
            return Err(CtxError::InvalidSpec("lr and decay factor must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.lr_decay_every == 0 {
            return Err(CtxError::InvalidSpec(
                "epochs, batch_size, lr_decay_every must be positive".into(),
            ));
        }
        if self.alpha0 < 0.0 || self.alpha1 < 0.0 || self.alpha2 < 0.0 {
            return Err(CtxError::InvalidSpec("loss weights must be nonnegative".into()));
        }
        if !(self.alpha0 > 0.0 || self.alpha1 + self.alpha2 > 0.0) {
            return Err(CtxError::InvalidSpec("all loss weights are zero".into()));
        }
        Ok(())
    }
}

/// Per-layer activations and head probabilities for one dataset pass.
#[derive(Debug, Clone)]
pub struct RepresentationSet<S: Scalar> {
    pub h1: Matrix<S>,
    pub h2: Matrix<S>,
    pub h3: Matrix<S>,
    pub task_probs: Matrix<S>,
    pub bg_probs: Matrix<S>,
}

/// He-initialized model: weights ~ N(0, 2/fan_in), biases zero.
pub fn init<S: Scalar>(seed: u64, input_dim: usize) -> Result<MlpModel<S>> {
    if input_dim == 0 {
        return Err(CtxError::InvalidSpec("input_dim must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let he = |rows: usize, cols: usize, rng: &mut CtxRng| {
        let std = (2.0 / cols as f64).sqrt();
        let data: Vec<S> = (0..rows * cols)
            .map(|_| cast(std * standard_normal(rng)))
            .collect();
        Matrix::from_vec(rows, cols, data).expect("shape by construction")
    };
    Ok(MlpModel {
        w1: he(HIDDEN, input_dim, &mut rng),
        b1: vec![S::zero(); HIDDEN],
        w2: he(HIDDEN, HIDDEN, &mut rng),
        b2: vec![S::zero(); HIDDEN],
        w3: he(HIDDEN, HIDDEN, &mut rng),
        b3: vec![S::zero(); HIDDEN],
        task_w: he(N_CLASSES, HIDDEN, &mut rng),
        task_b: vec![S::zero(); N_CLASSES],
        bg_w: he(N_CLASSES, HIDDEN, &mut rng),
        bg_b: vec![S::zero(); N_CLASSES],
        seed,
    })
}

impl<S: Scalar> MlpModel<S> {
    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    fn tensors(&self) -> [(&Matrix<S>, &[S]); 5] {
        [
            (&self.w1, &self.b1),
            (&self.w2, &self.b2),
            (&self.w3, &self.b3),
            (&self.task_w, &self.task_b),
            (&self.bg_w, &self.bg_b),
        ]
    }

    /// Flat mutable views over every parameter tensor, in checkpoint
    /// order: w1,b1,w2,b2,w3,b3,task_w,task_b,bg_w,bg_b.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [S]> {
        vec![
            self.w1.data_mut(),
            &mut self.b1,
            self.w2.data_mut(),
            &mut self.b2,
            self.w3.data_mut(),
            &mut self.b3,
            self.task_w.data_mut(),
            &mut self.task_b,
            self.bg_w.data_mut(),
            &mut self.bg_b,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(w, b)| w.is_finite() && b.iter().all(|v| v.is_finite()))
    }
}

/// Gradients mirroring the model parameter layout.
#[derive(Debug, Clone)]
pub struct Gradients<S: Scalar> {
    pub w1: Matrix<S>,
    pub b1: Vec<S>,
    pub w2: Matrix<S>,
    pub b2: Vec<S>,
    pub w3: Matrix<S>,
    pub b3: Vec<S>,
    pub task_w: Matrix<S>,
    pub task_b: Vec<S>,
    pub bg_w: Matrix<S>,
    pub bg_b: Vec<S>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(m: &MlpModel<S>) -> Self {
        Gradients {
            w1: Matrix::zeros(m.w1.rows(), m.w1.cols()),
            b1: vec![S::zero(); HIDDEN],
            w2: Matrix::zeros(HIDDEN, HIDDEN),
            b2: vec![S::zero(); HIDDEN],
            w3: Matrix::zeros(HIDDEN, HIDDEN),
            b3: vec![S::zero(); HIDDEN],
            task_w: Matrix::zeros(N_CLASSES, HIDDEN),
            task_b: vec![S::zero(); N_CLASSES],
            bg_w: Matrix::zeros(N_CLASSES, HIDDEN),
            bg_b: vec![S::zero(); N_CLASSES],
        }
    }

    pub fn param_slices(&self) -> Vec<&[S]> {
        vec![
            self.w1.data(),
            &self.b1,
            self.w2.data(),
            &self.b2,
            self.w3.data(),
            &self.b3,
            self.task_w.data(),
            &self.task_b,
            self.bg_w.data(),
            &self.bg_b,
        ]
    }
}

fn linear_relu<S: Scalar>(x: &Matrix<S>, w: &Matrix<S>, b: &[S]) -> Matrix<S> {
    let mut out = x.matmul_transpose(w).expect("layer shapes fixed");
    for r in 0..out.rows() {
        for (v, &bias) in out.row_mut(r).iter_mut().zip(b) {
            *v = (*v + bias).max(S::zero());
        }
    }
    out
}

fn head_probs<S: Scalar>(h: &Matrix<S>, w: &Matrix<S>, b: &[S]) -> Matrix<S> {
    let mut out = h.matmul_transpose(w).expect("head shapes fixed");
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for (v, &bias) in row.iter_mut().zip(b) {
            *v += bias;
        }
        softmax_row_in_place(row);
    }
    out
}

/// Forward pass exposing all hidden layers and both heads.
pub fn forward<S: Scalar>(m: &MlpModel<S>, x: &Matrix<S>) -> Result<RepresentationSet<S>> {
    if x.cols() != m.input_dim() {
        return Err(CtxError::DimMismatch(format!(
            "input has {} columns, model expects {}",
            x.cols(),
            m.input_dim()
        )));
    }
    if !x.is_finite() {
        return Err(CtxError::NonFinite("forward input".into()));
    }
    let h1 = linear_relu(x, &m.w1, &m.b1);
    let h2 = linear_relu(&h1, &m.w2, &m.b2);
    let h3 = linear_relu(&h2, &m.w3, &m.b3);
    let task_probs = head_probs(&h3, &m.task_w, &m.task_b);
    let bg_probs = head_probs(&h3, &m.bg_w, &m.bg_b);
    Ok(RepresentationSet {
        h1,
        h2,
        h3,
        task_probs,
        bg_probs,
    })
}

/// One training batch together with its pre-sampled augmentation variants,
/// so that loss and gradients are a deterministic function of the batch.
#[derive(Debug, Clone)]
pub struct AugmentedBatch<S: Scalar> {
    pub x: Matrix<S>,
    pub y: Vec<usize>,
    /// Random-background variant: spurious block resampled from a
    /// uniformly random class.
    pub x_fg: Option<Matrix<S>>,
    /// Background-only variant: causal block replaced by the constant
    /// `mu_n`.
    pub x_bg: Option<Matrix<S>>,
    pub z_s: Vec<usize>,
}

/// Assemble a batch from dataset rows, sampling the augmentation variants
/// that the loss weights require.
pub fn augment_batch<S: Scalar, R: Rng>(
    ds: &Dataset<S>,
    indices: &[usize],
    with_fg: bool,
    with_bg: bool,
    rng: &mut R,
) -> Result<AugmentedBatch<S>> {
    if indices.is_empty() {
        return Err(CtxError::InvalidSpec("empty batch".into()));
    }
    let dim = ds.spec.total_dim();
    let mut x = Matrix::zeros(indices.len(), dim);
    let mut y = Vec::with_capacity(indices.len());
    let mut z_s = Vec::with_capacity(indices.len());
    for (r, &i) in indices.iter().enumerate() {
        let s = &ds.samples[i];
        x.row_mut(r).copy_from_slice(&s.x);
        y.push(s.y);
        z_s.push(s.z_s);
    }

    let x_fg = if with_fg {
        let mut v = x.clone();
        let spur = ds.layout.spurious.clone();
        for r in 0..v.rows() {
            let z: usize = rng.random_range(0..N_CLASSES);
            let row = v.row_mut(r);
            ds.spec.fill_spurious(z, rng, &mut row[spur.clone()]);
        }
        Some(v)
    } else {
        None
    };

    let x_bg = if with_bg {
        let mut v = x.clone();
        let causal = ds.layout.causal.clone();
        let fill = cast::<S>(ds.spec.mu_n);
        for r in 0..v.rows() {
            for val in &mut v.row_mut(r)[causal.clone()] {
                *val = fill;
            }
        }
        Some(v)
    } else {
        None
    };

    Ok(AugmentedBatch { x, y, x_fg, x_bg, z_s })
}

#[derive(Clone, Copy)]
enum Head {
    Task,
    Background,
}

/// Mean cross-entropy of one head on one input variant, with gradients
/// scaled by `alpha` accumulated into `grads`.
fn pass<S: Scalar>(
    m: &MlpModel<S>,
    x: &Matrix<S>,
    labels: &[usize],
    head: Head,
    alpha: f64,
    grads: &mut Gradients<S>,
) -> f64 {
    let n = x.rows();
    let h1 = linear_relu(x, &m.w1, &m.b1);
    let h2 = linear_relu(&h1, &m.w2, &m.b2);
    let h3 = linear_relu(&h2, &m.w3, &m.b3);
    let (hw, hb) = match head {
        Head::Task => (&m.task_w, &m.task_b),
        Head::Background => (&m.bg_w, &m.bg_b),
    };
    let probs = head_probs(&h3, hw, hb);

    let floor = cast::<S>(1e-12);
    let mut loss = 0.0;
    let scale = cast::<S>(alpha / n as f64);
    // d(loss)/d(logits), already weighted by alpha and the batch mean.
    let mut dlogits = probs.clone();
    for r in 0..n {
        loss -= to_f64(probs.get(r, labels[r]).max(floor)).ln();
        let row = dlogits.row_mut(r);
        row[labels[r]] -= S::one();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    loss /= n as f64;

    // Head backward.
    let (gw, gb) = match head {
        Head::Task => (&mut grads.task_w, &mut grads.task_b),
        Head::Background => (&mut grads.bg_w, &mut grads.bg_b),
    };
    accumulate_linear_grads(&dlogits, &h3, gw, gb);
    let mut dh = dlogits.matmul(hw).expect("head shapes");

    // Hidden layers backward.
    relu_backward_in_place(&mut dh, &h3);
    accumulate_linear_grads(&dh, &h2, &mut grads.w3, &mut grads.b3);
    let mut dh = dh.matmul(&m.w3).expect("layer shapes");

    relu_backward_in_place(&mut dh, &h2);
    accumulate_linear_grads(&dh, &h1, &mut grads.w2, &mut grads.b2);
    let mut dh = dh.matmul(&m.w2).expect("layer shapes");

    relu_backward_in_place(&mut dh, &h1);
    accumulate_linear_grads(&dh, x, &mut grads.w1, &mut grads.b1);

    loss
}

fn relu_backward_in_place<S: Scalar>(d: &mut Matrix<S>, activated: &Matrix<S>) {
    for (g, &a) in d.data_mut().iter_mut().zip(activated.data()) {
        if a <= S::zero() {
            *g = S::zero();
        }
    }
}

/// gw += d^T input; gb += column sums of d.
fn accumulate_linear_grads<S: Scalar>(
    d: &Matrix<S>,
    input: &Matrix<S>,
    gw: &mut Matrix<S>,
    gb: &mut [S],
) {
    for r in 0..d.rows() {
        let drow = d.row(r);
        let irow = input.row(r);
        for (c, &dv) in drow.iter().enumerate() {
            if dv == S::zero() {
                continue;
            }
            gb[c] += dv;
            for (g, &iv) in gw.row_mut(c).iter_mut().zip(irow) {
                *g += dv * iv;
            }
        }
    }
}

/// Weighted loss `alpha0 L_task + alpha1 L_fg + alpha2 L_bg` and its
/// gradients by reverse-mode differentiation. Passes with zero weight are
/// skipped entirely, so their parameters receive exact zero gradient.
pub fn loss_and_grads<S: Scalar>(
    m: &MlpModel<S>,
    batch: &AugmentedBatch<S>,
    cfg: &TrainConfig,
) -> Result<(f64, Gradients<S>)> {
    cfg.validate()?;
    let mut grads = Gradients::zeros_like(m);
    let mut total = 0.0;
    if cfg.alpha0 > 0.0 {
        total += cfg.alpha0 * pass(m, &batch.x, &batch.y, Head::Task, cfg.alpha0, &mut grads);
    }
    if cfg.alpha1 > 0.0 {
        let x_fg = batch.x_fg.as_ref().ok_or_else(|| {
            CtxError::InvalidSpec("alpha1 > 0 but batch has no random-background variant".into())
        })?;
        total += cfg.alpha1 * pass(m, x_fg, &batch.y, Head::Task, cfg.alpha1, &mut grads);
    }
    if cfg.alpha2 > 0.0 {
        let x_bg = batch.x_bg.as_ref().ok_or_else(|| {
            CtxError::InvalidSpec("alpha2 > 0 but batch has no background-only variant".into())
        })?;
        total += cfg.alpha2 * pass(m, x_bg, &batch.z_s, Head::Background, cfg.alpha2, &mut grads);
    }
    Ok((total, grads))
}

/// SGD training loop with the step-decay schedule. Returns the final
/// model and the mean batch loss per epoch.
pub fn train_with_history<S: Scalar>(
    ds: &Dataset<S>,
    cfg: &TrainConfig,
) -> Result<(MlpModel<S>, Vec<f64>)> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(CtxError::InvalidSpec("empty training set".into()));
    }
    let mut model = init::<S>(mix(cfg.seed, &[0]), ds.spec.total_dim())?;
    let mut shuffle_rng = rng_from_seed(mix(cfg.seed, &[1]));
    let mut aug_rng = rng_from_seed(mix(cfg.seed, &[2]));
    let with_fg = cfg.alpha1 > 0.0;
    let with_bg = cfg.alpha2 > 0.0;

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr / cfg.lr_decay_factor.powi((epoch / cfg.lr_decay_every) as i32);
        let order = shuffled_indices(ds.len(), &mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = augment_batch(ds, chunk, with_fg, with_bg, &mut aug_rng)?;
            let (loss, grads) = loss_and_grads(&model, &batch, cfg)?;
            if !loss.is_finite() {
                return Err(CtxError::Diverged(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            sgd_step(&mut model, &grads, cast::<S>(lr));
            epoch_loss += loss;
            batches += 1;
        }
        history.push(epoch_loss / batches as f64);
    }
    if !model.is_finite() {
        return Err(CtxError::Diverged("non-finite parameters after training".into()));
    }
    Ok((model, history))
}

pub fn train<S: Scalar>(ds: &Dataset<S>, cfg: &TrainConfig) -> Result<MlpModel<S>> {
    train_with_history(ds, cfg).map(|(m, _)| m)
}

fn sgd_step<S: Scalar>(m: &mut MlpModel<S>, g: &Gradients<S>, lr: S) {
    for (p, gr) in m.param_slices_mut().into_iter().zip(g.param_slices()) {
        for (v, &d) in p.iter_mut().zip(gr) {
            *v -= lr * d;
        }
    }
}

/// Task-head accuracy; argmax ties break toward the lower class index.
pub fn evaluate<S: Scalar>(m: &MlpModel<S>, ds: &Dataset<S>) -> Result<f64> {
    let reps = forward(m, &ds.to_matrix())?;
    let hits = reps
        .task_probs
        .iter_rows()
        .zip(&ds.samples)
        .filter(|(row, s)| argmax(row) == s.y)
        .count();
    Ok(hits as f64 / ds.len().max(1) as f64)
}

// ---------------------------------------------------------------------------
// Checkpoint format: JSON document with named tensors and a config echo,
// floats written with 17 significant digits so reloading is bit-exact.
// ---------------------------------------------------------------------------

fn write_vec<S: Scalar>(out: &mut String, v: &[S]) {
    out.push('[');
    for (i, &x) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_float(to_f64(x)));
    }
    out.push(']');
}

fn write_matrix<S: Scalar>(out: &mut String, m: &Matrix<S>) {
    out.push('[');
    for (i, row) in m.iter_rows().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_vec(out, row);
    }
    out.push(']');
}

pub fn save_checkpoint<S: Scalar>(m: &MlpModel<S>, cfg: &TrainConfig, path: &Path) -> Result<()> {
    let mut out = String::from("{\n");
    out.push_str(&format!("\"input_dim\": {},\n", m.input_dim()));
    out.push_str(&format!("\"seed\": {},\n", m.seed));
    out.push_str(&format!(
        "\"cfg\": {{\"lr\": {}, \"epochs\": {}, \"lr_decay_every\": {}, \"lr_decay_factor\": {}, \"batch_size\": {}, \"alpha0\": {}, \"alpha1\": {}, \"alpha2\": {}, \"seed\": {}}},\n",
        fmt_float(cfg.lr),
        cfg.epochs,
        cfg.lr_decay_every,
        fmt_float(cfg.lr_decay_factor),
        cfg.batch_size,
        fmt_float(cfg.alpha0),
        fmt_float(cfg.alpha1),
        fmt_float(cfg.alpha2),
        cfg.seed
    ));
    out.push_str("\"tensors\": {\n");
    let named: [(&str, bool); 10] = [
        ("w1", true),
        ("b1", false),
        ("w2", true),
        ("b2", false),
        ("w3", true),
        ("b3", false),
        ("task_w", true),
        ("task_b", false),
        ("bg_w", true),
        ("bg_b", false),
    ];
    let mats = [&m.w1, &m.w2, &m.w3, &m.task_w, &m.bg_w];
    let vecs = [&m.b1, &m.b2, &m.b3, &m.task_b, &m.bg_b];
    let mut mi = 0;
    let mut vi = 0;
    for (i, (name, is_matrix)) in named.iter().enumerate() {
        out.push_str(&format!("\"{name}\": "));
        if *is_matrix {
            write_matrix(&mut out, mats[mi]);
            mi += 1;
        } else {
            write_vec(&mut out, vecs[vi]);
            vi += 1;
        }
        if i + 1 < named.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("}\n}\n");
    std::fs::write(path, out)?;
    Ok(())
}

fn json_f64(v: &Value, what: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| CtxError::Parse(format!("checkpoint: {what} is not a number")))
}

fn json_u64(v: &Value, what: &str) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| CtxError::Parse(format!("checkpoint: {what} is not an integer")))
}

fn json_vec<S: Scalar>(v: &Value, what: &str) -> Result<Vec<S>> {
    v.as_array()
        .ok_or_else(|| CtxError::Parse(format!("checkpoint: {what} is not an array")))?
        .iter()
        .map(|x| json_f64(x, what).map(cast))
        .collect()
}

fn json_matrix<S: Scalar>(v: &Value, what: &str) -> Result<Matrix<S>> {
    let rows = v
        .as_array()
        .ok_or_else(|| CtxError::Parse(format!("checkpoint: {what} is not an array")))?
        .iter()
        .map(|r| json_vec(r, what))
        .collect::<Result<Vec<Vec<S>>>>()?;
    Matrix::from_rows(&rows)
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<(MlpModel<S>, TrainConfig)> {
    let text = std::fs::read_to_string(path)?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| CtxError::Parse(format!("checkpoint: {e}")))?;
    let tensors = &doc["tensors"];
    let cfg_doc = &doc["cfg"];
    let cfg = TrainConfig {
        lr: json_f64(&cfg_doc["lr"], "cfg.lr")?,
        epochs: json_f64(&cfg_doc["epochs"], "cfg.epochs")? as usize,
        lr_decay_every: json_f64(&cfg_doc["lr_decay_every"], "cfg.lr_decay_every")? as usize,
        lr_decay_factor: json_f64(&cfg_doc["lr_decay_factor"], "cfg.lr_decay_factor")?,
        batch_size: json_f64(&cfg_doc["batch_size"], "cfg.batch_size")? as usize,
        alpha0: json_f64(&cfg_doc["alpha0"], "cfg.alpha0")?,
        alpha1: json_f64(&cfg_doc["alpha1"], "cfg.alpha1")?,
        alpha2: json_f64(&cfg_doc["alpha2"], "cfg.alpha2")?,
        seed: json_u64(&cfg_doc["seed"], "cfg.seed")?,
    };
    let model = MlpModel {
        w1: json_matrix(&tensors["w1"], "w1")?,
        b1: json_vec(&tensors["b1"], "b1")?,
        w2: json_matrix(&tensors["w2"], "w2")?,
        b2: json_vec(&tensors["b2"], "b2")?,
        w3: json_matrix(&tensors["w3"], "w3")?,
        b3: json_vec(&tensors["b3"], "b3")?,
        task_w: json_matrix(&tensors["task_w"], "task_w")?,
        task_b: json_vec(&tensors["task_b"], "task_b")?,
        bg_w: json_matrix(&tensors["bg_w"], "bg_w")?,
        bg_b: json_vec(&tensors["bg_b"], "bg_b")?,
        seed: json_u64(&doc["seed"], "seed")?,
    };
    Ok((model, cfg))
}
