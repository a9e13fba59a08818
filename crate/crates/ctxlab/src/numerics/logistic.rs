use crate::error::{CtxError, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::random::{rng_from_seed, shuffled_indices};
use crate::scalar::{cast, to_f64, Scalar};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 5000;

/// Multinomial logistic classifier; weights are `n_classes x n_features`.
#[derive(Debug, Clone)]
pub struct LinearClassifier<S: Scalar> {
    pub weights: Matrix<S>,
    pub biases: Vec<S>,
    pub converged: bool,
    pub iterations: usize,
}

impl<S: Scalar> LinearClassifier<S> {
    pub fn n_classes(&self) -> usize {
        self.weights.rows()
    }

    /// Class probabilities, one row per sample.
    pub fn predict_proba(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        let mut logits = x.matmul_transpose(&self.weights)?;
        for r in 0..logits.rows() {
            let row = logits.row_mut(r);
            for (v, &b) in row.iter_mut().zip(&self.biases) {
                *v += b;
            }
            softmax_row_in_place(row);
        }
        Ok(logits)
    }

    /// Argmax predictions; ties break toward the lower class index.
    pub fn predict(&self, x: &Matrix<S>) -> Result<Vec<usize>> {
        let probs = self.predict_proba(x)?;
        Ok(probs.iter_rows().map(argmax).collect())
    }

    pub fn accuracy(&self, x: &Matrix<S>, labels: &[usize]) -> Result<f64> {
        let preds = self.predict(x)?;
        let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }
}

pub(crate) fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_row_in_place<S: Scalar>(row: &mut [S]) {
    let mut max = row[0];
    for &v in row.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = S::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Full objective: mean cross-entropy plus (l2/2)||W||^2, with its gradient.
fn loss_and_grad<S: Scalar>(
    w: &Matrix<S>,
    b: &[S],
    x: &Matrix<S>,
    labels: &[usize],
    l2: S,
) -> (f64, Matrix<S>, Vec<S>) {
    let n = x.rows();
    let n_classes = w.rows();
    let inv_n = S::one() / S::from(n).unwrap();
    let floor = cast::<S>(1e-12);

    let mut gw = Matrix::zeros(n_classes, w.cols());
    let mut gb = vec![S::zero(); n_classes];
    let mut loss = 0.0f64;

    let mut probs = vec![S::zero(); n_classes];
    for (i, row) in x.iter_rows().enumerate() {
        for c in 0..n_classes {
            let mut z = b[c];
            for (&xv, &wv) in row.iter().zip(w.row(c)) {
                z += xv * wv;
            }
            probs[c] = z;
        }
        softmax_row_in_place(&mut probs);
        loss -= to_f64(probs[labels[i]].max(floor)).ln();
        for c in 0..n_classes {
            let mut err = probs[c];
            if c == labels[i] {
                err -= S::one();
            }
            err *= inv_n;
            gb[c] += err;
            for (g, &xv) in gw.row_mut(c).iter_mut().zip(row) {
                *g += err * xv;
            }
        }
    }
    loss /= n as f64;
    if l2 > S::zero() {
        let mut reg = S::zero();
        for (g, &wv) in gw.data_mut().iter_mut().zip(w.data()) {
            *g += l2 * wv;
            reg += wv * wv;
        }
        loss += 0.5 * to_f64(l2) * to_f64(reg);
    }
    (loss, gw, gb)
}

/// Multinomial logistic regression by full-batch gradient descent with
/// backtracking line search. Deterministic: zero initialization, fixed
/// iteration order. Hitting the iteration cap is reported via the
/// `converged` flag, not an error.
pub fn logistic_fit<S: Scalar>(
    x: &Matrix<S>,
    labels: &[usize],
    n_classes: usize,
    l2: S,
) -> Result<LinearClassifier<S>> {
    if x.rows() != labels.len() {
        return Err(CtxError::DimMismatch(format!(
            "{} rows vs {} labels",
            x.rows(),
            labels.len()
        )));
    }
    if x.rows() == 0 {
        return Err(CtxError::InvalidSpec("empty training set".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(CtxError::InvalidSpec(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    if l2 < S::zero() {
        return Err(CtxError::InvalidSpec("negative l2".into()));
    }

    let mut w = Matrix::zeros(n_classes, x.cols());
    let mut b = vec![S::zero(); n_classes];
    let mut step = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let (loss, gw, gb) = loss_and_grad(&w, &b, x, labels, l2);
        let gmax = grad_max_norm(&gw, &gb);
        if gmax < GRAD_TOL {
            converged = true;
            iterations = iter;
            break;
        }
        let gnorm2: f64 = gw.data().iter().map(|&g| to_f64(g) * to_f64(g)).sum::<f64>()
            + gb.iter().map(|&g| to_f64(g) * to_f64(g)).sum::<f64>();

        // Backtracking (Armijo, c = 1e-4); the accepted step seeds the next
        // iteration's first trial.
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        while step > 1e-14 {
            let (tw, tb) = stepped(&w, &b, &gw, &gb, cast::<S>(step));
            let (trial_loss, _, _) = loss_and_grad(&tw, &tb, x, labels, l2);
            if trial_loss <= loss - 1e-4 * step * gnorm2 {
                w = tw;
                b = tb;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No admissible step left; treat the current point as final.
            break;
        }
    }

    Ok(LinearClassifier {
        weights: w,
        biases: b,
        converged,
        iterations,
    })
}

fn stepped<S: Scalar>(
    w: &Matrix<S>,
    b: &[S],
    gw: &Matrix<S>,
    gb: &[S],
    t: S,
) -> (Matrix<S>, Vec<S>) {
    let mut tw = w.clone();
    for (v, &g) in tw.data_mut().iter_mut().zip(gw.data()) {
        *v -= t * g;
    }
    let tb = b.iter().zip(gb).map(|(&v, &g)| v - t * g).collect();
    (tw, tb)
}

fn grad_max_norm<S: Scalar>(gw: &Matrix<S>, gb: &[S]) -> f64 {
    gw.data()
        .iter()
        .chain(gb.iter())
        .map(|&g| to_f64(g).abs())
        .fold(0.0, f64::max)
}

/// Mean held-out accuracy over k contiguous folds of a seeded shuffle.
pub fn kfold_cv_accuracy<S: Scalar>(
    x: &Matrix<S>,
    labels: &[usize],
    n_classes: usize,
    k: usize,
    l2: S,
    seed: u64,
) -> Result<f64> {
    if k < 2 {
        return Err(CtxError::InvalidSpec(format!("k must be >= 2, got {k}")));
    }
    if x.rows() < k {
        return Err(CtxError::InvalidSpec(format!(
            "{} samples cannot fill {k} folds",
            x.rows()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let order = shuffled_indices(x.rows(), &mut rng);
    let n = x.rows();
    let base = n / k;
    let extra = n % k;

    let mut acc_sum = 0.0;
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let test_idx = &order[start..start + size];
        let train_idx: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        start += size;

        let (train_x, train_y) = take_rows(x, labels, &train_idx);
        let (test_x, test_y) = take_rows(x, labels, test_idx);
        let clf = logistic_fit(&train_x, &train_y, n_classes, l2)?;
        acc_sum += clf.accuracy(&test_x, &test_y)?;
    }
    Ok(acc_sum / k as f64)
}

fn take_rows<S: Scalar>(x: &Matrix<S>, labels: &[usize], idx: &[usize]) -> (Matrix<S>, Vec<usize>) {
    let mut out = Matrix::zeros(idx.len(), x.cols());
    let mut y = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(x.row(i));
        y.push(labels[i]);
    }
    (out, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{normal, rng_from_seed};
    use rand::Rng;

    fn clusters_1d(n_per: usize, centers: &[f64], spread: f64, seed: u64) -> (Matrix<f64>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &center) in centers.iter().enumerate() {
            for _ in 0..n_per {
                rows.push(vec![normal(&mut rng, center, spread)]);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separable_clusters_reach_perfect_training_accuracy() {
        let (x, y) = clusters_1d(30, &[-1.0, 1.0], 0.05, 1);
        let clf = logistic_fit(&x, &y, 2, 0.0).unwrap();
        assert_eq!(clf.accuracy(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn converged_flag_implies_small_gradient() {
        let (x, y) = clusters_1d(40, &[-1.0, 1.0], 0.8, 2);
        let clf = logistic_fit(&x, &y, 2, 0.5).unwrap();
        assert!(clf.converged);
        let (_, gw, gb) = loss_and_grad(&clf.weights, &clf.biases, &x, &y, 0.5);
        assert!(grad_max_norm(&gw, &gb) < 1e-5);
    }

    #[test]
    fn random_labels_score_at_chance() {
        let mut rng = rng_from_seed(3);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| (0..3).map(|_| normal(&mut rng, 0.0, 1.0)).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<usize> = (0..2000).map(|_| rng.random_range(0..4)).collect();
        let acc = kfold_cv_accuracy(&x, &y, 4, 5, 1.0, 7).unwrap();
        assert!((acc - 0.25).abs() < 0.04, "cv accuracy {acc}");
    }

    #[test]
    fn feature_scaling_preserves_predictions_without_l2() {
        let (x, y) = clusters_1d(50, &[-0.5, 0.6], 0.7, 5);
        let clf_a = logistic_fit(&x, &y, 2, 0.0).unwrap();
        let mut scaled = x.clone();
        for v in scaled.data_mut() {
            *v *= 10.0;
        }
        let clf_b = logistic_fit(&scaled, &y, 2, 0.0).unwrap();
        assert_eq!(
            clf_a.predict(&x).unwrap(),
            clf_b.predict(&scaled).unwrap()
        );
    }

    #[test]
    fn kfold_separable_and_leave_one_out() {
        let (x, y) = clusters_1d(25, &[-2.0, 2.0], 0.1, 8);
        let acc = kfold_cv_accuracy(&x, &y, 2, 5, 0.1, 11).unwrap();
        assert_eq!(acc, 1.0);

        let (x10, y10) = clusters_1d(5, &[-2.0, 2.0], 0.05, 9);
        let loo = kfold_cv_accuracy(&x10, &y10, 2, 10, 0.0, 13).unwrap();
        assert_eq!(loo, 1.0);
    }

    #[test]
    fn fold_count_errors() {
        let (x, y) = clusters_1d(2, &[-1.0, 1.0], 0.1, 1);
        assert!(kfold_cv_accuracy(&x, &y, 2, 1, 0.0, 0).is_err());
        assert!(kfold_cv_accuracy(&x, &y, 2, 5, 0.0, 0).is_err());
    }

    #[test]
    fn label_out_of_range_rejected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(logistic_fit(&x, &[0, 2], 2, 0.0).is_err());
    }
}
