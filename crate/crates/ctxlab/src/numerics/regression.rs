use rayon::prelude::*;

use crate::error::{CtxError, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::random::{mix, rng_from_seed, shuffled_indices};
use crate::numerics::stats::student_t_two_sided_p;
use crate::scalar::{to_f64, Scalar};

/// OLS fit with per-coefficient two-sided p-values.
#[derive(Debug, Clone)]
pub struct RegressionResult<S: Scalar> {
    pub coefficients: Vec<S>,
    pub intercept: S,
    pub r2_train: f64,
    pub r2_test: f64,
    pub p_values: Vec<f64>,
    /// Set when the normal equations were singular and a tiny ridge
    /// (l2 = 1e-8) was used instead.
    pub ridge_fallback: bool,
}

impl<S: Scalar> RegressionResult<S> {
    pub fn predict_row(&self, row: &[S]) -> f64 {
        let mut acc = to_f64(self.intercept);
        for (&c, &v) in self.coefficients.iter().zip(row) {
            acc += to_f64(c) * to_f64(v);
        }
        acc
    }

    pub fn r2_on(&self, x: &Matrix<S>, y: &[S]) -> f64 {
        r2_score(
            &x.iter_rows().map(|r| self.predict_row(r)).collect::<Vec<_>>(),
            &y.iter().map(|&v| to_f64(v)).collect::<Vec<_>>(),
        )
    }
}

fn r2_score(pred: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = pred.iter().zip(y).map(|(&p, &v)| (v - p) * (v - p)).sum();
    if ss_tot <= 0.0 {
        return 0.0;
    }
    1.0 - ss_res / ss_tot
}

/// Solve the symmetric system `m x = rhs` by Gaussian elimination with
/// partial pivoting. Returns `None` on a singular pivot.
fn solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Inverse of a small symmetric positive matrix by Gauss-Jordan.
fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let p = a[col][col];
        for k in 0..n {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[row][k] -= f * a[col][k];
                inv[row][k] -= f * inv[col][k];
            }
        }
    }
    Some(inv)
}

/// OLS via the normal equations; a singular design falls back to ridge
/// with l2 = 1e-8 and sets `ridge_fallback`.
pub fn ols_fit<S: Scalar>(x: &Matrix<S>, y: &[S]) -> Result<RegressionResult<S>> {
    let n = x.rows();
    let p = x.cols();
    if n != y.len() {
        return Err(CtxError::DimMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if n <= p + 1 {
        return Err(CtxError::InvalidSpec(format!(
            "need more than {} rows for {p} features, got {n}",
            p + 1
        )));
    }

    // Normal equations over the design [1 | X].
    let dim = p + 1;
    let mut ata = vec![vec![0.0f64; dim]; dim];
    let mut aty = vec![0.0f64; dim];
    for (r, row) in x.iter_rows().enumerate() {
        let mut design = Vec::with_capacity(dim);
        design.push(1.0);
        design.extend(row.iter().map(|&v| to_f64(v)));
        let target = to_f64(y[r]);
        for i in 0..dim {
            aty[i] += design[i] * target;
            for j in i..dim {
                ata[i][j] += design[i] * design[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }

    let mut ridge_fallback = false;
    let beta = match solve(ata.clone(), aty.clone()) {
        Some(b) => b,
        None => {
            ridge_fallback = true;
            let mut ridged = ata.clone();
            for (i, row) in ridged.iter_mut().enumerate() {
                row[i] += 1e-8;
            }
            solve(ridged, aty).ok_or_else(|| {
                CtxError::Degenerate("design matrix singular even with ridge".into())
            })?
        }
    };

    let preds: Vec<f64> = x.iter_rows().map(|row| {
        beta[0]
            + row
                .iter()
                .enumerate()
                .map(|(j, &v)| beta[j + 1] * to_f64(v))
                .sum::<f64>()
    }).collect();
    let targets: Vec<f64> = y.iter().map(|&v| to_f64(v)).collect();
    let r2 = r2_score(&preds, &targets);

    // Standard t-statistics from s^2 (A^T A)^{-1}.
    let dof = (n - dim) as f64;
    let rss: f64 = preds
        .iter()
        .zip(&targets)
        .map(|(&pr, &t)| (t - pr) * (t - pr))
        .sum();
    let p_values = if dof > 0.0 {
        match invert(&ata) {
            Some(inv) => {
                let s2 = rss / dof;
                (1..dim)
                    .map(|j| {
                        let se = (s2 * inv[j][j]).max(0.0).sqrt();
                        if se <= 0.0 {
                            1.0
                        } else {
                            student_t_two_sided_p(beta[j] / se, dof)
                        }
                    })
                    .collect()
            }
            None => vec![1.0; p],
        }
    } else {
        vec![1.0; p]
    };

    Ok(RegressionResult {
        coefficients: beta[1..].iter().map(|&b| S::from(b).unwrap()).collect(),
        intercept: S::from(beta[0]).unwrap(),
        r2_train: r2,
        r2_test: r2,
        p_values,
        ridge_fallback,
    })
}

/// Bootstrap summary: held-out R-squared statistics over replicates plus
/// the full-data fit.
#[derive(Debug, Clone)]
pub struct BootstrapSummary<S: Scalar> {
    pub mean_r2_test: f64,
    pub std_r2_test: f64,
    pub full_fit: RegressionResult<S>,
    pub n_boot: usize,
}

/// Each replicate draws a seeded random train/test split, fits OLS on the
/// train part, and records held-out R-squared. Replicate RNG streams are
/// derived from `(seed, replicate index)` so evaluation order is free.
pub fn ols_bootstrap<S: Scalar>(
    x: &Matrix<S>,
    y: &[S],
    n_boot: usize,
    train_frac: f64,
    seed: u64,
) -> Result<BootstrapSummary<S>> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(CtxError::InvalidSpec(format!(
            "train_frac must be in (0,1), got {train_frac}"
        )));
    }
    if n_boot == 0 {
        return Err(CtxError::InvalidSpec("n_boot must be positive".into()));
    }
    let n = x.rows();
    let min_train = x.cols() + 2;
    let n_train = ((n as f64 * train_frac).round() as usize).clamp(min_train, n - 1);
    if n_train >= n || n_train < min_train {
        return Err(CtxError::InvalidSpec(format!(
            "cannot split {n} rows into {n_train} train / rest test for {} features",
            x.cols()
        )));
    }

    let r2s: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_from_seed(mix(seed, &[rep as u64]));
            let order = shuffled_indices(n, &mut rng);
            let (train_idx, test_idx) = order.split_at(n_train);
            let (tx, ty) = gather(x, y, train_idx);
            let (vx, vy) = gather(x, y, test_idx);
            let fit = ols_fit(&tx, &ty)?;
            Ok(fit.r2_on(&vx, &vy))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mean = r2s.iter().sum::<f64>() / n_boot as f64;
    let std = if n_boot > 1 {
        (r2s.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n_boot - 1) as f64).sqrt()
    } else {
        0.0
    };

    Ok(BootstrapSummary {
        mean_r2_test: mean,
        std_r2_test: std,
        full_fit: ols_fit(x, y)?,
        n_boot,
    })
}

fn gather<S: Scalar>(x: &Matrix<S>, y: &[S], idx: &[usize]) -> (Matrix<S>, Vec<S>) {
    let mut out = Matrix::zeros(idx.len(), x.cols());
    let mut ty = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(x.row(i));
        ty.push(y[i]);
    }
    (out, ty)
}
