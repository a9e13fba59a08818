//! Correlation and hypothesis-test primitives. Accumulation happens in
//! `f64` regardless of the storage scalar; p-values come from the
//! regularized incomplete beta function evaluated by continued fraction.

use crate::error::{CtxError, Result};
use crate::scalar::{to_f64, Scalar};

/// ln Γ(x) by the Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a Student t statistic with `dof` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, dof: f64) -> f64 {
    incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0)
}

/// Sample Pearson correlation with a two-sided p-value (t distribution,
/// n - 2 dof). Zero variance in either argument is an error.
pub fn pearson<S: Scalar>(a: &[S], b: &[S]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(CtxError::DimMismatch(format!(
            "pearson lengths {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(CtxError::InvalidSpec(
            "pearson needs at least 3 observations".into(),
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().map(|&v| to_f64(v)).sum::<f64>() / n;
    let mb = b.iter().map(|&v| to_f64(v)).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = to_f64(x) - ma;
        let dy = to_f64(y) - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 0.0 || vb <= 0.0 {
        return Err(CtxError::Degenerate(
            "pearson: zero variance, correlation undefined".into(),
        ));
    }
    let r = (cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0);
    let dof = n - 2.0;
    let denom = 1.0 - r * r;
    let p = if denom <= 0.0 {
        0.0
    } else {
        student_t_two_sided_p(r * (dof / denom).sqrt(), dof)
    };
    Ok((r, p))
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman<S: Scalar>(a: &[S], b: &[S]) -> Result<f64> {
    let ra = ranks(a);
    let rb = ranks(b);
    let (r, _) = pearson(&ra, &rb)?;
    Ok(r)
}

fn ranks<S: Scalar>(v: &[S]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Paired t-test on d = a - b; two-sided p-value. All-equal differences
/// (including a constant nonzero offset) are degenerate.
pub fn paired_ttest<S: Scalar>(a: &[S], b: &[S]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(CtxError::DimMismatch(format!(
            "paired_ttest lengths {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(CtxError::InvalidSpec(
            "paired_ttest needs at least 2 pairs".into(),
        ));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| to_f64(x) - to_f64(y))
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(CtxError::Degenerate(
            "paired_ttest: differences have zero variance".into(),
        ));
    }
    let t = mean / (var / n as f64).sqrt();
    let p = student_t_two_sided_p(t, (n - 1) as f64);
    Ok((t, p))
}
