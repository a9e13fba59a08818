use crate::error::{CtxError, Result};
use crate::numerics::matrix::{dot, Matrix};
use crate::scalar::{cast, Scalar};

/// Principal axes of a centered data matrix, one axis per row, sorted by
/// descending eigenvalue of the sample covariance.
#[derive(Debug, Clone)]
pub struct PcaResult<S: Scalar> {
    pub components: Matrix<S>,
    pub explained_variance: Vec<S>,
    pub explained_ratio: Vec<S>,
    pub mean: Vec<S>,
    /// Set when the centered data carries no variance at all.
    pub degenerate: bool,
}

/// Prefix of principal axes selected by [`top_k_for_variance`].
#[derive(Debug, Clone)]
pub struct TopKComponents<S: Scalar> {
    pub components: Matrix<S>,
    /// Set when the PCA was degenerate and the selection fell back to the
    /// first axis.
    pub warned: bool,
}

/// PCA via one-sided Jacobi SVD of the centered data matrix. Returns
/// `min(rows - 1, cols)` components.
pub fn pca<S: Scalar>(x: &Matrix<S>) -> Result<PcaResult<S>> {
    if x.rows() < 2 {
        return Err(CtxError::InvalidSpec(format!(
            "pca needs at least 2 rows, got {}",
            x.rows()
        )));
    }
    if !x.is_finite() {
        return Err(CtxError::NonFinite("pca input".into()));
    }
    let n = x.rows();
    let d = x.cols();
    let mean = x.column_means();

    // Work on the transpose so each data column is a contiguous row.
    let mut b = Matrix::<S>::zeros(d, n);
    for r in 0..n {
        for c in 0..d {
            b.set(c, r, x.get(r, c) - mean[c]);
        }
    }
    // Accumulated rotations; rows end up as the right singular vectors.
    let mut w = Matrix::<S>::zeros(d, d);
    for i in 0..d {
        w.set(i, i, S::one());
    }

    let tol = S::epsilon() * cast::<S>(64.0);
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let (alpha, beta, gamma) = {
                    let rp = b.row(p);
                    let rq = b.row(q);
                    (dot(rp, rp), dot(rq, rq), dot(rp, rq))
                };
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == S::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (cast::<S>(2.0) * gamma);
                let t = {
                    let s = if zeta >= S::zero() { S::one() } else { -S::one() };
                    s / (zeta.abs() + (S::one() + zeta * zeta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut b, p, q, c, s);
                rotate_rows(&mut w, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let k = (n - 1).min(d);
    let denom = S::from(n - 1).unwrap();
    let mut eigs: Vec<(S, usize)> = (0..d)
        .map(|j| {
            let r = b.row(j);
            (dot(r, r) / denom, j)
        })
        .collect();
    eigs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    eigs.truncate(k);

    let total: S = eigs.iter().map(|&(e, _)| e).sum();
    let degenerate = !(total > S::epsilon() * S::epsilon());
    let mut components = Matrix::zeros(k, d);
    let mut explained_variance = Vec::with_capacity(k);
    let mut explained_ratio = Vec::with_capacity(k);
    for (out_row, &(eig, j)) in eigs.iter().enumerate() {
        components.row_mut(out_row).copy_from_slice(w.row(j));
        explained_variance.push(eig);
        explained_ratio.push(if degenerate { S::zero() } else { eig / total });
    }

    Ok(PcaResult {
        components,
        explained_variance,
        explained_ratio,
        mean,
        degenerate,
    })
}

fn rotate_rows<S: Scalar>(m: &mut Matrix<S>, p: usize, q: usize, c: S, s: S) {
    let cols = m.cols();
    for i in 0..cols {
        let vp = m.get(p, i);
        let vq = m.get(q, i);
        m.set(p, i, c * vp - s * vq);
        m.set(q, i, s * vp + c * vq);
    }
}

/// Smallest prefix of components whose cumulative explained ratio reaches
/// `threshold`; always at least one component.
pub fn top_k_for_variance<S: Scalar>(p: &PcaResult<S>, threshold: S) -> Result<TopKComponents<S>> {
    if !(threshold > S::zero() && threshold <= S::one()) {
        return Err(CtxError::InvalidSpec(format!(
            "variance threshold must be in (0, 1], got {threshold}"
        )));
    }
    let d = p.components.cols();
    if p.degenerate {
        let mut first = Matrix::zeros(1, d);
        first.row_mut(0).copy_from_slice(p.components.row(0));
        return Ok(TopKComponents {
            components: first,
            warned: true,
        });
    }
    let mut cum = S::zero();
    let mut k = p.explained_ratio.len();
    for (i, &r) in p.explained_ratio.iter().enumerate() {
        cum += r;
        if cum >= threshold {
            k = i + 1;
            break;
        }
    }
    let k = k.max(1);
    let mut components = Matrix::zeros(k, d);
    for i in 0..k {
        components.row_mut(i).copy_from_slice(p.components.row(i));
    }
    Ok(TopKComponents {
        components,
        warned: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{normal, rng_from_seed};

    /// Eigenvalues of a symmetric 3x3 matrix by the trigonometric solution
    /// of the characteristic polynomial. Test-only oracle, independent of
    /// the Jacobi path.
    fn sym3_eigenvalues(m: &[[f64; 3]; 3]) -> [f64; 3] {
        let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
        let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p < 1e-300 {
            return [q, q, q];
        }
        let mut bmat = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                bmat[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
            }
        }
        let detb = bmat[0][0] * (bmat[1][1] * bmat[2][2] - bmat[1][2] * bmat[2][1])
            - bmat[0][1] * (bmat[1][0] * bmat[2][2] - bmat[1][2] * bmat[2][0])
            + bmat[0][2] * (bmat[1][0] * bmat[2][1] - bmat[1][1] * bmat[2][0]);
        let r = (detb / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        [e1, e2, e3]
    }

    #[test]
    fn rank_one_data_explains_everything() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca(&x).unwrap();
        assert!((p.explained_ratio[0] - 1.0).abs() < 1e-9);
        assert!(!p.degenerate);
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial_oracle() {
        let x = Matrix::from_rows(&[
            vec![1.0, 2.0, 0.5],
            vec![0.0, -1.0, 1.5],
            vec![2.0, 0.5, -0.5],
            vec![-1.0, 1.0, 2.0],
        ])
        .unwrap();
        let p = pca(&x).unwrap();

        // Build the sample covariance directly and diagonalize it in
        // closed form.
        let means = x.column_means();
        let mut cov = [[0.0f64; 3]; 3];
        for r in 0..x.rows() {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += (x.get(r, i) - means[i]) * (x.get(r, j) - means[j]);
                }
            }
        }
        for row in &mut cov {
            for v in row.iter_mut() {
                *v /= (x.rows() - 1) as f64;
            }
        }
        let expected = sym3_eigenvalues(&cov);
        for (got, want) in p.explained_variance.iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-8, "eig {got} vs oracle {want}");
        }
    }

    #[test]
    fn isotropic_cloud_has_flat_spectrum() {
        let mut rng = rng_from_seed(42);
        let d = 4;
        let rows: Vec<Vec<f64>> = (0..4000)
            .map(|_| (0..d).map(|_| normal(&mut rng, 0.0, 1.0)).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca(&x).unwrap();
        for r in &p.explained_ratio {
            assert!((r - 1.0 / d as f64).abs() < 0.05, "ratio {r}");
        }
    }

    #[test]
    fn components_are_orthonormal_and_reconstruct() {
        let mut rng = rng_from_seed(9);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..6).map(|_| normal(&mut rng, 1.0, 2.0)).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca(&x).unwrap();
        let k = p.components.rows();
        for i in 0..k {
            for j in 0..k {
                let d = dot(p.components.row(i), p.components.row(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-8, "gram[{i}][{j}] = {d}");
            }
        }
        // Project the centered data onto all axes and back.
        let mut centered = x.clone();
        for r in 0..centered.rows() {
            for c in 0..centered.cols() {
                let v = centered.get(r, c) - p.mean[c];
                centered.set(r, c, v);
            }
        }
        let coords = centered.matmul_transpose(&p.components).unwrap();
        let back = coords.matmul(&p.components).unwrap();
        for (a, b) in centered.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn all_constant_data_is_degenerate() {
        let x = Matrix::from_rows(&[vec![3.0, 3.0], vec![3.0, 3.0], vec![3.0, 3.0]]).unwrap();
        let p = pca(&x).unwrap();
        assert!(p.degenerate);
        let top = top_k_for_variance(&p, 0.99).unwrap();
        assert!(top.warned);
        assert_eq!(top.components.rows(), 1);
    }

    #[test]
    fn top_k_cumulative_boundaries() {
        let mk = |ratios: Vec<f64>| PcaResult {
            components: Matrix::zeros(ratios.len(), ratios.len()),
            explained_variance: ratios.clone(),
            explained_ratio: ratios,
            mean: vec![],
            degenerate: false,
        };
        let p = mk(vec![0.6, 0.3, 0.1]);
        assert_eq!(top_k_for_variance(&p, 0.99).unwrap().components.rows(), 3);
        let p = mk(vec![1.0, 0.0, 0.0]);
        assert_eq!(top_k_for_variance(&p, 0.99).unwrap().components.rows(), 1);
        let p = mk(vec![0.5, 0.48, 0.02]);
        assert_eq!(top_k_for_variance(&p, 0.99).unwrap().components.rows(), 3);
        assert!(top_k_for_variance(&p, 0.0).is_err());
    }
}
