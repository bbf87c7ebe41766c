//! Test-only oracles that do not go through the library's decompositions.
#![allow(dead_code)]

use glrr::linalg::{gaussian_matrix, random_orthonormal};
use glrr::{GrassmannPoint, TangentVector};
use nalgebra::DMatrix;
use rand::Rng;

/// Cyclic Jacobi eigenvalue iteration on a symmetric matrix, written out by
/// hand. Returns eigenvalues (unsorted) and eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| 0.5 * (a[(i, j)] + a[(j, i)])).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| v[i][j]);
    (values, vectors)
}

/// Singular values via the eigenvalues of `MᵀM`, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let (mut ev, _) = jacobi_eigen(&(m.transpose() * m));
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.into_iter().map(|e| e.max(0.0).sqrt()).collect()
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().sum()
}

pub fn random_point<R: Rng>(rng: &mut R, d: usize, p: usize) -> GrassmannPoint {
    GrassmannPoint::validate_stiefel(random_orthonormal(rng, d, p), 1e-10).unwrap()
}

/// Random orthogonal `p × p`.
pub fn random_orthogonal<R: Rng>(rng: &mut R, p: usize) -> DMatrix<f64> {
    random_orthonormal(rng, p, p)
}

/// Horizontal tangent at `x` whose singular values are drawn uniformly from
/// `[0, max_angle]`. The rank is `min(p, d − p)`.
pub fn random_tangent<R: Rng>(rng: &mut R, x: &GrassmannPoint, max_angle: f64) -> TangentVector {
    let (d, p) = (x.ambient_dim(), x.subspace_dim());
    let r = p.min(d - p);
    let g = gaussian_matrix(rng, d, r);
    let b = x.basis();
    let u = glrr::linalg::orthonormalize(&(&g - b * (b.transpose() * &g)));
    let v = random_orthonormal(rng, p, r);
    let mut us = u;
    for j in 0..r {
        let s = rng.random::<f64>() * max_angle;
        us.column_mut(j).scale_mut(s);
    }
    TangentVector::new(x.clone(), us * v.transpose(), 1e-10).unwrap()
}

/// Explicit double loop for `trace(AᵀB)`.
pub fn trace_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}
