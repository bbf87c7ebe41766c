//! Dense linear-algebra helpers shared by the geometry, solver and clustering
//! modules. All decompositions are returned in a canonical ordering with a
//! fixed sign convention so that results are reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GlrrError, Result};

const SVD_MAX_SWEEPS: usize = 10_000;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Relative tolerance (per unit of dimension) when checking a factorization.
const SVD_CHECK_TOL: f64 = 1e-12;

type SvdPath = fn(&DMatrix<f64>) -> Option<Svd>;

/// Thin SVD `m = U diag(s) Vᵀ` with singular values sorted descending.
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl Svd {
    /// Every candidate factorization is checked for reconstruction and
    /// orthonormality before it is accepted. nalgebra's bidiagonal SVD can
    /// return an inaccurate or plainly wrong factorization (seen on
    /// rank-deficient input and on clustered singular values); such cases
    /// fall through to a QR-preconditioned SVD and then to one-sided Jacobi.
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let candidates: [SvdPath; 3] = [svd_direct, svd_qr, svd_jacobi];
        for candidate in candidates {
            if let Some(svd) = candidate(m).filter(|svd| svd.is_valid_for(m)) {
                return Ok(svd.sorted());
            }
        }
        Err(GlrrError::NumericalFailure(format!(
            "no accurate SVD found for a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )))
    }

    fn is_valid_for(&self, m: &DMatrix<f64>) -> bool {
        let k = self.singular_values.len();
        if self.singular_values.iter().any(|&s| !(s >= 0.0)) {
            return false;
        }
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let tol = SVD_CHECK_TOL * (m.nrows().max(m.ncols()) as f64).max(1.0);
        let recon = (self.recompose_with(|s| s) - m).norm();
        let identity = DMatrix::<f64>::identity(k, k);
        let u_err = (self.u.transpose() * &self.u - &identity).amax();
        let v_err = (&self.v_t * self.v_t.transpose() - identity).amax();
        recon <= tol * scale && u_err <= tol && v_err <= tol
    }

    fn sorted(self) -> Self {
        let s = &self.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let k = s.len();
        let mut su = DMatrix::zeros(self.u.nrows(), k);
        let mut sv = DMatrix::zeros(k, self.v_t.ncols());
        let mut ss = DVector::zeros(k);
        for (dst, &src) in order.iter().enumerate() {
            su.set_column(dst, &self.u.column(src));
            sv.set_row(dst, &self.v_t.row(src));
            ss[dst] = s[src];
        }
        Svd {
            u: su,
            singular_values: ss,
            v_t: sv,
        }
    }

    fn transposed(self) -> Self {
        Svd {
            u: self.v_t.transpose(),
            singular_values: self.singular_values,
            v_t: self.u.transpose(),
        }
    }

    /// Flip singular-vector pairs so the largest-magnitude entry of every
    /// left singular vector is positive.
    pub fn with_sign_convention(mut self) -> Self {
        for j in 0..self.u.ncols() {
            let col = self.u.column(j);
            let mut pivot = 0.0_f64;
            for &x in col.iter() {
                if x.abs() > pivot.abs() {
                    pivot = x;
                }
            }
            if pivot < 0.0 {
                self.u.column_mut(j).neg_mut();
                self.v_t.row_mut(j).neg_mut();
            }
        }
        self
    }

    /// Rebuild `U f(s) Vᵀ` for an elementwise function of the singular values.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(f(s));
        }
        us * &self.v_t
    }
}

fn svd_direct(m: &DMatrix<f64>) -> Option<Svd> {
    let svd = nalgebra::SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_SWEEPS)?;
    Some(Svd {
        u: svd.u?,
        singular_values: svd.singular_values,
        v_t: svd.v_t?,
    })
}

/// `M = QR`, then the SVD of the small triangular factor.
fn svd_qr(m: &DMatrix<f64>) -> Option<Svd> {
    if m.nrows() < m.ncols() {
        return svd_qr(&m.transpose()).map(Svd::transposed);
    }
    let qr = m.clone().qr();
    let inner = svd_direct(&qr.r())?;
    Some(Svd {
        u: qr.q() * inner.u,
        singular_values: inner.singular_values,
        v_t: inner.v_t,
    })
}

/// One-sided (Hestenes) Jacobi on the columns of a tall matrix.
fn svd_jacobi(m: &DMatrix<f64>) -> Option<Svd> {
    if m.nrows() < m.ncols() {
        return svd_jacobi(&m.transpose()).map(Svd::transposed);
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    // Rotating below this relative coupling only chases rounding noise.
    let threshold = f64::EPSILON * m.nrows() as f64;
    // Columns this small are noise; they are replaced when `U` is completed.
    let negligible = (f64::EPSILON * m.norm()).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if alpha <= negligible || beta <= negligible || gamma.abs() <= threshold * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let sigma = DVector::from_fn(n, |j, _| a.column(j).norm());
    let floor = sigma.max() * f64::EPSILON * m.nrows() as f64;
    let mut u = DMatrix::zeros(m.nrows(), n);
    let mut missing = Vec::new();
    for j in 0..n {
        if sigma[j] > floor && sigma[j] > 0.0 {
            u.set_column(j, &(a.column(j) / sigma[j]));
        } else {
            missing.push(j);
        }
    }
    complete_orthonormal(&mut u, &missing);
    Some(Svd {
        u,
        singular_values: sigma,
        v_t: v.transpose(),
    })
}

/// Fill the listed columns with unit vectors orthogonal to all other columns,
/// drawn from the standard basis by twice-repeated Gram-Schmidt.
fn complete_orthonormal(u: &mut DMatrix<f64>, missing: &[usize]) {
    let mut filled: Vec<usize> = (0..u.ncols()).filter(|j| !missing.contains(j)).collect();
    let mut e = 0;
    for &j in missing {
        while e < u.nrows() {
            let mut cand = DVector::zeros(u.nrows());
            cand[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for &k in &filled {
                    let proj = u.column(k).dot(&cand);
                    cand -= u.column(k) * proj;
                }
            }
            let norm = cand.norm();
            if norm > 0.5 {
                u.set_column(j, &(cand / norm));
                filled.push(j);
                break;
            }
        }
    }
}

/// Orthonormal basis of the column space via Householder QR, with the sign of
/// each column chosen so that `diag(R) ≥ 0`.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-distributed orthonormal `d × p` frame.
pub fn random_orthonormal<R: Rng + ?Sized>(rng: &mut R, d: usize, p: usize) -> DMatrix<f64> {
    orthonormalize(&gaussian_matrix(rng, d, p))
}

/// `‖MᵀM − I‖_F`.
pub fn orthonormality_residual(m: &DMatrix<f64>) -> f64 {
    let p = m.ncols();
    (m.transpose() * m - DMatrix::<f64>::identity(p, p)).norm()
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn symmetric_spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &e| acc.max(e.abs()))
}

/// Symmetric eigendecomposition with eigenvalues ascending. Each eigenvector
/// is signed so that its first component above `1e-12` in magnitude is
/// positive; ties in eigenvalue keep the solver's order.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}
