//! Grassmann manifold geometry in the Stiefel (orthonormal basis) picture.
//!
//! A point of `G(p, d)` is stored as a `d × p` matrix `X` with `XᵀX = I`; any
//! `XQ` with `Q` orthogonal names the same subspace. Tangent vectors at `X`
//! are horizontal lifts `H` with `XᵀH = 0`, and the metric is `trace(H₁ᵀH₂)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GlrrError, Result};
use crate::linalg::{orthonormality_residual, orthonormalize, Svd};

/// Default tolerance on `‖XᵀX − I‖_F` for accepting a basis.
pub const STIEFEL_TOL: f64 = 1e-10;
/// `XᵀY` with a singular value below this is treated as the cut locus.
pub const LOG_SINGULAR_TOL: f64 = 1e-10;
/// Relative cut-off used to count significant singular values of a sample matrix.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Orthonormal `d × p` representative of a `p`-dimensional subspace of `ℝ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannPoint {
    basis: DMatrix<f64>,
}

impl GrassmannPoint {
    /// Wrap `m` after checking `‖mᵀm − I‖_F ≤ tol`.
    pub fn validate_stiefel(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let (d, p) = m.shape();
        if p == 0 || d == 0 {
            return Err(GlrrError::Shape(format!("empty basis {d}x{p}")));
        }
        if p > d {
            return Err(GlrrError::Shape(format!(
                "subspace dimension {p} exceeds ambient dimension {d}"
            )));
        }
        let residual = orthonormality_residual(&m);
        if !(residual <= tol) {
            return Err(GlrrError::NotOrthonormal { residual, tol });
        }
        Ok(GrassmannPoint { basis: m })
    }

    /// Dominant `p`-dimensional left singular subspace of a `d × M` sample matrix.
    pub fn from_samples(samples: &DMatrix<f64>, p: usize) -> Result<Self> {
        let (d, m) = samples.shape();
        if m == 0 || d == 0 {
            return Err(GlrrError::Shape(format!("empty sample matrix {d}x{m}")));
        }
        if p == 0 || p > d.min(m) {
            return Err(GlrrError::Shape(format!(
                "cannot extract a {p}-dimensional subspace from a {d}x{m} sample matrix"
            )));
        }
        let svd = Svd::new(samples)?.with_sign_convention();
        let s = &svd.singular_values;
        let cutoff = RANK_REL_TOL * s[0];
        let rank = s.iter().filter(|&&x| x > cutoff && x > 0.0).count();
        if rank < p {
            return Err(GlrrError::RankDeficient { rank, needed: p });
        }
        Ok(GrassmannPoint {
            basis: svd.u.columns(0, p).into_owned(),
        })
    }

    /// Orthonormalize an arbitrary full-column-rank matrix (QR, `diag(R) ≥ 0`).
    pub fn from_spanning(m: &DMatrix<f64>) -> Result<Self> {
        let (d, p) = m.shape();
        if p == 0 || p > d {
            return Err(GlrrError::Shape(format!("cannot span G({p},{d})")));
        }
        Self::validate_stiefel(orthonormalize(m), 1e-8)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector `XXᵀ`, which depends only on the subspace.
    pub fn projection(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Same subspace, different representative: `X Q` for orthogonal `Q`.
    pub fn right_act(&self, q: &DMatrix<f64>) -> Result<Self> {
        let p = self.subspace_dim();
        if q.shape() != (p, p) {
            return Err(GlrrError::Shape(format!(
                "right action needs a {p}x{p} matrix, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        Self::validate_stiefel(&self.basis * q, 1e-8)
    }

    fn check_same_shape(&self, other: &GrassmannPoint) -> Result<()> {
        if self.basis.shape() != other.basis.shape() {
            return Err(GlrrError::Shape(format!(
                "points live on different Grassmannians: {:?} vs {:?}",
                self.basis.shape(),
                other.basis.shape()
            )));
        }
        Ok(())
    }

    /// Grassmann logarithm: the horizontal `H` at `self` with `exp(H)` spanning `target`.
    ///
    /// Takes the thin SVD `UΣVᵀ = (Y − XXᵀY)(XᵀY)⁻¹` and returns
    /// `U arctan(Σ) Vᵀ`. Fails when `XᵀY` is numerically singular.
    pub fn log_map(&self, target: &GrassmannPoint) -> Result<TangentVector> {
        self.check_same_shape(target)?;
        let x = &self.basis;
        let y = &target.basis;
        let xty = x.transpose() * y;

        let cos = Svd::new(&xty)?.singular_values;
        let min_singular = cos.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_singular >= LOG_SINGULAR_TOL) {
            return Err(GlrrError::LogUndefined { min_singular });
        }

        let normal = y - x * &xty;
        // A = N (XᵀY)⁻¹, solved as (XᵀY)ᵀ Aᵀ = Nᵀ.
        let lu = xty.transpose().lu();
        let a_t = lu.solve(&normal.transpose()).ok_or_else(|| {
            GlrrError::NumericalFailure("XᵀY could not be factored".to_string())
        })?;
        let h = Svd::new(&a_t.transpose())?.recompose_with(f64::atan);
        Ok(TangentVector {
            base: self.clone(),
            matrix: h,
        })
    }

    /// Grassmann exponential with the orthogonal factor fixed to `V`:
    /// `X V cos(S) Vᵀ + U sin(S) Vᵀ` for `H = U S Vᵀ`, re-orthonormalized.
    pub fn exp_map(&self, h: &TangentVector) -> Result<GrassmannPoint> {
        if h.matrix.shape() != self.basis.shape() {
            return Err(GlrrError::Shape(format!(
                "tangent of shape {:?} at a point of shape {:?}",
                h.matrix.shape(),
                self.basis.shape()
            )));
        }
        if h.base != *self {
            return Err(GlrrError::BaseMismatch);
        }
        if h.matrix.iter().any(|x| !x.is_finite()) {
            return Err(GlrrError::NumericalFailure(
                "tangent vector has non-finite entries".to_string(),
            ));
        }
        let svd = Svd::new(&h.matrix)?;
        let v = svd.v_t.transpose();
        let mut xv_cos = &self.basis * &v;
        let mut u_sin = svd.u.clone();
        for (j, &s) in svd.singular_values.iter().enumerate() {
            xv_cos.column_mut(j).scale_mut(s.cos());
            u_sin.column_mut(j).scale_mut(s.sin());
        }
        let y = (xv_cos + u_sin) * &svd.v_t;
        Ok(GrassmannPoint {
            basis: orthonormalize(&y),
        })
    }

    /// Principal angles, ascending, from the singular values of `XᵀY`
    /// clamped to `[0, 1]`.
    pub fn principal_angles(&self, other: &GrassmannPoint) -> Result<DVector<f64>> {
        self.check_same_shape(other)?;
        let cos = Svd::new(&(self.basis.transpose() * &other.basis))?.singular_values;
        // singular values are descending, so the angles come out ascending
        Ok(cos.map(|c| c.clamp(0.0, 1.0).acos()))
    }

    /// Arc-length distance `√Σθ²`.
    pub fn geodesic_distance(&self, other: &GrassmannPoint) -> Result<f64> {
        Ok(self.principal_angles(other)?.norm())
    }
}

/// Horizontal lift of a tangent vector at `base`.
#[derive(Clone, Debug)]
pub struct TangentVector {
    base: GrassmannPoint,
    matrix: DMatrix<f64>,
}

impl TangentVector {
    /// Checks `‖baseᵀH‖_F ≤ tol`.
    pub fn new(base: GrassmannPoint, matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        if matrix.shape() != base.basis.shape() {
            return Err(GlrrError::Shape(format!(
                "tangent of shape {:?} at a point of shape {:?}",
                matrix.shape(),
                base.basis.shape()
            )));
        }
        let residual = (base.basis.transpose() * &matrix).norm();
        if !(residual <= tol) {
            return Err(GlrrError::Shape(format!(
                "matrix is not horizontal: ‖XᵀH‖ = {residual:e}"
            )));
        }
        Ok(TangentVector { base, matrix })
    }

    /// Project an arbitrary `d × p` matrix onto the horizontal space: `M − XXᵀM`.
    pub fn project(base: &GrassmannPoint, m: &DMatrix<f64>) -> Result<Self> {
        if m.shape() != base.basis.shape() {
            return Err(GlrrError::Shape("projection shape mismatch".to_string()));
        }
        let x = &base.basis;
        let matrix = m - x * (x.transpose() * m);
        Ok(TangentVector {
            base: base.clone(),
            matrix,
        })
    }

    pub fn zero(base: &GrassmannPoint) -> Self {
        let (d, p) = base.basis.shape();
        TangentVector {
            base: base.clone(),
            matrix: DMatrix::zeros(d, p),
        }
    }

    pub fn base(&self) -> &GrassmannPoint {
        &self.base
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn horizontality_residual(&self) -> f64 {
        (self.base.basis.transpose() * &self.matrix).norm()
    }

    /// `trace(H₁ᵀH₂)`.
    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        if self.base != other.base {
            return Err(GlrrError::BaseMismatch);
        }
        Ok(self.matrix.dot(&other.matrix))
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }
}
