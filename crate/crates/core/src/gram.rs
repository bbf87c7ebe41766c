//! Tangent-space Gram tensor: for every base point `X_i`, the Gram matrix of
//! the Log vectors `Log_{X_i}(X_j)` under the trace metric.

use nalgebra::DMatrix;

use crate::error::{GlrrError, Result};
use crate::linalg::symmetric_spectral_norm;
use crate::manifold::GrassmannPoint;
use crate::parallel::{map_indices, map_indices_seq};

/// `N` symmetric PSD `N × N` slices; slice `i` holds `trace(Log_iⱼᵀ Log_iₖ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramTensor {
    slices: Vec<DMatrix<f64>>,
}

impl GramTensor {
    /// Wrap precomputed slices; every slice must be `N × N` with `N` slices.
    pub fn from_slices(slices: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = slices.len();
        if n == 0 {
            return Err(GlrrError::Shape("empty Gram tensor".to_string()));
        }
        if let Some(bad) = slices.iter().position(|s| s.shape() != (n, n)) {
            return Err(GlrrError::Shape(format!(
                "slice {bad} has shape {:?}, expected {n}x{n}",
                slices[bad].shape()
            )));
        }
        Ok(GramTensor { slices })
    }

    pub fn zeros(n: usize) -> Self {
        GramTensor {
            slices: vec![DMatrix::zeros(n, n); n],
        }
    }

    pub fn n_points(&self) -> usize {
        self.slices.len()
    }

    pub fn slice(&self, i: usize) -> &DMatrix<f64> {
        &self.slices[i]
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    /// Linearization constant `max_i ‖B_i‖₂² + N + 1` (spectral norm).
    pub fn eta_b(&self) -> f64 {
        let max_norm = self
            .slices
            .iter()
            .map(symmetric_spectral_norm)
            .fold(0.0_f64, f64::max);
        max_norm * max_norm + self.n_points() as f64 + 1.0
    }
}

fn check_points(points: &[GrassmannPoint]) -> Result<()> {
    if points.len() < 2 {
        return Err(GlrrError::Shape(format!(
            "need at least two points, got {}",
            points.len()
        )));
    }
    let shape = points[0].basis().shape();
    if let Some(bad) = points.iter().position(|x| x.basis().shape() != shape) {
        return Err(GlrrError::Shape(format!(
            "point {bad} has shape {:?}, expected {shape:?}",
            points[bad].basis().shape()
        )));
    }
    Ok(())
}

/// Slice `i`: stack the vectorized Logs at `X_i` as columns of `L` and return `LᵀL`.
fn gram_slice(points: &[GrassmannPoint], i: usize) -> Result<DMatrix<f64>> {
    let n = points.len();
    let base = &points[i];
    let dp = base.ambient_dim() * base.subspace_dim();
    let mut logs = DMatrix::zeros(dp, n);
    for (j, target) in points.iter().enumerate() {
        if j == i {
            // Log at the base point is exactly zero
            continue;
        }
        let h = base.log_map(target).map_err(|e| match e {
            GlrrError::LogUndefined { min_singular } => GlrrError::LogUndefinedPair {
                base: i,
                target: j,
                min_singular,
            },
            other => other,
        })?;
        logs.column_mut(j).copy_from_slice(h.matrix().as_slice());
    }
    let mut b = logs.tr_mul(&logs);
    // exact symmetry
    for r in 0..n {
        for c in (r + 1)..n {
            let v = 0.5 * (b[(r, c)] + b[(c, r)]);
            b[(r, c)] = v;
            b[(c, r)] = v;
        }
    }
    Ok(b)
}

/// Build every slice, one base point per task.
pub fn build_gram(points: &[GrassmannPoint]) -> Result<GramTensor> {
    check_points(points)?;
    let slices = map_indices(points.len(), |i| gram_slice(points, i));
    Ok(GramTensor {
        slices: slices.into_iter().collect::<Result<_>>()?,
    })
}

/// Same as [`build_gram`] but never uses the thread pool.
pub fn build_gram_sequential(points: &[GrassmannPoint]) -> Result<GramTensor> {
    check_points(points)?;
    let slices = map_indices_seq(points.len(), |i| gram_slice(points, i));
    Ok(GramTensor {
        slices: slices.into_iter().collect::<Result<_>>()?,
    })
}
