//! Synthetic clusters of subspaces for desk-scale experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterAssignment;
use crate::error::{GlrrError, Result};
use crate::linalg::{gaussian_matrix, random_orthonormal};
use crate::manifold::GrassmannPoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub k: usize,
    pub per_cluster: usize,
    pub d: usize,
    pub p: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.per_cluster == 0 || self.d == 0 || self.p == 0 {
            return Err(GlrrError::Validation(
                "synthetic counts and dimensions must be positive".to_string(),
            ));
        }
        if self.p > self.d {
            return Err(GlrrError::Shape(format!(
                "subspace dimension {} exceeds ambient dimension {}",
                self.p, self.d
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(GlrrError::Validation(format!("noise must be ≥ 0, got {}", self.noise)));
        }
        Ok(())
    }
}

/// One random orthonormal center per cluster; each member is the
/// orthonormalized `center + σ·G` with `G` standard Gaussian. Points are
/// ordered cluster by cluster.
pub fn synth_grassmann(spec: &SyntheticSpec) -> Result<(Vec<GrassmannPoint>, ClusterAssignment)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut points = Vec::with_capacity(spec.k * spec.per_cluster);
    let mut labels = Vec::with_capacity(spec.k * spec.per_cluster);
    for c in 0..spec.k {
        let center = random_orthonormal(&mut rng, spec.d, spec.p);
        for _ in 0..spec.per_cluster {
            let member = if spec.noise == 0.0 {
                GrassmannPoint::validate_stiefel(center.clone(), 1e-10)?
            } else {
                let perturbed = &center + gaussian_matrix(&mut rng, spec.d, spec.p) * spec.noise;
                GrassmannPoint::from_spanning(&perturbed)?
            };
            points.push(member);
            labels.push(c);
        }
    }
    Ok((points, ClusterAssignment::new(labels, spec.k)?))
}
