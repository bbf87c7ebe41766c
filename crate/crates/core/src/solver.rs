//! Linearized augmented-Lagrangian solver for the Grassmann low-rank
//! representation problem
//!
//! ```text
//! min_W  Σᵢ wᵢ Bᵢ wᵢᵀ + λ‖W‖_*   s.t.  W·1 = 1
//! ```
//!
//! Each iteration linearizes the smooth part `F` (quadratic term with a ½
//! factor, multiplier term and penalty term) around `W_k`, adds the proximal
//! term `η_B β_k / 2 ‖W − W_k‖²`, and solves the result in closed form with
//! singular value thresholding.

use std::io::Write;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GlrrError, Result};
use crate::gram::GramTensor;
use crate::linalg::Svd;
use crate::parallel::map_indices;

/// Self-expression weights; row `i` expresses point `i` in its tangent space.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix(pub DMatrix<f64>);

impl CoefficientMatrix {
    pub fn zeros(n: usize) -> Self {
        CoefficientMatrix(DMatrix::zeros(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// `W·1 − 1`.
    pub fn row_sum_residual(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.nrows(), self.0.row_iter().map(|r| r.sum() - 1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    pub rho0: f64,
    pub beta0: f64,
    pub beta_max: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.3,
            rho0: 1.9,
            beta0: 0.1,
            beta_max: 1e6,
            eps1: 1e-4,
            eps2: 1e-4,
            max_iters: 50_000,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GlrrError::Validation(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if !(self.beta0 > 0.0 && self.beta0 < self.beta_max && self.beta_max.is_finite()) {
            return bad(format!(
                "need 0 < beta0 < beta_max, got beta0 = {}, beta_max = {}",
                self.beta0, self.beta_max
            ));
        }
        if !(self.rho0 >= 1.0 && self.rho0.is_finite()) {
            return bad(format!("rho0 must be at least 1, got {}", self.rho0));
        }
        if !(self.eps1 > 0.0 && self.eps2 > 0.0) {
            return bad("tolerances must be positive".to_string());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".to_string());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub constraint_residual: f64,
    pub delta_w: f64,
    /// Penalty used during this iteration (before the update).
    pub beta: f64,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub w: CoefficientMatrix,
    pub y: DVector<f64>,
    pub beta: f64,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
}

impl SolverState {
    /// `W⁰ = 0`, `y⁰ = 0`, `β = β₀`.
    pub fn initial(n: usize, config: &SolverConfig) -> Self {
        SolverState {
            w: CoefficientMatrix::zeros(n),
            y: DVector::zeros(n),
            beta: config.beta0,
            iteration: 0,
            history: Vec::new(),
        }
    }

    /// Both stopping conditions evaluated on the latest iteration.
    pub fn converged(&self, config: &SolverConfig) -> bool {
        self.history.last().is_some_and(|r| {
            r.beta * r.delta_w <= config.eps1 && r.constraint_residual <= config.eps2
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    /// The iteration cap was hit; the last iterate is returned.
    MaxItersExceeded,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub w: CoefficientMatrix,
    pub state: SolverState,
    pub status: SolveStatus,
}

fn check_shapes(w: &DMatrix<f64>, b: &GramTensor) -> Result<()> {
    let n = b.n_points();
    if w.shape() != (n, n) {
        return Err(GlrrError::Shape(format!(
            "W is {}x{} but the Gram tensor has {n} slices",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(Svd::new(m)?.singular_values.sum())
}

fn quadratic_term(w: &DMatrix<f64>, b: &GramTensor) -> f64 {
    (0..b.n_points())
        .map(|i| {
            let row = w.row(i);
            (row * b.slice(i) * row.transpose())[(0, 0)]
        })
        .sum()
}

/// `Σᵢ wᵢBᵢwᵢᵀ + λ‖W‖_*`.
pub fn objective(w: &DMatrix<f64>, b: &GramTensor, lambda: f64) -> Result<f64> {
    check_shapes(w, b)?;
    Ok(quadratic_term(w, b) + lambda * nuclear_norm(w)?)
}

/// Gradient of the smooth part at `W`; row `i` is `wᵢBᵢ + (yᵢ + β(Σⱼwᵢⱼ − 1))·1`.
pub fn gradient_f(
    w: &DMatrix<f64>,
    b: &GramTensor,
    y: &DVector<f64>,
    beta: f64,
) -> Result<DMatrix<f64>> {
    check_shapes(w, b)?;
    let n = b.n_points();
    if y.len() != n {
        return Err(GlrrError::Shape(format!(
            "multiplier has length {}, expected {n}",
            y.len()
        )));
    }
    let rows = map_indices(n, |i| {
        let row = w.row(i);
        let shift = y[i] + beta * (row.sum() - 1.0);
        (row * b.slice(i)).add_scalar(shift)
    });
    Ok(DMatrix::from_rows(&rows))
}

/// Singular value thresholding `U max(Σ − τ, 0) Vᵀ`, the proximal map of `τ‖·‖_*`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) {
        return Err(GlrrError::Validation(format!("threshold must be nonnegative, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(m.clone());
    }
    Ok(svt_with_norm(m, tau)?.0)
}

/// SVT result together with its nuclear norm `Σ max(σ − τ, 0)`.
fn svt_with_norm(m: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, f64)> {
    let svd = Svd::new(m)?;
    let nuclear = svd.singular_values.iter().map(|s| (s - tau).max(0.0)).sum();
    Ok((svd.recompose_with(|s| (s - tau).max(0.0)), nuclear))
}

/// One linearized proximal step followed by the multiplier and penalty updates.
pub fn step(
    state: SolverState,
    b: &GramTensor,
    eta_b: f64,
    config: &SolverConfig,
) -> Result<SolverState> {
    let w = state.w.matrix();
    let beta = state.beta;
    let scale = eta_b * beta;

    let grad = gradient_f(w, b, &state.y, beta)?;
    let target = w - grad / scale;
    let (w_next, nuclear) = svt_with_norm(&target, config.lambda / scale)?;
    let w_next = CoefficientMatrix(w_next);
    if w_next.0.iter().any(|v| !v.is_finite()) {
        return Err(GlrrError::NumericalFailure(format!(
            "non-finite coefficients at iteration {}",
            state.iteration + 1
        )));
    }

    let residual = w_next.row_sum_residual();
    let y_next = &state.y + &residual * beta;
    let delta_w = (&w_next.0 - w).norm();
    let rho = if beta * delta_w <= config.eps1 {
        config.rho0
    } else {
        1.0
    };
    let beta_next = (rho * beta).min(config.beta_max);

    let record = IterationRecord {
        iter: state.iteration + 1,
        objective: quadratic_term(&w_next.0, b) + config.lambda * nuclear,
        constraint_residual: residual.norm(),
        delta_w,
        beta,
    };
    let mut history = state.history;
    history.push(record);

    Ok(SolverState {
        w: w_next,
        y: y_next,
        beta: beta_next,
        iteration: record.iter,
        history,
    })
}

/// Iterate from `W = 0` until `β_k‖ΔW‖_F ≤ ε₁` and `‖W·1 − 1‖ ≤ ε₂`, or the cap.
pub fn solve(b: &GramTensor, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    let eta_b = b.eta_b();
    let mut state = SolverState::initial(b.n_points(), config);
    debug!("solver: N = {}, eta_B = {eta_b:.6e}", b.n_points());

    let mut status = SolveStatus::MaxItersExceeded;
    while state.iteration < config.max_iters {
        state = step(state, b, eta_b, config)?;
        if state.converged(config) {
            status = SolveStatus::Converged;
            break;
        }
    }
    if status == SolveStatus::MaxItersExceeded {
        let last = state.history.last().copied();
        warn!(
            "solver stopped at the iteration cap ({}) without meeting both tolerances: {:?}",
            config.max_iters, last
        );
    }
    report_residual_oscillation(&state.history, config.eps2);
    Ok(Solution {
        w: state.w.clone(),
        state,
        status,
    })
}

/// Log (do not fail) when the constraint residual climbs back above `10ε₂`
/// after first dropping below `ε₂`.
fn report_residual_oscillation(history: &[IterationRecord], eps2: f64) {
    if let Some(first) = history.iter().position(|r| r.constraint_residual <= eps2) {
        if let Some(r) = history[first..]
            .iter()
            .find(|r| r.constraint_residual > 10.0 * eps2)
        {
            warn!(
                "constraint residual rebounded to {:.3e} at iteration {} after reaching {eps2:e}",
                r.constraint_residual, r.iter
            );
        }
    }
}

/// CSV with header `iter,objective,constraint_residual,delta_w,beta`.
pub fn write_history_csv<W: Write>(history: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iter,objective,constraint_residual,delta_w,beta")?;
    for r in history {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.iter, r.objective, r.constraint_residual, r.delta_w, r.beta
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_simple_cases() {
        let b = GramTensor::zeros(3);
        assert_eq!(objective(&DMatrix::zeros(3, 3), &b, 1.0).unwrap(), 0.0);
        let v = objective(&DMatrix::identity(3, 3), &b, 1.0).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_origin_is_minus_beta() {
        let b = GramTensor::zeros(3);
        let g = gradient_f(&DMatrix::zeros(3, 3), &b, &DVector::zeros(3), 1.0).unwrap();
        assert!(g.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn gradient_vanishes_at_feasible_point() {
        let b = GramTensor::zeros(3);
        let w = DMatrix::from_element(3, 3, 1.0 / 3.0);
        let g = gradient_f(&w, &b, &DVector::zeros(3), 2.0).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn svt_zero_threshold_is_identity() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        assert_eq!(svt(&m, 0.0).unwrap(), m);
        assert!(svt(&m, -1.0).is_err());
    }

    #[test]
    fn svt_diagonal_shrinkage() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.2]));
        let out = svt(&m, 0.5).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.5, 0.5, 0.0]));
        assert!((out - expected).norm() < 1e-12);
    }

    /// Hand computation for N = 2, B = 0, λ = 0, W = 0, y = 0, β = 1, η = 3:
    /// gradient is −1 everywhere, so W₁ = (1/3)·11ᵀ, row sums 2/3,
    /// y₁ = −1/3, ‖ΔW‖ = 2/3 > ε₁ so β stays at 1.
    #[test]
    fn single_step_by_hand() {
        let b = GramTensor::zeros(2);
        let config = SolverConfig {
            lambda: 0.0,
            beta0: 1.0,
            ..Default::default()
        };
        let s0 = SolverState::initial(2, &config);
        let s1 = step(s0, &b, 3.0, &config).unwrap();
        let third = 1.0 / 3.0;
        assert!((s1.w.matrix() - DMatrix::from_element(2, 2, third)).norm() < 1e-15);
        assert!((&s1.y - DVector::from_element(2, -third)).norm() < 1e-15);
        assert_eq!(s1.beta, 1.0);
        let r = s1.history[0];
        assert!((r.delta_w - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.constraint_residual - (2.0_f64).sqrt() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn beta_grows_only_when_change_is_small() {
        let b = GramTensor::zeros(2);
        let config = SolverConfig {
            lambda: 0.0,
            beta0: 1.0,
            ..Default::default()
        };
        // already at the feasible fixed point: ΔW = 0
        let mut s = SolverState::initial(2, &config);
        s.w = CoefficientMatrix(DMatrix::from_element(2, 2, 0.5));
        let next = step(s.clone(), &b, 3.0, &config).unwrap();
        assert!(next.history[0].delta_w < 1e-15);
        assert_eq!(next.beta, 1.9);
        assert!(next.converged(&config));

        let mut capped = s.clone();
        capped.beta = 9e5;
        let next = step(capped, &b, 3.0, &config).unwrap();
        assert_eq!(next.beta, 1e6);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            beta0: 2e6,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            rho0: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            lambda: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn history_csv_header() {
        let mut buf = Vec::new();
        let rec = IterationRecord {
            iter: 1,
            objective: 0.5,
            constraint_residual: 0.25,
            delta_w: 1.0,
            beta: 0.1,
        };
        write_history_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,objective,constraint_residual,delta_w,beta"));
        let fields: Vec<f64> = lines.next().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields, vec![1.0, 0.5, 0.25, 1.0, 0.1]);
    }
}
