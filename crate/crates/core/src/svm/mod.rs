//! Soft-margin classification and ε-insensitive regression, both trained by
//! reducing the dual to a [`QpProblem`](crate::qp::QpProblem).

mod svc;
mod svr;

pub use svc::{train_svc, SvcModel};
pub use svr::{train_svr, train_svr_weighted, SvrModel};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::qp::{QpConfig, QpProblem, QpSolution, DEFAULT_JITTER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmHyperParams {
    pub c: f64,
    /// Tube half-width; ignored by the classifier.
    pub epsilon: f64,
    pub kernel: KernelSpec,
}

impl SvmHyperParams {
    pub fn new(c: f64, epsilon: f64, kernel: KernelSpec) -> Self {
        Self { c, epsilon, kernel }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "C must be > 0, got {}",
                self.c
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        self.kernel.validate()
    }
}

/// Solver settings for SVM training.
///
/// `tol` is relative: the KKT violation is driven below
/// `tol * max(1, max|y|)` (targets' units) and the duality gap below that
/// times the total width of the dual box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub jitter: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: None,
            jitter: DEFAULT_JITTER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingDiagnostics {
    pub objective: f64,
    pub duality_gap: f64,
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub regularized: bool,
}

impl From<&QpSolution> for TrainingDiagnostics {
    fn from(s: &QpSolution) -> Self {
        Self {
            objective: s.objective,
            duality_gap: s.duality_gap,
            kkt_violation: s.kkt_violation,
            iterations: s.iterations,
            converged: s.converged,
            regularized: s.regularized,
        }
    }
}

pub(crate) fn solve_dual(
    problem: &QpProblem,
    cfg: &SolverConfig,
    target_scale: f64,
) -> Result<QpSolution> {
    let kkt_tol = cfg.tol * target_scale.max(1.0);
    let width: f64 = problem
        .upper
        .iter()
        .zip(problem.lower.iter())
        .map(|(u, l)| u - l)
        .sum();
    let qp_cfg = QpConfig {
        tol: kkt_tol * width.max(1.0),
        kkt_tol: Some(kkt_tol),
        max_iter: cfg.max_iter,
        jitter: cfg.jitter,
        record_trace: false,
    };
    let sol = crate::qp::solve_qp(problem, &qp_cfg)?;
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            duality_gap: sol.duality_gap,
        });
    }
    Ok(sol)
}

/// Intercept from a solved dual. `b = -λ` where `λ` is the equality
/// multiplier; it is averaged over strictly free variables, and when there
/// are none it is the midpoint of the interval the KKT conditions allow.
pub(crate) fn intercept(problem: &QpProblem, theta: &DVector<f64>) -> f64 {
    let grad = &problem.quad * theta + &problem.linear;
    let coeffs = &problem
        .equality
        .as_ref()
        .expect("SVM duals carry an equality")
        .coeffs;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lam_lo = f64::NEG_INFINITY;
    let mut lam_hi = f64::INFINITY;
    for i in 0..theta.len() {
        let (a, t) = (coeffs[i], theta[i]);
        let z = grad[i] / a;
        let (l, u) = (problem.lower[i], problem.upper[i]);
        if t > l && t < u {
            free_sum += z;
            free_count += 1;
            continue;
        }
        let (can_up, can_low) = if a > 0.0 {
            (t < u, t > l)
        } else {
            (t > l, t < u)
        };
        if can_up {
            lam_hi = lam_hi.min(z);
        }
        if can_low {
            lam_lo = lam_lo.max(z);
        }
    }
    let lambda = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        match (lam_lo.is_finite(), lam_hi.is_finite()) {
            (true, true) => 0.5 * (lam_lo + lam_hi),
            (true, false) => lam_lo,
            (false, true) => lam_hi,
            (false, false) => 0.0,
        }
    };
    -lambda
}
