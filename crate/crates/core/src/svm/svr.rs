use nalgebra::{DMatrix, DVector};

use super::{intercept, solve_dual, SolverConfig, SvmHyperParams, TrainingDiagnostics};
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel, effective_gamma, gram_matrix, KernelSpec};
use crate::qp::{Equality, QpProblem};

/// Trained ε-SVR. Predictions are `Σ β_i k(x_i, x) + bias` over the
/// retained support rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub support_x: DMatrix<f64>,
    /// `β_i = α_i - α*_i` for each retained row; all nonzero.
    pub dual_coeffs: Vec<f64>,
    /// Row index of each support vector in the training matrix.
    pub support_indices: Vec<usize>,
    pub bias: f64,
    /// Kernel with gamma resolved to an explicit value (linear kernels keep
    /// their spec unchanged).
    pub kernel: KernelSpec,
    pub c: f64,
    pub epsilon: f64,
    pub n_train: usize,
    pub diagnostics: TrainingDiagnostics,
}

pub fn train_svr(
    x: &DMatrix<f64>,
    y: &[f64],
    hp: &SvmHyperParams,
    cfg: &SolverConfig,
) -> Result<SvrModel> {
    train_svr_weighted(x, y, &vec![1.0; y.len()], hp, cfg)
}

/// ε-SVR where sample `i` has box bound `weights[i] * C`. A weight of `w`
/// is equivalent to repeating the sample `w` times.
pub fn train_svr_weighted(
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    hp: &SvmHyperParams,
    cfg: &SolverConfig,
) -> Result<SvrModel> {
    hp.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 training rows, got {n}"
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::EmptyData("feature matrix has no columns".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite training value".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter(
            "sample weights must be finite and > 0".into(),
        ));
    }

    let kernel = hp.kernel.resolved(x).map_err(|e| match e {
        Error::ZeroVariance => {
            Error::DegenerateData("all training rows identical under gamma='scale'".into())
        }
        other => other,
    })?;
    let gamma = effective_gamma(&kernel, x)?;
    let k = gram_matrix(&kernel, gamma, x)?;

    // θ = [α; α*], F = [[K, -K], [-K, K]], f = [ε - y; ε + y], Σα - Σα* = 0.
    let m = 2 * n;
    let quad = DMatrix::from_fn(m, m, |i, j| {
        let v = k[(i % n, j % n)];
        if (i < n) == (j < n) {
            v
        } else {
            -v
        }
    });
    let linear = DVector::from_fn(m, |i, _| {
        if i < n {
            hp.epsilon - y[i]
        } else {
            hp.epsilon + y[i - n]
        }
    });
    let upper = DVector::from_fn(m, |i, _| hp.c * weights[i % n]);
    let coeffs = DVector::from_fn(m, |i, _| if i < n { 1.0 } else { -1.0 });
    let problem = QpProblem {
        quad,
        linear,
        lower: DVector::zeros(m),
        upper,
        equality: Some(Equality { coeffs, rhs: 0.0 }),
    };

    let y_scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sol = solve_dual(&problem, cfg, y_scale)?;
    let bias = intercept(&problem, &sol.theta);

    let mut support_indices = Vec::new();
    let mut dual_coeffs = Vec::new();
    for i in 0..n {
        let beta = sol.theta[i] - sol.theta[n + i];
        if beta != 0.0 {
            support_indices.push(i);
            dual_coeffs.push(beta);
        }
    }
    let support_x = x.select_rows(&support_indices);

    Ok(SvrModel {
        support_x,
        dual_coeffs,
        support_indices,
        bias,
        kernel,
        c: hp.c,
        epsilon: hp.epsilon,
        n_train: n,
        diagnostics: TrainingDiagnostics::from(&sol),
    })
}

impl SvrModel {
    pub fn n_features(&self) -> usize {
        self.support_x.ncols()
    }

    pub fn predict(&self, query: &DMatrix<f64>) -> Result<Vec<f64>> {
        if self.dual_coeffs.is_empty() {
            if query.ncols() != self.support_x.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: self.support_x.ncols(),
                    found: query.ncols(),
                });
            }
            return Ok(vec![self.bias; query.nrows()]);
        }
        let gamma = self.numeric_gamma();
        let cross = cross_kernel(&self.kernel, gamma, query, &self.support_x)?;
        let beta = DVector::from_column_slice(&self.dual_coeffs);
        Ok((cross * beta).iter().map(|v| v + self.bias).collect())
    }

    fn numeric_gamma(&self) -> f64 {
        match self.kernel.gamma {
            crate::kernels::Gamma::Explicit(g) => g,
            _ => 1.0,
        }
    }
}
