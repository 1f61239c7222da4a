use nalgebra::{DMatrix, DVector};

use super::{intercept, solve_dual, SolverConfig, SvmHyperParams, TrainingDiagnostics};
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel, effective_gamma, gram_matrix, Gamma, KernelSpec};
use crate::qp::{Equality, QpProblem};

/// Trained soft-margin classifier; the decision function is
/// `Σ α_i y_i k(x_i, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvcModel {
    pub support_x: DMatrix<f64>,
    /// `α_i y_i` for each retained row.
    pub dual_coeffs: Vec<f64>,
    pub support_indices: Vec<usize>,
    pub support_labels: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
    pub n_train: usize,
    pub diagnostics: TrainingDiagnostics,
}

pub fn train_svc(
    x: &DMatrix<f64>,
    labels: &[f64],
    hp: &SvmHyperParams,
    cfg: &SolverConfig,
) -> Result<SvcModel> {
    hp.validate()?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 training rows, got {n}"
        )));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
        return Err(Error::InvalidParameter("labels must be -1 or +1".into()));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite training value".into()));
    }

    let kernel = hp.kernel.resolved(x).map_err(|e| match e {
        Error::ZeroVariance => {
            Error::DegenerateData("all training rows identical under gamma='scale'".into())
        }
        other => other,
    })?;
    let gamma = effective_gamma(&kernel, x)?;
    let k = gram_matrix(&kernel, gamma, x)?;

    let quad = DMatrix::from_fn(n, n, |i, j| labels[i] * labels[j] * k[(i, j)]);
    let problem = QpProblem {
        quad,
        linear: DVector::from_element(n, -1.0),
        lower: DVector::zeros(n),
        upper: DVector::from_element(n, hp.c),
        equality: Some(Equality {
            coeffs: DVector::from_column_slice(labels),
            rhs: 0.0,
        }),
    };
    let sol = solve_dual(&problem, cfg, 1.0)?;
    let bias = intercept(&problem, &sol.theta);

    let support_indices: Vec<usize> = (0..n).filter(|&i| sol.theta[i] != 0.0).collect();
    let dual_coeffs = support_indices
        .iter()
        .map(|&i| sol.theta[i] * labels[i])
        .collect();
    let support_labels = support_indices.iter().map(|&i| labels[i]).collect();

    Ok(SvcModel {
        support_x: x.select_rows(&support_indices),
        dual_coeffs,
        support_indices,
        support_labels,
        bias,
        kernel,
        c: hp.c,
        n_train: n,
        diagnostics: TrainingDiagnostics::from(&sol),
    })
}

impl SvcModel {
    pub fn decision_function(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.support_x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.support_x.ncols(),
                found: x.len(),
            });
        }
        let query = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.decision_batch(&query)?[0])
    }

    pub fn decision_batch(&self, query: &DMatrix<f64>) -> Result<Vec<f64>> {
        let gamma = match self.kernel.gamma {
            Gamma::Explicit(g) => g,
            _ => 1.0,
        };
        let cross = cross_kernel(&self.kernel, gamma, query, &self.support_x)?;
        let coeffs = DVector::from_column_slice(&self.dual_coeffs);
        Ok((cross * coeffs).iter().map(|v| v + self.bias).collect())
    }

    pub fn predict(&self, query: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self
            .decision_batch(query)?
            .into_iter()
            .map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
            .collect())
    }

    /// `||w||` in feature space, `sqrt(Σ_ij c_i c_j k(x_i, x_j))`.
    pub fn weight_norm(&self) -> f64 {
        let gamma = match self.kernel.gamma {
            Gamma::Explicit(g) => g,
            _ => 1.0,
        };
        let k = match gram_matrix(&self.kernel, gamma, &self.support_x) {
            Ok(k) => k,
            Err(_) => return 0.0,
        };
        let c = DVector::from_column_slice(&self.dual_coeffs);
        c.dot(&(k * &c)).max(0.0).sqrt()
    }

    /// Geometric margin `1 / ||w||`.
    pub fn margin(&self) -> f64 {
        1.0 / self.weight_norm()
    }
}
