//! Linear, RBF and polynomial kernels.
//!
//! Kernel width for `rbf`/`poly` is given either explicitly or by one of two
//! data-dependent conventions:
//!
//! * `auto`  : `gamma = 1 / d`
//! * `scale` : `gamma = 1 / (d * Var(X))`, where `Var` is the population
//!   variance of all entries of `X` taken together.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DEGREE: u32 = 3;
pub const DEFAULT_COEF0: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
    #[serde(rename = "poly")]
    Polynomial,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Polynomial => "poly",
        }
    }

    /// Whether evaluation depends on gamma at all.
    pub fn uses_gamma(self) -> bool {
        !matches!(self, KernelKind::Linear)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    Scale,
    Auto,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: Gamma,
    pub degree: u32,
    pub coef0: f64,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self::new(KernelKind::Linear, Gamma::Scale)
    }

    pub fn rbf(gamma: Gamma) -> Self {
        Self::new(KernelKind::Rbf, gamma)
    }

    pub fn polynomial(gamma: Gamma, degree: u32, coef0: f64) -> Self {
        Self {
            kind: KernelKind::Polynomial,
            gamma,
            degree,
            coef0,
        }
    }

    pub fn new(kind: KernelKind, gamma: Gamma) -> Self {
        Self {
            kind,
            gamma,
            degree: DEFAULT_DEGREE,
            coef0: DEFAULT_COEF0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Gamma::Explicit(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "gamma must be > 0, got {g}"
                )));
            }
        }
        if self.degree < 1 {
            return Err(Error::InvalidParameter("degree must be >= 1".into()));
        }
        if !self.coef0.is_finite() {
            return Err(Error::InvalidParameter("coef0 must be finite".into()));
        }
        Ok(())
    }

    /// The same spec with gamma pinned to the value resolved on `x`.
    /// Linear kernels are returned unchanged.
    pub fn resolved(&self, x: &DMatrix<f64>) -> Result<KernelSpec> {
        if !self.kind.uses_gamma() {
            return Ok(*self);
        }
        let g = resolve_gamma(self, x)?;
        Ok(KernelSpec {
            gamma: Gamma::Explicit(g),
            ..*self
        })
    }
}

/// Resolve `scale`/`auto`/explicit gamma against a feature matrix (rows are samples).
pub fn resolve_gamma(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<f64> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::EmptyData(format!("feature matrix is {n}x{d}")));
    }
    match spec.gamma {
        Gamma::Explicit(g) => Ok(g),
        Gamma::Auto => Ok(1.0 / d as f64),
        Gamma::Scale => {
            let count = (n * d) as f64;
            let mean = x.iter().sum::<f64>() / count;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
            if var <= 0.0 || !var.is_finite() {
                return Err(Error::ZeroVariance);
            }
            Ok(1.0 / (d as f64 * var))
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Evaluate `k(x, y)` with an already-resolved gamma.
pub fn eval_kernel(spec: &KernelSpec, gamma: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(eval_unchecked(spec, gamma, x, y))
}

pub(crate) fn eval_unchecked(spec: &KernelSpec, gamma: f64, x: &[f64], y: &[f64]) -> f64 {
    match spec.kind {
        KernelKind::Linear => dot(x, y),
        KernelKind::Rbf => {
            // Accumulate the squared distance directly; expanding it through
            // dot products loses the exact zero on the diagonal.
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * sq).exp()
        }
        KernelKind::Polynomial => (gamma * dot(x, y) + spec.coef0).powi(spec.degree as i32),
    }
}

pub(crate) fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Symmetric Gram matrix over the rows of `x`. Each off-diagonal entry is
/// evaluated once and mirrored.
pub fn gram_matrix(spec: &KernelSpec, gamma: f64, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyData("gram matrix of zero rows".into()));
    }
    let rows = rows_of(x);
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = eval_unchecked(spec, gamma, &rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Kernel values between every query row and every training row, `q x n`.
pub fn cross_kernel(
    spec: &KernelSpec,
    gamma: f64,
    query: &DMatrix<f64>,
    train: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if query.ncols() != train.ncols() {
        return Err(Error::DimensionMismatch {
            expected: train.ncols(),
            found: query.ncols(),
        });
    }
    let q = rows_of(query);
    let t = rows_of(train);
    Ok(DMatrix::from_fn(q.len(), t.len(), |i, j| {
        eval_unchecked(spec, gamma, &q[i], &t[j])
    }))
}

/// Numeric gamma to evaluate with: explicit value when present, otherwise
/// resolved on `x`. Linear kernels get a placeholder of 1.
pub(crate) fn effective_gamma(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<f64> {
    if spec.kind.uses_gamma() {
        resolve_gamma(spec, x)
    } else {
        Ok(1.0)
    }
}
