//! One fit/predict surface over SVR and the linear baselines.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_baseline, BaselineSpec, LinearModel};
use crate::error::{Error, Result};
use crate::svm::{train_svr_weighted, SolverConfig, SvmHyperParams, SvrModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Svr(SvmHyperParams),
    Baseline(BaselineSpec),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Svr(hp) => hp.validate(),
            ModelSpec::Baseline(b) => b.validate(),
        }
    }
}

impl From<SvmHyperParams> for ModelSpec {
    fn from(hp: SvmHyperParams) -> Self {
        ModelSpec::Svr(hp)
    }
}

impl From<BaselineSpec> for ModelSpec {
    fn from(b: BaselineSpec) -> Self {
        ModelSpec::Baseline(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Standardize feature columns (training mean / population std) before
    /// an SVR sees them. Baselines standardize internally regardless.
    pub standardize: bool,
    pub solver: SolverConfig,
}

/// Per-column affine map fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let mean: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).mean()).collect();
        let scale = (0..x.ncols())
            .map(|j| {
                let var = x
                    .column(j)
                    .iter()
                    .map(|v| (v - mean[j]).powi(2))
                    .sum::<f64>()
                    / n;
                // Constant columns pass through centered but unscaled.
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.mean[j]) / self.scale[j]
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Svr {
        model: SvrModel,
        scaler: Option<Scaler>,
    },
    Linear(LinearModel),
}

impl FittedModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        match self {
            FittedModel::Svr {
                model,
                scaler: Some(s),
            } => model.predict(&s.apply(x)?),
            FittedModel::Svr {
                model,
                scaler: None,
            } => model.predict(x),
            FittedModel::Linear(m) => m.predict(x),
        }
    }
}

pub fn fit_model(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    match spec {
        ModelSpec::Svr(_) => fit_model_weighted(spec, x, y, &vec![1.0; y.len()], opts),
        ModelSpec::Baseline(b) => Ok(FittedModel::Linear(fit_baseline(b, x, y)?)),
    }
}

/// Like [`fit_model`] with per-sample weights scaling each SVR box bound.
/// Baselines only accept unit weights.
pub fn fit_model_weighted(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    opts: &FitOptions,
) -> Result<FittedModel> {
    match spec {
        ModelSpec::Svr(hp) => {
            let scaler = opts.standardize.then(|| Scaler::fit(x));
            let model = match &scaler {
                Some(s) => train_svr_weighted(&s.apply(x)?, y, weights, hp, &opts.solver)?,
                None => train_svr_weighted(x, y, weights, hp, &opts.solver)?,
            };
            Ok(FittedModel::Svr { model, scaler })
        }
        ModelSpec::Baseline(b) => {
            if weights.iter().any(|w| *w != 1.0) {
                return Err(Error::InvalidParameter(
                    "baseline models do not take sample weights".into(),
                ));
            }
            Ok(FittedModel::Linear(fit_baseline(b, x, y)?))
        }
    }
}
