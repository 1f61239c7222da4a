//! Flat text records for trained models.
//!
//! A record is a TOML document of top-level keys only (plus arrays), tagged
//! with `format_version` and `model = "svr" | "svc" | "linear"`. Reals are
//! written in shortest round-trip decimal form, so decoding reproduces every
//! stored `f64` bit for bit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineSpec, Expansion, LinearModel};
use crate::error::{Error, Result};
use crate::kernels::{Gamma, KernelSpec};
use crate::model::{FittedModel, Scaler};
use crate::notation::{parse_gamma, parse_kernel_kind};
use crate::svm::{SvcModel, SvrModel, TrainingDiagnostics};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Fitted(FittedModel),
    Svc(SvcModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum GammaField {
    Value(f64),
    Mode(String),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    format_version: u32,
    model: String,

    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<GammaField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    degree: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coef0: Option<f64>,
    #[serde(rename = "C", skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_train: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_features: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    support_indices: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual_coeffs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    support_labels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    support_rows: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaler_mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaler_scale: Option<Vec<f64>>,

    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    duality_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kkt_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regularized: Option<bool>,

    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<BaselineKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    poly_degree: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expansion_degree: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    offsets: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweeps: Option<usize>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn put_kernel(r: &mut Record, k: &KernelSpec) {
    r.kernel = Some(k.kind.name().to_string());
    r.gamma = Some(match k.gamma {
        Gamma::Explicit(g) => GammaField::Value(g),
        Gamma::Scale => GammaField::Mode("scale".into()),
        Gamma::Auto => GammaField::Mode("auto".into()),
    });
    r.degree = Some(k.degree);
    r.coef0 = Some(k.coef0);
}

fn put_diagnostics(r: &mut Record, d: &TrainingDiagnostics) {
    r.objective = Some(d.objective);
    r.duality_gap = Some(d.duality_gap);
    r.kkt_violation = Some(d.kkt_violation);
    r.iterations = Some(d.iterations);
    r.converged = Some(d.converged);
    r.regularized = Some(d.regularized);
}

fn to_text(r: &Record) -> String {
    toml::to_string(r).expect("records contain only finite reals and plain fields")
}

pub fn encode_svr(model: &SvrModel, scaler: Option<&Scaler>) -> String {
    let mut r = Record {
        format_version: FORMAT_VERSION,
        model: "svr".into(),
        ..Record::default()
    };
    put_kernel(&mut r, &model.kernel);
    r.c = Some(model.c);
    r.epsilon = Some(model.epsilon);
    r.bias = Some(model.bias);
    r.n_train = Some(model.n_train);
    r.n_features = Some(model.n_features());
    r.support_indices = Some(model.support_indices.clone());
    r.dual_coeffs = Some(model.dual_coeffs.clone());
    r.support_rows = Some(rows(&model.support_x));
    if let Some(s) = scaler {
        r.scaler_mean = Some(s.mean.clone());
        r.scaler_scale = Some(s.scale.clone());
    }
    put_diagnostics(&mut r, &model.diagnostics);
    to_text(&r)
}

pub fn encode_svc(model: &SvcModel) -> String {
    let mut r = Record {
        format_version: FORMAT_VERSION,
        model: "svc".into(),
        ..Record::default()
    };
    put_kernel(&mut r, &model.kernel);
    r.c = Some(model.c);
    r.bias = Some(model.bias);
    r.n_train = Some(model.n_train);
    r.n_features = Some(model.support_x.ncols());
    r.support_indices = Some(model.support_indices.clone());
    r.dual_coeffs = Some(model.dual_coeffs.clone());
    r.support_labels = Some(model.support_labels.clone());
    r.support_rows = Some(rows(&model.support_x));
    put_diagnostics(&mut r, &model.diagnostics);
    to_text(&r)
}

pub fn encode_linear(model: &LinearModel) -> String {
    let mut r = Record {
        format_version: FORMAT_VERSION,
        model: "linear".into(),
        ..Record::default()
    };
    r.baseline = Some(model.spec.kind);
    r.lambda = Some(model.spec.lambda);
    r.poly_degree = Some(model.spec.degree);
    r.expansion_degree = Some(model.expansion.degree);
    r.offsets = Some(model.expansion.offsets.clone());
    r.coefficients = Some(model.coefficients.clone());
    r.intercept = Some(model.intercept);
    r.sweeps = Some(model.sweeps);
    to_text(&r)
}

pub fn encode_fitted(model: &FittedModel) -> String {
    match model {
        FittedModel::Svr { model, scaler } => encode_svr(model, scaler.as_ref()),
        FittedModel::Linear(m) => encode_linear(m),
    }
}

fn req<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::BadValue(format!("model record is missing '{key}'")))
}

fn finite(values: &[f64], key: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::BadValue(format!(
            "'{key}' contains a non-finite value"
        )))
    }
}

fn take_kernel(r: &mut Record) -> Result<KernelSpec> {
    let kind = parse_kernel_kind(&req(r.kernel.take(), "kernel")?)?;
    let gamma = match req(r.gamma.take(), "gamma")? {
        GammaField::Value(g) if g > 0.0 && g.is_finite() => Gamma::Explicit(g),
        GammaField::Value(_) => return Err(Error::BadValue("gamma must be > 0".into())),
        GammaField::Mode(m) => match parse_gamma(&m)? {
            Gamma::Explicit(_) => {
                return Err(Error::BadValue(
                    "gamma mode must be 'scale' or 'auto'".into(),
                ))
            }
            g => g,
        },
    };
    let spec = KernelSpec {
        kind,
        gamma,
        degree: req(r.degree, "degree")?,
        coef0: req(r.coef0, "coef0")?,
    };
    spec.validate()
        .map_err(|e| Error::BadValue(e.to_string()))?;
    if kind.uses_gamma() && !matches!(gamma, Gamma::Explicit(_)) {
        return Err(Error::BadValue(
            "trained kernels store an explicit gamma".into(),
        ));
    }
    Ok(spec)
}

fn take_diagnostics(r: &Record) -> Result<TrainingDiagnostics> {
    let d = TrainingDiagnostics {
        objective: req(r.objective, "objective")?,
        duality_gap: req(r.duality_gap, "duality_gap")?,
        kkt_violation: req(r.kkt_violation, "kkt_violation")?,
        iterations: req(r.iterations, "iterations")?,
        converged: req(r.converged, "converged")?,
        regularized: req(r.regularized, "regularized")?,
    };
    finite(
        &[d.objective, d.duality_gap, d.kkt_violation],
        "diagnostics",
    )?;
    Ok(d)
}

/// Support rows, dual coefficients and indices with consistent shapes.
fn take_support(r: &mut Record) -> Result<(DMatrix<f64>, Vec<f64>, Vec<usize>, usize)> {
    let d = req(r.n_features, "n_features")?;
    let n_train = req(r.n_train, "n_train")?;
    let support_rows = req(r.support_rows.take(), "support_rows")?;
    let coeffs = req(r.dual_coeffs.take(), "dual_coeffs")?;
    let indices = req(r.support_indices.take(), "support_indices")?;
    if d == 0 || d > 1 << 20 {
        return Err(Error::BadValue("n_features out of range".into()));
    }
    if support_rows.len() != coeffs.len() || indices.len() != coeffs.len() {
        return Err(Error::BadValue(
            "support_rows, dual_coeffs and support_indices differ in length".into(),
        ));
    }
    if support_rows.iter().any(|row| row.len() != d) {
        return Err(Error::BadValue(format!(
            "every support row must have {d} entries"
        )));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) || indices.last().map_or(false, |&i| i >= n_train) {
        return Err(Error::BadValue(
            "support_indices must be increasing and below n_train".into(),
        ));
    }
    finite(&coeffs, "dual_coeffs")?;
    let flat: Vec<f64> = support_rows.into_iter().flatten().collect();
    finite(&flat, "support_rows")?;
    let x = DMatrix::from_row_slice(coeffs.len(), d, &flat);
    Ok((x, coeffs, indices, n_train))
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::BadValue(format!("{key} must be > 0")))
    }
}

fn decode_svr(mut r: Record) -> Result<FittedModel> {
    let kernel = take_kernel(&mut r)?;
    let (support_x, dual_coeffs, support_indices, n_train) = take_support(&mut r)?;
    let epsilon = req(r.epsilon, "epsilon")?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::BadValue("epsilon must be >= 0".into()));
    }
    let bias = req(r.bias, "bias")?;
    finite(&[bias], "bias")?;
    let scaler = match (r.scaler_mean.take(), r.scaler_scale.take()) {
        (None, None) => None,
        (Some(mean), Some(scale)) => {
            if mean.len() != support_x.ncols() || scale.len() != mean.len() {
                return Err(Error::BadValue(
                    "scaler length must equal n_features".into(),
                ));
            }
            finite(&mean, "scaler_mean")?;
            if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::BadValue("scaler_scale entries must be > 0".into()));
            }
            Some(Scaler { mean, scale })
        }
        _ => {
            return Err(Error::BadValue(
                "scaler_mean and scaler_scale go together".into(),
            ))
        }
    };
    let model = SvrModel {
        support_x,
        dual_coeffs,
        support_indices,
        bias,
        kernel,
        c: positive(req(r.c, "C")?, "C")?,
        epsilon,
        n_train,
        diagnostics: take_diagnostics(&r)?,
    };
    Ok(FittedModel::Svr { model, scaler })
}

fn decode_svc(mut r: Record) -> Result<SvcModel> {
    let kernel = take_kernel(&mut r)?;
    let (support_x, dual_coeffs, support_indices, n_train) = take_support(&mut r)?;
    let labels = req(r.support_labels.take(), "support_labels")?;
    if labels.len() != dual_coeffs.len() || labels.iter().any(|l| *l != 1.0 && *l != -1.0) {
        return Err(Error::BadValue(
            "support_labels must be one ±1 label per support row".into(),
        ));
    }
    let bias = req(r.bias, "bias")?;
    finite(&[bias], "bias")?;
    Ok(SvcModel {
        support_x,
        dual_coeffs,
        support_indices,
        support_labels: labels,
        bias,
        kernel,
        c: positive(req(r.c, "C")?, "C")?,
        n_train,
        diagnostics: take_diagnostics(&r)?,
    })
}

fn decode_linear(mut r: Record) -> Result<FittedModel> {
    let spec = BaselineSpec {
        kind: req(r.baseline, "baseline")?,
        lambda: req(r.lambda, "lambda")?,
        degree: req(r.poly_degree, "poly_degree")?,
    };
    spec.validate()
        .map_err(|e| Error::BadValue(e.to_string()))?;
    let degree = req(r.expansion_degree, "expansion_degree")?;
    let offsets = req(r.offsets.take(), "offsets")?;
    if !(1..=16).contains(&degree) || offsets.is_empty() || offsets.len() > 64 {
        return Err(Error::BadValue("expansion out of range".into()));
    }
    finite(&offsets, "offsets")?;
    let expansion = Expansion { degree, offsets };
    let coefficients = req(r.coefficients.take(), "coefficients")?;
    if coefficients.len() != expansion.output_dim() {
        return Err(Error::BadValue(format!(
            "{} coefficients for {} expanded features",
            coefficients.len(),
            expansion.output_dim()
        )));
    }
    finite(&coefficients, "coefficients")?;
    let intercept = req(r.intercept, "intercept")?;
    finite(&[intercept], "intercept")?;
    Ok(FittedModel::Linear(LinearModel {
        spec,
        coefficients,
        intercept,
        expansion,
        sweeps: req(r.sweeps, "sweeps")?,
    }))
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn decode_model(text: &str) -> Result<StoredModel> {
    let r: Record = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    if r.format_version != FORMAT_VERSION {
        return Err(Error::BadValue(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            r.format_version
        )));
    }
    match r.model.as_str() {
        "svr" => decode_svr(r).map(StoredModel::Fitted),
        "svc" => decode_svc(r).map(StoredModel::Svc),
        "linear" => decode_linear(r).map(StoredModel::Fitted),
        other => Err(Error::BadValue(format!("unknown model kind '{other}'"))),
    }
}
