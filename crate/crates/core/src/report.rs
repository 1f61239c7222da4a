//! JSON run reports. A report carries the resolved configuration and its
//! hash, the tool version, a SHA-256 of every input file, each fitted model
//! as a persisted record, and the command's results. Nothing time-dependent
//! is written, so identical runs produce identical bytes.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::FittedModel;
use crate::notation::format_model;
use crate::persist::encode_fitted;
use crate::pipeline::{PipelineConfig, PipelineResult};
use crate::series::Point;

pub const TOOL_NAME: &str = "carbon-svr";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl InputDigest {
    pub fn of_bytes(path: &str, bytes: &[u8]) -> Self {
        Self {
            path: path.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        }
    }

    pub fn of_file(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::of_bytes(&path.display().to_string(), &bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEntry {
    /// What the model was fitted for, e.g. `factor:oil` or `price:target1`.
    pub role: String,
    pub spec: String,
    pub record_sha256: String,
    /// Text accepted by [`crate::persist::decode_model`].
    pub record: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub models: Vec<ModelEntry>,
    pub warnings: Vec<String>,
    pub results: Value,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Config(format!("cannot serialize: {e}")))
}

impl Report {
    /// The config hash is taken over the compact JSON form of `config`.
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self> {
        let config = to_value(config)?;
        let compact = serde_json::to_string(&config).expect("values serialize");
        Ok(Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            config_sha256: sha256_hex(compact.as_bytes()),
            config,
            inputs: Vec::new(),
            models: Vec::new(),
            warnings: Vec::new(),
            results: Value::Null,
        })
    }

    pub fn add_input(&mut self, digest: InputDigest) {
        self.inputs.push(digest);
    }

    pub fn add_model(&mut self, role: &str, model: &FittedModel, spec: &crate::model::ModelSpec) {
        let record = encode_fitted(model);
        self.models.push(ModelEntry {
            role: role.into(),
            spec: format_model(spec),
            record_sha256: sha256_hex(record.as_bytes()),
            record,
        });
    }

    pub fn set_results<T: Serialize>(&mut self, results: &T) -> Result<()> {
        self.results = to_value(results)?;
        Ok(())
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SeriesOut<'a> {
    name: &'a str,
    unit: &'a str,
    points: &'a [Point],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ScenarioOut<'a> {
    label: &'a str,
    emission_target_kt: f64,
    target_year: i32,
    anchor_weight: f64,
    anchor: &'a Point,
    emission_forecast: SeriesOut<'a>,
    design_columns: &'a [String],
    training_years: &'a [i32],
    price_model: String,
    price_by_year: &'a [(i32, f64)],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct PipelineOut<'a> {
    factor_forecasts: Vec<SeriesOut<'a>>,
    scenarios: Vec<ScenarioOut<'a>>,
    /// Rows `[year, price per scenario...]`, scenarios in config order.
    price_grid: Vec<(i32, Vec<Option<f64>>)>,
}

/// Adds every fitted model of a pipeline run and its forecasts to `report`.
pub fn record_pipeline(
    report: &mut Report,
    config: &PipelineConfig,
    result: &PipelineResult,
) -> Result<()> {
    for ((name, f), fm) in result.factor_forecasts.iter().zip(&config.factors) {
        report.add_model(&format!("factor:{name}"), &f.model, &fm.model);
    }
    for s in &result.scenarios {
        report.add_model(
            &format!("emission:{}", s.scenario.label),
            &s.emission.model,
            &config.emission_model,
        );
        report.add_model(
            &format!("price:{}", s.scenario.label),
            &s.price.model,
            &config.price_model,
        );
    }
    let out = PipelineOut {
        factor_forecasts: result
            .factor_forecasts
            .iter()
            .map(|(name, f)| SeriesOut {
                name,
                unit: &f.forecast.unit,
                points: &f.forecast.points,
            })
            .collect(),
        scenarios: result
            .scenarios
            .iter()
            .map(|s| ScenarioOut {
                label: &s.scenario.label,
                emission_target_kt: s.scenario.emission_target_kt,
                target_year: s.scenario.target_year,
                anchor_weight: s.emission.anchor_weight,
                anchor: &s.emission.anchor,
                emission_forecast: SeriesOut {
                    name: "emission",
                    unit: &s.emission.forecast.unit,
                    points: &s.emission.forecast.points,
                },
                design_columns: &s.design.column_names,
                training_years: &s.design.years[..s.design.n_train],
                price_model: format_model(&config.price_model),
                price_by_year: &s.price.price_by_year,
            })
            .collect(),
        price_grid: result.price_grid(),
    };
    report.set_results(&out)
}

/// `year,price_eur` rows for one scenario.
pub fn price_csv(price_by_year: &[(i32, f64)]) -> String {
    let mut out = String::from("year,price_eur\n");
    for (y, p) in price_by_year {
        out.push_str(&format!("{y},{p}\n"));
    }
    out
}
