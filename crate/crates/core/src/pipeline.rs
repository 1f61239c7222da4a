//! Two-stage scenario forecast.
//!
//! Stage one fits a univariate `year -> value` model per market factor and
//! extrapolates it to the horizon. Emissions get one fit per scenario: the
//! scenario's target enters the training set as an extra pseudo-observation
//! (the anchor) at the target year. Stage two joins the observed-plus-
//! forecast factors on year, trains the carbon-price model on the years
//! with an observed price and predicts the horizon years, once per scenario.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fit_model, fit_model_weighted, FitOptions, FittedModel, ModelSpec};
use crate::notation::format_model;
use crate::selection::{grid_search, CvReport, Execution, FoldPlan, GridSpec};
use crate::series::{Point, Provenance, ScenarioSpec, TimeSeries};

pub const MIN_FACTOR_POINTS: usize = 3;

/// Weight of the target anchor relative to one observed year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorWeight {
    /// As many ordinary samples as there are observed years.
    ObservedCount,
    Fixed(f64),
}

impl AnchorWeight {
    pub fn resolve(self, observed: usize) -> Result<f64> {
        let w = match self {
            AnchorWeight::ObservedCount => observed as f64,
            AnchorWeight::Fixed(w) => w,
        };
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "anchor weight must be > 0, got {w}"
            )));
        }
        Ok(w)
    }
}

impl Default for AnchorWeight {
    fn default() -> Self {
        AnchorWeight::ObservedCount
    }
}

fn year_matrix(years: &[i32]) -> DMatrix<f64> {
    DMatrix::from_iterator(years.len(), 1, years.iter().map(|&y| f64::from(y)))
}

fn forecast_points(model: &FittedModel, from: i32, to: i32) -> Result<Vec<Point>> {
    if from > to {
        return Ok(Vec::new());
    }
    let years: Vec<i32> = (from..=to).collect();
    let pred = model.predict(&year_matrix(&years))?;
    Ok(years
        .into_iter()
        .zip(pred)
        .map(|(year, value)| Point {
            year,
            value,
            provenance: Provenance::Forecast,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorForecast {
    pub model: FittedModel,
    /// Forecast years only, `last_observed + 1 ..= horizon_end`.
    pub forecast: TimeSeries,
}

impl FactorForecast {
    /// Observed points unchanged, followed by the forecast.
    pub fn stitched(&self, observed: &TimeSeries) -> Result<TimeSeries> {
        observed.stitched(&self.forecast)
    }
}

fn observed_only(series: &TimeSeries) -> Result<(Vec<i32>, Vec<f64>)> {
    let obs = series.observed_points();
    if obs.len() < MIN_FACTOR_POINTS {
        return Err(Error::TooFewPoints {
            name: series.name.clone(),
            found: obs.len(),
            needed: MIN_FACTOR_POINTS,
        });
    }
    Ok((
        obs.iter().map(|p| p.year).collect(),
        obs.iter().map(|p| p.value).collect(),
    ))
}

/// Fits `spec` on the observed years (raw year values as the only feature,
/// standardized only when `opts.standardize`) and forecasts the years after
/// the last observation through `horizon_end`.
pub fn forecast_factor(
    series: &TimeSeries,
    spec: &ModelSpec,
    horizon_end: i32,
    opts: &FitOptions,
) -> Result<FactorForecast> {
    let (years, values) = observed_only(series)?;
    let last = *years.last().expect("at least three points");
    if horizon_end <= last {
        return Err(Error::InvalidParameter(format!(
            "horizon end {horizon_end} must be after the last observed year {last}"
        )));
    }
    let model = fit_model(spec, &year_matrix(&years), &values, opts)?;
    let points = forecast_points(&model, last + 1, horizon_end)?;
    let forecast = TimeSeries {
        name: series.name.clone(),
        unit: series.unit.clone(),
        points,
    };
    Ok(FactorForecast { model, forecast })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionScenario {
    pub scenario: ScenarioSpec,
    pub anchor: Point,
    pub anchor_weight: f64,
    pub model: FittedModel,
    /// Forecast years `last_observed + 1 ..= horizon_end`.
    pub forecast: TimeSeries,
}

/// Forecast of `series` conditioned on the scenario's target through a
/// weighted anchor observation at the target year.
pub fn build_emission_scenario(
    series: &TimeSeries,
    scenario: &ScenarioSpec,
    spec: &ModelSpec,
    weight: AnchorWeight,
    opts: &FitOptions,
) -> Result<EmissionScenario> {
    scenario.validate()?;
    let (mut years, mut values) = observed_only(series)?;
    let last = *years.last().expect("at least three points");
    if scenario.target_year <= last {
        return Err(Error::TargetInsidePast {
            target_year: scenario.target_year,
            last_observed: last,
        });
    }
    let w = weight.resolve(years.len())?;
    let mut weights = vec![1.0; years.len()];
    years.push(scenario.target_year);
    values.push(scenario.emission_target_kt);
    weights.push(w);

    let model = fit_model_weighted(spec, &year_matrix(&years), &values, &weights, opts)?;
    let points = forecast_points(&model, last + 1, scenario.horizon_end.max(last + 1))?;
    let forecast = TimeSeries {
        name: series.name.clone(),
        unit: series.unit.clone(),
        points,
    };
    let anchor = Point {
        year: scenario.target_year,
        value: scenario.emission_target_kt,
        provenance: Provenance::TargetAnchor,
    };
    Ok(EmissionScenario {
        scenario: scenario.clone(),
        anchor,
        anchor_weight: w,
        model,
        forecast,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub years: Vec<i32>,
    pub column_names: Vec<String>,
    /// Row-major, one row per entry of `years`.
    pub rows: Vec<Vec<f64>>,
    /// Observed price for the first `n_train` years.
    pub target: Vec<f64>,
    pub n_train: usize,
}

impl DesignMatrix {
    pub fn train_x(&self) -> DMatrix<f64> {
        let d = self.column_names.len();
        DMatrix::from_fn(self.n_train, d, |i, j| self.rows[i][j])
    }

    pub fn query_x(&self) -> DMatrix<f64> {
        let d = self.column_names.len();
        DMatrix::from_fn(self.years.len() - self.n_train, d, |i, j| {
            self.rows[self.n_train + i][j]
        })
    }

    pub fn query_years(&self) -> &[i32] {
        &self.years[self.n_train..]
    }
}

/// Joins the factors on year. Training rows are the observed price years;
/// query rows are `horizon.0 ..= horizon.1`, which must start after them.
pub fn assemble_design(
    factors: &[TimeSeries],
    price: &TimeSeries,
    horizon: (i32, i32),
) -> Result<DesignMatrix> {
    if factors.is_empty() {
        return Err(Error::EmptyData("no factor series".into()));
    }
    let obs = price.observed_points();
    if obs.is_empty() {
        return Err(Error::EmptyData(format!(
            "price series '{}' has no observed points",
            price.name
        )));
    }
    let last_price = obs.last().expect("non-empty").year;
    if horizon.0 <= last_price || horizon.0 > horizon.1 {
        return Err(Error::InvalidParameter(format!(
            "horizon {}-{} must start after the last observed price year {last_price}",
            horizon.0, horizon.1
        )));
    }
    let years: Vec<i32> = obs
        .iter()
        .map(|p| p.year)
        .chain(horizon.0..=horizon.1)
        .collect();

    let mut gaps = Vec::new();
    let mut rows = vec![Vec::with_capacity(factors.len()); years.len()];
    for f in factors {
        for (row, &year) in rows.iter_mut().zip(&years) {
            match f.value_at(year) {
                Some(v) => row.push(v),
                None => gaps.push((f.name.clone(), year)),
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::YearGap(gaps));
    }
    Ok(DesignMatrix {
        years,
        column_names: factors.iter().map(|f| f.name.clone()).collect(),
        rows,
        target: obs.iter().map(|p| p.value).collect(),
        n_train: obs.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceForecast {
    pub model: FittedModel,
    pub price_by_year: Vec<(i32, f64)>,
}

pub fn forecast_price(
    design: &DesignMatrix,
    spec: &ModelSpec,
    opts: &FitOptions,
) -> Result<PriceForecast> {
    let model = fit_model(spec, &design.train_x(), &design.target, opts)?;
    let pred = model.predict(&design.query_x())?;
    Ok(PriceForecast {
        model,
        price_by_year: design.query_years().iter().copied().zip(pred).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub name: String,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Non-emission factors, in design-matrix column order.
    pub factors: Vec<FactorModel>,
    pub emission_model: ModelSpec,
    pub price_model: ModelSpec,
    pub scenarios: Vec<ScenarioSpec>,
    pub anchor_weight: AnchorWeight,
    pub fit: FitOptions,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("at least one scenario is required".into()));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            if self.scenarios[..i].iter().any(|o| o.label == s.label) {
                return Err(Error::Config(format!(
                    "duplicate scenario label '{}'",
                    s.label
                )));
            }
        }
        for f in &self.factors {
            f.model.validate()?;
        }
        self.emission_model.validate()?;
        self.price_model.validate()
    }

    pub fn horizon_end(&self) -> i32 {
        self.scenarios
            .iter()
            .map(|s| s.horizon_end.max(s.target_year))
            .max()
            .expect("validated non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineInputs {
    /// One series per configured factor, same order and names.
    pub factors: Vec<TimeSeries>,
    pub emission: TimeSeries,
    pub price: TimeSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioForecast {
    pub scenario: ScenarioSpec,
    pub emission: EmissionScenario,
    pub design: DesignMatrix,
    pub price: PriceForecast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub factor_forecasts: Vec<(String, FactorForecast)>,
    pub scenarios: Vec<ScenarioForecast>,
}

impl PipelineResult {
    /// `(year, price per scenario)` rows over the union of horizon years;
    /// `None` where a scenario's horizon does not include the year.
    pub fn price_grid(&self) -> Vec<(i32, Vec<Option<f64>>)> {
        let mut years: Vec<i32> = self
            .scenarios
            .iter()
            .flat_map(|s| s.price.price_by_year.iter().map(|(y, _)| *y))
            .collect();
        years.sort_unstable();
        years.dedup();
        years
            .into_iter()
            .map(|y| {
                let row = self
                    .scenarios
                    .iter()
                    .map(|s| {
                        s.price
                            .price_by_year
                            .iter()
                            .find(|(py, _)| *py == y)
                            .map(|(_, p)| *p)
                    })
                    .collect();
                (y, row)
            })
            .collect()
    }
}

pub fn run_pipeline(config: &PipelineConfig, inputs: &PipelineInputs) -> Result<PipelineResult> {
    config.validate()?;
    if inputs.factors.len() != config.factors.len() {
        return Err(Error::DimensionMismatch {
            expected: config.factors.len(),
            found: inputs.factors.len(),
        });
    }
    let horizon_end = config.horizon_end();
    let opts = &config.fit;

    let forecasts: Vec<FactorForecast> = config
        .factors
        .par_iter()
        .zip(inputs.factors.par_iter())
        .map(|(fm, series)| forecast_factor(series, &fm.model, horizon_end, opts))
        .collect::<Result<_>>()?;
    let stitched: Vec<TimeSeries> = forecasts
        .iter()
        .zip(&inputs.factors)
        .zip(&config.factors)
        .map(|((f, s), fm)| {
            let mut t = f.stitched(s)?;
            t.name = fm.name.clone();
            Ok(t)
        })
        .collect::<Result<_>>()?;

    let scenarios: Vec<ScenarioForecast> = config
        .scenarios
        .par_iter()
        .map(|sc| {
            let mut horizon_scenario = sc.clone();
            horizon_scenario.horizon_end = horizon_end;
            let mut emission = build_emission_scenario(
                &inputs.emission,
                &horizon_scenario,
                &config.emission_model,
                config.anchor_weight,
                opts,
            )?;
            emission.scenario = sc.clone();
            let mut em_series = inputs.emission.stitched(&emission.forecast)?;
            em_series.name = "emission".into();
            let mut columns = stitched.clone();
            columns.push(em_series);
            let design =
                assemble_design(&columns, &inputs.price, (sc.horizon_start, sc.horizon_end))?;
            let price = forecast_price(&design, &config.price_model, opts)?;
            Ok(ScenarioForecast {
                scenario: sc.clone(),
                emission,
                design,
                price,
            })
        })
        .collect::<Result<_>>()?;

    let factor_forecasts = config
        .factors
        .iter()
        .map(|f| f.name.clone())
        .zip(forecasts)
        .collect();
    Ok(PipelineResult {
        factor_forecasts,
        scenarios,
    })
}

/// Candidate grids for the model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFamilies {
    pub svr_grid: Vec<ModelSpec>,
    pub lasso_lambdas: Vec<f64>,
    pub ridge_lambdas: Vec<f64>,
    pub poly_degree: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub family: String,
    pub best_model: Option<String>,
    /// `-inf` when every candidate failed.
    pub best_score: f64,
    pub report: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<FamilyResult>,
}

impl ComparisonTable {
    pub fn score(&self, family: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.family == family)
            .map(|r| r.best_score)
    }
}

pub const FAMILIES: [&str; 5] = ["svr_grid", "ols", "lasso_grid", "ridge_grid", "polynomial"];

/// Best cross-validated negative MSE per family on `(x, y)` under `plan`.
pub fn compare_models(
    x: &DMatrix<f64>,
    y: &[f64],
    families: &ComparisonFamilies,
    plan: &FoldPlan,
    opts: &FitOptions,
) -> Result<ComparisonTable> {
    use crate::baselines::BaselineSpec;
    if x.nrows() < 3 {
        return Err(Error::TooFewPoints {
            name: "comparison data".into(),
            found: x.nrows(),
            needed: 3,
        });
    }
    let grids: Vec<(&str, Vec<ModelSpec>)> = vec![
        ("svr_grid", families.svr_grid.clone()),
        ("ols", vec![BaselineSpec::ols().into()]),
        (
            "lasso_grid",
            families
                .lasso_lambdas
                .iter()
                .map(|&l| BaselineSpec::lasso(l).into())
                .collect(),
        ),
        (
            "ridge_grid",
            families
                .ridge_lambdas
                .iter()
                .map(|&l| BaselineSpec::ridge(l).into())
                .collect(),
        ),
        (
            "polynomial",
            vec![BaselineSpec::polynomial(families.poly_degree).into()],
        ),
    ];
    let rows = grids
        .into_iter()
        .map(|(family, cands)| {
            let report = grid_search(
                &GridSpec::new(cands)?,
                x,
                y,
                plan,
                opts,
                Execution::Parallel,
            )?;
            let best = report.best();
            Ok(FamilyResult {
                family: family.to_string(),
                best_model: best.map(|b| format_model(&b.spec)),
                best_score: best.map_or(f64::NEG_INFINITY, |b| b.mean_score),
                report,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonTable { rows })
}

/// Comparison on a univariate `year -> value` series.
pub fn compare_series(
    series: &TimeSeries,
    families: &ComparisonFamilies,
    plan: &FoldPlan,
    opts: &FitOptions,
) -> Result<ComparisonTable> {
    let (years, values) = observed_only(series)?;
    compare_models(&year_matrix(&years), &values, families, plan, opts)
}
