//! Yearly series and scenario files.
//!
//! Series CSV: UTF-8, LF or CRLF, optional `# unit: <text>` line (other
//! `#` lines are allowed before the header and ignored), then the header
//! `year,value` and one row per year. Rows may come in any order; the
//! loaded series is sorted by year.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Forecast,
    TargetAnchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub year: i32,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    pub unit: String,
    pub points: Vec<Point>,
}

impl TimeSeries {
    /// Observed series from `(year, value)` pairs; sorts and validates.
    pub fn observed(name: &str, unit: &str, pairs: &[(i32, f64)]) -> Result<Self> {
        let mut points: Vec<Point> = pairs
            .iter()
            .map(|&(year, value)| Point {
                year,
                value,
                provenance: Provenance::Observed,
            })
            .collect();
        points.sort_by_key(|p| p.year);
        let s = Self {
            name: name.to_string(),
            unit: unit.to_string(),
            points,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.points.windows(2).enumerate() {
            if w[0].year >= w[1].year {
                return Err(Error::DuplicateYear {
                    line: i + 2,
                    year: w[1].year,
                });
            }
        }
        if let Some(i) = self.points.iter().position(|p| !p.value.is_finite()) {
            return Err(Error::NonFinite { line: i + 1 });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn years(&self) -> Vec<i32> {
        self.points.iter().map(|p| p.year).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn observed_points(&self) -> Vec<Point> {
        self.points
            .iter()
            .copied()
            .filter(|p| p.provenance == Provenance::Observed)
            .collect()
    }

    pub fn last_year(&self) -> Option<i32> {
        self.points.last().map(|p| p.year)
    }

    pub fn value_at(&self, year: i32) -> Option<f64> {
        self.points
            .binary_search_by_key(&year, |p| p.year)
            .ok()
            .map(|i| self.points[i].value)
    }

    /// This series followed by `later`, whose years must all come after.
    pub fn stitched(&self, later: &TimeSeries) -> Result<TimeSeries> {
        let mut out = self.clone();
        out.points.extend(later.points.iter().copied());
        out.validate()?;
        Ok(out)
    }
}

pub fn parse_series_csv(name: &str, text: &str) -> Result<TimeSeries> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut unit = String::new();
    let mut offset = 0usize;
    let mut rest = text;
    // Leading comment lines; the csv reader sees everything after them.
    while rest.starts_with('#') || rest.starts_with("\r\n") || rest.starts_with('\n') {
        let end = rest.find('\n').map_or(rest.len(), |i| i + 1);
        let line = rest[..end].trim_end_matches(['\r', '\n']);
        if let Some(u) = line
            .strip_prefix('#')
            .map(str::trim)
            .and_then(|l| l.strip_prefix("unit:"))
        {
            unit = u.trim().to_string();
        }
        offset += 1;
        rest = &rest[end..];
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(rest.as_bytes());
    let header_line = offset + 1;
    let headers = reader.headers().map_err(|e| csv_error(e, offset))?.clone();
    if headers.len() != 2 || &headers[0] != "year" || &headers[1] != "value" {
        return Err(Error::Parse {
            line: header_line,
            column: 1,
            message: "expected header 'year,value'".into(),
        });
    }

    let mut points = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, offset))?;
        let line = record.position().map_or(0, |p| p.line() as usize) + offset;
        let year_text = &record[0];
        let value_text = &record[1];
        if year_text.is_empty() {
            return Err(Error::Parse {
                line,
                column: 1,
                message: "empty year".into(),
            });
        }
        if value_text.is_empty() {
            return Err(Error::Parse {
                line,
                column: 2,
                message: "empty value".into(),
            });
        }
        let year: i32 = year_text.parse().map_err(|_| Error::Parse {
            line,
            column: 1,
            message: format!("year '{year_text}' is not an integer"),
        })?;
        let value: f64 = value_text.parse().map_err(|_| Error::Parse {
            line,
            column: 2,
            message: format!("value '{value_text}' is not a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFinite { line });
        }
        if !seen.insert(year) {
            return Err(Error::DuplicateYear { line, year });
        }
        points.push(Point {
            year,
            value,
            provenance: Provenance::Observed,
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyData(format!("series '{name}' has no rows")));
    }
    points.sort_by_key(|p| p.year);
    Ok(TimeSeries {
        name: name.to_string(),
        unit,
        points,
    })
}

fn csv_error(e: csv::Error, offset: usize) -> Error {
    let line = e
        .position()
        .map_or(offset + 1, |p| p.line() as usize + offset);
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => {
            format!("expected {expected_len} fields, found {len}")
        }
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => e.to_string(),
    };
    Error::Parse {
        line,
        column: 1,
        message,
    }
}

/// Loads a series named after the file stem.
pub fn load_series(path: &Path) -> Result<TimeSeries> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
        line: bytes[..e.valid_up_to()]
            .iter()
            .filter(|b| **b == b'\n')
            .count()
            + 1,
        column: 1,
        message: "invalid UTF-8".into(),
    })?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series");
    parse_series_csv(name, text)
}

/// CSV text in the loader's format; reals use shortest round-trip form.
pub fn series_to_csv(series: &TimeSeries) -> String {
    let mut out = String::new();
    if !series.unit.is_empty() {
        out.push_str(&format!("# unit: {}\n", series.unit));
    }
    out.push_str("year,value\n");
    for p in &series.points {
        out.push_str(&format!("{},{}\n", p.year, p.value));
    }
    out
}

pub const DEFAULT_TARGET_YEAR: i32 = 2030;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub label: String,
    #[serde(rename = "emission_target_2030_kt")]
    pub emission_target_kt: f64,
    pub horizon_start: i32,
    pub horizon_end: i32,
    /// Year the emission target applies to.
    #[serde(default = "default_target_year")]
    pub target_year: i32,
}

fn default_target_year() -> i32 {
    DEFAULT_TARGET_YEAR
}

impl ScenarioSpec {
    pub fn new(label: &str, emission_target_kt: f64, horizon_start: i32, horizon_end: i32) -> Self {
        Self {
            label: label.to_string(),
            emission_target_kt,
            horizon_start,
            horizon_end,
            target_year: DEFAULT_TARGET_YEAR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let label_ok = !self.label.is_empty()
            && self.label.len() <= 64
            && self
                .label
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            && !self.label.starts_with('.');
        if !label_ok {
            return Err(Error::Config(format!(
                "scenario label '{}' must be 1-64 characters of [A-Za-z0-9_.-] (it names an output file)",
                self.label
            )));
        }
        if !(self.emission_target_kt > 0.0 && self.emission_target_kt.is_finite()) {
            return Err(Error::Config("emission_target_2030_kt must be > 0".into()));
        }
        if self.horizon_start > self.horizon_end {
            return Err(Error::Config("horizon_start must be <= horizon_end".into()));
        }
        if self.horizon_end - self.horizon_start > 1000 {
            return Err(Error::Config("horizon longer than 1000 years".into()));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioList {
    scenario: Vec<ScenarioSpec>,
}

/// A single top-level scenario table, or several under `[[scenario]]`.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioSpec>> {
    let value: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let list = if value.contains_key("scenario") {
        toml::Value::Table(value)
            .try_into::<ScenarioList>()
            .map_err(|e| Error::Config(e.message().to_string()))?
            .scenario
    } else {
        vec![toml::Value::Table(value)
            .try_into::<ScenarioSpec>()
            .map_err(|e| Error::Config(e.message().to_string()))?]
    };
    if list.is_empty() {
        return Err(Error::Config("no scenarios defined".into()));
    }
    for s in &list {
        s.validate()?;
    }
    for (i, s) in list.iter().enumerate() {
        if list[..i].iter().any(|o| o.label == s.label) {
            return Err(Error::Config(format!(
                "duplicate scenario label '{}'",
                s.label
            )));
        }
    }
    Ok(list)
}

pub fn load_scenarios(path: &Path) -> Result<Vec<ScenarioSpec>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenarios(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_file() {
        let s = parse_series_csv("x", "year,value\n2020,50\n2021,60").unwrap();
        assert_eq!(s.years(), vec![2020, 2021]);
        assert_eq!(s.values(), vec![50.0, 60.0]);
        assert_eq!(s.unit, "");
    }

    #[test]
    fn unit_line_crlf_and_sorting() {
        let s = parse_series_csv(
            "oil",
            "# unit: EUR/bbl\r\nyear,value\r\n2021,1.5\r\n2019, 2\r\n",
        )
        .unwrap();
        assert_eq!(s.unit, "EUR/bbl");
        assert_eq!(s.years(), vec![2019, 2021]);
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        assert_eq!(
            parse_series_csv("x", "year,value\n2020,50\n2020,51\n"),
            Err(Error::DuplicateYear {
                line: 3,
                year: 2020
            })
        );
        assert_eq!(
            parse_series_csv("x", "# unit: t\nyear,value\n2020,inf\n"),
            Err(Error::NonFinite { line: 3 })
        );
        assert!(matches!(
            parse_series_csv("x", "year,value\n2020,\n"),
            Err(Error::Parse {
                line: 2,
                column: 2,
                ..
            })
        ));
        assert!(matches!(
            parse_series_csv("x", "year,value\n20x0,1\n"),
            Err(Error::Parse {
                line: 2,
                column: 1,
                ..
            })
        ));
        assert!(matches!(
            parse_series_csv("x", "year,value\n2020,1,3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_series_csv("x", "yr,value\n2020,1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_series_csv("x", "year,value\n"),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeSeries::observed("g", "EUR", &[(2000, 0.1 + 0.2), (2001, -1e-300)]).unwrap();
        assert_eq!(parse_series_csv("g", &series_to_csv(&s)).unwrap(), s);
    }

    #[test]
    fn scenario_files() {
        let one = parse_scenarios(
            "label = 'target1'\nemission_target_2030_kt = 2137554\nhorizon_start = 2022\nhorizon_end = 2030\n",
        )
        .unwrap();
        assert_eq!(
            one,
            vec![ScenarioSpec::new("target1", 2137554.0, 2022, 2030)]
        );
        let two = parse_scenarios(
            "[[scenario]]\nlabel = 'a'\nemission_target_2030_kt = 1.0\nhorizon_start = 2022\nhorizon_end = 2030\n\
             [[scenario]]\nlabel = 'b'\nemission_target_2030_kt = 2.5\nhorizon_start = 2022\nhorizon_end = 2031\ntarget_year = 2031\n",
        )
        .unwrap();
        assert_eq!(two[1].target_year, 2031);
        assert!(parse_scenarios(
            "label = 'a'\nemission_target_2030_kt = 0\nhorizon_start = 1\nhorizon_end = 2\n"
        )
        .is_err());
        assert!(parse_scenarios(
            "label = '../x'\nemission_target_2030_kt = 1\nhorizon_start = 1\nhorizon_end = 2\n"
        )
        .is_err());
        assert!(parse_scenarios("label = 'a'\nemission_target_2030_kt = 1\nhorizon_start = 1\nhorizon_end = 2\nfoo = 1\n").is_err());
        assert!(parse_scenarios("[[scenario]]\n").is_err());
    }
}
