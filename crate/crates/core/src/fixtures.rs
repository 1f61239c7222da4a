//! Deterministic synthetic market data.
//!
//! The real market history behind the forecasting workflow is not public,
//! so the repository ships series with the same qualitative shape: a
//! slowly declining, cyclical oil price; a linearly growing stock index and
//! gas price; a declining coal price and declining emissions; and a carbon
//! price that is a noisy linear function of the other factors. Everything is
//! drawn from [`Lcg64`] with fixed seeds and rounded to fixed decimals, so
//! regenerating the files reproduces them byte for byte.

use std::path::Path;

use crate::error::Result;
use crate::rng::Lcg64;
use crate::series::{series_to_csv, TimeSeries};

pub const FIXTURE_SEED: u64 = 20_211_231;

/// File stems, in the order the pipeline reads them.
pub const FACTOR_NAMES: [&str; 5] = ["oil", "dax", "coal", "gas", "emission"];
pub const PRICE_NAME: &str = "carbon_price";

pub struct Fixture {
    pub file_name: &'static str,
    pub series: TimeSeries,
}

fn round(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn series(
    name: &str,
    unit: &str,
    years: std::ops::RangeInclusive<i32>,
    decimals: i32,
    f: impl Fn(i32) -> f64,
) -> TimeSeries {
    let pairs: Vec<(i32, f64)> = years.map(|y| (y, round(f(y), decimals))).collect();
    TimeSeries::observed(name, unit, &pairs)
        .expect("generated years are distinct and values finite")
}

pub fn generate() -> Vec<Fixture> {
    let mut rng = Lcg64::new(FIXTURE_SEED);
    let mut noise = |sd: f64, n: usize| -> Vec<f64> { (0..n).map(|_| sd * rng.normal()).collect() };

    let oil_noise = noise(4.0, 42);
    let oil = series("oil", "EUR/bbl", 1980..=2021, 2, |y| {
        let t = f64::from(y - 1980);
        70.0 - 0.6 * t + 12.0 * (t / 4.0).sin() + oil_noise[(y - 1980) as usize]
    });
    let dax_noise = noise(600.0, 32);
    let dax = series("dax", "points", 1990..=2021, 2, |y| {
        1500.0 + 400.0 * f64::from(y - 1990) + dax_noise[(y - 1990) as usize]
    });
    let coal_noise = noise(8.0, 22);
    let coal = series("coal", "EUR/t", 2000..=2021, 2, |y| {
        120.0 - 1.5 * f64::from(y - 2000) + coal_noise[(y - 2000) as usize]
    });
    let gas_noise = noise(4.0, 22);
    let gas = series("gas", "EUR/MWh", 2000..=2021, 2, |y| {
        20.0 + 2.5 * f64::from(y - 2000) + gas_noise[(y - 2000) as usize]
    });
    let em_noise = noise(30_000.0, 32);
    let emission = series("emission", "kt", 1990..=2021, 0, |y| {
        4_200_000.0 - 50_000.0 * f64::from(y - 1990) + em_noise[(y - 1990) as usize]
    });

    let price_noise = noise(2.0, 15);
    let price = series(PRICE_NAME, "EUR/t", 2007..=2021, 2, |y| {
        let at = |s: &TimeSeries| s.value_at(y).expect("factors cover 2007-2021");
        let p = 5.0 + 0.003 * (at(&dax) - 5000.0) + 0.3 * (at(&gas) - 40.0)
            - 2e-5 * (at(&emission) - 3_000_000.0)
            + price_noise[(y - 2007) as usize];
        p.max(0.5)
    });

    vec![
        Fixture {
            file_name: "oil_synthetic.csv",
            series: oil,
        },
        Fixture {
            file_name: "dax_synthetic.csv",
            series: dax,
        },
        Fixture {
            file_name: "coal_synthetic.csv",
            series: coal,
        },
        Fixture {
            file_name: "gas_synthetic.csv",
            series: gas,
        },
        Fixture {
            file_name: "emission_synthetic.csv",
            series: emission,
        },
        Fixture {
            file_name: "carbon_price_synthetic.csv",
            series: price,
        },
    ]
}

/// Writes every fixture into `dir` and returns the paths written.
pub fn write_fixtures(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for f in generate() {
        let path = dir.join(f.file_name);
        std::fs::write(&path, series_to_csv(&f.series))?;
        out.push(path);
    }
    Ok(out)
}

/// Directory holding the checked-in fixture files.
pub fn shipped_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// `<dir>/<name>.csv`, or the shipped `<dir>/<name>_synthetic.csv` when the
/// plain file is absent.
pub fn input_path(dir: &Path, name: &str) -> std::path::PathBuf {
    let plain = dir.join(format!("{name}.csv"));
    if plain.exists() {
        plain
    } else {
        dir.join(format!("{name}_synthetic.csv"))
    }
}

/// Input series named `oil, dax, coal, gas, emission, carbon_price`, read
/// through [`input_path`]. Factors come back in [`FACTOR_NAMES`] order
/// without the emission series.
pub fn load_inputs(dir: &Path) -> Result<crate::pipeline::PipelineInputs> {
    let load = |name: &str| -> Result<TimeSeries> {
        let mut s = crate::series::load_series(&input_path(dir, name))?;
        s.name = name.to_string();
        Ok(s)
    };
    Ok(crate::pipeline::PipelineInputs {
        factors: FACTOR_NAMES[..4]
            .iter()
            .map(|n| load(n))
            .collect::<Result<_>>()?,
        emission: load("emission")?,
        price: load(PRICE_NAME)?,
    })
}
