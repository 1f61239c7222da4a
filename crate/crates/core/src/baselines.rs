//! Linear comparison regressors: ordinary least squares, ridge, lasso and
//! polynomial least squares.
//!
//! All four fit an unpenalized intercept. Columns are centered and scaled
//! to unit population variance before solving and the coefficients are
//! mapped back to the (expanded) raw features, so the fitted function does
//! not depend on the internal scaling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Degree used for the polynomial comparison family unless overridden.
pub const DEFAULT_POLY_DEGREE: u32 = 2;
pub const LASSO_MAX_SWEEPS: usize = 100_000;
/// Relative per-sweep coefficient change below which lasso stops.
pub const LASSO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Ols,
    Ridge,
    Lasso,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    /// Penalty weight; only read by ridge and lasso.
    pub lambda: f64,
    /// Only read by the polynomial kind.
    pub degree: u32,
}

impl BaselineSpec {
    pub fn ols() -> Self {
        Self {
            kind: BaselineKind::Ols,
            lambda: 0.0,
            degree: 1,
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: BaselineKind::Ridge,
            lambda,
            degree: 1,
        }
    }

    pub fn lasso(lambda: f64) -> Self {
        Self {
            kind: BaselineKind::Lasso,
            lambda,
            degree: 1,
        }
    }

    pub fn polynomial(degree: u32) -> Self {
        Self {
            kind: BaselineKind::Polynomial,
            lambda: 0.0,
            degree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BaselineKind::Ridge | BaselineKind::Lasso
                if !(self.lambda >= 0.0 && self.lambda.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "lambda must be finite and >= 0, got {}",
                    self.lambda
                )))
            }
            BaselineKind::Polynomial if self.degree < 1 => Err(Error::InvalidParameter(
                "polynomial degree must be >= 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Feature map applied before the linear fit. Inputs are shifted by
/// `offsets` and then expanded into every monomial of total degree
/// `1..=degree`, ordered by degree and then lexicographically by variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub degree: u32,
    pub offsets: Vec<f64>,
}

impl Expansion {
    pub fn identity(d: usize) -> Self {
        Self {
            degree: 1,
            offsets: vec![0.0; d],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn output_dim(&self) -> usize {
        monomials(self.input_dim(), self.degree).len()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let terms = monomials(self.input_dim(), self.degree);
        Ok(DMatrix::from_fn(x.nrows(), terms.len(), |i, t| {
            terms[t]
                .iter()
                .map(|&j| x[(i, j)] - self.offsets[j])
                .product()
        }))
    }
}

/// Variable index lists of every monomial with degree in `1..=degree`.
fn monomials(d: usize, degree: u32) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..degree {
        let mut next = Vec::new();
        for m in &layer {
            let start = m.last().copied().unwrap_or(0);
            for j in start..d {
                let mut t = m.clone();
                t.push(j);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub spec: BaselineSpec,
    /// One per expanded feature.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub expansion: Expansion,
    /// Coordinate-descent sweeps (lasso only, 0 otherwise).
    pub sweeps: usize,
}

impl LinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let phi = self.expansion.apply(x)?;
        let beta = DVector::from_column_slice(&self.coefficients);
        Ok((phi * beta).iter().map(|v| v + self.intercept).collect())
    }
}

pub fn predict_baseline(model: &LinearModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    model.predict(x)
}

pub fn fit_baseline(spec: &BaselineSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    spec.validate()?;
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(Error::EmptyData(
            "baseline fit needs at least one row and one column".into(),
        ));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite training value".into()));
    }

    let expansion = match spec.kind {
        // Shifting by the training mean keeps high powers of raw years
        // well conditioned; degree 1 keeps the plain OLS path.
        BaselineKind::Polynomial if spec.degree > 1 => Expansion {
            degree: spec.degree,
            offsets: column_means(x),
        },
        _ => Expansion::identity(x.ncols()),
    };
    let phi = expansion.apply(x)?;
    let std = Standardized::new(&phi, y);

    let (gamma, sweeps) = match spec.kind {
        BaselineKind::Ols | BaselineKind::Polynomial => {
            if n <= phi.ncols() {
                return Err(Error::IllPosed(format!(
                    "{n} rows for {} features; least squares needs more rows than features",
                    phi.ncols()
                )));
            }
            (penalized_least_squares(&std, 0.0)?, 0)
        }
        BaselineKind::Ridge => (penalized_least_squares(&std, spec.lambda)?, 0),
        BaselineKind::Lasso => coordinate_descent(&std, spec.lambda)?,
    };
    let (coefficients, intercept) = std.to_raw(&gamma);
    Ok(LinearModel {
        spec: *spec,
        coefficients,
        intercept,
        expansion,
        sweeps,
    })
}

/// Smallest lasso penalty that zeroes every coefficient,
/// `max_j |x_jᶜᵀ yᶜ| / n` on centered columns.
pub fn lasso_lambda_max(x: &DMatrix<f64>, y: &[f64]) -> f64 {
    let std = Standardized::new(x, y);
    (0..x.ncols())
        .map(|j| std.raw_correlation(j).abs())
        .fold(0.0, f64::max)
}

fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    (0..x.ncols()).map(|j| x.column(j).mean()).collect()
}

/// Centered, unit-variance columns plus the centered target.
struct Standardized {
    z: DMatrix<f64>,
    yc: DVector<f64>,
    means: Vec<f64>,
    /// Population standard deviation; zero for constant columns.
    scales: Vec<f64>,
    y_mean: f64,
}

impl Standardized {
    fn new(x: &DMatrix<f64>, y: &[f64]) -> Self {
        let n = x.nrows();
        let means = column_means(x);
        let scales: Vec<f64> = (0..x.ncols())
            .map(|j| {
                let ss: f64 = x.column(j).iter().map(|v| (v - means[j]).powi(2)).sum();
                (ss / n as f64).sqrt()
            })
            .collect();
        let z = DMatrix::from_fn(n, x.ncols(), |i, j| {
            if scales[j] > 0.0 {
                (x[(i, j)] - means[j]) / scales[j]
            } else {
                0.0
            }
        });
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        Self {
            z,
            yc,
            means,
            scales,
            y_mean,
        }
    }

    fn n(&self) -> f64 {
        self.z.nrows() as f64
    }

    /// `x_jᶜᵀ yᶜ / n` in raw units.
    fn raw_correlation(&self, j: usize) -> f64 {
        self.z.column(j).dot(&self.yc) * self.scales[j] / self.n()
    }

    fn to_raw(&self, gamma: &DVector<f64>) -> (Vec<f64>, f64) {
        let beta: Vec<f64> = (0..gamma.len())
            .map(|j| {
                if self.scales[j] > 0.0 {
                    gamma[j] / self.scales[j]
                } else {
                    0.0
                }
            })
            .collect();
        let intercept = self.y_mean
            - beta
                .iter()
                .zip(&self.means)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        (beta, intercept)
    }
}

/// Minimizes `||yᶜ - Xᶜβ||² + λ||β||²` through Householder QR of the
/// standardized design, with `√λ / s_j` rows appended when `λ > 0`.
fn penalized_least_squares(std: &Standardized, lambda: f64) -> Result<DVector<f64>> {
    let (n, p) = std.z.shape();
    let (design, rhs) = if lambda > 0.0 {
        let mut a = DMatrix::zeros(n + p, p);
        a.view_mut((0, 0), (n, p)).copy_from(&std.z);
        for j in 0..p {
            // Constant columns carry no signal; any positive entry keeps R
            // nonsingular and their coefficient at zero.
            let s = if std.scales[j] > 0.0 {
                std.scales[j]
            } else {
                1.0
            };
            a[(n + j, j)] = lambda.sqrt() / s;
        }
        let mut b = DVector::zeros(n + p);
        b.rows_mut(0, n).copy_from(&std.yc);
        (a, b)
    } else {
        if let Some(j) = std.scales.iter().position(|s| *s == 0.0) {
            return Err(Error::IllPosed(format!("feature column {j} is constant")));
        }
        (std.z.clone(), std.yc.clone())
    };

    let qr = design.qr();
    let r = qr.r();
    let qtb = qr.q().transpose() * rhs;
    let diag_max = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..p).any(|j| r[(j, j)].abs() <= 1e-12 * diag_max.max(f64::MIN_POSITIVE)) {
        return Err(Error::IllPosed("design matrix is rank deficient".into()));
    }
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::IllPosed("singular triangular factor".into()))
}

/// Cyclic coordinate descent on `(1/2n)||yᶜ - Xᶜβ||² + λ||β||₁`, run in
/// standardized coordinates with per-column thresholds `λ / s_j`.
fn coordinate_descent(std: &Standardized, lambda: f64) -> Result<(DVector<f64>, usize)> {
    let p = std.z.ncols();
    let mut gamma = DVector::zeros(p);
    let lambda_max = (0..p)
        .map(|j| std.raw_correlation(j).abs())
        .fold(0.0, f64::max);
    if lambda >= lambda_max {
        return Ok((gamma, 0));
    }
    let n = std.n();
    let mut resid = std.yc.clone();
    let mut last_change = f64::INFINITY;
    for sweep in 1..=LASSO_MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let s = std.scales[j];
            if s == 0.0 {
                continue;
            }
            let col = std.z.column(j);
            let old = gamma[j];
            // Unit-variance columns make the coordinate curvature exactly 1.
            let rho = col.dot(&resid) / n + old;
            let thr = lambda / s;
            let new = rho.signum() * (rho.abs() - thr).max(0.0);
            if new != old {
                resid.axpy(old - new, &col, 1.0);
                gamma[j] = new;
                let rel = (new - old).abs() / s / (new.abs() / s).max(1.0);
                max_change = max_change.max(rel);
            }
        }
        last_change = max_change;
        if max_change < LASSO_TOL {
            return Ok((gamma, sweep));
        }
    }
    Err(Error::NotConverged {
        iterations: LASSO_MAX_SWEEPS,
        duality_gap: last_change,
    })
}
