//! k-fold and leave-one-out cross-validation scored by negative mean
//! squared error, and exhaustive grid search.
//!
//! A candidate's score is the unweighted mean of its per-fold scores, so
//! folds that are one row short count as much as the others. Candidates
//! whose training fails on any fold score `-inf` and keep the error text.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Gamma, KernelKind, KernelSpec};
use crate::model::{fit_model, FitOptions, ModelSpec};
use crate::notation::format_model;
use crate::rng::Lcg64;
use crate::svm::SvmHyperParams;

pub const SCORING: &str = "neg_mean_squared_error";
pub const SELECTION_CAVEAT: &str =
    "hyperparameters are selected and scored on the same cross-validation folds (no nested CV); \
     the best score is optimistically biased";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k: usize,
    /// Fold index of each row.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

/// Random balanced partition: rows are shuffled with [`Lcg64`] and the row
/// at shuffled position `r` joins fold `r % k`. With `k == n` the plan is
/// leave-one-out (row `i` is fold `i`) whatever the seed.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::BadFoldCount { n, k });
    }
    if k == n {
        return Ok(FoldPlan::leave_one_out(n).with_seed(seed));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Lcg64::new(seed).shuffle(&mut order);
    let mut assignments = vec![0; n];
    for (r, &row) in order.iter().enumerate() {
        assignments[row] = r % k;
    }
    Ok(FoldPlan {
        n,
        k,
        assignments,
        seed,
    })
}

impl FoldPlan {
    pub fn leave_one_out(n: usize) -> Self {
        Self {
            n,
            k: n,
            assignments: (0..n).collect(),
            seed: 0,
        }
    }

    fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Plan from explicit assignments; folds must be labelled `0..k` with
    /// none empty.
    pub fn from_assignments(assignments: Vec<usize>) -> Result<Self> {
        let n = assignments.len();
        let k = assignments.iter().max().map_or(0, |m| m + 1);
        if k < 2 || k > n {
            return Err(Error::BadFoldCount { n, k });
        }
        if (0..k).any(|f| !assignments.contains(&f)) {
            return Err(Error::InvalidParameter(
                "fold labels must cover 0..k without gaps".into(),
            ));
        }
        Ok(Self {
            n,
            k,
            assignments,
            seed: 0,
        })
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvScore {
    pub mean: f64,
    pub per_fold: Vec<f64>,
    /// First training failure, if any; `mean` is then `-inf`.
    pub failure: Option<Error>,
}

pub fn cv_score(
    spec: &ModelSpec,
    x: &DMatrix<f64>,
    y: &[f64],
    plan: &FoldPlan,
    opts: &FitOptions,
) -> Result<CvScore> {
    if x.nrows() != plan.n {
        return Err(Error::DimensionMismatch {
            expected: plan.n,
            found: x.nrows(),
        });
    }
    if y.len() != plan.n {
        return Err(Error::DimensionMismatch {
            expected: plan.n,
            found: y.len(),
        });
    }
    let mut folds = Vec::with_capacity(plan.k);
    for f in 0..plan.k {
        let train = plan.train_rows(f);
        if train.len() < 2 {
            return Err(Error::FoldTooSmall { rows: train.len() });
        }
        folds.push((train, plan.test_rows(f)));
    }

    let mut per_fold = Vec::with_capacity(plan.k);
    for (train, test) in &folds {
        let xt = x.select_rows(train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let outcome = fit_model(spec, &xt, &yt, opts).and_then(|m| m.predict(&x.select_rows(test)));
        match outcome {
            Ok(pred) => {
                let mse = test
                    .iter()
                    .zip(&pred)
                    .map(|(&i, p)| (y[i] - p).powi(2))
                    .sum::<f64>()
                    / test.len() as f64;
                per_fold.push(-mse);
            }
            Err(e) => {
                per_fold.push(f64::NEG_INFINITY);
                return Ok(CvScore {
                    mean: f64::NEG_INFINITY,
                    per_fold,
                    failure: Some(e),
                });
            }
        }
    }
    let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
    Ok(CvScore {
        mean,
        per_fold,
        failure: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub candidates: Vec<ModelSpec>,
}

impl GridSpec {
    pub fn new(candidates: Vec<ModelSpec>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyData("grid has no candidates".into()));
        }
        Ok(Self { candidates })
    }

    /// SVR candidates over the product of the axes, ordered kernel, C,
    /// epsilon, gamma. Kernels that ignore gamma take only the first value.
    pub fn svr_product(
        cs: &[f64],
        epsilons: &[f64],
        gammas: &[Gamma],
        kernels: &[KernelKind],
    ) -> Result<Self> {
        let mut out = Vec::new();
        for &kind in kernels {
            let gs = if kind.uses_gamma() {
                gammas
            } else {
                &gammas[..gammas.len().min(1)]
            };
            for &c in cs {
                for &epsilon in epsilons {
                    for &g in gs {
                        let hp = SvmHyperParams::new(c, epsilon, KernelSpec::new(kind, g));
                        hp.validate()?;
                        out.push(ModelSpec::Svr(hp));
                    }
                }
            }
        }
        Self::new(out)
    }

    /// Indices of candidates equal to an earlier one.
    pub fn duplicates(&self) -> Vec<usize> {
        (0..self.candidates.len())
            .filter(|&i| self.candidates[..i].contains(&self.candidates[i]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub spec: ModelSpec,
    /// The candidate in model-string notation.
    pub model: String,
    /// `-inf` for failed candidates; written as `null` in JSON.
    pub mean_score: f64,
    pub per_fold_scores: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub scoring: String,
    pub per_candidate: Vec<CandidateResult>,
    /// Highest mean score, ties to the lowest index; `None` when every
    /// candidate failed.
    pub best_index: Option<usize>,
    pub duplicate_indices: Vec<usize>,
    pub folds: FoldPlan,
    pub caveat: String,
}

impl CvReport {
    pub fn best(&self) -> Option<&CandidateResult> {
        self.best_index.map(|i| &self.per_candidate[i])
    }
}

pub fn grid_search(
    grid: &GridSpec,
    x: &DMatrix<f64>,
    y: &[f64],
    plan: &FoldPlan,
    opts: &FitOptions,
    execution: Execution,
) -> Result<CvReport> {
    let eval = |spec: &ModelSpec| cv_score(spec, x, y, plan, opts);
    let scores: Vec<CvScore> = match execution {
        Execution::Sequential => grid.candidates.iter().map(eval).collect::<Result<_>>()?,
        Execution::Parallel => grid
            .candidates
            .par_iter()
            .map(eval)
            .collect::<Result<_>>()?,
    };

    let mut best_index = None;
    let mut best = f64::NEG_INFINITY;
    for (i, s) in scores.iter().enumerate() {
        if s.failure.is_none() && (best_index.is_none() || s.mean > best) {
            best = s.mean;
            best_index = Some(i);
        }
    }
    let per_candidate = grid
        .candidates
        .iter()
        .zip(scores)
        .map(|(spec, s)| CandidateResult {
            spec: *spec,
            model: format_model(spec),
            mean_score: s.mean,
            per_fold_scores: s.per_fold,
            failure: s.failure.map(|e| e.to_string()),
        })
        .collect();
    Ok(CvReport {
        scoring: SCORING.to_string(),
        per_candidate,
        best_index,
        duplicate_indices: grid.duplicates(),
        folds: plan.clone(),
        caveat: SELECTION_CAVEAT.to_string(),
    })
}
