//! Dense convex QP with box constraints and at most one linear equality:
//!
//! ```text
//! minimize    1/2 θ' F θ + f' θ
//! subject to  lower <= θ <= upper
//!             a' θ = b              (optional)
//! ```
//!
//! This is exactly the constraint set of the soft-margin SVM and ε-SVR
//! duals. The solver is a two-variable working-set method in the SMO style:
//! every iteration picks the maximal-violating pair (ties go to the lowest
//! index), moves along the direction that keeps `a'θ` fixed and minimises
//! the objective exactly on the clipped segment. Variables with `a_i = 0`
//! (or every variable when there is no equality) are handled by single
//! coordinate steps.
//!
//! Every `max(m, 10)` pair steps the solver also runs face steps: with the
//! bound variables held fixed it eliminates the equality, takes the Newton
//! step along curved directions of the reduced Hessian and steepest descent
//! along flat ones, and line-searches exactly, clipped to the box. A clipped
//! step fixes one more variable, so repeating it reaches the minimiser of
//! the face in at most `m` steps. This keeps the iterates feasible and the
//! objective monotone, and it replaces the slow tail of plain SMO on
//! ill-conditioned or raw-unit Gram matrices by a handful of steps.
//!
//! KKT violations below the rounding error of a freshly computed gradient
//! are treated as zero.
//!
//! Convergence is certified by the Wolfe duality gap
//! `max_{s feasible} (θ - s)' ∇(θ)`, bounded above by
//! `Σ_i max((θ_i - l_i) g̃_i, (θ_i - u_i) g̃_i)` with `g̃ = ∇ - λ a`,
//! minimised over the multiplier `λ`. For a convex objective the gap bounds
//! the distance of the current objective from the optimum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_JITTER: f64 = 1e-8;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Curvature floor for degenerate working pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub coeffs: DVector<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub quad: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub equality: Option<Equality>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpConfig {
    /// Stopping threshold on the duality gap.
    pub tol: f64,
    /// Stopping threshold on the maximal KKT violation; defaults to `tol`.
    pub kkt_tol: Option<f64>,
    /// Defaults to `100 * m^2` (at least 1000).
    pub max_iter: Option<usize>,
    /// Diagonal shift applied when `quad` is numerically singular.
    pub jitter: f64,
    /// Keep the objective value after every iteration (testing aid).
    #[serde(skip)]
    pub record_trace: bool,
}

impl Default for QpConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            kkt_tol: None,
            max_iter: None,
            jitter: DEFAULT_JITTER,
            record_trace: false,
        }
    }
}

impl QpConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_kkt_tol(mut self, kkt_tol: f64) -> Self {
        self.kkt_tol = Some(kkt_tol);
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if let Some(k) = self.kkt_tol {
            if !(k > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "kkt_tol must be > 0, got {k}"
                )));
            }
        }
        if !(self.jitter > 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "jitter must be > 0, got {}",
                self.jitter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub theta: DVector<f64>,
    /// `1/2 θ'Fθ + f'θ` with the caller's (unregularised) `F`.
    pub objective: f64,
    pub duality_gap: f64,
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Whether the diagonal jitter had to be applied.
    pub regularized: bool,
    /// Objective of the solved (possibly regularised) problem per iteration;
    /// empty unless `record_trace` is set.
    pub objective_trace: Vec<f64>,
}

/// Returns `F + jitter * I`. Off-diagonal entries are untouched.
pub fn condition_regularize(quad: &DMatrix<f64>, jitter: f64) -> DMatrix<f64> {
    let mut out = quad.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] += jitter;
    }
    out
}

impl QpProblem {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        quad_objective(&self.quad, &self.linear, theta)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.linear.len();
        if m == 0 {
            return Err(Error::InvalidProblem("problem has no variables".into()));
        }
        if self.quad.shape() != (m, m) {
            return Err(Error::InvalidProblem(format!(
                "quadratic term is {}x{}, expected {m}x{m}",
                self.quad.nrows(),
                self.quad.ncols()
            )));
        }
        if self.lower.len() != m || self.upper.len() != m {
            return Err(Error::InvalidProblem(
                "bound vectors have the wrong length".into(),
            ));
        }
        if self
            .quad
            .iter()
            .chain(self.linear.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidProblem("non-finite entry in F or f".into()));
        }
        for i in 0..m {
            let (l, u) = (self.lower[i], self.upper[i]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidProblem(format!(
                    "bad bounds [{l}, {u}] at index {i}"
                )));
            }
        }
        let scale = self.quad.amax().max(1.0);
        for i in 0..m {
            for j in (i + 1)..m {
                if (self.quad[(i, j)] - self.quad[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidProblem(format!(
                        "F is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if let Some(eq) = &self.equality {
            if eq.coeffs.len() != m {
                return Err(Error::InvalidProblem(
                    "equality coefficients have the wrong length".into(),
                ));
            }
            if eq.coeffs.iter().any(|v| !v.is_finite()) || !eq.rhs.is_finite() {
                return Err(Error::InvalidProblem(
                    "non-finite equality constraint".into(),
                ));
            }
        }
        Ok(())
    }
}

fn quad_objective(quad: &DMatrix<f64>, linear: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    0.5 * theta.dot(&(quad * theta)) + linear.dot(theta)
}

/// Numerically singular: Cholesky fails or a pivot collapses relative to the diagonal.
fn is_ill_conditioned(quad: &DMatrix<f64>) -> bool {
    let max_diag = quad.diagonal().amax();
    if max_diag <= 0.0 {
        return true;
    }
    match nalgebra::Cholesky::new(quad.clone()) {
        None => true,
        Some(chol) => {
            let l = chol.l_dirty();
            (0..quad.nrows()).any(|i| l[(i, i)] * l[(i, i)] < 1e-12 * max_diag)
        }
    }
}

fn initial_point(p: &QpProblem) -> Result<DVector<f64>> {
    let m = p.dim();
    let mut theta = DVector::from_fn(m, |i, _| 0.0f64.clamp(p.lower[i], p.upper[i]));
    if let Some(eq) = &p.equality {
        let mut residual = eq.rhs - eq.coeffs.dot(&theta);
        for i in 0..m {
            if residual == 0.0 {
                break;
            }
            let a = eq.coeffs[i];
            if a == 0.0 {
                continue;
            }
            let delta = (residual / a).clamp(p.lower[i] - theta[i], p.upper[i] - theta[i]);
            theta[i] += delta;
            residual = eq.rhs - eq.coeffs.dot(&theta);
        }
        let scale = eq
            .coeffs
            .iter()
            .zip(theta.iter())
            .map(|(a, t)| (a * t).abs())
            .fold(eq.rhs.abs(), f64::max)
            .max(1.0);
        if residual.abs() > 1e-12 * scale {
            return Err(Error::Infeasible { residual });
        }
    }
    Ok(theta)
}

/// `(θ_i - s) * g` with the convention that an infinite distance against a
/// zero gradient contributes nothing.
fn gap_term(dist: f64, g: f64) -> f64 {
    if g == 0.0 {
        0.0
    } else {
        dist * g
    }
}

fn gap_at(p: &QpProblem, theta: &DVector<f64>, grad: &DVector<f64>, lambda: f64) -> f64 {
    let coeffs = p.equality.as_ref().map(|e| &e.coeffs);
    (0..p.dim())
        .map(|i| {
            let gt = grad[i] - coeffs.map_or(0.0, |a| lambda * a[i]);
            let down = gap_term(theta[i] - p.lower[i], gt);
            let up = gap_term(theta[i] - p.upper[i], gt);
            down.max(up).max(0.0)
        })
        .sum()
}

/// Gap minimised over the equality multiplier. The gap is convex and
/// piecewise linear in `λ` with breakpoints at `g_i / a_i`, so the minimum
/// sits on one of them.
fn duality_gap(p: &QpProblem, theta: &DVector<f64>, grad: &DVector<f64>) -> f64 {
    match &p.equality {
        None => gap_at(p, theta, grad, 0.0),
        Some(eq) => {
            let mut best = gap_at(p, theta, grad, 0.0);
            for i in 0..p.dim() {
                if eq.coeffs[i] != 0.0 {
                    best = best.min(gap_at(p, theta, grad, grad[i] / eq.coeffs[i]));
                }
            }
            best
        }
    }
}

/// Size of the rounding error in a freshly computed gradient entry. On
/// badly scaled problems (raw-unit linear kernels) this exceeds any useful
/// absolute tolerance, so certification is capped at this floor.
fn rounding_noise(quad_max: f64, linear_max: f64, theta: &DVector<f64>) -> f64 {
    let m = theta.len() as f64;
    8.0 * f64::EPSILON * (m * quad_max * theta.amax() + linear_max)
}

fn finite_width(p: &QpProblem) -> f64 {
    p.upper
        .iter()
        .zip(p.lower.iter())
        .map(|(u, l)| u - l)
        .filter(|w| w.is_finite())
        .sum::<f64>()
        .max(1.0)
}

/// Orthonormal basis of `{d : a'd = 0}` from the Householder reflector
/// that maps `a` onto the first axis; `None` when `a` vanishes.
fn equality_null_basis(a: &DVector<f64>) -> Option<DMatrix<f64>> {
    let s = a.len();
    let norm = a.norm();
    if norm == 0.0 {
        return None;
    }
    let mut v = a.clone();
    v[0] += if a[0] >= 0.0 { norm } else { -norm };
    let vv = v.dot(&v);
    Some(DMatrix::from_fn(s, s - 1, |i, j| {
        let eye = if i == j + 1 { 1.0 } else { 0.0 };
        eye - 2.0 * v[i] * v[j + 1] / vv
    }))
}

/// One step on the face of free variables followed by an exact,
/// box-clipped line search. With the equality eliminated through a null
/// space basis, the reduced Hessian is diagonalised: curved eigendirections
/// get the Newton step and flat ones (below rounding level) get steepest
/// descent, so the direction is always a descent direction even when the
/// face is unbounded below.
fn face_newton_step(
    p: &QpProblem,
    quad: &DMatrix<f64>,
    theta: &mut DVector<f64>,
    grad: &mut DVector<f64>,
) -> NewtonOutcome {
    let free: Vec<usize> = (0..p.dim())
        .filter(|&i| theta[i] > p.lower[i] && theta[i] < p.upper[i])
        .collect();
    let s = free.len();
    if s == 0 {
        return NewtonOutcome::Stalled;
    }
    let q_free = DMatrix::from_fn(s, s, |r, c| quad[(free[r], free[c])]);
    let g_free = DVector::from_fn(s, |r, _| grad[free[r]]);
    let a_free = p
        .equality
        .as_ref()
        .map(|e| DVector::from_fn(s, |r, _| e.coeffs[free[r]]));
    let basis = match a_free.as_ref().and_then(equality_null_basis) {
        Some(z) => z,
        None if a_free.as_ref().map_or(false, |a| a.amax() > 0.0) => return NewtonOutcome::Stalled,
        None => DMatrix::identity(s, s),
    };
    if basis.ncols() == 0 {
        return NewtonOutcome::Stalled;
    }
    let reduced = basis.transpose() * &q_free * &basis;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let g_red = basis.transpose() * &g_free;
    let eig = reduced.symmetric_eigen();
    let cutoff = 64.0 * f64::EPSILON * q_free.amax() * s as f64;
    let mut step = DVector::zeros(basis.ncols());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let gv = v.dot(&g_red);
        let coef = if lam > cutoff { -gv / lam } else { -gv };
        step.axpy(coef, &v, 1.0);
    }
    let d_free = &basis * step;

    let mut d = DVector::zeros(p.dim());
    for (r, &i) in free.iter().enumerate() {
        d[i] = d_free[r];
    }
    // A direction at rounding level would only snap variables to bounds.
    let scale = free.iter().map(|&i| theta[i].abs()).fold(1.0, f64::max);
    if d.amax() <= 1e3 * f64::EPSILON * scale {
        return NewtonOutcome::Stalled;
    }
    let slope = grad.dot(&d);
    let qd = quad * &d;
    let curv = d.dot(&qd);
    if !(slope < 0.0) || !slope.is_finite() || !curv.is_finite() {
        return NewtonOutcome::Stalled;
    }
    let mut t = if curv > 0.0 {
        -slope / curv
    } else {
        f64::INFINITY
    };
    let mut blocking = None;
    for &i in &free {
        let room = if d[i] > 0.0 {
            (p.upper[i] - theta[i]) / d[i]
        } else if d[i] < 0.0 {
            (p.lower[i] - theta[i]) / d[i]
        } else {
            continue;
        };
        if room < t {
            t = room;
            blocking = Some(i);
        }
    }
    if !t.is_finite() || t <= 0.0 {
        return NewtonOutcome::Stalled;
    }
    for &i in &free {
        let target = if blocking == Some(i) {
            if d[i] > 0.0 {
                p.upper[i]
            } else {
                p.lower[i]
            }
        } else {
            theta[i] + t * d[i]
        };
        theta[i] = target.clamp(p.lower[i], p.upper[i]);
    }
    *grad = quad * &*theta + &p.linear;
    if blocking.is_some() {
        NewtonOutcome::Blocked
    } else {
        NewtonOutcome::Interior
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NewtonOutcome {
    /// No descent direction on the face.
    Stalled,
    /// Full step taken; the iterate minimises the face.
    Interior,
    /// Step cut short where a variable hit a bound (always the case along
    /// a flat direction).
    Blocked,
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Pair { up: usize, low: usize },
    Single { k: usize },
}

/// Maximal-violating working set and the size of the violation.
fn select(p: &QpProblem, theta: &DVector<f64>, grad: &DVector<f64>) -> (Option<Step>, f64) {
    let m = p.dim();
    let mut best: Option<Step> = None;
    let mut best_viol = 0.0f64;

    if let Some(eq) = &p.equality {
        let mut up: Option<(usize, f64)> = None;
        let mut low: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = eq.coeffs[i];
            if a == 0.0 {
                continue;
            }
            let z = grad[i] / a;
            let (can_up, can_low) = if a > 0.0 {
                (theta[i] < p.upper[i], theta[i] > p.lower[i])
            } else {
                (theta[i] > p.lower[i], theta[i] < p.upper[i])
            };
            if can_up && up.map_or(true, |(_, zu)| z < zu) {
                up = Some((i, z));
            }
            if can_low && low.map_or(true, |(_, zl)| z > zl) {
                low = Some((i, z));
            }
        }
        if let (Some((i, zi)), Some((j, zj))) = (up, low) {
            let viol = zj - zi;
            if i != j && viol > best_viol {
                best_viol = viol;
                best = Some(Step::Pair { up: i, low: j });
            }
        }
    }

    for k in 0..m {
        let free = p.equality.as_ref().map_or(true, |eq| eq.coeffs[k] == 0.0);
        if !free {
            continue;
        }
        let g = grad[k];
        let viol = if g < 0.0 && theta[k] < p.upper[k] {
            -g
        } else if g > 0.0 && theta[k] > p.lower[k] {
            g
        } else {
            0.0
        };
        if viol > best_viol {
            best_viol = viol;
            best = Some(Step::Single { k });
        }
    }
    (best, best_viol)
}

fn move_to(theta: &mut DVector<f64>, i: usize, target: f64, lo: f64, hi: f64) -> f64 {
    let old = theta[i];
    theta[i] = target.clamp(lo, hi);
    theta[i] - old
}

/// Solve the problem. A run that exhausts `max_iter` is not an error: the
/// current (best) iterate is returned with `converged = false`.
pub fn solve_qp(p: &QpProblem, cfg: &QpConfig) -> Result<QpSolution> {
    p.validate()?;
    cfg.validate()?;
    let m = p.dim();
    let max_iter = cfg.max_iter.unwrap_or_else(|| (100 * m * m).max(1000));
    let kkt_tol = cfg.kkt_tol.unwrap_or(cfg.tol);

    let regularized = is_ill_conditioned(&p.quad);
    let quad = if regularized {
        condition_regularize(&p.quad, cfg.jitter)
    } else {
        p.quad.clone()
    };

    let mut theta = initial_point(p)?;
    let mut grad = &quad * &theta + &p.linear;
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(quad_objective(&quad, &p.linear, &theta));
    }

    let mut threshold = kkt_tol;
    let mut iterations = 0;
    let mut converged = false;
    let mut violation;
    let mut gap;
    let newton_period = m.max(10);
    let mut since_newton = 0usize;

    let (quad_max, linear_max) = (quad.amax(), p.linear.amax());
    loop {
        let (step, viol) = select(p, &theta, &grad);
        violation = viol;
        // Violations below the gradient's own rounding error are not signal.
        let noise = rounding_noise(quad_max, linear_max, &theta);

        if viol <= threshold.max(noise) || step.is_none() {
            // Refresh the incrementally updated gradient before certifying.
            grad = &quad * &theta + &p.linear;
            let (_, fresh) = select(p, &theta, &grad);
            violation = fresh;
            if fresh <= threshold.max(noise) {
                gap = duality_gap(p, &theta, &grad);
                let width = finite_width(p);
                if gap <= cfg.tol.max(noise * width) && fresh <= kkt_tol.max(noise) {
                    converged = true;
                    break;
                }
                if threshold <= noise {
                    break;
                }
                threshold = (threshold * 0.1).max(noise);
            }
            continue;
        }
        if iterations >= max_iter {
            gap = duality_gap(p, &theta, &grad);
            break;
        }
        iterations += 1;

        match step.expect("violating step") {
            Step::Pair { up: i, low: j } => {
                let eq = p.equality.as_ref().expect("pair steps need an equality");
                let (ai, aj) = (eq.coeffs[i], eq.coeffs[j]);
                let mut curv = quad[(i, i)] / (ai * ai) + quad[(j, j)] / (aj * aj)
                    - 2.0 * quad[(i, j)] / (ai * aj);
                // Room along the direction e_i/a_i - e_j/a_j, in units of t.
                let room_i = if ai > 0.0 {
                    (p.upper[i] - theta[i]) * ai
                } else {
                    (p.lower[i] - theta[i]) * ai
                };
                let room_j = if aj > 0.0 {
                    (theta[j] - p.lower[j]) * aj
                } else {
                    (theta[j] - p.upper[j]) * aj
                };
                let room = room_i.min(room_j);
                if curv <= TAU {
                    if room.is_infinite() {
                        return Err(Error::Unbounded);
                    }
                    curv = TAU;
                }
                let t = (viol / curv).min(room);
                let di = if t == room_i {
                    let target = if ai > 0.0 { p.upper[i] } else { p.lower[i] };
                    move_to(&mut theta, i, target, p.lower[i], p.upper[i])
                } else {
                    let target = theta[i] + t / ai;
                    move_to(&mut theta, i, target, p.lower[i], p.upper[i])
                };
                let dj = if t == room_j {
                    let target = if aj > 0.0 { p.lower[j] } else { p.upper[j] };
                    move_to(&mut theta, j, target, p.lower[j], p.upper[j])
                } else {
                    let target = theta[j] - t / aj;
                    move_to(&mut theta, j, target, p.lower[j], p.upper[j])
                };
                grad.axpy(di, &quad.column(i), 1.0);
                grad.axpy(dj, &quad.column(j), 1.0);
            }
            Step::Single { k } => {
                let mut curv = quad[(k, k)];
                let g = grad[k];
                let room = if g < 0.0 {
                    p.upper[k] - theta[k]
                } else {
                    theta[k] - p.lower[k]
                };
                if curv <= TAU {
                    if room.is_infinite() {
                        return Err(Error::Unbounded);
                    }
                    curv = TAU;
                }
                let dist = (g.abs() / curv).min(room);
                let target = if dist == room {
                    if g < 0.0 {
                        p.upper[k]
                    } else {
                        p.lower[k]
                    }
                } else {
                    theta[k] - g.signum() * dist
                };
                let dk = move_to(&mut theta, k, target, p.lower[k], p.upper[k]);
                grad.axpy(dk, &quad.column(k), 1.0);
            }
        }
        since_newton += 1;
        if since_newton >= newton_period {
            since_newton = 0;
            let before = theta.clone();
            let before_grad = grad.clone();
            let old = quad_objective(&quad, &p.linear, &theta);
            // Each blocked step fixes one more variable at a bound, so at
            // most m steps reach the minimiser of the current face.
            let mut moved = false;
            for _ in 0..m {
                match face_newton_step(p, &quad, &mut theta, &mut grad) {
                    NewtonOutcome::Stalled => break,
                    NewtonOutcome::Interior => {
                        moved = true;
                        break;
                    }
                    NewtonOutcome::Blocked => moved = true,
                }
            }
            if moved && quad_objective(&quad, &p.linear, &theta) > old {
                // Rounding made the step useless; keep the SMO iterate.
                theta = before;
                grad = before_grad;
            }
        }
        if cfg.record_trace {
            trace.push(quad_objective(&quad, &p.linear, &theta));
        }
    }

    Ok(QpSolution {
        objective: p.objective(&theta),
        theta,
        duality_gap: gap,
        kkt_violation: violation,
        iterations,
        converged,
        regularized,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_problem(quad: &[f64], linear: &[f64], lo: f64, hi: f64) -> QpProblem {
        let m = linear.len();
        QpProblem {
            quad: DMatrix::from_row_slice(m, m, quad),
            linear: DVector::from_column_slice(linear),
            lower: DVector::from_element(m, lo),
            upper: DVector::from_element(m, hi),
            equality: None,
        }
    }

    #[test]
    fn interior_minimum() {
        let p = box_problem(&[2.0], &[-2.0], 0.0, 10.0);
        let s = solve_qp(&p, &QpConfig::default()).unwrap();
        assert!(s.converged);
        assert!((s.theta[0] - 1.0).abs() < 1e-12);
        assert!((s.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn clipped_at_upper_bound() {
        let p = box_problem(&[2.0, 0.0, 0.0, 2.0], &[-2.0, -2.0], 0.0, 0.5);
        let s = solve_qp(&p, &QpConfig::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.theta.as_slice(), &[0.5, 0.5]);
        assert_eq!(s.duality_gap, 0.0);
    }

    #[test]
    fn regularize_shifts_only_the_diagonal() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let r = condition_regularize(&eye, 1e-8);
        assert_eq!(r, DMatrix::from_diagonal_element(2, 2, 1.0 + 1e-8));
        let z = condition_regularize(&DMatrix::zeros(3, 3), 1e-8);
        assert_eq!(z, DMatrix::from_diagonal_element(3, 3, 1e-8));
        let v = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let rank1 = &v * v.transpose();
        let r = condition_regularize(&rank1, 1e-8);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(r[(i, j)].to_bits(), rank1[(i, j)].to_bits());
                }
            }
        }
        let eig = nalgebra::SymmetricEigen::new(r);
        assert!(eig.eigenvalues.min() >= 1e-8 - 1e-12);
    }

    #[test]
    fn singular_quad_is_regularized_not_rejected() {
        let p = QpProblem {
            quad: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            linear: DVector::from_column_slice(&[-1.0, 0.0]),
            lower: DVector::from_element(2, 0.0),
            upper: DVector::from_element(2, 1.0),
            equality: None,
        };
        let s = solve_qp(&p, &QpConfig::default()).unwrap();
        assert!(s.regularized);
        assert!(s.converged);
        assert!((s.theta[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn equality_pair_problem() {
        // min 1/2 (x^2 + y^2) - x  s.t.  x + y = 1, 0 <= x, y <= 1  ->  x = 1, y = 0
        let p = QpProblem {
            quad: DMatrix::identity(2, 2),
            linear: DVector::from_column_slice(&[-1.0, 0.0]),
            lower: DVector::zeros(2),
            upper: DVector::from_element(2, 1.0),
            equality: Some(Equality {
                coeffs: DVector::from_element(2, 1.0),
                rhs: 1.0,
            }),
        };
        let s = solve_qp(&p, &QpConfig::default()).unwrap();
        assert!(s.converged);
        assert!((s.theta[0] - 1.0).abs() < 1e-9 && s.theta[1].abs() < 1e-9);
    }

    #[test]
    fn infeasible_equality() {
        let p = QpProblem {
            quad: DMatrix::identity(2, 2),
            linear: DVector::zeros(2),
            lower: DVector::zeros(2),
            upper: DVector::from_element(2, 1.0),
            equality: Some(Equality {
                coeffs: DVector::from_element(2, 1.0),
                rhs: 3.0,
            }),
        };
        assert!(matches!(
            solve_qp(&p, &QpConfig::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn unbounded_direction() {
        let p = QpProblem {
            quad: DMatrix::zeros(1, 1),
            linear: DVector::from_element(1, -1.0),
            lower: DVector::zeros(1),
            upper: DVector::from_element(1, f64::INFINITY),
            equality: None,
        };
        // The default jitter turns the flat direction into a bounded one.
        let s = solve_qp(&p, &QpConfig::default()).unwrap();
        assert!(s.regularized && (s.theta[0] - 1e8).abs() < 1e-3);
        let tiny = QpConfig {
            jitter: 1e-14,
            ..QpConfig::default()
        };
        assert_eq!(solve_qp(&p, &tiny), Err(Error::Unbounded));
    }

    #[test]
    fn invalid_problems() {
        let mut p = box_problem(&[1.0, 0.5, 0.0, 1.0], &[0.0, 0.0], 0.0, 1.0);
        assert!(matches!(p.validate(), Err(Error::InvalidProblem(_))));
        p.quad[(1, 0)] = 0.5;
        p.validate().unwrap();
        p.lower[0] = 2.0;
        assert!(matches!(p.validate(), Err(Error::InvalidProblem(_))));
        let cfg = QpConfig {
            jitter: 0.0,
            ..QpConfig::default()
        };
        let ok = box_problem(&[1.0], &[0.0], 0.0, 1.0);
        assert!(matches!(
            solve_qp(&ok, &cfg),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn iteration_cap_returns_unconverged_iterate() {
        let p = box_problem(&[2.0, 1.9, 1.9, 2.0], &[-1.0, 1.0], -100.0, 100.0);
        let s = solve_qp(&p, &QpConfig::default().with_max_iter(2)).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 2);
        assert!(s.duality_gap > 0.0);
    }
}
