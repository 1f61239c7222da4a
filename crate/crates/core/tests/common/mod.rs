//! Brute-force oracles shared by the integration tests. None of this calls
//! into the solver under test; linear systems are solved by plain Gaussian
//! elimination written out here.

#![allow(dead_code)]

use carbon_svr::rng::Lcg64;

pub type Mat = Vec<Vec<f64>>;

/// Gaussian elimination with partial pivoting. `None` if singular.
pub fn gauss_solve(mut a: Mat, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub fn objective(f: &Mat, lin: &[f64], theta: &[f64]) -> f64 {
    let m = theta.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += theta[i] * f[i][j] * theta[j];
        }
    }
    0.5 * quad + lin.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()
}

/// Exact minimiser of a strictly convex box+equality QP by enumerating
/// every assignment of each variable to {lower, upper, free}. The optimum
/// is the minimiser of its own face, so the best feasible face minimiser
/// is the global minimum.
pub fn qp_enumerate(
    f: &Mat,
    lin: &[f64],
    lower: &[f64],
    upper: &[f64],
    eq: Option<(&[f64], f64)>,
) -> Option<(Vec<f64>, f64)> {
    let m = lin.len();
    let total = 3usize.pow(m as u32);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut state = vec![0u8; m];
    for code in 0..total {
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 2).collect();
        let mut theta = vec![0.0; m];
        for i in 0..m {
            match state[i] {
                0 => theta[i] = lower[i],
                1 => theta[i] = upper[i],
                _ => {}
            }
        }
        // Reduced linear term for the free block.
        let rhs_free: Vec<f64> = free
            .iter()
            .map(|&i| {
                -(lin[i]
                    + (0..m)
                        .filter(|j| state[*j] != 2)
                        .map(|j| f[i][j] * theta[j])
                        .sum::<f64>())
            })
            .collect();
        let k = free.len();
        let solved = match eq {
            None => {
                if k == 0 {
                    Some(vec![])
                } else {
                    let a: Mat = free
                        .iter()
                        .map(|&i| free.iter().map(|&j| f[i][j]).collect())
                        .collect();
                    gauss_solve(a, rhs_free)
                }
            }
            Some((coeffs, rhs)) => {
                let fixed_part: f64 = (0..m)
                    .filter(|j| state[*j] != 2)
                    .map(|j| coeffs[j] * theta[j])
                    .sum();
                let r = rhs - fixed_part;
                if k == 0 || free.iter().all(|&i| coeffs[i] == 0.0) {
                    if r.abs() > 1e-9 {
                        continue;
                    }
                    if k == 0 {
                        Some(vec![])
                    } else {
                        let a: Mat = free
                            .iter()
                            .map(|&i| free.iter().map(|&j| f[i][j]).collect())
                            .collect();
                        gauss_solve(a, rhs_free)
                    }
                } else {
                    let mut a: Mat = vec![vec![0.0; k + 1]; k + 1];
                    for (p, &i) in free.iter().enumerate() {
                        for (q, &j) in free.iter().enumerate() {
                            a[p][q] = f[i][j];
                        }
                        a[p][k] = coeffs[i];
                        a[k][p] = coeffs[i];
                    }
                    let mut b = rhs_free.clone();
                    b.push(r);
                    gauss_solve(a, b).map(|mut v| {
                        v.truncate(k);
                        v
                    })
                }
            }
        };
        let Some(vals) = solved else { continue };
        for (p, &i) in free.iter().enumerate() {
            theta[i] = vals[p];
        }
        if (0..m).any(|i| theta[i] < lower[i] - 1e-10 || theta[i] > upper[i] + 1e-10) {
            continue;
        }
        let obj = objective(f, lin, &theta);
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((theta, obj));
        }
    }
    best
}

/// Grid refinement over the feasible set. At each level every variable with
/// `a_i != 0` takes a turn as the one eliminated through the equality, and a
/// full tensor grid of the remaining coordinates is searched around the
/// incumbent; the step shrinks whenever no grid point improves.
pub fn qp_grid_refine(
    f: &Mat,
    lin: &[f64],
    lower: &[f64],
    upper: &[f64],
    eq: (&[f64], f64),
    start: &[f64],
) -> (Vec<f64>, f64) {
    let (coeffs, rhs) = eq;
    let m = lin.len();
    let mut incumbent = start.to_vec();
    let mut best_obj = objective(f, lin, &incumbent);
    let mut half: Vec<f64> = (0..m).map(|i| 0.5 * (upper[i] - lower[i])).collect();
    let steps = [-1.0, 0.0, 1.0];
    while half.iter().cloned().fold(0.0, f64::max) > 1e-9 {
        let mut improved = false;
        for pivot in (0..m).filter(|&i| coeffs[i] != 0.0) {
            let others: Vec<usize> = (0..m).filter(|&i| i != pivot).collect();
            let total = steps.len().pow(others.len() as u32);
            let mut winner: Option<(Vec<f64>, f64)> = None;
            for code in 0..total {
                let mut c = code;
                let mut cand = incumbent.clone();
                let mut s = 0.0;
                for &i in &others {
                    let step = steps[c % steps.len()];
                    c /= steps.len();
                    cand[i] = (incumbent[i] + step * half[i]).clamp(lower[i], upper[i]);
                    s += coeffs[i] * cand[i];
                }
                let tp = (rhs - s) / coeffs[pivot];
                if tp < lower[pivot] - 1e-12 || tp > upper[pivot] + 1e-12 {
                    continue;
                }
                cand[pivot] = tp.clamp(lower[pivot], upper[pivot]);
                let o = objective(f, lin, &cand);
                if o < best_obj - 1e-15 && winner.as_ref().map_or(true, |(_, w)| o < *w) {
                    winner = Some((cand, o));
                }
            }
            if let Some((c, o)) = winner {
                incumbent = c;
                best_obj = o;
                improved = true;
            }
        }
        if !improved {
            half.iter_mut().for_each(|h| *h *= 0.5);
        }
    }
    (incumbent, best_obj)
}

/// Random strictly convex box+equality instance with a known feasible point.
pub struct RandomQp {
    pub f: Mat,
    pub lin: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub feasible: Vec<f64>,
}

pub fn random_qp(rng: &mut Lcg64, m: usize, ridge: f64) -> RandomQp {
    let a: Mat = (0..m)
        .map(|_| (0..m).map(|_| rng.normal()).collect())
        .collect();
    let mut f = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            f[i][j] = (0..m).map(|k| a[k][i] * a[k][j]).sum::<f64>() / m as f64;
        }
        f[i][i] += ridge;
    }
    let lin: Vec<f64> = (0..m).map(|_| 2.0 * rng.normal()).collect();
    let lower: Vec<f64> = (0..m).map(|_| -rng.uniform(0.2, 1.5)).collect();
    let upper: Vec<f64> = (0..m).map(|_| rng.uniform(0.2, 1.5)).collect();
    let coeffs: Vec<f64> = (0..m)
        .map(|_| {
            let v = rng.uniform(0.3, 1.5);
            if rng.next_f64() < 0.5 {
                -v
            } else {
                v
            }
        })
        .collect();
    let feasible: Vec<f64> = (0..m).map(|i| rng.uniform(lower[i], upper[i])).collect();
    let rhs = coeffs.iter().zip(&feasible).map(|(a, t)| a * t).sum();
    RandomQp {
        f,
        lin,
        lower,
        upper,
        coeffs,
        rhs,
        feasible,
    }
}

/// ε-SVR dual in β = α - α*: minimise 1/2 β'Kβ - y'β + ε|β|_1 with
/// Σβ = 0 and |β_i| <= C, by enumerating for every coordinate one of
/// {-C, 0, +C, free > 0, free < 0}. Needs K positive definite.
pub fn svr_dual_enumerate(k: &Mat, y: &[f64], c: f64, eps: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let total = 5usize.pow(n as u32);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let obj = |beta: &[f64]| {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += beta[i] * k[i][j] * beta[j];
            }
        }
        0.5 * q - y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
            + eps * beta.iter().map(|b| b.abs()).sum::<f64>()
    };
    let mut state = vec![0u8; n];
    for code in 0..total {
        let mut cc = code;
        for s in state.iter_mut() {
            *s = (cc % 5) as u8;
            cc /= 5;
        }
        let mut beta = vec![0.0; n];
        for i in 0..n {
            beta[i] = match state[i] {
                0 => -c,
                1 => 0.0,
                2 => c,
                _ => 0.0,
            };
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] >= 3).collect();
        let fixed_sum: f64 = beta.iter().sum();
        let kf = free.len();
        if kf == 0 {
            if fixed_sum.abs() > 1e-12 {
                continue;
            }
        } else {
            let mut a: Mat = vec![vec![0.0; kf + 1]; kf + 1];
            let mut b = vec![0.0; kf + 1];
            for (p, &i) in free.iter().enumerate() {
                for (q, &j) in free.iter().enumerate() {
                    a[p][q] = k[i][j];
                }
                a[p][kf] = 1.0;
                a[kf][p] = 1.0;
                let sign = if state[i] == 3 { 1.0 } else { -1.0 };
                let fixed_k: f64 = (0..n)
                    .filter(|j| state[*j] < 3)
                    .map(|j| k[i][j] * beta[j])
                    .sum();
                b[p] = y[i] - sign * eps - fixed_k;
            }
            b[kf] = -fixed_sum;
            let Some(v) = gauss_solve(a, b) else { continue };
            let mut ok = true;
            for (p, &i) in free.iter().enumerate() {
                let val = v[p];
                let sign_ok = if state[i] == 3 {
                    val >= -1e-12
                } else {
                    val <= 1e-12
                };
                if !sign_ok || val.abs() > c + 1e-10 {
                    ok = false;
                }
                beta[i] = val;
            }
            if !ok {
                continue;
            }
        }
        let o = obj(&beta);
        if best.as_ref().map_or(true, |(_, b)| o < *b) {
            best = Some((beta, o));
        }
    }
    best.expect("zero is always feasible")
}

/// Largest geometric margin over unit normals in the plane: for each angle
/// the best offset gives half the gap between the two classes' projections.
/// Returns `(margin, angle, threshold)`; the classifier is
/// `sign(cos(angle) x + sin(angle) y - threshold)`.
pub fn max_margin_2d(points: &[[f64; 2]], labels: &[f64]) -> (f64, f64, f64) {
    let gap = |angle: f64| {
        let (s, c) = angle.sin_cos();
        let mut pos_min = f64::INFINITY;
        let mut neg_max = f64::NEG_INFINITY;
        for (p, l) in points.iter().zip(labels) {
            let proj = c * p[0] + s * p[1];
            if *l > 0.0 {
                pos_min = pos_min.min(proj);
            } else {
                neg_max = neg_max.max(proj);
            }
        }
        (0.5 * (pos_min - neg_max), 0.5 * (pos_min + neg_max))
    };
    let coarse = 3600;
    let mut best_angle = 0.0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..coarse {
        let a = std::f64::consts::TAU * i as f64 / coarse as f64;
        let v = gap(a).0;
        if v > best {
            best = v;
            best_angle = a;
        }
    }
    let mut width = std::f64::consts::TAU / coarse as f64;
    while width > 1e-12 {
        for k in -10..=10 {
            let a = best_angle + width * k as f64 / 10.0;
            let v = gap(a).0;
            if v > best {
                best = v;
                best_angle = a;
            }
        }
        width *= 0.5;
    }
    (best, best_angle, gap(best_angle).1)
}

/// Linearly separable 2-D instance: labels by a random line, with every
/// point at least `gap` away from it.
pub fn separable_2d(rng: &mut Lcg64, n: usize, gap: f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let angle = rng.uniform(0.0, std::f64::consts::TAU);
    let (s, c) = angle.sin_cos();
    let offset = rng.uniform(-0.5, 0.5);
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    while pts.len() < n {
        let p = [rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)];
        let d = c * p[0] + s * p[1] - offset;
        if d.abs() < gap {
            continue;
        }
        // Force both classes into the first two points.
        let want = match pts.len() {
            0 => Some(1.0),
            1 => Some(-1.0),
            _ => None,
        };
        let l = d.signum();
        if want.map_or(false, |w| w != l) {
            continue;
        }
        pts.push(p);
        labels.push(l);
    }
    (pts, labels)
}

pub fn rbf(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    (-gamma * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `(XᶜᵀXᶜ + λI)⁻¹ Xᶜᵀ yᶜ` with the intercept recovered from the means;
/// `rows` is row-major.
pub fn ridge_normal_equations(
    rows: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
) -> Option<(Vec<f64>, f64)> {
    let n = rows.len();
    let p = rows[0].len();
    let xm: Vec<f64> = (0..p)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for (r, yi) in rows.iter().zip(y) {
        for j in 0..p {
            b[j] += (r[j] - xm[j]) * (yi - ym);
            for k in 0..p {
                a[j][k] += (r[j] - xm[j]) * (r[k] - xm[k]);
            }
        }
    }
    for (j, row) in a.iter_mut().enumerate() {
        row[j] += lambda;
    }
    let beta = gauss_solve(a, b)?;
    let intercept = ym - beta.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
    Some((beta, intercept))
}
