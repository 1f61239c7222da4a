//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Every reference value comes from the
//! oracles in `common`, never from the crate under test.

mod common;

use std::time::Instant;

use carbon_svr::baselines::{fit_baseline, lasso_lambda_max, BaselineSpec};
use carbon_svr::fixtures::{self, load_inputs, shipped_dir};
use carbon_svr::kernels::{Gamma, KernelSpec};
use carbon_svr::model::{fit_model, FitOptions, ModelSpec};
use carbon_svr::notation::{format_model, parse_model_string};
use carbon_svr::pipeline::{compare_series, run_pipeline, PipelineResult};
use carbon_svr::qp::{solve_qp, Equality, QpConfig, QpProblem};
use carbon_svr::reference::{
    deviation_table, reference_config, reference_values, COMPARISON_FACTORS, FACTOR_TABLE,
    TARGET_1_KT, TARGET_2_KT,
};
use carbon_svr::report::{price_csv, record_pipeline, Report};
use carbon_svr::rng::Lcg64;
use carbon_svr::selection::{cv_score, grid_search, make_folds, Execution, FoldPlan, GridSpec};
use carbon_svr::series::{series_to_csv, TimeSeries};
use carbon_svr::svm::{train_svc, train_svr, SolverConfig, SvmHyperParams};
use common::{max_margin_2d, qp_enumerate, qp_grid_refine, random_qp, separable_2d};
use nalgebra::{DMatrix, DVector};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn qp_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = Lcg64::new(20_240_601);
    let (mut worst_obj, mut worst_theta, mut worst_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut converged = 0;
    for inst in 0..200 {
        let m = 2 + inst % 7;
        let ridge = rng.uniform(0.05, 0.5);
        let r = random_qp(&mut rng, m, ridge);
        let p = QpProblem {
            quad: DMatrix::from_fn(m, m, |i, j| r.f[i][j]),
            linear: DVector::from_column_slice(&r.lin),
            lower: DVector::from_column_slice(&r.lower),
            upper: DVector::from_column_slice(&r.upper),
            equality: Some(Equality {
                coeffs: DVector::from_column_slice(&r.coeffs),
                rhs: r.rhs,
            }),
        };
        let s = solve_qp(&p, &QpConfig::default()).map_err(|e| format!("instance {inst}: {e}"))?;
        let (grid_theta, grid_obj) = qp_grid_refine(
            &r.f,
            &r.lin,
            &r.lower,
            &r.upper,
            (&r.coeffs, r.rhs),
            &r.feasible,
        );
        let d_obj = (s.objective - grid_obj).abs();
        let d_theta = (0..m)
            .map(|i| (s.theta[i] - grid_theta[i]).abs())
            .fold(0.0, f64::max);
        check(d_obj <= 1e-4, || {
            format!("instance {inst} (m={m}): objective off by {d_obj:.3e}")
        })?;
        check(d_theta <= 1e-3, || {
            format!("instance {inst} (m={m}): theta off by {d_theta:.3e}")
        })?;
        // Enumeration of active sets as a second, exact opinion.
        let (_, enum_obj) =
            qp_enumerate(&r.f, &r.lin, &r.lower, &r.upper, Some((&r.coeffs, r.rhs)))
                .ok_or_else(|| format!("instance {inst}: enumeration found nothing"))?;
        check((s.objective - enum_obj).abs() <= 1e-6, || {
            format!("instance {inst}: {} vs enumerated {enum_obj}", s.objective)
        })?;
        if s.converged {
            converged += 1;
            check(s.duality_gap <= 1e-6, || {
                format!("instance {inst}: gap {:.3e}", s.duality_gap)
            })?;
            worst_gap = worst_gap.max(s.duality_gap);
        }
        worst_obj = worst_obj.max(d_obj);
        worst_theta = worst_theta.max(d_theta);
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "200 instances, {converged} converged; max |dobj| {worst_obj:.2e}, max |dtheta| {worst_theta:.2e}, max gap {worst_gap:.2e}, {secs:.1} s"
    ))
}

fn svr_kkt_suite() -> Outcome {
    let mut rng = Lcg64::new(4242);
    let kernels = [
        KernelSpec::linear(),
        KernelSpec::rbf(Gamma::Scale),
        KernelSpec::polynomial(Gamma::Auto, 3, 1.0),
    ];
    let (mut worst_sum, mut worst_box, mut worst_tube) =
        (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for inst in 0..100 {
        let n = 2 + rng.below(19) as usize;
        let d = 1 + inst % 3;
        let x = DMatrix::from_fn(n, d, |_, _| rng.uniform(-2.0, 2.0));
        let y: Vec<f64> = (0..n)
            .map(|i| 3.0 * x.row(i).sum().sin() + 0.5 * rng.normal())
            .collect();
        let c = 10f64.powf(rng.uniform(-1.0, 2.0));
        let eps = rng.uniform(0.0, 0.5);
        let hp = SvmHyperParams::new(c, eps, kernels[inst % 3]);
        let model = train_svr(&x, &y, &hp, &SolverConfig::default())
            .map_err(|e| format!("instance {inst}: {e}"))?;
        let mut beta = vec![0.0; n];
        for (b, &i) in model.dual_coeffs.iter().zip(&model.support_indices) {
            beta[i] = *b;
        }
        let sum = beta.iter().sum::<f64>().abs();
        check(sum <= 1e-6, || {
            format!("instance {inst}: |sum beta| {sum:.3e}")
        })?;
        let over = beta
            .iter()
            .map(|b| b.abs() - c)
            .fold(f64::NEG_INFINITY, f64::max);
        check(over <= 1e-9, || {
            format!("instance {inst}: |beta| exceeds C by {over:.3e}")
        })?;
        let pred = model.predict(&x).map_err(|e| e.to_string())?;
        for i in (0..n).filter(|&i| beta[i] == 0.0) {
            let out = (pred[i] - y[i]).abs() - eps;
            check(out <= 1e-6, || {
                format!("instance {inst}: point {i} outside tube by {out:.3e}")
            })?;
            worst_tube = worst_tube.max(out);
        }
        worst_sum = worst_sum.max(sum);
        worst_box = worst_box.max(over);
    }
    Ok(format!(
        "100 instances; max |sum beta| {worst_sum:.2e}, max |beta|-C {worst_box:.2e}, max tube excess {worst_tube:.2e}"
    ))
}

fn svc_hard_margin() -> Outcome {
    let mut rng = Lcg64::new(5050);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let n = 6 + inst % 15;
        let gap = rng.uniform(0.05, 0.5);
        let (pts, labels) = separable_2d(&mut rng, n, gap);
        let x = DMatrix::from_fn(n, 2, |i, j| pts[i][j]);
        let hp = SvmHyperParams::new(1e6, 0.0, KernelSpec::linear());
        let model = train_svc(&x, &labels, &hp, &SolverConfig::default())
            .map_err(|e| format!("instance {inst}: {e}"))?;
        let f = model.decision_batch(&x).map_err(|e| e.to_string())?;
        let errors = f
            .iter()
            .zip(&labels)
            .filter(|(fi, yi)| fi.signum() != yi.signum())
            .count();
        check(errors == 0, || {
            format!("instance {inst}: {errors} training errors")
        })?;
        let (oracle, _, _) = max_margin_2d(&pts, &labels);
        let d = (model.margin() - oracle).abs();
        check(d <= 1e-2, || {
            format!("instance {inst}: margin {} vs {oracle}", model.margin())
        })?;
        worst = worst.max(d);
    }
    Ok(format!(
        "50 instances, 0 training errors; max |margin - oracle| {worst:.2e}"
    ))
}

fn baseline_identities() -> Outcome {
    let mut rng = Lcg64::new(777);
    let mut worst = 0.0f64;
    for inst in 0..50 {
        let (n, p) = (8 + inst % 10, 1 + inst % 4);
        let x = DMatrix::from_fn(n, p, |_, _| rng.uniform(-5.0, 5.0));
        let w: Vec<f64> = (0..p).map(|_| rng.normal()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| (0..p).map(|j| x[(i, j)] * w[j]).sum::<f64>() + rng.normal())
            .collect();
        let fit =
            |s: BaselineSpec| fit_baseline(&s, &x, &y).map_err(|e| format!("instance {inst}: {e}"));
        let ols = fit(BaselineSpec::ols())?;
        let ridge = fit(BaselineSpec::ridge(0.0))?;
        let diff = ols
            .coefficients
            .iter()
            .zip(&ridge.coefficients)
            .map(|(a, b)| (a - b).abs())
            .fold((ols.intercept - ridge.intercept).abs(), f64::max);
        check(diff <= 1e-8, || {
            format!("instance {inst}: ridge(0) differs from OLS by {diff:.3e}")
        })?;
        worst = worst.max(diff);
        let lmax = lasso_lambda_max(&x, &y);
        for lambda in [lmax, 2.0 * lmax] {
            let lasso = fit(BaselineSpec::lasso(lambda))?;
            check(lasso.coefficients.iter().all(|c| *c == 0.0), || {
                format!(
                    "instance {inst}: lasso({lambda}) left {:?}",
                    lasso.coefficients
                )
            })?;
        }
        let poly = fit(BaselineSpec::polynomial(1))?;
        check(
            poly.coefficients == ols.coefficients && poly.intercept == ols.intercept,
            || format!("instance {inst}: polynomial(1) differs from OLS"),
        )?;
    }
    Ok(format!(
        "50 instances; max |ridge(0) - OLS| {worst:.2e}; lasso zero and poly(1) exact"
    ))
}

fn cv_determinism() -> Outcome {
    let mut rng = Lcg64::new(99);
    let n = 15;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.4).collect();
    let y: Vec<f64> = xs.iter().map(|v| v.sin() + 0.1 * rng.normal()).collect();
    let x = DMatrix::from_column_slice(n, 1, &xs);
    let opts = FitOptions::default();
    let loo = FoldPlan::leave_one_out(n);
    let specs: Vec<ModelSpec> = vec![
        SvmHyperParams::new(5.0, 0.05, KernelSpec::rbf(Gamma::Scale)).into(),
        SvmHyperParams::new(1.0, 0.1, KernelSpec::linear()).into(),
        BaselineSpec::ridge(0.1).into(),
    ];
    for spec in &specs {
        for seed in [0, 1, 31337] {
            let plan = make_folds(n, n, seed).map_err(|e| e.to_string())?;
            let a = cv_score(spec, &x, &y, &plan, &opts).map_err(|e| e.to_string())?;
            let b = cv_score(spec, &x, &y, &loo, &opts).map_err(|e| e.to_string())?;
            check(a == b, || {
                format!("{}: k=n (seed {seed}) differs from LOO", format_model(spec))
            })?;
        }
    }
    let mut cands: Vec<ModelSpec> = Vec::new();
    for c in [0.1, 1.0, 10.0, 100.0] {
        for eps in [0.01, 0.1, 0.3] {
            cands.push(SvmHyperParams::new(c, eps, KernelSpec::rbf(Gamma::Scale)).into());
            cands.push(SvmHyperParams::new(c, eps, KernelSpec::linear()).into());
        }
    }
    let grid = GridSpec::new(cands).map_err(|e| e.to_string())?;
    let plan = make_folds(n, 5, 7).map_err(|e| e.to_string())?;
    let seq = grid_search(&grid, &x, &y, &plan, &opts, Execution::Sequential)
        .map_err(|e| e.to_string())?;
    let par =
        grid_search(&grid, &x, &y, &plan, &opts, Execution::Parallel).map_err(|e| e.to_string())?;
    check(grid.candidates.len() == 24, || {
        format!("grid has {} candidates", grid.candidates.len())
    })?;
    check(seq == par, || {
        "parallel grid search differs from sequential".into()
    })?;
    let bits = |r: &carbon_svr::selection::CvReport| -> Vec<u64> {
        r.per_candidate
            .iter()
            .map(|c| c.mean_score.to_bits())
            .collect()
    };
    check(bits(&seq) == bits(&par), || "score bits differ".into())?;
    Ok(format!(
        "k=n equals LOO for 3 specs x 3 seeds; 24-candidate grid bit-identical (best {:?})",
        seq.best_index
    ))
}

fn notation_golden() -> Outcome {
    let dir = shipped_dir();
    let inputs = load_inputs(&dir).map_err(|e| e.to_string())?;
    let series_for = |name: &str| -> &TimeSeries {
        if name.starts_with("emission") {
            &inputs.emission
        } else {
            inputs
                .factors
                .iter()
                .find(|f| f.name == name)
                .expect("factor present")
        }
    };
    let mut canon = Vec::new();
    for (name, text) in FACTOR_TABLE {
        let spec = parse_model_string(text).map_err(|e| format!("{name}: {e}"))?;
        let formatted = format_model(&spec);
        let again = parse_model_string(&formatted).map_err(|e| format!("{name} reparse: {e}"))?;
        check(again == spec, || {
            format!("{name}: {formatted} does not reparse to the same spec")
        })?;
        check(format_model(&again) == formatted, || {
            format!("{name}: formatting is not idempotent")
        })?;
        let s = series_for(name);
        let obs = s.observed_points();
        let x = DMatrix::from_fn(obs.len(), 1, |i, _| f64::from(obs[i].year));
        let y: Vec<f64> = obs.iter().map(|p| p.value).collect();
        let model =
            fit_model(&spec, &x, &y, &FitOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let pred = model.predict(&x).map_err(|e| e.to_string())?;
        check(pred.iter().all(|v| v.is_finite()), || {
            format!("{name}: non-finite prediction")
        })?;
        canon.push(formatted);
    }
    let golden = [
        "SVR(C=42, epsilon=0.5, gamma='scale', kernel='rbf')",
        "SVR(C=10, epsilon=0.00001, gamma='auto', kernel='linear')",
        "SVR(C=3, epsilon=4, gamma='scale', kernel='rbf')",
        "SVR(C=48, epsilon=0.5, gamma='auto', kernel='linear')",
        "SVR(C=3878, epsilon=0.00001, gamma='auto', kernel='linear')",
        "SVR(C=3878, epsilon=0.00001, gamma='auto', kernel='linear')",
    ];
    for (got, want) in canon.iter().zip(golden) {
        check(got == want, || format!("canonical form {got} != {want}"))?;
    }
    Ok("6 strings parse, train on fixtures and format canonically".into())
}

fn pipeline_bytes(result: &PipelineResult) -> Result<Vec<u8>, String> {
    let cfg = reference_config();
    let mut report = Report::new("forecast-price", &cfg).map_err(|e| e.to_string())?;
    record_pipeline(&mut report, &cfg, result).map_err(|e| e.to_string())?;
    let mut out = report.to_json().into_bytes();
    for s in &result.scenarios {
        out.extend(price_csv(&s.price.price_by_year).into_bytes());
    }
    Ok(out)
}

fn pipeline_end_to_end() -> Outcome {
    let inputs = load_inputs(&shipped_dir()).map_err(|e| e.to_string())?;
    let cfg = reference_config();
    let targets: Vec<f64> = cfg.scenarios.iter().map(|s| s.emission_target_kt).collect();
    check(targets == [TARGET_1_KT, TARGET_2_KT], || {
        format!("scenario targets {targets:?}")
    })?;
    let start = Instant::now();
    let first = run_pipeline(&cfg, &inputs).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("run took {secs:.1} s"))?;
    for s in &first.scenarios {
        let years: Vec<i32> = s.price.price_by_year.iter().map(|(y, _)| *y).collect();
        check(years == (2022..=2030).collect::<Vec<_>>(), || {
            format!("{}: price years {years:?}", s.scenario.label)
        })?;
        check(
            s.price.price_by_year.iter().all(|(_, p)| p.is_finite()),
            || "non-finite price".into(),
        )?;
    }
    let em = |i: usize| {
        first.scenarios[i]
            .emission
            .forecast
            .value_at(2030)
            .unwrap_or(f64::NAN)
    };
    check(em(1) < em(0), || {
        format!("2030 emissions {} (lower target) vs {}", em(1), em(0))
    })?;
    let second = run_pipeline(&cfg, &inputs).map_err(|e| e.to_string())?;
    let (a, b) = (pipeline_bytes(&first)?, pipeline_bytes(&second)?);
    check(a == b, || "repeated run differs".into())?;
    Ok(format!(
        "2 scenarios x 9 years; 2030 emission {:.1} < {:.1} kt; repeat byte-identical ({} bytes); {secs:.2} s",
        em(1),
        em(0),
        a.len()
    ))
}

fn replicate_on(dir: &std::path::Path) -> Result<(usize, usize), String> {
    let inputs = load_inputs(dir).map_err(|e| e.to_string())?;
    let cfg = reference_config();
    let result = run_pipeline(&cfg, &inputs).map_err(|e| e.to_string())?;
    let families = carbon_svr::reference::default_families();
    let mut comparisons = Vec::new();
    for name in COMPARISON_FACTORS {
        let s = inputs
            .factors
            .iter()
            .find(|f| f.name == name)
            .expect("factor present");
        let plan = FoldPlan::leave_one_out(s.observed_points().len());
        let table =
            compare_series(s, &families, &plan, &cfg.fit).map_err(|e| format!("{name}: {e}"))?;
        comparisons.push((name.to_string(), table));
    }
    let table = deviation_table(&result, &comparisons);
    let populated = table
        .iter()
        .filter(|d| d.observed.is_some() && d.deviation_pct.is_some())
        .count();
    Ok((populated, table.len()))
}

fn replication_contract() -> Outcome {
    let expected = reference_values().len();
    let (populated, total) = replicate_on(&shipped_dir())?;
    check(total == expected && populated == total, || {
        format!("fixtures: {populated}/{total} of {expected}")
    })?;

    // A different CSV set: the fixtures with every value scaled and nudged.
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = Lcg64::new(2718);
    for f in fixtures::generate() {
        let mut s = f.series.clone();
        for p in &mut s.points {
            p.value = (p.value * rng.uniform(0.9, 1.1) * 100.0).round() / 100.0;
        }
        std::fs::write(
            tmp.path().join(f.file_name.replace("_synthetic", "")),
            series_to_csv(&s),
        )
        .map_err(|e| e.to_string())?;
    }
    let (alt, alt_total) = replicate_on(tmp.path())?;
    check(alt == alt_total, || {
        format!("perturbed inputs: {alt}/{alt_total}")
    })?;
    Ok(format!(
        "fixtures {populated}/{total} populated; perturbed inputs {alt}/{alt_total}"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("qp_oracle_equivalence", qp_oracle_equivalence),
        ("svr_kkt_suite", svr_kkt_suite),
        ("svc_hard_margin", svc_hard_margin),
        ("baseline_identities", baseline_identities),
        ("cv_determinism_loo", cv_determinism),
        ("model_notation_golden", notation_golden),
        ("pipeline_end_to_end", pipeline_end_to_end),
        ("replication_contract", replication_contract),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
