//! Acceptance suite: one test per release criterion, each printing its own
//! verdict line (run with `--nocapture` to see them). Criteria, tolerances
//! and runtime budgets are pinned here and in the README.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpde_cli::config::preset_config;
use kpde_cli::experiment::run_experiment;
use kpde_cli::report::{CheckOutcome, RunReport};

use kpde_core::grid::{FieldExpr, GridField, GridSpec};
use kpde_core::multi_index::weight_sum_truncated;
use kpde_core::regularization::{
    fit_power_law, sup_norm_trace, MollifierSpec, PotentialSpec,
};
use kpde_core::solver::{
    apriori_bound, solve_deterministic, OperatorSpec, Source, TimeProfile,
};
use kpde_core::verify::{uniqueness_check, CheckThresholds, Verdict};

fn run_preset_into_tempdir(name: &str) -> (RunReport, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let mut config = preset_config(name).unwrap();
    config.output.directory = dir.path().display().to_string();
    let report = run_experiment(&config).unwrap();
    (report, dir)
}

/// Numeric block with the (intentionally varying) output directory and the
/// config hash that covers it masked out.
fn numeric_value(report: &RunReport) -> serde_json::Value {
    let mut v = serde_json::to_value(&report.numeric).unwrap();
    v["config"]["output"]["directory"] = serde_json::Value::Null;
    v["config_hash"] = serde_json::Value::Null;
    v
}

// 1. Pure diffusion of torus eigenmodes is reproduced to 1e-8 in L2.
#[test]
fn c01_eigenmode_exactness() {
    let start = Instant::now();
    let spec = GridSpec::new(1, std::f64::consts::PI, 256).unwrap();
    let q = GridField::zeros(spec);
    let mut worst = 0.0f64;
    for k in [1.0, 2.0, 4.0] {
        let g = FieldExpr::sine_mode(k).sample(&spec);
        let u = solve_deterministic(&OperatorSpec::Laplacian, &q, &Source::zero(), &g, 0.5, 1e-3)
            .unwrap();
        for m in 0..u.len() {
            let mut expect = g.clone();
            expect.scale((-k * k * u.time(m)).exp());
            let mut diff = u.field(m).clone();
            diff.axpy(-1.0, &expect);
            worst = worst.max(diff.l2_norm());
        }
    }
    let elapsed = start.elapsed();
    assert!(worst < 1e-8, "worst L2 error {worst:e}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 01 eigenmode exactness: PASS (worst L2 error {worst:.2e}, {elapsed:?})"
    );
}

// 2. Every stored L2 norm of 20 randomized bounded-potential solves respects
//    the a-priori ceiling M e^{(w + M |q|_inf) t} (|g| + int |f|).
#[test]
fn c02_apriori_estimate_randomized() {
    let start = Instant::now();
    let spec = GridSpec::new(1, std::f64::consts::PI, 256).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        // trig polynomial with |q|_inf <= sum |a_m| <= 3
        let budget: f64 = rng.random_range(0.5..3.0);
        let amps: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let total: f64 = amps.iter().map(|a| a.abs()).sum();
        let scale = budget / total;
        let q = GridField::from_fn(spec, |x| {
            amps.iter()
                .enumerate()
                .map(|(m, a)| a * scale * ((m + 1) as f64 * x[0]).cos())
                .sum()
        });
        let g = FieldExpr::GaussianBump {
            amplitude: 1.0,
            center: vec![0.0],
            width: rng.random_range(0.4..0.8),
        }
        .sample(&spec);
        let f = if case % 2 == 0 {
            Source::zero()
        } else {
            Source::single(
                TimeProfile::Cos {
                    omega: rng.random_range(0.0..3.0),
                },
                FieldExpr::GaussianBump {
                    amplitude: 0.5,
                    center: vec![rng.random_range(-1.0..1.0)],
                    width: 0.5,
                }
                .sample(&spec),
            )
        };
        let dt = 1e-3;
        let u = solve_deterministic(&OperatorSpec::Laplacian, &q, &f, &g, 0.5, dt).unwrap();
        let q_sup = q.sup_norm();
        let g_norm = g.l2_norm();
        let mut f_l1 = 0.0;
        for m in 0..u.len() {
            let t = u.time(m);
            let bound = apriori_bound(1.0, 0.0, q_sup, t, g_norm, f_l1);
            let norm = u.field(m).l2_norm();
            assert!(
                norm <= bound * (1.0 + 1e-6),
                "case {case} t={t}: |u| = {norm} exceeds bound {bound}"
            );
            f_l1 += dt * f.l2_norm_at(t + 0.5 * dt, &spec);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("criterion 02 a-priori estimate (20 randomized potentials): PASS ({elapsed:?})");
}

// 3. Delta-potential regularization: log-type scaling stays under
//    log(1/eps) * 1.01, and linear scaling fits the exponent N = 1 +- 0.05.
#[test]
fn c03_log_type_regularization() {
    let spec = GridSpec::new(1, 5.0, 2048).unwrap();
    let delta = PotentialSpec::DiracDelta {
        location: vec![0.0],
    };
    let schedule: Vec<f64> = (1..=6).map(|j| 0.5f64.powi(j)).collect();

    let log_trace = sup_norm_trace(&delta, &MollifierSpec::log_type(1.0), &schedule, &spec).unwrap();
    for &(eps, sup) in &log_trace {
        let bound = (1.0 / eps).ln() * (1.0 + 1e-2);
        assert!(sup <= bound, "eps={eps}: sup {sup} above {bound}");
    }

    let lin_trace = sup_norm_trace(&delta, &MollifierSpec::linear(), &schedule, &spec).unwrap();
    let fit = fit_power_law(&lin_trace).unwrap();
    assert!(
        (fit.n - 1.0).abs() <= 0.05,
        "linear-scale exponent {} not within 1 +- 0.05",
        fit.n
    );
    println!(
        "criterion 03 log-type regularization: PASS (log-type bounded, linear fit N = {:.4})",
        fit.n
    );
}

// 4. Summability dichotomy of the weight sums between (P,K) = (12,12) and
//    (16,16): at p = 1 the refinement adds more than 1e-1 (divergence); at
//    p = 2 the criterion demands a change below 1e-3.
//
//    The p = 2 half cannot hold: the single new index e(13) already
//    contributes (2*13)^-2 = 1.479e-3, and the full refinement difference is
//    7.479e-3 (the sums do plateau, but at the 1e-2 scale). The assertion
//    keeps the pinned tolerance; the failure message reports the measured
//    values.
#[test]
fn c04_summability_dichotomy() {
    let p1_12 = weight_sum_truncated(1.0, 12, 12);
    let p1_16 = weight_sum_truncated(1.0, 16, 16);
    let growth = p1_16 - p1_12;
    assert!(growth > 1e-1, "p=1 refinement grew by only {growth:e}");

    let p2_12 = weight_sum_truncated(2.0, 12, 12);
    let p2_16 = weight_sum_truncated(2.0, 16, 16);
    let delta = p2_16 - p2_12;
    println!(
        "criterion 04 summability dichotomy: p=1 growth {growth:.4} (> 0.1), \
         p=2 change {delta:.6e} against a 1e-3 requirement"
    );
    assert!(
        delta < 1e-3,
        "p=2 partial sum moved by {delta:.6e} between (12,12) and (16,16); \
         the requirement < 1e-3 is below the single-term floor (2*13)^-2 = {:.6e}",
        (26.0f64).powi(-2)
    );
}

// 5. The singular example preset: exactly K+1 nonzero coefficients per eps,
//    every one of order <= 1, within the runtime budget.
#[test]
fn c05_singular_preset_structure() {
    let start = Instant::now();
    let (report, _dir) = run_preset_into_tempdir("example-sec4");
    let elapsed = start.elapsed();

    let k = report.numeric.config.truncation.max_dim;
    assert_eq!(report.numeric.members.len(), 5);
    for member in &report.numeric.members {
        assert_eq!(
            member.coefficient_count,
            k + 1,
            "eps = {}: expected K+1 coefficients",
            member.eps
        );
        for row in &member.coefficients {
            let order: u32 = row.gamma.iter().sum();
            assert!(order <= 1, "coefficient {:?} has order > 1", row.gamma);
        }
    }
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "criterion 05 singular example structure: PASS ({} members, {} coefficients each, {elapsed:?})",
        report.numeric.members.len(),
        k + 1
    );
}

// 6. The net from criterion 5 is moderate at p = 1.1: log-residual < 0.25
//    and fitted N below M N_q T + 0.5.
#[test]
fn c06_moderateness_of_singular_net() {
    let (report, _dir) = run_preset_into_tempdir("example-sec4");
    let CheckOutcome::Moderate(check) = &report.numeric.checks[0] else {
        panic!("expected the moderateness check");
    };
    assert_eq!(check.p, 1.1);
    assert_eq!(check.verdict, Verdict::Pass);
    let fit = check.fit.as_ref().unwrap();
    assert!(fit.residual < 0.25, "residual {}", fit.residual);
    let ceiling = check.exponent_bound.unwrap() + 0.5;
    assert!(
        fit.n <= ceiling,
        "fitted N = {} above M N_q T + 0.5 = {ceiling}",
        fit.n
    );
    println!(
        "criterion 06 moderateness: PASS (N = {:.4} <= {ceiling}, residual {:.2e})",
        fit.n, fit.residual
    );
}

// 7. Uniqueness surrogate: a mollifier pair differing by eps^8 * bump gives
//    solution differences decaying at rate >= 8 - M N_q T - 0.5, and an
//    identical pair gives exactly zero differences.
#[test]
fn c07_uniqueness_surrogate() {
    let (report, _dir) = run_preset_into_tempdir("uniqueness-negligible");
    let CheckOutcome::Unique(check) = &report.numeric.checks[0] else {
        panic!("expected the uniqueness check");
    };
    assert!(check.hypothesis_met);
    let measured = check.measured_order.unwrap();
    assert!(
        (measured - 8.0).abs() < 0.05,
        "potential difference order {measured} differs from the planted 8"
    );
    let config = &report.numeric.config;
    let m_nq_t = 1.0 * 1.0 * config.discretization.horizon;
    let required = 8.0 - m_nq_t - 0.5;
    let rate = check.solution_order.unwrap();
    assert!(
        rate >= required,
        "solution-difference rate {rate} below {required}"
    );
    assert_eq!(check.verdict, Verdict::Pass);

    // identical mollifiers: exact zero
    let problem = config.to_problem();
    let schedule = config.schedule.build().unwrap();
    let twin = uniqueness_check(
        &problem,
        &problem.mollifier.clone(),
        &schedule,
        &CheckThresholds::default(),
    )
    .unwrap();
    assert!(twin.exact_zero);
    assert!(twin.solution_trace.iter().all(|p| p.value == 0.0));
    println!(
        "criterion 07 uniqueness surrogate: PASS (rate {rate:.3} >= {required}, twin net exactly zero)"
    );
}

// 8. Consistency for q = cos(pi x / R): strictly decreasing errors over the
//    dyadic schedule with the final error below 1e-2 in the s = 1.1 norm.
#[test]
fn c08_consistency_bounded_potential() {
    let (report, _dir) = run_preset_into_tempdir("consistency-cos");
    let config = &report.numeric.config;
    assert_eq!(config.verification.thresholds.stochastic_order, 1.1);
    let CheckOutcome::Consistent(check) = &report.numeric.checks[0] else {
        panic!("expected the consistency check");
    };
    assert_eq!(check.errors.len(), 6);
    for w in check.errors.windows(2) {
        assert!(
            w[1].value < w[0].value,
            "errors not strictly decreasing: {:?}",
            check.errors
        );
    }
    let last = check.errors.last().unwrap().value;
    assert!(last < 1e-2, "final error {last}");
    assert_eq!(check.verdict, Verdict::Pass);
    println!(
        "criterion 08 consistency: PASS (errors {:.3e} .. {:.3e}, strictly decreasing)",
        check.errors[0].value, last
    );
}

// 9. Monte Carlo cross-check of the chaos statistics: all 25 probes within 3
//    standard errors, single-threaded runtime within budget, and a 4-worker
//    run bitwise identical. The >= 3x speedup half of the criterion needs at
//    least 4 hardware threads and is skipped (loudly) on smaller hosts.
#[test]
fn c09_monte_carlo_cross_check() {
    let mut config = preset_config("mc-linear-gaussian").unwrap();
    let dir1 = tempfile::tempdir().unwrap();
    config.output.directory = dir1.path().display().to_string();

    let sequential = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let report1 = sequential.install(|| run_experiment(&config)).unwrap();
    let t1 = start.elapsed();
    assert!(t1.as_secs_f64() < 300.0, "single-threaded run took {t1:?}");

    let CheckOutcome::Mc(mc) = &report1.numeric.checks[0] else {
        panic!("expected the Monte Carlo check");
    };
    assert_eq!(mc.samples, 10_000);
    assert_eq!(mc.stats.len(), 25);
    for s in &mc.stats {
        assert!(
            s.mean_ok && s.variance_ok,
            "probe (t={}, x={:?}) outside 3 standard errors: {s:?}",
            s.t,
            s.x
        );
    }

    let dir2 = tempfile::tempdir().unwrap();
    let mut config4 = config.clone();
    config4.output.directory = dir2.path().display().to_string();
    let quad = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let start = Instant::now();
    let report4 = quad.install(|| run_experiment(&config4)).unwrap();
    let t4 = start.elapsed();

    assert_eq!(
        numeric_value(&report1),
        numeric_value(&report4),
        "4-worker run is not bitwise identical"
    );

    let speedup = t1.as_secs_f64() / t4.as_secs_f64();
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if cores >= 4 {
        assert!(
            speedup >= 3.0,
            "parallel speedup {speedup:.2}x below 3x on {cores} cores"
        );
        println!(
            "criterion 09 Monte Carlo cross-check: PASS (25/25 probes, speedup {speedup:.2}x, bitwise identical)"
        );
    } else {
        println!(
            "criterion 09 Monte Carlo cross-check: PASS on statistics and bitwise identity \
             ({t1:?} sequential); speedup sub-check SKIPPED: host has {cores} core(s), \
             4 workers cannot run in parallel (measured {speedup:.2}x)"
        );
    }
}

// 10. Re-running any preset with the same seed reproduces the report.json
//     numeric block bitwise (same configuration, same output directory).
#[test]
fn c10_reproducibility_of_presets() {
    for name in kpde_cli::config::PRESET_NAMES {
        let dir = tempfile::tempdir().unwrap();
        let mut config = preset_config(name).unwrap();
        config.output.directory = dir.path().display().to_string();

        let numeric_block = || {
            let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
            let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
            serde_json::to_string(&doc["numeric"]).unwrap()
        };
        run_experiment(&config).unwrap();
        let first = numeric_block();
        run_experiment(&config).unwrap();
        let second = numeric_block();
        assert_eq!(first, second, "preset {name} is not reproducible");
    }
    println!("criterion 10 reproducibility: PASS (4 presets, bitwise-identical numeric blocks)");
}
