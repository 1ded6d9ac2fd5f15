//! The run pipeline: regularization sweep, chaos solves per eps, requested
//! verification checks, and output persistence.

use std::collections::BTreeMap;
use std::time::Instant;

use sha2::{Digest, Sha256};

use kpde_core::chaos::ChaosField;
use kpde_core::grid::GridField;
use kpde_core::regularization::{regularize, PotentialSpec};
use kpde_core::solver::{solve_deterministic_with_stride, trajectory_norms, apriori_bound, Source};
use kpde_core::verify::{
    consistency_check, default_probes, moderateness_check, monte_carlo_oracle, uniqueness_check,
    EpsilonSchedule, Problem, SolutionNet, Verdict,
};

use crate::config::{CheckKind, ExperimentConfig};
use crate::output::{
    coefficient_csv, grid_field_csv, norm_trace_csv, regularization_csv, trajectory_csv,
    write_check_outputs, ArtifactWriter,
};
use crate::report::{
    iso8601_now, BoundaryReport, CheckOutcome, CoefficientRow, MemberReport, NormRow, NumericReport,
    RegularizationRow, ReportMeta, RunReport,
};
use crate::CliError;

pub fn config_hash(config: &ExperimentConfig) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(crate::output::hex(&hasher.finalize()))
}

struct Timings {
    start: Instant,
    rows: BTreeMap<String, u64>,
}

impl Timings {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            rows: BTreeMap::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        self.rows
            .insert(stage.to_string(), self.start.elapsed().as_millis() as u64);
        self.start = Instant::now();
    }
}

fn meta(timings: Timings) -> ReportMeta {
    ReportMeta {
        timestamp: iso8601_now(),
        durations_ms: timings.rows,
        threads: rayon::current_num_threads(),
    }
}

fn regularization_stage(
    problem: &Problem,
    schedule: &EpsilonSchedule,
) -> Result<(Vec<GridField>, Vec<RegularizationRow>), CliError> {
    let mut fields = Vec::with_capacity(schedule.len());
    let mut rows = Vec::with_capacity(schedule.len());
    for &eps in schedule.values() {
        let q = regularize(&problem.potential, &problem.mollifier, eps, &problem.grid)?;
        rows.push(RegularizationRow {
            eps,
            sup_norm: q.sup_norm(),
            l_eps: problem.mollifier.scale(eps, problem.grid.dim())?,
        });
        fields.push(q);
    }
    Ok((fields, rows))
}

fn member_report(member: &ChaosField, eps: f64, s: f64, p_grid: &[f64]) -> MemberReport {
    let coefficients = member
        .norm_contributions(s)
        .into_iter()
        .map(|c| CoefficientRow {
            gamma: c.index.to_dense(member.trunc().max_dim),
            x_norm: c.x_norm,
            weight: c.weight,
            contribution: c.contribution,
        })
        .collect();
    let kondratiev_norms = p_grid
        .iter()
        .map(|&p| NormRow {
            p,
            norm_sq: member.kondratiev_norm_sq(p),
        })
        .collect();
    MemberReport {
        eps,
        coefficient_count: member.coefficient_count(),
        coefficients,
        kondratiev_norms,
        variance_tail_ratio: member.variance_tail_ratio().unwrap_or(f64::NAN),
    }
}

fn run_checks(
    config: &ExperimentConfig,
    problem: &Problem,
    net: &SolutionNet,
    schedule: &EpsilonSchedule,
) -> Result<Vec<CheckOutcome>, CliError> {
    let v = &config.verification;
    let mut out = Vec::new();
    for check in &v.checks {
        let outcome = match check {
            CheckKind::Moderate => CheckOutcome::Moderate(moderateness_check(
                problem,
                net,
                v.thresholds.stochastic_order,
                &v.thresholds,
            )?),
            CheckKind::Unique => {
                let alt = v.alt_mollifier.as_ref().ok_or_else(|| {
                    CliError::Config("verification.alt_mollifier: required".into())
                })?;
                CheckOutcome::Unique(uniqueness_check(problem, alt, schedule, &v.thresholds)?)
            }
            CheckKind::Consistent => {
                CheckOutcome::Consistent(consistency_check(problem, schedule, &v.thresholds)?)
            }
            CheckKind::Mc => {
                let eps = match (&problem.potential, v.mc_eps) {
                    (PotentialSpec::Bounded { .. }, e) => e,
                    (_, Some(e)) => Some(e),
                    (_, None) => {
                        return Err(CliError::Config(
                            "verification.mc_eps: required for singular potentials".into(),
                        ));
                    }
                };
                let stored_len = net
                    .members
                    .first()
                    .map(ChaosField::stored_len)
                    .unwrap_or(2);
                let probes = default_probes(
                    stored_len,
                    &problem.grid,
                    v.probe_grid[0],
                    v.probe_grid[1],
                );
                CheckOutcome::Mc(monte_carlo_oracle(
                    problem,
                    eps,
                    v.mc_samples,
                    v.seed,
                    &probes,
                )?)
            }
        };
        out.push(outcome);
    }
    Ok(out)
}

fn finalize(
    config: &ExperimentConfig,
    problem: &Problem,
    writer: ArtifactWriter,
    regularization: Vec<RegularizationRow>,
    members: Vec<MemberReport>,
    checks: Vec<CheckOutcome>,
    timings: Timings,
) -> Result<RunReport, CliError> {
    let all_pass = checks.iter().all(|c| c.verdict() == Verdict::Pass);
    let numeric = NumericReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(config)?,
        config: config.clone(),
        boundary: BoundaryReport {
            half_width: problem.grid.half_width,
            two_diffusion_lengths: problem.two_diffusion_lengths(),
        },
        regularization,
        members,
        checks,
        all_pass,
        artifacts: writer.manifest(),
    };
    let report = RunReport {
        meta: meta(timings),
        numeric,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(writer.dir().join("report.json"), &json)
        .map_err(|e| CliError::Runtime(format!("cannot write report.json: {e}")))?;
    Ok(report)
}

/// The full pipeline behind `kpde run` and `kpde verify`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let problem = config.to_problem();
    let schedule = config.schedule.build()?;
    let mut timings = Timings::new();
    let mut writer = ArtifactWriter::new(config.output.directory.as_ref())?;

    let (q_fields, reg_rows) = regularization_stage(&problem, &schedule)?;
    timings.lap("regularize");

    let members: Vec<ChaosField> = schedule
        .values()
        .iter()
        .zip(&q_fields)
        .map(|(_, q)| problem.solve_with_potential(q))
        .collect::<kpde_core::Result<_>>()?;
    let net = SolutionNet {
        schedule: schedule.clone(),
        members,
        potential: problem.potential.clone(),
        mollifier: problem.mollifier.clone(),
    };
    timings.lap("solve");

    let s = config.verification.thresholds.stochastic_order;
    let member_reports: Vec<MemberReport> = schedule
        .values()
        .iter()
        .zip(&net.members)
        .map(|(&eps, m)| member_report(m, eps, s, &config.verification.p_grid))
        .collect();

    let checks = run_checks(config, &problem, &net, &schedule)?;
    timings.lap("verify");

    writer.write("regularization_trace.csv", &regularization_csv(&reg_rows))?;
    if config.output.grid_dumps {
        for (j, q) in q_fields.iter().enumerate() {
            writer.write(&format!("q_eps_{j}.csv"), &grid_field_csv(q, "q_eps"))?;
        }
    }
    for (j, m) in member_reports.iter().enumerate() {
        writer.write(&format!("coefficients_{j}.csv"), &coefficient_csv(m))?;
    }
    if let Some(finest) = net.members.last() {
        let (mean, variance) = finest.mean_variance()?;
        writer.write("mean.csv", &trajectory_csv(&mean, "mean"))?;
        writer.write("variance.csv", &trajectory_csv(&variance, "variance"))?;
    }
    write_check_outputs(&mut writer, &checks)?;
    timings.lap("write");

    finalize(
        config,
        &problem,
        writer,
        reg_rows,
        member_reports,
        checks,
        timings,
    )
}

/// `kpde regularize`: the mollification sweep alone.
pub fn run_regularize(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let problem = config.to_problem();
    let schedule = config.schedule.build()?;
    let mut timings = Timings::new();
    let mut writer = ArtifactWriter::new(config.output.directory.as_ref())?;

    let (q_fields, reg_rows) = regularization_stage(&problem, &schedule)?;
    writer.write("regularization_trace.csv", &regularization_csv(&reg_rows))?;
    if config.output.grid_dumps {
        for (j, q) in q_fields.iter().enumerate() {
            writer.write(&format!("q_eps_{j}.csv"), &grid_field_csv(q, "q_eps"))?;
        }
    }
    timings.lap("regularize");

    finalize(
        config,
        &problem,
        writer,
        reg_rows,
        Vec::new(),
        Vec::new(),
        timings,
    )
}

/// Potential for the single-solve subcommands: bounded potentials sample
/// directly, singular ones need an explicit eps.
fn single_potential(
    config: &ExperimentConfig,
    eps: Option<f64>,
) -> Result<(GridField, Option<f64>), CliError> {
    let problem = config.to_problem();
    match (eps, &problem.potential) {
        (Some(e), _) => Ok((
            regularize(&problem.potential, &problem.mollifier, e, &problem.grid)?,
            Some(e),
        )),
        (None, PotentialSpec::Bounded { expr }) => Ok((expr.sample(&problem.grid), None)),
        (None, _) => Err(CliError::Config(
            "--eps is required: singular potentials must be regularized before solving".into(),
        )),
    }
}

/// `kpde solve-chaos`: one propagator solve with coefficient and statistics
/// dumps.
pub fn run_solve_chaos(config: &ExperimentConfig, eps: Option<f64>) -> Result<RunReport, CliError> {
    config.validate()?;
    let problem = config.to_problem();
    let mut timings = Timings::new();
    let mut writer = ArtifactWriter::new(config.output.directory.as_ref())?;

    let (q, eps_used) = single_potential(config, eps)?;
    let member = problem.solve_with_potential(&q)?;
    timings.lap("solve");

    let s = config.verification.thresholds.stochastic_order;
    let report_row = member_report(&member, eps_used.unwrap_or(f64::NAN), s, &config.verification.p_grid);
    writer.write("coefficients_0.csv", &coefficient_csv(&report_row))?;
    let (mean, variance) = member.mean_variance()?;
    writer.write("mean.csv", &trajectory_csv(&mean, "mean"))?;
    writer.write("variance.csv", &trajectory_csv(&variance, "variance"))?;
    let summary = serde_json::json!({
        "eps": eps_used,
        "coefficient_count": report_row.coefficient_count,
        "kondratiev_norms": report_row.kondratiev_norms,
        "variance_tail_ratio": report_row.variance_tail_ratio,
    });
    writer.write(
        "chaos_summary.json",
        &serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?,
    )?;
    timings.lap("write");

    finalize(
        config,
        &problem,
        writer,
        Vec::new(),
        vec![report_row],
        Vec::new(),
        timings,
    )
}

/// `kpde solve-det`: the zero-index deterministic problem with trajectory and
/// norm-trace dumps.
pub fn run_solve_det(config: &ExperimentConfig, eps: Option<f64>) -> Result<RunReport, CliError> {
    config.validate()?;
    let problem = config.to_problem();
    let mut timings = Timings::new();
    let mut writer = ArtifactWriter::new(config.output.directory.as_ref())?;

    let (q, _) = single_potential(config, eps)?;
    let data = problem.expanded()?;
    let zero = kpde_core::multi_index::MultiIndex::zero();
    let f = data.forces.get(&zero).cloned().unwrap_or_else(Source::zero);
    let g = data
        .initials
        .get(&zero)
        .cloned()
        .unwrap_or_else(|| GridField::zeros(problem.grid));
    let u = solve_deterministic_with_stride(
        &problem.operator,
        &q,
        &f,
        &g,
        problem.horizon,
        problem.dt,
        problem.store_every,
    )?;
    timings.lap("solve");

    // norm trace with the a-priori ceiling; the force integral accumulates
    // by the midpoint rule on the stored mesh
    let m = problem.operator.stability_m();
    let w = problem.operator.growth_bound(&problem.grid);
    let q_sup = q.sup_norm();
    let g_norm = g.l2_norm();
    let (norms, _) = trajectory_norms(&u);
    let mut rows = Vec::with_capacity(norms.len());
    let mut f_l1 = 0.0;
    for (i, &n) in norms.iter().enumerate() {
        let t = u.time(i);
        rows.push((t, n, apriori_bound(m, w, q_sup, t, g_norm, f_l1)));
        if i + 1 < norms.len() {
            f_l1 += u.dt() * f.l2_norm_at(t + 0.5 * u.dt(), &problem.grid);
        }
    }
    writer.write("trajectory.csv", &trajectory_csv(&u, "u"))?;
    writer.write("norm_trace.csv", &norm_trace_csv(&rows))?;
    timings.lap("write");

    finalize(
        config,
        &problem,
        writer,
        Vec::new(),
        Vec::new(),
        Vec::new(),
        timings,
    )
}
