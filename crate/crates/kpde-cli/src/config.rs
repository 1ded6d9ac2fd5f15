//! Experiment configuration: strict JSON schema, named presets, validation.
//!
//! A config file either spells out every section or names a `preset`; any
//! sections present next to a preset replace the preset's section wholesale.
//! `load_config` returns the fully resolved configuration, which round-trips
//! losslessly through serialization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use kpde_core::chaos::{SourceExpr, StochasticData};
use kpde_core::grid::{FieldExpr, GridSpec};
use kpde_core::regularization::{MollifierSpec, Perturbation, PotentialSpec};
use kpde_core::solver::OperatorSpec;
use kpde_core::verify::{CheckThresholds, EpsilonSchedule, Problem};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub operator: OperatorSpec,
    pub potential: PotentialSpec,
    pub mollifier: MollifierSpec,
    pub force: StochasticData<SourceExpr>,
    pub initial: StochasticData<FieldExpr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub grid: GridSpec,
    pub horizon: f64,
    pub dt: f64,
    #[serde(default = "default_store_every")]
    pub store_every: usize,
}

fn default_store_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub max_order: u32,
    pub max_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// eps_j = 2^-(first + j), j = 0..count.
    Dyadic { first: u32, count: usize },
    Explicit { values: Vec<f64> },
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<EpsilonSchedule, CliError> {
        match self {
            ScheduleConfig::Dyadic { first, count } => {
                if *count == 0 {
                    return Err(CliError::Config(
                        "schedule.count: must be at least 1".into(),
                    ));
                }
                Ok(EpsilonSchedule::dyadic(*first, *count))
            }
            ScheduleConfig::Explicit { values } => EpsilonSchedule::new(values.clone())
                .map_err(|e| CliError::Config(format!("schedule.values: {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Moderate,
    Unique,
    Consistent,
    Mc,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Moderate => "moderate",
            CheckKind::Unique => "unique",
            CheckKind::Consistent => "consistent",
            CheckKind::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    #[serde(default)]
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub thresholds: CheckThresholds,
    /// Kondratiev orders reported for every net member.
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Second regularizing net for the uniqueness check.
    #[serde(default)]
    pub alt_mollifier: Option<MollifierSpec>,
    /// Fixed regularization scale for the Monte Carlo oracle when the
    /// potential is singular; bounded potentials are used directly.
    #[serde(default)]
    pub mc_eps: Option<f64>,
    /// Probe layout (times x points) for the Monte Carlo comparison.
    #[serde(default = "default_probe_grid")]
    pub probe_grid: [usize; 2],
}

fn default_p_grid() -> Vec<f64> {
    vec![0.0, 1.1, 2.0]
}

fn default_mc_samples() -> usize {
    10_000
}

fn default_probe_grid() -> [usize; 2] {
    [5, 5]
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            thresholds: CheckThresholds::default(),
            p_grid: default_p_grid(),
            mc_samples: default_mc_samples(),
            seed: 0,
            alt_mollifier: None,
            mc_eps: None,
            probe_grid: default_probe_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub directory: String,
    /// Write one grid dump per eps next to the summary CSVs.
    #[serde(default = "default_true")]
    pub grid_dumps: bool,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_out_dir(),
            grid_dumps: true,
        }
    }
}

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub discretization: DiscretizationConfig,
    pub truncation: TruncationConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Assemble the core problem object.
    pub fn to_problem(&self) -> Problem {
        Problem {
            operator: self.problem.operator.clone(),
            potential: self.problem.potential.clone(),
            mollifier: self.problem.mollifier.clone(),
            force: self.problem.force.clone(),
            initial: self.problem.initial.clone(),
            grid: self.discretization.grid,
            max_order: self.truncation.max_order,
            max_dim: self.truncation.max_dim,
            horizon: self.discretization.horizon,
            dt: self.discretization.dt,
            store_every: self.discretization.store_every,
        }
    }

    /// Fail-fast semantic validation with field paths.
    pub fn validate(&self) -> Result<(), CliError> {
        self.discretization
            .grid
            .validate()
            .map_err(|e| CliError::Config(format!("discretization.grid: {e}")))?;
        if !(self.discretization.dt > 0.0) {
            return Err(CliError::Config(
                "discretization.dt: must be positive".into(),
            ));
        }
        if self.discretization.dt > self.discretization.horizon {
            return Err(CliError::Config(
                "discretization.dt: exceeds the horizon".into(),
            ));
        }
        self.to_problem()
            .validate()
            .map_err(|e| CliError::Config(format!("problem: {e}")))?;
        let schedule = self.schedule.build()?;
        schedule
            .check_resolvable(&self.problem.mollifier, &self.discretization.grid)
            .map_err(|e| CliError::Config(format!("schedule: {e}")))?;
        if let Some(alt) = &self.verification.alt_mollifier {
            schedule
                .check_resolvable(alt, &self.discretization.grid)
                .map_err(|e| CliError::Config(format!("verification.alt_mollifier: {e}")))?;
        }
        if self.verification.checks.contains(&CheckKind::Unique)
            && self.verification.alt_mollifier.is_none()
        {
            return Err(CliError::Config(
                "verification.alt_mollifier: required by the 'unique' check".into(),
            ));
        }
        if self.verification.checks.contains(&CheckKind::Mc) {
            if self.verification.mc_samples < 2 {
                return Err(CliError::Config(
                    "verification.mc_samples: need at least 2".into(),
                ));
            }
            if self.problem.potential.is_singular() && self.verification.mc_eps.is_none() {
                return Err(CliError::Config(
                    "verification.mc_eps: required for singular potentials".into(),
                ));
            }
        }
        if self
            .verification
            .p_grid
            .iter()
            .any(|&p| !(p >= 0.0) || !p.is_finite())
        {
            return Err(CliError::Config(
                "verification.p_grid: orders must be finite and >= 0".into(),
            ));
        }
        if !(self.verification.thresholds.stochastic_order > 1.0) {
            return Err(CliError::Config(
                "verification.thresholds.stochastic_order: must exceed 1".into(),
            ));
        }
        Ok(())
    }
}

/// Partial file form: a preset name plus optional section overrides.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    problem: Option<ProblemConfig>,
    discretization: Option<DiscretizationConfig>,
    truncation: Option<TruncationConfig>,
    schedule: Option<ScheduleConfig>,
    verification: Option<VerificationConfig>,
    output: Option<OutputConfig>,
}

pub const PRESET_NAMES: [&str; 4] = [
    "example-sec4",
    "consistency-cos",
    "uniqueness-negligible",
    "mc-linear-gaussian",
];

fn bump(amplitude: f64, center: f64, width: f64) -> FieldExpr {
    FieldExpr::GaussianBump {
        amplitude,
        center: vec![center],
        width,
    }
}

fn cos_potential() -> PotentialSpec {
    PotentialSpec::Bounded {
        expr: FieldExpr::Trig {
            amplitude: 1.0,
            modes: vec![1.0],
            phases: vec![],
        },
    }
}

fn gaussian_initial(count: usize) -> StochasticData<FieldExpr> {
    let centers = [-1.6, 0.8, -0.8, 1.6, 0.0];
    StochasticData::Gaussian {
        mean: bump(1.0, 0.0, 0.8),
        fluctuations: (0..count)
            .map(|k| bump(0.6 / (k + 1) as f64, centers[k % centers.len()], 0.7))
            .collect(),
    }
}

/// The built-in experiment presets.
pub fn preset_config(name: &str) -> Result<ExperimentConfig, CliError> {
    let grid = |n: usize| GridSpec {
        dim: 1,
        half_width: 5.0,
        points_per_axis: n,
    };
    match name {
        // Heat equation, delta potential, time-white-noise force, Gaussian
        // initial data: the worked singular example. Only |gamma| <= 1
        // coefficients can be nonzero.
        "example-sec4" => Ok(ExperimentConfig {
            problem: ProblemConfig {
                operator: OperatorSpec::Laplacian,
                potential: PotentialSpec::DiracDelta {
                    location: vec![0.0],
                },
                mollifier: MollifierSpec::log_type(1.0),
                force: StochasticData::TimeWhiteNoise,
                initial: gaussian_initial(5),
            },
            discretization: DiscretizationConfig {
                grid: grid(512),
                horizon: 0.5,
                dt: 1e-3,
                store_every: 10,
            },
            truncation: TruncationConfig {
                max_order: 2,
                max_dim: 5,
            },
            schedule: ScheduleConfig::Dyadic { first: 1, count: 5 },
            verification: VerificationConfig {
                checks: vec![CheckKind::Moderate],
                seed: 42,
                ..VerificationConfig::default()
            },
            output: OutputConfig::default(),
        }),
        // Bounded continuous potential: the regularized solutions must
        // converge to the classical chaos solution.
        "consistency-cos" => Ok(ExperimentConfig {
            problem: ProblemConfig {
                operator: OperatorSpec::Laplacian,
                potential: cos_potential(),
                mollifier: MollifierSpec::log_type(1.0),
                force: StochasticData::TimeWhiteNoise,
                initial: gaussian_initial(3),
            },
            discretization: DiscretizationConfig {
                grid: grid(512),
                horizon: 0.5,
                dt: 1e-3,
                store_every: 10,
            },
            truncation: TruncationConfig {
                max_order: 2,
                max_dim: 3,
            },
            schedule: ScheduleConfig::Dyadic { first: 1, count: 6 },
            verification: VerificationConfig {
                checks: vec![CheckKind::Consistent],
                seed: 42,
                ..VerificationConfig::default()
            },
            output: OutputConfig::default(),
        }),
        // Two regularizations of the delta differing by eps^8 * bump: the
        // solution nets must coincide up to the bookkept exponent.
        "uniqueness-negligible" => {
            let base = MollifierSpec::log_type(1.0);
            let mut alt = base.clone();
            alt.perturbation = Some(Perturbation {
                power: 8.0,
                amplitude: 1.0,
                center: vec![1.0],
                width: 0.5,
            });
            Ok(ExperimentConfig {
                problem: ProblemConfig {
                    operator: OperatorSpec::Laplacian,
                    potential: PotentialSpec::DiracDelta {
                        location: vec![0.0],
                    },
                    mollifier: base,
                    force: StochasticData::TimeWhiteNoise,
                    initial: gaussian_initial(2),
                },
                discretization: DiscretizationConfig {
                    grid: grid(512),
                    horizon: 0.5,
                    dt: 1e-3,
                    store_every: 10,
                },
                truncation: TruncationConfig {
                    max_order: 2,
                    max_dim: 2,
                },
                schedule: ScheduleConfig::Dyadic { first: 1, count: 4 },
                verification: VerificationConfig {
                    checks: vec![CheckKind::Unique],
                    seed: 42,
                    alt_mollifier: Some(alt),
                    ..VerificationConfig::default()
                },
                output: OutputConfig::default(),
            })
        }
        // Bounded potential with Gaussian data: chaos statistics against the
        // per-sample Monte Carlo oracle.
        "mc-linear-gaussian" => Ok(ExperimentConfig {
            problem: ProblemConfig {
                operator: OperatorSpec::Laplacian,
                potential: cos_potential(),
                mollifier: MollifierSpec::log_type(1.0),
                force: StochasticData::TimeWhiteNoise,
                initial: StochasticData::Gaussian {
                    mean: bump(1.0, 0.0, 1.0),
                    fluctuations: vec![
                        bump(0.5, -1.0, 0.9),
                        bump(0.35, 1.0, 0.9),
                        bump(0.25, 0.0, 1.2),
                    ],
                },
            },
            discretization: DiscretizationConfig {
                grid: grid(64),
                horizon: 0.25,
                dt: 5e-3,
                store_every: 2,
            },
            truncation: TruncationConfig {
                max_order: 1,
                max_dim: 3,
            },
            schedule: ScheduleConfig::Dyadic { first: 1, count: 3 },
            verification: VerificationConfig {
                checks: vec![CheckKind::Mc],
                seed: 2026,
                ..VerificationConfig::default()
            },
            output: OutputConfig::default(),
        }),
        other => Err(CliError::Config(format!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Parse, resolve the preset if named, and validate.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    config.validate()?;
    Ok(config)
}

/// Parse a config from JSON text (without touching the filesystem).
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, CliError> {
    let mut base = match &raw.preset {
        Some(name) => preset_config(name)?,
        None => {
            let missing: Vec<&str> = [
                ("problem", raw.problem.is_none()),
                ("discretization", raw.discretization.is_none()),
                ("truncation", raw.truncation.is_none()),
                ("schedule", raw.schedule.is_none()),
            ]
            .iter()
            .filter(|(_, m)| *m)
            .map(|(n, _)| *n)
            .collect();
            if !missing.is_empty() {
                return Err(CliError::Config(format!(
                    "missing sections without a preset: {}",
                    missing.join(", ")
                )));
            }
            ExperimentConfig {
                problem: raw.problem.clone().unwrap(),
                discretization: raw.discretization.clone().unwrap(),
                truncation: raw.truncation.clone().unwrap(),
                schedule: raw.schedule.clone().unwrap(),
                verification: raw.verification.clone().unwrap_or_default(),
                output: raw.output.clone().unwrap_or_default(),
            }
        }
    };
    if raw.preset.is_some() {
        if let Some(v) = raw.problem {
            base.problem = v;
        }
        if let Some(v) = raw.discretization {
            base.discretization = v;
        }
        if let Some(v) = raw.truncation {
            base.truncation = v;
        }
        if let Some(v) = raw.schedule {
            base.schedule = v;
        }
        if let Some(v) = raw.verification {
            base.verification = v;
        }
        if let Some(v) = raw.output {
            base.output = v;
        }
    }
    Ok(base)
}
