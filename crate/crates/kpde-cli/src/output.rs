//! Result persistence: CSV tables (comma-separated, header row, '.' decimal)
//! and the report.json document. Decay traces use a gnuplot-friendly layout
//! with log10 columns.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use kpde_core::grid::GridField;
use kpde_core::solver::Trajectory;
use kpde_core::verify::TracePoint;

use crate::report::{ArtifactRow, CheckOutcome, MemberReport, RegularizationRow};
use crate::CliError;

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects written files and their digests for the report manifest.
pub struct ArtifactWriter {
    dir: PathBuf,
    rows: Vec<ArtifactRow>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            rows: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(content.as_bytes());
        self.rows.push(ArtifactRow {
            path: name.to_string(),
            bytes: content.len() as u64,
            sha256: hex(&hasher.finalize()),
        });
        Ok(())
    }

    pub fn manifest(&self) -> Vec<ArtifactRow> {
        self.rows.clone()
    }
}

pub fn regularization_csv(rows: &[RegularizationRow]) -> String {
    let mut s = String::from("eps,sup_norm,l_eps\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.eps, r.sup_norm, r.l_eps);
    }
    s
}

/// One grid field as x[,y],value rows.
pub fn grid_field_csv(field: &GridField, value_name: &str) -> String {
    let spec = field.spec();
    let mut s = if spec.dim() == 1 {
        format!("x,{value_name}\n")
    } else {
        format!("x,y,{value_name}\n")
    };
    for (i, v) in field.values().iter().enumerate() {
        let p = spec.point(i);
        if spec.dim() == 1 {
            let _ = writeln!(s, "{},{}", p[0], v);
        } else {
            let _ = writeln!(s, "{},{},{}", p[0], p[1], v);
        }
    }
    s
}

/// A space-time trajectory as t,x[,y],value rows.
pub fn trajectory_csv(u: &Trajectory, value_name: &str) -> String {
    let spec = u.spec();
    let mut s = if spec.dim() == 1 {
        format!("t,x,{value_name}\n")
    } else {
        format!("t,x,y,{value_name}\n")
    };
    for m in 0..u.len() {
        let t = u.time(m);
        for (i, v) in u.field(m).values().iter().enumerate() {
            let p = spec.point(i);
            if spec.dim() == 1 {
                let _ = writeln!(s, "{},{},{}", t, p[0], v);
            } else {
                let _ = writeln!(s, "{},{},{},{}", t, p[0], p[1], v);
            }
        }
    }
    s
}

/// Per-time norms with the a-priori ceiling.
pub fn norm_trace_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut s = String::from("t,l2_norm,apriori_bound\n");
    for &(t, n, b) in rows {
        let _ = writeln!(s, "{t},{n},{b}");
    }
    s
}

pub fn coefficient_csv(member: &MemberReport) -> String {
    let mut s = String::from("gamma,x_norm,weight,contribution\n");
    for c in &member.coefficients {
        let gamma: Vec<String> = c.gamma.iter().map(u32::to_string).collect();
        let _ = writeln!(
            s,
            "\"[{}]\",{},{},{}",
            gamma.join(","),
            c.x_norm,
            c.weight,
            c.contribution
        );
    }
    s
}

/// Decay trace: x = log10(eps), y = log10(value); non-positive values are
/// skipped (identically zero nets have no log-space representation).
pub fn decay_csv(trace: &[TracePoint], value_name: &str) -> String {
    let mut s = format!("log10_eps,log10_{value_name}\n");
    for p in trace {
        if p.value > 0.0 {
            let _ = writeln!(s, "{},{}", p.eps.log10(), p.value.log10());
        }
    }
    s
}

/// Write the per-check decay traces and stats tables.
pub fn write_check_outputs(w: &mut ArtifactWriter, checks: &[CheckOutcome]) -> Result<(), CliError> {
    for check in checks {
        match check {
            CheckOutcome::Moderate(r) => {
                w.write("check_moderate_decay.csv", &decay_csv(&r.trace, "norm"))?;
            }
            CheckOutcome::Unique(r) => {
                w.write(
                    "check_unique_potential_decay.csv",
                    &decay_csv(&r.potential_trace, "norm"),
                )?;
                w.write(
                    "check_unique_solution_decay.csv",
                    &decay_csv(&r.solution_trace, "norm"),
                )?;
            }
            CheckOutcome::Consistent(r) => {
                w.write("check_consistent_decay.csv", &decay_csv(&r.errors, "error"))?;
            }
            CheckOutcome::Mc(r) => {
                let mut s = String::from(
                    "t,x,chaos_mean,mc_mean,mc_mean_se,chaos_variance,mc_variance,\
                     mc_variance_se,mean_ok,variance_ok\n",
                );
                for p in &r.stats {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{},{}",
                        p.t,
                        p.x[0],
                        p.chaos_mean,
                        p.mc_mean,
                        p.mc_mean_se,
                        p.chaos_variance,
                        p.mc_variance,
                        p.mc_variance_se,
                        p.mean_ok,
                        p.variance_ok
                    );
                }
                w.write("check_mc_probes.csv", &s)?;
            }
        }
    }
    if !checks.is_empty() {
        let verdicts: Vec<serde_json::Value> = checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "check": c.name(),
                    "verdict": c.verdict(),
                })
            })
            .collect();
        let doc = serde_json::to_string_pretty(&serde_json::Value::Array(verdicts))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        w.write("verify_verdicts.json", &doc)?;
    }
    Ok(())
}
