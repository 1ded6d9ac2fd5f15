//! Run report: a reproducible numeric block (bitwise identical for identical
//! config + seed) plus a metadata block holding timestamps and timings.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use kpde_core::verify::{
    ConsistencyReport, McReport, ModeratenessReport, UniquenessReport, Verdict,
};

use crate::config::ExperimentConfig;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub meta: ReportMeta,
    pub numeric: NumericReport,
}

#[derive(Debug, Serialize)]
pub struct ReportMeta {
    /// ISO-8601 UTC; lives here so the numeric block stays reproducible.
    pub timestamp: String,
    pub durations_ms: BTreeMap<String, u64>,
    pub threads: usize,
}

#[derive(Debug, Serialize)]
pub struct NumericReport {
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub boundary: BoundaryReport,
    pub regularization: Vec<RegularizationRow>,
    pub members: Vec<MemberReport>,
    pub checks: Vec<CheckOutcome>,
    pub all_pass: bool,
    pub artifacts: Vec<ArtifactRow>,
}

/// Box geometry against the diffusion length: data and mollifier supports are
/// expected to stay about two diffusion lengths away from the boundary.
#[derive(Debug, Serialize)]
pub struct BoundaryReport {
    pub half_width: f64,
    pub two_diffusion_lengths: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularizationRow {
    pub eps: f64,
    pub sup_norm: f64,
    pub l_eps: f64,
}

#[derive(Debug, Serialize)]
pub struct MemberReport {
    pub eps: f64,
    pub coefficient_count: usize,
    pub coefficients: Vec<CoefficientRow>,
    pub kondratiev_norms: Vec<NormRow>,
    /// Share of the top-order shell in the total variance.
    pub variance_tail_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct CoefficientRow {
    /// Dense count list up to the truncation dimension.
    pub gamma: Vec<u32>,
    pub x_norm: f64,
    /// (2N)^{-p gamma} at the reporting order.
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Debug, Serialize)]
pub struct NormRow {
    pub p: f64,
    pub norm_sq: f64,
}

#[derive(Debug, Serialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckOutcome {
    Moderate(ModeratenessReport),
    Unique(UniquenessReport),
    Consistent(ConsistencyReport),
    Mc(McReport),
}

impl CheckOutcome {
    pub fn verdict(&self) -> Verdict {
        match self {
            CheckOutcome::Moderate(r) => r.verdict,
            CheckOutcome::Unique(r) => r.verdict,
            CheckOutcome::Consistent(r) => r.verdict,
            CheckOutcome::Mc(r) => r.verdict,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CheckOutcome::Moderate(_) => "moderate",
            CheckOutcome::Unique(_) => "unique",
            CheckOutcome::Consistent(_) => "consistent",
            CheckOutcome::Mc(_) => "mc",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRow {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Current UTC time as ISO-8601 (no external dependency).
pub fn iso8601_now() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    let (y, mo, d) = civil_from_days(days);
    format!("{y:04}-{mo:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

// days-since-epoch to (y, m, d); Howard Hinnant's civil-from-days algorithm
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn civil_epoch_and_leap_days() {
        assert_eq!(civil_from_days(0), (1970, 1, 1));
        assert_eq!(civil_from_days(11016), (2000, 2, 29));
        assert_eq!(civil_from_days(19723), (2024, 1, 1));
    }

    #[test]
    fn timestamp_shape() {
        let t = iso8601_now();
        assert_eq!(t.len(), 20);
        assert!(t.ends_with('Z'));
        assert_eq!(&t[4..5], "-");
        assert_eq!(&t[10..11], "T");
    }
}
