//! Report document and its on-disk formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{OrbitMode, OutputFormat, ScenarioConfig};
use crate::dynamics::OrbitRecord;
use crate::ergodic::{BoundaryResidual, CurrentAction, DiagnosticReport, MeasureSpec, Pairing};
use crate::error::{CharflowError, Result};
use crate::invariants::{CertificateResult, LinkResult, Obstruction};
use crate::models::{InvariantReport, ModelKind, ModelMetadata};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct TaskOutcome<T> {
    pub status: TaskStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<T> TaskOutcome<T> {
    pub fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Self {
                status: TaskStatus::Ok,
                result: Some(v),
                error: None,
            },
            Err(e) => Self {
                status: TaskStatus::Failed,
                result: None,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn ok(&self) -> Option<&T> {
        self.result.as_ref()
    }

    pub fn failed(&self) -> bool {
        self.status == TaskStatus::Failed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub kind: ModelKind,
    pub metadata: ModelMetadata,
    pub invariants: InvariantReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LkTask {
    pub result: LinkResult,
    /// Recomputed with `α + df` for a random basis combination `f`.
    pub shifted: LinkResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentsTask {
    pub measure: MeasureSpec,
    pub mass: f64,
    pub mass_error: f64,
    pub boundary: BoundaryResidual,
    pub action: CurrentAction,
    /// Every pairing computed, boundary forms first, then `α`.
    pub pairings: Vec<Pairing>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitsTask {
    pub search: OrbitMode,
    pub records: Vec<OrbitRecord>,
    /// Sampled mode only: seeds whose orbit did not close within the horizon.
    pub unclosed: usize,
    pub obstruction: Obstruction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyTask {
    pub certificate: CertificateResult,
    /// Certificate before the orbit action-sign test was applied.
    pub unreconciled_status: crate::invariants::CertificateStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub config: ScenarioConfig,
    pub model: ModelSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lk: Option<TaskOutcome<LkTask>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currents: Option<TaskOutcome<CurrentsTask>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbits: Option<TaskOutcome<OrbitsTask>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodicity: Option<TaskOutcome<DiagnosticReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<TaskOutcome<CertifyTask>>,
    pub checks: Vec<CheckResult>,
    /// Wall-clock seconds per task and in total.
    pub timings: BTreeMap<String, f64>,
}

impl ReportDocument {
    /// Copy with all timings zeroed, for byte comparisons.
    pub fn normalized(&self) -> Self {
        let mut r = self.clone();
        r.timings.values_mut().for_each(|t| *t = 0.0);
        r
    }

    pub fn any_task_failed(&self) -> bool {
        self.lk.as_ref().is_some_and(|t| t.failed())
            || self.currents.as_ref().is_some_and(|t| t.failed())
            || self.orbits.as_ref().is_some_and(|t| t.failed())
            || self.ergodicity.as_ref().is_some_and(|t| t.failed())
            || self.certify.as_ref().is_some_and(|t| t.failed())
    }

    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CharflowError::Internal(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CharflowError::Config(format!("report: {e}")))
    }

    pub fn orbits_csv(&self) -> Option<String> {
        let orbits = self.orbits.as_ref()?.ok()?;
        Some(orbits_csv(&orbits.records))
    }

    pub fn ue_curve(&self) -> Option<String> {
        let d = self.ergodicity.as_ref()?.ok()?;
        Some(ue_curve(d))
    }
}

pub fn orbits_csv(records: &[OrbitRecord]) -> String {
    let mut s = String::from("id,period,action,residual\n");
    for (i, o) in records.iter().enumerate() {
        let _ = writeln!(s, "{i},{:e},{:e},{:e}", o.period, o.action, o.residual);
    }
    s
}

pub fn ue_curve(d: &DiagnosticReport) -> String {
    let mut s = String::from("# horizon max_deviation\n");
    for (h, m) in d.curve() {
        let _ = writeln!(s, "{h:e} {m:e}");
    }
    s
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|source| CharflowError::Io {
        context: format!("writing {}", path.display()),
        source,
    })?;
    Ok(path)
}

/// Writes `report.json`, `orbits.csv` and `ue_curve.dat` under `dir`, as
/// selected by `formats` and available in the report.
pub fn emit_report(report: &ReportDocument, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| CharflowError::Io {
        context: format!("creating {}", dir.display()),
        source,
    })?;
    let mut out = Vec::new();
    for f in formats {
        match f {
            OutputFormat::Json => out.push(write(dir.join("report.json"), &report.to_json()?)?),
            OutputFormat::Csv => {
                if let Some(csv) = report.orbits_csv() {
                    out.push(write(dir.join("orbits.csv"), &csv)?);
                }
            }
            OutputFormat::Plotdata => {
                if let Some(dat) = report.ue_curve() {
                    out.push(write(dir.join("ue_curve.dat"), &dat)?);
                }
            }
        }
    }
    Ok(out)
}
