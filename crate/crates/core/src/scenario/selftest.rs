//! Invariant suite over the model catalog.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, ScenarioConfig, Task};
use super::report::{CheckResult, ReportDocument};
use super::run::run_scenario;
use crate::ergodic::Verdict;
use crate::error::Result;
use crate::invariants::{action_sign_obstruction, CertificateStatus, Obstruction};
use crate::models::HamiltonianSpec;
use crate::GOLDEN_RATIO;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfTestEntry {
    pub scenario: String,
    pub checks: Vec<CheckResult>,
    pub failed_tasks: Vec<String>,
    pub seconds: f64,
}

impl SelfTestEntry {
    pub fn passed(&self) -> bool {
        self.failed_tasks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfTestReport {
    pub extended: bool,
    pub entries: Vec<SelfTestEntry>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed())
    }
}

fn scenario(model: ModelConfig, tasks: &[Task], seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(model, tasks.to_vec());
    c.seeds.rng = seed;
    c.fill_defaults();
    c
}

fn failed_tasks(r: &ReportDocument) -> Vec<String> {
    let mut out = Vec::new();
    let mut note = |name: &str, err: Option<&String>| {
        if let Some(e) = err {
            out.push(format!("{name}: {e}"));
        }
    };
    note("lk", r.lk.as_ref().and_then(|t| t.error.as_ref()));
    note("currents", r.currents.as_ref().and_then(|t| t.error.as_ref()));
    note("orbits", r.orbits.as_ref().and_then(|t| t.error.as_ref()));
    note("ergodicity", r.ergodicity.as_ref().and_then(|t| t.error.as_ref()));
    note("certify", r.certify.as_ref().and_then(|t| t.error.as_ref()));
    out
}

fn expect(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

/// Checks against closed-form values known for the catalog models.
fn expectations(r: &ReportDocument) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let lk = r.lk.as_ref().and_then(|t| t.ok()).map(|t| &t.result);
    let orbits = r.orbits.as_ref().and_then(|t| t.ok());
    let verdict = r.ergodicity.as_ref().and_then(|t| t.ok()).map(|d| d.verdict);
    let cert = r.certify.as_ref().and_then(|t| t.ok()).map(|c| &c.certificate);
    match &r.config.model {
        ModelConfig::T3Contact => {
            let want = -(2.0 * PI).powi(3);
            if let Some(l) = lk {
                out.push(expect("t3_lk", (l.value - want).abs() < 5e-3 * want.abs(), format!("{:.6} vs {want:.6}", l.value)));
            }
            if let Some(c) = cert {
                out.push(expect(
                    "t3_certificate",
                    c.status == CertificateStatus::ContactCertified && c.margin >= 0.9,
                    format!("{:?}, margin {:.4}", c.status, c.margin),
                ));
            }
        }
        ModelConfig::Levelset {
            hamiltonian: HamiltonianSpec::Sphere,
            ..
        } => {
            if let Some(l) = lk {
                let want = PI * PI;
                out.push(expect("sphere_lk", (l.value - want).abs() < 1e-2 * want, format!("{:.6} vs {want:.6}", l.value)));
            }
        }
        ModelConfig::Levelset {
            hamiltonian: HamiltonianSpec::Ellipsoid { a, b },
            ..
        } => {
            if let Some(o) = orbits {
                let mut actions: Vec<f64> = o.records.iter().map(|x| x.action).collect();
                actions.sort_by(f64::total_cmp);
                let want = [a.min(*b), a.max(*b)];
                let ok = actions.len() == 2 && actions.iter().zip(want).all(|(x, w)| (x - w).abs() < 1e-6);
                out.push(expect("ellipsoid_orbit_actions", ok, format!("actions {actions:?}, expected {want:?}")));
            }
            if let Some(v) = verdict {
                out.push(expect("ellipsoid_not_ue", v == Verdict::NotUniquelyErgodicEvidence, format!("{v:?}")));
            }
        }
        ModelConfig::MagneticTorus { .. } => {
            if let Some(o) = orbits {
                let best = o
                    .records
                    .iter()
                    .map(|x| (x.characteristic_period() - 2.0 * PI).abs() / (2.0 * PI))
                    .fold(f64::INFINITY, f64::min);
                out.push(expect("magnetic_cyclotron_period", best < 0.1, format!("closest relative deviation {best:.3e}")));
            }
            if let Some(v) = verdict {
                out.push(expect("magnetic_not_ue", v == Verdict::NotUniquelyErgodicEvidence, format!("{v:?}")));
            }
        }
        ModelConfig::HyperbolicUtb { epsilon } => {
            if let (Some(l), true) = (lk, *epsilon == 1.0) {
                out.push(expect(
                    "parabolic_lk_zero",
                    l.value.abs() <= 3.0 * l.error,
                    format!("{:.3e} ± {:.2e}", l.value, l.error),
                ));
            }
            if let (Some(d), true) = (r.ergodicity.as_ref().and_then(|t| t.ok()), *epsilon == 1.0) {
                let decreasing = d.max_deviation.windows(2).all(|w| w[1] < w[0]);
                out.push(expect("parabolic_deviation_decreasing", decreasing, format!("{:?}", d.max_deviation)));
            }
        }
        _ => {}
    }
    out
}

/// Catalog scenarios; the parabolic hyperbolic model is extended only.
pub fn selftest_scenarios(extended: bool, seed: u64) -> Vec<ScenarioConfig> {
    use Task::*;
    let mut out = vec![
        scenario(ModelConfig::T3Contact, &Task::ALL, seed),
        scenario(
            ModelConfig::Levelset {
                hamiltonian: HamiltonianSpec::Sphere,
                level: None,
            },
            &[Lk, Currents, Certify],
            seed,
        ),
        scenario(
            ModelConfig::Levelset {
                hamiltonian: HamiltonianSpec::Ellipsoid { a: 1.0, b: GOLDEN_RATIO },
                level: None,
            },
            &Task::ALL,
            seed,
        ),
        scenario(
            ModelConfig::MagneticTorus {
                potential: None,
                epsilon: 0.05,
            },
            &Task::ALL,
            seed,
        ),
        scenario(ModelConfig::HyperbolicUtb { epsilon: 0.5 }, &[Lk, Currents, Orbits, Certify], seed),
        scenario(ModelConfig::HyperbolicUtb { epsilon: 1.5 }, &[Lk, Currents, Certify], seed),
    ];
    if extended {
        out.push(scenario(ModelConfig::HyperbolicUtb { epsilon: 1.0 }, &[Lk, Currents, Ergodicity], seed));
    }
    out
}

/// Runs every catalog scenario and its consistency checks, plus the
/// synthetic action-sign cases and a determinism rerun.
pub fn selftest(extended: bool, seed: u64) -> Result<SelfTestReport> {
    let mut entries = Vec::new();
    for cfg in selftest_scenarios(extended, seed) {
        let r = run_scenario(&cfg)?;
        let mut checks = r.checks.clone();
        checks.extend(expectations(&r));
        log::info!("selftest {}: {} checks", r.model.name, checks.len());
        entries.push(SelfTestEntry {
            scenario: r.model.name.clone(),
            failed_tasks: failed_tasks(&r),
            seconds: r.timings.get("total").copied().unwrap_or(0.0),
            checks,
        });
    }
    let t0 = std::time::Instant::now();
    let mut checks = vec![
        expect(
            "obstruction_opposite_signs",
            action_sign_obstruction(&[1.0, -1.0], &[true, true]) == Obstruction::Obstructed,
            "actions {+1, -1}".into(),
        ),
        expect(
            "obstruction_same_signs",
            action_sign_obstruction(&[1.0, GOLDEN_RATIO], &[true, true]) == Obstruction::Unobstructed,
            "actions {1, φ}".into(),
        ),
    ];
    let cfg = scenario(ModelConfig::T3Contact, &[Task::Lk, Task::Orbits], seed);
    let a = run_scenario(&cfg)?.normalized().to_json()?;
    let b = run_scenario(&cfg)?.normalized().to_json()?;
    checks.push(expect("determinism", a == b, format!("{} bytes", a.len())));
    entries.push(SelfTestEntry {
        scenario: "synthetic".into(),
        checks,
        failed_tasks: Vec::new(),
        seconds: t0.elapsed().as_secs_f64(),
    });
    Ok(SelfTestReport { extended, entries })
}
