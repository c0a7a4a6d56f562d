//! Scenario execution and cross-task consistency checks.

use std::collections::BTreeMap;
use std::time::Instant;

use super::config::{OrbitMode, ScenarioConfig, Task};
use super::report::*;
use crate::dynamics::{
    closed_orbit_through, find_periodic_orbits, orbit_action, OrbitSearchOptions, Parametrization,
};
use crate::ergodic::{
    current_action, current_pairing, observable_battery, random_basis_functions, structure_boundary_residual,
    ue_diagnostic, DiagnosticOptions, MeasureSpec, Thresholds, Verdict,
};
use crate::error::Result;
use crate::forms::{integrate_density, DensitySample, Scheme};
use crate::invariants::{certify_contact, linking_number, orbit_sign_obstruction, reconcile, CertificateStatus, Obstruction};
use crate::models::{check_model_invariants, Model};
use crate::{Point, ScalarFunction};

/// Sign relating the current action to the linking number, `A = SIGN · Lk`.
pub const ACTION_LK_SIGN: f64 = 1.0;

/// Per-task RNG streams derived from the configured seed.
fn stream(seed: u64, task: u64) -> u64 {
    seed ^ task.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, name: &str, f: impl FnOnce() -> Result<T>) -> TaskOutcome<T> {
    let t0 = Instant::now();
    let out = TaskOutcome::from_result(f());
    timings.insert(name.to_string(), t0.elapsed().as_secs_f64());
    if let Some(e) = &out.error {
        log::warn!("task {name} failed: {e}");
    }
    out
}

fn shifted_model(model: &Model, count: usize, seed: u64) -> Result<Model> {
    let terms = random_basis_functions(model, 2, count, seed).into_iter().map(|f| (0.5, f)).collect();
    model.with_shifted_primitive(&ScalarFunction::combination("shift", terms))
}

fn run_lk(model: &Model, cfg: &ScenarioConfig) -> Result<LkTask> {
    let scheme = cfg.quadrature.unwrap_or(cfg.model.default_lk_quadrature()).scheme(stream(cfg.seeds.rng, 1));
    let result = linking_number(model, scheme)?;
    let shifted = linking_number(&shifted_model(model, 5, stream(cfg.seeds.rng, 2))?, scheme)?;
    Ok(LkTask { result, shifted })
}

fn run_currents(model: &Model, cfg: &ScenarioConfig) -> Result<CurrentsTask> {
    let scheme = Scheme::Grid {
        resolution: cfg.currents.resolution,
    };
    let measure = MeasureSpec::volume(scheme);
    let mass = integrate_density(model, scheme, |_| Ok(DensitySample::exact(1.0)))?;
    let boundary = structure_boundary_residual(model, &measure, cfg.currents.random_exact, stream(cfg.seeds.rng, 3))?;
    let action = current_action(model, &measure)?;
    let mut pairings = boundary.pairings.clone();
    pairings.push(current_pairing(model, &measure, &model.alpha)?);
    Ok(CurrentsTask {
        measure,
        mass: mass.value,
        mass_error: mass.error,
        boundary,
        action,
        pairings,
    })
}

fn run_orbits(model: &Model, cfg: &ScenarioConfig) -> Result<OrbitsTask> {
    let o = &cfg.orbits;
    let search = o.search.clone().unwrap_or_else(|| cfg.model.default_orbit_mode());
    let max_period = o.max_period.unwrap_or_else(|| cfg.model.default_max_period());
    let tol = o.tol.unwrap_or(1e-8);
    let seeds = o.seeds.unwrap_or(24);
    let param = o.parametrization.unwrap_or_default();
    let (records, unclosed) = match &search {
        OrbitMode::Section { section } => {
            let opts = OrbitSearchOptions {
                seeds,
                max_period,
                tol,
                seed: stream(cfg.seeds.rng, 4),
                parametrization: param,
                ..Default::default()
            };
            (find_periodic_orbits(model, section, &opts)?, 0)
        }
        OrbitMode::Sampled => {
            let mut records = Vec::new();
            let mut unclosed = 0;
            for p in model.sample_points(seeds, stream(cfg.seeds.rng, 4)) {
                match closed_orbit_through(model, &p, max_period, tol, param)? {
                    Some(r) => records.push(r),
                    None => unclosed += 1,
                }
            }
            (records, unclosed)
        }
    };
    Ok(OrbitsTask {
        search,
        obstruction: orbit_sign_obstruction(&records),
        records,
        unclosed,
    })
}

fn run_ergodicity(model: &Model, cfg: &ScenarioConfig, orbits: Option<&OrbitsTask>) -> Result<crate::ergodic::DiagnosticReport> {
    let e = &cfg.ergodicity;
    let cap = e.observable_cap.unwrap_or_else(|| cfg.model.default_observable_cap());
    let observables = observable_battery(model, cap);
    let mut seeds: Vec<Point> = orbits.map_or(Vec::new(), |o| o.records.iter().map(|r| r.base_point()).collect());
    seeds.truncate(cfg.seeds.count / 2);
    let random = cfg.seeds.count.max(8) - seeds.len();
    seeds.extend(model.sample_points(random, stream(cfg.seeds.rng, 5)));
    let opts = DiagnosticOptions {
        parametrization: e.parametrization,
        tol: cfg.integrator.tol,
        scheme: Some(Scheme::Grid {
            resolution: e.space_resolution,
        }),
        thresholds: Thresholds {
            fail_threshold: e.fail_threshold,
            decay_per_decade: e.decay_per_decade,
        },
    };
    ue_diagnostic(model, &observables, &seeds, &e.horizons, &opts)
}

fn run_certify(model: &Model, cfg: &ScenarioConfig, orbits: Option<&OrbitsTask>) -> Result<CertifyTask> {
    let cert = certify_contact(model, cfg.certify.basis_cap, cfg.certify.samples, stream(cfg.seeds.rng, 6))?;
    let unreconciled_status = cert.status;
    let obstruction = orbits.map_or(Obstruction::Unobstructed, |o| o.obstruction);
    Ok(CertifyTask {
        certificate: reconcile(cert, obstruction),
        unreconciled_status,
    })
}

/// Builds the model, runs the configured tasks in the fixed order and
/// evaluates the consistency checks that apply to what ran.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ReportDocument> {
    let t0 = Instant::now();
    let mut timings = BTreeMap::new();
    let model = cfg.model.build()?;
    let invariants = check_model_invariants(&model, 64, 256, stream(cfg.seeds.rng, 7))?;
    let wants = |t: Task| cfg.tasks.contains(&t);
    let lk = wants(Task::Lk).then(|| timed(&mut timings, "lk", || run_lk(&model, cfg)));
    let currents = wants(Task::Currents).then(|| timed(&mut timings, "currents", || run_currents(&model, cfg)));
    let orbits = wants(Task::Orbits).then(|| timed(&mut timings, "orbits", || run_orbits(&model, cfg)));
    let orbit_data = orbits.as_ref().and_then(|o| o.ok());
    let ergodicity = wants(Task::Ergodicity)
        .then(|| timed(&mut timings, "ergodicity", || run_ergodicity(&model, cfg, orbit_data)));
    let certify = wants(Task::Certify).then(|| timed(&mut timings, "certify", || run_certify(&model, cfg, orbit_data)));
    let mut report = ReportDocument {
        schema_version: SCHEMA_VERSION,
        tool: "charflow".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        model: ModelSummary {
            name: model.name.clone(),
            kind: model.kind.clone(),
            metadata: model.metadata.clone(),
            invariants,
        },
        lk,
        currents,
        orbits,
        ergodicity,
        certify,
        checks: Vec::new(),
        timings: BTreeMap::new(),
    };
    report.checks = checks(&model, &report)?;
    timings.insert("total".into(), t0.elapsed().as_secs_f64());
    report.timings = timings;
    Ok(report)
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

/// Agreement within three combined errors, with a floor for rounding.
fn agree(a: f64, ea: f64, b: f64, eb: f64) -> bool {
    (a - b).abs() <= 3.0 * ea.hypot(eb) + 1e-10 * (1.0 + a.abs().max(b.abs()))
}

fn checks(model: &Model, r: &ReportDocument) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let inv = &r.model.invariants;
    out.push(check(
        "model_invariants",
        inv.passes(),
        format!(
            "exactness {:.2e}, min comass {:.3e}, h1 closed {:.2e}, mu positive {}",
            inv.exactness_residual, inv.min_comass, inv.h1_closed_residual, inv.mu_positive
        ),
    ));
    let lk = r.lk.as_ref().and_then(|t| t.ok());
    if let Some(lk) = lk {
        let (a, b) = (&lk.result, &lk.shifted);
        out.push(check(
            "lk_primitive_independence",
            agree(a.value, a.error, b.value, b.error),
            format!("{:.9} vs {:.9} (errors {:.2e}, {:.2e})", a.value, b.value, a.error, b.error),
        ));
        if let Some(d) = &a.domain {
            out.push(check(
                "boundary_formula",
                d.consistent,
                format!("surface {:.6} ± {:.2e}, domain {:.6} ± {:.2e}", a.value, a.error, d.value, d.error),
            ));
        }
    }
    if let Some(c) = r.currents.as_ref().and_then(|t| t.ok()) {
        let bound = 1e-6 * c.mass.abs();
        out.push(check(
            "structure_boundary",
            c.boundary.max_abs < bound,
            format!("max |<X⊗μ, β>| = {:.3e} over {} forms, bound {:.3e}", c.boundary.max_abs, c.boundary.pairings.len(), bound),
        ));
        out.push(check(
            "current_primitive_independence",
            c.action.primitive_independent,
            format!("{:.9} vs {:.9}", c.action.value, c.action.shifted_value),
        ));
        if let Some(lk) = lk {
            let l = &lk.result;
            out.push(check(
                "current_lk_identity",
                agree(c.action.value, c.action.error, ACTION_LK_SIGN * l.value, l.error),
                format!(
                    "A = {:.9} ± {:.2e}, Lk = {:.9} ± {:.2e}, sign {:+}",
                    c.action.value, c.action.error, l.value, l.error, ACTION_LK_SIGN
                ),
            ));
        }
    }
    let orbits = r.orbits.as_ref().and_then(|t| t.ok());
    if let Some(o) = orbits {
        let tol = r.config.orbits.tol.unwrap_or(1e-8);
        let worst = o.records.iter().map(|x| x.residual).fold(0.0, f64::max);
        out.push(check(
            "orbit_closure",
            worst < tol,
            format!("{} orbits, max residual {:.2e}", o.records.len(), worst),
        ));
        let mut worst_rel = 0.0f64;
        for rec in &o.records {
            let other = match rec.parametrization {
                Parametrization::CharacteristicField => Parametrization::HamiltonianField,
                Parametrization::HamiltonianField => Parametrization::CharacteristicField,
            };
            let a = orbit_action(model, rec, other)?;
            worst_rel = worst_rel.max((a - rec.action).abs() / (1.0 + rec.action.abs()));
        }
        out.push(check(
            "orbit_action_parametrization",
            worst_rel < 1e-6,
            format!("max relative action difference {worst_rel:.2e}"),
        ));
        if let (Some(t), OrbitMode::Sampled) = (r.model.metadata.common_period, &o.search) {
            let periods: Vec<f64> = o.records.iter().map(|x| x.characteristic_period()).collect();
            let spread = periods.iter().map(|p| (p - t).abs() / t).fold(0.0, f64::max);
            out.push(check(
                "common_period",
                o.unclosed == 0 && !periods.is_empty() && spread < 1e-6,
                format!("{} closed, {} unclosed, max relative deviation {spread:.2e} from {t:.9}", periods.len(), o.unclosed),
            ));
        }
    }
    let diag = r.ergodicity.as_ref().and_then(|t| t.ok());
    if let (Some(d), Some(o)) = (diag, orbits) {
        // Two closed orbits with different actions carry two invariant measures.
        let mut actions: Vec<f64> = o.records.iter().map(|x| x.action / x.characteristic_period()).collect();
        actions.sort_by(f64::total_cmp);
        let distinct = actions.windows(2).any(|w| (w[1] - w[0]).abs() > 1e-6 * (1.0 + w[1].abs()));
        out.push(check(
            "ue_necessary_condition",
            !distinct || d.verdict != Verdict::ConsistentWithUniqueErgodicity,
            format!("distinct orbit measures {distinct}, verdict {:?}", d.verdict),
        ));
    }
    let cert = r.certify.as_ref().and_then(|t| t.ok());
    if let Some(c) = cert {
        let cert = &c.certificate;
        if c.unreconciled_status == CertificateStatus::ContactCertified {
            out.push(check(
                "certification_soundness",
                cert.revalidated_margin >= 0.95 * cert.margin,
                format!("margin {:.4e}, revalidated {:.4e}", cert.margin, cert.revalidated_margin),
            ));
            if let Some(o) = orbits.filter(|o| !o.records.is_empty()) {
                out.push(check(
                    "criterion_consistency",
                    o.obstruction == Obstruction::Unobstructed,
                    format!("{} orbits, {:?}", o.records.len(), o.obstruction),
                ));
            }
        }
    }
    if let (Some(lk), Some(c)) = (lk, cert) {
        let l = &lk.result;
        let nonzero = l.value.abs() > 3.0 * l.error + 1e-10;
        let certified = c.certificate.status == CertificateStatus::ContactCertified;
        match (nonzero, certified, diag) {
            (false, _, _) => out.push(check(
                "theorem_consistency",
                true,
                format!("Lk = {:.3e} ± {:.2e} indistinguishable from 0; no constraint", l.value, l.error),
            )),
            (true, true, _) => out.push(check("theorem_consistency", true, "Lk ≠ 0 and contact certified".into())),
            (true, false, Some(d)) => out.push(check(
                "theorem_consistency",
                d.verdict == Verdict::NotUniquelyErgodicEvidence,
                format!("Lk ≠ 0, certificate {:?}, verdict {:?}", c.certificate.status, d.verdict),
            )),
            (true, false, None) => {}
        }
    }
    Ok(out)
}
