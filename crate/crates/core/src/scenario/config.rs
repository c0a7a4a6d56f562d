//! Strict scenario configuration in TOML.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Parametrization, SectionSpec};
use crate::error::{CharflowError, Result};
use crate::forms::Scheme;
use crate::models::{
    build_hyperbolic_utb, build_levelset, build_magnetic_torus, build_t3_contact, HamiltonianSpec, LevelSetSpec,
    MagneticSpec, Model, TrigTerm,
};
use crate::{Point, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    T3Contact,
    Levelset {
        hamiltonian: HamiltonianSpec,
        /// Defaults to 1/2 for the sphere and 1 for ellipsoids.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level: Option<f64>,
    },
    MagneticTorus {
        /// Defaults to `f = sin x`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<Vec<TrigTerm>>,
        epsilon: f64,
    },
    HyperbolicUtb {
        epsilon: f64,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelConfig::T3Contact => build_t3_contact(),
            ModelConfig::Levelset { hamiltonian, level } => build_levelset(LevelSetSpec {
                hamiltonian: hamiltonian.clone(),
                level: level.unwrap_or_else(|| default_level(hamiltonian)),
            }),
            ModelConfig::MagneticTorus { potential, epsilon } => build_magnetic_torus(MagneticSpec {
                potential: potential.clone().unwrap_or_else(|| MagneticSpec::sin_x(*epsilon).potential),
                epsilon: *epsilon,
            }),
            ModelConfig::HyperbolicUtb { epsilon } => build_hyperbolic_utb(*epsilon),
        }
    }

    fn fill_defaults(&mut self) {
        match self {
            ModelConfig::Levelset { hamiltonian, level } if level.is_none() => {
                *level = Some(default_level(hamiltonian));
            }
            ModelConfig::MagneticTorus { potential, epsilon } if potential.is_none() => {
                *potential = Some(MagneticSpec::sin_x(*epsilon).potential);
            }
            _ => {}
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match self {
            ModelConfig::T3Contact => Ok(()),
            ModelConfig::Levelset { hamiltonian, level } => {
                if let HamiltonianSpec::Ellipsoid { a, b } = hamiltonian {
                    positive("model.hamiltonian.a", *a)?;
                    positive("model.hamiltonian.b", *b)?;
                }
                if let HamiltonianSpec::Polynomial { terms } = hamiltonian {
                    if level.is_none() {
                        return Err("model.level: required for polynomial hamiltonians".into());
                    }
                    if terms.terms.is_empty() {
                        return Err("model.hamiltonian.terms: polynomial has no terms".into());
                    }
                }
                if let Some(l) = level {
                    finite("model.level", *l)?;
                }
                Ok(())
            }
            ModelConfig::MagneticTorus { epsilon, .. } | ModelConfig::HyperbolicUtb { epsilon } => {
                if !(*epsilon > 0.0) {
                    return Err(format!("model.epsilon: {}", CharflowError::NonPositiveEpsilon(*epsilon)));
                }
                Ok(())
            }
        }
    }

    /// Section and search horizon used when the config names none.
    pub fn default_orbit_mode(&self) -> OrbitMode {
        match self {
            ModelConfig::T3Contact => OrbitMode::Section {
                section: SectionSpec {
                    direction: -1,
                    ..SectionSpec::new(Point::new(0.0, 0.0, PI / 4.0, 0.0), Vector::new(1.0, 0.0, 0.0, 0.0))
                        .with_frozen(&[2])
                },
            },
            ModelConfig::Levelset { .. } => OrbitMode::Section {
                section: SectionSpec::new(Point::zeros(), Vector::new(0.0, 1.0, 0.0, 1.0)),
            },
            ModelConfig::MagneticTorus { .. } => OrbitMode::Section {
                section: SectionSpec::new(Point::zeros(), Vector::new(0.0, 0.0, 1.0, 0.0)),
            },
            ModelConfig::HyperbolicUtb { .. } => OrbitMode::Sampled,
        }
    }

    pub fn default_max_period(&self) -> f64 {
        match self {
            ModelConfig::T3Contact => 10.0,
            ModelConfig::Levelset { .. } => 6.0,
            ModelConfig::MagneticTorus { .. } => 4.0 * PI,
            ModelConfig::HyperbolicUtb { epsilon } if *epsilon < 1.0 => 4.0 * PI / (1.0 - epsilon * epsilon).sqrt(),
            ModelConfig::HyperbolicUtb { .. } => 20.0,
        }
    }

    pub fn default_observable_cap(&self) -> usize {
        match self {
            ModelConfig::T3Contact | ModelConfig::MagneticTorus { .. } => 1,
            _ => 2,
        }
    }

    pub fn default_lk_quadrature(&self) -> QuadratureConfig {
        match self {
            ModelConfig::Levelset { .. } => QuadratureConfig::MonteCarlo { samples: 1_000_000 },
            ModelConfig::HyperbolicUtb { .. } => QuadratureConfig::Grid { resolution: 24 },
            _ => QuadratureConfig::Grid { resolution: 64 },
        }
    }
}

fn default_level(h: &HamiltonianSpec) -> f64 {
    match h {
        HamiltonianSpec::Sphere => 0.5,
        _ => 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Lk,
    Currents,
    Orbits,
    Ergodicity,
    Certify,
}

impl Task {
    /// Run order.
    pub const ALL: [Task; 5] = [Task::Lk, Task::Currents, Task::Orbits, Task::Ergodicity, Task::Certify];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Lk => "lk",
            Task::Currents => "currents",
            Task::Orbits => "orbits",
            Task::Ergodicity => "ergodicity",
            Task::Certify => "certify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadratureConfig {
    Grid { resolution: usize },
    MonteCarlo { samples: usize },
}

impl QuadratureConfig {
    pub fn scheme(&self, seed: u64) -> Scheme {
        match *self {
            QuadratureConfig::Grid { resolution } => Scheme::Grid { resolution },
            QuadratureConfig::MonteCarlo { samples } => Scheme::MonteCarlo { samples, seed },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum OrbitMode {
    /// First-return search on a section.
    Section { section: SectionSpec },
    /// Closure test of the orbit through each sampled seed point.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_integrator_tol")]
    pub tol: f64,
}

fn default_integrator_tol() -> f64 {
    1e-8
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tol: default_integrator_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub rng: u64,
    /// Seed points for ergodic averages and sampled orbit checks.
    #[serde(default = "default_seed_count")]
    pub count: usize,
}

fn default_seed_count() -> usize {
    8
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            rng: 0,
            count: default_seed_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentsConfig {
    #[serde(default = "default_space_resolution")]
    pub resolution: usize,
    #[serde(default = "default_random_exact")]
    pub random_exact: usize,
}

fn default_space_resolution() -> usize {
    24
}

fn default_random_exact() -> usize {
    10
}

impl Default for CurrentsConfig {
    fn default() -> Self {
        Self {
            resolution: default_space_resolution(),
            random_exact: default_random_exact(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<OrbitMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parametrization: Option<Parametrization>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicityConfig {
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable_cap: Option<usize>,
    #[serde(default = "default_fail")]
    pub fail_threshold: f64,
    #[serde(default = "default_decay")]
    pub decay_per_decade: f64,
    #[serde(default)]
    pub parametrization: Parametrization,
    #[serde(default = "default_space_resolution")]
    pub space_resolution: usize,
}

fn default_horizons() -> Vec<f64> {
    vec![1e2, 1e3, 1e4]
}

fn default_fail() -> f64 {
    0.1
}

fn default_decay() -> f64 {
    0.5
}

impl Default for ErgodicityConfig {
    fn default() -> Self {
        Self {
            horizons: default_horizons(),
            observable_cap: None,
            fail_threshold: default_fail(),
            decay_per_decade: default_decay(),
            parametrization: Parametrization::default(),
            space_resolution: default_space_resolution(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default = "default_basis_cap")]
    pub basis_cap: usize,
    #[serde(default = "default_cert_samples")]
    pub samples: usize,
}

fn default_basis_cap() -> usize {
    3
}

fn default_cert_samples() -> usize {
    4096
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            basis_cap: default_basis_cap(),
            samples: default_cert_samples(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    Plotdata,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_path")]
    pub path: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_out_path() -> String {
    "charflow-out".into()
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: default_out_path(),
            formats: default_formats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub seeds: SeedConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureConfig>,
    #[serde(default)]
    pub currents: CurrentsConfig,
    #[serde(default)]
    pub orbits: OrbitsConfig,
    #[serde(default)]
    pub ergodicity: ErgodicityConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_tasks() -> Vec<Task> {
    Task::ALL.to_vec()
}

fn positive(field: &str, v: f64) -> std::result::Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{field}: must be positive, got {v}"))
    }
}

fn finite(field: &str, v: f64) -> std::result::Result<(), String> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(format!("{field}: must be finite, got {v}"))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> std::result::Result<(), String> {
    if v >= min {
        Ok(())
    } else {
        Err(format!("{field}: must be at least {min}, got {v}"))
    }
}

impl ScenarioConfig {
    /// Config with every model-dependent default made explicit.
    pub fn new(model: ModelConfig, tasks: Vec<Task>) -> Self {
        let mut c = Self {
            model,
            tasks,
            integrator: IntegratorConfig::default(),
            seeds: SeedConfig::default(),
            quadrature: None,
            currents: CurrentsConfig::default(),
            orbits: OrbitsConfig::default(),
            ergodicity: ErgodicityConfig::default(),
            certify: CertifyConfig::default(),
            output: OutputConfig::default(),
        };
        c.fill_defaults();
        c
    }

    pub fn fill_defaults(&mut self) {
        self.model.fill_defaults();
        self.tasks.sort();
        self.tasks.dedup();
        self.quadrature.get_or_insert_with(|| self.model.default_lk_quadrature());
        let o = &mut self.orbits;
        o.search.get_or_insert_with(|| self.model.default_orbit_mode());
        o.max_period.get_or_insert_with(|| self.model.default_max_period());
        o.tol.get_or_insert(1e-8);
        o.seeds.get_or_insert(24);
        o.parametrization.get_or_insert(Parametrization::CharacteristicField);
        self.ergodicity
            .observable_cap
            .get_or_insert_with(|| self.model.default_observable_cap());
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        self.model.validate()?;
        positive("integrator.tol", self.integrator.tol)?;
        at_least("seeds.count", self.seeds.count, 1)?;
        match self.quadrature {
            Some(QuadratureConfig::Grid { resolution }) => at_least("quadrature.resolution", resolution, 2)?,
            Some(QuadratureConfig::MonteCarlo { samples }) => at_least("quadrature.samples", samples, 16)?,
            None => {}
        }
        at_least("currents.resolution", self.currents.resolution, 2)?;
        if let Some(t) = self.orbits.max_period {
            positive("orbits.max_period", t)?;
        }
        if let Some(t) = self.orbits.tol {
            positive("orbits.tol", t)?;
        }
        if let Some(n) = self.orbits.seeds {
            at_least("orbits.seeds", n, 1)?;
        }
        if let Some(OrbitMode::Section { section }) = &self.orbits.search {
            if section.normal.iter().all(|v| *v == 0.0) {
                return Err("orbits.search.section.normal: must be nonzero".into());
            }
        }
        let e = &self.ergodicity;
        if e.horizons.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err("ergodicity.horizons: must be positive".into());
        }
        if e.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err("ergodicity.horizons: must be strictly increasing".into());
        }
        positive("ergodicity.fail_threshold", e.fail_threshold)?;
        positive("ergodicity.decay_per_decade", e.decay_per_decade)?;
        at_least("ergodicity.space_resolution", e.space_resolution, 2)?;
        at_least("certify.basis_cap", self.certify.basis_cap, 1)?;
        at_least("certify.samples", self.certify.samples, 1)?;
        Ok(())
    }

    /// TOML echo; re-parses to an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CharflowError::Config(e.to_string()))
    }
}

/// Strict parse: unknown keys, type mismatches and missing fields are
/// errors naming the field, with a suggestion for misspelled keys.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let e = probe_model(text).unwrap_or(e);
        CharflowError::Config(describe(&e, text))
    })?;
    cfg.validate().map_err(CharflowError::Config)?;
    cfg.fill_defaults();
    Ok(cfg)
}

/// Top-level layout with the model table typed as one variant, so that
/// errors inside it keep their source span.
#[derive(Deserialize)]
#[allow(dead_code)]
struct Probe<T> {
    model: T,
    tasks: Option<toml::Value>,
    integrator: Option<toml::Value>,
    seeds: Option<toml::Value>,
    quadrature: Option<toml::Value>,
    currents: Option<toml::Value>,
    orbits: Option<toml::Value>,
    ergodicity: Option<toml::Value>,
    certify: Option<toml::Value>,
    output: Option<toml::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct LevelsetProbe {
    kind: String,
    hamiltonian: toml::Value,
    level: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct MagneticProbe {
    kind: String,
    potential: Option<Vec<TrigTerm>>,
    epsilon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct HyperbolicProbe {
    kind: String,
    epsilon: f64,
}

fn probe_model(text: &str) -> Option<toml::de::Error> {
    let v: toml::Table = toml::from_str(text).ok()?;
    let kind = v.get("model")?.get("kind")?.as_str()?;
    match kind {
        "levelset" => toml::from_str::<Probe<LevelsetProbe>>(text).err(),
        "magnetic_torus" => toml::from_str::<Probe<MagneticProbe>>(text).err(),
        "hyperbolic_utb" => toml::from_str::<Probe<HyperbolicProbe>>(text).err(),
        _ => None,
    }
}

fn describe(e: &toml::de::Error, text: &str) -> String {
    let msg = e.message().trim().to_string();
    let mut out = match e.span() {
        Some(span) => {
            let start = span.start.min(text.len());
            let line = text[..start].matches('\n').count() + 1;
            let line_start = text[..start].rfind('\n').map_or(0, |i| i + 1);
            let col = start - line_start + 1;
            let src = text[line_start..].lines().next().unwrap_or("");
            match src.split_once('=') {
                Some((key, _)) if !src.trim_start().starts_with('[') => {
                    format!("line {line}, column {col}: `{}`: {msg}", key.trim())
                }
                _ => format!("line {line}, column {col}: {msg}"),
            }
        }
        None => msg.clone(),
    };
    if let Some(s) = suggestion(&msg) {
        out.push_str(&format!("; did you mean `{s}`?"));
    }
    out
}

/// Closest expected name for an unknown field or variant.
fn suggestion(msg: &str) -> Option<String> {
    let unknown = ["unknown field `", "unknown variant `"]
        .iter()
        .find_map(|p| msg.find(p).map(|i| &msg[i + p.len()..]))?;
    let bad = &unknown[..unknown.find('`')?];
    let expected = &msg[msg.find("expected")?..];
    let names: Vec<&str> = expected.split('`').skip(1).step_by(2).collect();
    names
        .into_iter()
        .map(|n| (strsim::damerau_levenshtein(bad, n), n))
        .filter(|(d, n)| *d <= 2.max(n.len() / 3))
        .min()
        .map(|(_, n)| n.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("tasks = [\"lk\"]\n[model]\nkind = \"t3_contact\"\n").unwrap();
        assert_eq!(c.tasks, vec![Task::Lk]);
        assert_eq!(c.quadrature, Some(QuadratureConfig::Grid { resolution: 64 }));
        assert_eq!(c.integrator.tol, 1e-8);
        assert!(c.orbits.search.is_some());
        let again = parse_config(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn negative_epsilon_rejected() {
        let e = parse_config("[model]\nkind = \"magnetic_torus\"\nepsilon = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("epsilon must be positive"), "{e}");
    }

    #[test]
    fn misspelled_key_suggests_field() {
        let e = parse_config("[modle]\nkind = \"t3_contact\"\n").unwrap_err();
        let s = e.to_string();
        assert!(s.contains("modle") && s.contains("did you mean `model`"), "{s}");
        let e = parse_config("[model]\nkind = \"magnetic_torus\"\nepsilonn = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("did you mean `epsilon`"), "{e}");
        let e = parse_config("[model]\nkind = \"hyperbolic_utbb\"\nepsilon = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("did you mean `hyperbolic_utb`"), "{e}");
    }

    #[test]
    fn type_mismatch_and_missing_field_named() {
        let e = parse_config("[model]\nkind = \"hyperbolic_utb\"\nepsilon = \"big\"\n").unwrap_err();
        assert!(e.to_string().contains("line 3") && e.to_string().contains("`epsilon`"), "{e}");
        let e = parse_config("[model]\nkind = \"hyperbolic_utb\"\n").unwrap_err();
        assert!(e.to_string().contains("epsilon"), "{e}");
        let e = parse_config("tasks = [\"lk\"]\n").unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"
tasks = ["orbits", "ergodicity"]
[model]
kind = "levelset"
level = 1.0
[model.hamiltonian]
shape = "ellipsoid"
a = 1.0
b = 1.6180339887
[seeds]
rng = 7
count = 8
[ergodicity]
horizons = [10.0, 100.0, 1000.0]
[orbits]
max_period = 6.0
[orbits.search]
mode = "section"
[orbits.search.section]
origin = [0.0, 0.0, 0.0, 0.0]
normal = [0.0, 1.0, 0.0, 1.0]
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.seeds.rng, 7);
        assert_eq!(parse_config(&c.to_toml().unwrap()).unwrap(), c);
        let m = c.model.build().unwrap();
        assert!(m.name.starts_with("ellipsoid"));
    }
}
