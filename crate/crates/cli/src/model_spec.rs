//! Short model names accepted on the command line.

use charflow::models::HamiltonianSpec;
use charflow::scenario::ModelConfig;

const KNOWN: &[&str] = &["t3_contact", "sphere", "ellipsoid(a,b)", "magnetic_torus(eps)", "hyperbolic_utb(eps)"];

fn args(s: &str, name: &str, n: usize) -> Result<Vec<f64>, String> {
    let inner = s
        .strip_prefix(name)
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("`{s}`: expected {name}({})", vec!["x"; n].join(",")))?;
    let vals: Vec<f64> = inner
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{s}`: bad number `{}`: {e}", v.trim())))
        .collect::<Result<_, _>>()?;
    if vals.len() != n {
        return Err(format!("`{s}`: {name} takes {n} argument(s), got {}", vals.len()));
    }
    Ok(vals)
}

/// Parses `t3_contact`, `sphere`, `ellipsoid(a,b)`, `magnetic_torus(eps)`
/// or `hyperbolic_utb(eps)`.
pub fn parse_model(s: &str) -> Result<ModelConfig, String> {
    let s = s.trim();
    let head = s.split('(').next().unwrap_or("");
    match head {
        "t3_contact" | "t3" if !s.contains('(') => Ok(ModelConfig::T3Contact),
        "sphere" if !s.contains('(') => Ok(ModelConfig::Levelset {
            hamiltonian: HamiltonianSpec::Sphere,
            level: None,
        }),
        "ellipsoid" => {
            let v = args(s, head, 2)?;
            Ok(ModelConfig::Levelset {
                hamiltonian: HamiltonianSpec::Ellipsoid { a: v[0], b: v[1] },
                level: None,
            })
        }
        "magnetic_torus" => Ok(ModelConfig::MagneticTorus {
            potential: None,
            epsilon: args(s, head, 1)?[0],
        }),
        "hyperbolic_utb" => Ok(ModelConfig::HyperbolicUtb {
            epsilon: args(s, head, 1)?[0],
        }),
        _ => Err(format!("unknown model `{s}`; known: {}", KNOWN.join(", "))),
    }
}
