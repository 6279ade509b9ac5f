//! Input files and list syntax.

use std::fs;
use std::path::Path;

use homoglab_core::evolution::SourceSpec;
use homoglab_core::torus::{CoefficientKind, TermSpec};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::CliError;

/// A coefficient file is either a bare list of terms or `{kind, terms}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CoefficientFile {
    Terms(Vec<TermSpec>),
    Tagged {
        kind: CoefficientKind,
        terms: Vec<TermSpec>,
    },
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Terms and kind of a coefficient file; bare lists take `default_kind`.
pub fn load_coefficient(path: &Path, default_kind: CoefficientKind) -> Result<(CoefficientKind, Vec<TermSpec>), CliError> {
    Ok(match read_json::<CoefficientFile>(path)? {
        CoefficientFile::Terms(t) => (default_kind, t),
        CoefficientFile::Tagged { kind, terms } => (kind, terms),
    })
}

pub fn load_source(path: &Path) -> Result<SourceSpec, CliError> {
    read_json(path)
}

/// Loads a JSON object from `--config`.
pub fn load_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    match read_json::<Value>(path)? {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::config(format!("{}: expected a JSON object", path.display()))),
    }
}

/// Overlays `config` on the serialised flags and reads the result back.
pub fn merge<T: serde::Serialize + DeserializeOwned>(flags: &T, config: Map<String, Value>) -> Result<T, CliError> {
    let mut base = serde_json::to_value(flags).map_err(|e| CliError::config(e.to_string()))?;
    let obj = base.as_object_mut().expect("flags serialise to an object");
    for (k, v) in config {
        obj.insert(k, v);
    }
    serde_json::from_value(base).map_err(|e| CliError::config(e.to_string()))
}

/// A number or a fraction `p/q`.
pub fn parse_number(s: &str) -> Result<f64, CliError> {
    let s = s.trim();
    let bad = || CliError::config(format!("'{s}' is not a number or fraction"));
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            p / q
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Comma-separated numbers, e.g. `1/8,1/16,1/32`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_number).collect()
}

/// Quasimomenta separated by `;`, components by `,`: `0.5;-1` or `0.1,0.2;0,pi`.
/// The token `pi` (optionally signed or scaled as `pi/4`) is accepted.
pub fn parse_thetas(s: &str, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let mut out = Vec::new();
    for part in s.split(';').filter(|p| !p.trim().is_empty()) {
        let comps = part.split(',').map(parse_angle).collect::<Result<Vec<_>, _>>()?;
        if comps.len() != dim {
            return Err(CliError::config(format!("theta '{part}' does not have {dim} components")));
        }
        out.push(comps);
    }
    if out.is_empty() {
        return Err(CliError::config("empty theta list"));
    }
    Ok(out)
}

fn parse_angle(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let (sign, rest) = match t.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, t),
    };
    if let Some(tail) = rest.strip_prefix("pi") {
        let scale = match tail.strip_prefix('/') {
            Some(q) => 1.0 / parse_number(q)?,
            None if tail.is_empty() => 1.0,
            None => return Err(CliError::config(format!("'{t}' is not an angle"))),
        };
        return Ok(sign * std::f64::consts::PI * scale);
    }
    parse_number(t)
}

/// `dyadic:J` or an explicit list for [`parse_thetas`].
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaGrid {
    Dyadic(u32),
    Explicit(Vec<Vec<f64>>),
}

pub fn parse_theta_grid(s: &str, dim: usize) -> Result<ThetaGrid, CliError> {
    match s.trim().strip_prefix("dyadic:") {
        Some(j) => j
            .trim()
            .parse()
            .map(ThetaGrid::Dyadic)
            .map_err(|_| CliError::config(format!("'{s}': dyadic depth must be a small integer"))),
        None => parse_thetas(s, dim).map(ThetaGrid::Explicit),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn numbers_and_lists() {
        assert_eq!(parse_list("1/4, 1/8,0.0625").unwrap(), vec![0.25, 0.125, 0.0625]);
        assert!(parse_number("1/x").is_err());
        assert!(parse_number("1/0").is_err());
    }

    #[test]
    fn theta_syntax() {
        assert_eq!(parse_thetas("0.5;-pi/4", 1).unwrap(), vec![vec![0.5], vec![-PI / 4.0]]);
        assert_eq!(parse_thetas("1,-2", 2).unwrap(), vec![vec![1.0, -2.0]]);
        assert!(parse_thetas("1", 2).is_err());
        assert_eq!(parse_theta_grid("dyadic:3", 1).unwrap(), ThetaGrid::Dyadic(3));
    }

    #[test]
    fn config_overrides_flags() {
        #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
        struct F {
            n: usize,
            eps: Vec<f64>,
        }
        let mut m = Map::new();
        m.insert("n".into(), Value::from(16));
        let f = merge(&F { n: 32, eps: vec![0.5] }, m).unwrap();
        assert_eq!(f, F { n: 16, eps: vec![0.5] });
    }
}
