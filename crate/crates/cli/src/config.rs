//! The solve config document. Every key can be overridden by the flag of the
//! same name.

use crate::Failure;
use hypersub::systems::DynamicalSystem;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_GRID_Q: usize = 128;
pub const DEFAULT_PERIODIC_SCAN: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberOrString {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub system: String,
    pub observable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(rename = "C", default = "auto")]
    pub c: NumberOrString,
    #[serde(default = "auto")]
    pub phibar: NumberOrString,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
}

fn auto() -> NumberOrString {
    NumberOrString::Text("auto".into())
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    100_000
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            system: "gms:8".into(),
            observable: "edgecost:default".into(),
            grid_q: None,
            depth: None,
            c: auto(),
            phibar: auto(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            seed: 0,
        }
    }
}

pub enum CPolicy {
    Auto,
    Value(f64),
}

pub enum PhibarPolicy {
    Value(f64),
    Karp,
    Periodic(usize),
}

fn parse_number_or_string(s: &str) -> NumberOrString {
    match s.parse::<f64>() {
        Ok(v) => NumberOrString::Number(v),
        Err(_) => NumberOrString::Text(s.to_string()),
    }
}

impl SolveConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn override_with(
        &mut self,
        system: Option<String>,
        observable: Option<String>,
        grid_q: Option<usize>,
        depth: Option<usize>,
        c: Option<&str>,
        phibar: Option<&str>,
        tol: Option<f64>,
        max_iter: Option<usize>,
        seed: Option<u64>,
    ) -> Result<(), Failure> {
        if let Some(s) = system {
            self.system = s;
        }
        if let Some(o) = observable {
            self.observable = o;
        }
        if grid_q.is_some() {
            self.grid_q = grid_q;
        }
        if depth.is_some() {
            self.depth = depth;
        }
        if let Some(c) = c {
            self.c = parse_number_or_string(c);
        }
        if let Some(p) = phibar {
            self.phibar = parse_number_or_string(p);
        }
        if let Some(t) = tol {
            self.tol = t;
        }
        if let Some(m) = max_iter {
            self.max_iter = m;
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        self.validate()
    }

    fn validate(&self) -> Result<(), Failure> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Failure::config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Failure::config("max_iter must be >= 1"));
        }
        if self.grid_q == Some(0) {
            return Err(Failure::config("grid_q must be >= 1"));
        }
        self.c_policy()?;
        self.phibar_policy()?;
        Ok(())
    }

    /// Resolves `system` together with `depth` (`gms` alone takes the depth key).
    pub fn system(&self) -> Result<DynamicalSystem, Failure> {
        let id = match (self.system.as_str(), self.depth) {
            ("gms", Some(d)) => format!("gms:{d}"),
            ("gms", None) => return Err(Failure::config("system `gms` needs a depth (gms:<depth> or the depth key)")),
            (s, Some(d)) if s.starts_with("gms:") => {
                if s != format!("gms:{d}") {
                    return Err(Failure::config(format!("system `{s}` conflicts with depth {d}")));
                }
                s.to_string()
            }
            (s, Some(_)) => return Err(Failure::config(format!("depth applies to the shift only, not `{s}`"))),
            (s, None) => s.to_string(),
        };
        let sys = DynamicalSystem::parse(&id)?;
        if sys.depth().is_some() && self.grid_q.is_some() {
            return Err(Failure::config("grid_q applies to torus systems; use depth for the shift"));
        }
        Ok(sys)
    }

    pub fn c_policy(&self) -> Result<CPolicy, Failure> {
        match &self.c {
            NumberOrString::Number(v) if v.is_finite() && *v >= 0.0 => Ok(CPolicy::Value(*v)),
            NumberOrString::Text(t) if t == "auto" => Ok(CPolicy::Auto),
            other => Err(Failure::config(format!("C must be a number >= 0 or \"auto\", got {other:?}"))),
        }
    }

    /// `auto` picks Karp on the shift and a periodic scan on the torus.
    pub fn phibar_policy(&self) -> Result<PhibarPolicy, Failure> {
        let bad = || Failure::config(format!("phibar must be a number, \"auto:karp\" or \"auto:periodic:P\", got {:?}", self.phibar));
        match &self.phibar {
            NumberOrString::Number(v) if v.is_finite() => Ok(PhibarPolicy::Value(*v)),
            NumberOrString::Text(t) => match t.as_str() {
                "auto" => Ok(if self.system.starts_with("gms") { PhibarPolicy::Karp } else { PhibarPolicy::Periodic(DEFAULT_PERIODIC_SCAN) }),
                "auto:karp" => Ok(PhibarPolicy::Karp),
                _ => match t.strip_prefix("auto:periodic:").map(str::parse::<usize>) {
                    Some(Ok(p)) if p >= 1 => Ok(PhibarPolicy::Periodic(p)),
                    _ => Err(bad()),
                },
            },
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let r: Result<SolveConfig, _> = serde_json::from_str(r#"{"system":"cat","observable":"coscos","grid":64}"#);
        assert!(r.is_err());
    }

    #[test]
    fn full_document_parses() {
        let c: SolveConfig = serde_json::from_str(
            r#"{"system":"cat","observable":"coscos","grid_q":64,"C":"auto","phibar":"auto:periodic:6","tol":1e-11,"max_iter":500}"#,
        )
        .unwrap();
        assert_eq!(c.grid_q, Some(64));
        assert!(matches!(c.phibar_policy(), Ok(PhibarPolicy::Periodic(6))));
        assert!(matches!(c.c_policy(), Ok(CPolicy::Auto)));
    }

    #[test]
    fn numeric_c_and_phibar() {
        let c: SolveConfig = serde_json::from_str(r#"{"system":"gms","depth":6,"observable":"edgecost:default","C":2.5,"phibar":0.3}"#).unwrap();
        assert!(matches!(c.c_policy(), Ok(CPolicy::Value(v)) if v == 2.5));
        assert!(matches!(c.phibar_policy(), Ok(PhibarPolicy::Value(v)) if v == 0.3));
        assert_eq!(c.system().unwrap().id(), "gms:6");
    }

    #[test]
    fn bad_policies_are_rejected() {
        let mut c = SolveConfig::default();
        assert!(c.override_with(None, None, None, None, Some("-1"), None, None, None, None).is_err());
        let mut c2 = SolveConfig::default();
        assert!(c2.override_with(None, None, None, None, None, Some("auto:magic"), None, None, None).is_err());
    }

    #[test]
    fn depth_conflicts_are_reported() {
        let c = SolveConfig { system: "gms:8".into(), depth: Some(6), ..SolveConfig::default() };
        assert!(c.system().is_err());
        let c = SolveConfig { system: "cat".into(), depth: Some(6), ..SolveConfig::default() };
        assert!(c.system().is_err());
    }
}
