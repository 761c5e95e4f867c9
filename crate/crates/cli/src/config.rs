use std::path::{Path, PathBuf};

use ionwave::continuation::ContinuationConfig;
use ionwave::elliptic::{EllipticOptions, EllipticScheme};
use ionwave::pressure::PressureLaw;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PressureSpec {
    /// p = γκ/(γ−1) ρ^{γ−1}; γ = 1 gives κ log ρ.
    Power { gamma: f64, kappa: f64 },
    /// p = κ log ρ.
    Log { kappa: f64 },
    /// p = −κ/ρ.
    Inverse { kappa: f64 },
    /// p = Σ a ρ^e + log_coef·log ρ, with `terms` as [a, e] pairs.
    Custom {
        terms: Vec<(f64, f64)>,
        #[serde(default)]
        log_coef: f64,
    },
}

impl Default for PressureSpec {
    fn default() -> Self {
        PressureSpec::Power { gamma: 2.0, kappa: 0.5 }
    }
}

impl PressureSpec {
    pub fn law(&self) -> Result<PressureLaw<f64>, CliError> {
        Ok(match self {
            PressureSpec::Power { gamma, kappa } => PressureLaw::polytropic(*gamma, *kappa)?,
            PressureSpec::Log { kappa } => PressureLaw::logarithmic(*kappa)?,
            PressureSpec::Inverse { kappa } => PressureLaw::inverse(*kappa)?,
            PressureSpec::Custom { terms, log_coef } => {
                if terms.is_empty() && *log_coef == 0.0 {
                    return Err(CliError::Validation("custom pressure needs at least one term".into()));
                }
                if let Some((a, e)) = terms.iter().find(|(a, e)| !a.is_finite() || !e.is_finite()) {
                    return Err(CliError::Validation(format!("custom pressure term [{a}, {e}] is not finite")));
                }
                PressureLaw::power_sum(terms, *log_coef)
            }
        })
    }

    /// Parses `family:key=value,...` (custom terms as `terms=a@e;a@e`) or
    /// an inline JSON object.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = text.trim();
        if text.starts_with('{') {
            return serde_json::from_str(text).map_err(|e| CliError::Validation(format!("--pressure `{text}`: {e}")));
        }
        let (family, params) = text.split_once(':').unwrap_or((text, ""));
        let mut obj = serde_json::Map::new();
        obj.insert("family".into(), Value::String(family.trim().to_string()));
        for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("--pressure parameter `{kv}` is not key=value")))?;
            let value = if k.trim() == "terms" {
                let pairs: Result<Vec<Value>, CliError> = v
                    .split(';')
                    .map(|t| {
                        let (a, e) = t
                            .split_once('@')
                            .ok_or_else(|| CliError::Validation(format!("custom term `{t}` is not coef@exponent")))?;
                        Ok(serde_json::json!([parse_number(a)?, parse_number(e)?]))
                    })
                    .collect();
                Value::Array(pairs?)
            } else {
                serde_json::json!(parse_number(v)?)
            };
            obj.insert(k.trim().to_string(), value);
        }
        serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Validation(format!("--pressure `{text}`: {e}")))
    }
}

fn parse_number(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("`{}` is not a number", s.trim())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub pressure: PressureSpec,
    #[serde(rename = "L")]
    pub period: f64,
    #[serde(rename = "grid_M")]
    pub grid_m: usize,
    pub output_dir: PathBuf,
    pub elliptic_scheme: EllipticScheme,
    /// Density range and sample count of the admissibility check.
    pub check_range: (f64, f64),
    pub check_samples: usize,
    /// A profile CSV is written every this many branch points, plus the
    /// seed and the last point.
    pub profile_every: usize,
    /// The node count lives in `grid_M`; `continuation.grid_m` is neither
    /// written nor accepted.
    #[serde(serialize_with = "without_grid_m")]
    pub continuation: ContinuationConfig<f64>,
}

fn without_grid_m<S: Serializer>(cfg: &ContinuationConfig<f64>, s: S) -> Result<S::Ok, S::Error> {
    let mut value = serde_json::to_value(cfg).map_err(serde::ser::Error::custom)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("grid_m");
    }
    value.serialize(s)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pressure: PressureSpec::default(),
            period: std::f64::consts::TAU,
            grid_m: 1024,
            output_dir: PathBuf::from("out"),
            elliptic_scheme: EllipticScheme::Newton,
            check_range: (1e-3, 1e3),
            check_samples: 64,
            profile_every: 10,
            continuation: ContinuationConfig::default(),
        }
    }
}

impl RunConfig {
    /// Loads the config (defaults when `path` is `None`), applies the
    /// `key.path=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("config {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Validation(format!("config {}: {e}", p.display())))?
            }
            None => serde_json::to_value(RunConfig::default()).expect("default config serializes"),
        };
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, CliError> {
        if let Some(inner) = value.pointer("/continuation/grid_m") {
            return Err(CliError::Validation(format!(
                "continuation.grid_m = {inner} is not accepted; set the node count with grid_M"
            )));
        }
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.continuation.grid_m = cfg.grid_m;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(CliError::Validation(format!("L = {} must be positive and finite", self.period)));
        }
        if self.grid_m < 8 || self.grid_m % 2 != 0 {
            return Err(CliError::Validation(format!("grid_M = {} must be even and at least 8", self.grid_m)));
        }
        let (lo, hi) = self.check_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(CliError::Validation(format!("check_range = [{lo}, {hi}] must satisfy 0 < min < max")));
        }
        if self.check_samples < 2 {
            return Err(CliError::Validation(format!("check_samples = {} must be at least 2", self.check_samples)));
        }
        if self.profile_every == 0 {
            return Err(CliError::Validation("profile_every = 0 must be at least 1".into()));
        }
        self.continuation.validate()?;
        self.pressure.law()?;
        Ok(())
    }

    pub fn continuation(&self) -> ContinuationConfig<f64> {
        ContinuationConfig {
            grid_m: self.grid_m,
            ..self.continuation.clone()
        }
    }

    pub fn elliptic_options(&self) -> EllipticOptions<f64> {
        self.continuation().elliptic_options().with_scheme(self.elliptic_scheme)
    }
}

/// Sets `a.b.c=value`; the value is read as JSON when it parses, else as a
/// string.
pub fn apply_override(root: &mut Value, item: &str) -> Result<(), CliError> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set `{item}` is not key=value")))?;
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Validation(format!("--set key `{path}` is malformed")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Validation(format!("--set `{path}`: `{key}` is not inside an object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Validation(format!("--set `{path}`: parent is not an object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::load(
            None,
            &[
                "continuation.max_steps=3".into(),
                "L=3.5".into(),
                "pressure.kappa=2".into(),
                "elliptic_scheme=k_fixed_point".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.continuation.max_steps, 3);
        assert_eq!(cfg.period, 3.5);
        assert_eq!(cfg.pressure, PressureSpec::Power { gamma: 2.0, kappa: 2.0 });
        assert_eq!(cfg.elliptic_scheme, EllipticScheme::KFixedPoint);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::load(None, &["continuation.max_step=3".into()]).unwrap_err();
        assert!(err.to_string().contains("max_step"), "{err}");
        assert!(RunConfig::load(None, &["grid".into()]).is_err());
        assert!(RunConfig::load(None, &["continuation.grid_m=64".into()]).is_err());
        let err = RunConfig::load(None, &["L=-1".into()]).unwrap_err();
        assert!(err.to_string().contains("L = -1"), "{err}");
    }

    #[test]
    fn pressure_spec_strings() {
        assert_eq!(
            PressureSpec::parse("power:gamma=2,kappa=0.5").unwrap(),
            PressureSpec::Power { gamma: 2.0, kappa: 0.5 }
        );
        assert_eq!(PressureSpec::parse("log:kappa=1").unwrap(), PressureSpec::Log { kappa: 1.0 });
        assert_eq!(
            PressureSpec::parse("custom:terms=1@2;0.5@3").unwrap(),
            PressureSpec::Custom {
                terms: vec![(1.0, 2.0), (0.5, 3.0)],
                log_coef: 0.0
            }
        );
        assert_eq!(
            PressureSpec::parse(r#"{"family":"inverse","kappa":2}"#).unwrap(),
            PressureSpec::Inverse { kappa: 2.0 }
        );
        assert!(PressureSpec::parse("power:gamma=2").is_err());
        assert!(PressureSpec::parse("cubic:kappa=1").is_err());
        assert!(PressureSpec::parse("log:kappa=1,beta=2").is_err());
    }
}
