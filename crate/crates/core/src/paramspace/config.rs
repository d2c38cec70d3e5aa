use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::space::{ParameterSpace, SpaceId};
use super::value::Value;

/// An assignment of values to exactly the active parameters of a space.
///
/// Entries are kept sorted by name; equality and hashing follow the canonical
/// text form and ignore which space the configuration came from.
#[derive(Debug, Clone)]
pub struct Configuration {
    space: SpaceId,
    values: BTreeMap<String, Value>,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl Eq for Configuration {}

impl Hash for Configuration {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.values.hash(state);
    }
}

impl Configuration {
    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn into_values(self) -> BTreeMap<String, Value> {
        self.values
    }

    /// `name=value` pairs sorted by name, separated by single spaces.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Short stable identifier: leading hex digits of the SHA-256 of the canonical form.
    pub fn id(&self) -> ConfigId {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut s = String::with_capacity(12);
        for b in &digest[..6] {
            s.push_str(&format!("{b:02x}"));
        }
        ConfigId(s)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ConfigId(pub String);

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("active parameter `{0}` has no value")]
    Missing(String),
    #[error("parameter `{0}` is inactive or unknown but has a value")]
    Extra(String),
    #[error("value `{value}` is outside the domain of `{name}`")]
    OutOfDomain { name: String, value: String },
    #[error("configuration satisfies forbidden clause {0}")]
    Forbidden(String),
    #[error("malformed configuration text: {0}")]
    Syntax(String),
    #[error("configurations belong to different spaces")]
    SpaceMismatch,
}

impl ParameterSpace {
    /// Accept `candidate` only if it assigns exactly the active parameters,
    /// with in-domain values, and triggers no forbidden clause.
    pub fn validate_config(&self, candidate: &BTreeMap<String, Value>) -> Result<Configuration, ConfigError> {
        let params = self.parameters();
        let mut accepted: BTreeMap<String, Value> = BTreeMap::new();
        for &i in self.topological_order() {
            let p = &params[i];
            let active = self.is_active_in(i, &accepted);
            match (active, candidate.get(&p.name)) {
                (true, None) => return Err(ConfigError::Missing(p.name.clone())),
                (true, Some(v)) => {
                    if !p.domain.contains(v) {
                        return Err(ConfigError::OutOfDomain {
                            name: p.name.clone(),
                            value: v.to_string(),
                        });
                    }
                    accepted.insert(p.name.clone(), v.clone());
                }
                (false, Some(_)) => return Err(ConfigError::Extra(p.name.clone())),
                (false, None) => {}
            }
        }
        if let Some(extra) = candidate.keys().find(|k| !accepted.contains_key(*k)) {
            return Err(ConfigError::Extra(extra.clone()));
        }
        if let Some(clause) = self.violated_clause(&accepted) {
            return Err(ConfigError::Forbidden(clause.to_string()));
        }
        Ok(Configuration {
            space: self.id(),
            values: accepted,
        })
    }

    /// Parse whitespace-separated `name=value` pairs and validate them.
    pub fn parse_config(&self, text: &str) -> Result<Configuration, ConfigError> {
        let mut values = BTreeMap::new();
        for token in text.split_whitespace() {
            let token = token.strip_prefix("--").unwrap_or(token);
            let (name, raw) = token
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax(format!("expected name=value, found `{token}`")))?;
            let param = self
                .parameter(name)
                .ok_or_else(|| ConfigError::Extra(name.to_string()))?;
            let value = param.domain.parse_value(raw).ok_or_else(|| ConfigError::OutOfDomain {
                name: name.to_string(),
                value: raw.to_string(),
            })?;
            if values.insert(name.to_string(), value).is_some() {
                return Err(ConfigError::Syntax(format!("`{name}` assigned twice")));
            }
        }
        self.validate_config(&values)
    }

    pub fn default_config(&self) -> Configuration {
        Configuration {
            space: self.id(),
            values: self.default_values(),
        }
    }

    /// Set `name` to `value`, then re-establish activation: newly active
    /// parameters take their value from `fill`, newly inactive ones are dropped.
    pub fn with_value(
        &self,
        config: &Configuration,
        name: &str,
        value: Value,
        fill: impl FnMut(&super::space::Parameter) -> Value,
    ) -> Result<Configuration, ConfigError> {
        let mut values = config.values.clone();
        values.insert(name.to_string(), value);
        let repaired = self.repair(&values, fill);
        self.validate_config(&repaired)
    }
}

/// One differing parameter: its value on each side, `None` when inactive.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffEntry {
    pub name: String,
    pub left: Option<Value>,
    pub right: Option<Value>,
}

/// Parameters whose value or activity differs between `a` and `b`, by name.
pub fn config_diff(a: &Configuration, b: &Configuration) -> Result<Vec<DiffEntry>, ConfigError> {
    if a.space != b.space {
        return Err(ConfigError::SpaceMismatch);
    }
    let mut names: Vec<&String> = a.values.keys().chain(b.values.keys()).collect();
    names.sort();
    names.dedup();
    Ok(names
        .into_iter()
        .filter_map(|n| {
            let (l, r) = (a.values.get(n), b.values.get(n));
            (l != r).then(|| DiffEntry {
                name: n.clone(),
                left: l.cloned(),
                right: r.cloned(),
            })
        })
        .collect())
}
