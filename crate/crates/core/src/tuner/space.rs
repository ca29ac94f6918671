use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::TunerError;

/// One hyperparameter assignment, keyed by parameter name.
pub type Assignment = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Param {
    Float {
        name: String,
        min: f64,
        max: f64,
        #[serde(default)]
        log: bool,
    },
    Int {
        name: String,
        min: i64,
        max: i64,
        #[serde(default)]
        log: bool,
    },
    Categorical {
        name: String,
        choices: Vec<Value>,
    },
    Fixed {
        name: String,
        value: Value,
    },
}

impl Param {
    pub fn name(&self) -> &str {
        match self {
            Param::Float { name, .. } | Param::Int { name, .. } | Param::Categorical { name, .. } | Param::Fixed { name, .. } => name,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Param::Fixed { .. })
    }

    /// Search interval in the sampling space (log-transformed where flagged;
    /// integers widened by half a unit on each side).
    pub(crate) fn interval(&self) -> Option<(f64, f64)> {
        match *self {
            Param::Float { min, max, log, .. } => Some(if log { (min.ln(), max.ln()) } else { (min, max) }),
            Param::Int { min, max, log, .. } => Some(if log {
                ((min as f64 - 0.5).max(min as f64 / 2.0).ln(), (max as f64 + 0.5).ln())
            } else {
                (min as f64 - 0.5, max as f64 + 0.5)
            }),
            _ => None,
        }
    }

    /// Maps a point of the sampling space back to a parameter value, clamped to bounds.
    pub(crate) fn from_internal(&self, t: f64) -> Value {
        match *self {
            Param::Float { min, max, log, .. } => {
                let x = if log { t.exp() } else { t };
                Value::from(x.clamp(min, max))
            }
            Param::Int { min, max, log, .. } => {
                let x = if log { t.exp() } else { t };
                Value::from((x.round() as i64).clamp(min, max))
            }
            _ => unreachable!("numeric parameters only"),
        }
    }

    /// Position of an assigned value in the sampling space.
    pub(crate) fn to_internal(&self, v: &Value) -> Option<f64> {
        let x = v.as_f64()?;
        match *self {
            Param::Float { log, .. } | Param::Int { log, .. } => Some(if log { x.ln() } else { x }),
            _ => None,
        }
    }

    /// Maps a unit-interval coordinate to a value (startup draws).
    pub(crate) fn from_unit(&self, u: f64) -> Value {
        match self {
            Param::Float { .. } | Param::Int { .. } => {
                let (lo, hi) = self.interval().expect("numeric");
                self.from_internal(lo + u * (hi - lo))
            }
            Param::Categorical { choices, .. } => {
                let i = ((u * choices.len() as f64) as usize).min(choices.len() - 1);
                choices[i].clone()
            }
            Param::Fixed { value, .. } => value.clone(),
        }
    }

    /// Whether `v` is a legal value of this parameter.
    pub fn contains(&self, v: &Value) -> bool {
        match self {
            Param::Float { min, max, .. } => v.as_f64().is_some_and(|x| x >= *min && x <= *max),
            Param::Int { min, max, .. } => v.as_i64().is_some_and(|x| x >= *min && x <= *max),
            Param::Categorical { choices, .. } => choices.contains(v),
            Param::Fixed { value, .. } => value == v,
        }
    }
}

/// A named overlay of fixed values, run as its own study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub name: String,
    pub assign: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub parameters: Vec<Param>,
    #[serde(default)]
    pub strata: Vec<Stratum>,
}

impl SearchSpace {
    pub fn from_json(text: &str) -> Result<Self, TunerError> {
        let space: SearchSpace = serde_json::from_str(text).map_err(|e| TunerError::InvalidSpace(e.to_string()))?;
        space.validate()?;
        Ok(space)
    }

    pub fn load(path: &Path) -> Result<Self, TunerError> {
        let text = std::fs::read_to_string(path).map_err(|e| TunerError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), TunerError> {
        let bad = |msg: String| Err(TunerError::InvalidSpace(msg));
        let mut names = BTreeSet::new();
        for p in &self.parameters {
            if !names.insert(p.name()) {
                return bad(format!("duplicate parameter `{}`", p.name()));
            }
            match p {
                Param::Float { name, min, max, log } => {
                    if !(min.is_finite() && max.is_finite() && min < max) {
                        return bad(format!("`{name}`: need finite min < max"));
                    }
                    if *log && *min <= 0.0 {
                        return bad(format!("`{name}`: log scale needs min > 0"));
                    }
                }
                Param::Int { name, min, max, log } => {
                    if min >= max {
                        return bad(format!("`{name}`: need min < max"));
                    }
                    if *log && *min < 1 {
                        return bad(format!("`{name}`: log scale needs min >= 1"));
                    }
                }
                Param::Categorical { name, choices } => {
                    if choices.is_empty() {
                        return bad(format!("`{name}`: choices must be nonempty"));
                    }
                }
                Param::Fixed { .. } => {}
            }
        }
        let mut strata = BTreeSet::new();
        for s in &self.strata {
            if !strata.insert(&s.name) {
                return bad(format!("duplicate stratum `{}`", s.name));
            }
            for key in s.assign.keys() {
                if !names.contains(key.as_str()) {
                    return bad(format!("stratum `{}` sets unknown parameter `{key}`", s.name));
                }
            }
        }
        Ok(())
    }

    /// The space with a stratum's values pinned as fixed parameters.
    pub fn with_stratum(&self, stratum: &Stratum) -> SearchSpace {
        let parameters = self
            .parameters
            .iter()
            .map(|p| match stratum.assign.get(p.name()) {
                Some(v) => Param::Fixed {
                    name: p.name().to_string(),
                    value: v.clone(),
                },
                None => p.clone(),
            })
            .collect();
        SearchSpace {
            parameters,
            strata: Vec::new(),
        }
    }

    /// Whether every parameter is assigned a legal value.
    pub fn contains(&self, a: &Assignment) -> bool {
        self.parameters
            .iter()
            .all(|p| a.get(p.name()).is_some_and(|v| p.contains(v)))
    }
}
