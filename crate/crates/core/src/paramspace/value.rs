use std::fmt;
use std::hash::{Hash, Hasher};

/// A single parameter value.
///
/// Reals compare and hash by bit pattern so that equality agrees with the
/// canonical text form (`0` and `-0` are different values). Non-finite reals
/// are never admitted into a domain.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Real(v) => Some(*v),
            Value::Cat(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            _ => None,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            (Value::Cat(a), Value::Cat(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Int(v) => {
                0u8.hash(state);
                v.hash(state);
            }
            Value::Real(v) => {
                1u8.hash(state);
                v.to_bits().hash(state);
            }
            Value::Cat(s) => {
                2u8.hash(state);
                s.hash(state);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            // `Display` for f64 is the shortest string that parses back to the same bits.
            Value::Real(v) => write!(f, "{v}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Cat(v.to_string())
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Cat(if v { "true" } else { "false" }.to_string())
    }
}

/// The set of values a parameter may take.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Integer { lo: i64, hi: i64 },
    Real { lo: f64, hi: f64, log: bool },
    /// Booleans are categorical `{true, false}`.
    Categorical(Vec<String>),
}

impl Domain {
    pub fn boolean() -> Self {
        Domain::Categorical(vec!["true".into(), "false".into()])
    }

    pub fn is_boolean(&self) -> bool {
        match self {
            Domain::Categorical(vals) => {
                vals.len() == 2
                    && vals.iter().any(|v| v == "true")
                    && vals.iter().any(|v| v == "false")
            }
            _ => false,
        }
    }

    pub fn is_numeric(&self) -> bool {
        !matches!(self, Domain::Categorical(_))
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Integer { lo, hi }, Value::Int(v)) => lo <= v && v <= hi,
            (Domain::Real { lo, hi, .. }, Value::Real(v)) => v.is_finite() && *lo <= *v && *v <= *hi,
            (Domain::Categorical(vals), Value::Cat(v)) => vals.iter().any(|c| c == v),
            _ => false,
        }
    }

    /// Interpret `text` as a value of this domain. Does not check bounds.
    pub fn parse_value(&self, text: &str) -> Option<Value> {
        match self {
            Domain::Integer { .. } => text.parse::<i64>().ok().map(Value::Int),
            Domain::Real { .. } => text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Value::Real),
            Domain::Categorical(_) => Some(Value::Cat(text.to_string())),
        }
    }

    /// Number of distinct values, or `None` for real ranges.
    pub fn cardinality(&self) -> Option<u64> {
        match self {
            Domain::Integer { lo, hi } => Some((*hi as i128 - *lo as i128 + 1) as u64),
            Domain::Real { .. } => None,
            Domain::Categorical(vals) => Some(vals.len() as u64),
        }
    }

    /// Position of a value within `[0, 1]` for numeric domains (log-space when log-scaled).
    pub fn normalize(&self, value: &Value) -> Option<f64> {
        let v = value.as_f64()?;
        let unit = match self {
            Domain::Integer { lo, hi } => {
                if hi == lo {
                    0.0
                } else {
                    (v - *lo as f64) / (*hi as f64 - *lo as f64)
                }
            }
            Domain::Real { lo, hi, log } => {
                let (lo, hi, v) = if *log {
                    (lo.log10(), hi.log10(), v.log10())
                } else {
                    (*lo, *hi, v)
                };
                if hi == lo {
                    0.0
                } else {
                    (v - lo) / (hi - lo)
                }
            }
            Domain::Categorical(_) => return None,
        };
        Some(unit.clamp(0.0, 1.0))
    }

    /// Inverse of [`Domain::normalize`] for numeric domains, rounding integers.
    pub fn denormalize(&self, unit: f64) -> Option<Value> {
        let unit = unit.clamp(0.0, 1.0);
        match self {
            Domain::Integer { lo, hi } => {
                let v = *lo as f64 + unit * (*hi as f64 - *lo as f64);
                Some(Value::Int((v.round() as i64).clamp(*lo, *hi)))
            }
            Domain::Real { lo, hi, log } => {
                let v = if *log {
                    10f64.powf(lo.log10() + unit * (hi.log10() - lo.log10()))
                } else {
                    lo + unit * (hi - lo)
                };
                Some(Value::Real(v.clamp(*lo, *hi)))
            }
            Domain::Categorical(_) => None,
        }
    }

    pub fn category_index(&self, value: &Value) -> Option<usize> {
        match (self, value) {
            (Domain::Categorical(vals), Value::Cat(v)) => vals.iter().position(|c| c == v),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_display_round_trips() {
        for v in [0.5, 1.0, 1e-7, 123456.789, -0.0, 0.1 + 0.2] {
            let text = Value::Real(v).to_string();
            assert_eq!(text.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{text}");
        }
    }

    #[test]
    fn boolean_is_categorical() {
        let d = Domain::boolean();
        assert!(d.is_boolean());
        assert!(d.contains(&Value::from(true)));
        assert!(!d.contains(&Value::Int(1)));
    }

    #[test]
    fn normalize_integer_midpoint() {
        let d = Domain::Integer { lo: 0, hi: 10 };
        assert_eq!(d.normalize(&Value::Int(5)), Some(0.5));
        assert_eq!(d.denormalize(0.5), Some(Value::Int(5)));
    }

    #[test]
    fn normalize_log_real() {
        let d = Domain::Real { lo: 1.0, hi: 100.0, log: true };
        let n = d.normalize(&Value::Real(10.0)).unwrap();
        assert!((n - 0.5).abs() < 1e-12);
    }
}
