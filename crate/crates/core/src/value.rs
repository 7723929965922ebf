//! Typed scalar values carried by channels and state variables.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Value type of a channel or variable.
///
/// Channels are `int`, `float`, or `unit` (marker channels such as `newline`);
/// state variables are `int`, `float`, or `bool`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Int,
    Float,
    Bool,
    Unit,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueType::Int => "int",
            ValueType::Float => "float",
            ValueType::Bool => "bool",
            ValueType::Unit => "unit",
        };
        f.write_str(s)
    }
}

/// A typed scalar: 64-bit signed integer, 64-bit float, boolean, or the unit marker.
#[derive(Debug, Clone, Copy)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Unit,
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Int(_) => ValueType::Int,
            Value::Float(_) => ValueType::Float,
            Value::Bool(_) => ValueType::Bool,
            Value::Unit => ValueType::Unit,
        }
    }

    /// Numeric view; integers widen exactly at desk scale.
    pub fn as_f64(&self) -> Result<f64> {
        match self {
            Value::Int(i) => Ok(*i as f64),
            Value::Float(x) => Ok(*x),
            other => Err(Error::Type(format!(
                "expected a numeric value, got {}",
                other.value_type()
            ))),
        }
    }

    pub fn as_bool(&self) -> Result<bool> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(Error::Type(format!(
                "expected a bool value, got {}",
                other.value_type()
            ))),
        }
    }

    /// Coerces this value to the declared type. Int widens to Float; any other
    /// mismatch is a type error.
    pub fn coerce_to(&self, ty: ValueType) -> Result<Value> {
        match (self, ty) {
            (Value::Int(_), ValueType::Int)
            | (Value::Float(_), ValueType::Float)
            | (Value::Bool(_), ValueType::Bool)
            | (Value::Unit, ValueType::Unit) => Ok(*self),
            (Value::Int(i), ValueType::Float) => Ok(Value::Float(*i as f64)),
            (v, ty) => Err(Error::Type(format!(
                "cannot use a {} value where {} is required",
                v.value_type(),
                ty
            ))),
        }
    }
}

// Floats compare and hash by IEEE total order so values can live in ordered
// sets; guard evaluation itself uses ordinary `==` on f64 (exact comparison).
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Int(_) => 0,
                Value::Float(_) => 1,
                Value::Bool(_) => 2,
                Value::Unit => 3,
            }
        }
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Unit, Value::Unit) => Ordering::Equal,
            (a, b) => rank(a).cmp(&rank(b)),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Int(i) => {
                0u8.hash(state);
                i.hash(state);
            }
            Value::Float(x) => {
                1u8.hash(state);
                x.to_bits().hash(state);
            }
            Value::Bool(b) => {
                2u8.hash(state);
                b.hash(state);
            }
            Value::Unit => 3u8.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Unit => f.write_str("()"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Int(i) => ser.serialize_i64(*i),
            Value::Float(x) => ser.serialize_f64(*x),
            Value::Bool(b) => ser.serialize_bool(*b),
            Value::Unit => ser.serialize_unit(),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = serde_json::Value::deserialize(de)?;
        match raw {
            serde_json::Value::Bool(b) => Ok(Value::Bool(b)),
            serde_json::Value::Null => Ok(Value::Unit),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Value::Int(i))
                } else if let Some(x) = n.as_f64() {
                    Ok(Value::Float(x))
                } else {
                    Err(D::Error::custom(format!("number out of range: {n}")))
                }
            }
            other => Err(D::Error::custom(format!(
                "expected a scalar value, got {other}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_widens_to_float() {
        assert_eq!(
            Value::Int(10).coerce_to(ValueType::Float).unwrap(),
            Value::Float(10.0)
        );
    }

    #[test]
    fn float_does_not_narrow_to_int() {
        assert!(Value::Float(1.5).coerce_to(ValueType::Int).is_err());
    }

    #[test]
    fn total_order_is_consistent_for_floats() {
        assert!(Value::Float(-1.0) < Value::Float(0.0));
        assert_eq!(Value::Float(2.0), Value::Float(2.0));
    }
}
