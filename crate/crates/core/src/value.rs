//! Runtime values.

use std::fmt;

use crate::ir::Coerce;

pub type ArrayId = usize;
pub type FamilyId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Handle(ArrayId),
    /// Explicit placement address; never read as one of the specials.
    Place(u64),
    Family(FamilyId),
}

impl Value {
    pub fn coerce(self, to: Option<Coerce>) -> Value {
        match (to, self) {
            (Some(Coerce::Int), Value::Float(f)) => Value::Int(f as i64),
            (Some(Coerce::Float), Value::Int(i)) => Value::Float(i as f64),
            (Some(Coerce::Float), Value::Place(p)) => Value::Float(p as f64),
            _ => self,
        }
    }

    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(i),
            Value::Float(f) => Some(f as i64),
            Value::Place(p) => Some(p as i64),
            _ => None,
        }
    }

    pub fn as_float(self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(i as f64),
            Value::Float(f) => Some(f),
            Value::Place(p) => Some(p as f64),
            _ => None,
        }
    }

    pub fn truthy(self) -> bool {
        match self {
            Value::Int(i) => i != 0,
            Value::Float(f) => f != 0.0,
            Value::Place(p) => p != 0,
            Value::Handle(_) | Value::Family(_) => true,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{}", i),
            Value::Float(x) => write!(f, "{:?}", x),
            Value::Handle(a) => write!(f, "array#{}", a),
            Value::Place(p) => write!(f, "place:{}", p),
            Value::Family(id) => write!(f, "family#{}", id),
        }
    }
}
