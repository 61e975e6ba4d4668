use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Upper or lower bound that may be infinite (e.g. when the coherence is zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Bound::Unbounded)
    }

    /// Finite value, or `+∞`.
    pub fn as_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Bound::Finite(v) => s.serialize_f64(*v),
            Bound::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Bound::Finite(v)),
            Repr::Str(s) if s == "unbounded" => Ok(Bound::Unbounded),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("invalid bound {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        assert_eq!(serde_json::to_string(&Bound::Finite(7.0)).unwrap(), "7.0");
        assert_eq!(
            serde_json::to_string(&Bound::Unbounded).unwrap(),
            "\"unbounded\""
        );
        let b: Bound = serde_json::from_str("\"unbounded\"").unwrap();
        assert!(b.is_unbounded());
        let b: Bound = serde_json::from_str("5.5").unwrap();
        assert_eq!(b.value(), Some(5.5));
    }
}
