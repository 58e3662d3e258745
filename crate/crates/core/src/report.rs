//! Shared report vocabulary and JSON helpers.

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// How a reported value relates to the quantity it names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Exactness {
    Exact,
    LowerBound,
    UpperBound,
}

impl Exactness {
    pub fn name(self) -> &'static str {
        match self {
            Exactness::Exact => "EXACT",
            Exactness::LowerBound => "LOWER_BOUND",
            Exactness::UpperBound => "UPPER_BOUND",
        }
    }

    /// The direction obtained after taking a reciprocal.
    pub fn inverted(self) -> Exactness {
        match self {
            Exactness::Exact => Exactness::Exact,
            Exactness::LowerBound => Exactness::UpperBound,
            Exactness::UpperBound => Exactness::LowerBound,
        }
    }
}

/// Writes a double as a JSON number, or as `"inf"` / `"-inf"` / `"nan"`.
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(extended_name(*v))
    }
}

pub fn extended_name(v: f64) -> &'static str {
    if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// Formats a double for text output: shortest round-trip form, or the
/// `inf` sentinels.
pub fn format_extended(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        extended_name(v).to_string()
    }
}

pub fn deserialize_extended<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    struct ExtVisitor;
    impl Visitor<'_> for ExtVisitor {
        type Value = f64;
        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }
    d.deserialize_any(ExtVisitor)
}
