//! Settings layering (defaults, then config file, then flags) and the small
//! value types shared by the subcommands.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::{self, DeserializeOwned, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::CliError;

/// Merges `defaults`, the settings found in `file` and the flags in `cli`,
/// later layers winning key by key.
pub fn layer<T>(defaults: &T, file: Option<&Value>, cli: &T) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned,
{
    let mut merged = to_object(defaults)?;
    if let Some(f) = file {
        // typed round trip so unknown keys and bad types surface here
        let checked: T = serde_json::from_value(f.clone()).map_err(|e| CliError::Config(format!("config file: {e}")))?;
        merged.extend(to_object(&checked)?);
    }
    merged.extend(to_object(cli)?);
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}

fn to_object<T: Serialize>(v: &T) -> Result<Map<String, Value>, CliError> {
    match serde_json::to_value(v).map_err(|e| CliError::Config(e.to_string()))? {
        Value::Object(m) => Ok(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        _ => Err(CliError::Config("settings must be a table".into())),
    }
}

/// Reads a config file for `command`. TOML files hold the flat settings;
/// JSON files may be either the flat settings or a metadata file written by
/// an earlier run, whose `config` object is then replayed.
pub fn load_file(path: &Path, command: &str) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let value: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(table).map_err(|e| CliError::Config(e.to_string()))?
    };
    match (value.get("command"), value.get("config")) {
        (Some(Value::String(c)), Some(cfg)) => {
            if c != command {
                return Err(CliError::Config(format!(
                    "{} records a '{c}' run, not '{command}'",
                    path.display()
                )));
            }
            Ok(cfg.clone())
        }
        _ => Ok(value),
    }
}

pub fn required<T: Clone>(v: &Option<T>, key: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Config(format!("missing required setting '{key}' (flag --{key} or config key)")))
}

fn parse_f64(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number in {what}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value in {what}"))
    }
}

/// Grid `lo:hi:step` (inclusive of `hi` up to rounding) or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range {
    pub fn single(v: f64) -> Self {
        Self { lo: v, hi: v, step: 1.0 }
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Ok(Self::single(parse_f64(v, "range")?)),
            [lo, hi, step] => {
                let (lo, hi, step) = (parse_f64(lo, "range")?, parse_f64(hi, "range")?, parse_f64(step, "range")?);
                if step <= 0.0 {
                    return Err(format!("range step must be positive, got {step}"));
                }
                if hi < lo {
                    return Err(format!("empty range {s}: upper end below lower end"));
                }
                Ok(Self { lo, hi, step })
            }
            _ => Err(format!("range '{s}' must be lo:hi:step or a single value")),
        }
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
        }
    }
}

/// Interval `lo:hi` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Interval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let Some((lo, hi)) = s.split_once(':') else {
            return Err(format!("interval '{s}' must be lo:hi"));
        };
        let (lo, hi) = (parse_f64(lo, "interval")?, parse_f64(hi, "interval")?);
        if lo >= hi {
            return Err(format!("interval {s} must satisfy lo < hi"));
        }
        Ok(Self { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

/// Non-negative integer that also accepts integral float notation (`1e6`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Count(pub u64);

impl FromStr for Count {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Ok(v) = s.trim().parse::<u64>() {
            return Ok(Count(v));
        }
        let v = parse_f64(s, "count")?;
        from_float(v)
    }
}

fn from_float(v: f64) -> Result<Count, String> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(Count(v as u64))
    } else {
        Err(format!("{v} is not a non-negative whole number"))
    }
}

// Ranges and intervals are written as strings; config files may also give a
// bare number (single-value range) or a two-element array (interval).
macro_rules! string_serde {
    ($t:ty, $expect:literal) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                d.deserialize_any(TextVisitor::<$t>::new($expect))
            }
        }
    };
}

string_serde!(Range, "a range lo:hi:step or a number");
string_serde!(Interval, "an interval lo:hi or [lo, hi]");

struct TextVisitor<T> {
    expect: &'static str,
    _t: std::marker::PhantomData<T>,
}

impl<T> TextVisitor<T> {
    fn new(expect: &'static str) -> Self {
        Self { expect, _t: std::marker::PhantomData }
    }
}

impl<'de, T: FromStr<Err = String>> Visitor<'de> for TextVisitor<T> {
    type Value = T;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.expect)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<T, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<T, E> {
        self.visit_str(&v.to_string())
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<T, E> {
        self.visit_str(&v.to_string())
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<T, E> {
        self.visit_str(&v.to_string())
    }

    fn visit_seq<A: de::SeqAccess<'de>>(self, mut seq: A) -> Result<T, A::Error> {
        let mut parts = Vec::new();
        while let Some(x) = seq.next_element::<f64>()? {
            parts.push(x.to_string());
        }
        self.visit_str(&parts.join(":"))
    }
}

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.0)
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CountVisitor;
        impl<'de> Visitor<'de> for CountVisitor {
            type Value = Count;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative whole number")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Count, E> {
                Ok(Count(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Count, E> {
                u64::try_from(v).map(Count).map_err(|_| E::custom("negative count"))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Count, E> {
                from_float(v).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Count, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(CountVisitor)
    }
}
