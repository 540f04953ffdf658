pub mod boosted;
pub mod decomposition;
pub mod model;

use serde_json::Value;

use crate::error::{Error, Result};

/// Typed accessors over a JSON object that report the failing path.
pub(crate) struct Obj<'a> {
    pub path: String,
    map: &'a serde_json::Map<String, Value>,
}

impl<'a> Obj<'a> {
    pub fn new(value: &'a Value, path: impl Into<String>) -> Result<Self> {
        let path = path.into();
        match value.as_object() {
            Some(map) => Ok(Self { path, map }),
            None => Err(Error::parse(path, "expected an object")),
        }
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    pub fn get(&self, key: &str) -> Result<&'a Value> {
        self.map
            .get(key)
            .ok_or_else(|| Error::parse(self.path.clone(), format!("missing key \"{key}\"")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(Error::parse(self.field(key), "expected a finite number")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.get(key)?;
        v.as_u64()
            .and_then(|x| usize::try_from(x).ok())
            .ok_or_else(|| Error::parse(self.field(key), "expected a non-negative integer"))
    }

    pub fn array(&self, key: &str) -> Result<&'a Vec<Value>> {
        self.get(key)?
            .as_array()
            .ok_or_else(|| Error::parse(self.field(key), "expected an array"))
    }
}

pub(crate) fn f64_array(value: &Value, path: &str) -> Result<Vec<f64>> {
    let items = value
        .as_array()
        .ok_or_else(|| Error::parse(path, "expected an array of numbers"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, v)| match v.as_f64() {
            Some(x) if x.is_finite() => Ok(x),
            _ => Err(Error::parse(format!("{path}[{i}]"), "expected a finite number")),
        })
        .collect()
}

/// Pretty-printed JSON with a trailing newline.
pub(crate) fn to_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialise");
    s.push('\n');
    s
}
