//! Versioned key-value reports. Keys are kept sorted so the text form is
//! stable; ensemble aggregates merge associatively.

use std::collections::BTreeMap;
use std::fmt;

use crate::configuration::fmt_f64;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Running aggregate of a scalar over ensemble members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for Stat {
    fn default() -> Self {
        Self { count: 0, sum: 0.0, sum_sq: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }
}

impl Stat {
    pub fn of(x: f64) -> Self {
        Self { count: 1, sum: x, sum_sq: x * x, min: x, max: x }
    }

    pub fn from_values(xs: &[f64]) -> Self {
        xs.iter().fold(Self::default(), |acc, x| acc.merge(&Self::of(*x)))
    }

    pub fn merge(&self, other: &Stat) -> Stat {
        Stat {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "count={} sum={} sum_sq={} min={} max={}",
            self.count,
            fmt_f64(self.sum),
            fmt_f64(self.sum_sq),
            fmt_f64(self.min),
            fmt_f64(self.max)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Real(f64),
    Count(u64),
    Stat(Stat),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => write!(f, "{s}"),
            Value::Real(x) => write!(f, "{}", fmt_f64(*x)),
            Value::Count(n) => write!(f, "#{n}"),
            Value::Stat(s) => write!(f, "{s}"),
        }
    }
}

impl Value {
    fn parse(s: &str) -> Result<Value> {
        if let Some(n) = s.strip_prefix('#') {
            if let Ok(n) = n.parse() {
                return Ok(Value::Count(n));
            }
        }
        if s.starts_with("count=") {
            let mut fields = BTreeMap::new();
            for part in s.split_whitespace() {
                let (k, v) = part.split_once('=').ok_or_else(|| Error::SchemaMismatch(format!("bad aggregate `{s}`")))?;
                fields.insert(k, v);
            }
            let real = |k: &str| -> Result<f64> {
                fields
                    .get(k)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::SchemaMismatch(format!("aggregate field `{k}` missing in `{s}`")))
            };
            let count = fields.get("count").and_then(|v| v.parse().ok()).ok_or_else(|| Error::SchemaMismatch(s.into()))?;
            return Ok(Value::Stat(Stat { count, sum: real("sum")?, sum_sq: real("sum_sq")?, min: real("min")?, max: real("max")? }));
        }
        if let Ok(x) = s.parse::<f64>() {
            if s.contains('e') || s.contains("inf") || s.contains("NaN") {
                return Ok(Value::Real(x));
            }
        }
        Ok(Value::Text(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub schema_version: u32,
    pub entries: BTreeMap<String, Value>,
}

impl Default for Report {
    fn default() -> Self {
        Self::new()
    }
}

impl Report {
    pub fn new() -> Self {
        Self { schema_version: SCHEMA_VERSION, entries: BTreeMap::new() }
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) {
        self.entries.insert(key.into(), Value::Text(v.into()));
    }

    pub fn real(&mut self, key: impl Into<String>, v: f64) {
        self.entries.insert(key.into(), Value::Real(v));
    }

    pub fn count(&mut self, key: impl Into<String>, v: u64) {
        self.entries.insert(key.into(), Value::Count(v));
    }

    pub fn stat(&mut self, key: impl Into<String>, v: Stat) {
        self.entries.insert(key.into(), Value::Stat(v));
    }

    /// Records a named check; returns its outcome.
    pub fn check(&mut self, name: &str, pass: bool) -> bool {
        self.text(format!("check.{name}"), if pass { "pass" } else { "FAIL" });
        pass
    }

    pub fn all_checks_pass(&self) -> bool {
        self.entries.iter().filter(|(k, _)| k.starts_with("check.")).all(|(_, v)| *v == Value::Text("pass".into()))
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("schema_version = {}\n", self.schema_version);
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let version = lines
            .next()
            .and_then(|l| l.strip_prefix("schema_version = "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::SchemaMismatch("missing schema_version header".into()))?;
        let mut entries = BTreeMap::new();
        for l in lines {
            let (k, v) = l.split_once(" = ").ok_or_else(|| Error::SchemaMismatch(format!("bad report line `{l}`")))?;
            entries.insert(k.to_string(), Value::parse(v)?);
        }
        Ok(Self { schema_version: version, entries })
    }
}

/// Merges reports of the same schema. Aggregates and counts combine;
/// text and real entries must agree.
pub fn report_merge(reports: &[Report]) -> Result<Report> {
    let mut out = Report::new();
    if let Some(first) = reports.first() {
        out.schema_version = first.schema_version;
    }
    for r in reports {
        if r.schema_version != out.schema_version {
            return Err(Error::SchemaMismatch(format!("schema {} vs {}", r.schema_version, out.schema_version)));
        }
        for (k, v) in &r.entries {
            let merged = match (out.entries.get(k), v) {
                (None, v) => v.clone(),
                (Some(Value::Stat(a)), Value::Stat(b)) => Value::Stat(a.merge(b)),
                (Some(Value::Count(a)), Value::Count(b)) => Value::Count(a + b),
                (Some(a), b) if a == b => b.clone(),
                (Some(a), b) => return Err(Error::SchemaMismatch(format!("key `{k}`: `{a}` vs `{b}`"))),
            };
            out.entries.insert(k.clone(), merged);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(xs: &[f64]) -> Report {
        let mut r = Report::new();
        r.text("model", "dyson");
        r.stat("gap", Stat::from_values(xs));
        r.count("events", xs.len() as u64);
        r
    }

    #[test]
    fn empty_is_identity_and_merge_commutes() {
        let a = sample(&[1.0, 2.5]);
        let b = sample(&[-0.5]);
        assert_eq!(report_merge(&[a.clone(), Report::new()]).unwrap(), a);
        assert_eq!(report_merge(&[a.clone(), b.clone()]).unwrap(), report_merge(&[b, a]).unwrap());
    }

    #[test]
    fn quarter_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..400).map(|i| ((i * 37 % 101) as f64).sqrt() - 3.0).collect();
        let whole = sample(&xs);
        let parts: Vec<Report> = xs.chunks(100).map(sample).collect();
        let merged = report_merge(&parts).unwrap();
        let (Value::Stat(a), Value::Stat(b)) = (&whole.entries["gap"], &merged.entries["gap"]) else { panic!() };
        assert_eq!(a.count, b.count);
        assert_eq!((a.min, a.max), (b.min, b.max));
        for (x, y, scale) in [(a.sum, b.sum, a.sum_sq.sqrt() * 400.0), (a.sum_sq, b.sum_sq, a.sum_sq)] {
            assert!((x - y).abs() <= 4.0 * f64::EPSILON * scale, "{x} {y}");
        }
    }

    #[test]
    fn schema_mismatch_and_conflicts() {
        let mut old = sample(&[1.0]);
        old.schema_version = 0;
        assert!(matches!(report_merge(&[sample(&[1.0]), old]), Err(Error::SchemaMismatch(_))));
        let mut other = sample(&[1.0]);
        other.text("model", "bessel");
        assert!(matches!(report_merge(&[sample(&[1.0]), other]), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn text_round_trip_and_sorted() {
        let mut r = sample(&[0.1, 0.2, 1e-300]);
        r.real("z.value", std::f64::consts::PI);
        r.check("ok", true);
        let t = r.to_text();
        assert_eq!(Report::from_text(&t).unwrap(), r);
        let keys: Vec<&str> = t.lines().skip(1).map(|l| l.split(" = ").next().unwrap()).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(r.all_checks_pass());
    }
}
