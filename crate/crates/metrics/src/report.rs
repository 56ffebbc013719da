use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::MetricsError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A real number that serializes `+∞` as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MetricValue(pub f64);

impl From<f64> for MetricValue {
    fn from(v: f64) -> Self {
        MetricValue(v)
    }
}

impl From<MetricValue> for f64 {
    fn from(v: MetricValue) -> Self {
        v.0
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for MetricValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(MetricValue(v)),
            Raw::Str(s) if s == "inf" => Ok(MetricValue(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricName {
    OneNna,
    Cov,
    Mmd,
    OneNnaP,
    CovP,
    MmdP,
    Snap,
    Miou,
}

impl MetricName {
    pub const ALL: [MetricName; 8] = [
        MetricName::OneNna,
        MetricName::Cov,
        MetricName::Mmd,
        MetricName::OneNnaP,
        MetricName::CovP,
        MetricName::MmdP,
        MetricName::Snap,
        MetricName::Miou,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::OneNna => "1nna",
            MetricName::Cov => "cov",
            MetricName::Mmd => "mmd",
            MetricName::OneNnaP => "1nna-p",
            MetricName::CovP => "cov-p",
            MetricName::MmdP => "mmd-p",
            MetricName::Snap => "snap",
            MetricName::Miou => "miou",
        }
    }

    /// Metrics reported as fractions and rendered as percentages.
    pub fn is_fraction(self) -> bool {
        matches!(
            self,
            MetricName::OneNna | MetricName::Cov | MetricName::OneNnaP | MetricName::CovP | MetricName::Miou
        )
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MetricsError::Malformed(format!("unknown metric {s:?}")))
    }
}

impl Serialize for MetricName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MetricName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One evaluated metric, as written to report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: MetricName,
    pub distance: String,
    pub value: MetricValue,
    pub r_size: usize,
    pub g_size: usize,
    pub tie_rule: String,
    pub seed: Option<u64>,
    pub version: String,
}

/// Renders a fraction as a percentage with two decimals, e.g. `0.654 → "65.40"`.
pub fn format_percent(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{:.2}", v * 100.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_round_trips_as_string() {
        let json = serde_json::to_string(&vec![MetricValue(f64::INFINITY), MetricValue(0.25)]).unwrap();
        assert_eq!(json, r#"["inf",0.25]"#);
        let back: Vec<MetricValue> = serde_json::from_str(&json).unwrap();
        assert_eq!(back[0].0, f64::INFINITY);
        assert!(serde_json::from_str::<MetricValue>(r#""nan""#).is_err());
    }

    #[test]
    fn percent_rendering() {
        assert_eq!(format_percent(0.654), "65.40");
        assert_eq!(format_percent(0.0), "0.00");
        assert_eq!(format_percent(f64::INFINITY), "inf");
    }

    #[test]
    fn metric_names_parse() {
        for m in MetricName::ALL {
            assert_eq!(m.as_str().parse::<MetricName>().unwrap(), m);
        }
    }
}
