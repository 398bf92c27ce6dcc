//! Times with an explicit unit, stored in minutes.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A span of time in minutes, written as `"30s"` or `"1.5min"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Minutes(pub f64);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid time `{0}`: expected a number with a unit suffix, e.g. \"30s\" or \"1.5min\"")]
pub struct ParseTimeError(pub String);

impl Minutes {
    pub fn get(self) -> f64 {
        self.0
    }
}

impl FromStr for Minutes {
    type Err = ParseTimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (num, scale) = if let Some(v) = s.strip_suffix("min") {
            (v, 1.0)
        } else if let Some(v) = s.strip_suffix('s') {
            (v, 1.0 / 60.0)
        } else {
            return Err(ParseTimeError(s.to_string()));
        };
        let v: f64 = num.trim().parse().map_err(|_| ParseTimeError(s.to_string()))?;
        if !v.is_finite() {
            return Err(ParseTimeError(s.to_string()));
        }
        Ok(Minutes(v * scale))
    }
}

impl fmt::Display for Minutes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}min", self.0)
    }
}

impl Serialize for Minutes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Minutes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Minutes;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a time such as \"30s\" or \"1.5min\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Minutes, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_str(V)
    }
}

/// Parses a command-line time: a bare number is taken as minutes.
pub fn parse_cli_minutes(s: &str) -> Result<f64, ParseTimeError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(ParseTimeError(s.to_string())),
        Err(_) => s.parse::<Minutes>().map(Minutes::get),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units() {
        assert_eq!("30s".parse::<Minutes>().unwrap(), Minutes(0.5));
        assert_eq!("1.5min".parse::<Minutes>().unwrap(), Minutes(1.5));
        assert_eq!(" 2 min".parse::<Minutes>().unwrap(), Minutes(2.0));
        assert!("10".parse::<Minutes>().is_err());
        assert!("10h".parse::<Minutes>().is_err());
        assert!("infs".parse::<Minutes>().is_err());
        assert_eq!(parse_cli_minutes("7.96").unwrap(), 7.96);
        assert_eq!(parse_cli_minutes("60s").unwrap(), 1.0);
    }

    #[test]
    fn display_round_trips() {
        for v in [0.0, 1.0 / 60.0, 7.96, 1e-9, 12345.678] {
            let m = Minutes(v);
            assert_eq!(m.to_string().parse::<Minutes>().unwrap(), m);
        }
    }
}
