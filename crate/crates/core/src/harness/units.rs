//! Quantities written with their unit in configuration files, such as
//! `"44 dBm"`, `"7 dB"`, `"447 MHz"` or `"100 m"`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

fn split(s: &str) -> Result<(f64, &str), String> {
    let s = s.trim();
    let end = s
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(end);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot read a number from {s:?}"))?;
    if !value.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok((value, unit.trim()))
}

macro_rules! quantity {
    ($name:ident, $doc:literal, $base:literal, $field:ident, $parse:expr) => {
        #[doc = $doc]
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name {
            pub $field: f64,
        }

        impl $name {
            pub fn new($field: f64) -> Self {
                $name { $field }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                let (v, unit) = split(s)?;
                let f: fn(f64, &str) -> Option<f64> = $parse;
                let base = f(v, unit).ok_or_else(|| format!("unknown unit {unit:?} in {s:?}"))?;
                Ok($name { $field: base })
            }
        }

        impl TryFrom<String> for $name {
            type Error = String;

            fn try_from(s: String) -> Result<Self, String> {
                s.parse()
            }
        }

        impl From<$name> for String {
            fn from(q: $name) -> String {
                format!("{} {}", q.$field, $base)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{} {}", self.$field, $base)
            }
        }
    };
}

quantity!(
    Power,
    "Power, stored in watts.",
    "W",
    watts,
    |v, u| match u {
        "W" => Some(v),
        "mW" => Some(v * 1e-3),
        "dBW" => Some(10f64.powf(v / 10.0)),
        "dBm" => Some(10f64.powf((v - 30.0) / 10.0)),
        _ => None,
    }
);

quantity!(Decibels, "Ratio in decibels.", "dB", db, |v, u| (u == "dB")
    .then_some(v));

quantity!(
    Frequency,
    "Frequency, stored in hertz.",
    "Hz",
    hz,
    |v, u| match u {
        "Hz" => Some(v),
        "kHz" => Some(v * 1e3),
        "MHz" => Some(v * 1e6),
        "GHz" => Some(v * 1e9),
        _ => None,
    }
);

quantity!(
    Length,
    "Length, stored in metres.",
    "m",
    metres,
    |v, u| match u {
        "m" => Some(v),
        "km" => Some(v * 1e3),
        _ => None,
    }
);

impl Power {
    pub fn dbm(self) -> f64 {
        10.0 * self.watts.log10() + 30.0
    }

    pub fn from_dbm(dbm: f64) -> Self {
        Power::new(10f64.powf((dbm - 30.0) / 10.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_power_units() {
        let p: Power = "44 dBm".parse().unwrap();
        assert!((p.watts - 25.118_864_315_095_8).abs() < 1e-9);
        assert!((p.dbm() - 44.0).abs() < 1e-12);
        let n: Power = "-120.9dBm".parse().unwrap();
        assert!((n.dbm() + 120.9).abs() < 1e-9);
        assert_eq!("2 W".parse::<Power>().unwrap().watts, 2.0);
        assert!("3 dBx".parse::<Power>().is_err());
    }

    #[test]
    fn parses_other_quantities() {
        assert_eq!("7 dB".parse::<Decibels>().unwrap().db, 7.0);
        assert_eq!("447 MHz".parse::<Frequency>().unwrap().hz, 447e6);
        assert_eq!("1.5e2 m".parse::<Length>().unwrap().metres, 150.0);
        assert_eq!("0.1 km".parse::<Length>().unwrap().metres, 100.0);
        assert!("ten m".parse::<Length>().is_err());
    }

    #[test]
    fn string_form_round_trips() {
        let p: Power = "30 dBm".parse().unwrap();
        let s: String = p.into();
        assert_eq!(s.parse::<Power>().unwrap(), p);
    }
}
