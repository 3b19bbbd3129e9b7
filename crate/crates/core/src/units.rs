//! Physical constants, species data and unit-tagged quantity parsing.
//!
//! Every physical quantity inside the crate is SI with angular frequencies in
//! rad/s. Text interfaces carry explicit units (`"2.5 MHz"`, `"3 T"`,
//! `"152 um"`) and are normalised here.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Qubit transition sensitivity to the magnetic field, Hz/T.
pub const QUBIT_FIELD_SENSITIVITY: f64 = 28e9;
/// Wavelength of the cooling, detection and Raman beams.
pub const BEAM_WAVELENGTH: f64 = 313e-9;
/// Cycling-transition linewidth used by the Doppler model (2π × 19.4 MHz).
pub const CYCLING_LINEWIDTH: f64 = 2.0 * PI * 19.4e6;

/// Convert a frequency in Hz to rad/s.
pub fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

/// Convert an angular frequency to Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Singly charged ion species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub mass: f64,
    pub charge: f64,
}

impl Species {
    /// ⁹Be⁺ with a fixed isotopic mass of 9.012182 u.
    pub fn beryllium9() -> Self {
        Self {
            mass: 9.012_182 * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
        }
    }

    pub fn proton() -> Self {
        Self {
            mass: 1.672_621_923_69e-27,
            charge: ELEMENTARY_CHARGE,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "be9" | "9be+" | "be9+" | "beryllium9" => Ok(Self::beryllium9()),
            "proton" | "p" | "h+" => Ok(Self::proton()),
            other => Err(Error::Parse(format!("unknown species `{other}`"))),
        }
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }
}

/// Dimension of a parsed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Dimensionless,
    Frequency,
    AngularFrequency,
    Time,
    Length,
    Voltage,
    MagneticField,
    Resistance,
    Capacitance,
    Rate,
    Mass,
}

/// A value tagged with its SI dimension. Frequencies given in Hz are stored
/// as angular frequencies (rad/s); `Frequency` is kept as a separate
/// dimension only so that the original unit can be reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dimension: Dimension,
}

const PREFIXES: &[(&str, f64)] = &[
    ("G", 1e9),
    ("M", 1e6),
    ("k", 1e3),
    ("m", 1e-3),
    ("u", 1e-6),
    ("µ", 1e-6),
    ("μ", 1e-6),
    ("n", 1e-9),
    ("p", 1e-12),
    ("f", 1e-15),
];

const UNITS: &[(&str, Dimension)] = &[
    ("Hz", Dimension::Frequency),
    ("rad/s", Dimension::AngularFrequency),
    ("/s", Dimension::Rate),
    ("1/s", Dimension::Rate),
    ("s", Dimension::Time),
    ("m", Dimension::Length),
    ("V", Dimension::Voltage),
    ("T", Dimension::MagneticField),
    ("ohm", Dimension::Resistance),
    ("Ω", Dimension::Resistance),
    ("F", Dimension::Capacitance),
];

fn split_unit(unit: &str) -> Option<(f64, Dimension)> {
    match unit {
        "u" | "Da" => return Some((ATOMIC_MASS_UNIT, Dimension::Mass)),
        "kg" => return Some((1.0, Dimension::Mass)),
        _ => {}
    }
    if let Some(&(_, dim)) = UNITS.iter().find(|(u, _)| *u == unit) {
        return Some((1.0, dim));
    }
    for (prefix, scale) in PREFIXES {
        if let Some(rest) = unit.strip_prefix(prefix) {
            if let Some(&(_, dim)) = UNITS.iter().find(|(u, _)| *u == rest) {
                // `m/s` style rates do not take prefixes
                if dim == Dimension::Rate {
                    continue;
                }
                return Some((*scale, dim));
            }
        }
    }
    None
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(s.len());
        // an exponent marker directly followed by a unit letter is part of the unit
        let (mut num, mut unit) = s.split_at(split);
        if num.ends_with(['e', 'E']) {
            num = &num[..num.len() - 1];
            unit = &s[num.len()..];
        }
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("cannot parse number in `{s}`")))?;
        let unit = unit.trim();
        if unit.is_empty() {
            return Ok(Quantity {
                value,
                dimension: Dimension::Dimensionless,
            });
        }
        let (scale, dimension) =
            split_unit(unit).ok_or_else(|| Error::Parse(format!("unknown unit `{unit}` in `{s}`")))?;
        let value = value * scale;
        Ok(match dimension {
            Dimension::Frequency => Quantity {
                value: hz(value),
                dimension,
            },
            _ => Quantity { value, dimension },
        })
    }
}

impl Quantity {
    /// Value in SI (angular frequency for Hz input), checking dimension.
    pub fn expect(&self, dim: Dimension) -> Result<f64> {
        let ok = match dim {
            Dimension::AngularFrequency | Dimension::Frequency => matches!(
                self.dimension,
                Dimension::AngularFrequency | Dimension::Frequency
            ),
            d => self.dimension == d,
        };
        if ok {
            Ok(self.value)
        } else {
            Err(Error::Parse(format!(
                "expected {dim:?}, found {:?}",
                self.dimension
            )))
        }
    }
}

/// Parse a quantity string and return its SI value in the expected dimension.
pub fn parse_quantity(s: &str, dim: Dimension) -> Result<f64> {
    s.parse::<Quantity>()?.expect(dim)
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dimension {
            Dimension::Frequency | Dimension::AngularFrequency => {
                write!(f, "{} Hz", to_hz(self.value))
            }
            Dimension::Time => write!(f, "{} s", self.value),
            Dimension::Length => write!(f, "{} m", self.value),
            Dimension::Voltage => write!(f, "{} V", self.value),
            Dimension::MagneticField => write!(f, "{} T", self.value),
            Dimension::Resistance => write!(f, "{} ohm", self.value),
            Dimension::Capacitance => write!(f, "{} F", self.value),
            Dimension::Rate => write!(f, "{} /s", self.value),
            Dimension::Mass => write!(f, "{} kg", self.value),
            Dimension::Dimensionless => write!(f, "{}", self.value),
        }
    }
}

impl Serialize for Quantity {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prefixed_units() {
        let q: Quantity = "2.5 MHz".parse().unwrap();
        assert!((q.value - hz(2.5e6)).abs() < 1e-6);
        assert_eq!(parse_quantity("3 T", Dimension::MagneticField).unwrap(), 3.0);
        assert!((parse_quantity("152 um", Dimension::Length).unwrap() - 152e-6).abs() < 1e-18);
        assert!((parse_quantity("0.45 pF", Dimension::Capacitance).unwrap() - 0.45e-12).abs() < 1e-24);
        assert_eq!(parse_quantity("1 kohm", Dimension::Resistance).unwrap(), 1e3);
        assert!((parse_quantity("300us", Dimension::Time).unwrap() - 300e-6).abs() < 1e-18);
        assert_eq!(parse_quantity("0.088 /s", Dimension::Rate).unwrap(), 0.088);
        assert_eq!(parse_quantity("1e3 ms", Dimension::Time).unwrap(), 1.0);
        assert_eq!(parse_quantity("9.012182 u", Dimension::Mass).unwrap(), 9.012182 * ATOMIC_MASS_UNIT);
    }

    #[test]
    fn rejects_wrong_dimension_and_garbage() {
        assert!(parse_quantity("3 T", Dimension::Length).is_err());
        assert!(parse_quantity("three T", Dimension::MagneticField).is_err());
        assert!(parse_quantity("3 furlongs", Dimension::Length).is_err());
    }

    #[test]
    fn beryllium_mass() {
        let be = Species::beryllium9();
        assert!((be.mass / ATOMIC_MASS_UNIT - 9.012182).abs() < 1e-9);
    }
}
