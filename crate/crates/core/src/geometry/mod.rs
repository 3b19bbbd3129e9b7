//! Planar electrode layouts and their electrostatics.
//!
//! Electrodes are axis-aligned rectangles in the plane `y = 0` tiling an
//! otherwise grounded plane. The magnetic field points along `z`, the surface
//! normal along `y`.

mod field;
mod null;
mod solve;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use field::{
    basis_potential, rectangle_gradient, rectangle_sample, total_field, ElectrodeField, Field,
    FieldSample, QuadrupoleField, SumField,
};
pub use null::{find_null, find_null_with, rf_null_line, NullOptions, RfNullOptions};
pub use solve::{
    bounded_least_squares, solve_voltages, BoundedSolution, HessianTarget, SolveOptions,
    VoltageSolution, VoltageTarget,
};

/// Axis-aligned rectangle in the electrode plane, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, z0: f64, z1: f64) -> Self {
        Self {
            x0: x0.min(x1),
            x1: x0.max(x1),
            z0: z0.min(z1),
            z1: z0.max(z1),
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.z1 - self.z0)
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x > self.x0 && x < self.x1 && z > self.z0 && z < self.z1
    }

    fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.z0 < other.z1 && other.z0 < self.z1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Electrode {
    pub label: String,
    pub rect: Rect,
    pub rf_capable: bool,
}

/// A validated set of non-overlapping electrodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeGeometry {
    electrodes: Vec<Electrode>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeometryFile {
    #[serde(rename = "electrode", default)]
    electrodes: Vec<ElectrodeEntry>,
}

/// One rectangle as written in a geometry file, extents in micrometres.
#[derive(Debug, Serialize, Deserialize)]
struct ElectrodeEntry {
    label: String,
    x0: f64,
    x1: f64,
    z0: f64,
    z1: f64,
    #[serde(default)]
    rf: bool,
}

const DEFAULT_GEOMETRY: &str = include_str!("../../data/default_geometry.toml");
const REFERENCE_VOLTAGES: &str = include_str!("../../data/reference_voltages.toml");

impl ElectrodeGeometry {
    pub fn new(electrodes: Vec<Electrode>) -> Result<Self> {
        if electrodes.is_empty() {
            return Err(Error::InvalidGeometry("no electrodes".into()));
        }
        for (i, e) in electrodes.iter().enumerate() {
            let r = &e.rect;
            if !(r.x0.is_finite() && r.x1.is_finite() && r.z0.is_finite() && r.z1.is_finite()) {
                return Err(Error::InvalidGeometry(format!("`{}` has non-finite extent", e.label)));
            }
            if r.area() <= 0.0 {
                return Err(Error::InvalidGeometry(format!("`{}` has zero area", e.label)));
            }
            for other in &electrodes[..i] {
                if other.label == e.label {
                    return Err(Error::InvalidGeometry(format!("duplicate label `{}`", e.label)));
                }
                if other.rect.overlaps(r) {
                    return Err(Error::InvalidGeometry(format!(
                        "`{}` overlaps `{}`",
                        e.label, other.label
                    )));
                }
            }
        }
        Ok(Self { electrodes })
    }

    /// The shipped 25-electrode layout: seven long central strips along `z`
    /// (all rf capable) flanked by two rows of nine dc segments.
    pub fn default_trap() -> Self {
        Self::from_toml_str(DEFAULT_GEOMETRY).expect("shipped geometry is valid")
    }

    /// Dc voltages for the shipped layout giving a radially symmetric
    /// 2π × 2.5 MHz ⁹Be⁺ well 152 µm above the centre.
    pub fn reference_voltages() -> VoltageSet {
        VoltageSet::from_toml_str(REFERENCE_VOLTAGES).expect("shipped voltages are valid")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: GeometryFile = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let electrodes = file
            .electrodes
            .into_iter()
            .map(|e| Electrode {
                label: e.label,
                rect: Rect::new(e.x0 * 1e-6, e.x1 * 1e-6, e.z0 * 1e-6, e.z1 * 1e-6),
                rf_capable: e.rf,
            })
            .collect();
        Self::new(electrodes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let file = GeometryFile {
            electrodes: self
                .electrodes
                .iter()
                .map(|e| ElectrodeEntry {
                    label: e.label.clone(),
                    x0: e.rect.x0 * 1e6,
                    x1: e.rect.x1 * 1e6,
                    z0: e.rect.z0 * 1e6,
                    z1: e.rect.z1 * 1e6,
                    rf: e.rf_capable,
                })
                .collect(),
        };
        toml::to_string(&file).expect("geometry serialises")
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.electrodes
            .iter()
            .position(|e| e.label == label)
            .ok_or_else(|| Error::UnknownElectrode(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.electrodes.iter().map(|e| e.label.as_str())
    }
}

/// Electrode voltages keyed by label. Electrodes absent from the map are
/// grounded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoltageSet {
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

impl VoltageSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: impl Into<String>, volts: f64) -> Self {
        self.values.insert(label.into(), volts);
        self
    }

    pub fn set(&mut self, label: impl Into<String>, volts: f64) {
        self.values.insert(label.into(), volts);
    }

    pub fn get(&self, label: &str) -> f64 {
        self.values.get(label).copied().unwrap_or(0.0)
    }

    pub fn from_vec(geom: &ElectrodeGeometry, v: &[f64]) -> Self {
        Self {
            values: geom.labels().map(str::to_string).zip(v.iter().copied()).collect(),
        }
    }

    /// Dense vector in geometry order; unknown labels are an error.
    pub fn to_vec(&self, geom: &ElectrodeGeometry) -> Result<Vec<f64>> {
        let mut out = vec![0.0; geom.len()];
        for (label, &v) in &self.values {
            out[geom.index_of(label)?] = v;
        }
        Ok(out)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            values: self.values.iter().map(|(l, v)| (l.clone(), v * k)).collect(),
        }
    }

    pub fn check_bounds(&self, bound: f64) -> Result<()> {
        for (label, &v) in &self.values {
            if v.abs() > bound {
                return Err(Error::VoltageOutOfBounds {
                    electrode: label.clone(),
                    value: v,
                    bound,
                });
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("voltages serialise")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(label: &str, x0: f64, x1: f64) -> Electrode {
        Electrode {
            label: label.into(),
            rect: Rect::new(x0, x1, -1.0, 1.0),
            rf_capable: false,
        }
    }

    #[test]
    fn rejects_overlap_and_degenerate() {
        assert!(ElectrodeGeometry::new(vec![strip("a", 0.0, 1.0), strip("b", 0.5, 2.0)]).is_err());
        assert!(ElectrodeGeometry::new(vec![strip("a", 0.0, 0.0)]).is_err());
        assert!(ElectrodeGeometry::new(vec![strip("a", 0.0, 1.0), strip("a", 1.0, 2.0)]).is_err());
        assert!(ElectrodeGeometry::new(vec![strip("a", 0.0, 1.0), strip("b", 1.0, 2.0)]).is_ok());
    }

    #[test]
    fn default_trap_layout() {
        let g = ElectrodeGeometry::default_trap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.electrodes().iter().filter(|e| e.rf_capable).count(), 7);
    }

    #[test]
    fn geometry_and_voltage_text_round_trip() {
        let g = ElectrodeGeometry::default_trap();
        let back = ElectrodeGeometry::from_toml_str(&g.to_toml_string()).unwrap();
        for (a, b) in g.electrodes().iter().zip(back.electrodes()) {
            assert_eq!(a.label, b.label);
            assert!((a.rect.x0 - b.rect.x0).abs() < 1e-15);
        }
        let v = VoltageSet::new().with("mid1", 1.25).with("dcl1", -3.0);
        assert_eq!(VoltageSet::from_toml_str(&v.to_toml_string()).unwrap(), v);
        assert!(v.to_vec(&g).is_ok());
        assert!(VoltageSet::new().with("nope", 1.0).to_vec(&g).is_err());
        assert!(v.check_bounds(2.0).is_err());
    }
}
