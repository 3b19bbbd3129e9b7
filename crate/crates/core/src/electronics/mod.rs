//! Linear two-port model of the trap-detachment switch ladder and the
//! in-vacuum RC filter.
//!
//! Networks are cascades of series and shunt branches, each branch a
//! resistor and/or capacitor in parallel. A MOSFET switch is a series
//! branch that is `R_on` when closed and `C_off ∥ R_off` when open. An
//! optional bridging admittance connects the source node directly to the
//! load node, modelling coupling that bypasses the ladder.

mod fit;

pub use fit::{fit_parasitics, ParasiticFit};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::units::{parse_quantity, Dimension};

/// Frequency used for the dc limit of networks with no resistive path.
const DC_LIMIT_FREQUENCY: f64 = 1e-6;

/// Resistor and/or capacitor in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Branch {
    pub resistance: Option<f64>,
    pub capacitance: Option<f64>,
}

impl Branch {
    pub fn resistor(r: f64) -> Self {
        Self {
            resistance: Some(r),
            capacitance: None,
        }
    }

    pub fn capacitor(c: f64) -> Self {
        Self {
            resistance: None,
            capacitance: Some(c),
        }
    }

    pub fn with_leakage(mut self, r: Option<f64>) -> Self {
        self.resistance = r;
        self
    }

    pub fn admittance(&self, omega: f64) -> Complex64 {
        let g = self.resistance.map_or(0.0, |r| 1.0 / r);
        let b = self.capacitance.map_or(0.0, |c| omega * c);
        Complex64::new(g, b)
    }

    fn validate(&self) -> Result<()> {
        if self.resistance.is_none() && self.capacitance.is_none() {
            return Err(Error::InvalidParameter("branch needs a resistance or a capacitance".into()));
        }
        for v in self.resistance.iter().chain(self.capacitance.iter()) {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("component values must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Series(Branch),
    Shunt(Branch),
    Switch {
        on_resistance: f64,
        off_capacitance: f64,
        /// Off-state leakage in parallel with `off_capacitance`.
        off_resistance: Option<f64>,
        closed: bool,
    },
}

impl Element {
    fn abcd(&self, omega: f64) -> [Complex64; 4] {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Element::Series(b) => [one, 1.0 / b.admittance(omega), zero, one],
            Element::Shunt(b) => [one, zero, b.admittance(omega), one],
            Element::Switch {
                on_resistance,
                off_capacitance,
                off_resistance,
                closed,
            } => {
                let z = if *closed {
                    Complex64::new(*on_resistance, 0.0)
                } else {
                    1.0 / Branch {
                        resistance: *off_resistance,
                        capacitance: Some(*off_capacitance),
                    }
                    .admittance(omega)
                };
                [one, z, zero, one]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Element::Series(b) | Element::Shunt(b) => b.validate(),
            Element::Switch {
                on_resistance,
                off_capacitance,
                off_resistance,
                ..
            } => {
                let ok = *on_resistance > 0.0
                    && *off_capacitance > 0.0
                    && off_resistance.is_none_or(|r| r > 0.0)
                    && on_resistance.is_finite()
                    && off_capacitance.is_finite();
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("switch values must be > 0".into()))
                }
            }
        }
    }
}

/// Source, ladder and load.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderNetwork {
    pub elements: Vec<Element>,
    /// Series output resistance of the source (zero for an ideal DAC).
    pub source_resistance: f64,
    /// Load from the output node to ground; `None` for an open output.
    pub load: Option<Branch>,
    /// Admittance bridging source node and load node.
    pub bridge: Option<Branch>,
}

fn mul(a: &[Complex64; 4], b: &[Complex64; 4]) -> [Complex64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// Complex gain `V_load / V_source` at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub gain: Complex64,
    /// The network has no finite dc solution and the value is the f → 0
    /// limit.
    pub dc_limit: bool,
}

impl Transfer {
    pub fn db(&self) -> f64 {
        20.0 * self.gain.norm().log10()
    }

    /// Isolation, dB (positive).
    pub fn isolation_db(&self) -> f64 {
        -self.db()
    }
}

impl LadderNetwork {
    pub fn new(elements: Vec<Element>) -> Result<Self> {
        let n = Self {
            elements,
            source_resistance: 0.0,
            load: None,
            bridge: None,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::InvalidParameter("network needs at least one element".into()));
        }
        if !(self.source_resistance >= 0.0 && self.source_resistance.is_finite()) {
            return Err(Error::InvalidParameter("source resistance must be ≥ 0".into()));
        }
        self.elements.iter().try_for_each(|e| e.validate())?;
        self.load.iter().chain(self.bridge.iter()).try_for_each(|b| b.validate())
    }

    /// Cascade ABCD matrix `[A, B, C, D]` including the bridge.
    pub fn abcd(&self, omega: f64) -> [Complex64; 4] {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let mut m = [one, zero, zero, one];
        for e in &self.elements {
            m = mul(&m, &e.abcd(omega));
        }
        match self.bridge {
            Some(b) => add_bridge(m, b.admittance(omega)),
            None => m,
        }
    }

    fn gain_at(&self, omega: f64) -> Complex64 {
        let [a, b, c, d] = self.abcd(omega);
        let yl = self.load.map_or(Complex64::new(0.0, 0.0), |l| l.admittance(omega));
        1.0 / (a + b * yl + self.source_resistance * (c + d * yl))
    }

    pub fn with_switches(&self, closed: bool) -> Self {
        let mut n = self.clone();
        for e in &mut n.elements {
            if let Element::Switch { closed: c, .. } = e {
                *c = closed;
            }
        }
        n
    }

    /// Appends one switch + shunt divider stage.
    pub fn with_stage(&self, switch: Element, shunt: Branch) -> Self {
        let mut n = self.clone();
        n.elements.push(switch);
        n.elements.push(Element::Shunt(shunt));
        n
    }

    /// Three open switches interleaved with 560 pF capacitors, followed by
    /// the 1 kΩ / 560 pF filter; no parasitics.
    pub fn detachment_ladder() -> Self {
        Self::from_toml_str(include_str!("../../data/detachment_ladder.toml")).expect("shipped ladder parses")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: RawNetwork = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let q = |v: &Option<String>, d: Dimension| v.as_deref().map(|s| parse_quantity(s, d)).transpose();
        let branch = |r: &Option<String>, c: &Option<String>| -> Result<Branch> {
            Ok(Branch {
                resistance: q(r, Dimension::Resistance)?,
                capacitance: q(c, Dimension::Capacitance)?,
            })
        };
        let mut elements = Vec::new();
        for (i, e) in raw.element.iter().enumerate() {
            let at = |err: Error| Error::Parse(format!("element {i}: {err}"));
            let el = match e.kind.as_str() {
                "series" => Element::Series(branch(&e.resistance, &e.capacitance).map_err(at)?),
                "shunt" => Element::Shunt(branch(&e.resistance, &e.capacitance).map_err(at)?),
                "switch" => {
                    let need = |v: &Option<String>, name: &str, d| {
                        q(v, d)?.ok_or_else(|| Error::Parse(format!("switch needs `{name}`")))
                    };
                    Element::Switch {
                        on_resistance: need(&e.on_resistance, "on_resistance", Dimension::Resistance).map_err(at)?,
                        off_capacitance: need(&e.off_capacitance, "off_capacitance", Dimension::Capacitance)
                            .map_err(at)?,
                        off_resistance: q(&e.off_resistance, Dimension::Resistance).map_err(at)?,
                        closed: match e.state.as_deref().unwrap_or("open") {
                            "open" => false,
                            "closed" => true,
                            other => return Err(at(Error::Parse(format!("unknown switch state `{other}`")))),
                        },
                    }
                }
                other => return Err(at(Error::Parse(format!("unknown element kind `{other}`")))),
            };
            el.validate().map_err(at)?;
            elements.push(el);
        }
        let net = Self {
            elements,
            source_resistance: q(&raw.source.resistance, Dimension::Resistance)?.unwrap_or(0.0),
            load: raw.load.map(|l| branch(&l.resistance, &l.capacitance)).transpose()?,
            bridge: raw.bridge.map(|l| branch(&l.resistance, &l.capacitance)).transpose()?,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn to_toml_string(&self) -> String {
        let fmt_branch = |b: &Branch| {
            let mut s = String::new();
            if let Some(r) = b.resistance {
                s.push_str(&format!("resistance = \"{r:e} ohm\"\n"));
            }
            if let Some(c) = b.capacitance {
                s.push_str(&format!("capacitance = \"{c:e} F\"\n"));
            }
            s
        };
        let mut s = format!("[source]\nresistance = \"{:e} ohm\"\n", self.source_resistance);
        if let Some(l) = &self.load {
            s.push_str(&format!("\n[load]\n{}", fmt_branch(l)));
        }
        if let Some(b) = &self.bridge {
            s.push_str(&format!("\n[bridge]\n{}", fmt_branch(b)));
        }
        for e in &self.elements {
            s.push_str("\n[[element]]\n");
            match e {
                Element::Series(b) => s.push_str(&format!("kind = \"series\"\n{}", fmt_branch(b))),
                Element::Shunt(b) => s.push_str(&format!("kind = \"shunt\"\n{}", fmt_branch(b))),
                Element::Switch {
                    on_resistance,
                    off_capacitance,
                    off_resistance,
                    closed,
                } => {
                    s.push_str(&format!(
                        "kind = \"switch\"\non_resistance = \"{on_resistance:e} ohm\"\noff_capacitance = \"{off_capacitance:e} F\"\n"
                    ));
                    if let Some(r) = off_resistance {
                        s.push_str(&format!("off_resistance = \"{r:e} ohm\"\n"));
                    }
                    s.push_str(&format!("state = \"{}\"\n", if *closed { "closed" } else { "open" }));
                }
            }
        }
        s
    }
}

fn add_bridge(m: [Complex64; 4], yb: Complex64) -> [Complex64; 4] {
    // admittance parameters of the ladder plus the bridging π-section,
    // converted back with the yb² terms cancelled analytically; every
    // section has unit determinant, so the cascade does too
    let [a, b, c, d] = m;
    let k = 1.0 + yb * b;
    [
        (a + yb * b) / k,
        b / k,
        (c + yb * (a + d - 2.0)) / k,
        (d + yb * b) / k,
    ]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    resistance: Option<String>,
    capacitance: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSource {
    resistance: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElement {
    kind: String,
    resistance: Option<String>,
    capacitance: Option<String>,
    on_resistance: Option<String>,
    off_capacitance: Option<String>,
    off_resistance: Option<String>,
    state: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    #[serde(default)]
    source: RawSource,
    load: Option<RawBranch>,
    bridge: Option<RawBranch>,
    #[serde(default)]
    element: Vec<RawElement>,
}

/// `V_load / V_source` at frequency `f` (Hz). Where the network has no
/// finite dc solution (a purely capacitive path at f = 0) the f → 0 limit
/// is returned and flagged.
pub fn transfer_function(net: &LadderNetwork, f: f64) -> Result<Transfer> {
    if !(f >= 0.0 && f.is_finite()) {
        return Err(Error::InvalidParameter(format!("frequency must be ≥ 0, got {f}")));
    }
    net.validate()?;
    let g = net.gain_at(2.0 * PI * f);
    if g.is_finite() {
        return Ok(Transfer { gain: g, dc_limit: false });
    }
    if f > 0.0 {
        return Err(Error::InvalidParameter(format!("network is singular at {f} Hz")));
    }
    let g = net.gain_at(2.0 * PI * DC_LIMIT_FREQUENCY);
    if !g.is_finite() {
        return Err(Error::InvalidParameter("network has no dc limit".into()));
    }
    Ok(Transfer { gain: g, dc_limit: true })
}

/// Gain table over a frequency grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IsolationReport {
    pub frequencies: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub dc_limit: Vec<bool>,
}

impl IsolationReport {
    pub fn isolation_db(&self) -> Vec<f64> {
        self.gain_db.iter().map(|g| -g).collect()
    }

    /// Smallest isolation and its frequency.
    pub fn worst(&self) -> Option<(f64, f64)> {
        self.frequencies
            .iter()
            .zip(&self.gain_db)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(f, g)| (*f, -g))
    }

    /// Largest isolation and its frequency.
    pub fn best(&self) -> Option<(f64, f64)> {
        self.frequencies
            .iter()
            .zip(&self.gain_db)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(f, g)| (*f, -g))
    }

    /// Isolation never increases along the grid.
    pub fn non_increasing_isolation(&self) -> bool {
        self.gain_db.windows(2).all(|w| w[1] >= w[0] - 1e-9)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "f_hz,gain_db,isolation_db,dc_limit")?;
        for ((f, g), d) in self.frequencies.iter().zip(&self.gain_db).zip(&self.dc_limit) {
            writeln!(w, "{f:e},{g:.9},{:.9},{}", -g, *d as u8)?;
        }
        Ok(())
    }
}

/// dc plus `points` log-spaced frequencies from 1 Hz to 5.118 MHz, the
/// range of possible motional frequencies.
pub fn motional_band(points: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    let (lo, hi): (f64, f64) = (1.0, 5.118e6);
    for k in 0..points {
        let x = if points > 1 { k as f64 / (points - 1) as f64 } else { 1.0 };
        g.push(lo * (hi / lo).powf(x));
    }
    g
}

pub fn isolation_report(net: &LadderNetwork, grid: &[f64]) -> Result<IsolationReport> {
    let mut r = IsolationReport::default();
    for &f in grid {
        let t = transfer_function(net, f)?;
        r.frequencies.push(f);
        r.gain_db.push(t.db());
        r.dc_limit.push(t.dc_limit);
    }
    Ok(r)
}
