//! Dephasing under classical frequency noise: Ramsey, spin-echo and Uhrig
//! sequences with instantaneous π pulses, a filter-function engine and a
//! time-domain Monte-Carlo engine, and decay-curve fitting.

mod fit;
mod montecarlo;
mod noise;

pub use fit::{fit_coherence, fit_noise_spectrum, CoherenceFit, DecayModel, SpectrumFit};
pub use montecarlo::{monte_carlo_decay, MonteCarloOptions};
pub use noise::NoiseModel;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::QUBIT_FIELD_SENSITIVITY;

/// π/2 – free evolution with π pulses – π/2.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    /// Total free-evolution time, s.
    pub total: f64,
    /// Centres of the π pulses, s.
    pub pulses: Vec<f64>,
    /// Phase of the closing π/2 pulse, rad.
    pub final_phase: f64,
}

impl PulseSequence {
    pub fn new(total: f64, pulses: Vec<f64>) -> Result<Self> {
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidParameter(format!("sequence length must be > 0, got {total}")));
        }
        let inside = pulses.iter().all(|&t| t > 0.0 && t < total);
        let sorted = pulses.windows(2).all(|w| w[0] < w[1]);
        if !(inside && sorted) {
            return Err(Error::InvalidParameter(
                "π pulses must be sorted and strictly inside the sequence".into(),
            ));
        }
        Ok(Self {
            total,
            pulses,
            final_phase: 0.0,
        })
    }

    pub fn ramsey(total: f64) -> Result<Self> {
        Self::new(total, vec![])
    }

    /// Switching-function jump points `t_j` and weights `c_j`, such that
    /// `F(ω) = |Σ c_j e^{iωt_j}|²`.
    fn jumps(&self) -> Vec<(f64, f64)> {
        let n = self.pulses.len();
        let mut out = Vec::with_capacity(n + 2);
        out.push((0.0, 1.0));
        for (j, &t) in self.pulses.iter().enumerate() {
            out.push((t, if j % 2 == 0 { -2.0 } else { 2.0 }));
        }
        out.push((self.total, if n.is_multiple_of(2) { -1.0 } else { 1.0 }));
        out
    }

    /// `∫ y(t) dt` of the ±1 switching function.
    pub fn net_time(&self) -> f64 {
        let mut edges = vec![0.0];
        edges.extend(&self.pulses);
        edges.push(self.total);
        edges
            .windows(2)
            .enumerate()
            .map(|(k, w)| if k % 2 == 0 { w[1] - w[0] } else { w[0] - w[1] })
            .sum()
    }
}

/// `τ_n = T sin²(nπ / (2(N+1)))`, `n = 1..N`.
pub fn uhrig_times(order: usize, total: f64) -> Result<PulseSequence> {
    if order == 0 {
        return Err(Error::InvalidParameter("Uhrig order must be ≥ 1".into()));
    }
    let pulses = (1..=order)
        .map(|n| total * (n as f64 * PI / (2.0 * (order + 1) as f64)).sin().powi(2))
        .collect();
    PulseSequence::new(total, pulses)
}

/// Sequence shapes that can be stretched to any length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceFamily {
    Ramsey,
    Echo,
    Uhrig(usize),
}

impl SequenceFamily {
    pub fn at(&self, total: f64) -> Result<PulseSequence> {
        match *self {
            SequenceFamily::Ramsey => PulseSequence::ramsey(total),
            SequenceFamily::Echo => uhrig_times(1, total),
            SequenceFamily::Uhrig(n) => uhrig_times(n, total),
        }
    }
}

impl FromStr for SequenceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let l = s.trim().to_ascii_lowercase();
        match l.as_str() {
            "ramsey" => Ok(Self::Ramsey),
            "echo" | "spin-echo" => Ok(Self::Echo),
            _ => l
                .strip_prefix("uhrig-")
                .or_else(|| l.strip_prefix("uhrig"))
                .and_then(|n| n.parse().ok())
                .filter(|&n| n >= 1)
                .map(Self::Uhrig)
                .ok_or_else(|| Error::Parse(format!("unknown sequence `{s}` (ramsey, echo, uhrig-N)"))),
        }
    }
}

impl fmt::Display for SequenceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ramsey => f.write_str("ramsey"),
            Self::Echo => f.write_str("echo"),
            Self::Uhrig(n) => write!(f, "uhrig-{n}"),
        }
    }
}

/// `F(ω) = |1 + (−1)^{N+1} e^{iωT} + 2 Σ_j (−1)^j e^{iωt_j}|²`.
pub fn filter_function(seq: &PulseSequence, omega: f64) -> f64 {
    seq.jumps()
        .iter()
        .map(|&(t, c)| Complex64::from_polar(c, omega * t))
        .sum::<Complex64>()
        .norm_sqr()
}

/// Decay exponent `χ = (1/2π) ∫₀^∞ S(ω) F(ω) / ω² dω`, so that the
/// contrast is `e^{−χ}`. Evaluated as `−Σ_{jk} c_j c_k G(t_j − t_k)`
/// using the expansion of `F` in the jump points.
pub fn decay_exponent(noise: &NoiseModel, seq: &PulseSequence) -> Result<f64> {
    let jumps = seq.jumps();
    let mut chi = 0.0;
    for (j, &(tj, cj)) in jumps.iter().enumerate() {
        for &(tk, ck) in &jumps[j + 1..] {
            chi -= 2.0 * cj * ck * noise.lag_integral(tk - tj)?;
        }
    }
    Ok(chi.max(0.0))
}

/// Contrast (or population) samples with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceCurve {
    pub times: Vec<f64>,
    pub contrast: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl CoherenceCurve {
    pub fn new(times: Vec<f64>, contrast: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if times.len() != contrast.len() || times.len() != stderr.len() {
            return Err(Error::InvalidParameter("curve columns differ in length".into()));
        }
        Ok(Self {
            times,
            contrast,
            stderr,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_s,contrast,stderr")?;
        for ((t, c), s) in self.times.iter().zip(&self.contrast).zip(&self.stderr) {
            writeln!(w, "{t:e},{c:.12e},{s:.6e}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("time grid must be positive and ascending".into()));
    }
    Ok(())
}

/// Filter-function prediction `W(t) = exp(−χ(t))` on `t_grid`.
pub fn coherence_decay(noise: &NoiseModel, family: SequenceFamily, t_grid: &[f64]) -> Result<CoherenceCurve> {
    noise.validate()?;
    check_grid(t_grid)?;
    let contrast = t_grid
        .iter()
        .map(|&t| Ok((-decay_exponent(noise, &family.at(t)?)?).exp()))
        .collect::<Result<Vec<_>>>()?;
    CoherenceCurve::new(t_grid.to_vec(), contrast, vec![0.0; t_grid.len()])
}

/// Length at which the contrast falls to 1/e, or `None` if it stays above
/// 1/e up to `t_max`.
pub fn coherence_time(noise: &NoiseModel, family: SequenceFamily, t_max: f64) -> Result<Option<f64>> {
    noise.validate()?;
    // root of ln χ(t) = 0 in ln t; ln χ is close to linear there
    let f = |t: f64| -> Result<f64> { Ok(decay_exponent(noise, &family.at(t)?)?.max(1e-300).ln()) };
    let mut b = t_max.ln();
    let mut fb = f(t_max)?;
    if fb < 0.0 {
        return Ok(None);
    }
    let mut a = b;
    let mut fa = fb;
    let mut step = std::f64::consts::LN_2 * 4.0;
    for _ in 0..400 {
        a = b - step;
        fa = f(a.exp())?;
        if fa < 0.0 {
            break;
        }
        b = a;
        fb = fa;
        step *= 1.5;
    }
    if fa >= 0.0 {
        return Ok(Some(0.0));
    }
    // Illinois regula falsi on [a, b] with f(a) < 0 ≤ f(b)
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c.exp())?;
        if fc.abs() < 1e-10 || (b - a).abs() < 1e-12 {
            return Ok(Some(c.exp()));
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(Some(((a + b) / 2.0).exp()))
}

/// Contrast of the motional superposition `(|0⟩ + |1⟩)/√2` whose phase
/// follows the mode-frequency noise, with an optional echo.
pub fn motional_ramsey(frequency_noise: &NoiseModel, echo: bool, t_grid: &[f64]) -> Result<CoherenceCurve> {
    let family = if echo { SequenceFamily::Echo } else { SequenceFamily::Ramsey };
    coherence_decay(frequency_noise, family, t_grid)
}

/// Axial-frequency fluctuation for a relative trap-voltage fluctuation,
/// `δωz = ωz δV / 2V` since `ωz ∝ √V`.
pub fn axial_frequency_noise(omega_z: f64, relative_voltage_noise: f64) -> f64 {
    0.5 * omega_z * relative_voltage_noise
}

/// Qubit detuning produced by a magnetic-field change, rad/s.
pub fn field_to_detuning(delta_b: f64) -> f64 {
    2.0 * PI * QUBIT_FIELD_SENSITIVITY * delta_b
}
