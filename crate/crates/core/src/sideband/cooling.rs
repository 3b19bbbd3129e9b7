use serde::Deserialize;

use super::fock::TAIL_LIMIT;
use super::{rabi_coupling, FockDistribution};
use crate::error::{Error, Result};
use crate::modes::MotionalMode;
use crate::units::{parse_quantity, Dimension};

/// One sideband pulse followed by a repump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub mode: MotionalMode,
    /// Signed sideband order, positive for blue.
    pub order: i64,
    /// s
    pub duration: f64,
}

impl Pulse {
    pub fn new(mode: MotionalMode, order: i64, duration: f64) -> Result<Self> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse duration must be ≥ 0, got {duration}")));
        }
        Ok(Self { mode, order, duration })
    }

    /// Change of the mode's quantum number when the qubit is flipped out of
    /// its prepared level.
    pub fn quantum_change(&self) -> i64 {
        if self.mode.positive_energy() {
            -self.order
        } else {
            self.order
        }
    }

    pub fn cools(&self) -> bool {
        self.quantum_change() < 0
    }
}

/// Incoherent sideband transfer: each level `n` moves the fraction
/// `sin²(Ω_{n,n+Δn} t / 2)` of its population to `n + Δn`.
///
/// With `repump` the qubit is returned to its prepared level afterwards;
/// otherwise `spin_up` holds the remaining prepared-level population.
pub fn transfer(
    dist: &FockDistribution,
    delta_n: i64,
    duration: f64,
    eta: f64,
    omega_0: f64,
    repump: bool,
) -> FockDistribution {
    let mut out = dist.clone();
    if delta_n > 0 {
        out.extend_to(dist.support() + delta_n as usize);
    }
    let src = out.probs().to_vec();
    let probs = out.probs_mut();
    let mut excited = 0.0;
    for (n, &p) in src.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let m = n as i64 + delta_n;
        if m < 0 || delta_n == 0 {
            if delta_n == 0 {
                excited += p * (0.5 * rabi_coupling(n, 0, eta, omega_0) * duration).sin().powi(2);
            }
            continue;
        }
        let moved = p * (0.5 * rabi_coupling(n, delta_n, eta, omega_0) * duration).sin().powi(2);
        probs[n] -= moved;
        probs[m as usize] += moved;
        excited += moved;
    }
    for p in probs.iter_mut() {
        *p = p.max(0.0);
    }
    out.spin_up = if repump { 1.0 } else { 1.0 - excited };
    grow_tail(&mut out);
    out
}

fn grow_tail(d: &mut FockDistribution) {
    while d.tail() >= TAIL_LIMIT {
        let n = 2 * d.truncation().max(1);
        log::warn!("Fock truncation extended to {n}");
        d.extend_to(n);
    }
}

/// Prepared-level population flipped by a pulse driving `Δn = delta_n`.
pub fn excitation_probability(dist: &FockDistribution, delta_n: i64, duration: f64, eta: f64, omega_0: f64) -> f64 {
    dist.probs()
        .iter()
        .enumerate()
        .filter(|(n, _)| *n as i64 + delta_n >= 0)
        .map(|(n, &p)| p * (0.5 * rabi_coupling(n, delta_n, eta, omega_0) * duration).sin().powi(2))
        .sum()
}

/// A sideband pulse with repump.
pub fn apply_pulse(dist: &FockDistribution, pulse: &Pulse, eta: f64, omega_0: f64) -> FockDistribution {
    transfer(dist, pulse.quantum_change(), pulse.duration, eta, omega_0, true)
}

/// Heating at `rate` quanta/s for `duration`, modelled as coupling to a
/// hot bath: `n → n+1` at `rate (n+1)` and `n → n−1` at `rate n`, so that
/// `n̄` grows linearly and thermal states stay thermal.
pub fn heat(dist: &FockDistribution, rate: f64, duration: f64) -> FockDistribution {
    if rate <= 0.0 || duration <= 0.0 {
        return dist.clone();
    }
    // headroom so the reflecting top level does not hold back the flow
    let mut n_max = dist.truncation().max(dist.support() + 8);
    if dist.tail() > 1e-12 {
        n_max *= 2;
    }
    loop {
        let mut out = dist.clone();
        out.extend_to(n_max);
        let levels = out.truncation();
        let h_max = 0.1 / (rate * (2 * levels + 1) as f64);
        let steps = (duration / h_max).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        let p = out.probs_mut();
        let mut k = [vec![0.0; p.len()], vec![0.0; p.len()], vec![0.0; p.len()], vec![0.0; p.len()]];
        let mut tmp = vec![0.0; p.len()];
        for _ in 0..steps {
            derivative(p, rate, &mut k[0]);
            stage(p, &k[0], 0.5 * h, &mut tmp);
            derivative(&tmp, rate, &mut k[1]);
            stage(p, &k[1], 0.5 * h, &mut tmp);
            derivative(&tmp, rate, &mut k[2]);
            stage(p, &k[2], h, &mut tmp);
            derivative(&tmp, rate, &mut k[3]);
            for i in 0..p.len() {
                p[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                p[i] = p[i].max(0.0);
            }
        }
        if out.tail() < TAIL_LIMIT {
            return out;
        }
        n_max *= 2;
        log::warn!("Fock truncation extended to {n_max} during heating");
    }
}

fn stage(p: &[f64], k: &[f64], h: f64, out: &mut [f64]) {
    for i in 0..p.len() {
        out[i] = p[i] + h * k[i];
    }
}

fn derivative(p: &[f64], rate: f64, dp: &mut [f64]) {
    let top = p.len() - 1;
    for n in 0..=top {
        let nf = n as f64;
        let up = if n < top { nf + 1.0 } else { 0.0 };
        let mut d = -(up + nf) * p[n];
        if n > 0 {
            d += nf * p[n - 1];
        }
        if n < top {
            d += (nf + 1.0) * p[n + 1];
        }
        dp[n] = rate * d;
    }
}

/// Ordered cooling pulses, each followed by a repump of fixed length.
/// The list is repeated until the time budget runs out.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingSchedule {
    pub pulses: Vec<Pulse>,
    /// s
    pub repump: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    repump: Option<String>,
    #[serde(default)]
    pulse: Vec<RawPulse>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulse {
    mode: String,
    sideband: String,
    order: u32,
    duration: String,
    #[serde(default = "one")]
    repeat: usize,
}

fn one() -> usize {
    1
}

impl CoolingSchedule {
    pub fn new(pulses: Vec<Pulse>, repump: f64) -> Result<Self> {
        let s = Self { pulses, repump };
        s.validate()?;
        Ok(s)
    }

    /// Every pulse must lower its mode's quantum number: blue sidebands on
    /// positive-energy modes, red on the magnetron mode.
    pub fn validate(&self) -> Result<()> {
        if !(self.repump >= 0.0 && self.repump.is_finite()) {
            return Err(Error::InvalidParameter("repump duration must be ≥ 0".into()));
        }
        for (i, p) in self.pulses.iter().enumerate() {
            if !p.cools() {
                let colour = if p.order > 0 { "blue" } else { "red" };
                return Err(Error::InvalidParameter(format!(
                    "pulse {i}: {colour} sideband heats the {} mode",
                    p.mode
                )));
            }
        }
        Ok(())
    }

    pub fn cycle_duration(&self) -> f64 {
        self.pulses.iter().map(|p| p.duration + self.repump).sum()
    }

    /// Parses the TOML schedule format:
    ///
    /// ```toml
    /// repump = "10 us"
    /// [[pulse]]
    /// mode = "axial"
    /// sideband = "blue"
    /// order = 3
    /// duration = "500 us"
    /// repeat = 2
    /// ```
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let raw: RawSchedule = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let repump = match raw.repump {
            Some(r) => parse_quantity(&r, Dimension::Time)?,
            None => 0.0,
        };
        let mut pulses = Vec::new();
        for (i, p) in raw.pulse.iter().enumerate() {
            let mode: MotionalMode = p.mode.parse()?;
            let sign = match p.sideband.trim().to_ascii_lowercase().as_str() {
                "blue" => 1,
                "red" => -1,
                other => return Err(Error::Parse(format!("pulse {i}: sideband must be blue or red, got `{other}`"))),
            };
            if p.order == 0 {
                return Err(Error::Parse(format!("pulse {i}: order must be ≥ 1")));
            }
            let duration = parse_quantity(&p.duration, Dimension::Time)?;
            let pulse = Pulse::new(mode, sign * p.order as i64, duration)?;
            pulses.extend(std::iter::repeat_n(pulse, p.repeat));
        }
        Self::new(pulses, repump)
    }

    pub fn to_toml_string(&self) -> String {
        let mut s = format!("repump = \"{} s\"\n", self.repump);
        for p in &self.pulses {
            s.push_str(&format!(
                "\n[[pulse]]\nmode = \"{}\"\nsideband = \"{}\"\norder = {}\nduration = \"{} s\"\n",
                p.mode,
                if p.order > 0 { "blue" } else { "red" },
                p.order.abs(),
                p.duration
            ));
        }
        s
    }

    /// Alternating third- and first-sideband pulses on all three modes.
    pub fn shipped() -> Self {
        Self::from_toml_str(include_str!("../../data/sideband_schedule.toml")).expect("shipped schedule parses")
    }
}

#[derive(Debug, Clone)]
pub struct CoolingResult {
    pub state: [FockDistribution; 3],
    /// Time after each pulse (and at the end of the budget).
    pub times: Vec<f64>,
    /// Mean occupations (+, −, z) at `times`, starting with the initial state.
    pub mean_quanta: Vec<[f64; 3]>,
    pub pulses_applied: usize,
}

impl CoolingResult {
    pub fn final_mean(&self) -> [f64; 3] {
        *self.mean_quanta.last().unwrap()
    }
}

/// Runs the schedule cyclically for `total_time`, with every mode heating
/// at its own rate throughout. Pulses that no longer fit in the budget are
/// skipped and the remaining time is spent idle.
pub fn sideband_cool(
    initial: &[FockDistribution; 3],
    schedule: &CoolingSchedule,
    eta: [f64; 3],
    omega_0: f64,
    heating: [f64; 3],
    total_time: f64,
) -> Result<CoolingResult> {
    schedule.validate()?;
    if !(total_time >= 0.0 && total_time.is_finite()) {
        return Err(Error::InvalidParameter("total time must be ≥ 0".into()));
    }
    let mut state = initial.clone();
    let mean = |s: &[FockDistribution; 3]| [s[0].mean(), s[1].mean(), s[2].mean()];
    let mut times = vec![0.0];
    let mut mean_quanta = vec![mean(&state)];
    let mut t = 0.0;
    let mut applied = 0;
    let heat_all = |state: &mut [FockDistribution; 3], dt: f64| {
        for (d, &r) in state.iter_mut().zip(&heating) {
            *d = heat(d, r, dt);
        }
    };
    if schedule.cycle_duration() > 0.0 {
        'outer: loop {
            for p in &schedule.pulses {
                let dt = p.duration + schedule.repump;
                if t + dt > total_time * (1.0 + 1e-12) {
                    break 'outer;
                }
                let k = p.mode.index();
                state[k] = apply_pulse(&state[k], p, eta[k], omega_0);
                heat_all(&mut state, dt);
                t += dt;
                applied += 1;
                times.push(t);
                mean_quanta.push(mean(&state));
            }
        }
    }
    if total_time > t {
        heat_all(&mut state, total_time - t);
        times.push(total_time);
        mean_quanta.push(mean(&state));
    }
    Ok(CoolingResult {
        state,
        times,
        mean_quanta,
        pulses_applied: applied,
    })
}
