//! Quantized motion: Lamb-Dicke factors, Fock-resolved sideband couplings,
//! continuous sideband cooling, thermometry and heating rates.
//!
//! Sideband orders follow the laser-frequency convention: order `+1` is the
//! first blue sideband, `−3` the third red one. The qubit is prepared in
//! its upper level, so a blue sideband removes a quantum from a
//! positive-energy mode and a red sideband removes one from the magnetron
//! mode, whose quanta carry negative energy. `Pulse::quantum_change`
//! performs this mapping.

mod cooling;
mod fock;
mod thermometry;

pub use cooling::{
    apply_pulse, excitation_probability, heat, sideband_cool, transfer, CoolingResult, CoolingSchedule, Pulse,
};
pub use fock::FockDistribution;
pub use thermometry::{
    electric_field_noise, heating_fit, heating_rate_from_noise, sideband_ratio_thermometry, thermometry_uncertainty,
    HeatingFit, HeatingSample,
};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::modes::{ModeSet, MotionalMode};
use crate::units::HBAR;

/// Lamb-Dicke factor of one mode for a given wavevector difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambDicke {
    pub eta: f64,
    /// |Δk|, 1/m.
    pub delta_k: f64,
    /// Mode frequency, rad/s.
    pub frequency: f64,
}

/// `|Δk|` of two beams of wavelength `wavelength` crossing at `angle`.
pub fn raman_wavevector_difference(angle: f64, wavelength: f64) -> f64 {
    2.0 * (2.0 * PI / wavelength) * (0.5 * angle).sin()
}

/// `η = |Δk| x0` with `x0 = √(ħ / 2mω)` for the axial mode and
/// `x0 = √(ħ / 2m(ω+ − ω−))` for both radial modes.
///
/// The radial length is the spacing of the Penning-trap radial ladder;
/// it is a modelling choice, since the ground-state size of the two
/// circular modes is set by their splitting rather than their frequency.
pub fn lamb_dicke(delta_k: f64, mass: f64, modes: &ModeSet, which: MotionalMode) -> Result<LambDicke> {
    modes.require_stable()?;
    if !(delta_k >= 0.0 && delta_k.is_finite()) || !(mass > 0.0) {
        return Err(Error::InvalidParameter("need |Δk| ≥ 0 and mass > 0".into()));
    }
    let scale = match which {
        MotionalMode::Axial => modes.omega_z,
        MotionalMode::Plus | MotionalMode::Minus => modes.radial_splitting(),
    };
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!("mode {which} has zero frequency")));
    }
    Ok(LambDicke {
        eta: delta_k * (HBAR / (2.0 * mass * scale)).sqrt(),
        delta_k,
        frequency: which.frequency(modes),
    })
}

/// Generalized Laguerre polynomial `L^α_n(x)` by upward recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Rabi frequency of `|n⟩ → |n + s⟩`:
/// `Ω0 e^{−η²/2} η^|s| √(n<!/n>!) L^|s|_{n<}(η²)`.
///
/// Signed; zero when `n + s < 0`.
pub fn rabi_coupling(n: usize, s: i64, eta: f64, omega_0: f64) -> f64 {
    let m = n as i64 + s;
    if m < 0 {
        return 0.0;
    }
    let lo = n.min(m as usize);
    let hi = n.max(m as usize);
    let d = hi - lo;
    let mut ratio = 1.0;
    for k in lo + 1..=hi {
        ratio /= k as f64;
    }
    let x = eta * eta;
    omega_0 * (-0.5 * x).exp() * eta.powi(d as i32) * ratio.sqrt() * laguerre(lo, d as f64, x)
}

/// Duration of a π pulse on `|n⟩ → |n + s⟩`; infinite for a vanishing
/// coupling.
pub fn pi_time(n: usize, s: i64, eta: f64, omega_0: f64) -> f64 {
    let w = rabi_coupling(n, s, eta, omega_0).abs();
    if w > 0.0 {
        PI / w
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laguerre_low_orders() {
        let x = 0.37;
        assert!((laguerre(2, 1.0, x) - (3.0 - 3.0 * x + 0.5 * x * x)).abs() < 1e-14);
        assert!((laguerre(3, 0.0, x) - (1.0 - 3.0 * x + 1.5 * x * x - x.powi(3) / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn below_ground_state_is_uncoupled() {
        assert_eq!(rabi_coupling(0, -1, 0.4, 1.0), 0.0);
        assert_eq!(rabi_coupling(2, -3, 0.4, 1.0), 0.0);
        assert_eq!(pi_time(1, -3, 0.4, 1.0), f64::INFINITY);
    }
}
