//! Penning-trap eigenmodes of a single ion in a radially symmetric quadrupole
//! and uniform magnetic field along `+z`.
//!
//! Internally every frequency is an angular frequency in rad/s.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::{Species, HBAR};

/// Magnetic field and ion species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapParams {
    /// Tesla, along `+z`.
    pub b_field: f64,
    pub mass: f64,
    pub charge: f64,
}

impl TrapParams {
    pub fn new(b_field: f64, species: Species) -> Result<Self> {
        if !(species.mass > 0.0 && species.charge > 0.0 && b_field >= 0.0) {
            return Err(Error::InvalidParameter(
                "mass and charge must be positive and B non-negative".into(),
            ));
        }
        Ok(Self {
            b_field,
            mass: species.mass,
            charge: species.charge,
        })
    }

    pub fn species(&self) -> Species {
        Species {
            mass: self.mass,
            charge: self.charge,
        }
    }

    /// Axial curvature `∂²V/∂z²` that produces `omega_z`.
    pub fn axial_curvature(&self, omega_z: f64) -> f64 {
        self.mass * omega_z * omega_z / self.charge
    }
}

/// `ωc = qB/m`.
pub fn cyclotron_frequency(p: &TrapParams) -> f64 {
    p.charge * p.b_field / p.mass
}

/// `ωc / √2`, the largest stable axial frequency.
pub fn stability_limit(omega_c: f64) -> f64 {
    omega_c / SQRT_2
}

/// Modified-cyclotron and magnetron frequencies `ωc/2 ± Ω`,
/// `Ω = √(ωc² − 2ωz²) / 2`.
pub fn radial_frequencies(omega_z: f64, omega_c: f64) -> Result<(f64, f64)> {
    let limit = stability_limit(omega_c);
    if !(omega_z >= 0.0) || omega_z > limit * (1.0 + 1e-15) {
        return Err(Error::Unstable { omega_z, limit });
    }
    let disc = (omega_c * omega_c - 2.0 * omega_z * omega_z).max(0.0);
    let big_omega = 0.5 * disc.sqrt();
    let omega_plus = 0.5 * omega_c + big_omega;
    if omega_plus == 0.0 {
        return Ok((0.0, 0.0));
    }
    // ω+ ω− = ωz²/2 avoids cancellation in ωc/2 − Ω
    let omega_minus = omega_z * omega_z / (2.0 * omega_plus);
    Ok((omega_plus, omega_minus))
}

/// The three eigenfrequencies and the bare cyclotron frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSet {
    pub omega_z: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_c: f64,
}

impl ModeSet {
    pub fn new(params: &TrapParams, omega_z: f64) -> Result<Self> {
        Self::from_frequencies(omega_z, cyclotron_frequency(params))
    }

    pub fn from_frequencies(omega_z: f64, omega_c: f64) -> Result<Self> {
        let (omega_plus, omega_minus) = radial_frequencies(omega_z, omega_c)?;
        Ok(Self {
            omega_z,
            omega_plus,
            omega_minus,
            omega_c,
        })
    }

    /// Modes of a potential with curvature `hessian`, using its axial
    /// element `∂²V/∂z²`. Radial asymmetry is ignored.
    pub fn from_hessian(params: &TrapParams, hessian: &Matrix3<f64>) -> Result<Self> {
        let hzz = hessian[(2, 2)];
        if hzz <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "no axial confinement (H_zz = {hzz:.3e} V/m²)"
            )));
        }
        Self::new(params, (params.charge * hzz / params.mass).sqrt())
    }

    pub fn is_stable(&self) -> bool {
        self.omega_minus > 0.0 && self.omega_plus > self.omega_minus
    }

    /// `ω+ − ω−`, the radial level splitting scale.
    pub fn radial_splitting(&self) -> f64 {
        self.omega_plus - self.omega_minus
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable {
                omega_z: self.omega_z,
                limit: stability_limit(self.omega_c),
            })
        }
    }
}

/// One of the three eigenmodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionalMode {
    Plus,
    Minus,
    Axial,
}

impl MotionalMode {
    pub const ALL: [MotionalMode; 3] = [MotionalMode::Plus, MotionalMode::Minus, MotionalMode::Axial];

    /// Position in (+, −, z) ordered arrays.
    pub fn index(self) -> usize {
        match self {
            MotionalMode::Plus => 0,
            MotionalMode::Minus => 1,
            MotionalMode::Axial => 2,
        }
    }

    /// The magnetron mode loses energy as its quantum number grows.
    pub fn positive_energy(self) -> bool {
        self != MotionalMode::Minus
    }

    pub fn frequency(self, modes: &ModeSet) -> f64 {
        match self {
            MotionalMode::Plus => modes.omega_plus,
            MotionalMode::Minus => modes.omega_minus,
            MotionalMode::Axial => modes.omega_z,
        }
    }
}

impl std::str::FromStr for MotionalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus" | "+" | "cyclotron" | "modified-cyclotron" => Ok(MotionalMode::Plus),
            "minus" | "-" | "magnetron" => Ok(MotionalMode::Minus),
            "z" | "axial" => Ok(MotionalMode::Axial),
            other => Err(Error::Parse(format!("unknown mode `{other}` (expected plus, minus or axial)"))),
        }
    }
}

impl std::fmt::Display for MotionalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MotionalMode::Plus => "plus",
            MotionalMode::Minus => "minus",
            MotionalMode::Axial => "axial",
        })
    }
}

/// Actions (J·s) and phases of the three eigenmodes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeAmplitudes {
    pub j_plus: f64,
    pub j_minus: f64,
    pub j_z: f64,
    pub phase_plus: f64,
    pub phase_minus: f64,
    pub phase_z: f64,
}

impl ModeAmplitudes {
    pub fn from_quanta(n_plus: f64, n_minus: f64, n_z: f64) -> Self {
        Self {
            j_plus: n_plus * HBAR,
            j_minus: n_minus * HBAR,
            j_z: n_z * HBAR,
            ..Default::default()
        }
    }

    /// Actions in units of ħ, ordered (+, −, z).
    pub fn quanta(&self) -> [f64; 3] {
        [self.j_plus / HBAR, self.j_minus / HBAR, self.j_z / HBAR]
    }
}

/// `E = ω+ J+ − ω− J− + ωz Jz`; the magnetron mode carries negative energy.
pub fn total_energy(modes: &ModeSet, amps: &ModeAmplitudes) -> f64 {
    modes.omega_plus * amps.j_plus - modes.omega_minus * amps.j_minus + modes.omega_z * amps.j_z
}

/// Complex radial amplitudes `(A+, A−)` at time zero, with
/// `x + iy = A+ e^{−iω+t} + A− e^{−iω−t}`.
pub(crate) fn radial_amplitudes(modes: &ModeSet, amps: &ModeAmplitudes, mass: f64) -> (Complex64, Complex64) {
    let k = 2.0 / (mass * modes.radial_splitting());
    let r_plus = (amps.j_plus * k).sqrt();
    let r_minus = (amps.j_minus * k).sqrt();
    (
        Complex64::from_polar(r_plus, -amps.phase_plus),
        Complex64::from_polar(r_minus, -amps.phase_minus),
    )
}

/// Position and velocity on the analytic epicycle, relative to the trap
/// centre.
pub fn epicycle_state(
    modes: &ModeSet,
    amps: &ModeAmplitudes,
    mass: f64,
    t: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let (ap, am) = radial_amplitudes(modes, amps, mass);
    let rot_p = Complex64::from_polar(1.0, -modes.omega_plus * t);
    let rot_m = Complex64::from_polar(1.0, -modes.omega_minus * t);
    let u = ap * rot_p + am * rot_m;
    let du = -Complex64::i() * (ap * rot_p * modes.omega_plus + am * rot_m * modes.omega_minus);
    let az = if modes.omega_z > 0.0 {
        (2.0 * amps.j_z / (mass * modes.omega_z)).sqrt()
    } else {
        0.0
    };
    let arg = modes.omega_z * t + amps.phase_z;
    (
        Vector3::new(u.re, u.im, az * arg.cos()),
        Vector3::new(du.re, du.im, -az * modes.omega_z * arg.sin()),
    )
}

/// Position on the analytic epicycle: two circular radial modes plus the
/// axial oscillation.
pub fn epicycle_trajectory(modes: &ModeSet, amps: &ModeAmplitudes, mass: f64, t: f64) -> Vector3<f64> {
    epicycle_state(modes, amps, mass, t).0
}
