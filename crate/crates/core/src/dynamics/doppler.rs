use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, UnitSphere};
use rayon::prelude::*;

use super::{step_plan, AxializationDrive, DrivenField, IonState, Integrator, Static, TimeField, Trap};
use crate::error::{Error, Result};
use crate::geometry::{ElectrodeGeometry, Field};
use crate::modes::{epicycle_state, ModeAmplitudes};
use crate::units::{BEAM_WAVELENGTH, CYCLING_LINEWIDTH, HBAR};

/// Two-level cooling beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingLaser {
    /// Unit propagation direction.
    pub direction: Vector3<f64>,
    pub wavelength: f64,
    /// Laser minus atomic frequency, rad/s.
    pub detuning: f64,
    pub saturation: f64,
    /// Transition linewidth Γ, rad/s.
    pub linewidth: f64,
}

impl CoolingLaser {
    /// `direction` is normalised.
    pub fn new(direction: Vector3<f64>, wavelength: f64, detuning: f64, saturation: f64, linewidth: f64) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter("laser direction must be a non-zero vector".into()));
        }
        if !(saturation >= 0.0 && saturation.is_finite()) {
            return Err(Error::InvalidParameter(format!("saturation must be ≥ 0, got {saturation}")));
        }
        if !(wavelength > 0.0 && linewidth > 0.0) {
            return Err(Error::InvalidParameter("wavelength and linewidth must be positive".into()));
        }
        Ok(Self {
            direction: direction / n,
            wavelength,
            detuning,
            saturation,
            linewidth,
        })
    }

    /// 313 nm beam in the x–z plane at `angle` to the magnetic field, on the
    /// standard cycling linewidth.
    pub fn at_angle(angle: f64, detuning: f64, saturation: f64) -> Result<Self> {
        Self::new(
            Vector3::new(angle.sin(), 0.0, angle.cos()),
            BEAM_WAVELENGTH,
            detuning,
            saturation,
            CYCLING_LINEWIDTH,
        )
    }

    pub fn wavevector(&self) -> Vector3<f64> {
        self.direction * (2.0 * PI / self.wavelength)
    }

    pub fn recoil_velocity(&self, mass: f64) -> f64 {
        HBAR * 2.0 * PI / (self.wavelength * mass)
    }

    /// Photon scattering rate for an ion moving at `v`:
    /// `(Γ/2) s / (1 + s + (2 (Δ − k·v) / Γ)²)`.
    pub fn scattering_rate(&self, v: &Vector3<f64>) -> f64 {
        let delta = self.detuning - self.wavevector().dot(v);
        let x = 2.0 * delta / self.linewidth;
        0.5 * self.linewidth * self.saturation / (1.0 + self.saturation + x * x)
    }
}

#[derive(Debug, Clone)]
pub struct DopplerOptions {
    pub duration: f64,
    pub dt: f64,
    pub repeats: usize,
    /// Number of evenly spaced points in the returned time series
    /// (in addition to t = 0).
    pub samples: usize,
    pub seed: u64,
    /// Mean initial quanta (n+, n−, nz); each repeat draws thermal actions
    /// with these means and uniform phases.
    pub initial_quanta: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct DopplerResult {
    pub times: Vec<f64>,
    /// Ensemble-mean quanta (n+, n−, nz) at each time.
    pub mean_quanta: Vec<[f64; 3]>,
    /// Final quanta of every repeat.
    pub final_quanta: Vec<[f64; 3]>,
    /// Mean number of scattered photons per repeat.
    pub mean_photons: f64,
}

impl DopplerResult {
    pub fn initial_mean(&self) -> [f64; 3] {
        self.mean_quanta[0]
    }

    pub fn final_mean(&self) -> [f64; 3] {
        *self.mean_quanta.last().expect("at least the initial sample")
    }

    /// Standard error of the final ensemble mean.
    pub fn final_stderr(&self) -> [f64; 3] {
        let n = self.final_quanta.len() as f64;
        let mean = self.final_mean();
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let var = self.final_quanta.iter().map(|q| (q[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            *o = (var / n).sqrt();
        }
        out
    }
}

/// Semiclassical Doppler cooling: the ion follows the classical equations
/// of motion, and in each step scatters a photon with probability
/// `1 − exp(−R dt)`, receiving one recoil along the beam and one in a
/// random direction.
///
/// Repeats run in parallel; repeat `r` uses stream `r` of a ChaCha8
/// generator keyed by `opts.seed`, so results do not depend on scheduling.
pub fn doppler_cool<F: Field + Clone>(
    trap: &Trap<F>,
    laser: &CoolingLaser,
    drive: Option<(&ElectrodeGeometry, &AxializationDrive)>,
    opts: &DopplerOptions,
) -> Result<DopplerResult> {
    if opts.repeats == 0 || opts.samples == 0 {
        return Err(Error::InvalidParameter("need at least one repeat and one sample".into()));
    }
    if opts.initial_quanta.iter().any(|q| !(*q >= 0.0)) {
        return Err(Error::InvalidParameter("initial quanta must be ≥ 0".into()));
    }
    match drive {
        Some((geom, d)) => {
            let field = DrivenField::new(geom, trap.field.clone(), d)?;
            run_ensemble(trap, &field, laser, opts)
        }
        None => run_ensemble(trap, &Static(trap.field.clone()), laser, opts),
    }
}

struct Run {
    quanta: Vec<[f64; 3]>,
    photons: u64,
}

fn run_ensemble<F: Field, T: TimeField>(
    trap: &Trap<F>,
    field: &T,
    laser: &CoolingLaser,
    opts: &DopplerOptions,
) -> Result<DopplerResult> {
    let (steps, dt) = step_plan(opts.dt, opts.duration)?;
    let integ = Integrator::new(field, &trap.params, dt)?;
    let marks: Vec<usize> = (0..=opts.samples)
        .map(|k| (k as f64 * steps as f64 / opts.samples as f64).round() as usize)
        .collect();

    let runs = (0..opts.repeats)
        .into_par_iter()
        .map(|r| run_one(trap, &integ, laser, opts, &marks, r as u64))
        .collect::<Result<Vec<_>>>()?;

    let n = runs.len() as f64;
    let mean_quanta = (0..marks.len())
        .map(|k| {
            let mut m = [0.0; 3];
            for run in &runs {
                for (a, b) in m.iter_mut().zip(run.quanta[k]) {
                    *a += b / n;
                }
            }
            m
        })
        .collect();
    Ok(DopplerResult {
        times: marks.iter().map(|&k| k as f64 * dt).collect(),
        mean_quanta,
        final_quanta: runs.iter().map(|r| *r.quanta.last().unwrap()).collect(),
        mean_photons: runs.iter().map(|r| r.photons as f64).sum::<f64>() / n,
    })
}

fn run_one<F: Field, T: TimeField>(
    trap: &Trap<F>,
    integ: &Integrator<'_, T>,
    laser: &CoolingLaser,
    opts: &DopplerOptions,
    marks: &[usize],
    stream: u64,
) -> Result<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);
    let draw = |mean: f64, rng: &mut ChaCha8Rng| {
        let e: f64 = Exp1.sample(rng);
        mean * HBAR * e
    };
    let amps = ModeAmplitudes {
        j_plus: draw(opts.initial_quanta[0], &mut rng),
        j_minus: draw(opts.initial_quanta[1], &mut rng),
        j_z: draw(opts.initial_quanta[2], &mut rng),
        phase_plus: rng.random::<f64>() * 2.0 * PI,
        phase_minus: rng.random::<f64>() * 2.0 * PI,
        phase_z: rng.random::<f64>() * 2.0 * PI,
    };
    let (x, v) = epicycle_state(&trap.modes, &amps, trap.params.mass, 0.0);
    let mut s = IonState::new(trap.center + x, v);

    let recoil = laser.recoil_velocity(trap.params.mass);
    let kick = laser.direction * recoil;
    let dt = integ.dt();
    let mut quanta = Vec::with_capacity(marks.len());
    let mut photons = 0u64;
    let mut next = 0;
    let total = *marks.last().unwrap();
    for step in 0..=total {
        if step > 0 {
            integ.step(&mut s)?;
            let p = -(-laser.scattering_rate(&s.velocity) * dt).exp_m1();
            if rng.random::<f64>() < p {
                let e: [f64; 3] = UnitSphere.sample(&mut rng);
                s.velocity += kick + Vector3::from(e) * recoil;
                photons += 1;
            }
        }
        while next < marks.len() && marks[next] == step {
            quanta.push(trap.actions(&s)?.quanta());
            next += 1;
        }
    }
    Ok(Run { quanta, photons })
}
