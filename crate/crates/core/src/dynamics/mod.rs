//! Classical single-ion dynamics in the static trap field plus a uniform
//! magnetic field along +z.

mod axialization;
mod doppler;
mod transport;

pub use axialization::{axialization_exchange, AxializationDrive, DrivenField, ExchangeSeries};
pub use doppler::{doppler_cool, CoolingLaser, DopplerOptions, DopplerResult};
pub use transport::{
    make_transport_waveform, transport_energy_gain, Interpolation, Profile, RasterSchedule, RasterSegment,
    SegmentKind, TransportRequest, TransportWaveform, WaveformField,
};

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{find_null, Field, QuadrupoleField};
use crate::modes::{ModeAmplitudes, ModeSet, TrapParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub time: f64,
}

impl IonState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self {
            position,
            velocity,
            time: 0.0,
        }
    }

    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self::new(position, Vector3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite()) && self.time.is_finite()
    }
}

/// Electric field that may depend on time.
pub trait TimeField: Send + Sync {
    fn electric_field(&self, p: &Vector3<f64>, t: f64) -> Result<Vector3<f64>>;
}

/// Adapts a static potential to [`TimeField`].
#[derive(Debug, Clone)]
pub struct Static<F>(pub F);

impl<F: Field> TimeField for Static<F> {
    fn electric_field(&self, p: &Vector3<f64>, _t: f64) -> Result<Vector3<f64>> {
        Ok(-self.0.gradient(p)?)
    }
}

/// No electric field at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoField;

impl TimeField for NoField {
    fn electric_field(&self, _p: &Vector3<f64>, _t: f64) -> Result<Vector3<f64>> {
        Ok(Vector3::zeros())
    }
}

/// Symmetric splitting integrator: half drift, half electric kick, exact
/// magnetic rotation, half kick, half drift. Second order, one field
/// evaluation per step.
///
/// The kick components across the field are scaled by `tan(θ/2)/(θ/2)`
/// (θ = ωc dt), which makes the E×B drift in a uniform field exact while
/// the gyration stays exact too.
pub struct Integrator<'a, T: TimeField + ?Sized> {
    field: &'a T,
    q_over_m: f64,
    dt: f64,
    cos: f64,
    sin: f64,
    drift_factor: f64,
}

impl<'a, T: TimeField + ?Sized> Integrator<'a, T> {
    /// Fails if `dt` does not resolve the cyclotron motion
    /// (`dt > 2π / (20 ωc)`).
    pub fn new(field: &'a T, params: &TrapParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let omega_c = params.charge * params.b_field / params.mass;
        if omega_c > 0.0 && dt > 2.0 * PI / (20.0 * omega_c) {
            return Err(Error::InvalidParameter(format!(
                "time step {dt:e} s does not resolve the cyclotron period {:e} s",
                2.0 * PI / omega_c
            )));
        }
        let theta = omega_c * dt;
        let drift_factor = if theta > 0.0 {
            (0.5 * theta).tan() / (0.5 * theta)
        } else {
            1.0
        };
        Ok(Self {
            field,
            q_over_m: params.charge / params.mass,
            dt,
            cos: theta.cos(),
            sin: theta.sin(),
            drift_factor,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, s: &mut IonState) -> Result<()> {
        let h = 0.5 * self.dt;
        let mid = s.position + s.velocity * h;
        let tm = s.time + h;
        let e = self.field.electric_field(&mid, tm).map_err(|err| match err {
            Error::BelowPlane(_) => Error::Diverged {
                time: tm,
                reason: "ion reached the electrode plane".into(),
            },
            other => other,
        })?;
        let mut kick = e * (self.q_over_m * h);
        kick.x *= self.drift_factor;
        kick.y *= self.drift_factor;
        let v = s.velocity + kick;
        // v × B with B along +z turns (vx, vy) clockwise
        let rotated = Vector3::new(
            v.x * self.cos + v.y * self.sin,
            -v.x * self.sin + v.y * self.cos,
            v.z,
        );
        s.velocity = rotated + kick;
        s.position = mid + s.velocity * h;
        s.time += self.dt;
        if !s.is_finite() {
            return Err(Error::Diverged {
                time: s.time,
                reason: "non-finite position or velocity".into(),
            });
        }
        Ok(())
    }

    /// Advances `steps` steps, calling `observe` every `every` steps
    /// (and never on the initial state).
    pub fn run(
        &self,
        state: &mut IonState,
        steps: usize,
        every: usize,
        mut observe: impl FnMut(&IonState),
    ) -> Result<()> {
        let every = every.max(1);
        for k in 1..=steps {
            self.step(state)?;
            if k % every == 0 {
                observe(state);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    /// Upper bound on the step; the actual step divides `duration` evenly.
    pub dt: f64,
    pub duration: f64,
    /// Keep every n-th state.
    pub sample_every: usize,
}

/// Number of steps and the evenly dividing step for a requested duration.
pub fn step_plan(dt: f64, duration: f64) -> Result<(usize, f64)> {
    if !(duration >= 0.0 && duration.is_finite()) || !(dt > 0.0) {
        return Err(Error::InvalidParameter("duration must be ≥ 0 and dt > 0".into()));
    }
    if duration == 0.0 {
        return Ok((0, dt));
    }
    let n = (duration / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((n, duration / n as f64))
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<IonState>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&IonState> {
        self.states.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y,z,vx,vy,vz")?;
        for s in &self.states {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.time, s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z
            )?;
        }
        Ok(())
    }
}

/// Integrates from `state` for `opts.duration`, recording the initial
/// state and every `sample_every`-th step.
pub fn integrate<T: TimeField + ?Sized>(
    state: IonState,
    field: &T,
    params: &TrapParams,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let (steps, dt) = step_plan(opts.dt, opts.duration)?;
    let integ = Integrator::new(field, params, dt)?;
    let mut states = Vec::with_capacity(steps / opts.sample_every.max(1) + 2);
    states.push(state);
    let mut s = state;
    integ.run(&mut s, steps, opts.sample_every, |st| states.push(*st))?;
    if states.last().map(|l| l.time) != Some(s.time) {
        states.push(s);
    }
    Ok(Trajectory { states })
}

/// A static trap: potential, particle parameters, the null and the modes of
/// the local quadratic expansion there.
#[derive(Debug, Clone)]
pub struct Trap<F> {
    pub field: F,
    pub params: TrapParams,
    pub center: Vector3<f64>,
    pub modes: ModeSet,
}

impl Trap<QuadrupoleField> {
    /// Ideal radially symmetric Penning quadrupole centred at `center`.
    pub fn quadrupole(params: TrapParams, center: Vector3<f64>, omega_z: f64) -> Result<Self> {
        let modes = ModeSet::new(&params, omega_z)?;
        modes.require_stable()?;
        let field = QuadrupoleField::penning(center, params.axial_curvature(omega_z));
        Ok(Self {
            field,
            params,
            center,
            modes,
        })
    }
}

impl<F: Field> Trap<F> {
    /// Locates the null near `guess` and derives the modes from the local
    /// curvature.
    pub fn from_field(field: F, params: TrapParams, guess: Vector3<f64>) -> Result<Self> {
        let center = find_null(&field, guess)?;
        let hessian = field.sample(&center)?.hessian;
        let modes = ModeSet::from_hessian(&params, &hessian)?;
        modes.require_stable()?;
        Ok(Self {
            field,
            params,
            center,
            modes,
        })
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, s: &IonState) -> Result<f64> {
        let v = self.field.sample(&s.position)?.potential;
        Ok(0.5 * self.params.mass * s.velocity.norm_squared() + self.params.charge * v)
    }

    pub fn actions(&self, s: &IonState) -> Result<ModeAmplitudes> {
        mode_actions(s, &self.modes, &self.center, self.params.mass)
    }

    pub fn hessian(&self) -> Result<Matrix3<f64>> {
        Ok(self.field.sample(&self.center)?.hessian)
    }
}

/// Decomposes a state near `center` into the three eigenmodes. Phases refer
/// to t = 0, so that [`crate::modes::epicycle_state`] evaluated at
/// `state.time` reproduces the state.
pub fn mode_actions(state: &IonState, modes: &ModeSet, center: &Vector3<f64>, mass: f64) -> Result<ModeAmplitudes> {
    modes.require_stable()?;
    let d = state.position - center;
    let v = state.velocity;
    let (wp, wm, wz) = (modes.omega_plus, modes.omega_minus, modes.omega_z);
    let split = wp - wm;
    let u = Complex64::new(d.x, d.y);
    let du = Complex64::new(v.x, v.y);
    let i = Complex64::i();
    let ap = (i * du - u * wm) / split * Complex64::from_polar(1.0, wp * state.time);
    let am = (u * wp - i * du) / split * Complex64::from_polar(1.0, wm * state.time);
    let half = 0.5 * mass * split;
    let j_z = 0.5 * mass * (v.z * v.z + wz * wz * d.z * d.z) / wz;
    let phase_z = (-v.z / wz).atan2(d.z) - wz * state.time;
    Ok(ModeAmplitudes {
        j_plus: half * ap.norm_sqr(),
        j_minus: half * am.norm_sqr(),
        j_z,
        phase_plus: wrap(-ap.arg()),
        phase_minus: wrap(-am.arg()),
        phase_z: wrap(phase_z),
    })
}

fn wrap(phi: f64) -> f64 {
    phi.rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::epicycle_state;
    use crate::units::{hz, Species};

    fn params() -> TrapParams {
        TrapParams::new(3.0, Species::beryllium9()).unwrap()
    }

    #[test]
    fn rejects_coarse_steps() {
        let p = params();
        let wc = p.charge * p.b_field / p.mass;
        assert!(Integrator::new(&NoField, &p, 2.0 * PI / (10.0 * wc)).is_err());
        assert!(Integrator::new(&NoField, &p, 2.0 * PI / (25.0 * wc)).is_ok());
    }

    #[test]
    fn straight_line_without_fields() {
        let p = TrapParams::new(0.0, Species::beryllium9()).unwrap();
        let s0 = IonState::new(Vector3::new(1e-6, 2e-6, 3e-6), Vector3::new(1.0, -2.0, 0.5));
        let opts = IntegrateOptions { dt: 1e-9, duration: 1e-6, sample_every: 100 };
        let tr = integrate(s0, &NoField, &p, &opts).unwrap();
        let last = tr.last().unwrap();
        let want = s0.position + s0.velocity * 1e-6;
        assert!((last.position - want).norm() < 1e-15);
        assert_eq!(last.velocity, s0.velocity);
    }

    #[test]
    fn mode_actions_round_trip() {
        let p = params();
        let modes = ModeSet::new(&p, hz(2.5e6)).unwrap();
        let amps = ModeAmplitudes {
            j_plus: 3.0e-33,
            j_minus: 7.0e-33,
            j_z: 5.0e-33,
            phase_plus: 0.3,
            phase_minus: 4.0,
            phase_z: 2.2,
        };
        let c = Vector3::new(1e-6, 152e-6, -3e-6);
        for t in [0.0, 1.3e-7, 4.1e-6] {
            let (x, v) = epicycle_state(&modes, &amps, p.mass, t);
            let s = IonState { position: x + c, velocity: v, time: t };
            let back = mode_actions(&s, &modes, &c, p.mass).unwrap();
            for (a, b) in [(back.j_plus, amps.j_plus), (back.j_minus, amps.j_minus), (back.j_z, amps.j_z)] {
                assert!((a / b - 1.0).abs() < 1e-9);
            }
            for (a, b) in [
                (back.phase_plus, amps.phase_plus),
                (back.phase_minus, amps.phase_minus),
                (back.phase_z, amps.phase_z),
            ] {
                let d = (a - b).rem_euclid(2.0 * PI);
                assert!(d.min(2.0 * PI - d) < 1e-7, "{a} {b}");
            }
        }
        let rest = mode_actions(&IonState::at_rest(c), &modes, &c, p.mass).unwrap();
        assert_eq!(rest.quanta(), [0.0; 3]);
    }

    #[test]
    fn unstable_modes_are_rejected() {
        let modes = ModeSet {
            omega_z: 3.0,
            omega_plus: 1.0,
            omega_minus: 1.0,
            omega_c: 2.0,
        };
        assert!(mode_actions(&IonState::at_rest(Vector3::zeros()), &modes, &Vector3::zeros(), 1.0).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        struct Blowup;
        impl TimeField for Blowup {
            fn electric_field(&self, _p: &Vector3<f64>, _t: f64) -> Result<Vector3<f64>> {
                Ok(Vector3::new(f64::NAN, 0.0, 0.0))
            }
        }
        let opts = IntegrateOptions { dt: 1e-9, duration: 1e-8, sample_every: 1 };
        let r = integrate(IonState::at_rest(Vector3::zeros()), &Blowup, &params(), &opts);
        assert!(matches!(r, Err(Error::Diverged { .. })));
    }
}
