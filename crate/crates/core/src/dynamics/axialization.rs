use nalgebra::Vector3;

use super::{step_plan, IonState, Integrator, TimeField, Trajectory, Trap};
use crate::error::{Error, Result};
use crate::geometry::{ElectrodeField, ElectrodeGeometry, Field, VoltageSet};
use crate::modes::ModeAmplitudes;

/// Weak rf quadrupole applied through the rf-capable electrodes,
/// `V_j(t) = amplitude · pattern_j · cos(frequency·t + phase)`.
#[derive(Debug, Clone)]
pub struct AxializationDrive {
    /// Peak voltage, V.
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
    pub phase: f64,
    /// Relative electrode weights.
    pub pattern: VoltageSet,
}

impl AxializationDrive {
    pub fn new(amplitude: f64, frequency: f64, phase: f64, pattern: VoltageSet) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("drive amplitude must be ≥ 0, got {amplitude}")));
        }
        if !(frequency >= 0.0 && frequency.is_finite()) {
            return Err(Error::InvalidParameter(format!("drive frequency must be ≥ 0, got {frequency}")));
        }
        Ok(Self {
            amplitude,
            frequency,
            phase,
            pattern,
        })
    }

    /// In-phase drive on the two outermost middle electrodes, whose rf
    /// null sits at the default trap height.
    pub fn outer_pair(amplitude: f64, frequency: f64) -> Result<Self> {
        Self::new(amplitude, frequency, 0.0, VoltageSet::new().with("mid1", 1.0).with("mid7", 1.0))
    }

    pub fn validate(&self, geom: &ElectrodeGeometry) -> Result<()> {
        for (label, &w) in &self.pattern.values {
            let e = &geom.electrodes()[geom.index_of(label)?];
            if w != 0.0 && !e.rf_capable {
                return Err(Error::InvalidParameter(format!("electrode {label} cannot carry rf")));
            }
        }
        Ok(())
    }

    /// Magnetron/cyclotron exchange rate `g` of the rotating-wave two-mode
    /// model, so that a resonant drive swaps the actions in `π / (2g)`.
    ///
    /// With the pattern's curvature `H` at the trap centre the resonant part
    /// of the drive is `½ q A Re[(H_xx − H_yy)/2 − i H_xy) u²] cos(ωc t)`,
    /// which gives `g = q A |c| / (2 m (ω+ − ω−))`.
    pub fn coupling_rate<F: Field>(&self, geom: &ElectrodeGeometry, trap: &Trap<F>) -> Result<f64> {
        let h = ElectrodeField::new(geom, &self.pattern)?.sample(&trap.center)?.hessian;
        let c = ((0.5 * (h[(0, 0)] - h[(1, 1)])).powi(2) + h[(0, 1)].powi(2)).sqrt();
        Ok(trap.params.charge * self.amplitude * c / (2.0 * trap.params.mass * trap.modes.radial_splitting()))
    }
}

/// Static trap field plus an axialization drive.
#[derive(Debug, Clone)]
pub struct DrivenField<F> {
    dc: F,
    rf: ElectrodeField,
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

impl<F: Field> DrivenField<F> {
    pub fn new(geom: &ElectrodeGeometry, dc: F, drive: &AxializationDrive) -> Result<Self> {
        drive.validate(geom)?;
        Ok(Self {
            dc,
            rf: ElectrodeField::new(geom, &drive.pattern)?,
            amplitude: drive.amplitude,
            frequency: drive.frequency,
            phase: drive.phase,
        })
    }
}

impl<F: Field> TimeField for DrivenField<F> {
    fn electric_field(&self, p: &Vector3<f64>, t: f64) -> Result<Vector3<f64>> {
        let mut g = self.dc.gradient(p)?;
        if self.amplitude != 0.0 {
            g += self.rf.gradient(p)? * (self.amplitude * (self.frequency * t + self.phase).cos());
        }
        Ok(-g)
    }
}

/// Actions sampled along a driven trajectory.
#[derive(Debug, Clone)]
pub struct ExchangeSeries {
    pub times: Vec<f64>,
    pub actions: Vec<ModeAmplitudes>,
    pub trajectory: Trajectory,
}

impl ExchangeSeries {
    /// `J+ / (J+ + J−)` at each sample.
    pub fn cyclotron_fraction(&self) -> Vec<f64> {
        self.actions
            .iter()
            .map(|a| {
                let total = a.j_plus + a.j_minus;
                if total > 0.0 {
                    a.j_plus / total
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Largest cyclotron fraction and the time it occurs, refined by a
    /// parabola through the neighbouring samples.
    pub fn peak_transfer(&self) -> Option<(f64, f64)> {
        let f = self.cyclotron_fraction();
        let (k, _) = f.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        if k == 0 || k + 1 >= f.len() {
            return Some((self.times[k], f[k]));
        }
        let (a, b, c) = (f[k - 1], f[k], f[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom >= 0.0 {
            return Some((self.times[k], b));
        }
        let off = 0.5 * (a - c) / denom;
        let dt = self.times[k + 1] - self.times[k];
        Some((self.times[k] + off * dt, b - 0.25 * (a - c) * off))
    }
}

/// Integrates the driven motion and records the mode actions (relative to
/// the static trap's modes) every `sample_every` steps.
pub fn axialization_exchange<F: Field + Clone>(
    trap: &Trap<F>,
    geom: &ElectrodeGeometry,
    state: IonState,
    drive: &AxializationDrive,
    duration: f64,
    dt: f64,
    sample_every: usize,
) -> Result<ExchangeSeries> {
    let field = DrivenField::new(geom, trap.field.clone(), drive)?;
    let (steps, dt) = step_plan(dt, duration)?;
    let integ = Integrator::new(&field, &trap.params, dt)?;
    let mut states = vec![state];
    let mut s = state;
    integ.run(&mut s, steps, sample_every, |st| states.push(*st))?;
    let actions = states.iter().map(|st| trap.actions(st)).collect::<Result<Vec<_>>>()?;
    Ok(ExchangeSeries {
        times: states.iter().map(|st| st.time).collect(),
        actions,
        trajectory: Trajectory { states },
    })
}
