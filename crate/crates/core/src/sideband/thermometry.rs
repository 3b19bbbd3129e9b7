use crate::error::{Error, Result};
use crate::units::HBAR;

/// Thermal occupation from the sideband-ratio method.
///
/// `p_lowering` is the excitation on the sideband that removes a quantum,
/// `p_raising` the one that adds a quantum (blue and red respectively for a
/// positive-energy mode with the qubit prepared in its upper level). For a
/// thermal state their ratio is `r = n̄ / (n̄ + 1)` regardless of the probe
/// duration, so `n̄ = r / (1 − r)`.
pub fn sideband_ratio_thermometry(p_lowering: f64, p_raising: f64) -> Result<f64> {
    for p in [p_lowering, p_raising] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("population {p} outside [0, 1]")));
        }
    }
    if p_raising == 0.0 {
        return Err(Error::RatioNotThermal(if p_lowering == 0.0 { f64::NAN } else { f64::INFINITY }));
    }
    let r = p_lowering / p_raising;
    if r >= 1.0 {
        return Err(Error::RatioNotThermal(r));
    }
    Ok(r / (1.0 - r))
}

/// `n̄` and its standard error when each population is estimated from
/// `shots` projective measurements. The binomial variance is floored at
/// `1/shots` so that a zero count still carries an uncertainty.
pub fn thermometry_uncertainty(p_lowering: f64, p_raising: f64, shots: u64) -> Result<(f64, f64)> {
    let n_bar = sideband_ratio_thermometry(p_lowering, p_raising)?;
    if shots == 0 {
        return Err(Error::InvalidParameter("need at least one shot".into()));
    }
    let n = shots as f64;
    let var = |p: f64| (p * (1.0 - p)).max(1.0 / n) / n;
    let r = p_lowering / p_raising;
    let var_r = (var(p_lowering) + r * r * var(p_raising)) / (p_raising * p_raising);
    Ok((n_bar, var_r.sqrt() / (1.0 - r).powi(2)))
}

/// One heating-rate data point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingSample {
    /// Wait time, s.
    pub t_wait: f64,
    pub n_bar: f64,
    /// Standard error of `n_bar`; zero or negative for unknown.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingFit {
    /// quanta/s
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    pub chi2: f64,
    pub dof: usize,
    /// False when some σ was missing and the errors come from the scatter.
    pub weighted: bool,
}

/// Straight-line fit `n̄ = intercept + slope · t`. With all σ given the
/// fit is weighted by `1/σ²` and the quoted errors are those of the
/// weights; otherwise it is unweighted and the errors are scaled by the
/// residual variance.
pub fn heating_fit(samples: &[HeatingSample]) -> Result<HeatingFit> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", samples.len())));
    }
    if samples.iter().any(|s| !(s.t_wait.is_finite() && s.n_bar.is_finite())) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let weighted = samples.iter().all(|s| s.sigma > 0.0);
    let w = |s: &HeatingSample| if weighted { 1.0 / (s.sigma * s.sigma) } else { 1.0 };
    let (mut sw, mut st, mut sn) = (0.0, 0.0, 0.0);
    for s in samples {
        sw += w(s);
        st += w(s) * s.t_wait;
        sn += w(s) * s.n_bar;
    }
    let (t0, n0) = (st / sw, sn / sw);
    let (mut stt, mut stn) = (0.0, 0.0);
    for s in samples {
        stt += w(s) * (s.t_wait - t0).powi(2);
        stn += w(s) * (s.t_wait - t0) * (s.n_bar - n0);
    }
    let scale = t0.abs().max(samples.iter().map(|s| (s.t_wait - t0).abs()).fold(0.0, f64::max));
    if !(stt > 1e-24 * sw * scale * scale) || scale == 0.0 {
        return Err(Error::Fit("all wait times coincide".into()));
    }
    let slope = stn / stt;
    let intercept = n0 - slope * t0;
    let chi2: f64 = samples
        .iter()
        .map(|s| w(s) * (s.n_bar - intercept - slope * s.t_wait).powi(2))
        .sum();
    let dof = samples.len() - 2;
    let s2 = if weighted { 1.0 } else { chi2 / dof as f64 };
    let var_slope = s2 / stt;
    let var_intercept = s2 * (1.0 / sw + t0 * t0 / stt);
    Ok(HeatingFit {
        slope,
        intercept,
        slope_err: var_slope.sqrt(),
        intercept_err: var_intercept.sqrt(),
        chi2,
        dof,
        weighted,
    })
}

/// Electric-field noise spectral density seen by a mode heating at `n_dot`
/// quanta/s: `S_E = 4 ħ m ω ṅ / q²`, in V² m⁻² Hz⁻¹.
pub fn electric_field_noise(n_dot: f64, omega: f64, mass: f64, charge: f64) -> f64 {
    4.0 * HBAR * mass * omega * n_dot / (charge * charge)
}

/// Inverse of [`electric_field_noise`].
pub fn heating_rate_from_noise(s_e: f64, omega: f64, mass: f64, charge: f64) -> f64 {
    s_e * charge * charge / (4.0 * HBAR * mass * omega)
}
