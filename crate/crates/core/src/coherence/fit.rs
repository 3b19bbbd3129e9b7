use std::fmt;
use std::str::FromStr;

use super::{coherence_time, CoherenceCurve, NoiseModel, SequenceFamily};
use crate::error::{Error, Result};
use crate::lm::levenberg_marquardt;

/// Empirical decay shape `A exp(−(t/τ)^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// k = 2
    Gaussian,
    /// k = 1
    Exponential,
}

impl DecayModel {
    fn power(self) -> f64 {
        match self {
            DecayModel::Gaussian => 2.0,
            DecayModel::Exponential => 1.0,
        }
    }

    pub fn eval(self, amplitude: f64, tau: f64, t: f64) -> f64 {
        amplitude * (-(t / tau).powf(self.power())).exp()
    }
}

impl FromStr for DecayModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::Parse(format!("unknown decay model `{other}`"))),
        }
    }
}

impl fmt::Display for DecayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceFit {
    pub model: DecayModel,
    /// 1/e time, s; infinite when the data do not decay.
    pub tau: f64,
    pub tau_err: f64,
    pub amplitude: f64,
    pub amplitude_err: f64,
    /// Weighted sum of squared residuals (plain sum when unweighted).
    pub residual: f64,
    pub dof: usize,
    pub non_decaying: bool,
}

/// Least-squares fit of `A exp(−(t/τ)^k)`, weighted by the curve's
/// standard errors when all of them are positive.
pub fn fit_coherence(curve: &CoherenceCurve, model: DecayModel) -> Result<CoherenceFit> {
    let n = curve.len();
    if n < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {n}")));
    }
    let weighted = curve.stderr.iter().all(|s| *s > 0.0);
    let w: Vec<f64> = curve.stderr.iter().map(|s| if weighted { 1.0 / s } else { 1.0 }).collect();
    let t_max = curve.times.iter().cloned().fold(0.0, f64::max);
    let c0 = curve.contrast[0];
    let spread = curve.contrast.iter().map(|c| (c - c0).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * c0.abs().max(1e-300) {
        return Ok(CoherenceFit {
            model,
            tau: f64::INFINITY,
            tau_err: f64::INFINITY,
            amplitude: c0,
            amplitude_err: 0.0,
            residual: 0.0,
            dof: n - 2,
            non_decaying: true,
        });
    }

    let a0 = curve.contrast.iter().cloned().fold(f64::MIN, f64::max);
    let k = model.power();
    // τ from the point closest to half decay
    let (t_ref, c_ref) = curve
        .times
        .iter()
        .zip(&curve.contrast)
        .filter(|(_, c)| **c > 0.0 && **c < a0)
        .min_by(|a, b| (a.1 / a0 - 0.5).abs().total_cmp(&(b.1 / a0 - 0.5).abs()))
        .map(|(t, c)| (*t, *c))
        .unwrap_or((t_max, 0.5 * a0));
    let tau0 = t_ref / (-(c_ref / a0).ln()).powf(1.0 / k);

    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        let tau = p[1].exp();
        Ok(curve
            .times
            .iter()
            .zip(&curve.contrast)
            .zip(&w)
            .map(|((t, c), w)| w * (model.eval(p[0], tau, *t) - c))
            .collect())
    };
    let res = levenberg_marquardt(residuals, &[a0, tau0.ln()], 500)?;
    if !res.converged {
        return Err(Error::Fit(format!(
            "{model} fit did not converge (residual {:.3e})",
            res.cost
        )));
    }
    let dof = n - 2;
    let scale = if weighted { 1.0 } else { res.cost / dof as f64 };
    let cov = res
        .covariance()
        .ok_or_else(|| Error::Fit(format!("singular {model} fit (residual {:.3e})", res.cost)))?;
    let tau = res.params[1].exp();
    let non_decaying = tau > 1e3 * t_max;
    Ok(CoherenceFit {
        model,
        tau: if non_decaying { f64::INFINITY } else { tau },
        tau_err: tau * (cov[(1, 1)] * scale).sqrt(),
        amplitude: res.params[0],
        amplitude_err: (cov[(0, 0)] * scale).sqrt(),
        residual: res.cost,
        dof,
        non_decaying,
    })
}

/// Power-law-with-cutoff spectrum fitted to measured 1/e times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFit {
    pub noise: NoiseModel,
    pub targets: Vec<(SequenceFamily, f64)>,
    /// Model 1/e times for each target.
    pub predicted: Vec<f64>,
    /// RMS of `ln(predicted / measured)`.
    pub log_rms: f64,
}

impl SpectrumFit {
    pub fn report(&self) -> String {
        let mut s = String::new();
        if let NoiseModel::PowerLaw {
            amplitude,
            alpha,
            low_cutoff,
            high_cutoff,
        } = &self.noise
        {
            s.push_str(&format!(
                "amplitude = {amplitude:.6e}\nalpha = {alpha:.6}\nlow_cutoff_rad_s = {low_cutoff:.6e}\nhigh_cutoff_rad_s = {high_cutoff:.6e}\n"
            ));
        }
        s.push_str(&format!("log_rms = {:.6}\n", self.log_rms));
        for ((f, m), p) in self.targets.iter().zip(&self.predicted) {
            s.push_str(&format!("{f}: measured {:.4} ms, model {:.4} ms\n", m * 1e3, p * 1e3));
        }
        s
    }
}

/// Fits the amplitude and exponent of
/// `S(ω) = A / (ω_l^α + ω^α) / (1 + (ω/ω_h)²)` with fixed cutoffs to a set
/// of measured coherence times, minimising the log error of each time.
pub fn fit_noise_spectrum(
    targets: &[(SequenceFamily, f64)],
    low_cutoff: f64,
    high_cutoff: f64,
    alpha_start: f64,
) -> Result<SpectrumFit> {
    if targets.len() < 2 {
        return Err(Error::Fit("need at least two coherence times".into()));
    }
    if targets.iter().any(|(_, t)| !(*t > 0.0)) {
        return Err(Error::Fit("coherence times must be positive".into()));
    }
    let t_max = 1e3 * targets.iter().map(|x| x.1).fold(0.0, f64::max);
    let model = |p: &[f64]| NoiseModel::PowerLaw {
        amplitude: p[0].exp(),
        alpha: p[1],
        low_cutoff,
        high_cutoff,
    };
    let predict = |noise: &NoiseModel| -> Result<Vec<f64>> {
        targets
            .iter()
            .map(|(f, _)| {
                coherence_time(noise, *f, t_max)?
                    .ok_or_else(|| Error::Fit(format!("{f} does not decay within {t_max:.3e} s")))
            })
            .collect()
    };
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        if !(p[1] >= 0.0 && p[1] < 12.0) {
            return Ok(vec![f64::NAN; targets.len()]);
        }
        let tau = predict(&model(p))?;
        Ok(tau.iter().zip(targets).map(|(t, (_, m))| (t / m).ln()).collect())
    };

    // amplitude that puts the first target right for the starting exponent
    let (f0, m0) = targets[0];
    let unit = model(&[0.0, alpha_start]);
    let chi_unit = super::decay_exponent(&unit, &f0.at(m0)?)?;
    if !(chi_unit > 0.0) {
        return Err(Error::Fit("starting spectrum produces no dephasing".into()));
    }
    let start = [-(chi_unit.ln()), alpha_start];
    let res = levenberg_marquardt(residuals, &start, 100)?;
    let noise = model(&res.params);
    let predicted = predict(&noise)?;
    Ok(SpectrumFit {
        noise,
        targets: targets.to_vec(),
        predicted,
        log_rms: (res.cost / targets.len() as f64).sqrt(),
    })
}
