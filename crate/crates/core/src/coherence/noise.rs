use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Relative accuracy of the spectral integrals.
const REL_TOL: f64 = 1e-6;
const MAX_PERIODS: usize = 200_000;
const MAX_DECADES: usize = 60;

/// Stationary Gaussian dephasing noise on the qubit (or mode) frequency,
/// δ(t) in rad/s. Spectra are two-sided, `S(ω) = ∫ C(τ) e^{−iωτ} dτ`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    None,
    /// Constant random offset with standard deviation `sigma`, rad/s.
    QuasiStatic { sigma: f64 },
    /// `C(τ) = σ² e^{−|τ|/τc}`.
    OrnsteinUhlenbeck { sigma: f64, correlation_time: f64 },
    /// Flat spectrum `S(ω) = density`, rad²/s.
    White { density: f64 },
    /// `S(ω) = A / (ω_l^α + |ω|^α) · 1 / (1 + (ω/ω_h)²)`: a power law that
    /// saturates below `low_cutoff` and rolls off above `high_cutoff`.
    PowerLaw {
        amplitude: f64,
        alpha: f64,
        low_cutoff: f64,
        high_cutoff: f64,
    },
    Sum(Vec<NoiseModel>),
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        match self {
            NoiseModel::None => Ok(()),
            NoiseModel::QuasiStatic { sigma } if !(*sigma >= 0.0 && sigma.is_finite()) => bad("σ must be ≥ 0"),
            NoiseModel::OrnsteinUhlenbeck { sigma, correlation_time } => {
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    bad("σ must be ≥ 0")
                } else if !(*correlation_time > 0.0 && correlation_time.is_finite()) {
                    bad("correlation time must be > 0")
                } else {
                    Ok(())
                }
            }
            NoiseModel::White { density } if !(*density >= 0.0 && density.is_finite()) => {
                bad("white-noise density must be ≥ 0")
            }
            NoiseModel::PowerLaw {
                amplitude,
                alpha,
                low_cutoff,
                high_cutoff,
            } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    bad("amplitude must be ≥ 0")
                } else if !(*alpha >= 0.0 && alpha.is_finite()) {
                    bad("α must be ≥ 0")
                } else if !(*low_cutoff >= 0.0 && low_cutoff < high_cutoff) {
                    bad("cutoffs must satisfy 0 ≤ low < high")
                } else {
                    Ok(())
                }
            }
            NoiseModel::Sum(parts) => parts.iter().try_for_each(|p| p.validate()),
            _ => Ok(()),
        }
    }

    /// Continuous part of the two-sided spectrum at `omega` (the
    /// quasi-static delta function at ω = 0 is not included).
    pub fn spectral_density(&self, omega: f64) -> f64 {
        let w = omega.abs();
        match self {
            NoiseModel::None | NoiseModel::QuasiStatic { .. } => 0.0,
            NoiseModel::OrnsteinUhlenbeck { sigma, correlation_time: tc } => {
                2.0 * sigma * sigma * tc / (1.0 + (w * tc).powi(2))
            }
            NoiseModel::White { density } => *density,
            NoiseModel::PowerLaw {
                amplitude,
                alpha,
                low_cutoff,
                high_cutoff,
            } => amplitude / (low_cutoff.powf(*alpha) + w.powf(*alpha)) / (1.0 + (w / high_cutoff).powi(2)),
            NoiseModel::Sum(parts) => parts.iter().map(|p| p.spectral_density(omega)).sum(),
        }
    }

    fn quasi_static_variance(&self) -> f64 {
        match self {
            NoiseModel::QuasiStatic { sigma } => sigma * sigma,
            NoiseModel::Sum(parts) => parts.iter().map(|p| p.quasi_static_variance()).sum(),
            _ => 0.0,
        }
    }

    fn has_spectrum(&self) -> bool {
        match self {
            NoiseModel::None | NoiseModel::QuasiStatic { .. } => false,
            NoiseModel::Sum(parts) => parts.iter().any(|p| p.has_spectrum()),
            _ => true,
        }
    }

    /// `G(τ) = (1/2π) ∫₀^∞ S(ω) (1 − cos ωτ) / ω² dω`, the building block
    /// of the filter-function integral. The quasi-static part contributes
    /// `σ²τ²/4` exactly; the continuous spectrum is integrated numerically.
    pub fn lag_integral(&self, tau: f64) -> Result<f64> {
        let tau = tau.abs();
        let mut g = 0.25 * self.quasi_static_variance() * tau * tau;
        if tau > 0.0 && self.has_spectrum() {
            g += tau / (2.0 * PI) * scaled_integral(|x| self.spectral_density(x / tau))?;
        }
        Ok(g)
    }
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    quadrature::integrate(f, a, b, abs_tol).integral
}

/// `∫₀^∞ s(x) (1 − cos x) / x² dx` for a non-negative, non-increasing-ish
/// spectrum `s`, on log-spaced panels below 2π, one panel per period
/// above, and a non-oscillating tail.
fn scaled_integral<S: Fn(f64) -> f64>(s: S) -> Result<f64> {
    let kernel = |x: f64| {
        let h = (0.5 * x).sin();
        s(x) * 2.0 * h * h / (x * x)
    };
    let two_pi = 2.0 * PI;
    let rough = panel(&kernel, 0.2 * PI, two_pi, 1e-3 * (s(1.0) + 1e-300));
    let tol = REL_TOL * 1e-2 * rough.abs().max(1e-300);

    // low frequencies, by decades
    let mut total = 0.0;
    let mut hi = two_pi;
    let mut prev = f64::INFINITY;
    let mut growing = 0;
    for _ in 0..MAX_DECADES {
        let lo = hi / 10.0;
        let part = panel(&kernel, lo, hi, tol);
        total += part;
        if part <= REL_TOL * 1e-2 * total {
            break;
        }
        if part >= 0.9 * prev {
            growing += 1;
            if growing > 5 {
                return Err(Error::Quadrature(
                    "spectrum diverges at low frequency; add a low-frequency cutoff".into(),
                ));
            }
        } else {
            growing = 0;
        }
        prev = part;
        hi = lo;
    }

    // oscillating region, one period per panel
    let mut k = 1;
    loop {
        let x = two_pi * k as f64;
        // remaining cosine part is bounded by ~2 s(X) / X²
        if 2.0 * s(x) / (x * x) <= REL_TOL * 0.1 * total {
            break;
        }
        if k > MAX_PERIODS {
            return Err(Error::Quadrature(
                "spectral integral not converged; the spectrum needs a high-frequency cutoff".into(),
            ));
        }
        total += panel(&kernel, x, x + two_pi, tol);
        k += 1;
    }

    // smooth tail ∫ s(x)/x² from X, by decades
    let tail = |x: f64| s(x) / (x * x);
    let mut lo = two_pi * k as f64;
    for _ in 0..MAX_DECADES {
        let part = panel(&tail, lo, 10.0 * lo, tol);
        total += part;
        if part <= REL_TOL * 1e-2 * total {
            return Ok(total);
        }
        lo *= 10.0;
    }
    Err(Error::Quadrature(
        "high-frequency tail of the spectrum does not decay".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_lag_integral_is_linear() {
        let n = NoiseModel::White { density: 3.0 };
        let g = n.lag_integral(2e-3).unwrap();
        assert!((g / (3.0 * 2e-3 / 4.0) - 1.0).abs() < 1e-5, "{g}");
    }

    #[test]
    fn ou_lag_integral_matches_closed_form() {
        let (s, tc) = (500.0, 1e-3);
        let n = NoiseModel::OrnsteinUhlenbeck {
            sigma: s,
            correlation_time: tc,
        };
        for tau in [1e-5, 1e-4, 1e-3, 1e-2, 0.1] {
            let want = 0.5 * s * s * tc * (tau - tc * (1.0 - (-tau / tc).exp()));
            let got = n.lag_integral(tau).unwrap();
            assert!((got / want - 1.0).abs() < 1e-5, "τ = {tau}: {got} vs {want}");
        }
    }

    #[test]
    fn steep_spectrum_without_cutoff_is_rejected() {
        let n = NoiseModel::PowerLaw {
            amplitude: 1.0,
            alpha: 2.0,
            low_cutoff: 0.0,
            high_cutoff: 1e6,
        };
        assert!(matches!(n.lag_integral(1e-3), Err(Error::Quadrature(_))));
    }
}
