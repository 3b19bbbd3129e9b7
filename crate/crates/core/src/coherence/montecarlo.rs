use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{check_grid, CoherenceCurve, NoiseModel, SequenceFamily};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct MonteCarloOptions {
    pub paths: usize,
    pub seed: u64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self { paths: 20_000, seed: 1 }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `[2x − 3 + 4e^{−x} − e^{−2x}]`, with a series for small `x`.
fn integrated_ou_variance(x: f64) -> f64 {
    if x < 1e-2 {
        x.powi(3) * (2.0 / 3.0 - 0.5 * x + 7.0 / 30.0 * x * x)
    } else {
        2.0 * x - 3.0 + 4.0 * (-x).exp() - (-2.0 * x).exp()
    }
}

/// Accumulated phase `∫ y(t) δ(t) dt` for one noise realisation.
fn sample_phase(noise: &NoiseModel, edges: &[f64], net: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(match noise {
        NoiseModel::None => 0.0,
        NoiseModel::QuasiStatic { sigma } => sigma * normal(rng) * net,
        NoiseModel::White { density } => edges
            .windows(2)
            .map(|w| (density * (w[1] - w[0])).sqrt() * normal(rng))
            .sum(),
        NoiseModel::OrnsteinUhlenbeck {
            sigma,
            correlation_time: tc,
        } => {
            // exact joint update of the value and its integral over each segment
            let mut x = sigma * normal(rng);
            let mut phase = 0.0;
            for (k, w) in edges.windows(2).enumerate() {
                let h = w[1] - w[0];
                let r = h / tc;
                let one_minus_mu = -(-r).exp_m1();
                let var_x = sigma * sigma * one_minus_mu * (2.0 - one_minus_mu);
                let var_i = sigma * sigma * tc * tc * integrated_ou_variance(r);
                let cov = sigma * sigma * tc * one_minus_mu * one_minus_mu;
                let (z1, z2) = (normal(rng), normal(rng));
                let sd_i = var_i.sqrt();
                let integral = x * tc * one_minus_mu + sd_i * z1;
                let a = if sd_i > 0.0 { cov / sd_i } else { 0.0 };
                x = x * (1.0 - one_minus_mu) + a * z1 + (var_x - a * a).max(0.0).sqrt() * z2;
                phase += if k % 2 == 0 { integral } else { -integral };
            }
            phase
        }
        NoiseModel::PowerLaw { .. } => {
            return Err(Error::InvalidParameter(
                "the Monte-Carlo engine samples quasi-static, Ornstein-Uhlenbeck and white noise only".into(),
            ))
        }
        NoiseModel::Sum(parts) => {
            let mut p = 0.0;
            for part in parts {
                p += sample_phase(part, edges, net, rng)?;
            }
            p
        }
    })
}

/// Time-domain estimate of `⟨cos φ⟩` from sampled noise paths. Each grid
/// point uses its own ChaCha8 streams, so results are independent of
/// thread scheduling.
pub fn monte_carlo_decay(
    noise: &NoiseModel,
    family: SequenceFamily,
    t_grid: &[f64],
    opts: &MonteCarloOptions,
) -> Result<CoherenceCurve> {
    noise.validate()?;
    check_grid(t_grid)?;
    if opts.paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let mut contrast = Vec::with_capacity(t_grid.len());
    let mut stderr = Vec::with_capacity(t_grid.len());
    for (i, &t) in t_grid.iter().enumerate() {
        let seq = family.at(t)?;
        let mut edges = vec![0.0];
        edges.extend(&seq.pulses);
        edges.push(seq.total);
        let net = seq.net_time();
        let values = (0..opts.paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(((i as u64) << 32) | p as u64);
                sample_phase(noise, &edges, net, &mut rng).map(f64::cos)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        contrast.push(mean);
        stderr.push((var / n).sqrt());
    }
    CoherenceCurve::new(t_grid.to_vec(), contrast, stderr)
}
