//! Small Levenberg-Marquardt solver with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct LmResult {
    pub params: Vec<f64>,
    /// Jacobian at the solution, rows = residuals.
    pub jacobian: DMatrix<f64>,
    pub cost: f64,
    pub converged: bool,
}

impl LmResult {
    /// `(JᵀJ)⁻¹`, the parameter covariance for unit-variance residuals.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        (self.jacobian.transpose() * &self.jacobian).try_inverse()
    }
}

fn jacobian<F>(f: &mut F, p: &[f64], r0: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut j = DMatrix::zeros(r0.len(), p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1e-3);
        q[k] = p[k] + h;
        let up = f(&q)?;
        q[k] = p[k] - h;
        let dn = f(&q)?;
        q[k] = p[k];
        for i in 0..r0.len() {
            j[(i, k)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    Ok(j)
}

pub(crate) fn levenberg_marquardt<F>(mut f: F, p0: &[f64], max_iter: usize) -> Result<LmResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut p = p0.to_vec();
    let mut r = DVector::from_vec(f(&p)?);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("residuals not finite at the starting point".into()));
    }
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut j = jacobian(&mut f, &p, &r)?;
    for _ in 0..max_iter {
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() <= 1e-15 * (1.0 + cost) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..p.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = match f(&trial) {
                Ok(v) if v.iter().all(|x| x.is_finite()) => DVector::from_vec(v),
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let ct = rt.norm_squared();
            if ct < cost {
                let small = step.norm() <= 1e-12 * (1.0 + DVector::from_vec(p.clone()).norm());
                let flat = cost - ct <= 1e-14 * cost;
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small || flat {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: a (possibly flat) minimum
            converged = true;
        }
        j = jacobian(&mut f, &p, &r)?;
        if converged {
            break;
        }
    }
    Ok(LmResult {
        params: p,
        jacobian: j,
        cost,
        converged,
    })
}
