use nalgebra::Vector3;

use super::field::Field;
use super::{ElectrodeField, ElectrodeGeometry, VoltageSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NullOptions {
    /// Stop when |∇V| falls below this, V/m.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NullOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 50,
        }
    }
}

/// Newton iteration on ∇V = 0 starting from `guess`.
pub fn find_null<F: Field + ?Sized>(field: &F, guess: Vector3<f64>) -> Result<Vector3<f64>> {
    find_null_with(field, guess, &NullOptions::default())
}

pub fn find_null_with<F: Field + ?Sized>(
    field: &F,
    guess: Vector3<f64>,
    opts: &NullOptions,
) -> Result<Vector3<f64>> {
    let mut p = guess;
    let mut s = field.sample(&p)?;
    let mut norm = s.gradient.norm();
    for _ in 0..opts.max_iterations {
        if norm < opts.tolerance {
            return Ok(p);
        }
        let Some(inv) = s.hessian.try_inverse() else {
            break;
        };
        let mut step = -(inv * s.gradient);
        // keep steps short compared with the height so the local quadratic
        // model stays meaningful, and never cross the electrode plane
        let cap = 0.25 * p.y;
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        // backtrack until |∇V| decreases
        let mut accepted = false;
        for _ in 0..40 {
            let trial = p + step;
            if trial.y > 0.0 {
                let ts = field.sample(&trial)?;
                let tn = ts.gradient.norm();
                if tn < norm {
                    p = trial;
                    s = ts;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NullNotConverged {
        iterations: opts.max_iterations,
        last: p,
        field_norm: norm,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RfNullOptions {
    /// In-plane position of the vertical line that is scanned.
    pub x: f64,
    pub z: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub scan_points: usize,
}

impl Default for RfNullOptions {
    fn default() -> Self {
        Self {
            x: 0.0,
            z: 0.0,
            y_min: 5e-6,
            y_max: 2e-3,
            scan_points: 400,
        }
    }
}

/// Height above the plane where the rf field magnitude has its lowest local
/// minimum along the vertical through `(opts.x, opts.z)`.
pub fn rf_null_line(
    geom: &ElectrodeGeometry,
    rf_pattern: &VoltageSet,
    opts: &RfNullOptions,
) -> Result<f64> {
    for (label, &v) in &rf_pattern.values {
        let idx = geom.index_of(label)?;
        if v != 0.0 && !geom.electrodes()[idx].rf_capable {
            return Err(Error::InvalidParameter(format!("`{label}` is not rf capable")));
        }
    }
    let field = ElectrodeField::new(geom, rf_pattern)?;
    let e2 = |y: f64| field.gradient_unchecked(&Vector3::new(opts.x, y, opts.z)).norm_squared();

    let n = opts.scan_points.max(8);
    let ratio = (opts.y_max / opts.y_min).powf(1.0 / (n - 1) as f64);
    let ys: Vec<f64> = (0..n).map(|i| opts.y_min * ratio.powi(i as i32)).collect();
    let vals: Vec<f64> = ys.iter().map(|&y| e2(y)).collect();
    let best = (1..n - 1)
        .filter(|&i| vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1])
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .ok_or(Error::NoRfNull {
            lo: opts.y_min,
            hi: opts.y_max,
        })?;
    Ok(golden_section(e2, ys[best - 1], ys[best + 1], 1e-13))
}

pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::QuadrupoleField;
    use nalgebra::Matrix3;

    #[test]
    fn ideal_quadrupole_null() {
        let p0 = Vector3::new(3e-6, 140e-6, -8e-6);
        let q = QuadrupoleField::penning(p0, 2.3e7);
        let found = find_null(&q, Vector3::new(0.0, 150e-6, 0.0)).unwrap();
        assert!((found - p0).norm() < 1e-12);
    }

    #[test]
    fn uniform_field_shifts_null() {
        let p0 = Vector3::new(0.0, 150e-6, 0.0);
        let h = Matrix3::from_diagonal(&Vector3::new(-1.2e7, -1.1e7, 2.3e7));
        let e = Vector3::new(40.0, 0.0, 0.0);
        let q = QuadrupoleField::new(p0, h).with_uniform_field(e);
        let found = find_null(&q, p0).unwrap();
        // ∇V = H d − E = 0  ⇒  d_x = E_x / H_xx
        let expected = p0.x + e.x / h[(0, 0)];
        assert!((found.x - expected).abs() < 1e-15);
    }

    #[test]
    fn singular_hessian_fails_with_last_iterate() {
        let q = QuadrupoleField::new(Vector3::new(0.0, 1e-4, 0.0), Matrix3::zeros())
            .with_uniform_field(Vector3::new(1.0, 0.0, 0.0));
        match find_null(&q, Vector3::new(0.0, 1e-4, 0.0)) {
            Err(Error::NullNotConverged { last, .. }) => assert_eq!(last.y, 1e-4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
