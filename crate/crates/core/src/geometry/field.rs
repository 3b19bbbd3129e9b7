use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::{ElectrodeGeometry, Rect, VoltageSet};
use crate::error::{Error, Result};
use crate::jet::Jet;

/// Potential and its first two spatial derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub potential: f64,
    /// ∇V in V/m. The electric field is `-gradient`.
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

impl FieldSample {
    pub fn zero() -> Self {
        Self {
            potential: 0.0,
            gradient: Vector3::zeros(),
            hessian: Matrix3::zeros(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            potential: self.potential * k,
            gradient: self.gradient * k,
            hessian: self.hessian * k,
        }
    }

    pub fn electric_field(&self) -> Vector3<f64> {
        -self.gradient
    }
}

impl std::ops::Add for FieldSample {
    type Output = FieldSample;
    fn add(self, rhs: FieldSample) -> FieldSample {
        FieldSample {
            potential: self.potential + rhs.potential,
            gradient: self.gradient + rhs.gradient,
            hessian: self.hessian + rhs.hessian,
        }
    }
}

fn check_above(p: &Vector3<f64>) -> Result<()> {
    if p.y > 0.0 && p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::BelowPlane([p.x, p.y, p.z]))
    }
}

/// Unit-voltage potential of a rectangle in an otherwise grounded plane.
///
/// Corner terms `atan(a b / (y R))` with `a`, `b` the in-plane offsets to the
/// corner and `R` the distance; the sum is the solid angle over `2π`.
pub fn rectangle_sample(rect: &Rect, p: &Vector3<f64>) -> Result<FieldSample> {
    check_above(p)?;
    let x = Jet::variable(p.x, 0);
    let y = Jet::variable(p.y, 1);
    let z = Jet::variable(p.z, 2);
    let corner = |xc: f64, zc: f64| {
        let a = -x + xc;
        let b = -z + zc;
        let r = (a.square() + b.square() + y.square()).sqrt();
        ((a * b) / (y * r)).atan()
    };
    let phi = (corner(rect.x1, rect.z1) - corner(rect.x0, rect.z1) - corner(rect.x1, rect.z0)
        + corner(rect.x0, rect.z0))
        * (0.5 / PI);
    Ok(FieldSample {
        potential: phi.value,
        gradient: phi.grad,
        hessian: phi.hess,
    })
}

/// Gradient-only evaluation of [`rectangle_sample`], used in the integrators.
#[inline]
pub fn rectangle_gradient(rect: &Rect, p: &Vector3<f64>) -> Vector3<f64> {
    let y = p.y;
    let y2 = y * y;
    let mut g = Vector3::zeros();
    for (xc, zc, sign) in [
        (rect.x1, rect.z1, 1.0),
        (rect.x0, rect.z1, -1.0),
        (rect.x1, rect.z0, -1.0),
        (rect.x0, rect.z0, 1.0),
    ] {
        let a = xc - p.x;
        let b = zc - p.z;
        let a2y = a * a + y2;
        let b2y = b * b + y2;
        let r2 = a * a + b * b + y2;
        let r = r2.sqrt();
        // dF/da, dF/db, dF/dy with a = xc - x, b = zc - z
        let dfa = b * y / (a2y * r);
        let dfb = a * y / (b2y * r);
        let dfy = -a * b * (r2 + y2) / (r * a2y * b2y);
        g.x -= sign * dfa;
        g.y += sign * dfy;
        g.z -= sign * dfb;
    }
    g * (0.5 / PI)
}

/// Potential sample for 1 V on `label`, all other electrodes grounded.
pub fn basis_potential(
    geom: &ElectrodeGeometry,
    label: &str,
    point: &Vector3<f64>,
) -> Result<FieldSample> {
    let idx = geom.index_of(label)?;
    rectangle_sample(&geom.electrodes()[idx].rect, point)
}

/// Superposition of basis samples weighted by `v`.
pub fn total_field(
    geom: &ElectrodeGeometry,
    v: &VoltageSet,
    point: &Vector3<f64>,
) -> Result<FieldSample> {
    ElectrodeField::new(geom, v)?.sample(point)
}

/// Something that can be sampled for potential, gradient and curvature.
pub trait Field: Send + Sync {
    fn sample(&self, p: &Vector3<f64>) -> Result<FieldSample>;

    /// ∇V only. Implementations override this when a cheaper path exists.
    fn gradient(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.sample(p)?.gradient)
    }
}

/// Owned electrode field for a fixed voltage set. Grounded electrodes are
/// dropped at construction.
#[derive(Debug, Clone)]
pub struct ElectrodeField {
    active: Vec<(Rect, f64)>,
}

impl ElectrodeField {
    pub fn new(geom: &ElectrodeGeometry, v: &VoltageSet) -> Result<Self> {
        let dense = v.to_vec(geom)?;
        Ok(Self::from_dense(geom, &dense))
    }

    pub fn from_dense(geom: &ElectrodeGeometry, v: &[f64]) -> Self {
        let active = geom
            .electrodes()
            .iter()
            .zip(v)
            .filter(|(_, &v)| v != 0.0)
            .map(|(e, &v)| (e.rect, v))
            .collect();
        Self { active }
    }

    /// ∇V without domain checks; the caller guarantees `p.y > 0`.
    #[inline]
    pub fn gradient_unchecked(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.active
            .iter()
            .fold(Vector3::zeros(), |acc, (r, v)| acc + rectangle_gradient(r, p) * *v)
    }
}

impl Field for ElectrodeField {
    fn sample(&self, p: &Vector3<f64>) -> Result<FieldSample> {
        check_above(p)?;
        let mut acc = FieldSample::zero();
        for (r, v) in &self.active {
            acc = acc + rectangle_sample(r, p)?.scaled(*v);
        }
        Ok(acc)
    }

    fn gradient(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        check_above(p)?;
        Ok(self.gradient_unchecked(p))
    }
}

/// Ideal quadratic potential `V0 + g·d + ½ dᵀ H d` with `d = p - center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrupoleField {
    pub center: Vector3<f64>,
    pub hessian: Matrix3<f64>,
    pub offset_gradient: Vector3<f64>,
    pub offset_potential: f64,
}

impl QuadrupoleField {
    pub fn new(center: Vector3<f64>, hessian: Matrix3<f64>) -> Self {
        Self {
            center,
            hessian,
            offset_gradient: Vector3::zeros(),
            offset_potential: 0.0,
        }
    }

    /// Radially symmetric Penning potential `κ (z² − (x² + y²)/2) / 2`.
    pub fn penning(center: Vector3<f64>, axial_curvature: f64) -> Self {
        let k = axial_curvature;
        Self::new(center, Matrix3::from_diagonal(&Vector3::new(-k / 2.0, -k / 2.0, k)))
    }

    /// Adds a uniform electric field (V/m) to the quadrupole.
    pub fn with_uniform_field(mut self, e: Vector3<f64>) -> Self {
        self.offset_gradient -= e;
        self
    }

    #[inline]
    pub fn gradient_at(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.hessian * (p - self.center) + self.offset_gradient
    }
}

impl Field for QuadrupoleField {
    fn sample(&self, p: &Vector3<f64>) -> Result<FieldSample> {
        let d = p - self.center;
        Ok(FieldSample {
            potential: self.offset_potential
                + self.offset_gradient.dot(&d)
                + 0.5 * d.dot(&(self.hessian * d)),
            gradient: self.gradient_at(p),
            hessian: self.hessian,
        })
    }

    fn gradient(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.gradient_at(p))
    }
}

/// Sum of two fields.
pub struct SumField<A, B>(pub A, pub B);

impl<A: Field, B: Field> Field for SumField<A, B> {
    fn sample(&self, p: &Vector3<f64>) -> Result<FieldSample> {
        Ok(self.0.sample(p)? + self.1.sample(p)?)
    }

    fn gradient(&self, p: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.0.gradient(p)? + self.1.gradient(p)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Electrode;

    fn unit_rect() -> Rect {
        Rect::new(-50e-6, 70e-6, -30e-6, 120e-6)
    }

    #[test]
    fn below_plane_is_rejected() {
        let r = unit_rect();
        assert!(matches!(
            rectangle_sample(&r, &Vector3::new(0.0, 0.0, 0.0)),
            Err(Error::BelowPlane(_))
        ));
        assert!(rectangle_sample(&r, &Vector3::new(0.0, -1e-6, 0.0)).is_err());
    }

    #[test]
    fn analytic_gradient_matches_jet() {
        let r = unit_rect();
        for p in [
            Vector3::new(10e-6, 80e-6, 5e-6),
            Vector3::new(-200e-6, 20e-6, 300e-6),
            Vector3::new(70e-6, 150e-6, -30e-6),
        ] {
            let s = rectangle_sample(&r, &p).unwrap();
            let g = rectangle_gradient(&r, &p);
            assert!((s.gradient - g).norm() <= 1e-12 * s.gradient.norm().max(1.0));
        }
    }

    #[test]
    fn laplace_and_symmetry() {
        let r = Rect::new(-40e-6, 40e-6, -60e-6, 60e-6);
        for p in [
            Vector3::new(13e-6, 90e-6, -7e-6),
            Vector3::new(-150e-6, 30e-6, 220e-6),
            Vector3::new(0.0, 5e-6, 59e-6),
        ] {
            let s = rectangle_sample(&r, &p).unwrap();
            assert!(s.hessian.trace().abs() <= 1e-6 * s.hessian.norm());
            assert!((s.hessian - s.hessian.transpose()).norm() <= 1e-12 * s.hessian.norm());
            let mirrored = rectangle_sample(&r, &Vector3::new(-p.x, p.y, p.z)).unwrap();
            assert!((mirrored.potential - s.potential).abs() < 1e-14);
            let mirrored = rectangle_sample(&r, &Vector3::new(p.x, p.y, -p.z)).unwrap();
            assert!((mirrored.potential - s.potential).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_limit_recovers_electrode_voltage() {
        let r = unit_rect();
        let y = 1e-12;
        let inside = rectangle_sample(&r, &Vector3::new(0.0, y, 0.0)).unwrap();
        let outside = rectangle_sample(&r, &Vector3::new(100e-6, y, 0.0)).unwrap();
        let edge = rectangle_sample(&r, &Vector3::new(70e-6, y, 40e-6)).unwrap();
        assert!((inside.potential - 1.0).abs() < 1e-6);
        assert!(outside.potential.abs() < 1e-6);
        assert!((edge.potential - 0.5).abs() < 1e-6);
    }

    #[test]
    fn superposition_is_linear() {
        let geom = ElectrodeGeometry::new(vec![
            Electrode {
                label: "a".into(),
                rect: Rect::new(-100e-6, 0.0, -50e-6, 50e-6),
                rf_capable: false,
            },
            Electrode {
                label: "b".into(),
                rect: Rect::new(0.0, 80e-6, -50e-6, 90e-6),
                rf_capable: true,
            },
        ])
        .unwrap();
        let p = Vector3::new(12e-6, 70e-6, -4e-6);
        let v = VoltageSet::new().with("a", 1.7).with("b", -0.6);
        let s = total_field(&geom, &v, &p).unwrap();
        let sa = basis_potential(&geom, "a", &p).unwrap().scaled(1.7);
        let sb = basis_potential(&geom, "b", &p).unwrap().scaled(-0.6);
        let sum = sa + sb;
        assert!((s.potential - sum.potential).abs() < 1e-15);
        assert!((s.hessian - sum.hessian).norm() < 1e-6);
        let doubled = total_field(&geom, &v.scaled(2.0), &p).unwrap();
        assert!((doubled.potential - 2.0 * s.potential).abs() < 1e-15);
        assert!((doubled.gradient - 2.0 * s.gradient).norm() <= 1e-12 * s.gradient.norm());
        assert!((doubled.hessian - 2.0 * s.hessian).norm() <= 1e-12 * s.hessian.norm());
        let zero = total_field(&geom, &VoltageSet::new(), &p).unwrap();
        assert_eq!(zero, FieldSample::zero());
        assert!(total_field(&geom, &VoltageSet::new().with("c", 1.0), &p).is_err());
    }
}
