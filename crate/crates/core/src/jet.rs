//! Second-order forward-mode jets in three variables.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to a fixed set of three inputs. Arithmetic propagates all three
//! exactly, which gives closed-form potentials their derivatives for free.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vector3<f64>,
    pub hess: Matrix3<f64>,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            grad: Vector3::zeros(),
            hess: Matrix3::zeros(),
        }
    }

    /// The `axis`-th independent variable evaluated at `value`.
    pub fn variable(value: f64, axis: usize) -> Self {
        let mut grad = Vector3::zeros();
        grad[axis] = 1.0;
        Self {
            value,
            grad,
            hess: Matrix3::zeros(),
        }
    }

    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            value: f,
            grad: self.grad * df,
            hess: self.hess * df + self.grad * self.grad.transpose() * d2f,
        }
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }

    pub fn atan(self) -> Self {
        let u = self.value;
        let d = 1.0 / (1.0 + u * u);
        self.chain(u.atan(), d, -2.0 * u * d * d)
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.value;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn square(self) -> Self {
        self * self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        Jet {
            value: self.value + rhs.value,
            grad: self.grad + rhs.grad,
            hess: self.hess + rhs.hess,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        Jet {
            value: self.value - rhs.value,
            grad: self.grad - rhs.grad,
            hess: self.hess - rhs.hess,
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            value: -self.value,
            grad: -self.grad,
            hess: -self.hess,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let cross = self.grad * rhs.grad.transpose();
        Jet {
            value: self.value * rhs.value,
            grad: self.grad * rhs.value + rhs.grad * self.value,
            hess: self.hess * rhs.value + rhs.hess * self.value + cross + cross.transpose(),
        }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        Jet {
            value: self.value * rhs,
            grad: self.grad * rhs,
            hess: self.hess * rhs,
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        Jet {
            value: self.value + rhs,
            ..self
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}
