//! Safety measure, the first-order safety index and the affine-in-control
//! decomposition of its time derivative.
//!
//! `phi0 = l1 cos(theta1) + l2 cos(theta2) - d_max` is positive once the end
//! effector passes the wall. The index adds a velocity look-ahead,
//! `phi = phi0 + k * dphi0/dt`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ArmGeometry, StateVector, SystemParams};
use crate::error::{Error, Result};

/// Index coefficients `k_i`, one per derivative order of `phi0`.
///
/// The arm machinery only uses the first-order coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SafetyIndexParams {
    coefficients: Vec<f64>,
}

impl SafetyIndexParams {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        let p = Self { coefficients };
        p.validate()?;
        Ok(p)
    }

    /// First-order index with a single coefficient.
    pub fn first_order(k: f64) -> Result<Self> {
        Self::new(vec![k])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// The first-order coefficient.
    pub fn k(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() {
            return Err(Error::InvalidParameter(
                "safety index needs at least one coefficient".into(),
            ));
        }
        if let Some(bad) = self
            .coefficients
            .iter()
            .find(|k| !k.is_finite() || **k < 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "safety index coefficients must be finite and >= 0, got {bad}"
            )));
        }
        Ok(())
    }
}

/// `dphi/dt = a0 + a1 u1 + a2 u2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiDotAffine {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl PhiDotAffine {
    pub fn control_coefficients(&self) -> [f64; 2] {
        [self.a1, self.a2]
    }

    pub fn eval(&self, u1: f64, u2: f64) -> f64 {
        self.a0 + self.a1 * u1 + self.a2 * u2
    }
}

pub fn phi0(x: &StateVector, geom: &ArmGeometry) -> f64 {
    geom.l1 * x.theta1.cos() + geom.l2 * x.theta2.cos() - geom.d_max
}

/// Time derivative of `phi0` along the state's velocities.
pub fn phi0_rate(x: &StateVector, geom: &ArmGeometry) -> f64 {
    -geom.l1 * x.theta1.sin() * x.dtheta1 - geom.l2 * x.theta2.sin() * x.dtheta2
}

pub fn phi(x: &StateVector, k: &SafetyIndexParams, geom: &ArmGeometry) -> f64 {
    phi_with_gain(x, k.k(), geom)
}

pub(crate) fn phi_with_gain(x: &StateVector, k: f64, geom: &ArmGeometry) -> f64 {
    geom.l1 * x.theta1.cos() + geom.l2 * x.theta2.cos()
        - k * geom.l1 * x.theta1.sin() * x.dtheta1
        - k * geom.l2 * x.theta2.sin() * x.dtheta2
        - geom.d_max
}

pub fn phi_dot_affine(
    x: &StateVector,
    k: &SafetyIndexParams,
    rho: &SystemParams,
    geom: &ArmGeometry,
) -> PhiDotAffine {
    phi_dot_affine_with_gain(x, k.k(), rho, geom)
}

pub(crate) fn phi_dot_affine_with_gain(
    x: &StateVector,
    k: f64,
    rho: &SystemParams,
    geom: &ArmGeometry,
) -> PhiDotAffine {
    let mut a0 = 0.0;
    let mut a = [0.0; 2];
    let theta = x.theta();
    let dtheta = x.dtheta();
    let l = geom.lengths();
    let c = rho.gain();
    let b = rho.bias();
    for j in 0..2 {
        let (s, co) = theta[j].sin_cos();
        a0 += -l[j] * s * dtheta[j] - k * l[j] * co * dtheta[j] * dtheta[j] - k * l[j] * s * b[j];
        a[j] = -k * l[j] * s * c[j];
    }
    PhiDotAffine {
        a0,
        a1: a[0],
        a2: a[1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step, ControlVector};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn geom() -> ArmGeometry {
        ArmGeometry::default()
    }

    #[test]
    fn phi0_examples() {
        let x = StateVector::new(FRAC_PI_2, FRAC_PI_2, 0.0, 0.0);
        assert_relative_eq!(phi0(&x, &geom()), -1.5, epsilon = 1e-15);

        let x = StateVector::new(PI / 18.0, PI / 18.0, 0.0, 0.0);
        assert_relative_eq!(phi0(&x, &geom()), 2.0 * (PI / 18.0).cos() - 1.5, epsilon = 1e-15);
        assert_relative_eq!(phi0(&x, &geom()), 0.4696, epsilon = 1e-4);

        let g = ArmGeometry::new(0.8, 1.1, 1.2).unwrap();
        let swapped = ArmGeometry::new(1.1, 0.8, 1.2).unwrap();
        let x = StateVector::new(0.3, 1.2, 0.0, 0.0);
        let xs = StateVector::new(1.2, 0.3, 0.0, 0.0);
        assert_relative_eq!(phi0(&x, &g), phi0(&xs, &swapped), epsilon = 1e-15);
    }

    #[test]
    fn phi_examples() {
        let k = SafetyIndexParams::first_order(2.5).unwrap();
        let x = StateVector::new(0.4, -1.1, 0.0, 0.0);
        assert_eq!(phi(&x, &k, &geom()), phi0(&x, &geom()));

        let zero = SafetyIndexParams::first_order(0.0).unwrap();
        let x = StateVector::new(0.4, -1.1, 0.7, -0.3);
        assert_relative_eq!(phi(&x, &zero, &geom()), phi0(&x, &geom()), epsilon = 1e-15);

        let one = SafetyIndexParams::first_order(1.0).unwrap();
        let x = StateVector::new(FRAC_PI_4, FRAC_PI_4, 1.0, 1.0);
        assert_relative_eq!(phi(&x, &one, &geom()), -1.5, epsilon = 1e-12);
    }

    #[test]
    fn phi_is_linear_in_k() {
        let x = StateVector::new(0.9, 0.3, -0.6, 0.8);
        let at = |k: f64| phi_with_gain(&x, k, &geom());
        assert_relative_eq!(at(2.0) - at(1.0), at(1.0) - at(0.0), epsilon = 1e-12);
    }

    #[test]
    fn zero_k_removes_control() {
        let x = StateVector::new(0.9, -0.3, -0.6, 0.8);
        let zero = SafetyIndexParams::first_order(0.0).unwrap();
        let d = phi_dot_affine(&x, &zero, &SystemParams::nominal(), &geom());
        assert_eq!(d.a1, 0.0);
        assert_eq!(d.a2, 0.0);
    }

    #[test]
    fn positive_angles_favor_upper_bound() {
        let x = StateVector::new(0.5, 1.2, 0.3, -0.3);
        let k = SafetyIndexParams::first_order(0.3).unwrap();
        let d = phi_dot_affine(&x, &k, &SystemParams::nominal(), &geom());
        assert!(d.a1 < 0.0 && d.a2 < 0.0);
    }

    #[test]
    fn affine_matches_analytic_expression() {
        let x = StateVector::new(0.7, -0.9, 0.4, -0.8);
        let rho = SystemParams::new(0.6, 1.3, 0.5, -2.0).unwrap();
        let k = 0.4;
        let (u1, u2) = (12.0, -40.0);
        let d = phi_dot_affine_with_gain(&x, k, &rho, &geom());
        let mut expected = 0.0;
        for (j, (t, v, c, b, u)) in [
            (x.theta1, x.dtheta1, rho.c1, rho.b1, u1),
            (x.theta2, x.dtheta2, rho.c2, rho.b2, u2),
        ]
        .into_iter()
        .enumerate()
        {
            let l = geom().lengths()[j];
            expected += -l * t.sin() * v - k * l * t.cos() * v * v - k * l * t.sin() * (c * u + b);
        }
        assert_relative_eq!(d.eval(u1, u2), expected, max_relative = 1e-14);
    }

    #[test]
    fn finite_difference_along_trajectory() {
        let x = StateVector::new(0.7, 0.5, -0.4, 0.6);
        let rho = SystemParams::new(0.8, 0.9, 0.3, -0.2).unwrap();
        let u = ControlVector::new(5.0, -3.0);
        let k = SafetyIndexParams::first_order(0.2).unwrap();
        let rate = phi_dot_affine(&x, &k, &rho, &geom()).eval(u.u1, u.u2);
        let mut errors = Vec::new();
        for dt in [1e-2, 1e-3, 1e-4] {
            let next = step(&x, &u, &rho, dt);
            let fd = (phi(&next, &k, &geom()) - phi(&x, &k, &geom())) / dt;
            errors.push((fd - rate).abs());
        }
        // forward differences converge at first order
        assert!(errors[1] < errors[0] * 0.2);
        assert!(errors[2] < errors[1] * 0.2);
        assert!(errors[2] < 1e-3);
    }

    #[test]
    fn negative_coefficients_rejected() {
        assert!(SafetyIndexParams::first_order(-0.1).is_err());
        assert!(SafetyIndexParams::new(vec![]).is_err());
    }
}
