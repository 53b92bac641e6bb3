//! Parameter-varying control-affine model of the planar 2-DOF arm.
//!
//! The state is `[theta1, theta2, dtheta1, dtheta2]` with joint accelerations
//! as inputs. Runtime-varying parameters scale the actuation (`c1`, `c2`) and
//! add an acceleration bias (`b1`, `b2`):
//!
//! ```text
//! x' = f(x) + diag(1, 1, c1, c2) g(x) u + [0, 0, b1, b2]
//! ```
//!
//! There are no gravity or Coriolis terms; the velocity rows integrate the
//! joint rates and the acceleration rows are driven by the scaled input.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible joint angle magnitude, `pi/18`.
pub const THETA_MIN: f64 = PI / 18.0;
/// Largest admissible joint angle magnitude, `pi/2`.
pub const THETA_MAX: f64 = FRAC_PI_2;
/// Joint velocity limit, rad/s.
pub const DTHETA_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub theta1: f64,
    pub theta2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
}

impl StateVector {
    pub const fn new(theta1: f64, theta2: f64, dtheta1: f64, dtheta2: f64) -> Self {
        Self {
            theta1,
            theta2,
            dtheta1,
            dtheta2,
        }
    }

    pub fn theta(&self) -> [f64; 2] {
        [self.theta1, self.theta2]
    }

    pub fn dtheta(&self) -> [f64; 2] {
        [self.dtheta1, self.dtheta2]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.theta1, self.theta2, self.dtheta1, self.dtheta2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Whether both joint angles lie in `[-pi/2, -pi/18] U [pi/18, pi/2]`.
    pub fn angles_in_limits(&self) -> bool {
        self.theta().iter().all(|t| angle_in_limits(*t))
    }

    /// Whether both joint velocities satisfy `|dtheta| <= 1`.
    pub fn velocities_in_limits(&self) -> bool {
        self.dtheta().iter().all(|v| v.abs() <= DTHETA_MAX)
    }

    /// The state-space validity predicate: angle and velocity limits.
    pub fn in_state_space(&self) -> bool {
        self.angles_in_limits() && self.velocities_in_limits()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

fn angle_in_limits(theta: f64) -> bool {
    let mag = theta.abs();
    (THETA_MIN..=THETA_MAX).contains(&mag)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlVector {
    pub u1: f64,
    pub u2: f64,
}

impl ControlVector {
    pub const fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.u1, self.u2]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite()
    }
}

/// Element-wise box on the joint accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBounds {
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self {
            u_min: -100.0,
            u_max: 100.0,
        }
    }
}

impl ControlBounds {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        let b = Self { u_min, u_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_min.is_finite() && self.u_max.is_finite()) || self.u_min >= self.u_max {
            return Err(Error::InvalidParameter(format!(
                "control bounds require finite u_min < u_max, got [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, u: &ControlVector) -> bool {
        u.to_array()
            .iter()
            .all(|v| (self.u_min..=self.u_max).contains(v))
    }

    pub fn clamp(&self, u: ControlVector) -> ControlVector {
        ControlVector::new(
            u.u1.clamp(self.u_min, self.u_max),
            u.u2.clamp(self.u_min, self.u_max),
        )
    }
}

/// Runtime-varying dynamics parameters `rho = (c1, c2, b1, b2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub c1: f64,
    pub c2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl SystemParams {
    pub fn new(c1: f64, c2: f64, b1: f64, b2: f64) -> Result<Self> {
        let p = Self { c1, c2, b1, b2 };
        p.validate()?;
        Ok(p)
    }

    /// `c1 = c2 = 1`, `b1 = b2 = 0`.
    pub const fn nominal() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            b1: 0.0,
            b2: 0.0,
        }
    }

    /// Equal actuation gains and zero bias.
    pub const fn symmetric_gain(c: f64) -> Self {
        Self {
            c1: c,
            c2: c,
            b1: 0.0,
            b2: 0.0,
        }
    }

    pub fn gain(&self) -> [f64; 2] {
        [self.c1, self.c2]
    }

    pub fn bias(&self) -> [f64; 2] {
        [self.b1, self.b2]
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.c1, self.c2, self.b1, self.b2]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.c1 < 0.0 || self.c2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "system parameters require finite values and c1, c2 >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Link lengths and the horizontal distance from the base to the wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmGeometry {
    pub l1: f64,
    pub l2: f64,
    pub d_max: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            l1: 1.0,
            l2: 1.0,
            d_max: 1.5,
        }
    }
}

impl ArmGeometry {
    pub fn new(l1: f64, l2: f64, d_max: f64) -> Result<Self> {
        let g = Self { l1, l2, d_max };
        g.validate()?;
        Ok(g)
    }

    pub fn lengths(&self) -> [f64; 2] {
        [self.l1, self.l2]
    }

    /// Largest horizontal reach inside the admissible angle set.
    pub fn max_reach(&self) -> f64 {
        (self.l1 + self.l2) * THETA_MIN.cos()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l1 > 0.0 && self.l2 > 0.0 && self.l1.is_finite() && self.l2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "link lengths must be positive, got l1={}, l2={}",
                self.l1, self.l2
            )));
        }
        if !(self.d_max > 0.0 && self.d_max < self.max_reach()) {
            return Err(Error::InvalidParameter(format!(
                "d_max must lie in (0, {:.6}) so the wall is reachable, got {}",
                self.max_reach(),
                self.d_max
            )));
        }
        Ok(())
    }

    /// Horizontal and vertical end-effector coordinates. Both joint angles are
    /// measured from the horizontal axis.
    pub fn end_effector(&self, x: &StateVector) -> (f64, f64) {
        (
            self.l1 * x.theta1.cos() + self.l2 * x.theta2.cos(),
            self.l1 * x.theta1.sin() + self.l2 * x.theta2.sin(),
        )
    }
}

/// Drift `f(x, rho) = [dtheta1, dtheta2, b1, b2]`.
pub fn drift(x: &StateVector, rho: &SystemParams) -> [f64; 4] {
    [x.dtheta1, x.dtheta2, rho.b1, rho.b2]
}

/// Actuation matrix `g(x, rho)` (4x2, row-major). Only the velocity rows are
/// actuated, scaled by the gains.
pub fn actuation(_x: &StateVector, rho: &SystemParams) -> [[f64; 2]; 4] {
    [[0.0, 0.0], [0.0, 0.0], [rho.c1, 0.0], [0.0, rho.c2]]
}

fn vector_field(x: &[f64; 4], u: &ControlVector, rho: &SystemParams) -> [f64; 4] {
    let s = StateVector::from_array(*x);
    let f = drift(&s, rho);
    let g = actuation(&s, rho);
    let mut out = [0.0; 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = f[i] + g[i][0] * u.u1 + g[i][1] * u.u2;
    }
    out
}

/// One classical Runge-Kutta step with the input held constant. The result is
/// not clamped to the state limits.
pub fn step(x: &StateVector, u: &ControlVector, rho: &SystemParams, dt: f64) -> StateVector {
    debug_assert!(dt > 0.0);
    let x0 = x.to_array();
    let axpy = |a: &[f64; 4], h: f64, k: &[f64; 4]| -> [f64; 4] {
        std::array::from_fn(|i| a[i] + h * k[i])
    };
    let k1 = vector_field(&x0, u, rho);
    let k2 = vector_field(&axpy(&x0, 0.5 * dt, &k1), u, rho);
    let k3 = vector_field(&axpy(&x0, 0.5 * dt, &k2), u, rho);
    let k4 = vector_field(&axpy(&x0, dt, &k3), u, rho);
    StateVector::from_array(std::array::from_fn(|i| {
        x0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Deterministic uniform sampler over the admissible state space.
///
/// Each joint angle gets a uniform sign and a magnitude uniform on
/// `[pi/18, pi/2]`; velocities are uniform on `[-1, 1]`. The two angle
/// intervals are sampled independently per joint.
#[derive(Debug, Clone)]
pub struct StateSampler {
    rng: ChaCha8Rng,
}

impl StateSampler {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream derived from the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn sample(&mut self) -> StateVector {
        sample_state(&mut self.rng)
    }
}

impl Iterator for StateSampler {
    type Item = StateVector;

    fn next(&mut self) -> Option<StateVector> {
        Some(self.sample())
    }
}

pub fn sample_state<R: Rng + ?Sized>(rng: &mut R) -> StateVector {
    let angle = |rng: &mut R| {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        sign * rng.random_range(THETA_MIN..=THETA_MAX)
    };
    let theta1 = angle(rng);
    let theta2 = angle(rng);
    let dtheta1 = rng.random_range(-DTHETA_MAX..=DTHETA_MAX);
    let dtheta2 = rng.random_range(-DTHETA_MAX..=DTHETA_MAX);
    StateVector::new(theta1, theta2, dtheta1, dtheta2)
}
