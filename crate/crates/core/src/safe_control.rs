//! Safe-set control law and point-wise feasibility.
//!
//! When the index is non-negative the reference input is projected onto
//! `{u in box : dphi/dt(x, u) <= -eta}`. The problem has two variables, one
//! half-plane and a box, so the exact minimizer of `|u - u_ref|^2` is found by
//! enumerating the KKT cases instead of calling a QP solver.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ArmGeometry, ControlBounds, ControlVector, StateVector, SystemParams};
use crate::error::{Error, Result};
use crate::safety_index::{phi_dot_affine_with_gain, phi_with_gain, PhiDotAffine, SafetyIndexParams};

/// Default convergence margin, 1/s.
pub const DEFAULT_ETA: f64 = 0.1;

/// Slack allowed when checking a candidate against the half-plane.
const HALFPLANE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeControlConfig {
    pub eta: f64,
}

impl Default for SafeControlConfig {
    fn default() -> Self {
        Self { eta: DEFAULT_ETA }
    }
}

impl SafeControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutcome {
    pub u: ControlVector,
    /// The index was non-negative, so the rate constraint was imposed.
    pub constraint_active: bool,
    /// The constrained set was non-empty. When false, `u` is the best-effort
    /// input minimizing the index rate.
    pub feasible: bool,
}

/// Minimum of the index rate over the control box and the minimizing vertex.
///
/// Each coordinate picks `u_max` or `u_min` by the sign of its coefficient,
/// with ties broken toward `u_max`.
pub fn min_phi_dot(
    x: &StateVector,
    k: &SafetyIndexParams,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
) -> (f64, ControlVector) {
    let affine = phi_dot_affine_with_gain(x, k.k(), rho, geom);
    min_over_box(&affine, bounds)
}

fn min_over_box(affine: &PhiDotAffine, bounds: &ControlBounds) -> (f64, ControlVector) {
    let mut value = affine.a0;
    let mut u = [0.0; 2];
    for (j, a) in affine.control_coefficients().into_iter().enumerate() {
        let hi = a * bounds.u_max;
        let lo = a * bounds.u_min;
        if hi <= lo {
            value += hi;
            u[j] = bounds.u_max;
        } else {
            value += lo;
            u[j] = bounds.u_min;
        }
    }
    (value, ControlVector::from_array(u))
}

/// True iff the index is negative or the best admissible rate reaches `-eta`.
pub fn is_feasible_state(
    x: &StateVector,
    k: &SafetyIndexParams,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
) -> bool {
    is_feasible_with_gain(x, k.k(), rho, geom, bounds, eta)
}

pub(crate) fn is_feasible_with_gain(
    x: &StateVector,
    k: f64,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
) -> bool {
    if phi_with_gain(x, k, geom) < 0.0 {
        return true;
    }
    let affine = phi_dot_affine_with_gain(x, k, rho, geom);
    min_over_box(&affine, bounds).0 <= -eta
}

pub fn ssa_filter(
    x: &StateVector,
    u_ref: &ControlVector,
    k: &SafetyIndexParams,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    cfg: &SafeControlConfig,
) -> ControlOutcome {
    debug_assert!(u_ref.is_finite());
    if phi_with_gain(x, k.k(), geom) < 0.0 {
        return ControlOutcome {
            u: bounds.clamp(*u_ref),
            constraint_active: false,
            feasible: true,
        };
    }
    let affine = phi_dot_affine_with_gain(x, k.k(), rho, geom);
    let (min_value, u_star) = min_over_box(&affine, bounds);
    if min_value > -cfg.eta {
        return ControlOutcome {
            u: u_star,
            constraint_active: true,
            feasible: false,
        };
    }
    let u = project_onto_halfplane_box(
        u_ref.to_array(),
        affine.control_coefficients(),
        -cfg.eta - affine.a0,
        bounds,
    )
    .map(ControlVector::from_array)
    // the set is non-empty, so the minimizing vertex is always admissible
    .unwrap_or(u_star);
    ControlOutcome {
        u,
        constraint_active: true,
        feasible: true,
    }
}

/// Exact minimizer of `|u - r|^2` over `{u in box : a . u <= rhs}`.
///
/// Candidates: the box projection (half-plane inactive), the projection onto
/// the boundary line, the line's intersections with the four box edges, and
/// the admissible box vertices. Returns `None` when no candidate is admissible.
pub(crate) fn project_onto_halfplane_box(
    r: [f64; 2],
    a: [f64; 2],
    rhs: f64,
    bounds: &ControlBounds,
) -> Option<[f64; 2]> {
    let (lo, hi) = (bounds.u_min, bounds.u_max);
    let scale = 1.0 + rhs.abs() + (a[0].abs() + a[1].abs()) * lo.abs().max(hi.abs());
    let admissible = |u: &[f64; 2]| {
        let in_box = u.iter().all(|v| *v >= lo && *v <= hi);
        in_box && a[0] * u[0] + a[1] * u[1] <= rhs + HALFPLANE_TOL * scale
    };
    let clamp = |v: f64| v.clamp(lo, hi);

    let mut candidates: Vec<[f64; 2]> = Vec::with_capacity(9);
    candidates.push([clamp(r[0]), clamp(r[1])]);

    let norm2 = a[0] * a[0] + a[1] * a[1];
    if norm2 > 0.0 {
        let excess = (a[0] * r[0] + a[1] * r[1] - rhs) / norm2;
        candidates.push([r[0] - excess * a[0], r[1] - excess * a[1]]);
    }
    for fixed in 0..2 {
        let free = 1 - fixed;
        if a[free] == 0.0 {
            continue;
        }
        for bound in [lo, hi] {
            let mut u = [0.0; 2];
            u[fixed] = bound;
            u[free] = (rhs - a[fixed] * bound) / a[free];
            candidates.push(u);
        }
    }
    for u0 in [lo, hi] {
        for u1 in [lo, hi] {
            candidates.push([u0, u1]);
        }
    }

    let dist = |u: &[f64; 2]| (u[0] - r[0]).powi(2) + (u[1] - r[1]).powi(2);
    candidates
        .into_iter()
        .filter(admissible)
        .min_by(|p, q| dist(p).total_cmp(&dist(q)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety_index::phi;

    fn setup() -> (ArmGeometry, ControlBounds, SystemParams) {
        (
            ArmGeometry::default(),
            ControlBounds::default(),
            SystemParams::nominal(),
        )
    }

    #[test]
    fn zero_k_gives_constant_rate() {
        let (g, b, rho) = setup();
        let x = StateVector::new(0.4, 0.5, -0.5, 0.2);
        let k = SafetyIndexParams::first_order(0.0).unwrap();
        let (v, _) = min_phi_dot(&x, &k, &rho, &g, &b);
        let a = phi_dot_affine_with_gain(&x, 0.0, &rho, &g);
        assert_eq!(v, a.a0);
    }

    #[test]
    fn positive_angles_pick_upper_vertex() {
        let (g, b, rho) = setup();
        let x = StateVector::new(0.3, 1.0, 0.9, -0.9);
        let k = SafetyIndexParams::first_order(0.05).unwrap();
        let (_, u) = min_phi_dot(&x, &k, &rho, &g, &b);
        assert_eq!(u, ControlVector::new(100.0, 100.0));
        let x = StateVector::new(-0.3, 1.0, 0.9, -0.9);
        let (_, u) = min_phi_dot(&x, &k, &rho, &g, &b);
        assert_eq!(u, ControlVector::new(-100.0, 100.0));
    }

    #[test]
    fn safe_state_passes_reference() {
        let (g, b, rho) = setup();
        let x = StateVector::new(1.4, 1.4, 0.0, 0.0);
        let k = SafetyIndexParams::first_order(0.1).unwrap();
        let u_ref = ControlVector::new(3.0, -7.0);
        let out = ssa_filter(&x, &u_ref, &k, &rho, &g, &b, &SafeControlConfig::default());
        assert_eq!(out.u, u_ref);
        assert!(!out.constraint_active && out.feasible);

        let out = ssa_filter(
            &x,
            &ControlVector::new(300.0, -7.0),
            &k,
            &rho,
            &g,
            &b,
            &SafeControlConfig::default(),
        );
        assert_eq!(out.u, ControlVector::new(100.0, -7.0));
    }

    #[test]
    fn satisfied_halfplane_keeps_reference() {
        let (g, b, rho) = setup();
        // near the wall, moving away
        let x = StateVector::new(0.5, 0.6, 0.0, 0.0);
        let k = SafetyIndexParams::first_order(0.1).unwrap();
        assert!(phi(&x, &k, &g) >= 0.0);
        let u_ref = ControlVector::new(80.0, 80.0);
        let out = ssa_filter(&x, &u_ref, &k, &rho, &g, &b, &SafeControlConfig::default());
        assert!(out.constraint_active && out.feasible);
        assert_eq!(out.u, u_ref);
    }

    #[test]
    fn active_constraint_is_enforced_and_idempotent() {
        let (g, b, rho) = setup();
        let x = StateVector::new(0.5, 0.6, -0.8, -0.5);
        let k = SafetyIndexParams::first_order(0.05).unwrap();
        let cfg = SafeControlConfig::default();
        let u_ref = ControlVector::new(-50.0, 10.0);
        let out = ssa_filter(&x, &u_ref, &k, &rho, &g, &b, &cfg);
        assert!(out.feasible && out.constraint_active);
        let rate = phi_dot_affine_with_gain(&x, 0.05, &rho, &g).eval(out.u.u1, out.u.u2);
        assert!(rate <= -cfg.eta + 1e-9);
        let again = ssa_filter(&x, &out.u, &k, &rho, &g, &b, &cfg);
        assert_eq!(again.u, out.u);
    }

    #[test]
    fn relative_degree_failure_without_k() {
        let (g, b, rho) = setup();
        let zero = SafetyIndexParams::first_order(0.0).unwrap();
        // past the wall and still approaching
        let x = StateVector::new(0.3, 0.3, -0.5, -0.5);
        assert!(!is_feasible_state(&x, &zero, &rho, &g, &b, 0.1));
        let out = ssa_filter(&x, &ControlVector::default(), &zero, &rho, &g, &b, &SafeControlConfig::default());
        assert!(!out.feasible);
    }

    #[test]
    fn deep_safe_state_is_feasible() {
        let (g, b, rho) = setup();
        let x = StateVector::new(1.5, -1.5, 1.0, 1.0);
        let zero = SafetyIndexParams::first_order(0.0).unwrap();
        assert!(is_feasible_state(&x, &zero, &rho, &g, &b, 0.1));
    }
}
