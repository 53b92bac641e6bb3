//! Closed-loop goal tracking under changing dynamics.
//!
//! The arm visits a list of end-effector goals. A joint-space PD law produces
//! the reference input, the safe control law filters it, and the dynamics are
//! integrated with a fixed step. Each goal segment runs under its own entry of
//! the parameter schedule. With adaptation enabled the index is re-certified
//! at every switch before motion resumes; adaptation takes no simulated time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dga::{adapt, DgaConfig};
use crate::dynamics::{
    step, ArmGeometry, ControlBounds, ControlVector, StateVector, SystemParams, THETA_MAX,
    THETA_MIN,
};
use crate::error::{Error, Result};
use crate::io::Certificate;
use crate::safe_control::{ssa_filter, SafeControlConfig};
use crate::safety_index::{phi, phi0, SafetyIndexParams};
use crate::sos::Multipliers;

/// End-effector target, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
}

impl Goal {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub initial_state: StateVector,
    pub goals: Vec<Goal>,
    /// Parameters in force while heading to the goal with the same index.
    pub rho_schedule: Vec<SystemParams>,
    pub adapt: bool,
    /// With the wall disabled the index is always negative.
    pub wall: bool,
    pub dt: f64,
    /// Simulated seconds allowed per goal.
    pub max_time_per_goal: f64,
    pub goal_tolerance: f64,
    pub kp: f64,
    pub kd: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        let deg = |d: f64| d.to_radians();
        Self {
            initial_state: StateVector::new(deg(80.0), deg(40.0), 0.0, 0.0),
            goals: vec![Goal::new(1.3, 1.2), Goal::new(1.45, 1.1), Goal::new(1.0, 1.5)],
            rho_schedule: [1.0, 0.8, 0.6]
                .into_iter()
                .map(SystemParams::symmetric_gain)
                .collect(),
            adapt: true,
            wall: true,
            dt: 1e-3,
            max_time_per_goal: 20.0,
            goal_tolerance: 0.02,
            kp: 25.0,
            kd: 10.0,
        }
    }
}

impl Scenario {
    pub fn validate(&self, geom: &ArmGeometry) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("max_time_per_goal", self.max_time_per_goal)?;
        positive("goal_tolerance", self.goal_tolerance)?;
        if !(self.kp >= 0.0 && self.kd >= 0.0 && self.kp.is_finite() && self.kd.is_finite()) {
            return Err(Error::InvalidParameter("kp and kd must be finite and >= 0".into()));
        }
        if self.goals.is_empty() {
            return Err(Error::InvalidParameter("scenario needs at least one goal".into()));
        }
        if self.rho_schedule.len() != self.goals.len() {
            return Err(Error::InvalidParameter(format!(
                "rho_schedule has {} entries for {} goals",
                self.rho_schedule.len(),
                self.goals.len()
            )));
        }
        for rho in &self.rho_schedule {
            rho.validate()?;
        }
        for g in &self.goals {
            inverse_kinematics(g, geom)?;
        }
        if !self.initial_state.is_finite() || !self.initial_state.angles_in_limits() {
            return Err(Error::InvalidParameter(format!(
                "initial state {:?} is outside the joint limits",
                self.initial_state
            )));
        }
        Ok(())
    }

    fn max_steps_per_goal(&self) -> u64 {
        (self.max_time_per_goal / self.dt).ceil() as u64
    }
}

fn clamp_angle(theta: f64) -> f64 {
    let mag = theta.abs().clamp(THETA_MIN, THETA_MAX);
    if theta < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Absolute joint angles placing the end effector at `goal`, elbow up, clamped
/// into the joint limits.
pub fn inverse_kinematics(goal: &Goal, geom: &ArmGeometry) -> Result<[f64; 2]> {
    let (l1, l2) = (geom.l1, geom.l2);
    let r = goal.x.hypot(goal.y);
    if !r.is_finite() || r > l1 + l2 || r < (l1 - l2).abs() || r == 0.0 {
        return Err(Error::UnreachableGoal(goal.x, goal.y));
    }
    let cos_a = ((r * r + l1 * l1 - l2 * l2) / (2.0 * l1 * r)).clamp(-1.0, 1.0);
    let theta1 = goal.y.atan2(goal.x) + cos_a.acos();
    let theta2 = (goal.y - l1 * theta1.sin()).atan2(goal.x - l1 * theta1.cos());
    Ok([clamp_angle(theta1), clamp_angle(theta2)])
}

/// Joint-space PD toward the inverse-kinematics setpoint, clamped to the box.
pub fn nominal_controller(
    x: &StateVector,
    goal: &Goal,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    kp: f64,
    kd: f64,
) -> Result<ControlVector> {
    let target = inverse_kinematics(goal, geom)?;
    let theta = x.theta();
    let dtheta = x.dtheta();
    let u = ControlVector::from_array(std::array::from_fn(|j| {
        kp * (target[j] - theta[j]) - kd * dtheta[j]
    }));
    Ok(bounds.clamp(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Completed,
    InfeasibleEncountered,
    WallViolation,
    Timeout,
}

impl TerminalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::InfeasibleEncountered => "infeasible_encountered",
            Self::WallViolation => "wall_violation",
            Self::Timeout => "timeout",
        }
    }

    pub fn is_safe(self) -> bool {
        matches!(self, Self::Completed | Self::Timeout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub t: f64,
    pub goal: usize,
    pub x: StateVector,
    pub u_ref: ControlVector,
    pub u: ControlVector,
    pub phi0: f64,
    pub phi: f64,
    pub feasible: bool,
    pub rho: SystemParams,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationEvent {
    pub tick: u64,
    pub goal: usize,
    pub rho_from: SystemParams,
    pub rho_to: SystemParams,
    pub k_before: f64,
    pub k_after: f64,
    pub iterations: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub status: TerminalStatus,
    pub adapt: bool,
    pub goals_reached: usize,
    pub ticks: Vec<Tick>,
    pub adaptations: Vec<AdaptationEvent>,
    /// Ticks where `phi0 > 0`.
    pub wall_violations: usize,
    /// Ticks with a joint speed above the certified range.
    pub velocity_warnings: usize,
}

impl TrajectoryLog {
    pub fn infeasible_ticks(&self) -> usize {
        self.ticks.iter().filter(|t| !t.feasible).count()
    }
}

struct Index {
    k: f64,
    multipliers: [Multipliers; 4],
    rho: SystemParams,
}

/// Runs the scenario to a terminal status. Failures are statuses, not errors;
/// the only error is an invalid scenario.
pub fn run_scenario(scn: &Scenario, cert: &Certificate, dga: &DgaConfig) -> Result<TrajectoryLog> {
    let geom = cert.geometry;
    scn.validate(&geom)?;
    let bounds = cert.bounds;
    let ctrl = SafeControlConfig { eta: cert.eta };
    // the index sees a wall at infinity when the wall is disabled
    let sensed = ArmGeometry {
        d_max: if scn.wall { geom.d_max } else { f64::INFINITY },
        ..geom
    };

    let mut index = Index {
        k: cert.k,
        multipliers: cert.multipliers,
        rho: cert.rho,
    };
    let mut log = TrajectoryLog {
        status: TerminalStatus::Timeout,
        adapt: scn.adapt,
        goals_reached: 0,
        ticks: Vec::new(),
        adaptations: Vec::new(),
        wall_violations: 0,
        velocity_warnings: 0,
    };
    let mut x = scn.initial_state;
    let mut tick: u64 = 0;

    for (g, (goal, rho)) in scn.goals.iter().zip(&scn.rho_schedule).enumerate() {
        if scn.adapt && *rho != index.rho {
            let (k_before, rho_from) = (index.k, index.rho);
            let event = match adapt(
                index.k,
                index.multipliers,
                rho,
                &geom,
                &bounds,
                cert.eta,
                dga,
                None,
            ) {
                Ok(a) => {
                    index.k = a.k;
                    index.multipliers = a.multipliers;
                    index.rho = *rho;
                    AdaptationEvent {
                        tick,
                        goal: g,
                        rho_from,
                        rho_to: *rho,
                        k_before,
                        k_after: a.k,
                        iterations: Some(a.iterations),
                        error: None,
                    }
                }
                Err(e) => AdaptationEvent {
                    tick,
                    goal: g,
                    rho_from,
                    rho_to: *rho,
                    k_before,
                    k_after: k_before,
                    iterations: None,
                    error: Some(e.to_string()),
                },
            };
            log.adaptations.push(event);
        }
        let k = SafetyIndexParams::first_order(index.k)?;

        let mut reached = false;
        for _ in 0..scn.max_steps_per_goal() {
            let (ex, ey) = geom.end_effector(&x);
            if (ex - goal.x).hypot(ey - goal.y) < scn.goal_tolerance {
                reached = true;
                break;
            }
            let u_ref = nominal_controller(&x, goal, &geom, &bounds, scn.kp, scn.kd)?;
            let out = ssa_filter(&x, &u_ref, &k, rho, &sensed, &bounds, &ctrl);
            let p0 = phi0(&x, &sensed);
            log.ticks.push(Tick {
                t: tick as f64 * scn.dt,
                goal: g,
                x,
                u_ref,
                u: out.u,
                phi0: p0,
                phi: phi(&x, &k, &sensed),
                feasible: out.feasible,
                rho: *rho,
                k: index.k,
            });
            if !x.velocities_in_limits() {
                log.velocity_warnings += 1;
            }
            if p0 > 0.0 {
                log.wall_violations += 1;
                log.status = TerminalStatus::WallViolation;
                return Ok(log);
            }
            if !out.feasible {
                log.status = TerminalStatus::InfeasibleEncountered;
                return Ok(log);
            }
            x = step(&x, &out.u, rho, scn.dt);
            tick += 1;
        }
        if !reached {
            log.status = TerminalStatus::Timeout;
            return Ok(log);
        }
        log.goals_reached += 1;
    }
    log.status = TerminalStatus::Completed;
    Ok(log)
}

#[derive(Serialize)]
struct TickRow {
    t: f64,
    goal: usize,
    theta1: f64,
    theta2: f64,
    dtheta1: f64,
    dtheta2: f64,
    u_ref1: f64,
    u_ref2: f64,
    u1: f64,
    u2: f64,
    phi0: f64,
    phi: f64,
    feasible: bool,
    c1: f64,
    c2: f64,
    b1: f64,
    b2: f64,
    k: f64,
}

/// `trajectory.csv`, one row per tick.
pub fn write_trajectory_csv(path: &Path, log: &TrajectoryLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for t in &log.ticks {
        w.serialize(TickRow {
            t: t.t,
            goal: t.goal,
            theta1: t.x.theta1,
            theta2: t.x.theta2,
            dtheta1: t.x.dtheta1,
            dtheta2: t.x.dtheta2,
            u_ref1: t.u_ref.u1,
            u_ref2: t.u_ref.u2,
            u1: t.u.u1,
            u2: t.u.u2,
            phi0: t.phi0,
            phi: t.phi,
            feasible: t.feasible,
            c1: t.rho.c1,
            c2: t.rho.c2,
            b1: t.rho.b1,
            b2: t.rho.b2,
            k: t.k,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    status: TerminalStatus,
    adapt: bool,
    goals_reached: usize,
    goals: &'a [Goal],
    ticks: usize,
    duration_s: f64,
    wall_violations: usize,
    infeasible_ticks: usize,
    velocity_warnings: usize,
    adaptations: &'a [AdaptationEvent],
    final_state: Option<StateVector>,
}

/// `trajectory.json`: status and per-run totals without the tick series.
pub fn write_trajectory_json(path: &Path, scn: &Scenario, log: &TrajectoryLog) -> Result<()> {
    let last = log.ticks.last();
    let summary = Summary {
        status: log.status,
        adapt: log.adapt,
        goals_reached: log.goals_reached,
        goals: &scn.goals,
        ticks: log.ticks.len(),
        duration_s: last.map_or(0.0, |t| t.t + scn.dt),
        wall_violations: log.wall_violations,
        infeasible_ticks: log.infeasible_ticks(),
        velocity_warnings: log.velocity_warnings,
        adaptations: &log.adaptations,
        final_state: last.map(|t| t.x),
    };
    let mut s = serde_json::to_string_pretty(&summary)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// End-effector path for plotting, one `t, x, y` row per tick.
pub fn write_path_csv(path: &Path, geom: &ArmGeometry, log: &TrajectoryLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "y", "goal"])?;
    for t in &log.ticks {
        let (ex, ey) = geom.end_effector(&t.x);
        w.serialize((t.t, ex, ey, t.goal))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ArmGeometry {
        ArmGeometry::default()
    }

    #[test]
    fn ik_places_end_effector_on_goal() {
        let g = geom();
        for goal in Scenario::default().goals {
            let [t1, t2] = inverse_kinematics(&goal, &g).unwrap();
            let (ex, ey) = g.end_effector(&StateVector::new(t1, t2, 0.0, 0.0));
            assert!((ex - goal.x).abs() < 1e-12 && (ey - goal.y).abs() < 1e-12);
            assert!(t1 > t2, "elbow-up puts the first link higher");
        }
    }

    #[test]
    fn pd_is_zero_at_setpoint() {
        let g = geom();
        let goal = Goal::new(1.3, 1.2);
        let [t1, t2] = inverse_kinematics(&goal, &g).unwrap();
        let x = StateVector::new(t1, t2, 0.0, 0.0);
        let u = nominal_controller(&x, &goal, &g, &ControlBounds::default(), 25.0, 10.0).unwrap();
        assert_eq!(u, ControlVector::new(0.0, 0.0));
    }

    #[test]
    fn pd_output_is_clamped() {
        let g = geom();
        let b = ControlBounds::new(-1.0, 1.0).unwrap();
        let x = StateVector::new(1.5, 1.5, -1.0, 1.0);
        let u = nominal_controller(&x, &Goal::new(1.0, 0.5), &g, &b, 25.0, 10.0).unwrap();
        assert!(b.contains(&u));
    }

    #[test]
    fn unreachable_goal_is_rejected() {
        let g = geom();
        assert!(matches!(
            inverse_kinematics(&Goal::new(3.0, 0.0), &g),
            Err(Error::UnreachableGoal(..))
        ));
        let mut scn = Scenario::default();
        scn.goals[0] = Goal::new(0.0, 2.5);
        assert!(scn.validate(&g).is_err());
    }

    #[test]
    fn schedule_length_must_match_goals() {
        let mut scn = Scenario::default();
        scn.rho_schedule.pop();
        assert!(scn.validate(&geom()).is_err());
    }
}
