//! Determinant gradient ascent (DGA).
//!
//! After the dynamics parameters change, the previously certified
//! `(k, p_1..p_4)` is used as a warm start. Each iteration finds the lowest
//! principal minor of every `Q_i`, differentiates it through the cofactor
//! expansion
//!
//! ```text
//! d det(A) / d t = sum_{m,n} C_mn dA_mn / d t
//! ```
//!
//! and steps along the (optionally normalized) gradient. The `k` gradient is
//! averaged over the four matrices; each multiplier block follows its own
//! matrix. `k` and `p1..p9` are clamped back onto the non-negative orthant
//! after every update.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ArmGeometry, ControlBounds, SystemParams};
use crate::error::{Error, Result};
use crate::sos::certificate::{param_vector, ParamVector, ParametricCertificate};
use crate::sos::minors::{cofactor_matrix, psd_status, submatrix, PsdStatus};
use crate::sos::poly::N_PARAMS;
use crate::sos::{CertificateMatrix, IndexSet, Multipliers, SignAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgaConfig {
    pub lambda_theta: f64,
    pub lambda_p: f64,
    pub max_iters: u64,
    /// Minors at or above `-tol` count as non-negative.
    pub tol: f64,
    pub normalize: bool,
}

impl Default for DgaConfig {
    fn default() -> Self {
        Self {
            lambda_theta: 1e-5,
            lambda_p: 1e-5,
            max_iters: 1_000_000,
            tol: crate::sos::DEFAULT_PSD_TOL,
            normalize: true,
        }
    }
}

impl DgaConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lambda_theta) || !positive(self.lambda_p) {
            return Err(Error::InvalidParameter(format!(
                "learning rates must be positive, got lambda_theta={}, lambda_p={}",
                self.lambda_theta, self.lambda_p
            )));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// The four parametric matrices for one set of dynamics parameters.
#[derive(Debug, Clone)]
pub struct CertificateProblem {
    rho: SystemParams,
    certificates: [ParametricCertificate; 4],
}

impl CertificateProblem {
    pub fn new(
        rho: &SystemParams,
        geom: &ArmGeometry,
        bounds: &ControlBounds,
        eta: f64,
    ) -> Result<Self> {
        rho.validate()?;
        let certs = SignAssignment::ALL
            .iter()
            .map(|a| ParametricCertificate::new(*a, rho, geom, bounds, eta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rho: *rho,
            certificates: certs.try_into().expect("four assignments"),
        })
    }

    pub fn rho(&self) -> &SystemParams {
        &self.rho
    }

    pub fn certificates(&self) -> &[ParametricCertificate; 4] {
        &self.certificates
    }

    pub fn matrices(&self, k: f64, multipliers: &[Multipliers; 4]) -> [CertificateMatrix; 4] {
        std::array::from_fn(|i| self.certificates[i].eval_at(k, &multipliers[i]))
    }

    pub fn statuses(&self, k: f64, multipliers: &[Multipliers; 4], tol: f64) -> [PsdStatus; 4] {
        self.matrices(k, multipliers).map(|q| psd_status(&q, tol))
    }

    pub fn is_certified(&self, k: f64, multipliers: &[Multipliers; 4], tol: f64) -> bool {
        self.statuses(k, multipliers, tol).iter().all(|s| s.is_psd)
    }
}

/// Gradient of `Det [Q]_{I,I}` with respect to every parameter
/// `[k, pp1, pp2, p1..p9]`.
pub fn minor_gradients(
    pc: &ParametricCertificate,
    params: &ParamVector,
    set: IndexSet,
) -> ParamVector {
    let q = pc.eval(params);
    let (sub, n) = submatrix(&q, set);
    let cof = cofactor_matrix(&sub, n);
    let idx = set.to_vec();
    let mut pos = [usize::MAX; crate::sos::DIM];
    for (local, global) in idx.iter().enumerate() {
        pos[*global] = local;
    }
    let mut grad = [0.0; N_PARAMS];
    for (param, g) in grad.iter_mut().enumerate() {
        for (r, s, d) in pc.derivative_entries(param, params) {
            let (lr, ls) = (pos[r], pos[s]);
            if lr == usize::MAX || ls == usize::MAX {
                continue;
            }
            *g += if r == s {
                cof[lr][lr] * d
            } else {
                (cof[lr][ls] + cof[ls][lr]) * d
            };
        }
    }
    grad
}

/// `d Det [Q]_{I,I} / d param` for one parameter index.
pub fn minor_gradient(
    pc: &ParametricCertificate,
    params: &ParamVector,
    set: IndexSet,
    wrt: usize,
) -> f64 {
    minor_gradients(pc, params, set)[wrt]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationState {
    pub k: f64,
    pub multipliers: [Multipliers; 4],
    pub rho_target: SystemParams,
    pub iterations: u64,
    /// Smallest minor over the four matrices, one value per step taken.
    pub history: Vec<f64>,
}

impl AdaptationState {
    pub fn new(k: f64, multipliers: [Multipliers; 4], rho_target: SystemParams) -> Self {
        Self {
            k,
            multipliers,
            rho_target,
            iterations: 0,
            history: Vec::new(),
        }
    }
}

/// One row of the optional convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub worst_minor: [f64; 4],
    pub k: f64,
}

fn normalized(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Applies one ascent update given the current statuses. Returns false, leaving
/// the state untouched, when every matrix already passes.
fn update(
    problem: &CertificateProblem,
    state: &mut AdaptationState,
    statuses: &[PsdStatus; 4],
    cfg: &DgaConfig,
) -> bool {
    if statuses.iter().all(|s| s.is_psd) {
        return false;
    }
    let mut delta_theta = 0.0;
    let mut delta_p = [[0.0; 11]; 4];
    for (i, pc) in problem.certificates.iter().enumerate() {
        let params = param_vector(state.k, &state.multipliers[i]);
        let grad = minor_gradients(pc, &params, statuses[i].worst_index_set);
        delta_theta += 0.25 * grad[0];
        delta_p[i].copy_from_slice(&grad[1..]);
    }
    if cfg.normalize {
        let mut t = [delta_theta];
        normalized(&mut t);
        delta_theta = t[0];
        delta_p.iter_mut().for_each(|d| normalized(d));
    }
    state.k = (state.k + cfg.lambda_theta * delta_theta).max(0.0);
    for (m, d) in state.multipliers.iter_mut().zip(&delta_p) {
        let mut a = m.to_array();
        for (x, dx) in a.iter_mut().zip(d) {
            *x += cfg.lambda_p * dx;
        }
        *m = Multipliers::from_array(a);
        m.project();
    }
    state.iterations += 1;
    state.history.push(
        statuses
            .iter()
            .map(|s| s.worst_value)
            .fold(f64::INFINITY, f64::min),
    );
    true
}

/// A single ascent step. An already certified state is returned unchanged.
pub fn dga_step(
    problem: &CertificateProblem,
    state: &AdaptationState,
    cfg: &DgaConfig,
) -> AdaptationState {
    let mut next = state.clone();
    let statuses = problem.statuses(state.k, &state.multipliers, cfg.tol);
    update(problem, &mut next, &statuses, cfg);
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub k: f64,
    pub multipliers: [Multipliers; 4],
    pub iterations: u64,
    pub wall_time: Duration,
}

/// Runs the ascent until all four matrices pass or the budget runs out.
///
/// When `trace` is given, one row is appended per evaluated iterate, including
/// the final one; it is left populated on failure.
pub fn run_dga(
    problem: &CertificateProblem,
    k: f64,
    multipliers: [Multipliers; 4],
    cfg: &DgaConfig,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<Adaptation> {
    cfg.validate()?;
    let start = Instant::now();
    let mut state = AdaptationState::new(k, multipliers, *problem.rho());
    match ascend(problem, &mut state, cfg, trace) {
        Ok(()) => Ok(Adaptation {
            k: state.k,
            multipliers: state.multipliers,
            iterations: state.iterations,
            wall_time: start.elapsed(),
        }),
        Err(worst_minor) => Err(Error::AdaptationDidNotConverge {
            iterations: state.iterations,
            worst_minor,
        }),
    }
}

/// Steps `state` in place until it is certified or `state.iterations`
/// reaches `cfg.max_iters`. On failure returns the final worst minor.
pub fn ascend(
    problem: &CertificateProblem,
    state: &mut AdaptationState,
    cfg: &DgaConfig,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> std::result::Result<(), f64> {
    loop {
        let statuses = problem.statuses(state.k, &state.multipliers, cfg.tol);
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow {
                iteration: state.iterations,
                worst_minor: statuses.map(|s| s.worst_value),
                k: state.k,
            });
        }
        if statuses.iter().all(|s| s.is_psd) {
            return Ok(());
        }
        if state.iterations >= cfg.max_iters {
            return Err(statuses
                .iter()
                .map(|s| s.worst_value)
                .fold(f64::INFINITY, f64::min));
        }
        update(problem, state, &statuses, cfg);
    }
}

/// Re-certifies `(k, multipliers)` for new dynamics parameters.
#[allow(clippy::too_many_arguments)]
pub fn adapt(
    k: f64,
    multipliers: [Multipliers; 4],
    rho_new: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
    cfg: &DgaConfig,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<Adaptation> {
    let problem = CertificateProblem::new(rho_new, geom, bounds, eta)?;
    run_dga(&problem, k, multipliers, cfg, trace)
}
