//! Refute-set polynomials and the parametric coefficient matrices.
//!
//! For each sign assignment of the joint angles the refute set collects the
//! negated feasibility condition together with the state limits, written in
//! the lifted variables `y_j = dtheta_j`, `z_j = dtheta_j^2`,
//! `alpha_j = sin(theta_j)`, `beta_j = cos(theta_j)`:
//!
//! ```text
//! gamma1 = sum_j [-l_j a_j y_j - k l_j b_j z_j - k l_j (c_j u~_j + b_j) a_j] + eta >= 0
//! gamma2 = I1 a1 - sin(pi/18) >= 0      gamma6 = I2 a2 - sin(pi/18) >= 0
//! gamma3 = -I1 a1 + 1 >= 0              gamma7 = -I2 a2 + 1 >= 0
//! gamma4 = 1 - y1^2 >= 0                gamma8 = 1 - y2^2 >= 0
//! gamma5 = -z1^2 + z1 >= 0              gamma9 = -z2^2 + z2 >= 0
//! zeta1  = a1^2 + b1^2 - 1 = 0          zeta2  = a2^2 + b2^2 - 1 = 0
//! ```
//!
//! The set is empty when
//! `p0 = -1 - pp1 zeta1 - pp2 zeta2 - sum_n p_n gamma_n` is a sum of squares,
//! certified by `p0 = x^T Q x` with `Q >= 0` over the basis
//! `x = [1, y1, z1, a1, b1, y2, z2, a2, b2]`.
//!
//! `Q` is obtained by expanding `p0` symbolically with `k` and the
//! multipliers kept as variables. Squares of basis elements land on the
//! diagonal and cross terms are split evenly across the two symmetric
//! positions; every entry is then a polynomial in the parameters whose
//! derivatives drive the adaptation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::matrix::{CertificateMatrix, DIM};
use super::poly::{CompiledParamPoly, Monomial, Polynomial, Var, N_PARAMS, N_STATE_VARS, N_VARS};
use crate::dynamics::{ArmGeometry, ControlBounds, StateVector, SystemParams};
use crate::error::{Error, Result};

/// Number of multipliers per sign assignment: `pp1, pp2, p1..p9`.
pub const N_MULTIPLIERS: usize = 11;

/// Lifted state `(y, z, alpha, beta)` per joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedState {
    pub y1: f64,
    pub z1: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub y2: f64,
    pub z2: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl LiftedState {
    pub fn from_state(x: &StateVector) -> Self {
        let (s1, c1) = x.theta1.sin_cos();
        let (s2, c2) = x.theta2.sin_cos();
        Self {
            y1: x.dtheta1,
            z1: x.dtheta1 * x.dtheta1,
            alpha1: s1,
            beta1: c1,
            y2: x.dtheta2,
            z2: x.dtheta2 * x.dtheta2,
            alpha2: s2,
            beta2: c2,
        }
    }

    /// `[1, y1, z1, a1, b1, y2, z2, a2, b2]`.
    pub fn basis(&self) -> [f64; DIM] {
        [
            1.0,
            self.y1,
            self.z1,
            self.alpha1,
            self.beta1,
            self.y2,
            self.z2,
            self.alpha2,
            self.beta2,
        ]
    }

    /// Values of the state variables in [`Var`] order.
    pub fn as_vars(&self) -> [f64; N_STATE_VARS] {
        let b = self.basis();
        std::array::from_fn(|i| b[i + 1])
    }
}

/// Sign pattern `(I1, I2)` of the joint angles, one of four.
///
/// Index 1..=4 enumerates `(+,+), (+,-), (-,+), (-,-)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignAssignment {
    index: usize,
}

impl SignAssignment {
    pub const ALL: [SignAssignment; 4] = [
        SignAssignment { index: 1 },
        SignAssignment { index: 2 },
        SignAssignment { index: 3 },
        SignAssignment { index: 4 },
    ];

    pub fn from_index(index: usize) -> Result<Self> {
        if !(1..=4).contains(&index) {
            return Err(Error::InvalidParameter(format!(
                "sign assignment index must be in 1..=4, got {index}"
            )));
        }
        Ok(Self { index })
    }

    pub fn from_signs(i1: i8, i2: i8) -> Result<Self> {
        let bit = |s: i8| match s {
            1 => Ok(0),
            -1 => Ok(1),
            _ => Err(Error::InvalidParameter(format!("sign must be +1 or -1, got {s}"))),
        };
        Ok(Self {
            index: 1 + 2 * bit(i1)? + bit(i2)?,
        })
    }

    /// Assignment matching the signs of the state's joint angles.
    pub fn for_state(x: &StateVector) -> Self {
        let s = |t: f64| if t >= 0.0 { 1 } else { -1 };
        Self::from_signs(s(x.theta1), s(x.theta2)).expect("signs are +-1")
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn signs(&self) -> [f64; 2] {
        let i = self.index - 1;
        let s = |bit: usize| if bit == 0 { 1.0 } else { -1.0 };
        [s(i >> 1), s(i & 1)]
    }

    /// The minimizing input per joint: `u_max` for a positive sign.
    pub fn extreme_inputs(&self, bounds: &ControlBounds) -> [f64; 2] {
        self.signs()
            .map(|s| if s > 0.0 { bounds.u_max } else { bounds.u_min })
    }
}

/// `pp1, pp2` (free) and `p1..p9` (non-negative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multipliers {
    pub pp: [f64; 2],
    pub p: [f64; 9],
}

impl Default for Multipliers {
    fn default() -> Self {
        Self::zeros()
    }
}

impl Multipliers {
    pub const fn zeros() -> Self {
        Self {
            pp: [0.0; 2],
            p: [0.0; 9],
        }
    }

    /// `[pp1, pp2, p1, .., p9]`.
    pub fn to_array(&self) -> [f64; N_MULTIPLIERS] {
        let mut out = [0.0; N_MULTIPLIERS];
        out[..2].copy_from_slice(&self.pp);
        out[2..].copy_from_slice(&self.p);
        out
    }

    pub fn from_array(a: [f64; N_MULTIPLIERS]) -> Self {
        let mut m = Self::zeros();
        m.pp.copy_from_slice(&a[..2]);
        m.p.copy_from_slice(&a[2..]);
        m
    }

    pub fn validate(&self) -> Result<()> {
        if !self.to_array().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("multipliers must be finite".into()));
        }
        if let Some(n) = self.p.iter().position(|v| *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "multiplier p{} must be >= 0, got {}",
                n + 1,
                self.p[n]
            )));
        }
        Ok(())
    }

    /// Clamp `p1..p9` onto the non-negative orthant.
    pub fn project(&mut self) {
        for v in &mut self.p {
            *v = v.max(0.0);
        }
    }
}

impl Serialize for Multipliers {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Multipliers {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[f64; N_MULTIPLIERS]>::deserialize(d)?;
        let m = Multipliers::from_array(a);
        m.validate().map_err(serde::de::Error::custom)?;
        Ok(m)
    }
}

/// Parameter vector `[k, pp1, pp2, p1..p9]`.
pub type ParamVector = [f64; N_PARAMS];

pub fn param_vector(k: f64, m: &Multipliers) -> ParamVector {
    let mut out = [0.0; N_PARAMS];
    out[0] = k;
    out[1..].copy_from_slice(&m.to_array());
    out
}

/// The eleven refute-set polynomials for one sign assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RefuteSet {
    /// `gamma1..gamma9`, each constrained `>= 0`.
    pub gamma: [Polynomial; 9],
    /// `zeta1, zeta2`, each constrained `= 0`.
    pub zeta: [Polynomial; 2],
}

impl RefuteSet {
    pub fn substitute(&self, v: Var, value: f64) -> RefuteSet {
        RefuteSet {
            gamma: std::array::from_fn(|n| self.gamma[n].substitute(v, value)),
            zeta: std::array::from_fn(|n| self.zeta[n].substitute(v, value)),
        }
    }
}

/// Refute set with `k` kept symbolic as [`Var::K`].
pub fn symbolic_refute_set(
    assignment: SignAssignment,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
) -> RefuteSet {
    let v = Polynomial::var;
    let c = Polynomial::constant;
    let k = v(Var::K);
    let signs = assignment.signs();
    let u_tilde = assignment.extreme_inputs(bounds);
    let l = geom.lengths();
    let gain = rho.gain();
    let bias = rho.bias();
    let joint_vars = [
        (Var::Y1, Var::Z1, Var::Alpha1, Var::Beta1),
        (Var::Y2, Var::Z2, Var::Alpha2, Var::Beta2),
    ];
    let sin_min = (PI / 18.0).sin();

    let mut gamma1 = c(eta);
    let mut per_joint = Vec::with_capacity(2);
    for j in 0..2 {
        let (y, z, a, b) = joint_vars[j];
        let (y, z, a, b) = (v(y), v(z), v(a), v(b));
        let accel = gain[j] * u_tilde[j] + bias[j];
        gamma1 = gamma1 - (&a * &y).scale(l[j]);
        gamma1 = gamma1 - (&k * &(&b * &z)).scale(l[j]);
        gamma1 = gamma1 - (&k * &a).scale(l[j] * accel);

        let min_angle = a.scale(signs[j]) - c(sin_min);
        let max_angle = c(1.0) - a.scale(signs[j]);
        let velocity = c(1.0) - &y * &y;
        let velocity_sq = &z - &(&z * &z);
        let trig = &(&a * &a) + &(&b * &b) - c(1.0);
        per_joint.push(([min_angle, max_angle, velocity, velocity_sq], trig));
    }
    let [(g1, zeta1), (g2, zeta2)]: [_; 2] = per_joint.try_into().expect("two joints");
    let [g2a, g3, g4, g5] = g1;
    let [g6, g7, g8, g9] = g2;
    RefuteSet {
        gamma: [gamma1, g2a, g3, g4, g5, g6, g7, g8, g9],
        zeta: [zeta1, zeta2],
    }
}

/// Refute set at a concrete `k`, as polynomials in the lifted variables.
pub fn refute_polynomials(
    assignment: SignAssignment,
    k: f64,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
) -> RefuteSet {
    symbolic_refute_set(assignment, rho, geom, bounds, eta).substitute(Var::K, k)
}

/// `p0 = -1 - pp1 zeta1 - pp2 zeta2 - sum_n p_n gamma_n` with `k` and the
/// multipliers symbolic.
pub fn symbolic_certificate_polynomial(refute: &RefuteSet) -> Polynomial {
    let mut p0 = Polynomial::constant(-1.0);
    p0 = p0 - &Polynomial::var(Var::Pp1) * &refute.zeta[0];
    p0 = p0 - &Polynomial::var(Var::Pp2) * &refute.zeta[1];
    for (n, g) in refute.gamma.iter().enumerate() {
        p0 = p0 - &Polynomial::var(Var::gamma_multiplier(n + 1)) * g;
    }
    p0
}

/// Basis positions `(m, n)`, `m <= n`, whose product is the state monomial.
fn basis_pair(state: &Monomial) -> Option<(usize, usize)> {
    let mut positions = Vec::with_capacity(2);
    for (i, e) in state.0[..N_STATE_VARS].iter().enumerate() {
        for _ in 0..*e {
            positions.push(i + 1);
        }
    }
    match positions.as_slice() {
        [] => Some((0, 0)),
        [a] => Some((0, *a)),
        [a, b] => Some((*a.min(b), *a.max(b))),
        _ => None,
    }
}

/// Symbolic coefficient matrix `Q(k, p)` for one sign assignment at fixed
/// dynamics parameters, with pre-compiled entry and derivative expressions.
#[derive(Debug, Clone)]
pub struct ParametricCertificate {
    assignment: SignAssignment,
    symbolic: Vec<Vec<Polynomial>>,
    entries: Vec<(usize, usize, CompiledParamPoly)>,
    derivatives: Vec<Vec<(usize, usize, CompiledParamPoly)>>,
}

impl ParametricCertificate {
    pub fn new(
        assignment: SignAssignment,
        rho: &SystemParams,
        geom: &ArmGeometry,
        bounds: &ControlBounds,
        eta: f64,
    ) -> Result<Self> {
        let refute = symbolic_refute_set(assignment, rho, geom, bounds, eta);
        let p0 = symbolic_certificate_polynomial(&refute);
        Self::from_polynomial(assignment, &p0)
    }

    /// Distribute the terms of `p0` over the 9x9 matrix.
    pub fn from_polynomial(assignment: SignAssignment, p0: &Polynomial) -> Result<Self> {
        let mut symbolic = vec![vec![Polynomial::zero(); DIM]; DIM];
        for (m, c) in p0.terms() {
            let (state, params) = m.split();
            let (r, s) = basis_pair(&state)
                .ok_or_else(|| Error::UnrepresentableMonomial(state.to_string()))?;
            if r == s {
                symbolic[r][r].add_term(c, params);
            } else {
                symbolic[r][s].add_term(0.5 * c, params);
                symbolic[s][r].add_term(0.5 * c, params);
            }
        }
        let mut entries = Vec::new();
        let mut derivatives = vec![Vec::new(); N_PARAMS];
        #[allow(clippy::needless_range_loop)]
        for r in 0..DIM {
            for s in r..DIM {
                let e = &symbolic[r][s];
                if e.is_zero() {
                    continue;
                }
                entries.push((r, s, CompiledParamPoly::compile(e)));
                for (pi, d) in derivatives.iter_mut().enumerate() {
                    let de = e.derivative(Var::from_param_index(pi));
                    if !de.is_zero() {
                        d.push((r, s, CompiledParamPoly::compile(&de)));
                    }
                }
            }
        }
        Ok(Self {
            assignment,
            symbolic,
            entries,
            derivatives,
        })
    }

    pub fn assignment(&self) -> SignAssignment {
        self.assignment
    }

    /// Symbolic entry `[Q]_{r,s}` (0-based) as a polynomial in the parameters.
    pub fn entry(&self, r: usize, s: usize) -> &Polynomial {
        &self.symbolic[r][s]
    }

    pub fn eval(&self, params: &ParamVector) -> CertificateMatrix {
        let mut q = CertificateMatrix::zeros();
        for (r, s, p) in &self.entries {
            let v = p.eval(params);
            q.0[*r][*s] = v;
            q.0[*s][*r] = v;
        }
        q
    }

    pub fn eval_at(&self, k: f64, m: &Multipliers) -> CertificateMatrix {
        self.eval(&param_vector(k, m))
    }

    /// `dQ / d param` evaluated at `params`; `param` indexes `[k, pp1, pp2, p1..p9]`.
    pub fn derivative(&self, param: usize, params: &ParamVector) -> CertificateMatrix {
        let mut q = CertificateMatrix::zeros();
        for (r, s, p) in &self.derivatives[param] {
            let v = p.eval(params);
            q.0[*r][*s] = v;
            q.0[*s][*r] = v;
        }
        q
    }

    /// Non-zero `(r, s, dQ_rs / d param)` with `r <= s`.
    pub fn derivative_entries<'a>(
        &'a self,
        param: usize,
        params: &'a ParamVector,
    ) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        self.derivatives[param]
            .iter()
            .map(move |(r, s, p)| (*r, *s, p.eval(params)))
    }

    /// Entries `(r, s)`, `r <= s`, that depend on `param`.
    pub fn dependent_entries(&self, param: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.derivatives[param].iter().map(|(r, s, _)| (*r, *s))
    }
}

/// `Q_i(k, p, rho)` for one assignment.
pub fn assemble_q(
    assignment: SignAssignment,
    k: f64,
    multipliers: &Multipliers,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
) -> Result<CertificateMatrix> {
    multipliers.validate()?;
    let pc = ParametricCertificate::new(assignment, rho, geom, bounds, eta)?;
    Ok(pc.eval_at(k, multipliers))
}

/// `p0` evaluated at a lifted state through the polynomial expansion.
#[allow(clippy::too_many_arguments)]
pub fn certificate_polynomial_value(
    assignment: SignAssignment,
    k: f64,
    multipliers: &Multipliers,
    rho: &SystemParams,
    geom: &ArmGeometry,
    bounds: &ControlBounds,
    eta: f64,
    lifted: &LiftedState,
) -> f64 {
    let refute = symbolic_refute_set(assignment, rho, geom, bounds, eta);
    let p0 = symbolic_certificate_polynomial(&refute);
    let mut point = [0.0; N_VARS];
    point[..N_STATE_VARS].copy_from_slice(&lifted.as_vars());
    point[N_STATE_VARS..].copy_from_slice(&param_vector(k, multipliers));
    p0.eval(&point)
}
