//! Sparse multivariate polynomials over a fixed variable set.
//!
//! Variables cover the lifted state (`y_j`, `z_j`, `alpha_j`, `beta_j`) and
//! the certificate parameters (`k` and the eleven multipliers), so one
//! expansion yields both the monomial structure in the state and the
//! symbolic dependence of every coefficient on the parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Number of lifted state variables.
pub const N_STATE_VARS: usize = 8;
/// Number of certificate parameters: `k`, `pp1`, `pp2`, `p1..p9`.
pub const N_PARAMS: usize = 12;
pub const N_VARS: usize = N_STATE_VARS + N_PARAMS;

/// Variables, in the order they occupy in a [`Monomial`].
///
/// The first eight follow the monomial basis `[1, y1, z1, a1, b1, y2, z2, a2, b2]`
/// so that state variable `v` sits at basis position `v + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Var {
    Y1 = 0,
    Z1,
    Alpha1,
    Beta1,
    Y2,
    Z2,
    Alpha2,
    Beta2,
    K,
    Pp1,
    Pp2,
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
}

impl Var {
    pub const ALL: [Var; N_VARS] = [
        Var::Y1,
        Var::Z1,
        Var::Alpha1,
        Var::Beta1,
        Var::Y2,
        Var::Z2,
        Var::Alpha2,
        Var::Beta2,
        Var::K,
        Var::Pp1,
        Var::Pp2,
        Var::P1,
        Var::P2,
        Var::P3,
        Var::P4,
        Var::P5,
        Var::P6,
        Var::P7,
        Var::P8,
        Var::P9,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_state(self) -> bool {
        self.index() < N_STATE_VARS
    }

    /// Position in the parameter vector `[k, pp1, pp2, p1..p9]`.
    pub fn param_index(self) -> Option<usize> {
        self.index().checked_sub(N_STATE_VARS)
    }

    pub fn from_param_index(i: usize) -> Var {
        Var::ALL[N_STATE_VARS + i]
    }

    /// The `gamma_n` multiplier variable, `n` in `1..=9`.
    pub fn gamma_multiplier(n: usize) -> Var {
        assert!((1..=9).contains(&n));
        Var::ALL[Var::P1.index() + n - 1]
    }

    pub fn name(self) -> &'static str {
        const NAMES: [&str; N_VARS] = [
            "y1", "z1", "a1", "b1", "y2", "z2", "a2", "b2", "k", "pp1", "pp2", "p1", "p2", "p3",
            "p4", "p5", "p6", "p7", "p8", "p9",
        ];
        NAMES[self.index()]
    }
}

/// Exponent vector over [`Var::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub [u8; N_VARS]);

impl Monomial {
    pub const ONE: Monomial = Monomial([0; N_VARS]);

    pub fn var(v: Var) -> Self {
        let mut e = [0; N_VARS];
        e[v.index()] = 1;
        Monomial(e)
    }

    pub fn exponent(&self, v: Var) -> u8 {
        self.0[v.index()]
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(std::array::from_fn(|i| self.0[i] + other.0[i]))
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|e| u32::from(*e)).sum()
    }

    pub fn state_degree(&self) -> u32 {
        self.0[..N_STATE_VARS].iter().map(|e| u32::from(*e)).sum()
    }

    /// Split into the state part and the parameter part.
    pub fn split(&self) -> (Monomial, Monomial) {
        let mut state = [0; N_VARS];
        let mut params = [0; N_VARS];
        state[..N_STATE_VARS].copy_from_slice(&self.0[..N_STATE_VARS]);
        params[N_STATE_VARS..].copy_from_slice(&self.0[N_STATE_VARS..]);
        (Monomial(state), Monomial(params))
    }

    pub fn eval(&self, point: &[f64; N_VARS]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(e, _)| **e > 0)
            .map(|(e, x)| x.powi(i32::from(*e)))
            .product()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in Var::ALL {
            let e = self.exponent(v);
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "{}", v.name())?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        if first {
            write!(f, "1")?;
        }
        Ok(())
    }
}

/// Sparse polynomial with real coefficients. Zero terms are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::term(c, Monomial::ONE)
    }

    pub fn var(v: Var) -> Self {
        Self::term(1.0, Monomial::var(v))
    }

    pub fn term(c: f64, m: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(c, m);
        p
    }

    pub fn add_term(&mut self, c: f64, m: Monomial) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero();
        for (m, c) in self.terms() {
            out.add_term(c * s, *m);
        }
        out
    }

    pub fn eval(&self, point: &[f64; N_VARS]) -> f64 {
        self.terms().map(|(m, c)| c * m.eval(point)).sum()
    }

    /// Partial derivative with respect to `v`.
    pub fn derivative(&self, v: Var) -> Self {
        let mut out = Self::zero();
        for (m, c) in self.terms() {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let mut reduced = *m;
            reduced.0[v.index()] -= 1;
            out.add_term(c * f64::from(e), reduced);
        }
        out
    }

    /// Substitute a numeric value for `v`.
    pub fn substitute(&self, v: Var, value: f64) -> Self {
        let mut out = Self::zero();
        for (m, c) in self.terms() {
            let e = m.exponent(v);
            let mut reduced = *m;
            reduced.0[v.index()] = 0;
            out.add_term(c * value.powi(i32::from(e)), reduced);
        }
        out
    }

    /// Whether any term involves `v`.
    pub fn involves(&self, v: Var) -> bool {
        self.terms.keys().any(|m| m.exponent(v) > 0)
    }

    pub fn max_state_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::state_degree).max().unwrap_or(0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            if i > 0 {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            write!(f, "{}*{}", c.abs(), m)?;
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in rhs.terms() {
            out.add_term(c, *m);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in rhs.terms() {
            out.add_term(-c, *m);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in self.terms() {
            for (mb, cb) in rhs.terms() {
                out.add_term(ca * cb, ma.mul(mb));
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        -&self
    }
}

/// A polynomial in the certificate parameters only, flattened for fast
/// repeated evaluation.
#[derive(Debug, Clone, Default)]
pub(crate) struct CompiledParamPoly {
    terms: Vec<(f64, [u8; N_PARAMS])>,
}

impl CompiledParamPoly {
    /// Panics if `p` involves a state variable.
    pub fn compile(p: &Polynomial) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                assert_eq!(m.state_degree(), 0, "state variable in parameter polynomial");
                let mut e = [0; N_PARAMS];
                e.copy_from_slice(&m.0[N_STATE_VARS..]);
                (c, e)
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, params: &[f64; N_PARAMS]) -> f64 {
        let mut acc = 0.0;
        for (c, e) in &self.terms {
            let mut t = *c;
            for (x, p) in e.iter().zip(params) {
                match x {
                    0 => {}
                    1 => t *= p,
                    n => t *= p.powi(i32::from(*n)),
                }
            }
            acc += t;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_cancellation() {
        let y = Polynomial::var(Var::Y1);
        let one = Polynomial::constant(1.0);
        let p = &(&one - &y) * &(&one + &y);
        // 1 - y^2
        assert_eq!(p.len(), 2);
        let mut y2 = Monomial::ONE;
        y2.0[Var::Y1.index()] = 2;
        assert_eq!(p.coefficient(&Monomial::ONE), 1.0);
        assert_eq!(p.coefficient(&y2), -1.0);
        assert!((&p - &p).is_zero());
    }

    #[test]
    fn derivative_and_substitution() {
        let k = Polynomial::var(Var::K);
        let p1 = Polynomial::var(Var::P1);
        let a = Polynomial::var(Var::Alpha1);
        let p = &(&k * &p1) * &a.scale(3.0);
        let d = p.derivative(Var::K);
        assert_eq!(d, (&p1 * &a).scale(3.0));
        let s = p.substitute(Var::K, 2.0);
        assert_eq!(s, (&p1 * &a).scale(6.0));
        assert!(!s.involves(Var::K));
        assert!(p.derivative(Var::P5).is_zero());
    }

    #[test]
    fn compiled_matches_tree_evaluation() {
        let k = Polynomial::var(Var::K);
        let p = &(&k * &Polynomial::var(Var::P4)) + &Polynomial::var(Var::Pp2).scale(-0.5);
        let p = &p + &(&k * &k).scale(2.0);
        let compiled = CompiledParamPoly::compile(&p);
        let params: [f64; N_PARAMS] = std::array::from_fn(|i| 0.3 + i as f64);
        let mut point = [0.0; N_VARS];
        point[N_STATE_VARS..].copy_from_slice(&params);
        assert!((compiled.eval(&params) - p.eval(&point)).abs() < 1e-12);
    }

    #[test]
    fn display_is_readable() {
        let p = &Polynomial::constant(1.0) - &(&Polynomial::var(Var::Y1) * &Polynomial::var(Var::Y1));
        assert_eq!(p.to_string(), "1*1 - 1*y1^2");
    }
}
