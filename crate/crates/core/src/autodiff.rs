//! Reverse-mode automatic differentiation on a scalar tape.
//!
//! Model code is written once against the [`Scalar`] trait. Evaluated with
//! `f64` it is a plain numeric function; evaluated with [`Var`] inside
//! [`grad`] every primitive records a [`TapeNode`] holding its local
//! partial derivatives, and one reverse sweep yields the full gradient.
//!
//! ```
//! use thermal_bayes::autodiff::{grad, Scalar};
//!
//! let g = grad(|x| x[0] * x[0] + x[1] * 3.0, &[2.0, 1.0]).unwrap();
//! assert_eq!(g.value, 7.0);
//! assert_eq!(g.gradient, vec![4.0, 3.0]);
//! ```
//!
//! The tape lives in thread-local storage, so distinct threads may
//! differentiate independent functions concurrently. Nested calls to
//! [`grad`] on one thread are rejected.

use std::cell::RefCell;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("domain error in `{0}`: argument outside the operation's domain")]
    DomainError(&'static str),
    #[error("non-finite result: value {value}")]
    NonFiniteResult { value: f64 },
    #[error("grad called while another tape is being recorded on this thread")]
    NestedTape,
}

/// Operation tag of a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Input,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Pow,
    Sigmoid,
    LogSigmoid,
    LnGamma,
}

const NO_PARENT: u32 = u32::MAX;

/// One entry of the tape. Parents always precede the node.
#[derive(Debug, Clone, Copy)]
pub struct TapeNode {
    pub op: Op,
    pub parents: [u32; 2],
    pub partials: [f64; 2],
}

#[derive(Default)]
struct TapeState {
    nodes: Vec<TapeNode>,
    recording: bool,
    domain_error: Option<&'static str>,
}

thread_local! {
    static TAPE: RefCell<TapeState> = RefCell::new(TapeState::default());
}

fn push(op: Op, parents: [u32; 2], partials: [f64; 2]) -> u32 {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let idx = t.nodes.len() as u32;
        t.nodes.push(TapeNode {
            op,
            parents,
            partials,
        });
        idx
    })
}

fn flag_domain(op: &'static str) {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        if t.domain_error.is_none() {
            t.domain_error = Some(op);
        }
    })
}

/// A value recorded on the current thread's tape.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    idx: u32,
    val: f64,
}

impl Var {
    fn unary(self, op: Op, val: f64, d: f64) -> Var {
        Var {
            idx: push(op, [self.idx, NO_PARENT], [d, 0.0]),
            val,
        }
    }

    fn binary(self, other: Var, op: Op, val: f64, da: f64, db: f64) -> Var {
        Var {
            idx: push(op, [self.idx, other.idx], [da, db]),
            val,
        }
    }

    pub fn index(&self) -> usize {
        self.idx as usize
    }
}

/// Numeric type the density code is generic over.
///
/// Implemented by `f64` (plain evaluation) and [`Var`] (taped evaluation).
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    /// Natural log; non-positive arguments raise a domain error on the tape.
    fn ln(self) -> Self;
    /// `self` raised to a constant power.
    fn powf(self, e: f64) -> Self;
    fn sigmoid(self) -> Self;
    /// `log(sigmoid(x))`, finite for every finite `x`.
    fn ln_sigmoid(self) -> Self;
    fn ln_gamma(self) -> Self;

    fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    fn square(self) -> Self {
        self * self
    }

    /// `c - self`.
    fn rsub(self, c: f64) -> Self {
        -self + c
    }

    /// `c / self`.
    fn recip_scaled(self, c: f64) -> Self {
        self.powf(-1.0) * c
    }

    fn zero() -> Self {
        Self::constant(0.0)
    }
}

fn ln_sigmoid_f64(x: f64) -> f64 {
    // -softplus(-x)
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }
    fn ln_sigmoid(self) -> Self {
        ln_sigmoid_f64(self)
    }
    fn ln_gamma(self) -> Self {
        if self <= 0.0 {
            return f64::NAN;
        }
        ln_gamma(self)
    }
}

impl Scalar for Var {
    fn constant(v: f64) -> Self {
        Var {
            idx: push(Op::Constant, [NO_PARENT, NO_PARENT], [0.0, 0.0]),
            val: v,
        }
    }

    fn value(&self) -> f64 {
        self.val
    }

    fn exp(self) -> Self {
        let v = self.val.exp();
        self.unary(Op::Exp, v, v)
    }

    fn ln(self) -> Self {
        if self.val <= 0.0 {
            flag_domain("log");
            return self.unary(Op::Log, f64::NAN, f64::NAN);
        }
        self.unary(Op::Log, self.val.ln(), 1.0 / self.val)
    }

    fn powf(self, e: f64) -> Self {
        if self.val < 0.0 && e.fract() != 0.0 || self.val == 0.0 && e < 1.0 {
            flag_domain("pow");
            return self.unary(Op::Pow, f64::NAN, f64::NAN);
        }
        let v = self.val.powf(e);
        self.unary(Op::Pow, v, e * self.val.powf(e - 1.0))
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.val);
        self.unary(Op::Sigmoid, s, s * (1.0 - s))
    }

    fn ln_sigmoid(self) -> Self {
        // d/dx log sigmoid(x) = sigmoid(-x)
        self.unary(
            Op::LogSigmoid,
            ln_sigmoid_f64(self.val),
            sigmoid_f64(-self.val),
        )
    }

    fn ln_gamma(self) -> Self {
        if self.val <= 0.0 {
            flag_domain("ln_gamma");
            return self.unary(Op::LnGamma, f64::NAN, f64::NAN);
        }
        self.unary(Op::LnGamma, ln_gamma(self.val), digamma(self.val))
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, rhs: Var) -> Var {
        self.binary(rhs, Op::Add, self.val + rhs.val, 1.0, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, rhs: Var) -> Var {
        self.binary(rhs, Op::Sub, self.val - rhs.val, 1.0, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, rhs: Var) -> Var {
        self.binary(rhs, Op::Mul, self.val * rhs.val, rhs.val, self.val)
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, rhs: Var) -> Var {
        let inv = 1.0 / rhs.val;
        self.binary(
            rhs,
            Op::Div,
            self.val / rhs.val,
            inv,
            -self.val * inv * inv,
        )
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        self.unary(Op::Neg, -self.val, -1.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    fn add(self, rhs: f64) -> Var {
        if rhs == 0.0 {
            return self;
        }
        self.unary(Op::Add, self.val + rhs, 1.0)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    fn sub(self, rhs: f64) -> Var {
        if rhs == 0.0 {
            return self;
        }
        self.unary(Op::Sub, self.val - rhs, 1.0)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    fn mul(self, rhs: f64) -> Var {
        // exact identities need no node
        if rhs == 1.0 {
            return self;
        }
        self.unary(Op::Mul, self.val * rhs, rhs)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    fn div(self, rhs: f64) -> Var {
        self.unary(Op::Div, self.val / rhs, 1.0 / rhs)
    }
}

impl AddAssign for Var {
    fn add_assign(&mut self, rhs: Var) {
        *self = *self + rhs;
    }
}

impl SubAssign for Var {
    fn sub_assign(&mut self, rhs: Var) {
        *self = *self - rhs;
    }
}

impl MulAssign for Var {
    fn mul_assign(&mut self, rhs: Var) {
        *self = *self * rhs;
    }
}

/// Value and gradient of a scalar function.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub value: f64,
    pub gradient: Vec<f64>,
}

struct RecordingGuard;

impl Drop for RecordingGuard {
    fn drop(&mut self) {
        TAPE.with(|t| {
            let mut t = t.borrow_mut();
            t.nodes.clear();
            t.recording = false;
            t.domain_error = None;
        });
    }
}

/// Evaluates `f` at `x` and returns its gradient from one reverse sweep.
pub fn grad<F>(f: F, x: &[f64]) -> Result<GradResult, AdError>
where
    F: FnOnce(&[Var]) -> Var,
{
    let already = TAPE.with(|t| {
        let mut t = t.borrow_mut();
        if t.recording {
            return true;
        }
        t.recording = true;
        t.nodes.clear();
        t.domain_error = None;
        false
    });
    if already {
        return Err(AdError::NestedTape);
    }
    let _guard = RecordingGuard;

    let inputs: Vec<Var> = x
        .iter()
        .map(|&v| Var {
            idx: push(Op::Input, [NO_PARENT, NO_PARENT], [0.0, 0.0]),
            val: v,
        })
        .collect();
    let out = f(&inputs);

    TAPE.with(|t| {
        let t = t.borrow();
        if let Some(op) = t.domain_error {
            return Err(AdError::DomainError(op));
        }
        if !out.val.is_finite() {
            return Err(AdError::NonFiniteResult { value: out.val });
        }
        let nodes = &t.nodes;
        let mut adj = vec![0.0; nodes.len()];
        adj[out.idx as usize] = 1.0;
        for i in (0..=out.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NO_PARENT {
                    adj[p as usize] += node.partials[k] * a;
                }
            }
        }
        let gradient: Vec<f64> = inputs.iter().map(|v| adj[v.idx as usize]).collect();
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(AdError::NonFiniteResult { value: out.val });
        }
        Ok(GradResult {
            value: out.val,
            gradient,
        })
    })
}

/// Central finite-difference gradient, used as an independent check.
pub fn finite_difference<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
