//! Scalar reverse-mode automatic differentiation.
//!
//! Physics, aerodynamics and loss code is written once against the [`Real`]
//! trait. Instantiated with `f64` it is a plain forward evaluation; with
//! [`Var`] every operation is appended to a [`Tape`] as a node holding the
//! local partial derivatives, and [`Tape::backward`] accumulates adjoints in
//! a single reverse sweep.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric type the model code is generic over.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A value that carries no derivative information.
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    /// Full-quadrant arctangent of `self / x`.
    fn atan2(self, x: Self) -> Self;
    /// A new quantity `g(self)` whose value and slope `g'(self)` were
    /// computed elsewhere (used for opaque sub-models such as the MLP).
    fn lift(self, value: f64, slope: f64) -> Self;

    fn square(self) -> Self {
        self * self
    }

    fn abs(self) -> Self {
        let v = self.value();
        self.lift(v.abs(), if v < 0.0 { -1.0 } else { 1.0 })
    }

    /// `max(0, self)^2`, continuously differentiable.
    fn relu_sq(self) -> Self {
        let v = self.value();
        if v > 0.0 {
            self.lift(v * v, 2.0 * v)
        } else {
            Self::cst(0.0)
        }
    }

    fn sigmoid(self) -> Self {
        let s = logistic(self.value());
        self.lift(s, s * (1.0 - s))
    }
}

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    #[inline]
    fn lift(self, value: f64, _slope: f64) -> Self {
        value
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn relu_sq(self) -> Self {
        if self > 0.0 {
            self * self
        } else {
            0.0
        }
    }
    #[inline]
    fn sigmoid(self) -> Self {
        logistic(self)
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Wengert list of recorded operations.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Bytes used by one recorded node.
pub const NODE_BYTES: usize = std::mem::size_of::<Node>();

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.push(Node {
            parents: [0, 0],
            partials: [0.0, 0.0],
        });
        Var {
            tape: Some(self),
            idx,
            val: value,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Approximate heap footprint of the recorded graph.
    pub fn bytes(&self) -> usize {
        self.len() * NODE_BYTES
    }

    /// Drops every recorded node; variables created earlier become invalid.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = u32::try_from(nodes.len()).expect("tape exceeds u32 nodes");
        nodes.push(node);
        idx
    }

    /// Reverse sweep seeded with `d output / d output = 1`.
    pub fn backward(&self, output: Var<'_>) -> Adjoints {
        self.backward_seeded(&[(output, 1.0)])
    }

    /// Reverse sweep for a vector-Jacobian product: the returned adjoints
    /// are `sum_j seed_j * d out_j / d node`.
    pub fn backward_seeded(&self, seeds: &[(Var<'_>, f64)]) -> Adjoints {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        for (v, s) in seeds {
            if v.tape.is_some() {
                adj[v.idx as usize] += s;
            }
        }
        for i in (0..nodes.len()).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let n = &nodes[i];
            adj[n.parents[0] as usize] += g * n.partials[0];
            adj[n.parents[1] as usize] += g * n.partials[1];
        }
        Adjoints(adj)
    }
}

/// Result of a reverse sweep, indexed by variable.
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        if v.tape.is_some() {
            self.0[v.idx as usize]
        } else {
            0.0
        }
    }
}

/// A scalar recorded on a [`Tape`] (or a constant when `tape` is `None`).
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({})", self.val)
    }
}

impl<'t> Var<'t> {
    fn unary(self, val: f64, d: f64) -> Self {
        match self.tape {
            Some(tape) => Var {
                tape: Some(tape),
                idx: tape.push(Node {
                    parents: [self.idx, self.idx],
                    partials: [d, 0.0],
                }),
                val,
            },
            None => Var {
                tape: None,
                idx: 0,
                val,
            },
        }
    }

    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        match (self.tape, other.tape) {
            (Some(tape), Some(_)) => Var {
                tape: Some(tape),
                idx: tape.push(Node {
                    parents: [self.idx, other.idx],
                    partials: [da, db],
                }),
                val,
            },
            (Some(_), None) => self.unary(val, da),
            (None, Some(_)) => other.unary(val, db),
            (None, None) => Var {
                tape: None,
                idx: 0,
                val,
            },
        }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl Add<f64> for Var<'_> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(self.val + c, 1.0)
    }
}

impl Sub<f64> for Var<'_> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(self.val - c, 1.0)
    }
}

impl Mul<f64> for Var<'_> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }
}

impl Div<f64> for Var<'_> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl Real for Var<'_> {
    fn cst(v: f64) -> Self {
        Var {
            tape: None,
            idx: 0,
            val: v,
        }
    }
    fn value(self) -> f64 {
        self.val
    }
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = self.val * self.val + x.val * x.val;
        self.binary(x, self.val.atan2(x.val), x.val / r2, -self.val / r2)
    }
    fn lift(self, value: f64, slope: f64) -> Self {
        self.unary(value, slope)
    }
}
