//! Piece polynomials written once over an abstract ring, so the native
//! evaluator and the circuit builder perform the same operations in the
//! same order.

use crate::field::{CircuitBuilder, NodeId};

pub trait Ctx {
    type V: Clone;
    fn k(&mut self, c: f64) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;

    fn scale(&mut self, c: f64, a: &Self::V) -> Self::V {
        let c = self.k(c);
        self.mul(&c, a)
    }

    /// `c - a`.
    fn rsub(&mut self, c: f64, a: &Self::V) -> Self::V {
        let c = self.k(c);
        self.sub(&c, a)
    }
}

/// Plain floating point.
pub struct Num;

impl Ctx for Num {
    type V = f64;
    fn k(&mut self, c: f64) -> f64 {
        c
    }
    fn add(&mut self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    fn sub(&mut self, a: &f64, b: &f64) -> f64 {
        a - b
    }
    fn mul(&mut self, a: &f64, b: &f64) -> f64 {
        a * b
    }
}

/// Records operations as circuit gates.
pub struct Build<'a>(pub &'a mut CircuitBuilder);

impl Ctx for Build<'_> {
    type V = NodeId;
    fn k(&mut self, c: f64) -> NodeId {
        self.0.float(c)
    }
    fn add(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        self.0.add(*a, *b)
    }
    fn sub(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        self.0.sub(*a, *b)
    }
    fn mul(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        self.0.mul(*a, *b)
    }
}

/// Smoothstep `3z^2 - 2z^3`.
pub fn smoothstep<C: Ctx>(c: &mut C, z: &C::V) -> C::V {
    let z2 = c.mul(z, z);
    let tz = c.scale(2.0, z);
    let f = c.rsub(3.0, &tz);
    c.mul(&z2, &f)
}

/// `30 z^2 (1-z)^2`, unit mass on `[0, 1]`.
pub fn bump<C: Ctx>(c: &mut C, z: &C::V) -> C::V {
    let one_minus = c.rsub(1.0, z);
    let prod = c.mul(z, &one_minus);
    let sq = c.mul(&prod, &prod);
    c.scale(30.0, &sq)
}

/// Restoring profile `z (1-z) (1-2z)`: zero at lane centres and midpoints,
/// slope 1 at the centres.
pub fn restore<C: Ctx>(c: &mut C, z: &C::V) -> C::V {
    let one_minus = c.rsub(1.0, z);
    let tz = c.scale(2.0, z);
    let lin = c.rsub(1.0, &tz);
    let prod = c.mul(z, &one_minus);
    c.mul(&prod, &lin)
}

/// Lateral slope in lane units per unit row time for a drive half-row:
/// `k * 2 bump(2 tau) * (d_lo m(1-z) + d_hi m(z))`.
pub fn drive<C: Ctx>(c: &mut C, tau: &C::V, z: &C::V, k: f64, d_lo: f64, d_hi: f64) -> C::V {
    let two_tau = c.scale(2.0, tau);
    let p = bump(c, &two_tau);
    let one_minus = c.rsub(1.0, z);
    let m_lo = smoothstep(c, &one_minus);
    let m_hi = smoothstep(c, z);
    let a = c.scale(d_lo, &m_lo);
    let b = c.scale(d_hi, &m_hi);
    let mix = c.add(&a, &b);
    let pm = c.mul(&p, &mix);
    c.scale(2.0 * k, &pm)
}

/// Settling slope for the second half-row: `-gain * 2 bump(2 tau - 1) * restore(z)`.
pub fn relax<C: Ctx>(c: &mut C, tau: &C::V, z: &C::V, gain: f64) -> C::V {
    let two_tau = c.scale(2.0, tau);
    let shifted = c.rsub(1.0, &two_tau);
    // bump is symmetric under z -> 1 - z, so bump(1 - 2 tau) = bump(2 tau - 1)
    let shifted = c.scale(-1.0, &shifted);
    let q = bump(c, &shifted);
    let r = restore(c, z);
    let qr = c.mul(&q, &r);
    c.scale(-2.0 * gain, &qr)
}

/// Settling slope over a whole window: `-gain * bump(tau) * restore(z)`.
pub fn settle<C: Ctx>(c: &mut C, tau: &C::V, z: &C::V, gain: f64) -> C::V {
    let q = bump(c, tau);
    let r = restore(c, z);
    let qr = c.mul(&q, &r);
    c.scale(-gain, &qr)
}
