//! Truncated bivariate Taylor jets in `(x, t)`.
//!
//! A jet stores the Taylor coefficients of a smooth function around a point
//! up to order `NX` in `x` and `NT` in `t` (a rectangular truncation).
//! Products and `exp` are exact on the retained coefficients, and each
//! differentiation loses the top order in its variable.

use std::ops::{Add, Mul, Neg, Sub};

pub const NX: usize = 6;
pub const NT: usize = 3;

const FACT: [f64; 10] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [[f64; NT + 1]; NX + 1],
}

impl Jet {
    pub fn zero() -> Self {
        Self { c: [[0.0; NT + 1]; NX + 1] }
    }

    pub fn constant(v: f64) -> Self {
        let mut j = Self::zero();
        j.c[0][0] = v;
        j
    }

    /// Builds a jet from the partial derivatives `∂x^i ∂t^j` at the point.
    pub fn from_derivatives<F: Fn(usize, usize) -> f64>(d: F) -> Self {
        let mut j = Self::zero();
        for i in 0..=NX {
            for k in 0..=NT {
                j.c[i][k] = d(i, k) / (FACT[i] * FACT[k]);
            }
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0][0]
    }

    /// `∂x^i ∂t^j` at the point.
    pub fn derivative(&self, i: usize, j: usize) -> f64 {
        self.c[i][j] * FACT[i] * FACT[j]
    }

    pub fn dx(&self) -> Self {
        let mut out = Self::zero();
        for i in 0..NX {
            for k in 0..=NT {
                out.c[i][k] = (i + 1) as f64 * self.c[i + 1][k];
            }
        }
        out
    }

    pub fn dt(&self) -> Self {
        let mut out = Self::zero();
        for i in 0..=NX {
            for k in 0..NT {
                out.c[i][k] = (k + 1) as f64 * self.c[i][k + 1];
            }
        }
        out
    }

    pub fn dx_n(&self, n: usize) -> Self {
        (0..n).fold(*self, |acc, _| acc.dx())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.c.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn exp(&self) -> Self {
        let base = self.c[0][0].exp();
        let mut nil = *self;
        nil.c[0][0] = 0.0;
        // The nilpotent part vanishes after NX + NT factors.
        let mut term = Self::constant(1.0);
        let mut sum = term;
        for k in 1..=(NX + NT) {
            term = (term * nil).scale(1.0 / k as f64);
            sum = sum + term;
        }
        sum.scale(base)
    }

    pub fn square(&self) -> Self {
        *self * *self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut out = self;
        for i in 0..=NX {
            for k in 0..=NT {
                out.c[i][k] += rhs.c[i][k];
            }
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::zero();
        for i1 in 0..=NX {
            for k1 in 0..=NT {
                let a = self.c[i1][k1];
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..=(NX - i1) {
                    for k2 in 0..=(NT - k1) {
                        out.c[i1 + i2][k1 + k2] += a * rhs.c[i2][k2];
                    }
                }
            }
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}
