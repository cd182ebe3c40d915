//! Composite Gauss–Legendre quadrature.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Legendre polynomial `P_n(x)` and `P_{n-1}(x)` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * x * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

impl GaussLegendre {
    /// Rule with `order` nodes, exact for polynomials of degree `2 * order - 1`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("quadrature order must be positive".into()));
        }
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, pm1) = legendre_pair(n, x);
                dp = nf * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (p, pm1) = legendre_pair(n, x);
            dp = if p.is_finite() { nf * (x * p - pm1) / (x * x - 1.0) } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Composite rule on `[lo, hi]`: equal panels, each with a Gauss–Legendre rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    lo: f64,
    hi: f64,
    panels: usize,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn composite(lo: f64, hi: f64, panels: usize, order: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!("quadrature interval [{lo}, {hi}] is empty")));
        }
        if panels == 0 {
            return Err(Error::InvalidConfig("quadrature needs at least one panel".into()));
        }
        let rule = GaussLegendre::new(order)?;
        let width = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let left = lo + p as f64 * width;
            let mid = left + 0.5 * width;
            for (x, w) in rule.nodes().iter().zip(rule.weights()) {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        Ok(Self { lo, hi, panels, order, nodes, weights })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Weighted sum of values already tabulated at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}
