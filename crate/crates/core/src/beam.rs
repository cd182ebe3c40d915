//! Eigenpairs of the clamped fourth-order operator `y ↦ y''''` on `[a, b]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// Highest derivative order exposed by [`eval_mode`].
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || b <= a {
            return Err(Error::InvalidConfig(format!("interval requires a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }
}

/// Overflow-safe characteristic residual `cos z − 1/cosh z`.
///
/// Its roots coincide with those of `cosh z · cos z = 1`.
pub fn characteristic_residual(z: f64) -> f64 {
    z.cos() - 1.0 / z.cosh()
}

fn characteristic_slope(z: f64) -> f64 {
    -z.sin() + z.tanh() / z.cosh()
}

const SCAN_CELLS: usize = 64;
const MAX_BISECTIONS: usize = 200;

/// The `k`-th positive wavenumber `μ` of a clamped-clamped beam of length `length`.
pub fn solve_characteristic(k: usize, length: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Contract("mode index starts at 1".into()));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Contract(format!("beam length must be positive, got {length}")));
    }
    let pi = std::f64::consts::PI;
    let kf = k as f64;
    let lo = (kf - 0.5) * pi;
    let hi = (kf + 1.5) * pi;
    let guess = (kf + 0.5) * pi;

    // The scan window also contains the neighbouring roots; keep the
    // sign change closest to the asymptotic location.
    let step = (hi - lo) / SCAN_CELLS as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut left = lo;
    let mut f_left = characteristic_residual(left);
    for i in 1..=SCAN_CELLS {
        let right = lo + i as f64 * step;
        let f_right = characteristic_residual(right);
        if f_left == 0.0 || f_left.signum() != f_right.signum() {
            let mid = 0.5 * (left + right);
            let better = best.is_none_or(|(l, r)| (mid - guess).abs() < (0.5 * (l + r) - guess).abs());
            if better {
                best = Some((left, right));
            }
        }
        left = right;
        f_left = f_right;
    }
    let (mut a, mut b) = best.ok_or(Error::NonConvergence {
        k,
        lo,
        hi,
        residual: f64::NAN,
        iterations: 0,
    })?;

    let mut fa = characteristic_residual(a);
    let mut iterations = 0;
    while b - a > 1e-15 * b && iterations < MAX_BISECTIONS {
        let m = 0.5 * (a + b);
        let fm = characteristic_residual(m);
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        iterations += 1;
    }
    let mut z = 0.5 * (a + b);
    for _ in 0..3 {
        let slope = characteristic_slope(z);
        if slope == 0.0 {
            break;
        }
        let next = z - characteristic_residual(z) / slope;
        if next >= a - 1e-12 && next <= b + 1e-12 {
            z = next;
        }
    }
    let residual = characteristic_residual(z);
    if residual.abs() >= 1e-12 {
        return Err(Error::NonConvergence { k, lo: a, hi: b, residual, iterations });
    }
    Ok(z / length)
}

/// One clamped-beam eigenpair with a closed-form, overflow-safe shape.
///
/// With `s = x − a`, `L = b − a` and `z = μL` the unnormalised shape is
/// `g·e^{μ(s−L)} + d·e^{−μs} − cos μs + σ sin μs`, which is the classical
/// `cosh − cos − σ(sinh − sin)` form with the growing exponentials rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    pub k: usize,
    pub mu: f64,
    pub eigenvalue: f64,
    pub a: f64,
    pub length: f64,
    pub grow: f64,
    pub decay: f64,
    pub sigma: f64,
    pub scale: f64,
}

impl EigenMode {
    pub fn new(k: usize, interval: Interval) -> Result<Self> {
        let length = interval.length();
        let mu = solve_characteristic(k, length)?;
        let z = mu * length;
        let e = (-z).exp();
        let den = 1.0 - e * e - 2.0 * z.sin() * e;
        let sigma = (1.0 + e * e - 2.0 * z.cos() * e) / den;
        let grow = (z.cos() - z.sin() - e) / den;
        let decay = 0.5 * (1.0 + sigma);
        Ok(Self {
            k,
            mu,
            eigenvalue: mu.powi(4),
            a: interval.a,
            length,
            grow,
            decay,
            sigma,
            // The unnormalised shape has squared L² norm exactly L.
            scale: 1.0 / length.sqrt(),
        })
    }

    /// Angular frequency `√λ_k = μ²` of the modal oscillator.
    pub fn omega(&self) -> f64 {
        self.mu * self.mu
    }

    /// Derivative of order `order` at `x`, without range checks.
    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        let s = x - self.a;
        let mu = self.mu;
        let ms = mu * s;
        let (sn, cs) = ms.sin_cos();
        let g = self.grow * (mu * (s - self.length)).exp();
        let d = self.decay * (-ms).exp();
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        // cos(θ + nπ/2) and sin(θ + nπ/2) without rounding π/2.
        let (c_n, s_n) = match order % 4 {
            0 => (cs, sn),
            1 => (-sn, cs),
            2 => (-cs, -sn),
            _ => (sn, -cs),
        };
        self.scale * mu.powi(order as i32) * (g + sign * d - c_n + self.sigma * s_n)
    }

    /// Values of the derivatives of order 0 through 4 at `x`.
    pub fn derivatives(&self, x: f64) -> [f64; 5] {
        std::array::from_fn(|n| self.derivative(x, n))
    }
}

/// `d^order v_k / dx^order` at `x ∈ [a, b]`.
pub fn eval_mode(mode: &EigenMode, x: f64, order: usize) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(Error::Contract(format!("derivative order {order} outside 0..={MAX_ORDER}")));
    }
    let tol = 1e-12 * mode.length.max(1.0);
    if x < mode.a - tol || x > mode.a + mode.length + tol {
        return Err(Error::Contract(format!("x = {x} outside the beam interval")));
    }
    Ok(mode.derivative(x, order))
}

/// `∫ f g dx` under `quad`.
pub fn inner_product<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G, quad: &Quadrature) -> f64 {
    quad.integrate(|x| f(x) * g(x))
}

/// Modal coefficients `⟨field, v_k⟩` for each mode.
pub fn project<F: Fn(f64) -> f64>(field: F, modes: &[EigenMode], quad: &Quadrature) -> Vec<f64> {
    let values: Vec<f64> = quad.nodes().iter().map(|&x| field(x)).collect();
    modes
        .iter()
        .map(|m| {
            quad.nodes()
                .iter()
                .zip(quad.weights())
                .zip(&values)
                .map(|((&x, &w), &v)| w * v * m.derivative(x, 0))
                .sum()
        })
        .collect()
}

/// Default spatial quadrature: 8 panels of 16 Gauss–Legendre nodes.
pub const DEFAULT_PANELS: usize = 8;
pub const DEFAULT_ORDER: usize = 16;

/// The first `M` modes on an interval together with a quadrature rule and
/// the mode derivatives tabulated at its nodes and at both endpoints.
#[derive(Debug, Clone)]
pub struct Basis {
    interval: Interval,
    modes: Vec<EigenMode>,
    quad: Quadrature,
    /// `table[node * M + k][n]` = `v_k^{(n)}(x_node)`.
    table: Vec<[f64; 5]>,
    left: Vec<[f64; 5]>,
    right: Vec<[f64; 5]>,
}

impl Basis {
    pub fn new(interval: Interval, modes: usize) -> Result<Self> {
        Self::with_quadrature(interval, modes, DEFAULT_PANELS, DEFAULT_ORDER)
    }

    pub fn with_quadrature(interval: Interval, modes: usize, panels: usize, order: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidConfig("at least one mode is required".into()));
        }
        let quad = Quadrature::composite(interval.a, interval.b, panels, order)?;
        let modes: Vec<EigenMode> = (1..=modes).map(|k| EigenMode::new(k, interval)).collect::<Result<_>>()?;
        let table = quad
            .nodes()
            .iter()
            .flat_map(|&x| modes.iter().map(move |m| m.derivatives(x)))
            .collect();
        let left = modes.iter().map(|m| m.derivatives(interval.a)).collect();
        let right = modes.iter().map(|m| m.derivatives(interval.b)).collect();
        Ok(Self { interval, modes, quad, table, left, right })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    /// Mode derivatives at quadrature node `node`, one entry per mode.
    pub fn node_values(&self, node: usize) -> &[[f64; 5]] {
        let m = self.modes.len();
        &self.table[node * m..(node + 1) * m]
    }

    pub fn left_values(&self) -> &[[f64; 5]] {
        &self.left
    }

    pub fn right_values(&self) -> &[[f64; 5]] {
        &self.right
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    pub fn project<F: Fn(f64) -> f64>(&self, field: F) -> Vec<f64> {
        let m = self.modes.len();
        let mut out = vec![0.0; m];
        for (node, (&x, &w)) in self.quad.nodes().iter().zip(self.quad.weights()).enumerate() {
            let fw = w * field(x);
            for (o, v) in out.iter_mut().zip(self.node_values(node)) {
                *o += fw * v[0];
            }
        }
        out
    }

    /// Gram matrix `⟨v_i, v_j⟩` under the basis quadrature, row-major.
    pub fn gram(&self) -> Vec<f64> {
        let m = self.modes.len();
        let mut g = vec![0.0; m * m];
        for (node, &w) in self.quad.weights().iter().enumerate() {
            let vals = self.node_values(node);
            for i in 0..m {
                for j in 0..m {
                    g[i * m + j] += w * vals[i][0] * vals[j][0];
                }
            }
        }
        g
    }

    /// Largest `|⟨v_i, v_j⟩ − δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.modes.len();
        self.gram()
            .iter()
            .enumerate()
            .map(|(idx, g)| (g - if idx / m == idx % m { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// `‖v_k'''' − λ_k v_k‖ / λ_k` for every mode.
    pub fn eigenrelation_residuals(&self) -> Vec<f64> {
        (0..self.modes.len())
            .map(|k| {
                let lam = self.modes[k].eigenvalue;
                let sq: f64 = self
                    .quad
                    .weights()
                    .iter()
                    .enumerate()
                    .map(|(node, w)| {
                        let v = self.node_values(node)[k];
                        w * (v[4] - lam * v[0]).powi(2)
                    })
                    .sum();
                sq.sqrt() / lam
            })
            .collect()
    }
}
