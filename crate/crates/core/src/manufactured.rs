//! Closed-form fields for manufactured-solution tests.
//!
//! A field is a finite sum of separable terms `φ(t) ψ(x)` whose factors have
//! exact derivatives of any order; the matching drift is `y_tt + y_xxxx`.

use serde::{Deserialize, Serialize};

use crate::beam::Interval;
use crate::error::{Error, Result};
use crate::field::{PointValues, Slice, SpaceTimeField, TimeRule};
use crate::jet::{Jet, NT, NX};
use crate::quadrature::Quadrature;

/// One-variable factor with exact derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// `Σ c_i s^i` with ascending coefficients.
    Polynomial(Vec<f64>),
    /// `P(s) · sin(frequency · s + phase)`.
    Modulated { poly: Vec<f64>, frequency: f64, phase: f64 },
}

fn poly_derivative_at(c: &[f64], s: f64, n: usize) -> f64 {
    if n >= c.len() {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in (n..c.len()).rev() {
        let falling: f64 = ((i - n + 1)..=i).map(|v| v as f64).product();
        acc = acc * s + c[i] * falling;
    }
    acc
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Profile {
    /// `scale · Π (s − r)^k` over `(r, k)` pairs.
    pub fn from_roots(scale: f64, roots: &[(f64, usize)]) -> Self {
        let mut c = vec![scale];
        for &(r, k) in roots {
            for _ in 0..k {
                c = poly_mul(&c, &[-r, 1.0]);
            }
        }
        Profile::Polynomial(c)
    }

    /// `(x − a)²(b − x)²`, the default clamped shape.
    pub fn clamped_quartic(interval: Interval) -> Self {
        Self::from_roots(1.0, &[(interval.a, 2), (interval.b, 2)])
    }

    /// `t³(T − t)³`, the default zero-end time profile.
    pub fn zero_end_sextic(horizon: f64) -> Self {
        Self::from_roots(-1.0, &[(0.0, 3), (horizon, 3)])
    }

    /// Multiplies a polynomial by `sin(frequency · s + phase)`; an already
    /// modulated profile is returned unchanged.
    pub fn modulate(self, frequency: f64, phase: f64) -> Self {
        match self {
            Profile::Polynomial(poly) => Profile::Modulated { poly, frequency, phase },
            other => other,
        }
    }

    pub fn derivative(&self, s: f64, n: usize) -> f64 {
        match self {
            Profile::Polynomial(c) => poly_derivative_at(c, s, n),
            Profile::Modulated { poly, frequency, phase } => {
                let arg = frequency * s + phase;
                (0..=n)
                    .map(|k| {
                        let m = n - k;
                        let trig = match m % 4 {
                            0 => arg.sin(),
                            1 => arg.cos(),
                            2 => -arg.sin(),
                            _ => -arg.cos(),
                        };
                        binomial(n, k) * poly_derivative_at(poly, s, k) * frequency.powi(m as i32) * trig
                    })
                    .sum()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableTerm {
    pub time: Profile,
    pub space: Profile,
}

/// `y(t, x) = amplitude · Σ φ_i(t) ψ_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedField {
    pub terms: Vec<SeparableTerm>,
    pub amplitude: f64,
}

impl ManufacturedField {
    pub fn new(terms: Vec<SeparableTerm>) -> Self {
        Self { terms, amplitude: 1.0 }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new(), amplitude: 1.0 }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { terms: self.terms.clone(), amplitude: self.amplitude * factor }
    }

    /// `∂x^i ∂t^j y` at `(t, x)`.
    pub fn derivative(&self, i: usize, j: usize, t: f64, x: f64) -> f64 {
        self.amplitude
            * self
                .terms
                .iter()
                .map(|term| term.time.derivative(t, j) * term.space.derivative(x, i))
                .sum::<f64>()
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.derivative(0, 0, t, x)
    }

    /// The drift that makes `y` an exact solution: `y_tt + y_xxxx`.
    pub fn forcing(&self, t: f64, x: f64) -> f64 {
        self.derivative(0, 2, t, x) + self.derivative(4, 0, t, x)
    }

    pub fn jet(&self, t: f64, x: f64) -> Jet {
        Jet::from_derivatives(|i, j| if i <= NX && j <= NT { self.derivative(i, j, t, x) } else { 0.0 })
    }

    pub fn point(&self, t: f64, x: f64) -> PointValues {
        PointValues {
            y: std::array::from_fn(|n| self.derivative(n, 0, t, x)),
            yt: std::array::from_fn(|n| self.derivative(n, 1, t, x)),
            f: self.forcing(t, x),
            g: 0.0,
        }
    }
}

/// A manufactured solution of the zero-end system with `g ≡ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedSolutionSpec {
    pub name: String,
    pub field: ManufacturedField,
}

impl ManufacturedSolutionSpec {
    /// `(x − a)²(b − x)² · t³(T − t)³`.
    pub fn default_for(interval: Interval, horizon: f64) -> Self {
        Self {
            name: "quartic-sextic".into(),
            field: ManufacturedField::new(vec![SeparableTerm {
                time: Profile::zero_end_sextic(horizon),
                space: Profile::clamped_quartic(interval),
            }]),
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { name: self.name.clone(), field: self.field.scaled(amplitude) }
    }

    /// Largest violation of the clamped and zero-end conditions on a sample grid.
    pub fn condition_violation(&self, interval: Interval, horizon: f64) -> f64 {
        let n = 33;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let x = interval.a + interval.length() * k as f64 / (n - 1) as f64;
            for t in [0.0, horizon] {
                worst = worst.max(self.field.derivative(0, 0, t, x).abs());
                worst = worst.max(self.field.derivative(0, 1, t, x).abs());
            }
            let t = horizon * k as f64 / (n - 1) as f64;
            for xe in [interval.a, interval.b] {
                worst = worst.max(self.field.derivative(0, 0, t, xe).abs());
                worst = worst.max(self.field.derivative(1, 0, t, xe).abs());
            }
        }
        worst
    }

    pub fn validate(&self, interval: Interval, horizon: f64) -> Result<()> {
        let v = self.condition_violation(interval, horizon);
        if v > 1e-8 {
            return Err(Error::Contract(format!(
                "manufactured solution '{}' violates the clamped/zero-end conditions by {v:e}",
                self.name
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.field.amplitude == 0.0 || self.field.terms.is_empty()
    }
}

/// The five-member corpus of clamped, zero-end manufactured solutions.
pub fn carleman_corpus(interval: Interval, horizon: f64) -> Vec<ManufacturedSolutionSpec> {
    let (a, b) = (interval.a, interval.b);
    let mid = 0.5 * (a + b);
    let quartic = Profile::clamped_quartic(interval);
    let sextic = Profile::zero_end_sextic(horizon);
    let wave = 2.0 * std::f64::consts::PI / interval.length();
    let term = |time: Profile, space: Profile| SeparableTerm { time, space };
    vec![
        ManufacturedSolutionSpec::default_for(interval, horizon),
        ManufacturedSolutionSpec {
            name: "odd-quintic".into(),
            field: ManufacturedField::new(vec![term(
                sextic.clone(),
                Profile::from_roots(1.0, &[(a, 2), (b, 2), (mid, 1)]),
            )]),
        },
        ManufacturedSolutionSpec {
            name: "modulated-quartic".into(),
            field: ManufacturedField::new(vec![term(sextic.clone(), quartic.clone().modulate(wave, -wave * a + 0.5))]),
        },
        ManufacturedSolutionSpec {
            name: "skewed-time".into(),
            field: ManufacturedField::new(vec![term(
                Profile::from_roots(1.0, &[(0.0, 4), (horizon, 2)]),
                quartic.clone(),
            )]),
        },
        ManufacturedSolutionSpec {
            name: "two-term".into(),
            field: ManufacturedField::new(vec![
                term(sextic, quartic),
                term(
                    Profile::from_roots(1.0, &[(0.0, 2), (horizon, 2)]).modulate(3.0, std::f64::consts::FRAC_PI_2),
                    Profile::from_roots(0.5, &[(a, 3), (b, 2)]),
                ),
            ]),
        },
    ]
}

/// A manufactured field sampled on a spatial rule and a time rule.
pub struct ManufacturedSolution {
    field: ManufacturedField,
    quad: Quadrature,
    rule: TimeRule,
    interval: Interval,
    /// `space[node * terms + i]` = derivatives 0..=4 of `ψ_i` at the node.
    space: Vec<[f64; 5]>,
}

impl ManufacturedSolution {
    pub fn new(field: ManufacturedField, interval: Interval, quad: Quadrature, rule: TimeRule) -> Self {
        let space = quad
            .nodes()
            .iter()
            .flat_map(|&x| field.terms.iter().map(move |t| std::array::from_fn(|n| t.space.derivative(x, n))))
            .collect();
        Self { field, quad, rule, interval, space }
    }

    pub fn field(&self) -> &ManufacturedField {
        &self.field
    }

    fn slice_at(&self, t: f64) -> Slice {
        let amp = self.field.amplitude;
        let time: Vec<[f64; 3]> =
            self.field.terms.iter().map(|term| std::array::from_fn(|j| amp * term.time.derivative(t, j))).collect();
        let nt = self.field.terms.len();
        let nodes = (0..self.quad.len())
            .map(|node| {
                let mut p = PointValues::default();
                for (i, tv) in time.iter().enumerate() {
                    let s = &self.space[node * nt + i];
                    for n in 0..5 {
                        p.y[n] += tv[0] * s[n];
                    }
                    for n in 0..4 {
                        p.yt[n] += tv[1] * s[n];
                    }
                    p.f += tv[2] * s[0] + tv[0] * s[4];
                }
                p
            })
            .collect();
        Slice {
            t,
            nodes,
            left: self.field.point(t, self.interval.a),
            right: self.field.point(t, self.interval.b),
        }
    }
}

impl SpaceTimeField for ManufacturedSolution {
    fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    fn time_rule(&self) -> &TimeRule {
        &self.rule
    }

    fn slice(&self, j: usize) -> Slice {
        self.slice_at(self.rule.nodes[j])
    }

    fn endpoint_slices(&self) -> [Slice; 2] {
        [self.slice_at(0.0), self.slice_at(self.rule.horizon)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        // 1 + 2s + 3s²
        let p = Profile::Polynomial(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.derivative(2.0, 0), 17.0);
        assert_eq!(p.derivative(2.0, 1), 14.0);
        assert_eq!(p.derivative(2.0, 2), 6.0);
        assert_eq!(p.derivative(2.0, 3), 0.0);
    }

    #[test]
    fn modulated_derivative_matches_product_rule() {
        let p = Profile::Modulated { poly: vec![0.0, 1.0], frequency: 2.0, phase: 0.3 };
        let s: f64 = 0.7;
        let expect = (2.0 * s + 0.3).sin() + s * 2.0 * (2.0 * s + 0.3).cos();
        assert!((p.derivative(s, 1) - expect).abs() < 1e-14);
    }

    #[test]
    fn quartic_second_derivative_at_right_end() {
        let i = Interval::new(1.0, 2.5).unwrap();
        let q = Profile::clamped_quartic(i);
        assert!((q.derivative(2.5, 2) - 2.0 * 1.5f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn corpus_satisfies_end_conditions() {
        let i = Interval::new(1.0, 2.0).unwrap();
        for s in carleman_corpus(i, 1.0) {
            s.validate(i, 1.0).unwrap();
        }
    }
}
