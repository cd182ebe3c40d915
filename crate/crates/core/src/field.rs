//! Space-time sampling shared by the integrated checks.
//!
//! A [`SpaceTimeField`] exposes the solution, its derivatives and the
//! forcing on a tensor grid: a spatial quadrature rule times a time rule.

use crate::beam::Basis;
use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::sde::{Forcing, ModalTrajectory};
use crate::weights::Cutoff;

/// Solution data at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointValues {
    /// `[y, y_x, y_xx, y_xxx, y_xxxx]`.
    pub y: [f64; 5],
    /// `[y_t, y_xt, y_xxt, y_xxxt]`.
    pub yt: [f64; 4],
    pub f: f64,
    pub g: f64,
}

/// Values on the spatial nodes and at both ends, at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub t: f64,
    pub nodes: Vec<PointValues>,
    pub left: PointValues,
    pub right: PointValues,
}

/// Time integration rule on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRule {
    pub horizon: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Step count when the rule is the trapezoid rule on a uniform grid.
    pub uniform_steps: Option<usize>,
}

impl TimeRule {
    pub fn trapezoid(horizon: f64, steps: usize) -> Self {
        let h = horizon / steps as f64;
        let nodes = (0..=steps).map(|i| if i == steps { horizon } else { i as f64 * h }).collect();
        let weights = (0..=steps).map(|i| if i == 0 || i == steps { 0.5 * h } else { h }).collect();
        Self { horizon, nodes, weights, uniform_steps: Some(steps) }
    }

    pub fn gauss(horizon: f64, panels: usize, order: usize) -> Result<Self> {
        let q = Quadrature::composite(0.0, horizon, panels, order)?;
        Ok(Self { horizon, nodes: q.nodes().to_vec(), weights: q.weights().to_vec(), uniform_steps: None })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trapezoid weights restricted to `[lo, hi]`; both ends must lie on the grid.
    pub fn window_weights(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        let steps = self
            .uniform_steps
            .ok_or_else(|| Error::Unsupported("time windows need a uniform trapezoid grid".into()))?;
        let h = self.horizon / steps as f64;
        let index = |t: f64| -> Result<usize> {
            let r = t / h;
            let i = r.round();
            if (r - i).abs() > 1e-6 || i < 0.0 || i as usize > steps {
                return Err(Error::Contract(format!("time {t} is not a grid point")));
            }
            Ok(i as usize)
        };
        let (il, ih) = (index(lo)?, index(hi)?);
        if ih < il {
            return Err(Error::Contract(format!("empty window [{lo}, {hi}]")));
        }
        Ok((0..=steps)
            .map(|i| {
                if i < il || i > ih || il == ih {
                    0.0
                } else if i == il || i == ih {
                    0.5 * h
                } else {
                    h
                }
            })
            .collect())
    }
}

pub trait SpaceTimeField: Sync {
    fn quadrature(&self) -> &Quadrature;
    fn time_rule(&self) -> &TimeRule;
    /// Data at time node `j` of the time rule.
    fn slice(&self, j: usize) -> Slice;
    /// Data at `t = 0` and `t = T`.
    fn endpoint_slices(&self) -> [Slice; 2];
    /// Brownian increments over the uniform time grid, when the field is random.
    fn increments(&self) -> Option<&[f64]> {
        None
    }
}

/// One simulated trial sampled on the trapezoid grid of its time steps.
pub struct TrajectoryField<'a> {
    traj: &'a ModalTrajectory,
    forcing: &'a Forcing,
    quad: Quadrature,
    rule: TimeRule,
    active: Vec<usize>,
    /// `table[node * active + j]` = derivatives of mode `active[j]`.
    table: Vec<[f64; 5]>,
    left: Vec<[f64; 5]>,
    right: Vec<[f64; 5]>,
}

impl<'a> TrajectoryField<'a> {
    pub fn new(traj: &'a ModalTrajectory, basis: &Basis, forcing: &'a Forcing) -> Self {
        Self::with_quadrature(traj, basis, forcing, basis.quadrature().clone())
    }

    pub fn with_quadrature(traj: &'a ModalTrajectory, basis: &Basis, forcing: &'a Forcing, quad: Quadrature) -> Self {
        let sourced = |k: usize| {
            forcing
                .drift
                .terms
                .iter()
                .chain(&forcing.noise.terms)
                .any(|t| t.coefficients.get(k).is_some_and(|&c| c != 0.0))
        };
        let path_active = traj.active_modes();
        let active: Vec<usize> = (0..traj.modes).filter(|k| path_active.contains(k) || sourced(*k)).collect();
        let modes = basis.modes();
        let table = quad
            .nodes()
            .iter()
            .flat_map(|&x| active.iter().map(move |&k| modes[k].derivatives(x)))
            .collect();
        let left = active.iter().map(|&k| basis.left_values()[k]).collect();
        let right = active.iter().map(|&k| basis.right_values()[k]).collect();
        let rule = TimeRule::trapezoid(traj.horizon(), traj.steps);
        Self { traj, forcing, quad, rule, active, table, left, right }
    }

    fn point(&self, vals: &[[f64; 5]], c: &[f64], cd: &[f64], f: &[f64], g: &[f64]) -> PointValues {
        let mut p = PointValues::default();
        for (j, &k) in self.active.iter().enumerate() {
            let v = &vals[j];
            for n in 0..5 {
                p.y[n] += c[k] * v[n];
            }
            for n in 0..4 {
                p.yt[n] += cd[k] * v[n];
            }
            p.f += f[k] * v[0];
            p.g += g[k] * v[0];
        }
        p
    }
}

impl SpaceTimeField for TrajectoryField<'_> {
    fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    fn time_rule(&self) -> &TimeRule {
        &self.rule
    }

    fn slice(&self, j: usize) -> Slice {
        let m = self.traj.modes;
        let t = self.rule.nodes[j];
        let c = self.traj.displacement(j);
        let cd = self.traj.velocity(j);
        let mut f = vec![0.0; m];
        let mut g = vec![0.0; m];
        self.forcing.drift_at(t, cd, &mut f);
        self.forcing.noise_at(t, &mut g);
        let na = self.active.len();
        let nodes = (0..self.quad.len())
            .map(|node| self.point(&self.table[node * na..(node + 1) * na], c, cd, &f, &g))
            .collect();
        Slice {
            t,
            nodes,
            left: self.point(&self.left, c, cd, &f, &g),
            right: self.point(&self.right, c, cd, &f, &g),
        }
    }

    fn endpoint_slices(&self) -> [Slice; 2] {
        [self.slice(0), self.slice(self.traj.steps)]
    }

    fn increments(&self) -> Option<&[f64]> {
        Some(&self.traj.increments)
    }
}

/// The localised field `z = χ(t) y`, which solves the beam equation with
/// drift `χ f + χ'' y + 2χ' y_t` and noise `χ g`.
pub struct CutoffField<F> {
    inner: F,
    cutoff: Cutoff,
}

impl<F: SpaceTimeField> CutoffField<F> {
    pub fn new(inner: F, cutoff: Cutoff) -> Result<Self> {
        if (cutoff.horizon() - inner.time_rule().horizon).abs() > 1e-12 * cutoff.horizon() {
            return Err(Error::Contract("cutoff horizon differs from the field horizon".into()));
        }
        Ok(Self { inner, cutoff })
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    fn transform(&self, s: Slice) -> Slice {
        let (chi, d1, d2) = self.cutoff.eval(s.t);
        let map = |p: PointValues| {
            let mut q = PointValues::default();
            for n in 0..5 {
                q.y[n] = chi * p.y[n];
            }
            for n in 0..4 {
                q.yt[n] = d1 * p.y[n] + chi * p.yt[n];
            }
            q.f = chi * p.f + d2 * p.y[0] + 2.0 * d1 * p.yt[0];
            q.g = chi * p.g;
            q
        };
        Slice { t: s.t, nodes: s.nodes.into_iter().map(map).collect(), left: map(s.left), right: map(s.right) }
    }
}

impl<F: SpaceTimeField> SpaceTimeField for CutoffField<F> {
    fn quadrature(&self) -> &Quadrature {
        self.inner.quadrature()
    }

    fn time_rule(&self) -> &TimeRule {
        self.inner.time_rule()
    }

    fn slice(&self, j: usize) -> Slice {
        self.transform(self.inner.slice(j))
    }

    fn endpoint_slices(&self) -> [Slice; 2] {
        self.inner.endpoint_slices().map(|s| self.transform(s))
    }

    fn increments(&self) -> Option<&[f64]> {
        self.inner.increments()
    }
}

/// Largest `|z|`, `|z_t|` at `t = 0` and `t = T`.
pub fn end_value_magnitude<F: SpaceTimeField + ?Sized>(field: &F) -> f64 {
    field
        .endpoint_slices()
        .iter()
        .flat_map(|s| s.nodes.iter().map(|p| p.y[0].abs().max(p.yt[0].abs())))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_weights_sum_to_horizon() {
        let r = TimeRule::trapezoid(2.0, 10);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn window_weights_cover_the_window() {
        let r = TimeRule::trapezoid(1.0, 16);
        let w = r.window_weights(0.125, 0.875).unwrap();
        assert!((w.iter().sum::<f64>() - 0.75).abs() < 1e-14);
        assert!(r.window_weights(0.1, 0.5).is_err());
    }
}
