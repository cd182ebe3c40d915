//! Checks of the weighted multiplier identity for `u = θ y`.
//!
//! The pointwise check evaluates the two sides through separate code paths:
//! the multiplier side from closed-form weight partials and Leibniz-rule
//! derivatives of `u`, the brace-group side from Taylor jets of the weight
//! and of `y` with every group written out term by term.
//!
//! The integrated check sums the same groups over space and time for a
//! field that vanishes at both time ends, so spatial divergences reduce to
//! boundary evaluations and the time divergence drops out.

use serde::{Deserialize, Serialize};

use crate::beam::Interval;
use crate::error::{Error, Result};
use crate::field::{end_value_magnitude, PointValues, SpaceTimeField};
use crate::jet::Jet;
use crate::manufactured::ManufacturedField;
use crate::stats::Estimate;
use crate::weights::{derived_from, identity_coefficients_from, WeightField, WeightPartials};

/// Which form of the `u_x²` group to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BraceVariant {
    /// Leading term `−[B − (G−Φ₁)_x]_xxx`, the form that balances.
    Verified,
    /// Leading term `−[B − (G−Φ₁)_x]_xx` as printed.
    Printed,
}

// ---------------------------------------------------------------------------
// Brace-group side (jets)

struct CoefficientJets {
    theta: Jet,
    lt: Jet,
    ltt: Jet,
    d: Jet,
    phi: Jet,
    phi1: Jet,
    k: Jet,
    gp: Jet,
    ap: Jet,
}

fn coefficient_jets(w: &WeightField, t: f64, x: f64) -> CoefficientJets {
    let s = Jet::from_derivatives(|i, j| match (i, j) {
        (0, 0) => x - w.x0,
        (1, 0) => 1.0,
        _ => 0.0,
    });
    let tau = Jet::from_derivatives(|i, j| match (i, j) {
        (0, 0) => t,
        (0, 1) => 1.0,
        _ => 0.0,
    });
    let shifted = tau - Jet::constant(w.horizon);
    let l = (s.square() + tau.square() * shifted.square()) * w.lambda;
    let lx = l.dx();
    let lxx = lx.dx();
    let lxxx = lxx.dx();
    let lxxxx = lxxx.dx();
    let lt = l.dt();
    let ltt = lt.dt();
    let a = lx.square().square() + 4.0 * lx * lxxx - lxxxx - 6.0 * lx.square() * lxx + 3.0 * lxx.square() + lt.square()
        - ltt;
    let g = 6.0 * lx.square() - 6.0 * lxx;
    let b = 12.0 * lx * lxx - 4.0 * lx.square() * lx - 4.0 * lxxx;
    let d = -4.0 * lx;
    let phi1 = -6.0 * lxx;
    let phi = -8.0 * lx.square() * lxx;
    let gp = g - phi1;
    let k = b - gp.dx();
    let ap = a - phi;
    CoefficientJets { theta: l.exp(), lt, ltt, d, phi, phi1, k, gp, ap }
}

/// Coefficients of the squared terms on the brace-group side, evaluated with jets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BraceCoefficients {
    /// Coefficient of `u²`.
    pub c0: f64,
    /// Coefficient of `u_x²`.
    pub c1: f64,
    /// Coefficient of `u_xx²`.
    pub c2: f64,
    /// Coefficient of `u_xxx²`.
    pub c3: f64,
    /// Coefficient `2(l_tt − Φ)` of `u_t²`.
    pub velocity: f64,
    /// `u_t²` coefficient left by integrating `2u_t[K u_x + Φ₁u_xx + D u_xxx]_t` by parts.
    pub velocity_flux: f64,
    /// `u_x²` coefficient `2(l_t(G−Φ₁))_t` from the time-flux term.
    pub time_shift: f64,
    /// `u_xx²` coefficient `2 l_tt` from the time-flux term.
    pub curvature_shift: f64,
}

fn group_coefficients(c: &CoefficientJets, variant: BraceVariant) -> BraceCoefficients {
    let CoefficientJets { lt, ltt, d, phi, phi1, k, gp, ap, .. } = c;
    let (lt, ltt, d, phi, phi1, k, gp, ap) = (*lt, *ltt, *d, *phi, *phi1, *k, *gp, *ap);
    let gpx = gp.dx();
    let c0 = -(gpx * phi).dx() - (ap * k).dx() + phi.dt().dt() + (gp * phi).dx_n(2) + phi.dx_n(4)
        + (ap * phi1).dx_n(2)
        - (ap * d).dx_n(3)
        + 2.0 * ap * phi
        + 2.0 * (lt * ap).dt();
    let lead = match variant {
        BraceVariant::Verified => k.dx_n(3),
        BraceVariant::Printed => k.dx_n(2),
    };
    let c1 = -lead - 4.0 * phi.dx_n(2) + 2.0 * gpx * k - (gp * k).dx() - (gpx * phi1).dx() + (gpx * d).dx_n(2)
        - 2.0 * gp * phi
        - 2.0 * ap * phi1
        + 3.0 * (ap * d).dx();
    let c2 = 3.0 * k.dx() + phi1.dx_n(2) + 2.0 * phi + 2.0 * gp * phi1 - 2.0 * gpx * d - (gp * d).dx();
    let c3 = -d.dx() - 2.0 * phi1;
    BraceCoefficients {
        c0: c0.value(),
        c1: c1.value(),
        c2: c2.value(),
        c3: c3.value(),
        velocity: (2.0 * (ltt - phi)).value(),
        velocity_flux: (-k.dx() + phi1.dx_n(2) - d.dx_n(3)).value(),
        time_shift: (2.0 * (lt * gp).dt()).value(),
        curvature_shift: (2.0 * ltt).value(),
    }
}

pub fn brace_coefficients(w: &WeightField, t: f64, x: f64, variant: BraceVariant) -> BraceCoefficients {
    group_coefficients(&coefficient_jets(w, t, x), variant)
}

/// The brace-group side of the identity at one point, from jets.
pub fn brace_side(y: &ManufacturedField, w: &WeightField, t: f64, x: f64, variant: BraceVariant) -> f64 {
    brace_side_with_scale(y, w, t, x, variant).0
}

/// Brace side together with the sum of the magnitudes of its groups.
fn brace_side_with_scale(y: &ManufacturedField, w: &WeightField, t: f64, x: f64, variant: BraceVariant) -> (f64, f64) {
    let cj = coefficient_jets(w, t, x);
    let cc = group_coefficients(&cj, variant);
    let CoefficientJets { theta, lt, ltt, d, phi, phi1, k, gp, ap } = cj;
    let u = theta * y.jet(t, x);
    let ux = u.dx();
    let uxx = ux.dx();
    let uxxx = uxx.dx();
    let ut = u.dt();
    let u2 = u.square();
    let ux2 = ux.square();
    let uxx2 = uxx.square();
    let uxxx2 = uxxx.square();
    let gpx = gp.dx();
    let s = uxxx + gp * ux;

    let third = (k * ux2 - phi.dx() * u2 + ap * d * u2).dx_n(3);
    let second = (-3.0 * k.dx() * ux2 + phi1 * uxx2 - phi * ux2 + gpx * d * ux2 + 3.0 * phi.dx_n(2) * u2
        + gp * phi * u2
        + ap * phi1 * u2
        - 3.0 * (ap * d).dx() * u2)
        .dx_n(2);
    let first = (3.0 * k.dx_n(2) * ux2 - 3.0 * k * uxx2 - 2.0 * phi1.dx() * uxx2 + 2.0 * uxxx * phi * u + d * uxxx2
        + 5.0 * phi.dx() * ux2
        - 3.0 * phi.dx_n(3) * u2
        + gp * k * ux2
        + gpx * phi1 * ux2
        - 2.0 * (gpx * d).dx() * ux2
        + gp * d * uxx2
        + gpx * phi * u2
        - 2.0 * (gp * phi).dx() * u2
        - 2.0 * (ap * phi1).dx() * u2
        + ap * k * u2
        + 3.0 * (ap * d).dx_n(2) * u2
        - 3.0 * ap * d * ux2)
        .dx();
    let squares = cc.c0 * u2.value() + cc.c1 * ux2.value() + cc.c2 * uxx2.value() + cc.c3 * uxxx2.value();
    let velocity = (2.0 * (ltt - phi) * ut.square()).value();
    let transport = -2.0 * (ut * (k * ux + phi1 * uxx + d * uxxx).dt() + 2.0 * (lt * ut * s).dx()).value();
    let flux = -2.0 * (2.0 * (lt * s).dt() * ux - 2.0 * lt.dx() * ut * s).value();
    let multiplier = -2.0 * lt * ut + k * ux + phi1 * uxx + d * uxxx + phi * u;
    let square = 2.0 * multiplier.square().value();
    let time_divergence = -2.0 * (lt * ap * u2 - 2.0 * lt * ux * s).dt().value();
    let parts = [
        third.value(),
        second.value(),
        first.value(),
        cc.c0 * u2.value(),
        cc.c1 * ux2.value(),
        cc.c2 * uxx2.value(),
        cc.c3 * uxxx2.value(),
        velocity,
        transport,
        flux,
        square,
        time_divergence,
    ];
    let value = third.value() + second.value() + first.value() + squares + velocity + transport + flux + square + time_divergence;
    (value, parts.iter().map(|v| v.abs()).sum())
}

// ---------------------------------------------------------------------------
// Multiplier side (closed-form partials, Leibniz rule)

/// Derivatives of `u = θ y` needed by the multiplier side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightedDerivatives {
    /// `[u, u_x, u_xx, u_xxx]`.
    pub u: [f64; 4],
    /// `[u_t, u_xt, u_xxt, u_xxxt]`.
    pub ut: [f64; 4],
    pub utt: f64,
}

const BINOM: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];

/// `∂x^a θ / θ` for `a = 0..=3` and `∂t^b θ / θ` for `b = 0..=2`.
fn theta_factors(p: &WeightPartials) -> ([f64; 4], [f64; 3]) {
    let (lx, lxx, lxxx) = (p.l_x, p.l_xx, p.l_xxx);
    (
        [1.0, lx, lxx + lx * lx, lxxx + 3.0 * lx * lxx + lx * lx * lx],
        [1.0, p.l_t, p.l_tt + p.l_t * p.l_t],
    )
}

/// Leibniz expansion of `∂x^i ∂t^j (θ y)` given `y` derivatives `yd(i, j)`.
pub fn weighted_derivatives<F: Fn(usize, usize) -> f64>(p: &WeightPartials, yd: F, with_utt: bool) -> WeightedDerivatives {
    let (xf, tf) = theta_factors(p);
    let mixed = |i: usize, j: usize| -> f64 {
        let mut acc = 0.0;
        for a in 0..=i {
            for b in 0..=j {
                acc += BINOM[i][a] * BINOM[j][b] * xf[a] * tf[b] * yd(i - a, j - b);
            }
        }
        p.theta * acc
    };
    WeightedDerivatives {
        u: std::array::from_fn(|i| mixed(i, 0)),
        ut: std::array::from_fn(|i| mixed(i, 1)),
        utt: if with_utt { mixed(0, 2) } else { 0.0 },
    }
}

fn point_derivatives(p: &WeightPartials, v: &PointValues) -> WeightedDerivatives {
    weighted_derivatives(p, |i, j| if j == 0 { v.y[i] } else { v.yt[i] }, false)
}

/// The multiplier side `2pθ(y_tt + y_xxxx) + 2∂_t{l_t u_t² − p̃ u_t + Φ_t u²/2}`.
pub fn multiplier_side(y: &ManufacturedField, w: &WeightField, t: f64, x: f64) -> f64 {
    let p = w.partials(t, x);
    let c = identity_coefficients_from(&p);
    let k = c.drift_gradient(&p);
    let yd = |i: usize, j: usize| y.derivative(i, j, t, x);
    let d = weighted_derivatives(&p, yd, true);
    let [u, ux, uxx, uxxx] = d.u;
    let [ut, uxt, uxxt, uxxxt] = d.ut;
    let tilde = k * ux + c.phi1 * uxx + c.d * uxxx + c.phi * u;
    // Coefficients are time independent because l_tx = 0.
    let tilde_t = k * uxt + c.phi1 * uxxt + c.d * uxxxt + c.phi * ut;
    let mult = -2.0 * p.l_t * ut + tilde;
    let equation = y.derivative(0, 2, t, x) + y.derivative(4, 0, t, x);
    2.0 * mult * p.theta * equation
        + 2.0 * (p.l_tt * ut * ut + 2.0 * p.l_t * ut * d.utt - tilde_t * ut - tilde * d.utt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseIdentity {
    pub multiplier_side: f64,
    pub brace_side: f64,
    /// `(multiplier − brace)` over the largest of `|multiplier|`, the summed
    /// magnitudes of the brace groups, and 1.
    pub residual: f64,
}

pub fn pointwise_identity(
    y: &ManufacturedField,
    w: &WeightField,
    t: f64,
    x: f64,
    variant: BraceVariant,
) -> PointwiseIdentity {
    let lhs = multiplier_side(y, w, t, x);
    let (rhs, scale) = brace_side_with_scale(y, w, t, x, variant);
    PointwiseIdentity {
        multiplier_side: lhs,
        brace_side: rhs,
        residual: (lhs - rhs) / lhs.abs().max(rhs.abs()).max(scale).max(1.0),
    }
}

/// Normalised residual of the identity at one point, using the balancing form.
pub fn pointwise_identity_residual(y: &ManufacturedField, w: &WeightField, t: f64, x: f64) -> f64 {
    pointwise_identity(y, w, t, x, BraceVariant::Verified).residual
}

// ---------------------------------------------------------------------------
// Integrated balance

/// Space-time integrals of every group of the identity for one field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BalanceTerms {
    /// `2∫pθf`.
    pub forcing: f64,
    /// `2∫d{l_t u_t² − p̃ u_t + Φ_t u²/2}`, the end-time evaluation.
    pub end_terms: f64,
    /// Spatial boundary terms.
    pub a1: f64,
    /// `∫F₄u² + F₃u_x² + F₂u_xx² + F₁u_xxx² + 2(l_tt − Φ)u_t²`.
    pub a2: f64,
    /// `2∫u_t(K u_xt + Φ₁u_xxt + D u_xxxt)`.
    pub a3: f64,
    /// `4∫[l_t u_t S]_x + 4∫(l_t S)_t u_x` with `S = u_xxx + (G−Φ₁)u_x`.
    pub a4: f64,
    /// `2∫[l_t(A−Φ)u² − 2l_t u_x S]_t`, the end-time evaluation.
    pub a5: f64,
    /// `2∫p²`.
    pub multiplier_square: f64,
    /// `2∫l_t θ² g²`.
    pub ito: f64,
    /// `Σ 2∫pθg dx ΔB`, zero in expectation.
    pub martingale: f64,
    /// `A₃` after integration by parts: `∫12 l_x² l_xx u_t²`.
    pub a3_reduced: f64,
    /// `A₄` after integration by parts: `∫12 l_tt l_x² u_x² − 2 l_tt u_xx²`.
    pub a4_reduced: f64,
}

impl BalanceTerms {
    pub fn lhs(&self) -> f64 {
        self.forcing + self.end_terms
    }

    pub fn rhs(&self) -> f64 {
        self.a1 + self.a2 - self.a3 - self.a4 - self.a5 + self.multiplier_square + self.ito
    }

    pub fn residual(&self) -> f64 {
        self.lhs() - self.rhs()
    }

    /// Residual with the martingale included: the per-path form of the identity.
    pub fn pathwise_residual(&self) -> f64 {
        self.residual() + self.martingale
    }

    pub fn magnitude(&self) -> f64 {
        [
            self.forcing,
            self.end_terms,
            self.a1,
            self.a2,
            self.a3,
            self.a4,
            self.a5,
            self.multiplier_square,
            self.ito,
        ]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
    }
}

struct NodeWeight {
    lx: f64,
    lxx: f64,
    spatial_exp: f64,
    offset: f64,
}

fn weight_partials(node: &NodeWeight, time: (f64, f64, f64, f64, f64)) -> WeightPartials {
    let (l_t, l_tt, l_ttt, l_tttt, temporal_exp) = time;
    let theta = node.spatial_exp * temporal_exp;
    WeightPartials {
        l: theta.ln(),
        theta,
        l_t,
        l_tt,
        l_ttt,
        l_tttt,
        l_x: node.lx,
        l_xx: node.lxx,
        l_xxx: 0.0,
        l_xxxx: 0.0,
    }
}

fn node_weight(w: &WeightField, x: f64) -> NodeWeight {
    let (lx, lxx, spatial_exp) = w.spatial(x);
    NodeWeight { lx, lxx, spatial_exp, offset: x - w.x0 }
}

fn end_integrand(w: &WeightField, node: &NodeWeight, t: f64, v: &PointValues) -> (f64, f64) {
    let p = weight_partials(node, w.temporal(t));
    let c = identity_coefficients_from(&p);
    let k = c.drift_gradient(&p);
    let d = point_derivatives(&p, v);
    let [u, ux, uxx, uxxx] = d.u;
    let ut = d.ut[0];
    let tilde = k * ux + c.phi1 * uxx + c.d * uxxx + c.phi * u;
    let s = uxxx + c.g_shift() * ux;
    let end = 2.0 * (p.l_t * ut * ut - tilde * ut);
    let a5 = 2.0 * (p.l_t * (c.a - c.phi) * u * u - 2.0 * p.l_t * ux * s);
    (end, a5)
}

/// Integrates every group of the identity over the field's grid.
pub fn balance_terms<F: SpaceTimeField + ?Sized>(field: &F, w: &WeightField) -> Result<BalanceTerms> {
    if w.x0 != 0.0 {
        return Err(Error::Unsupported("the integrated balance uses expansions centred at 0".into()));
    }
    let quad = field.quadrature();
    let interval = Interval::new(quad.lo(), quad.hi())?;
    w.check_interval(interval)?;
    let rule = field.time_rule();
    let increments = field.increments();
    let nodes: Vec<NodeWeight> = quad.nodes().iter().map(|&x| node_weight(w, x)).collect();
    let left = node_weight(w, interval.a);
    let right = node_weight(w, interval.b);
    let mut out = BalanceTerms::default();

    for j in 0..rule.len() {
        let slice = field.slice(j);
        let time = w.temporal(slice.t);
        let tw = rule.weights[j];
        let mut vol = BalanceTerms::default();
        let mut noise_pairing = 0.0;
        for ((node, v), &xw) in nodes.iter().zip(&slice.nodes).zip(quad.weights()) {
            let p = weight_partials(node, time);
            let c = identity_coefficients_from(&p);
            let f = derived_from(w.lambda, node.offset, &p, &c);
            let k = c.drift_gradient(&p);
            let d = point_derivatives(&p, v);
            let [u, ux, uxx, uxxx] = d.u;
            let [ut, uxt, uxxt, uxxxt] = d.ut;
            let mult = -2.0 * p.l_t * ut + k * ux + c.phi1 * uxx + c.d * uxxx + c.phi * u;
            let gp = c.g_shift();
            let s = uxxx + gp * ux;
            let s_t = uxxxt + gp * uxt;
            let lx2 = p.l_x * p.l_x;
            vol.forcing += xw * 2.0 * mult * p.theta * v.f;
            vol.a2 += xw
                * (f.f4 * u * u + f.f3 * ux * ux + f.f2 * uxx * uxx + f.f1 * uxxx * uxxx
                    + 2.0 * (p.l_tt - c.phi) * ut * ut);
            vol.a3 += xw * 2.0 * ut * (k * uxt + c.phi1 * uxxt + c.d * uxxxt);
            vol.a4 += xw * 4.0 * (p.l_tt * s + p.l_t * s_t) * ux;
            vol.multiplier_square += xw * 2.0 * mult * mult;
            vol.ito += xw * 2.0 * p.l_t * p.theta * p.theta * v.g * v.g;
            vol.a3_reduced += xw * 12.0 * lx2 * p.l_xx * ut * ut;
            vol.a4_reduced += xw * (12.0 * p.l_tt * lx2 * ux * ux - 2.0 * p.l_tt * uxx * uxx);
            noise_pairing += xw * 2.0 * mult * p.theta * v.g;
        }
        // Spatial boundary groups, evaluated where u = u_x = 0.
        let mut boundary = 0.0;
        let mut transport = 0.0;
        for (node, v, sign) in [(&right, &slice.right, 1.0), (&left, &slice.left, -1.0)] {
            let p = weight_partials(node, time);
            let d = point_derivatives(&p, v);
            let [_, ux, uxx, uxxx] = d.u;
            let lx = p.l_x;
            boundary += sign * (-20.0 * lx * lx * lx * uxx * uxx - 12.0 * p.l_xx * uxx * uxxx - 4.0 * lx * uxxx * uxxx);
            let s = uxxx + 6.0 * lx * lx * ux;
            transport += sign * 4.0 * p.l_t * d.ut[0] * s;
        }
        out.forcing += tw * vol.forcing;
        out.a1 += tw * boundary;
        out.a2 += tw * vol.a2;
        out.a3 += tw * vol.a3;
        out.a4 += tw * (vol.a4 + transport);
        out.multiplier_square += tw * vol.multiplier_square;
        out.ito += tw * vol.ito;
        out.a3_reduced += tw * vol.a3_reduced;
        out.a4_reduced += tw * vol.a4_reduced;
        if let Some(db) = increments {
            if j < db.len() {
                out.martingale += noise_pairing * db[j];
            }
        }
    }

    let [start, end] = field.endpoint_slices();
    for (slice, sign) in [(&end, 1.0), (&start, -1.0)] {
        for ((node, v), &xw) in nodes.iter().zip(&slice.nodes).zip(quad.weights()) {
            let (e, a5) = end_integrand(w, node, slice.t, v);
            out.end_terms += sign * xw * e;
            out.a5 += sign * xw * a5;
        }
    }
    Ok(out)
}

/// Ensemble summary of the integrated identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityBreakdown {
    pub lambda: f64,
    pub trials: usize,
    pub forcing: Estimate,
    pub end_terms: Estimate,
    pub a1: Estimate,
    pub a2: Estimate,
    pub a3: Estimate,
    pub a4: Estimate,
    pub a5: Estimate,
    pub multiplier_square: Estimate,
    pub ito: Estimate,
    pub a3_reduced: Estimate,
    pub a4_reduced: Estimate,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `LHS − RHS` in expectation form.
    pub residual: Estimate,
    /// Per-path residual including the martingale.
    pub pathwise_residual: Estimate,
    /// `|residual| / max(|LHS|, |RHS|)`.
    pub relative_residual: f64,
}

impl IdentityBreakdown {
    pub fn from_terms(lambda: f64, terms: &[BalanceTerms]) -> Self {
        let col = |f: fn(&BalanceTerms) -> f64| Estimate::from_samples(&terms.iter().map(f).collect::<Vec<_>>());
        let lhs = col(BalanceTerms::lhs);
        let rhs = col(BalanceTerms::rhs);
        let residual = col(BalanceTerms::residual);
        let scale = lhs.mean.abs().max(rhs.mean.abs());
        Self {
            lambda,
            trials: terms.len(),
            forcing: col(|t| t.forcing),
            end_terms: col(|t| t.end_terms),
            a1: col(|t| t.a1),
            a2: col(|t| t.a2),
            a3: col(|t| t.a3),
            a4: col(|t| t.a4),
            a5: col(|t| t.a5),
            multiplier_square: col(|t| t.multiplier_square),
            ito: col(|t| t.ito),
            a3_reduced: col(|t| t.a3_reduced),
            a4_reduced: col(|t| t.a4_reduced),
            lhs,
            rhs,
            residual,
            pathwise_residual: col(BalanceTerms::pathwise_residual),
            relative_residual: if scale > 0.0 { residual.mean.abs() / scale } else { 0.0 },
        }
    }
}

/// Checks the zero-end contract and the presence of increments, then
/// integrates the identity on every field.
pub fn integrated_balance<F: SpaceTimeField>(fields: &[F], w: &WeightField, noisy: bool) -> Result<IdentityBreakdown> {
    let terms = fields
        .iter()
        .map(|f| {
            check_balance_input(f, noisy)?;
            balance_terms(f, w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IdentityBreakdown::from_terms(w.lambda, &terms))
}

/// Contract for the integrated identity: zero end values, and increments
/// whenever the noise is active.
pub fn check_balance_input<F: SpaceTimeField + ?Sized>(field: &F, noisy: bool) -> Result<()> {
    if noisy && field.increments().is_none() {
        return Err(Error::Contract("noisy ensemble without Brownian increments".into()));
    }
    let mid = field.slice(field.time_rule().len() / 2);
    let scale = mid.nodes.iter().map(|p| p.y[0].abs().max(p.yt[0].abs())).fold(1.0, f64::max);
    let end = end_value_magnitude(field);
    if end > 1e-8 * scale {
        return Err(Error::Contract(format!("end values {end:e} are not zero")));
    }
    Ok(())
}

/// Boundary-term bound `A₁ ≥ −C ∫(λ³u_xx(b)² + λu_xxx(b)²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTermReport {
    pub lambda: f64,
    pub a1: f64,
    pub majorant: f64,
    /// Smallest `C` with `A₁ ≥ −C · majorant` on this data.
    pub empirical_constant: f64,
    /// See [`analytic_boundary_constant`].
    pub analytic_constant: f64,
    /// Contribution of `−4 l_x u_xxx²` at `x = b`.
    pub right_cubic_term: f64,
    pub holds: bool,
}

/// `C` such that the right-end integrand `−20l_x³u_xx² − 12l_xx u_xx u_xxx − 4l_x u_xxx²`
/// is at least `−C(λ³u_xx² + λu_xxx²)` pointwise.
pub fn analytic_boundary_constant(w: &WeightField, interval: Interval) -> f64 {
    let r = interval.b - w.x0;
    // The cross term splits as 24λ|u_xx u_xxx| ≤ 12λ²u_xx² + 12u_xxx².
    let slack = 12.0 / w.lambda;
    (160.0 * r.powi(3) + slack).max(8.0 * r + slack)
}

pub fn boundary_term_check<F: SpaceTimeField + ?Sized>(fields: &[&F], w: &WeightField) -> Result<BoundaryTermReport> {
    let mut a1 = 0.0;
    let mut majorant = 0.0;
    let mut right_cubic = 0.0;
    let mut interval = None;
    for field in fields {
        let quad = field.quadrature();
        let iv = Interval::new(quad.lo(), quad.hi())?;
        interval = Some(iv);
        let rule = field.time_rule();
        let right = node_weight(w, iv.b);
        let left = node_weight(w, iv.a);
        let lam = w.lambda;
        for j in 0..rule.len() {
            let s = field.slice(j);
            let time = w.temporal(s.t);
            let tw = rule.weights[j] / fields.len() as f64;
            for (node, v, sign) in [(&right, &s.right, 1.0), (&left, &s.left, -1.0)] {
                let p = weight_partials(node, time);
                let d = point_derivatives(&p, v);
                let (uxx, uxxx) = (d.u[2], d.u[3]);
                let lx = p.l_x;
                a1 += tw * sign * (-20.0 * lx.powi(3) * uxx * uxx - 12.0 * p.l_xx * uxx * uxxx - 4.0 * lx * uxxx * uxxx);
                if sign > 0.0 {
                    majorant += tw * (lam.powi(3) * uxx * uxx + lam * uxxx * uxxx);
                    right_cubic += tw * (-4.0 * lx * uxxx * uxxx);
                }
            }
        }
    }
    let interval = interval.ok_or_else(|| Error::Degenerate("no fields for the boundary check".into()))?;
    let empirical_constant = if majorant > 0.0 { (-a1 / majorant).max(0.0) } else { 0.0 };
    let analytic_constant = analytic_boundary_constant(w, interval);
    Ok(BoundaryTermReport {
        lambda: w.lambda,
        a1,
        majorant,
        empirical_constant,
        analytic_constant,
        right_cubic_term: right_cubic,
        holds: a1 >= -analytic_constant * majorant * (1.0 + 1e-12),
    })
}
