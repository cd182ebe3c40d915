//! The Carleman weight `l = λ[(x − x0)² + t²(t − T)²]`, the multiplier
//! coefficients built from it, the time cutoff and the coefficient audit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beam::Interval;
use crate::error::{Error, Result};
use crate::identity::{brace_coefficients, BraceVariant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightField {
    pub lambda: f64,
    pub x0: f64,
    pub horizon: f64,
}

/// Closed-form values of `l`, `θ = e^l` and the partials of `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPartials {
    pub l: f64,
    pub theta: f64,
    pub l_t: f64,
    pub l_tt: f64,
    pub l_ttt: f64,
    pub l_tttt: f64,
    pub l_x: f64,
    pub l_xx: f64,
    pub l_xxx: f64,
    pub l_xxxx: f64,
}

impl WeightField {
    pub fn new(lambda: f64, x0: f64, horizon: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {horizon}")));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidConfig("weight centre must be finite".into()));
        }
        Ok(Self { lambda, x0, horizon })
    }

    /// Requires the centre to lie strictly left of the interval.
    pub fn check_interval(&self, interval: Interval) -> Result<()> {
        if self.x0 < interval.a {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "weight centre {} must lie left of the interval start {}",
                self.x0, interval.a
            )))
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.x0, self.horizon)
    }

    /// `t²(t − T)²` and its first four derivatives.
    pub fn time_profile(&self, t: f64) -> [f64; 5] {
        let big = self.horizon;
        [
            t * t * (t - big) * (t - big),
            2.0 * t * (t - big) * (2.0 * t - big),
            2.0 * (6.0 * t * t - 6.0 * t * big + big * big),
            24.0 * t - 12.0 * big,
            24.0,
        ]
    }

    pub fn l(&self, t: f64, x: f64) -> f64 {
        let s = x - self.x0;
        self.lambda * (s * s + self.time_profile(t)[0])
    }

    pub fn theta(&self, t: f64, x: f64) -> f64 {
        self.l(t, x).exp()
    }

    /// Spatial part of the weight at `x`: `(l_x, l_xx, e^{λ(x−x0)²})`.
    pub fn spatial(&self, x: f64) -> (f64, f64, f64) {
        let s = x - self.x0;
        (2.0 * self.lambda * s, 2.0 * self.lambda, (self.lambda * s * s).exp())
    }

    /// Temporal part at `t`: `(l_t, l_tt, l_ttt, l_tttt, e^{λ t²(t−T)²})`.
    pub fn temporal(&self, t: f64) -> (f64, f64, f64, f64, f64) {
        let q = self.time_profile(t);
        let lam = self.lambda;
        (lam * q[1], lam * q[2], lam * q[3], lam * q[4], (lam * q[0]).exp())
    }

    pub fn partials(&self, t: f64, x: f64) -> WeightPartials {
        let s = x - self.x0;
        let l = self.lambda * (s * s + self.time_profile(t)[0]);
        let (l_x, l_xx, _) = self.spatial(x);
        let (l_t, l_tt, l_ttt, l_tttt, _) = self.temporal(t);
        WeightPartials { l, theta: l.exp(), l_t, l_tt, l_ttt, l_tttt, l_x, l_xx, l_xxx: 0.0, l_xxxx: 0.0 }
    }
}

pub fn eval_weight(w: &WeightField, t: f64, x: f64) -> WeightPartials {
    w.partials(t, x)
}

/// Coefficients of the weighted multiplier identity at one point, with
/// `Φ₁ = −6 l_xx` and `Φ = −8 l_x² l_xx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCoefficients {
    pub a: f64,
    pub g: f64,
    pub b: f64,
    pub d: f64,
    pub phi: f64,
    pub phi1: f64,
}

impl IdentityCoefficients {
    /// `B − (G − Φ₁)_x`, the coefficient of `u_x` in the multiplier.
    pub fn drift_gradient(&self, p: &WeightPartials) -> f64 {
        self.b - 12.0 * p.l_x * p.l_xx
    }

    /// `G − Φ₁`.
    pub fn g_shift(&self) -> f64 {
        self.g - self.phi1
    }
}

pub fn identity_coefficients(w: &WeightField, t: f64, x: f64) -> IdentityCoefficients {
    identity_coefficients_from(&w.partials(t, x))
}

pub fn identity_coefficients_from(p: &WeightPartials) -> IdentityCoefficients {
    let (lx, lxx) = (p.l_x, p.l_xx);
    IdentityCoefficients {
        a: lx.powi(4) + 4.0 * lx * p.l_xxx - p.l_xxxx - 6.0 * lx * lx * lxx + 3.0 * lxx * lxx + p.l_t * p.l_t - p.l_tt,
        g: 6.0 * lx * lx - 6.0 * lxx,
        b: 12.0 * lx * lxx - 4.0 * lx.powi(3) - 4.0 * p.l_xxx,
        d: -4.0 * lx,
        phi: -8.0 * lx * lx * lxx,
        phi1: -6.0 * lxx,
    }
}

/// Expanded volume coefficients `F₁…F₄` and `H₁…H₅`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedCoefficients {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    pub h5: f64,
}

impl DerivedCoefficients {
    pub fn h(&self) -> [f64; 5] {
        [self.h1, self.h2, self.h3, self.h4, self.h5]
    }

    pub fn f(&self) -> [f64; 4] {
        [self.f1, self.f2, self.f3, self.f4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierCoefficients {
    pub identity: IdentityCoefficients,
    pub derived: DerivedCoefficients,
}

fn require_centred(w: &WeightField) -> Result<()> {
    if w.x0 == 0.0 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "expanded F/H coefficients are defined for a weight centred at 0, got {}",
            w.x0
        )))
    }
}

/// `F₃` with the `u_x²` group re-derived: `2304λ⁵x⁴ − 768λ⁴x² + 512λ³`.
fn f3_expanded(lam: f64, x: f64) -> f64 {
    let x2 = x * x;
    2304.0 * lam.powi(5) * x2 * x2 - 768.0 * lam.powi(4) * x2 + 512.0 * lam.powi(3)
}

/// `F₃` as printed in the source expansion: `2304λ⁵x⁴ − 768λ⁴x² + 192λ³x + 320λ³`.
pub fn printed_f3(w: &WeightField, x: f64) -> f64 {
    let lam = w.lambda;
    let x2 = x * x;
    2304.0 * lam.powi(5) * x2 * x2 - 768.0 * lam.powi(4) * x2 + 192.0 * lam.powi(3) * x + 320.0 * lam.powi(3)
}

/// `H₃` built on the printed `F₃`.
pub fn printed_h3(w: &WeightField, t: f64, x: f64) -> f64 {
    let p = w.partials(t, x);
    printed_f3(w, x) - 12.0 * p.l_tt * p.l_x * p.l_x
}

pub fn derived_coefficients(w: &WeightField, t: f64, x: f64) -> Result<DerivedCoefficients> {
    require_centred(w)?;
    let p = w.partials(t, x);
    Ok(derived_from(w.lambda, x, &p, &identity_coefficients_from(&p)))
}

/// Expanded coefficients at spatial offset `x` from the weight centre.
pub fn derived_from(lam: f64, x: f64, p: &WeightPartials, c: &IdentityCoefficients) -> DerivedCoefficients {
    let x2 = x * x;
    let a_minus_phi = c.a - c.phi;
    let a_minus_phi_t = 2.0 * p.l_t * p.l_tt - p.l_ttt;
    let f1 = 32.0 * lam;
    let f2 = 352.0 * lam.powi(3) * x2;
    let f3 = f3_expanded(lam, x);
    let f4 = 1536.0 * lam.powi(7) * x2.powi(3) + 512.0 * lam.powi(6) * x2 * x2 - 4224.0 * lam.powi(5) * x2
        + 384.0 * lam.powi(4)
        - 32.0 * lam.powi(3) * x2 * (p.l_t * p.l_t - p.l_tt)
        + 2.0 * p.l_tt * a_minus_phi
        + 2.0 * p.l_t * a_minus_phi_t;
    DerivedCoefficients {
        f1,
        f2,
        f3,
        f4,
        h1: 2.0 * p.l_tt + 4.0 * p.l_x * p.l_x * p.l_xx,
        h2: f4,
        h3: f3 - 12.0 * p.l_tt * p.l_x * p.l_x,
        h4: f2 + 2.0 * p.l_tt,
        h5: f1,
    }
}

/// All coefficients at `(t, x)`; the expanded ones need a weight centred at 0.
pub fn coefficients(w: &WeightField, t: f64, x: f64) -> Result<MultiplierCoefficients> {
    Ok(MultiplierCoefficients { identity: identity_coefficients(w, t, x), derived: derived_coefficients(w, t, x)? })
}

/// Bound constants of the quintic smoothstep cutoff: `|χ'| ≤ c₁/ε`, `|χ''| ≤ c₂/ε²`.
pub const CUTOFF_C1: f64 = 15.0 / 4.0;
pub fn cutoff_c2() -> f64 {
    40.0 / 3f64.sqrt()
}

/// `χ(t)`: 0 on `[0, ε/2]`, a quintic smoothstep on `[ε/2, ε]`, 1 on the
/// plateau, and mirrored on `[T − ε, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    epsilon: f64,
    horizon: f64,
}

impl Cutoff {
    pub fn new(epsilon: f64, horizon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5 * horizon) {
            return Err(Error::Contract(format!("cutoff width {epsilon} must lie in (0, T/2) with T = {horizon}")));
        }
        Ok(Self { epsilon, horizon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn ramp(&self, t: f64) -> (f64, f64, f64) {
        let width = 0.5 * self.epsilon;
        let u = ((t - width) / width).clamp(0.0, 1.0);
        let s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
        let ds = 30.0 * u * u * (1.0 - u) * (1.0 - u);
        let dds = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
        (s, ds / width, dds / (width * width))
    }

    /// `(χ, χ', χ'')` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if t <= 0.5 * self.horizon {
            self.ramp(t)
        } else {
            let (s, d1, d2) = self.ramp(self.horizon - t);
            (s, -d1, d2)
        }
    }

    pub fn slope_bound(&self) -> f64 {
        CUTOFF_C1 / self.epsilon
    }

    pub fn curvature_bound(&self) -> f64 {
        cutoff_c2() / (self.epsilon * self.epsilon)
    }
}

pub fn eval_cutoff(c: &Cutoff, t: f64) -> (f64, f64, f64) {
    c.eval(t)
}

/// Powers `p_i` in the lower bounds `H_i ≥ C_i λ^{p_i}`.
pub const LOWER_BOUND_POWERS: [i32; 5] = [3, 7, 5, 3, 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub lambda: f64,
    /// Minimum over the grid of `H_i / λ^{p_i}`.
    pub minima: [f64; 5],
    pub all_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundTable {
    pub rows: Vec<LowerBoundRow>,
    /// Smallest grid λ from which every larger grid λ has all minima positive.
    pub empirical_lambda0: Option<f64>,
    /// Minima at the largest λ of the grid.
    pub limiting_constants: [f64; 5],
}

/// Minima of `H_i / λ^{p_i}` over a uniform `nt × nx` grid of `[0, T] × [a, b]`.
pub fn coefficient_lower_bounds(
    lambdas: &[f64],
    interval: Interval,
    horizon: f64,
    nt: usize,
    nx: usize,
) -> Result<LowerBoundTable> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    if nt < 2 || nx < 2 {
        return Err(Error::InvalidConfig("lower-bound grid needs at least 2 points per axis".into()));
    }
    if !(interval.a > 0.0) {
        return Err(Error::Unsupported("coefficient bounds assume a > 0 with the weight centred at 0".into()));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(sorted.len());
    for &lam in &sorted {
        let w = WeightField::new(lam, 0.0, horizon)?;
        let mut minima = [f64::INFINITY; 5];
        for it in 0..nt {
            let t = horizon * it as f64 / (nt - 1) as f64;
            for ix in 0..nx {
                let x = interval.a + interval.length() * ix as f64 / (nx - 1) as f64;
                let h = derived_coefficients(&w, t, x)?.h();
                for i in 0..5 {
                    minima[i] = minima[i].min(h[i] / lam.powi(LOWER_BOUND_POWERS[i]));
                }
            }
        }
        rows.push(LowerBoundRow { lambda: lam, minima, all_positive: minima.iter().all(|&m| m > 0.0) });
    }
    let mut empirical_lambda0 = None;
    for row in rows.iter().rev() {
        if row.all_positive {
            empirical_lambda0 = Some(row.lambda);
        } else {
            break;
        }
    }
    let limiting_constants = rows.last().map(|r| r.minima).unwrap_or([f64::NAN; 5]);
    Ok(LowerBoundTable { rows, empirical_lambda0, limiting_constants })
}

/// Comparison of one expanded coefficient against its re-derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub max_relative_difference: f64,
    /// `(λ, t, x)` where the largest difference occurred.
    pub worst_point: (f64, f64, f64),
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientAudit {
    pub points: usize,
    pub tolerance: f64,
    /// The expansions used downstream.
    pub entries: Vec<AuditEntry>,
    /// Expansions as printed in the source text, checked against the same
    /// re-derivation; disagreements are reported here.
    pub printed: Vec<AuditEntry>,
    pub all_agree: bool,
}

impl CoefficientAudit {
    pub fn discrepancies(&self) -> Vec<&AuditEntry> {
        self.entries.iter().chain(&self.printed).filter(|e| !e.agrees).collect()
    }
}

fn relative_difference(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Re-derived `[F₁, F₂, F₃, F₄, H₁, …, H₅]` from the identity's brace groups
/// evaluated with jets.
pub fn rederived_coefficients(w: &WeightField, t: f64, x: f64) -> [f64; 9] {
    let r = brace_coefficients(w, t, x, BraceVariant::Verified);
    [
        r.c3,
        r.c2,
        r.c1,
        r.c0,
        r.velocity - r.velocity_flux,
        r.c0,
        r.c1 - r.time_shift,
        r.c2 + r.curvature_shift,
        r.c3,
    ]
}

/// Compares the closed-form expansions against a jet re-derivation at
/// `points` random points with `λ ∈ lambda_range`.
pub fn coefficient_audit(
    points: usize,
    seed: u64,
    interval: Interval,
    horizon: f64,
    lambda_range: (f64, f64),
    tolerance: f64,
) -> Result<CoefficientAudit> {
    const NAMES: [&str; 9] = ["F1", "F2", "F3", "F4", "H1", "H2", "H3", "H4", "H5"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [(0.0f64, (0.0, 0.0, 0.0)); 9];
    let mut worst_printed = [(0.0f64, (0.0, 0.0, 0.0)); 4];
    for _ in 0..points {
        let lam = rng.random_range(lambda_range.0..=lambda_range.1);
        let t = rng.random_range(0.0..=horizon);
        let x = rng.random_range(interval.a..=interval.b);
        let w = WeightField::new(lam, 0.0, horizon)?;
        let closed = derived_coefficients(&w, t, x)?;
        let closed = [
            closed.f1, closed.f2, closed.f3, closed.f4, closed.h1, closed.h2, closed.h3, closed.h4, closed.h5,
        ];
        let re = rederived_coefficients(&w, t, x);
        for i in 0..9 {
            let d = relative_difference(closed[i], re[i]);
            if d > worst[i].0 {
                worst[i] = (d, (lam, t, x));
            }
        }
        // Printed F₃/H₃ against the verified and the printed brace groups.
        let printed = brace_coefficients(&w, t, x, BraceVariant::Printed);
        let pf3 = printed_f3(&w, x);
        let ph3 = printed_h3(&w, t, x);
        let checks = [
            relative_difference(pf3, re[2]),
            relative_difference(ph3, re[6]),
            relative_difference(pf3, printed.c1),
            relative_difference(ph3, printed.c1 - printed.time_shift),
        ];
        for i in 0..4 {
            if checks[i] > worst_printed[i].0 {
                worst_printed[i] = (checks[i], (lam, t, x));
            }
        }
    }
    let entries: Vec<AuditEntry> = NAMES
        .iter()
        .zip(worst)
        .map(|(n, (d, p))| AuditEntry {
            name: (*n).to_string(),
            max_relative_difference: d,
            worst_point: p,
            agrees: d <= tolerance,
        })
        .collect();
    const PRINTED: [&str; 4] = [
        "F3 printed vs re-derived",
        "H3 printed vs re-derived",
        "F3 printed vs printed brace groups",
        "H3 printed vs printed brace groups",
    ];
    let printed: Vec<AuditEntry> = PRINTED
        .iter()
        .zip(worst_printed)
        .map(|(n, (d, p))| AuditEntry {
            name: (*n).to_string(),
            max_relative_difference: d,
            worst_point: p,
            agrees: d <= tolerance,
        })
        .collect();
    let all_agree = entries.iter().all(|e| e.agrees);
    Ok(CoefficientAudit { points, tolerance, entries, printed, all_agree })
}
