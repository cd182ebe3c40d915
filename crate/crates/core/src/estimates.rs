//! Weighted Carleman-type inequalities and the boundary observability
//! inequality, evaluated on manufactured solutions and simulated ensembles.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::beam::{Basis, Interval};
use crate::energy::modal_energy;
use crate::error::{Error, Result};
use crate::field::{end_value_magnitude, SpaceTimeField, TimeRule, TrajectoryField};
use crate::manufactured::{ManufacturedSolution, ManufacturedSolutionSpec};
use crate::parallel::try_map_indexed;
use crate::quadrature::Quadrature;
use crate::rng::uniform_symmetric;
use crate::sde::{boundary_trace, simulate_path, Forcing, ModalSource, ModalState, SimulationConfig};
use crate::stats::{ratio_of_means, Estimate};
use crate::weights::{cutoff_c2, WeightField, CUTOFF_C1};

/// Integrals entering the Carleman inequalities at one `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CarlemanTerms {
    pub lambda: f64,
    /// `∫θ²(λy_xxx² + λ³y_xx² + λ⁵y_x² + λ⁷y² + λ³y_t²)`, over the window when one is set.
    pub lhs: f64,
    /// `∫θ²(b, t)(λ³y_xx(b)² + λy_xxx(b)²) dt`.
    pub boundary: f64,
    /// `λ² ∫θ²(f² + g²)`.
    pub volume: f64,
    /// `∫θ²(y_t² + y²)` over `[0, ε] ∪ [T − ε, T]`; zero without a window.
    pub tail: f64,
}

impl CarlemanTerms {
    pub fn rhs(&self) -> f64 {
        self.boundary + self.volume
    }
}

/// Evaluates the Carleman integrals for every `λ` in one pass over the field.
/// With `epsilon`, the left side is restricted to `[ε, T − ε]` and the tails
/// are accumulated.
pub fn carleman_terms<F: SpaceTimeField + ?Sized>(
    field: &F,
    x0: f64,
    lambdas: &[f64],
    epsilon: Option<f64>,
) -> Result<Vec<CarlemanTerms>> {
    let rule = field.time_rule();
    let horizon = rule.horizon;
    let quad = field.quadrature();
    let b = quad.hi();
    let (lhs_weights, tail_weights) = match epsilon {
        None => (rule.weights.clone(), vec![0.0; rule.len()]),
        Some(eps) => {
            let inner = rule.window_weights(eps, horizon - eps)?;
            let head = rule.window_weights(0.0, eps)?;
            let end = rule.window_weights(horizon - eps, horizon)?;
            (inner, head.iter().zip(&end).map(|(p, q)| p + q).collect())
        }
    };
    let weights: Vec<WeightField> =
        lambdas.iter().map(|&lam| WeightField::new(lam, x0, horizon)).collect::<Result<_>>()?;
    // θ² separates into e^{2λ(x−x0)²} e^{2λ t²(t−T)²}.
    let spatial: Vec<Vec<f64>> = weights
        .iter()
        .map(|w| quad.nodes().iter().map(|&x| (2.0 * w.lambda * (x - x0).powi(2)).exp()).collect())
        .collect();
    let right: Vec<f64> = weights.iter().map(|w| (2.0 * w.lambda * (b - x0).powi(2)).exp()).collect();
    let mut out: Vec<CarlemanTerms> =
        lambdas.iter().map(|&lambda| CarlemanTerms { lambda, ..Default::default() }).collect();
    let mut moments = vec![[0.0; 6]; lambdas.len()];
    for j in 0..rule.len() {
        let (wl, wt, wr) = (lhs_weights[j], tail_weights[j], rule.weights[j]);
        if wl == 0.0 && wt == 0.0 && wr == 0.0 {
            continue;
        }
        let s = field.slice(j);
        let q = weights[0].time_profile(s.t)[0];
        moments.iter_mut().for_each(|m| *m = [0.0; 6]);
        for (k, m) in moments.iter_mut().enumerate() {
            for ((p, &xw), &sx) in s.nodes.iter().zip(quad.weights()).zip(&spatial[k]) {
                let c = xw * sx;
                m[0] += c * p.y[0] * p.y[0];
                m[1] += c * p.y[1] * p.y[1];
                m[2] += c * p.y[2] * p.y[2];
                m[3] += c * p.y[3] * p.y[3];
                m[4] += c * p.yt[0] * p.yt[0];
                m[5] += c * (p.f * p.f + p.g * p.g);
            }
        }
        for ((o, m), (w, &rb)) in out.iter_mut().zip(&moments).zip(weights.iter().zip(&right)) {
            let lam = w.lambda;
            let tf = (2.0 * lam * q).exp();
            let l2 = lam * lam;
            let l3 = l2 * lam;
            let volume = lam * m[3] + l3 * m[2] + l3 * l2 * m[1] + l3 * l2 * l2 * m[0] + l3 * m[4];
            o.lhs += wl * tf * volume;
            o.tail += wt * tf * (m[4] + m[0]);
            o.volume += wr * tf * l2 * m[5];
            o.boundary += wr * tf * rb * (l3 * s.right.y[2].powi(2) + lam * s.right.y[3].powi(2));
        }
    }
    Ok(out)
}

pub fn carleman_lhs<F: SpaceTimeField + ?Sized>(field: &F, w: &WeightField) -> Result<f64> {
    Ok(carleman_terms(field, w.x0, &[w.lambda], None)?[0].lhs)
}

pub fn carleman_rhs<F: SpaceTimeField + ?Sized>(field: &F, w: &WeightField) -> Result<f64> {
    Ok(carleman_terms(field, w.x0, &[w.lambda], None)?[0].rhs())
}

/// One row of an inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub lambda: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub ratio: Estimate,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub inequality: String,
    pub rows: Vec<EstimateRow>,
    pub empirical_lambda0: Option<f64>,
    pub empirical_constant: Option<f64>,
    /// Inputs skipped as degenerate `0/0` cases.
    pub skipped: Vec<String>,
    pub pass: bool,
}

/// Smallest grid `λ` from which the ratio sequence is non-increasing.
pub fn empirical_lambda0(lambdas: &[f64], ratios: &[f64]) -> Option<f64> {
    if lambdas.is_empty() {
        return None;
    }
    let mut start = lambdas.len() - 1;
    while start > 0 && ratios[start - 1] >= ratios[start] {
        start -= 1;
    }
    Some(lambdas[start])
}

/// Spatial and temporal resolution for deterministic evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub space_panels: usize,
    pub space_order: usize,
    pub time_panels: usize,
    pub time_order: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { space_panels: 8, space_order: 16, time_panels: 8, time_order: 16 }
    }
}

impl Resolution {
    pub fn sample(&self, spec: &ManufacturedSolutionSpec, interval: Interval, horizon: f64) -> Result<ManufacturedSolution> {
        let quad = Quadrature::composite(interval.a, interval.b, self.space_panels, self.space_order)?;
        let rule = TimeRule::gauss(horizon, self.time_panels, self.time_order)?;
        Ok(ManufacturedSolution::new(spec.field.clone(), interval, quad, rule))
    }
}

/// Per-solution λ sweep of the Carleman ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSweep {
    pub name: String,
    pub rows: Vec<EstimateRow>,
    pub lambda0: Option<f64>,
    /// Largest relative change of the ratio when the amplitude is doubled.
    pub amplitude_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanSweep {
    pub scenarios: Vec<ScenarioSweep>,
    pub report: EstimateReport,
    pub max_amplitude_deviation: f64,
}

fn deterministic_row(lambda: f64, lhs: f64, rhs: f64) -> EstimateRow {
    let ratio = lhs / rhs;
    EstimateRow {
        lambda,
        lhs: Estimate::exact(lhs),
        rhs: Estimate::exact(rhs),
        ratio: Estimate::exact(ratio),
        pass: ratio.is_finite(),
    }
}

/// Carleman inequality on a corpus of zero-end manufactured solutions.
///
/// The corpus constant is the largest ratio at or above the largest
/// per-solution `λ₀`.
pub fn verify_carleman(
    corpus: &[ManufacturedSolutionSpec],
    interval: Interval,
    horizon: f64,
    lambdas: &[f64],
    resolution: Resolution,
) -> Result<CarlemanSweep> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    for spec in corpus {
        spec.validate(interval, horizon)?;
    }
    let x0 = 0.0;
    let results = try_map_indexed(corpus.len(), |i| -> Result<Option<ScenarioSweep>> {
        let spec = &corpus[i];
        let field = resolution.sample(spec, interval, horizon)?;
        let terms = carleman_terms(&field, x0, lambdas, None)?;
        if terms.iter().all(|t| t.lhs == 0.0 && t.rhs() == 0.0) {
            return Ok(None);
        }
        let doubled = resolution.sample(&spec.with_amplitude(2.0), interval, horizon)?;
        let doubled = carleman_terms(&doubled, x0, lambdas, None)?;
        let rows: Vec<EstimateRow> = terms.iter().map(|t| deterministic_row(t.lambda, t.lhs, t.rhs())).collect();
        let amplitude_deviation = terms
            .iter()
            .zip(&doubled)
            .map(|(a, b)| {
                let (ra, rb) = (a.lhs / a.rhs(), b.lhs / b.rhs());
                (ra - rb).abs() / ra.abs()
            })
            .fold(0.0, f64::max);
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio.mean).collect();
        Ok(Some(ScenarioSweep {
            name: spec.name.clone(),
            lambda0: empirical_lambda0(lambdas, &ratios),
            rows,
            amplitude_deviation,
        }))
    })?;
    let mut scenarios = Vec::new();
    let mut skipped = Vec::new();
    for (spec, r) in corpus.iter().zip(results) {
        match r {
            Some(s) => scenarios.push(s),
            None => skipped.push(spec.name.clone()),
        }
    }
    let lambda0 = scenarios.iter().filter_map(|s| s.lambda0).reduce(f64::max);
    let constant = lambda0.and_then(|l0| {
        scenarios
            .iter()
            .flat_map(|s| s.rows.iter())
            .filter(|r| r.lambda >= l0)
            .map(|r| r.ratio.mean)
            .reduce(f64::max)
    });
    // Corpus-level rows: the worst ratio at each λ.
    let rows: Vec<EstimateRow> = lambdas
        .iter()
        .enumerate()
        .filter_map(|(k, _)| {
            scenarios
                .iter()
                .map(|s| &s.rows[k])
                .max_by(|a, b| a.ratio.mean.total_cmp(&b.ratio.mean))
                .cloned()
        })
        .collect();
    let max_amplitude_deviation = scenarios.iter().map(|s| s.amplitude_deviation).fold(0.0, f64::max);
    let pass = !rows.is_empty() && rows.iter().all(|r| r.pass);
    Ok(CarlemanSweep {
        report: EstimateReport {
            inequality: "carleman".into(),
            rows,
            empirical_lambda0: lambda0,
            empirical_constant: constant,
            skipped,
            pass,
        },
        scenarios,
        max_amplitude_deviation,
    })
}

/// An ensemble scenario of the full system with random noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleScenario {
    pub config: SimulationConfig,
    pub forcing: Forcing,
    pub initial: ModalState,
}

impl EnsembleScenario {
    pub fn basis(&self) -> Result<Basis> {
        Basis::new(self.config.interval, self.config.modes)
    }
}

/// `κ(ε) = 4 max(c₂², c₁²T²) / ε⁴`, the tail weight per `λ²`.
pub fn tail_coefficient(epsilon: f64, horizon: f64) -> f64 {
    4.0 * cutoff_c2().powi(2).max((CUTOFF_C1 * horizon).powi(2)) / epsilon.powi(4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisedRow {
    pub lambda: f64,
    pub lhs: Estimate,
    pub boundary: Estimate,
    pub volume: Estimate,
    pub tail: Estimate,
    /// `κ(ε) λ²`.
    pub tail_weight: f64,
    pub ratio: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisedCarlemanReport {
    pub epsilon: f64,
    pub tail_coefficient: f64,
    /// Tail coefficient at `ε/2`, on the same ensemble.
    pub halved_tail_coefficient: f64,
    pub tail_scaling: f64,
    pub calibration: Vec<RevisedRow>,
    pub validation: Vec<RevisedRow>,
    /// Rows recomputed at `ε/2` on the calibration ensemble.
    pub halved: Vec<RevisedRow>,
    /// Upper confidence bound `max(ratio + 3 SE)` on the calibration half.
    pub constant: f64,
    /// Largest calibration ratio.
    pub point_constant: f64,
    pub trials: usize,
    pub pass: bool,
}

fn revised_rows(terms: &[Vec<CarlemanTerms>], lambdas: &[f64], epsilon: f64, horizon: f64) -> Vec<RevisedRow> {
    let kappa = tail_coefficient(epsilon, horizon);
    lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let col = |f: &dyn Fn(&CarlemanTerms) -> f64| terms.iter().map(|t| f(&t[k])).collect::<Vec<f64>>();
            let weight = kappa * lambda * lambda;
            let lhs = col(&|t| t.lhs);
            let rhs = col(&|t| t.rhs() + weight * t.tail);
            RevisedRow {
                lambda,
                lhs: Estimate::from_samples(&lhs),
                boundary: Estimate::from_samples(&col(&|t| t.boundary)),
                volume: Estimate::from_samples(&col(&|t| t.volume)),
                tail: Estimate::from_samples(&col(&|t| t.tail)),
                tail_weight: weight,
                ratio: ratio_of_means(&lhs, &rhs),
            }
        })
        .collect()
}

fn ensemble_terms(
    scenario: &EnsembleScenario,
    basis: &Basis,
    trials: std::ops::Range<u64>,
    lambdas: &[f64],
    epsilons: &[f64],
) -> Result<Vec<Vec<Vec<CarlemanTerms>>>> {
    let start = trials.start;
    let count = (trials.end - trials.start) as usize;
    try_map_indexed(count, |i| {
        let traj = simulate_path(&scenario.config, basis, &scenario.forcing, &scenario.initial, start + i as u64)?;
        let field = TrajectoryField::new(&traj, basis, &scenario.forcing);
        epsilons.iter().map(|&eps| carleman_terms(&field, 0.0, lambdas, Some(eps))).collect()
    })
}

/// Revised Carleman inequality on `[ε, T − ε]` with the tail penalty.
///
/// The constant is fitted on trials `0..N` as the largest `ratio + 3 SE` and
/// validated on `N..2N`: each validation ratio must stay within three
/// standard errors of it.
pub fn verify_revised_carleman(scenario: &EnsembleScenario, epsilon: f64, lambdas: &[f64]) -> Result<RevisedCarlemanReport> {
    let horizon = scenario.config.horizon;
    if !(epsilon > 0.0 && epsilon < 0.5 * horizon) {
        return Err(Error::Contract(format!("epsilon {epsilon} outside (0, T/2)")));
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    let basis = scenario.basis()?;
    let n = scenario.config.trials as u64;
    let half = 0.5 * epsilon;
    let calibration = ensemble_terms(scenario, &basis, 0..n, lambdas, &[epsilon, half])?;
    let validation = ensemble_terms(scenario, &basis, n..2 * n, lambdas, &[epsilon])?;
    let pick = |set: &[Vec<Vec<CarlemanTerms>>], e: usize| -> Vec<Vec<CarlemanTerms>> {
        set.iter().map(|per| per[e].clone()).collect()
    };
    let cal_rows = revised_rows(&pick(&calibration, 0), lambdas, epsilon, horizon);
    let halved = revised_rows(&pick(&calibration, 1), lambdas, half, horizon);
    let val_rows = revised_rows(&pick(&validation, 0), lambdas, epsilon, horizon);
    let point_constant = cal_rows.iter().map(|r| r.ratio.mean).fold(0.0, f64::max);
    let constant = cal_rows.iter().map(|r| r.ratio.mean + 3.0 * r.ratio.std_err).fold(0.0, f64::max);
    let pass = constant.is_finite()
        && val_rows.iter().all(|r| r.ratio.mean.is_finite() && r.ratio.mean <= constant + 3.0 * r.ratio.std_err);
    let kappa = tail_coefficient(epsilon, horizon);
    let kappa_half = tail_coefficient(half, horizon);
    Ok(RevisedCarlemanReport {
        epsilon,
        tail_coefficient: kappa,
        halved_tail_coefficient: kappa_half,
        tail_scaling: kappa_half / kappa,
        calibration: cal_rows,
        validation: val_rows,
        halved,
        constant,
        point_constant,
        trials: n as usize,
        pass,
    })
}

/// `Σ_{j ≤ order} ‖∂ʲ Σ c_k v_k‖²` by quadrature.
pub fn modal_sobolev_norm_sq(basis: &Basis, coefficients: &[f64], order: usize) -> f64 {
    let quad = basis.quadrature();
    let mut acc = 0.0;
    for (node, &w) in quad.weights().iter().enumerate() {
        let vals = basis.node_values(node);
        for j in 0..=order.min(4) {
            let v: f64 = coefficients.iter().zip(vals).map(|(c, v)| c * v[j]).sum();
            acc += w * v * v;
        }
    }
    acc
}

/// Stream tag for initial data, disjoint from the path streams.
pub const DATA_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityConfig {
    pub config: SimulationConfig,
    pub data: usize,
    pub paths: usize,
    pub drift: ModalSource,
    pub noise: ModalSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatumRow {
    pub datum: usize,
    pub initial: ModalState,
    pub lhs: Estimate,
    pub boundary: Estimate,
    pub forcing: f64,
    pub noise: f64,
    pub ratio: f64,
    /// Ratio using only the first half of the paths.
    pub half_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub rows: Vec<DatumRow>,
    /// Constant from `paths / 2` paths per datum.
    pub constant_half: f64,
    /// Constant from all `paths`.
    pub constant: f64,
    pub relative_change: f64,
    pub worst_datum: Option<usize>,
    pub boundary_positive: bool,
    pub degenerate: bool,
    pub pass: bool,
}

/// Observability inequality in squared form:
/// `E[E(T)] ≤ C (E∫(y_xx(b)² + y_xxx(b)²) + E∫‖f‖²_{H²} + sup‖g‖²_{H⁴})`.
///
/// Initial modal coefficients are iid uniform on `[−1, 1]` drawn from stream
/// `DATA_STREAM | d`; datum `d` uses noise streams `(d << 32) | p`.
pub fn verify_observability(setup: &ObservabilityConfig) -> Result<ObservabilityReport> {
    let cfg = &setup.config;
    cfg.validate()?;
    if setup.paths < 2 || setup.data == 0 {
        return Err(Error::InvalidConfig("observability needs at least one datum and two paths".into()));
    }
    let basis = Basis::new(cfg.interval, cfg.modes)?;
    let m = cfg.modes;
    let eigen = basis.eigenvalues();
    let forcing = Forcing { drift: setup.drift.clone(), noise: setup.noise.clone(), damping: 0.0 };
    let h = cfg.h();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut forcing_sq = 0.0;
    let mut noise_sup: f64 = 0.0;
    for i in 0..=cfg.steps {
        let t = cfg.time(i);
        let w = if i == 0 || i == cfg.steps { 0.5 * h } else { h };
        setup.drift.eval_into(t, &mut f);
        setup.noise.eval_into(t, &mut g);
        forcing_sq += w * modal_sobolev_norm_sq(&basis, &f, 2);
        noise_sup = noise_sup.max(modal_sobolev_norm_sq(&basis, &g, 4));
    }
    let rows = try_map_indexed(setup.data, |d| -> Result<DatumRow> {
        let raw = uniform_symmetric(cfg.seed, DATA_STREAM | d as u64, 2 * m);
        let initial = ModalState::new(raw[..m].to_vec(), raw[m..].to_vec());
        let mut lhs = Vec::with_capacity(setup.paths);
        let mut boundary = Vec::with_capacity(setup.paths);
        for p in 0..setup.paths {
            let trial = ((d as u64) << 32) | p as u64;
            let traj = simulate_path(cfg, &basis, &forcing, &initial, trial)?;
            let n = traj.steps;
            lhs.push(modal_energy(traj.displacement(n), traj.velocity(n), &eigen));
            let tr = boundary_trace(&traj, &basis);
            let obs: f64 = (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 0.5 * h } else { h };
                    w * (tr.yxx[i].powi(2) + tr.yxxx[i].powi(2))
                })
                .sum();
            boundary.push(obs);
        }
        let ratio_of = |k: usize| {
            let num = Estimate::from_samples(&lhs[..k]).mean;
            let den = Estimate::from_samples(&boundary[..k]).mean + forcing_sq + noise_sup;
            if den > 0.0 {
                num / den
            } else {
                f64::NAN
            }
        };
        Ok(DatumRow {
            datum: d,
            lhs: Estimate::from_samples(&lhs),
            boundary: Estimate::from_samples(&boundary),
            forcing: forcing_sq,
            noise: noise_sup,
            ratio: ratio_of(setup.paths),
            half_ratio: ratio_of(setup.paths / 2),
            initial,
        })
    })?;
    let valid: Vec<&DatumRow> = rows.iter().filter(|r| r.ratio.is_finite()).collect();
    let degenerate = valid.is_empty();
    let constant = valid.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let constant_half = valid.iter().map(|r| r.half_ratio).fold(0.0, f64::max);
    let worst_datum = valid.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)).map(|r| r.datum);
    let boundary_positive = rows
        .iter()
        .filter(|r| r.initial.c.iter().chain(&r.initial.cd).any(|&v| v != 0.0))
        .all(|r| r.boundary.mean > 0.0);
    let relative_change = if constant > 0.0 { (constant - constant_half).abs() / constant } else { 0.0 };
    Ok(ObservabilityReport {
        pass: !degenerate && constant.is_finite() && relative_change <= 0.1 && boundary_positive,
        rows,
        constant_half,
        constant,
        relative_change,
        worst_datum,
        boundary_positive,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub empirical_lambda0: Option<f64>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "lambda,lhs,rhs,ratio,std_err")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.lambda, r.lhs, r.rhs, r.ratio, r.std_err)?;
        }
        Ok(())
    }

    /// `(λ, ratio)` pairs as CSV.
    pub fn write_ratio_series<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "lambda,ratio")?;
        for r in &self.rows {
            writeln!(out, "{},{}", r.lambda, r.ratio)?;
        }
        Ok(())
    }
}

/// Ensemble-mean Carleman ratio over a λ grid; rows come out in grid order.
pub fn lambda_sweep<F: SpaceTimeField>(fields: &[F], x0: f64, lambdas: &[f64]) -> Result<SweepTable> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    if fields.is_empty() {
        return Err(Error::Degenerate("no fields to sweep".into()));
    }
    for f in fields {
        let end = end_value_magnitude(f);
        if end > 1e-8 {
            return Err(Error::Contract(format!("end values {end:e} are not zero")));
        }
    }
    let terms: Vec<Vec<CarlemanTerms>> =
        try_map_indexed(fields.len(), |i| carleman_terms(&fields[i], x0, lambdas, None))?;
    let rows: Vec<SweepRow> = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let lhs: Vec<f64> = terms.iter().map(|t| t[k].lhs).collect();
            let rhs: Vec<f64> = terms.iter().map(|t| t[k].rhs()).collect();
            let ratio = ratio_of_means(&lhs, &rhs);
            SweepRow {
                lambda,
                lhs: Estimate::from_samples(&lhs).mean,
                rhs: Estimate::from_samples(&rhs).mean,
                ratio: ratio.mean,
                std_err: ratio.std_err,
            }
        })
        .collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(SweepTable { empirical_lambda0: empirical_lambda0(lambdas, &ratios), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda0_marks_start_of_non_increasing_tail() {
        let l = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_lambda0(&l, &[1.0, 3.0, 2.0, 2.0]), Some(2.0));
        assert_eq!(empirical_lambda0(&l, &[4.0, 3.0, 2.0, 1.0]), Some(1.0));
        assert_eq!(empirical_lambda0(&l, &[1.0, 2.0, 3.0, 4.0]), Some(4.0));
    }

    #[test]
    fn tail_coefficient_scales_as_inverse_fourth_power() {
        let r = tail_coefficient(0.0625, 1.0) / tail_coefficient(0.125, 1.0);
        assert!((r - 16.0).abs() < 1e-12);
    }
}
