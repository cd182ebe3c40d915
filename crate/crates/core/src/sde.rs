//! Modal integration of `dy_t + y_xxxx dt = f dt + g dB` on a clamped basis.
//!
//! Each mode obeys `c_k'' + λ_k c_k = f_k + g_k Ḃ`. The homogeneous part is
//! advanced by the exact rotation map, the drift enters through the exact
//! convolution of its linear interpolant over the step, and the noise is an
//! Itô impulse at the left endpoint.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::beam::{Basis, Interval};
use crate::error::{Error, Result};
use crate::rng::brownian_increments;

pub const DEFAULT_STEPS: usize = 2048;
pub const DEFAULT_MODES: usize = 8;
pub const DEFAULT_TRIALS: usize = 256;
pub const DEFAULT_SEED: u64 = 0x5EED_BEA4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub interval: Interval,
    pub horizon: f64,
    pub modes: usize,
    /// Number of time steps; the step size is `horizon / steps`.
    pub steps: usize,
    pub seed: u64,
    pub trials: usize,
}

impl SimulationConfig {
    pub fn new(interval: Interval, horizon: f64) -> Self {
        Self {
            interval,
            horizon,
            modes: DEFAULT_MODES,
            steps: DEFAULT_STEPS,
            seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
        }
    }

    pub fn h(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.h()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            problems.push(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.steps == 0 {
            problems.push("steps must be positive".to_string());
        }
        if self.modes == 0 {
            problems.push("modes must be positive".to_string());
        }
        if self.trials == 0 {
            problems.push("trials must be positive".to_string());
        }
        if !(self.interval.b > self.interval.a) {
            problems.push("interval requires a < b".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    fn check_basis(&self, basis: &Basis) -> Result<()> {
        self.validate()?;
        if basis.len() < self.modes {
            return Err(Error::InvalidConfig(format!(
                "{} modes requested but the basis holds {}",
                self.modes,
                basis.len()
            )));
        }
        if basis.interval() != self.interval {
            return Err(Error::InvalidConfig("basis interval differs from the configured interval".into()));
        }
        Ok(())
    }
}

/// Scalar time dependence of a separable source term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeProfile {
    Constant,
    /// `Σ c_i t^i` with ascending coefficients.
    Polynomial(Vec<f64>),
    /// `sin(frequency · t + phase)`.
    Harmonic { frequency: f64, phase: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci),
            TimeProfile::Harmonic { frequency, phase } => (frequency * t + phase).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalTerm {
    pub coefficients: Vec<f64>,
    pub profile: TimeProfile,
}

/// A space-time field stored as modal coefficients times time profiles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModalSource {
    pub terms: Vec<ModalTerm>,
}

impl ModalSource {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn separable(coefficients: Vec<f64>, profile: TimeProfile) -> Self {
        Self { terms: vec![ModalTerm { coefficients, profile }] }
    }

    /// Time-independent source with the given modal coefficients.
    pub fn constant(coefficients: Vec<f64>) -> Self {
        Self::separable(coefficients, TimeProfile::Constant)
    }

    /// Source `κ · v_k` (1-based `k`) with constant profile.
    pub fn single_mode(k: usize, amplitude: f64) -> Self {
        let mut c = vec![0.0; k];
        c[k - 1] = amplitude;
        Self::constant(c)
    }

    pub fn with_term(mut self, coefficients: Vec<f64>, profile: TimeProfile) -> Self {
        self.terms.push(ModalTerm { coefficients, profile });
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| ModalTerm {
                    coefficients: t.coefficients.iter().map(|c| c * factor).collect(),
                    profile: t.profile.clone(),
                })
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coefficients.iter().all(|&c| c == 0.0))
    }

    /// Writes the modal coefficients at time `t` into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for term in &self.terms {
            let p = term.profile.eval(t);
            for (o, c) in out.iter_mut().zip(&term.coefficients) {
                *o += c * p;
            }
        }
    }

    pub fn eval(&self, t: f64, modes: usize) -> Vec<f64> {
        let mut out = vec![0.0; modes];
        self.eval_into(t, &mut out);
        out
    }
}

/// Drift, noise amplitude and an optional velocity feedback `−γ y_t` in the drift.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Forcing {
    pub drift: ModalSource,
    pub noise: ModalSource,
    pub damping: f64,
}

impl Forcing {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn noise_only(noise: ModalSource) -> Self {
        Self { noise, ..Self::default() }
    }

    pub fn drift_only(drift: ModalSource) -> Self {
        Self { drift, ..Self::default() }
    }

    /// Scales the exogenous parts; feedback is linear in the state and stays.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            drift: self.drift.scaled(factor),
            noise: self.noise.scaled(factor),
            damping: self.damping,
        }
    }

    /// Drift coefficients including the feedback evaluated on `velocity`.
    pub fn drift_at(&self, t: f64, velocity: &[f64], out: &mut [f64]) {
        self.drift.eval_into(t, out);
        if self.damping != 0.0 {
            for (o, v) in out.iter_mut().zip(velocity) {
                *o -= self.damping * v;
            }
        }
    }

    pub fn noise_at(&self, t: f64, out: &mut [f64]) {
        self.noise.eval_into(t, out);
    }
}

/// Modal displacement and velocity coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalState {
    pub c: Vec<f64>,
    pub cd: Vec<f64>,
}

impl ModalState {
    pub fn zeros(modes: usize) -> Self {
        Self { c: vec![0.0; modes], cd: vec![0.0; modes] }
    }

    pub fn new(c: Vec<f64>, cd: Vec<f64>) -> Self {
        Self { c, cd }
    }

    /// Projects initial displacement and velocity fields onto the basis.
    pub fn from_fields<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(basis: &Basis, y0: F, y1: G) -> Self {
        Self { c: basis.project(y0), cd: basis.project(y1) }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            c: self.c.iter().map(|v| v * factor).collect(),
            cd: self.cd.iter().map(|v| v * factor).collect(),
        }
    }

    fn padded(&self, modes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.c.len() > modes || self.cd.len() > modes {
            return Err(Error::InvalidConfig(format!(
                "initial data has {} / {} coefficients for {modes} modes",
                self.c.len(),
                self.cd.len()
            )));
        }
        let mut c = self.c.clone();
        let mut cd = self.cd.clone();
        c.resize(modes, 0.0);
        cd.resize(modes, 0.0);
        Ok((c, cd))
    }
}

const SERIES_SWITCH: f64 = 0.1;

/// `(1 − cos z)/z²`, `(sin z − z cos z)/z³` and `sin z / z`.
fn phase_functions(z: f64) -> (f64, f64, f64) {
    if z.abs() < SERIES_SWITCH {
        let z2 = z * z;
        let (mut one_minus_cos, mut moment, mut sinc) = (0.0, 0.0, 0.0);
        let mut power = 1.0; // z^{2j}
        let mut fact = 1.0; // (2j)!
        for j in 0..7 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let odd = fact * (2 * j + 1) as f64;
            let even_next = odd * (2 * j + 2) as f64;
            let odd_next = even_next * (2 * j + 3) as f64;
            one_minus_cos += sign * power / even_next;
            moment += sign * (2 * j + 2) as f64 * power / odd_next;
            sinc += sign * power / odd;
            power *= z2;
            fact = even_next;
        }
        (one_minus_cos, moment, sinc)
    } else {
        let (s, c) = z.sin_cos();
        ((1.0 - c) / (z * z), (s - z * c) / (z * z * z), s / z)
    }
}

/// Precomputed one-step map for a single oscillator of frequency `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeStepper {
    cos: f64,
    sin_over_omega: f64,
    omega_sin: f64,
    /// Displacement weights for the drift at the left and right endpoints.
    disp_left: f64,
    disp_right: f64,
    /// Velocity weights for the drift at the left and right endpoints.
    vel_left: f64,
    vel_right: f64,
}

impl ModeStepper {
    pub fn new(omega: f64, h: f64) -> Self {
        let z = omega * h;
        let (omc, moment, sinc) = phase_functions(z);
        let p0 = h * h * omc;
        let p1 = p0 - h * h * moment;
        let q0 = h * sinc;
        let q1 = h * omc;
        Self {
            cos: z.cos(),
            sin_over_omega: h * sinc,
            omega_sin: omega * z.sin(),
            disp_left: p0 - p1,
            disp_right: p1,
            vel_left: q0 - q1,
            vel_right: q1,
        }
    }

    /// Advances `(c, c')` by one step with drift values `f_left`, `f_right`
    /// at the step ends and the impulse `g · dB` applied at the left end.
    #[inline]
    pub fn step(&self, c: f64, cd: f64, f_left: f64, f_right: f64, impulse: f64) -> (f64, f64) {
        let v = cd + impulse;
        (
            c * self.cos + v * self.sin_over_omega + f_left * self.disp_left + f_right * self.disp_right,
            -c * self.omega_sin + v * self.cos + f_left * self.vel_left + f_right * self.vel_right,
        )
    }
}

/// One step of `c'' + ω²c = f + g Ḃ` with drift and noise frozen at the left end.
pub fn step_mode(state: (f64, f64), omega: f64, f: f64, g: f64, db: f64, h: f64) -> (f64, f64) {
    ModeStepper::new(omega, h).step(state.0, state.1, f, f, g * db)
}

/// Modal paths of one trial on the uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalTrajectory {
    pub h: f64,
    pub steps: usize,
    pub modes: usize,
    /// Row-major `(steps + 1) × modes` displacement coefficients.
    pub c: Vec<f64>,
    /// Row-major `(steps + 1) × modes` velocity coefficients.
    pub cd: Vec<f64>,
    /// Brownian increment applied on `[t_i, t_{i+1}]`.
    pub increments: Vec<f64>,
    pub seed: u64,
    pub trial: u64,
}

impl ModalTrajectory {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.h
    }

    pub fn displacement(&self, i: usize) -> &[f64] {
        &self.c[i * self.modes..(i + 1) * self.modes]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.cd[i * self.modes..(i + 1) * self.modes]
    }

    /// Modes whose path is not identically zero.
    pub fn active_modes(&self) -> Vec<usize> {
        (0..self.modes)
            .filter(|&k| (0..=self.steps).any(|i| self.c[i * self.modes + k] != 0.0 || self.cd[i * self.modes + k] != 0.0))
            .collect()
    }
}

/// Simulates one trial; the noise stream is selected by `(config.seed, trial)`.
pub fn simulate_path(
    config: &SimulationConfig,
    basis: &Basis,
    forcing: &Forcing,
    initial: &ModalState,
    trial: u64,
) -> Result<ModalTrajectory> {
    config.check_basis(basis)?;
    let m = config.modes;
    let n = config.steps;
    let h = config.h();
    let increments = brownian_increments(config.seed, trial, n, h);
    let steppers: Vec<ModeStepper> = basis.modes()[..m].iter().map(|md| ModeStepper::new(md.omega(), h)).collect();

    let (c0, cd0) = initial.padded(m)?;
    let mut c = Vec::with_capacity((n + 1) * m);
    let mut cd = Vec::with_capacity((n + 1) * m);
    c.extend_from_slice(&c0);
    cd.extend_from_slice(&cd0);

    let mut f_left = vec![0.0; m];
    let mut f_right = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut feedback = vec![0.0; m];
    forcing.drift.eval_into(0.0, &mut f_left);
    for i in 0..n {
        let t = config.time(i);
        forcing.drift.eval_into(config.time(i + 1), &mut f_right);
        forcing.noise_at(t, &mut g);
        let db = increments[i];
        let base = i * m;
        for k in 0..m {
            feedback[k] = -forcing.damping * cd[base + k];
        }
        for k in 0..m {
            let (cn, cdn) = steppers[k].step(
                c[base + k],
                cd[base + k],
                f_left[k] + feedback[k],
                f_right[k] + feedback[k],
                g[k] * db,
            );
            if !cn.is_finite() || !cdn.is_finite() {
                return Err(Error::NonFinite { mode: k + 1, step: i + 1 });
            }
            c.push(cn);
            cd.push(cdn);
        }
        std::mem::swap(&mut f_left, &mut f_right);
    }
    Ok(ModalTrajectory { h, steps: n, modes: m, c, cd, increments, seed: config.seed, trial })
}

/// Field values and derivatives on an `x` grid at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    /// `[y, y_x, y_xx, y_xxx, y_xxxx]` per point.
    pub y: Vec<[f64; 5]>,
    /// `[y_t, y_xt, y_xxt, y_xxxt]` per point.
    pub yt: Vec<[f64; 4]>,
}

impl FieldSnapshot {
    pub fn values(&self, order: usize) -> Vec<f64> {
        self.y.iter().map(|v| v[order]).collect()
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.yt.iter().map(|v| v[0]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.y.iter().map(|v| v[0].abs()).fold(0.0, f64::max)
    }
}

/// Modal sums `Σ c_k v_k^{(j)}` and `Σ c'_k v_k^{(j)}` at time index `i`.
pub fn reconstruct(traj: &ModalTrajectory, basis: &Basis, i: usize, xs: &[f64]) -> Result<FieldSnapshot> {
    if i > traj.steps {
        return Err(Error::Contract(format!("time index {i} beyond {} steps", traj.steps)));
    }
    let interval = basis.interval();
    if let Some(x) = xs.iter().find(|&&x| !interval.contains(x)) {
        return Err(Error::Contract(format!("x = {x} outside the interval")));
    }
    let c = traj.displacement(i);
    let cd = traj.velocity(i);
    let modes = &basis.modes()[..traj.modes];
    let mut y = Vec::with_capacity(xs.len());
    let mut yt = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut v = [0.0; 5];
        let mut w = [0.0; 4];
        for (k, mode) in modes.iter().enumerate() {
            let d = mode.derivatives(x);
            for j in 0..5 {
                v[j] += c[k] * d[j];
            }
            for j in 0..4 {
                w[j] += cd[k] * d[j];
            }
        }
        y.push(v);
        yt.push(w);
    }
    Ok(FieldSnapshot { t: traj.time(i), x: xs.to_vec(), y, yt })
}

/// Time series of the right-end traces `(y_xx(b, t_i), y_xxx(b, t_i))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub yxx: Vec<f64>,
    pub yxxx: Vec<f64>,
}

pub fn boundary_trace(traj: &ModalTrajectory, basis: &Basis) -> BoundaryTrace {
    let right = &basis.right_values()[..traj.modes];
    let mut yxx = Vec::with_capacity(traj.steps + 1);
    let mut yxxx = Vec::with_capacity(traj.steps + 1);
    for i in 0..=traj.steps {
        let c = traj.displacement(i);
        yxx.push(c.iter().zip(right).map(|(ck, v)| ck * v[2]).sum());
        yxxx.push(c.iter().zip(right).map(|(ck, v)| ck * v[3]).sum());
    }
    BoundaryTrace { yxx, yxxx }
}

/// Writes `t, dB, c_1, c'_1, …` rows; the last row has an empty increment.
pub fn write_trajectory_csv<W: Write>(traj: &ModalTrajectory, mut out: W) -> io::Result<()> {
    let mut header = String::from("t,dB");
    for k in 1..=traj.modes {
        header.push_str(&format!(",c_{k},cdot_{k}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..=traj.steps {
        let mut row = format!("{:.17e},", traj.time(i));
        if i < traj.steps {
            row.push_str(&format!("{:.17e}", traj.increments[i]));
        }
        for (c, cd) in traj.displacement(i).iter().zip(traj.velocity(i)) {
            row.push_str(&format!(",{c:.17e},{cd:.17e}"));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_series_matches_closed_form_at_switch() {
        let z = SERIES_SWITCH * 0.999;
        let (a, b, c) = phase_functions(z);
        let (s, co) = z.sin_cos();
        assert!((a - (1.0 - co) / (z * z)).abs() < 1e-13);
        assert!((b - (s - z * co) / (z * z * z)).abs() < 1e-12);
        assert!((c - s / z).abs() < 1e-15);
    }

    #[test]
    fn half_period_rotation() {
        let (c, cd) = step_mode((1.0, 0.0), 2.0, 0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2);
        assert!((c + 1.0).abs() < 1e-15);
        assert!(cd.abs() < 1e-15);
    }

    #[test]
    fn free_particle_under_constant_force() {
        let (c, cd) = step_mode((0.3, -0.2), 0.0, 1.5, 0.0, 0.0, 0.25);
        assert!((c - (0.3 - 0.2 * 0.25 + 1.5 * 0.0625 / 2.0)).abs() < 1e-15);
        assert!((cd - (-0.2 + 1.5 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn polynomial_profile_uses_ascending_coefficients() {
        let p = TimeProfile::Polynomial(vec![1.0, 0.0, 2.0]);
        assert_eq!(p.eval(3.0), 19.0);
    }
}
