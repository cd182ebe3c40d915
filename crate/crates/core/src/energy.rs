//! The energy `E(t) = ‖y_t‖² + ‖y_xx‖²`, its Itô identity and the two-way
//! energy estimate.
//!
//! On the clamped basis `‖y_xx‖² = Σ λ_k c_k²`, so all energies are computed
//! in modal form.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::beam::Basis;
use crate::error::{Error, Result};
use crate::sde::{Forcing, ModalState, ModalTrajectory};
use crate::stats::Estimate;

/// `Σ c'_k² + λ_k c_k²`.
pub fn modal_energy(c: &[f64], cd: &[f64], eigenvalues: &[f64]) -> f64 {
    c.iter().zip(cd).zip(eigenvalues).map(|((c, cd), lam)| cd * cd + lam * c * c).sum()
}

pub fn state_energy(state: &ModalState, eigenvalues: &[f64]) -> f64 {
    modal_energy(&state.c, &state.cd, eigenvalues)
}

/// Energy of the trajectory at every time index.
pub fn energy_series(traj: &ModalTrajectory, eigenvalues: &[f64]) -> Vec<f64> {
    (0..=traj.steps).map(|i| modal_energy(traj.displacement(i), traj.velocity(i), eigenvalues)).collect()
}

/// `∫(y_t² + y_xx²)` by quadrature of the reconstructed field.
pub fn quadrature_energy(traj: &ModalTrajectory, basis: &Basis, i: usize) -> f64 {
    let c = traj.displacement(i);
    let cd = traj.velocity(i);
    let quad = basis.quadrature();
    let values: Vec<f64> = (0..quad.len())
        .map(|node| {
            let vals = &basis.node_values(node)[..traj.modes];
            let yxx: f64 = c.iter().zip(vals).map(|(ck, v)| ck * v[2]).sum();
            let yt: f64 = cd.iter().zip(vals).map(|(ck, v)| ck * v[0]).sum();
            yt * yt + yxx * yxx
        })
        .collect();
    quad.integrate_values(&values)
}

/// Largest `Σ λ_k² c_k²` (the squared `‖y_xxxx‖`) along the path.
pub fn max_fourth_derivative_norm(traj: &ModalTrajectory, eigenvalues: &[f64]) -> f64 {
    (0..=traj.steps)
        .map(|i| traj.displacement(i).iter().zip(eigenvalues).map(|(c, l)| l * l * c * c).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Ensemble energy on the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Expected energy when a closed form is known.
    pub theory: Option<Vec<f64>>,
}

impl EnergyRecord {
    pub fn from_ensemble(trajs: &[ModalTrajectory], eigenvalues: &[f64]) -> Result<Self> {
        let first = trajs.first().ok_or_else(|| Error::Degenerate("empty ensemble".into()))?;
        let series: Vec<Vec<f64>> = trajs.iter().map(|t| energy_series(t, eigenvalues)).collect();
        let n = first.steps + 1;
        let mut mean = Vec::with_capacity(n);
        let mut std_err = Vec::with_capacity(n);
        let mut column = vec![0.0; trajs.len()];
        for i in 0..n {
            for (c, s) in column.iter_mut().zip(&series) {
                *c = s[i];
            }
            let e = Estimate::from_samples(&column);
            mean.push(e.mean);
            std_err.push(e.std_err);
        }
        Ok(Self { times: (0..n).map(|i| first.time(i)).collect(), mean, std_err, theory: None })
    }

    /// Attaches the mean-energy law `E[E(t)] = E(0) + t Σ g_k²` for constant noise.
    pub fn with_linear_growth(mut self, initial: f64, rate: f64) -> Self {
        self.theory = Some(self.times.iter().map(|t| initial + rate * t).collect());
        self
    }

    /// Largest `|mean − theory| / std_err` over times with positive spread.
    pub fn max_z_score(&self) -> Option<f64> {
        let theory = self.theory.as_ref()?;
        Some(
            self.mean
                .iter()
                .zip(&self.std_err)
                .zip(theory)
                .filter(|((_, s), _)| **s > 0.0)
                .map(|((m, s), t)| ((m - t) / s).abs())
                .fold(0.0, f64::max),
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,mean_energy,std_err,theory")?;
        for i in 0..self.times.len() {
            let theory = self.theory.as_ref().map(|t| t[i].to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", self.times[i], self.mean[i], self.std_err[i], theory)?;
        }
        Ok(())
    }
}

/// Residual of `E(t) = E(0) + 2∫⟨f, y_t⟩ + 2∫⟨g, y_t⟩dB + ∫‖g‖²` along one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoResidual {
    pub profile: Vec<f64>,
    pub max_abs: f64,
    /// `max_t E(t)`, the natural scale for relative statements.
    pub energy_scale: f64,
}

impl ItoResidual {
    pub fn relative(&self) -> f64 {
        if self.energy_scale > 0.0 {
            self.max_abs / self.energy_scale
        } else {
            self.max_abs
        }
    }

    pub fn final_value(&self) -> f64 {
        self.profile.last().copied().unwrap_or(0.0)
    }
}

/// Drift work by the trapezoid rule, noise terms at left points with the
/// trajectory's own increments.
pub fn ito_identity_residual(traj: &ModalTrajectory, eigenvalues: &[f64], forcing: &Forcing) -> Result<ItoResidual> {
    if traj.increments.len() != traj.steps {
        return Err(Error::Contract(format!(
            "trajectory carries {} increments for {} steps",
            traj.increments.len(),
            traj.steps
        )));
    }
    let m = traj.modes;
    let lam = &eigenvalues[..m];
    let energy = energy_series(traj, lam);
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; m];
    let power = |i: usize, f: &mut [f64]| -> f64 {
        forcing.drift_at(traj.time(i), traj.velocity(i), f);
        f.iter().zip(traj.velocity(i)).map(|(a, b)| a * b).sum()
    };
    let mut profile = Vec::with_capacity(traj.steps + 1);
    profile.push(0.0);
    let mut accumulated = 0.0;
    let mut prev_power = power(0, &mut f);
    for i in 0..traj.steps {
        let next_power = power(i + 1, &mut f);
        forcing.noise_at(traj.time(i), &mut g);
        let noise_power: f64 = g.iter().zip(traj.velocity(i)).map(|(a, b)| a * b).sum();
        let noise_norm: f64 = g.iter().map(|v| v * v).sum();
        accumulated += traj.h * (prev_power + next_power)
            + 2.0 * noise_power * traj.increments[i]
            + noise_norm * traj.h;
        profile.push(energy[i + 1] - energy[0] - accumulated);
        prev_power = next_power;
    }
    let max_abs = profile.iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(ItoResidual { profile, max_abs, energy_scale: energy.iter().copied().fold(0.0, f64::max) })
}

pub const ESTIMATE_GRID: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRatio {
    pub s: f64,
    pub t: f64,
    pub ratio: f64,
}

/// Two-way energy estimate on a uniform `(s, t)` grid with mean-square norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimateReport {
    pub ratios: Vec<EnergyRatio>,
    /// Largest ratio, the empirical constant.
    pub empirical_constant: Option<f64>,
    pub forcing_norm: f64,
    pub noise_norm: f64,
    /// Pairs skipped because the denominator vanished.
    pub skipped: usize,
    pub degenerate: bool,
}

/// For each grid pair, `‖(y, y_t)(t)‖ / (‖(y, y_t)(s)‖ + ‖f‖ + ‖g‖)` with
/// `‖·‖` the root of the ensemble-mean energy and `‖f‖², ‖g‖²` the ensemble
/// means of `∫₀ᵀ ‖·‖² dt`.
pub fn energy_estimate_check(
    trajs: &[ModalTrajectory],
    eigenvalues: &[f64],
    forcing: &Forcing,
) -> Result<EnergyEstimateReport> {
    let first = trajs.first().ok_or_else(|| Error::Degenerate("empty ensemble".into()))?;
    let steps = first.steps;
    let m = first.modes;
    let index: Vec<usize> = (0..ESTIMATE_GRID)
        .map(|k| ((k * steps) as f64 / (ESTIMATE_GRID - 1) as f64).round() as usize)
        .collect();
    let n = trajs.len() as f64;
    let mut state = [0.0; ESTIMATE_GRID];
    let mut f_sq = 0.0;
    let mut g_sq = 0.0;
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; m];
    for traj in trajs {
        for (s, &i) in state.iter_mut().zip(&index) {
            *s += modal_energy(traj.displacement(i), traj.velocity(i), eigenvalues) / n;
        }
        for i in 0..=steps {
            let w = if i == 0 || i == steps { 0.5 * traj.h } else { traj.h };
            forcing.drift_at(traj.time(i), traj.velocity(i), &mut f);
            forcing.noise_at(traj.time(i), &mut g);
            f_sq += w * f.iter().map(|v| v * v).sum::<f64>() / n;
            g_sq += w * g.iter().map(|v| v * v).sum::<f64>() / n;
        }
    }
    let (fn_, gn) = (f_sq.sqrt(), g_sq.sqrt());
    let norms: Vec<f64> = state.iter().map(|e| e.sqrt()).collect();
    let mut ratios = Vec::new();
    let mut skipped = 0;
    for (si, &s_idx) in index.iter().enumerate() {
        for (ti, &t_idx) in index.iter().enumerate() {
            let den = norms[si] + fn_ + gn;
            if den > 0.0 {
                ratios.push(EnergyRatio { s: first.time(s_idx), t: first.time(t_idx), ratio: norms[ti] / den });
            } else {
                skipped += 1;
            }
        }
    }
    let empirical_constant = ratios.iter().map(|r| r.ratio).reduce(f64::max);
    Ok(EnergyEstimateReport {
        degenerate: ratios.is_empty(),
        ratios,
        empirical_constant,
        forcing_norm: fn_,
        noise_norm: gn,
        skipped,
    })
}
