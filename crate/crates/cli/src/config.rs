//! Run configuration: one-level TOML sections, validated as a whole.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stobeam_core::beam::Interval;
use stobeam_core::sde::{SimulationConfig, DEFAULT_MODES, DEFAULT_SEED, DEFAULT_STEPS, DEFAULT_TRIALS};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    pub seed: u64,
    /// Output directory; not part of the configuration hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { name: "default".into(), seed: DEFAULT_SEED, out: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    pub a: f64,
    pub b: f64,
    pub modes: usize,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self { a: 1.0, b: 2.0, modes: DEFAULT_MODES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { horizon: 1.0, steps: DEFAULT_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub trials: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { trials: DEFAULT_TRIALS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSection {
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    pub x0: f64,
}

impl Default for WeightSection {
    fn default() -> Self {
        Self { lambdas: vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0], epsilon: 0.125, x0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    /// Constant noise coefficients on the first modes.
    pub noise: Vec<f64>,
    /// Coarsest step count of the forced refinement study.
    pub refinement_steps: usize,
}

impl Default for EnergySection {
    fn default() -> Self {
        Self { noise: vec![1.0, 0.5, -0.3], refinement_steps: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitySection {
    pub lambdas: Vec<f64>,
    pub points: usize,
    pub balance_lambda: f64,
    /// Step count of the coarse stochastic balance; the refined run uses twice as many.
    pub stochastic_steps: usize,
}

impl Default for IdentitySection {
    fn default() -> Self {
        Self { lambdas: vec![1.0, 2.0, 4.0, 8.0], points: 100, balance_lambda: 1.0, stochastic_steps: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientSection {
    pub audit_points: usize,
    pub audit_lambda_min: f64,
    pub audit_lambda_max: f64,
    pub bound_lambdas: Vec<f64>,
    pub bound_grid: usize,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        Self {
            audit_points: 1000,
            audit_lambda_min: 0.5,
            audit_lambda_max: 20.0,
            bound_lambdas: vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            bound_grid: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Amplitude applied to every manufactured solution.
    pub amplitude: f64,
    /// Number of random initial data in the observability family.
    pub random_data: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { amplitude: 1.0, random_data: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RevisedSection {
    /// Amplitude of the first-mode noise.
    pub noise: f64,
}

impl Default for RevisedSection {
    fn default() -> Self {
        Self { noise: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservabilitySection {
    /// Paths per datum; stability compares the first half against all.
    pub paths: usize,
    pub steps: usize,
    pub noise: f64,
}

impl Default for ObservabilitySection {
    fn default() -> Self {
        Self { paths: 400, steps: 512, noise: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub beam: BeamSection,
    pub time: TimeSection,
    pub ensemble: EnsembleSection,
    pub weight: WeightSection,
    pub energy: EnergySection,
    pub identity: IdentitySection,
    pub coefficients: CoefficientSection,
    pub corpus: CorpusSection,
    pub revised: RevisedSection,
    pub observability: ObservabilitySection,
}

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub lambdas: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.run.seed = seed;
        }
        if let Some(out) = &o.out {
            self.run.out = Some(out.clone());
        }
        if let Some(trials) = o.trials {
            self.ensemble.trials = trials;
        }
        if let Some(l) = &o.lambdas {
            self.weight.lambdas = l.clone();
        }
        if let Some(eps) = o.epsilon {
            self.weight.epsilon = eps;
        }
    }

    /// Every violated constraint, not only the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                v.push(msg);
            }
        };
        let finite_positive = |x: f64| x.is_finite() && x > 0.0;
        check(
            i64::try_from(self.run.seed).is_ok(),
            format!("run.seed ({}) must not exceed {}", self.run.seed, i64::MAX),
        );
        check(self.beam.a.is_finite() && self.beam.b.is_finite(), "beam.a and beam.b must be finite".into());
        check(self.beam.b > self.beam.a, format!("beam.b ({}) must exceed beam.a ({})", self.beam.b, self.beam.a));
        check(self.beam.a > 0.0, format!("beam.a ({}) must be positive", self.beam.a));
        check((1..=32).contains(&self.beam.modes), format!("beam.modes ({}) must lie in 1..=32", self.beam.modes));
        check(finite_positive(self.time.horizon), format!("time.horizon ({}) must be positive", self.time.horizon));
        check(self.time.steps >= 8, format!("time.steps ({}) must be at least 8", self.time.steps));
        check(self.ensemble.trials >= 2, format!("ensemble.trials ({}) must be at least 2", self.ensemble.trials));
        check(!self.weight.lambdas.is_empty(), "weight.lambdas must not be empty".into());
        check(
            self.weight.lambdas.iter().all(|&l| finite_positive(l)),
            "weight.lambdas must be positive".into(),
        );
        check(
            self.weight.lambdas.windows(2).all(|w| w[0] < w[1]),
            "weight.lambdas must be strictly increasing".into(),
        );
        check(
            self.weight.epsilon > 0.0 && self.weight.epsilon < 0.5 * self.time.horizon,
            format!("weight.epsilon ({}) must lie in (0, horizon/2)", self.weight.epsilon),
        );
        check(self.weight.x0 == 0.0, format!("weight.x0 ({}) must be 0 for the expanded coefficients", self.weight.x0));
        check(
            self.energy.noise.len() <= self.beam.modes,
            format!("energy.noise has {} entries for {} modes", self.energy.noise.len(), self.beam.modes),
        );
        check(
            self.energy.noise.iter().all(|g| g.is_finite()),
            "energy.noise must be finite".into(),
        );
        check(self.energy.refinement_steps >= 8, "energy.refinement_steps must be at least 8".into());
        check(!self.identity.lambdas.is_empty(), "identity.lambdas must not be empty".into());
        check(
            self.identity.lambdas.iter().all(|&l| finite_positive(l)),
            "identity.lambdas must be positive".into(),
        );
        check(self.identity.points >= 1, "identity.points must be at least 1".into());
        check(finite_positive(self.identity.balance_lambda), "identity.balance_lambda must be positive".into());
        check(self.identity.stochastic_steps >= 8, "identity.stochastic_steps must be at least 8".into());
        check(self.coefficients.audit_points >= 1, "coefficients.audit_points must be at least 1".into());
        check(
            finite_positive(self.coefficients.audit_lambda_min)
                && self.coefficients.audit_lambda_max >= self.coefficients.audit_lambda_min,
            "coefficients audit λ range must be positive and ordered".into(),
        );
        check(!self.coefficients.bound_lambdas.is_empty(), "coefficients.bound_lambdas must not be empty".into());
        check(
            self.coefficients.bound_lambdas.iter().all(|&l| finite_positive(l)),
            "coefficients.bound_lambdas must be positive".into(),
        );
        check(self.coefficients.bound_grid >= 2, "coefficients.bound_grid must be at least 2".into());
        check(finite_positive(self.corpus.amplitude), "corpus.amplitude must be positive".into());
        check(self.corpus.random_data >= 1, "corpus.random_data must be at least 1".into());
        check(self.revised.noise.is_finite(), "revised.noise must be finite".into());
        check(self.observability.paths >= 4, "observability.paths must be at least 4".into());
        check(self.observability.steps >= 8, "observability.steps must be at least 8".into());
        check(self.observability.noise.is_finite(), "observability.noise must be finite".into());
        v
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(v))
        }
    }

    /// The configuration with run-local fields cleared.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.run.out = None;
        c
    }

    /// SHA-256 of the canonical TOML, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().to_toml().as_bytes()))
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.beam.a, self.beam.b).expect("validated interval")
    }

    pub fn simulation(&self) -> SimulationConfig {
        let mut c = SimulationConfig::new(self.interval(), self.time.horizon);
        c.modes = self.beam.modes;
        c.steps = self.time.steps;
        c.trials = self.ensemble.trials;
        c.seed = self.run.seed;
        c
    }
}

/// Parses `2,4,6` into a λ list.
pub fn parse_lambda_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect()
}
