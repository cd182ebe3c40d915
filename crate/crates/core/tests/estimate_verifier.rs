use stobeam_core::beam::{Basis, EigenMode, Interval};
use stobeam_core::estimates::*;
use stobeam_core::field::{PointValues, Slice, SpaceTimeField, TimeRule, TrajectoryField};
use stobeam_core::manufactured::*;
use stobeam_core::quadrature::Quadrature;
use stobeam_core::sde::*;
use stobeam_core::weights::WeightField;
use stobeam_core::Error;

fn beam() -> Interval {
    Interval::new(1.0, 2.0).unwrap()
}

/// `y(t, x) = v₁(x)` held fixed in time.
struct Frozen {
    mode: EigenMode,
    quad: Quadrature,
    rule: TimeRule,
}

impl Frozen {
    fn new() -> Self {
        Self {
            mode: EigenMode::new(1, beam()).unwrap(),
            quad: Quadrature::composite(1.0, 2.0, 8, 16).unwrap(),
            rule: TimeRule::gauss(1.0, 8, 16).unwrap(),
        }
    }

    fn point(&self, x: f64) -> PointValues {
        let d = self.mode.derivatives(x);
        PointValues { y: d, yt: [0.0; 4], f: d[4], g: 0.0 }
    }

    fn slice_at(&self, t: f64) -> Slice {
        Slice {
            t,
            nodes: self.quad.nodes().iter().map(|&x| self.point(x)).collect(),
            left: self.point(1.0),
            right: self.point(2.0),
        }
    }
}

impl SpaceTimeField for Frozen {
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
        [self.slice_at(0.0), self.slice_at(1.0)]
    }
}

fn simpson<F: Fn(f64) -> f64>(lo: f64, hi: f64, n: usize, f: F) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(lo) + f(hi) + inner) * h / 3.0
}

#[test]
fn zero_field_has_zero_sides() {
    let w = WeightField::new(3.0, 0.0, 1.0).unwrap();
    let zero = Resolution::default().sample(
        &ManufacturedSolutionSpec { name: "zero".into(), field: ManufacturedField::zero() },
        beam(),
        1.0,
    );
    let zero = zero.unwrap();
    assert_eq!(carleman_lhs(&zero, &w).unwrap(), 0.0);
    assert_eq!(carleman_rhs(&zero, &w).unwrap(), 0.0);
}

#[test]
fn frozen_mode_matches_refined_quadrature() {
    let field = Frozen::new();
    let w = WeightField::new(1.0, 0.0, 1.0).unwrap();
    let lhs = carleman_lhs(&field, &w).unwrap();
    let m = &field.mode;
    let time = simpson(0.0, 1.0, 4000, |t: f64| (2.0 * t * t * (t - 1.0) * (t - 1.0)).exp());
    let space = simpson(1.0, 2.0, 8000, |x: f64| {
        let d = m.derivatives(x);
        (2.0 * x * x).exp() * (d[3] * d[3] + d[2] * d[2] + d[1] * d[1] + d[0] * d[0])
    });
    assert!(lhs > 0.0);
    assert!((lhs - time * space).abs() < 1e-6 * lhs, "{lhs} vs {}", time * space);
}

#[test]
fn left_side_grows_with_lambda() {
    let field = Frozen::new();
    let mut prev = 0.0;
    for lam in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let v = carleman_lhs(&field, &WeightField::new(lam, 0.0, 1.0).unwrap()).unwrap();
        assert!(v > prev);
        prev = v;
    }
    let spec = ManufacturedSolutionSpec::default_for(beam(), 1.0);
    let sol = Resolution::default().sample(&spec, beam(), 1.0).unwrap();
    let lambdas = [1.0, 2.0, 4.0, 8.0];
    let terms = carleman_terms(&sol, 0.0, &lambdas, None).unwrap();
    assert!(terms.windows(2).all(|p| p[1].lhs > p[0].lhs));
}

#[test]
fn right_side_matches_refined_resolution() {
    let spec = ManufacturedSolutionSpec::default_for(beam(), 1.0);
    let w = WeightField::new(4.0, 0.0, 1.0).unwrap();
    let coarse = carleman_rhs(&Resolution::default().sample(&spec, beam(), 1.0).unwrap(), &w).unwrap();
    let fine = Resolution { space_panels: 16, space_order: 20, time_panels: 16, time_order: 20 };
    let fine = carleman_rhs(&fine.sample(&spec, beam(), 1.0).unwrap(), &w).unwrap();
    assert!(coarse > 0.0);
    assert!((coarse - fine).abs() < 1e-6 * fine);
}

#[test]
fn right_side_ignores_the_path_without_noise() {
    let mut cfg = SimulationConfig::new(beam(), 1.0);
    cfg.steps = 128;
    cfg.modes = 4;
    let basis = Basis::new(beam(), 4).unwrap();
    let forcing = Forcing::drift_only(ModalSource::single_mode(2, 1.0));
    let init = ModalState::new(vec![0.3], vec![0.0]);
    let w = WeightField::new(2.0, 0.0, 1.0).unwrap();
    let rhs = |trial: u64| {
        let traj = simulate_path(&cfg, &basis, &forcing, &init, trial).unwrap();
        carleman_rhs(&TrajectoryField::new(&traj, &basis, &forcing), &w).unwrap()
    };
    assert_eq!(rhs(0), rhs(17));
}

#[test]
fn corpus_sweep_is_finite_and_homogeneous() {
    let corpus = carleman_corpus(beam(), 1.0);
    let lambdas = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
    let sweep = verify_carleman(&corpus, beam(), 1.0, &lambdas, Resolution::default()).unwrap();
    assert_eq!(sweep.scenarios.len(), 5);
    assert!(sweep.report.pass);
    assert!(sweep.report.rows.iter().all(|r| r.ratio.mean.is_finite() && r.ratio.mean > 0.0));
    let c = sweep.report.empirical_constant.unwrap();
    assert!(c.is_finite() && c > 0.0);
    assert!(sweep.report.empirical_lambda0.is_some());
    assert!(sweep.max_amplitude_deviation < 1e-12);
}

#[test]
fn zero_member_is_skipped() {
    let mut corpus = vec![ManufacturedSolutionSpec::default_for(beam(), 1.0)];
    corpus.push(ManufacturedSolutionSpec { name: "silent".into(), field: ManufacturedField::zero() });
    let sweep = verify_carleman(&corpus, beam(), 1.0, &[2.0, 4.0], Resolution::default()).unwrap();
    assert_eq!(sweep.report.skipped, vec!["silent".to_string()]);
    assert!(sweep.report.rows.iter().all(|r| !r.ratio.mean.is_nan()));

    let only_zero = vec![corpus.pop().unwrap()];
    let sweep = verify_carleman(&only_zero, beam(), 1.0, &[2.0], Resolution::default()).unwrap();
    assert!(!sweep.report.pass);
    assert!(sweep.report.empirical_constant.is_none());
}

#[test]
fn invalid_sweeps_are_rejected() {
    let corpus = carleman_corpus(beam(), 1.0);
    assert!(matches!(
        verify_carleman(&corpus, beam(), 1.0, &[], Resolution::default()),
        Err(Error::InvalidConfig(_))
    ));
    let open_end = ManufacturedSolutionSpec {
        name: "open".into(),
        field: ManufacturedField::new(vec![SeparableTerm {
            time: Profile::Polynomial(vec![0.0, 1.0]),
            space: Profile::clamped_quartic(beam()),
        }]),
    };
    assert!(verify_carleman(&[open_end], beam(), 1.0, &[2.0], Resolution::default()).is_err());
}

fn scenario(trials: usize, noise: ModalSource) -> EnsembleScenario {
    let mut config = SimulationConfig::new(beam(), 1.0);
    config.steps = 256;
    config.modes = 4;
    config.trials = trials;
    EnsembleScenario {
        config,
        forcing: Forcing::noise_only(noise),
        initial: ModalState::new(vec![1.0], vec![0.0]),
    }
}

#[test]
fn revised_inequality_without_noise() {
    let s = scenario(2, ModalSource::zero());
    let rep = verify_revised_carleman(&s, 0.125, &[6.0]).unwrap();
    let r = &rep.calibration[0];
    assert!(r.ratio.mean.is_finite() && r.ratio.mean > 0.0);
    assert_eq!(r.ratio.std_err, 0.0);
    assert!(rep.pass);
}

#[test]
fn revised_inequality_with_noise_and_halved_window() {
    let s = scenario(48, ModalSource::single_mode(1, 1.0));
    let lambdas = [2.0, 4.0, 6.0];
    let rep = verify_revised_carleman(&s, 0.125, &lambdas).unwrap();
    assert!(rep.pass, "constant {} rows {:?}", rep.constant, rep.validation);
    assert_eq!(rep.trials, 48);
    assert!((rep.tail_scaling - 16.0).abs() < 1e-12);
    assert!((rep.tail_coefficient - tail_coefficient(0.125, 1.0)).abs() < 1e-12);
    for (full, half) in rep.calibration.iter().zip(&rep.halved) {
        assert!(half.tail.mean < full.tail.mean);
        assert!((half.tail_weight / full.tail_weight - 16.0).abs() < 1e-12);
        assert!(half.ratio.mean > 0.0 && half.ratio.mean.is_finite());
    }
}

#[test]
fn revised_window_must_fit() {
    let s = scenario(2, ModalSource::zero());
    for eps in [0.0, 0.5, 0.7, -0.1] {
        assert!(matches!(verify_revised_carleman(&s, eps, &[1.0]), Err(Error::Contract(_))));
    }
}

fn observability(noise: ModalSource, data: usize, paths: usize) -> ObservabilityConfig {
    let mut config = SimulationConfig::new(beam(), 1.0);
    config.steps = 256;
    config.modes = 4;
    ObservabilityConfig { config, data, paths, drift: ModalSource::zero(), noise }
}

#[test]
fn observability_without_forcing_is_deterministic() {
    let rep = verify_observability(&observability(ModalSource::zero(), 3, 4)).unwrap();
    assert_eq!(rep.rows.len(), 3);
    assert!(rep.pass && rep.boundary_positive && !rep.degenerate);
    for r in &rep.rows {
        assert_eq!(r.ratio, r.half_ratio);
        assert_eq!(r.lhs.std_err, 0.0);
        assert!(r.boundary.mean > 0.0);
    }
    assert_eq!(rep.relative_change, 0.0);
}

#[test]
fn observability_with_noise_is_stable() {
    let rep = verify_observability(&observability(ModalSource::single_mode(1, 0.1), 4, 64)).unwrap();
    assert!(rep.constant.is_finite() && rep.constant > 0.0);
    assert!(rep.relative_change <= 0.1);
    assert!(rep.worst_datum.is_some());
    assert!(verify_observability(&observability(ModalSource::zero(), 1, 1)).is_err());
}

#[test]
fn sobolev_norm_of_first_mode() {
    let basis = Basis::new(beam(), 4).unwrap();
    let e = basis.eigenvalues()[0];
    assert!((modal_sobolev_norm_sq(&basis, &[1.0], 0) - 1.0).abs() < 1e-10);
    // ‖v‖² + ‖v''‖² = 1 + λ₁ for a clamped mode.
    let h2 = modal_sobolev_norm_sq(&basis, &[1.0], 2);
    let h1 = modal_sobolev_norm_sq(&basis, &[1.0], 1);
    assert!((h2 - h1 - e).abs() < 1e-8 * e);
    assert!((modal_sobolev_norm_sq(&basis, &[2.0], 4) - 4.0 * modal_sobolev_norm_sq(&basis, &[1.0], 4)).abs() < 1e-6);
}

fn manufactured_fields(scale: f64) -> Vec<ManufacturedSolution> {
    carleman_corpus(beam(), 1.0)
        .iter()
        .map(|s| Resolution::default().sample(&s.with_amplitude(scale), beam(), 1.0).unwrap())
        .collect()
}

#[test]
fn sweep_contract() {
    let fields = manufactured_fields(1.0);
    assert!(matches!(lambda_sweep(&fields, 0.0, &[]), Err(Error::InvalidConfig(_))));
    let none: Vec<ManufacturedSolution> = Vec::new();
    assert!(lambda_sweep(&none, 0.0, &[1.0]).is_err());
    let lambdas = [1.0, 2.0, 4.0, 8.0];
    let a = lambda_sweep(&fields, 0.0, &lambdas).unwrap();
    let b = lambda_sweep(&manufactured_fields(1.0), 0.0, &lambdas).unwrap();
    assert_eq!(a, b);
    let scaled = lambda_sweep(&manufactured_fields(3.0), 0.0, &lambdas).unwrap();
    for (x, y) in a.rows.iter().zip(&scaled.rows) {
        assert!((x.ratio - y.ratio).abs() < 1e-12 * x.ratio);
    }
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("lambda,lhs,rhs,ratio,std_err\n"));
    assert_eq!(text.lines().count(), 5);
    let mut series = Vec::new();
    a.write_ratio_series(&mut series).unwrap();
    assert!(String::from_utf8(series).unwrap().starts_with("lambda,ratio\n"));
}
