use proptest::prelude::*;
use stobeam_core::beam::{Basis, Interval};
use stobeam_core::rng::brownian_increments;
use stobeam_core::sde::*;

fn beam() -> Interval {
    Interval::new(1.0, 2.0).unwrap()
}

fn config(steps: usize, modes: usize) -> SimulationConfig {
    let mut c = SimulationConfig::new(beam(), 1.0);
    c.steps = steps;
    c.modes = modes;
    c
}

#[test]
fn rotation_and_free_particle_steps() {
    let (c, cd) = step_mode((1.0, 0.0), 2.0, 0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2);
    assert!((c + 1.0).abs() < 1e-15 && cd.abs() < 1e-15);
    let (c, cd) = step_mode((0.5, 1.0), 0.0, 2.0, 0.0, 0.0, 0.1);
    assert!((c - (0.5 + 0.1 + 2.0 * 0.01 / 2.0)).abs() < 1e-15);
    assert!((cd - (1.0 + 0.2)).abs() < 1e-15);
}

#[test]
fn one_step_velocity_variance_matches_step_size() {
    let h = 0.01;
    let n = 100_000;
    let db = brownian_increments(99, 0, n, h);
    let samples: Vec<f64> = db.iter().map(|&d| step_mode((0.0, 0.0), 1.0, 0.0, 1.0, d, h).1).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let m4 = samples.iter().map(|s| (s - mean).powi(4)).sum::<f64>() / n as f64;
    let se = ((m4 - var * var) / n as f64).sqrt();
    assert!((var - h).abs() < 5.0 * se, "var {var} se {se}");
}

#[test]
fn homogeneous_first_mode_is_a_cosine() {
    let cfg = config(512, 6);
    let basis = Basis::new(beam(), 6).unwrap();
    let traj = simulate_path(&cfg, &basis, &Forcing::none(), &ModalState::new(vec![1.0], vec![0.0]), 0).unwrap();
    let omega = basis.modes()[0].omega();
    for i in (0..=512).step_by(37) {
        let t = traj.time(i);
        assert!((traj.displacement(i)[0] - (omega * t).cos()).abs() < 1e-11);
        assert!(traj.displacement(i)[1..].iter().all(|&c| c == 0.0));
    }
}

#[test]
fn constant_modal_force_matches_particular_solution() {
    let cfg = config(256, 4);
    let basis = Basis::new(beam(), 4).unwrap();
    let forcing = Forcing::drift_only(ModalSource::single_mode(1, 1.0));
    let traj = simulate_path(&cfg, &basis, &forcing, &ModalState::zeros(4), 0).unwrap();
    let lam = basis.eigenvalues()[0];
    let omega = lam.sqrt();
    for i in [1, 50, 128, 256] {
        let t = traj.time(i);
        let exact = (1.0 - (omega * t).cos()) / lam;
        assert!((traj.displacement(i)[0] - exact).abs() < 1e-12 / lam.sqrt().max(1.0) + 1e-14);
    }
}

fn harmonic_error(steps: usize) -> f64 {
    let cfg = config(steps, 2);
    let basis = Basis::new(beam(), 2).unwrap();
    let forcing = Forcing::drift_only(ModalSource::separable(vec![1.0], TimeProfile::Harmonic { frequency: 3.0, phase: 0.0 }));
    let traj = simulate_path(&cfg, &basis, &forcing, &ModalState::zeros(2), 0).unwrap();
    let w = basis.modes()[0].omega();
    // c'' + w²c = sin 3t from rest.
    let exact = |t: f64| ((3.0 * t).sin() - 3.0 * (w * t).sin() / w) / (w * w - 9.0);
    (0..=steps).map(|i| (traj.displacement(i)[0] - exact(traj.time(i))).abs()).fold(0.0, f64::max)
}

#[test]
fn time_varying_force_converges_at_second_order() {
    let (e1, e2, e3) = (harmonic_error(64), harmonic_error(128), harmonic_error(256));
    for r in [e1 / e2, e2 / e3] {
        assert!((r - 4.0).abs() < 0.5, "ratio {r}");
    }
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let cfg = config(128, 5);
    let basis = Basis::new(beam(), 5).unwrap();
    let forcing = Forcing::noise_only(ModalSource::constant(vec![1.0, 0.5]));
    let init = ModalState::new(vec![0.3, -0.1], vec![0.0, 0.2]);
    let a = simulate_path(&cfg, &basis, &forcing, &init, 11).unwrap();
    let b = simulate_path(&cfg, &basis, &forcing, &init, 11).unwrap();
    assert_eq!(a, b);
    let c = simulate_path(&cfg, &basis, &forcing, &init, 12).unwrap();
    assert_ne!(a.increments, c.increments);
}

#[test]
fn adding_modes_leaves_existing_paths_unchanged() {
    let basis = Basis::new(beam(), 8).unwrap();
    let forcing = Forcing::noise_only(ModalSource::constant(vec![1.0, 0.5, 0.25, 0.1, 0.3, 0.2, 0.1, 0.05]));
    let init = ModalState::new(vec![0.3, 0.2, 0.1], vec![0.1]);
    let small = simulate_path(&config(200, 4), &basis, &forcing, &init, 3).unwrap();
    let large = simulate_path(&config(200, 8), &basis, &forcing, &init, 3).unwrap();
    for i in 0..=200 {
        assert_eq!(small.displacement(i), &large.displacement(i)[..4]);
        assert_eq!(small.velocity(i), &large.velocity(i)[..4]);
    }
}

#[test]
fn reconstruction_at_start_reproduces_first_mode() {
    let basis = Basis::new(beam(), 6).unwrap();
    let traj = simulate_path(&config(64, 6), &basis, &Forcing::none(), &ModalState::new(vec![1.0], vec![0.0]), 0).unwrap();
    let xs: Vec<f64> = (0..=20).map(|i| 1.0 + i as f64 / 20.0).collect();
    let snap = reconstruct(&traj, &basis, 0, &xs).unwrap();
    for (j, &x) in xs.iter().enumerate() {
        assert!((snap.y[j][0] - basis.modes()[0].derivative(x, 0)).abs() < 1e-14);
        assert_eq!(snap.yt[j][0], 0.0);
    }
    let mu = basis.modes()[0].mu;
    assert!(snap.y[0][0].abs() < 1e-8 * snap.max_abs());
    assert!(snap.y[0][1].abs() < 1e-8 * mu * snap.max_abs());
    assert!(reconstruct(&traj, &basis, 65, &xs).is_err());
}

#[test]
fn homogeneous_energy_is_conserved_under_reconstruction() {
    let basis = Basis::new(beam(), 4).unwrap();
    let traj = simulate_path(&config(256, 4), &basis, &Forcing::none(), &ModalState::new(vec![1.0], vec![0.0]), 0).unwrap();
    let q = basis.quadrature();
    let energy = |i: usize| {
        let snap = reconstruct(&traj, &basis, i, q.nodes()).unwrap();
        let vals: Vec<f64> = snap.y.iter().zip(&snap.yt).map(|(y, yt)| y[2] * y[2] + yt[0] * yt[0]).collect();
        q.integrate_values(&vals)
    };
    let e0 = energy(0);
    for i in [64, 128, 256] {
        assert!((energy(i) - e0).abs() < 1e-8 * e0);
    }
}

#[test]
fn boundary_traces_of_simple_paths() {
    let basis = Basis::new(beam(), 4).unwrap();
    let zero = simulate_path(&config(32, 4), &basis, &Forcing::none(), &ModalState::zeros(4), 0).unwrap();
    let tr = boundary_trace(&zero, &basis);
    assert!(tr.yxx.iter().chain(&tr.yxxx).all(|&v| v == 0.0));
    // Frozen mode: a zero-length horizon keeps the state at v₁.
    let one = simulate_path(&config(1, 4), &basis, &Forcing::none(), &ModalState::new(vec![1.0], vec![0.0]), 0).unwrap();
    let tr = boundary_trace(&one, &basis);
    assert_eq!(tr.yxx[0], basis.right_values()[0][2]);
}

#[test]
fn projected_quartic_has_the_expected_right_end_curvature() {
    let iv = beam();
    let basis = Basis::with_quadrature(iv, 12, 16, 16).unwrap();
    let psi = |x: f64| (x - iv.a).powi(2) * (iv.b - x).powi(2);
    let state = ModalState::from_fields(&basis, psi, |_| 0.0);
    let mut cfg = config(1, 12);
    cfg.horizon = 1e-9;
    let traj = simulate_path(&cfg, &basis, &Forcing::none(), &state, 0).unwrap();
    let tr = boundary_trace(&traj, &basis);
    let exact = 2.0 * iv.length().powi(2);
    assert!((tr.yxx[0] - exact).abs() < 1e-2 * exact, "{} vs {exact}", tr.yxx[0]);
    // Fewer modes resolve the trace less well.
    let coarse: f64 = state.c[..6].iter().zip(basis.right_values()).map(|(c, v)| c * v[2]).sum();
    assert!((tr.yxx[0] - exact).abs() < (coarse - exact).abs());
}

#[test]
fn trajectory_csv_has_header_and_rows() {
    let basis = Basis::new(beam(), 2).unwrap();
    let traj = simulate_path(&config(4, 2), &basis, &Forcing::none(), &ModalState::new(vec![1.0], vec![0.0]), 0).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,dB,c_1,cdot_1,c_2,cdot_2");
    assert_eq!(lines.len(), 6);
}

#[test]
fn invalid_configurations_are_rejected() {
    let basis = Basis::new(beam(), 4).unwrap();
    let mut cfg = config(0, 4);
    assert!(simulate_path(&cfg, &basis, &Forcing::none(), &ModalState::zeros(4), 0).is_err());
    cfg.steps = 10;
    cfg.modes = 9;
    assert!(simulate_path(&cfg, &basis, &Forcing::none(), &ModalState::zeros(4), 0).is_err());
}

fn combine(a: &ModalSource, sa: f64, b: &ModalSource, sb: f64) -> ModalSource {
    let mut out = a.scaled(sa);
    out.terms.extend(b.scaled(sb).terms);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn paths_are_linear_in_data_and_forcing(
        c0 in prop::collection::vec(-1.0f64..1.0, 3),
        c1 in prop::collection::vec(-1.0f64..1.0, 3),
        fa in -2.0f64..2.0, ga in -1.0f64..1.0, fb in -2.0f64..2.0, gb in -1.0f64..1.0,
        alpha in -2.0f64..2.0, beta in -2.0f64..2.0,
    ) {
        let basis = Basis::new(beam(), 3).unwrap();
        let cfg = config(64, 3);
        let fa_src = ModalSource::separable(vec![fa, 0.5 * fa], TimeProfile::Harmonic { frequency: 2.0, phase: 0.1 });
        let fb_src = ModalSource::constant(vec![0.0, fb, fb]);
        let ga_src = ModalSource::constant(vec![ga]);
        let gb_src = ModalSource::constant(vec![0.0, gb]);
        let a = Forcing { drift: fa_src.clone(), noise: ga_src.clone(), damping: 0.0 };
        let b = Forcing { drift: fb_src.clone(), noise: gb_src.clone(), damping: 0.0 };
        let sa = ModalState::new(c0.clone(), vec![0.0; 3]);
        let sb = ModalState::new(vec![0.0; 3], c1.clone());
        let combined = Forcing { drift: combine(&fa_src, alpha, &fb_src, beta), noise: combine(&ga_src, alpha, &gb_src, beta), damping: 0.0 };
        let init = ModalState::new(c0.iter().map(|v| alpha * v).collect(), c1.iter().map(|v| beta * v).collect());
        let ta = simulate_path(&cfg, &basis, &a, &sa, 5).unwrap();
        let tb = simulate_path(&cfg, &basis, &b, &sb, 5).unwrap();
        let tc = simulate_path(&cfg, &basis, &combined, &init, 5).unwrap();
        for ((x, y), z) in ta.c.iter().zip(&tb.c).zip(&tc.c) {
            prop_assert!((alpha * x + beta * y - z).abs() < 1e-10 * (1.0 + z.abs()));
        }
        for ((x, y), z) in ta.cd.iter().zip(&tb.cd).zip(&tc.cd) {
            prop_assert!((alpha * x + beta * y - z).abs() < 1e-9 * (1.0 + z.abs()));
        }
    }
}
