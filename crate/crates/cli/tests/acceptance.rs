//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use stobeam::config::RunConfig;
use stobeam::suites::{
    run_one, CarlemanReport, EigenReport, EnergyReport, IdentityReport, RevisedSuiteReport, RunOptions, Suite,
};
use stobeam_core::beam::{EigenMode, Interval};
use stobeam_core::estimates::ObservabilityReport;
use stobeam_core::identity::{pointwise_identity, BraceVariant};
use stobeam_core::manufactured::carleman_corpus;
use stobeam_core::rng::uniform_symmetric;
use stobeam_core::weights::{coefficient_audit, coefficient_lower_bounds, WeightField};

const ORTHONORMALITY_TOL: f64 = 1e-8;
const EIGENRELATION_TOL: f64 = 1e-6;
const ROOT_TOL: f64 = 1e-6;
const CONSERVATION_TOL: f64 = 1e-8;
const ORDER_RATIO: (f64, f64) = (3.5, 4.5);
const Z_LIMIT: f64 = 3.0;
const POINTWISE_TOL: f64 = 1e-6;
const BALANCE_TOL: f64 = 1e-5;
const AUDIT_TOL: f64 = 1e-10;
const AMPLITUDE_TOL: f64 = 1e-12;
const GOLDEN_TOL: f64 = 1e-6;
const OBSERVABILITY_DRIFT: f64 = 0.10;

type Verdict = Result<(bool, String), String>;
type Criterion = (&'static str, Duration, fn() -> Verdict);

fn suite_report<T: DeserializeOwned>(suite: Suite, file: &str) -> Result<T, String> {
    let outcome = run_one(suite, &RunConfig::default(), RunOptions::default()).map_err(|e| e.to_string())?;
    let bytes = outcome.artifacts.get(file).ok_or_else(|| format!("{file} missing"))?;
    serde_json::from_slice(bytes).map_err(|e| e.to_string())
}

/// Bisection on `cosh z cos z − 1` in `[4, 5]`, written independently of the library.
fn first_root_oracle() -> f64 {
    let f = |z: f64| z.cosh() * z.cos() - 1.0;
    let (mut lo, mut hi) = (4.0_f64, 5.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `max |D⁴v − λv| / λ` over interior points, with `D⁴` a Richardson-extrapolated
/// central difference of the mode values alone, with step `0.05/μ`.
fn finite_difference_eigenrelation(mode: &EigenMode, interval: Interval) -> f64 {
    let v = |x: f64| mode.derivative(x, 0);
    let d4 = |x: f64, h: f64| (v(x - 2.0 * h) - 4.0 * v(x - h) + 6.0 * v(x) - 4.0 * v(x + h) + v(x + 2.0 * h)) / h.powi(4);
    let h = 0.05 / mode.mu;
    (1..64)
        .map(|i| {
            let x = interval.a + interval.length() * i as f64 / 64.0;
            let extrapolated = (4.0 * d4(x, h / 2.0) - d4(x, h)) / 3.0;
            (extrapolated - mode.eigenvalue * v(x)).abs() / mode.eigenvalue
        })
        .fold(0.0, f64::max)
}

fn eigenbasis() -> Verdict {
    let r: EigenReport = suite_report(Suite::Eigen, "eigen.json")?;
    let interval = Interval::new(1.0, 2.0).map_err(|e| e.to_string())?;
    let fd = (1..=8)
        .map(|k| EigenMode::new(k, interval).map(|m| finite_difference_eigenrelation(&m, interval)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?
        .into_iter()
        .fold(0.0, f64::max);
    let oracle = first_root_oracle();
    let ok = r.interval == [1.0, 2.0]
        && r.modes == 8
        && r.orthonormality_error < ORTHONORMALITY_TOL
        && r.max_eigenrelation_residual < EIGENRELATION_TOL
        && fd < EIGENRELATION_TOL
        && (r.first_root - oracle).abs() < ROOT_TOL;
    Ok((
        ok,
        format!(
            "orthonormality {:.1e}, eigenrelation {:.1e} (difference oracle {fd:.1e}), μ₁L {:.10} vs oracle {:.10}",
            r.orthonormality_error, r.max_eigenrelation_residual, r.first_root, oracle
        ),
    ))
}

fn energy() -> Verdict {
    let r: EnergyReport = suite_report(Suite::Energy, "energy.json")?;
    let ratios_ok = !r.forced_ratios.is_empty()
        && r.forced_ratios.iter().all(|&q| q >= ORDER_RATIO.0 && q <= ORDER_RATIO.1);
    let ok = r.conservation_drift < CONSERVATION_TOL && ratios_ok && r.trials == 256 && r.max_z_score < Z_LIMIT;
    Ok((
        ok,
        format!(
            "drift {:.1e}, halving ratios {:?}, mean-energy max |z| {:.2} at N = {}",
            r.conservation_drift, r.forced_ratios, r.max_z_score, r.trials
        ),
    ))
}

fn pointwise() -> Verdict {
    let interval = Interval::new(1.0, 2.0).map_err(|e| e.to_string())?;
    let horizon = 1.0;
    let corpus = carleman_corpus(interval, horizon);
    let raw = uniform_symmetric(20_240_601, 3, 200);
    let mut worst: f64 = 0.0;
    for spec in &corpus {
        for lambda in [1.0, 2.0, 4.0, 8.0] {
            let w = WeightField::new(lambda, 0.0, horizon).map_err(|e| e.to_string())?;
            for i in 0..100 {
                let t = 0.5 * horizon * (raw[2 * i] + 1.0);
                let x = 1.0 + 0.5 * (raw[2 * i + 1] + 1.0);
                let r = pointwise_identity(&spec.field, &w, t, x, BraceVariant::Verified).residual.abs();
                worst = worst.max(r);
                if !r.is_finite() {
                    return Ok((false, format!("non-finite residual for {} at ({t}, {x})", spec.name)));
                }
            }
        }
    }
    Ok((
        corpus.len() == 5 && worst < POINTWISE_TOL,
        format!("max residual {worst:.2e} over 100 points × {} fields × 4 λ", corpus.len()),
    ))
}

fn integrated_balance() -> Verdict {
    let r: IdentityReport = suite_report(Suite::Identity, "identity.json")?;
    let det = r.deterministic.iter().map(|c| c.relative_residual).fold(0.0, f64::max);
    let [coarse, refined] = r.stochastic.as_slice() else {
        return Err("expected coarse and refined stochastic runs".into());
    };
    let within = |s: &stobeam::suites::StochasticBalance| s.breakdown.residual.z_score(0.0).abs() < Z_LIMIT;
    let ok = det < BALANCE_TOL
        && coarse.trials == 256
        && refined.trials == 4 * coarse.trials
        && refined.steps == 2 * coarse.steps
        && within(coarse)
        && within(refined)
        && refined.envelope < coarse.envelope;
    Ok((
        ok,
        format!(
            "deterministic {det:.1e}; stochastic {:.3} ± {:.3} → {:.3} ± {:.3}",
            coarse.breakdown.residual.mean,
            coarse.breakdown.residual.std_err,
            refined.breakdown.residual.mean,
            refined.breakdown.residual.std_err
        ),
    ))
}

fn coefficients() -> Verdict {
    let interval = Interval::new(1.0, 2.0).map_err(|e| e.to_string())?;
    let cfg = RunConfig::default();
    let co = &cfg.coefficients;
    let audit = coefficient_audit(1000, cfg.run.seed, interval, 1.0, (co.audit_lambda_min, co.audit_lambda_max), AUDIT_TOL)
        .map_err(|e| e.to_string())?;
    let bounds = coefficient_lower_bounds(&co.bound_lambdas, interval, 1.0, co.bound_grid, co.bound_grid)
        .map_err(|e| e.to_string())?;
    let h5_exact = bounds.rows.iter().all(|r| r.minima[4] == 32.0);
    let positive = bounds.empirical_lambda0.is_some_and(|l0| {
        bounds.rows.iter().filter(|r| r.lambda >= l0).all(|r| r.minima.iter().all(|&m| m > 0.0))
    });
    let ok = audit.points == 1000 && audit.all_agree && h5_exact && positive;
    Ok((
        ok,
        format!(
            "audit of {} points, {} printed-form discrepancies reported; positive from λ₀ = {:?}; H₅/λ ≡ 32: {h5_exact}",
            audit.points,
            audit.discrepancies().len(),
            bounds.empirical_lambda0
        ),
    ))
}

fn carleman() -> Verdict {
    let r: CarlemanReport = suite_report(Suite::Carleman, "carleman.json")?;
    let golden: serde_json::Value =
        serde_json::from_str(include_str!("../golden/carleman.json")).map_err(|e| e.to_string())?;
    let expected = golden["empirical_constant"].as_f64().ok_or("golden constant missing")?;
    let actual = r.sweep.report.empirical_constant.ok_or("no empirical constant")?;
    let rel = (actual - expected).abs() / expected.abs();
    let finite = r.sweep.scenarios.iter().flat_map(|s| &s.rows).all(|row| row.ratio.mean.is_finite());
    let ok = r.sweep.scenarios.len() == 5
        && finite
        && r.sweep.max_amplitude_deviation <= AMPLITUDE_TOL
        && r.golden.applicable
        && rel <= GOLDEN_TOL;
    Ok((
        ok,
        format!(
            "constant {actual:.10e} vs golden {expected:.10e} (rel {rel:.1e}), amplitude deviation {:.1e}",
            r.sweep.max_amplitude_deviation
        ),
    ))
}

fn revised() -> Verdict {
    let r: RevisedSuiteReport = suite_report(Suite::Revised, "revised.json")?;
    let rep = &r.report;
    let ok = rep.epsilon == 1.0 / 8.0 && rep.pass && rep.tail_scaling == 16.0;
    Ok((
        ok,
        format!("ε = {}, constant {:.4e}, tail scaling {}", rep.epsilon, rep.constant, rep.tail_scaling),
    ))
}

fn observability() -> Verdict {
    let r: ObservabilityReport = suite_report(Suite::Observability, "observability.json")?;
    let cfg = RunConfig::default();
    let ok = r.rows.len() == 64
        && cfg.observability.paths == 400
        && cfg.observability.noise == 0.1
        && r.constant.is_finite()
        && r.constant_half.is_finite()
        && r.relative_change <= OBSERVABILITY_DRIFT
        && r.boundary_positive
        && r.rows.iter().all(|row| row.boundary.mean > 0.0);
    Ok((
        ok,
        format!(
            "C = {:.4e} (N = 200) → {:.4e} (N = 400), change {:.2}%",
            r.constant_half,
            r.constant,
            100.0 * r.relative_change
        ),
    ))
}

fn run_all(dir: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_stobeam"))
        .args(["run", "all", "--out"])
        .arg(dir)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.code() == Some(0) || status.code() == Some(1) {
        Ok(())
    } else {
        Err(format!("run all exited with {status}"))
    }
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_all(&a)?;
    run_all(&b)?;
    let mut names: Vec<String> = fs::read_dir(&a)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    names.retain(|n| n != "timings.json");
    names.sort();
    let count_b = fs::read_dir(&b).map_err(|e| e.to_string())?.count() - 1;
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok())
        .collect();
    let ok = names.contains(&"manifest.json".to_string()) && differing.is_empty() && count_b == names.len();
    Ok((ok, format!("{} files compared, differing: {differing:?}", names.len())))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("eigenbasis", Duration::from_secs(1), eigenbasis),
        ("energy identity", Duration::from_secs(30), energy),
        ("pointwise identity", Duration::from_secs(5), pointwise),
        ("integrated balance", Duration::from_secs(120), integrated_balance),
        ("coefficient audit", Duration::from_secs(5), coefficients),
        ("carleman sweep", Duration::from_secs(60), carleman),
        ("revised carleman", Duration::from_secs(120), revised),
        ("observability", Duration::from_secs(300), observability),
        ("determinism", Duration::MAX, determinism),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match verdict {
            Ok((ok, detail)) => (ok && elapsed < *limit, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = if *limit == Duration::MAX { String::new() } else { format!(" / {:.0} s", limit.as_secs_f64()) };
        println!(
            "criterion {} {name}: {} ({:.2} s{budget}) {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !ok {
            failures += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
