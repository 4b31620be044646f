//! Acceptance suite: one test per criterion, each printing a single
//! `[criterion N] PASS|FAIL` line with the numbers behind the verdict.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use oulab::convex::{moreau_envelope, ConvexDomain, ConvexPotential, Potential};
use oulab::harness::{run_experiment, write_experiment, ExperimentConfig};
use oulab::lab::checks::{
    check_decay, check_hyper, check_logsob, check_mehler_grid, check_mehler_mc, check_penalization_limit,
    check_poincare, check_pointwise_gradient, check_resolvent_bounds, check_smoothing, GradientMode,
};
use oulab::lab::constants::smoothing_constant;
use oulab::lab::fit::geometric_times;
use oulab::lab::{standard_battery, CheckReport, Lab, Scene, Target, TestFunction, Verdict};
use oulab::oracle::closed_forms;
use oulab::rng::stream_rng;
use oulab::spectral::GaussianModel;
use rand::Rng;

/// Prints the criterion line on the real stdout, so it shows up without
/// `--nocapture`.
fn announce(n: u32, title: &str, ok: bool, detail: &str) {
    let line = format!("[criterion {n}] {} {title}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {n} ({title}) failed: {detail}");
}

fn failing(reports: &[CheckReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| r.verdict != Verdict::Pass)
        .map(|r| format!("{}={} (margin {:.3e}, tol {:.3e})", r.name, r.verdict, r.margin, r.tolerance))
        .collect()
}

fn x_polynomial() -> TestFunction {
    TestFunction::Polynomial {
        axis: 0,
        coefficients: vec![0.0, 1.0],
    }
}

fn scene_2d(domain: ConvexDomain, eps: f64) -> Scene {
    Scene::new(
        GaussianModel::from_eigenvalues(&[1.0, 0.5]).unwrap(),
        ConvexPotential::quadratic(1.0),
        domain,
        eps,
    )
    .unwrap()
}

fn half_plane() -> ConvexDomain {
    ConvexDomain::HalfSpace {
        normal: vec![1.0, 0.0],
        offset: 0.0,
    }
}

fn unit_ball(dim: usize) -> ConvexDomain {
    ConvexDomain::Ball {
        center: vec![0.0; dim],
        radius: 1.0,
    }
}

/// The half-line `(0, ∞)`.
fn half_line() -> ConvexDomain {
    ConvexDomain::HalfSpace {
        normal: vec![-1.0],
        offset: 0.0,
    }
}

#[test]
fn criterion_01_mehler_equivalence() {
    let start = Instant::now();
    let times = [0.1, 0.5, 1.0];
    let mut detail = Vec::new();
    let mut ok = true;
    for lambda1 in [0.5, 1.0, 2.0] {
        let mut lab = Lab::new(Scene::ornstein_uhlenbeck(lambda1).unwrap(), 11);
        lab.mc.paths = 100_000;
        lab.mc.step = 1e-3;
        for f in [x_polynomial(), TestFunction::tanh(2.0)] {
            let r = check_mehler_grid(&lab, &f, &times, 1e-3).unwrap();
            ok &= r.verdict == Verdict::Pass;
            detail.push(format!("grid λ={lambda1} err={:.2e}", r.lhs));
        }
        let r = check_mehler_mc(&lab, &x_polynomial(), &times, &[-1.0, 0.5]).unwrap();
        ok &= r.verdict == Verdict::Pass;
        detail.push(format!("mc λ={lambda1} |diff|={:.2e}≤{:.2e}", r.lhs, r.tolerance));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed <= 60.0;
    announce(1, "Mehler equivalence", ok, &format!("{} in {elapsed:.1}s", detail.join(", ")));
}

#[test]
fn criterion_02_gradient_equality_case() {
    let mut worst: f64 = 0.0;
    let mut verdicts_ok = true;
    for lambda1 in [0.5, 1.0, 2.0] {
        let lab = Lab::new(Scene::ornstein_uhlenbeck(lambda1).unwrap(), 12);
        let f = x_polynomial();
        for t in [0.1, 0.5, 1.0] {
            // |∇T(t)f| against e^{−t/λ₁}·T(t)|∇f| = e^{−t/λ₁}, on |ξ| ≤ 3√λ₁.
            let sol = lab.solve(Target::Domain, |x| f.value(x), &[t]).unwrap();
            let grad = sol.field(0).gradient_norm();
            let expected = (-t / lambda1).exp();
            for (k, g) in grad.iter().enumerate() {
                if sol.grid.point(k)[0].abs() <= 3.0 * lambda1.sqrt() {
                    worst = worst.max((g - expected).abs() / expected);
                }
            }
            for p in [1.0, 2.0] {
                let r = check_pointwise_gradient(&lab, Target::Domain, &f, t, p, GradientMode::Grid, &[])
                    .unwrap()
                    .equality(true);
                verdicts_ok &= r.verdict != Verdict::Fail;
            }
        }
    }
    announce(
        2,
        "gradient estimate equality case",
        worst <= 1e-3 && verdicts_ok,
        &format!("max relative deviation {worst:.2e}, no FAIL verdicts: {verdicts_ok}"),
    );
}

#[test]
fn criterion_03_gradient_inequality_battery() {
    let battery = standard_battery(2);
    let pick = ["tanh_mixed", "sine_fast", "bump_offset"];
    let mut bad = Vec::new();
    let mut worst_fraction: f64 = 1.0;
    let mut checks = 0;
    for domain in [half_plane(), unit_ball(2)] {
        for eps in [0.1, 0.01] {
            let mut lab = Lab::new(scene_2d(domain.clone(), eps), 13);
            lab.grid.nodes = 201;
            lab.grid.dt = 2e-3;
            for (name, f) in battery.iter().filter(|(n, _)| pick.contains(&n.as_str())) {
                for p in [1.0, 2.0] {
                    let r = check_pointwise_gradient(&lab, Target::Penalized, f, 0.25, p, GradientMode::Grid, &[])
                        .unwrap();
                    checks += 1;
                    let nodes = r.nodes.expect("node-wise report");
                    worst_fraction = worst_fraction.min(nodes.pass_fraction());
                    if r.verdict != Verdict::Pass || nodes.below_guard > 0 || nodes.pass_fraction() < 0.99 {
                        bad.push(format!(
                            "{} eps={eps} {name} p={p}: {} pass {:.4} below {}",
                            domain.label(),
                            r.verdict,
                            nodes.pass_fraction(),
                            nodes.below_guard
                        ));
                    }
                }
            }
        }
    }
    announce(
        3,
        "gradient estimate inequality battery",
        bad.is_empty(),
        &format!("{checks} checks, worst node pass fraction {worst_fraction:.4}; {}", bad.join("; ")),
    );
}

#[test]
fn criterion_04_smoothing_rate() {
    let mut lab = Lab::new(Scene::ornstein_uhlenbeck(1.0).unwrap(), 14);
    lab.grid.nodes = 6401;
    lab.grid.half_width = 6.0;
    lab.grid.dt = 2e-5;
    let f = TestFunction::tanh(50.0);
    let times = geometric_times(1e-3, 1e-1, 11).unwrap();
    let out = check_smoothing(&lab, Target::Domain, &f, 2.0, &times).unwrap();
    let slope = out.fit.slope;
    let bound = out.reports.iter().find(|r| r.name == "smoothing_bound").unwrap();
    let k2 = smoothing_constant(2.0).unwrap();
    let ok = (-0.55..=-0.45).contains(&slope) && bound.verdict == Verdict::Pass;
    announce(
        4,
        "smoothing rate",
        ok,
        &format!(
            "slope {slope:.4} ± {:.4}, K₂ = {k2}, pointwise bound {} over {} nodes",
            out.fit.slope_half_width,
            bound.verdict,
            bound.nodes.map(|n| n.evaluated).unwrap_or(0)
        ),
    );
}

#[test]
fn criterion_05_poincare() {
    let mut lab = Lab::new(
        Scene::new(
            GaussianModel::from_eigenvalues(&[1.0, 0.5]).unwrap(),
            ConvexPotential::Zero,
            ConvexDomain::FullSpace,
            0.01,
        )
        .unwrap(),
        15,
    );
    lab.samples.count = 200_000;
    let sample = lab.invariant(Target::Domain, 0).unwrap();
    let f = vec![("coordinate".to_string(), TestFunction::coordinate(2, 0))];
    let r = &check_poincare(&lab, Target::Domain, &f, 2.0, true).unwrap()[0];
    let ratio = r.lhs / r.rhs;
    let mut ok = (ratio - 1.0).abs() <= 0.02 && sample.ess >= 1e4 && r.verdict != Verdict::Fail;
    let mut bad = Vec::new();
    for domain in [unit_ball(2), half_plane()] {
        let mut lab = Lab::new(scene_2d(domain, 0.01), 15);
        lab.samples.count = 200_000;
        let reports = check_poincare(&lab, Target::Domain, &standard_battery(2), 2.0, false).unwrap();
        ok &= reports.len() == 20;
        bad.extend(failing(&reports));
    }
    ok &= bad.is_empty();
    announce(
        5,
        "Poincaré sharpness",
        ok,
        &format!(
            "‖f−m‖/(√λ₁‖∇f‖) = {ratio:.4}, ESS {:.0}; battery failures: {:?}",
            sample.ess, bad
        ),
    );
}

#[test]
fn criterion_06_log_sobolev() {
    let mut lab = Lab::new(Scene::ornstein_uhlenbeck(1.0).unwrap(), 16);
    lab.samples.count = 1_000_000;
    let f = vec![("exp_half".to_string(), TestFunction::exponential(0.5))];
    let r = &check_logsob(&lab, Target::Domain, &f, 2.0, true).unwrap()[0];
    let exact = 0.5 * 0.5f64.exp();
    let (dl, dr) = ((r.lhs / exact - 1.0).abs(), (r.rhs / exact - 1.0).abs());
    let mut ok = dl <= 0.02 && dr <= 0.02 && r.verdict != Verdict::Fail;
    let mut bad = Vec::new();
    for domain in [unit_ball(2), half_plane()] {
        let mut lab = Lab::new(scene_2d(domain, 0.01), 16);
        lab.samples.count = 200_000;
        bad.extend(failing(&check_logsob(&lab, Target::Domain, &standard_battery(2), 2.0, false).unwrap()));
    }
    ok &= bad.is_empty();
    announce(
        6,
        "log-Sobolev equality",
        ok,
        &format!(
            "entropy {:.4}, energy side {:.4}, exact {exact:.4}; battery failures: {bad:?}",
            r.lhs, r.rhs
        ),
    );
}

#[test]
fn criterion_07_hypercontractivity_boundary() {
    let mut lab = Lab::new(Scene::ornstein_uhlenbeck(1.0).unwrap(), 17);
    lab.samples.count = 1_000_000;
    let t = 3f64.ln() / 2.0;
    let mut ok = true;
    let mut detail = Vec::new();
    for a in [0.25, 0.5] {
        let reports = check_hyper(&lab, Target::Domain, &TestFunction::exponential(a), 2.0, t, true, true).unwrap();
        for r in &reports {
            let good = if r.expect_fail {
                r.verdict == Verdict::Fail
            } else {
                r.verdict != Verdict::Fail
            };
            ok &= good;
            detail.push(format!(
                "a={a} {} p={} {} (margin {:.3e}, tol {:.3e})",
                r.name,
                r.params.get("p").copied().unwrap_or(f64::NAN),
                r.verdict,
                r.margin,
                r.tolerance
            ));
        }
    }
    announce(7, "hypercontractivity boundary", ok, &detail.join("; "));
}

#[test]
fn criterion_08_decay_rates() {
    let scenes: Vec<(Scene, TestFunction)> = vec![
        (Scene::ornstein_uhlenbeck(1.0).unwrap(), TestFunction::tanh(2.0)),
        (
            Scene::ornstein_uhlenbeck(2.0).unwrap(),
            TestFunction::Sine {
                coefficients: vec![1.0],
                phase: 0.3,
            },
        ),
        (
            Scene::new(
                GaussianModel::from_eigenvalues(&[1.0]).unwrap(),
                ConvexPotential::Zero,
                half_line(),
                0.01,
            )
            .unwrap(),
            x_polynomial(),
        ),
        (
            Scene::new(
                GaussianModel::from_eigenvalues(&[1.0, 0.5]).unwrap(),
                ConvexPotential::quadratic(1.0),
                half_plane(),
                0.01,
            )
            .unwrap(),
            TestFunction::Tanh {
                coefficients: vec![1.0, 1.0],
                shift: 0.2,
            },
        ),
    ];
    let mut bad = Vec::new();
    let mut slopes = Vec::new();
    for (scene, f) in scenes {
        let lambda1 = scene.model().lambda1();
        let mut lab = Lab::new(scene, 18);
        if lab.scene.model().dim() == 2 {
            lab.grid.nodes = 121;
            lab.grid.dt = 4e-3;
        }
        let times: Vec<f64> = [0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0]
            .iter()
            .map(|s| s * lambda1)
            .collect();
        let out = check_decay(&lab, Target::Domain, &f, &times, &[2.0], &[1.5, 2.0, 4.0], false).unwrap();
        for fit in &out.fits {
            slopes.push(format!("{}:{:.3}", fit.name, fit.slope * lambda1));
        }
        bad.extend(failing(&out.reports).into_iter().map(|s| format!("[{}] {s}", lab.scene.label)));
    }
    announce(
        8,
        "decay rates",
        bad.is_empty(),
        &format!("slopes·λ₁ {}; failures {bad:?}", slopes.join(" ")),
    );
}

#[test]
fn criterion_09_penalization_to_reflection() {
    let eps = [0.3, 0.1, 0.03, 0.01];
    let cases = vec![
        (
            Scene::new(
                GaussianModel::from_eigenvalues(&[1.0]).unwrap(),
                ConvexPotential::Zero,
                half_line(),
                0.01,
            )
            .unwrap(),
            vec![1.0],
        ),
        (scene_2d(unit_ball(2), 0.01), vec![0.5, 0.3]),
    ];
    let mut bad = Vec::new();
    let mut gaps = Vec::new();
    for (scene, x) in cases {
        let mut lab = Lab::new(scene, 19);
        lab.mc.paths = 40_000;
        lab.mc.step = 1e-3;
        lab.samples.count = 200_000;
        let reports = check_penalization_limit(&lab, &x_polynomial(), 0.5, &x, &eps, &[]).unwrap();
        for r in reports.iter().filter(|r| r.name.starts_with("semigroup")) {
            gaps.push(format!("{}: {:.3e}≤{:.3e}", r.name, r.lhs, r.rhs));
        }
        bad.extend(failing(&reports).into_iter().map(|s| format!("[{}] {s}", lab.scene.label)));
    }
    announce(
        9,
        "penalization to reflection",
        bad.is_empty(),
        &format!("{}; failures {bad:?}", gaps.join(", ")),
    );
}

#[test]
fn criterion_10_convex_analysis_oracles() {
    let mut rng = stream_rng(10, 0);
    let mut worst: f64 = 0.0;
    let abs = ConvexPotential::AbsSum { weight: 1.0 };
    for _ in 0..200 {
        let eps = rng.random_range(0.01..2.0);
        let x = rng.random_range(-3.0..3.0);
        let c = rng.random_range(0.1..3.0);
        let h = moreau_envelope(&abs, eps, &[x]).unwrap().value;
        worst = worst.max((h - closed_forms::huber(eps, x)).abs());
        let q = moreau_envelope(&ConvexPotential::quadratic(c), eps, &[x]).unwrap().value;
        worst = worst.max((q - closed_forms::quadratic_moreau(c, eps, x)).abs());
        let normal = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let offset = rng.random_range(-1.0..1.0);
        let p = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let d = ConvexDomain::HalfSpace {
            normal: normal.to_vec(),
            offset,
        }
        .distance(&p)
        .unwrap();
        worst = worst.max((d - closed_forms::halfspace_distance(&normal, offset, &p)).abs());
        let center = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let radius = rng.random_range(0.1..2.0);
        let proj = ConvexDomain::Ball {
            center: center.to_vec(),
            radius,
        }
        .projected(&p)
        .unwrap();
        let exact = closed_forms::ball_projection(&center, radius, &p);
        worst = worst.max(proj.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }

    let scenes: Vec<ConvexPotential> = vec![
        ConvexPotential::quadratic(2.0),
        ConvexPotential::LogCosh {
            weights: vec![1.0, 0.5],
            scale: 0.3,
        },
        ConvexPotential::AbsSum { weight: 0.7 },
        ConvexPotential::HalfSquaredDistance {
            domain: Box::new(unit_ball(2)),
        },
    ];
    let mut violations = 0;
    let mut probes = 0;
    for u in &scenes {
        for _ in 0..1000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let e1 = rng.random_range(0.01..1.0);
            let e2 = e1 * rng.random_range(0.05..0.95);
            let f = u.value(&x).unwrap();
            let coarse = moreau_envelope(u, e1, &x).unwrap().value;
            let fine = moreau_envelope(u, e2, &x).unwrap().value;
            probes += 1;
            if fine < coarse - 1e-8 || coarse > f + 1e-10 || fine > f + 1e-10 {
                violations += 1;
            }
        }
    }
    announce(
        10,
        "convex-analysis oracles",
        worst <= 1e-10 && violations == 0,
        &format!("max closed-form error {worst:.2e}; {violations} envelope violations in {probes} probes"),
    );
}

#[test]
fn criterion_11_resolvent_bounds() {
    let pick = ["tanh", "sine_fast", "bump", "arctan_shifted", "tanh_jump"];
    let functions: Vec<(String, TestFunction)> = standard_battery(1)
        .into_iter()
        .filter(|(n, _)| pick.contains(&n.as_str()))
        .collect();
    let lambdas = [0.5, 1.0, 2.0];
    let mut bad = Vec::new();
    let mut detail = Vec::new();
    for scene in [
        Scene::ornstein_uhlenbeck(1.0).unwrap(),
        Scene::new(
            GaussianModel::from_eigenvalues(&[2.0]).unwrap(),
            ConvexPotential::quadratic(0.5),
            half_line(),
            0.01,
        )
        .unwrap(),
    ] {
        let mut lab = Lab::new(scene, 20);
        lab.grid.nodes = 201;
        lab.grid.dt = 5e-3;
        let reports = check_resolvent_bounds(&lab, Target::Domain, &functions, &lambdas).unwrap();
        for r in &reports {
            detail.push(format!("{} {:.3}≤{:.3}", r.name, r.lhs, r.rhs));
        }
        bad.extend(failing(&reports));
    }
    announce(
        11,
        "resolvent bounds",
        functions.len() == 5 && bad.is_empty(),
        &format!("{}; failures {bad:?}", detail.join(", ")),
    );
}

fn bundled_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    files
}

/// File contents with the `# config_hash=` line kept, since the hash must
/// match as well.
fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_12_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let mut detail = Vec::new();
    let mut ok = true;
    for path in bundled_configs() {
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let mut outputs = Vec::new();
        for workers in [1, 3] {
            let mut config = ExperimentConfig::load(&path).unwrap();
            config.workers = workers;
            let exp = run_experiment(&config, false).unwrap();
            let dir = tmp.path().join(format!("{stem}_{workers}"));
            write_experiment(&dir, &exp).unwrap();
            outputs.push(data_files(&dir));
        }
        let differing: Vec<&str> = outputs[0]
            .iter()
            .zip(&outputs[1])
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.0.as_str())
            .collect();
        let same = outputs[0].len() == outputs[1].len() && differing.is_empty();
        ok &= same;
        if same {
            detail.push(format!("{stem}: {} files identical", outputs[0].len()));
        } else {
            detail.push(format!("{stem}: differing {differing:?}"));
        }
    }
    announce(12, "determinism", ok && !detail.is_empty(), &detail.join(", "));
}
