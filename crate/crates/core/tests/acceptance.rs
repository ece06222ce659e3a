//! Acceptance criteria 1–9. Each test prints one `criterion N: PASS|FAIL` line
//! on stderr (outside the capture) and then asserts.

use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::time::{Duration, Instant};

use cvlearn::baselines::{self, Schedule, Strategy};
use cvlearn::fock_oracle::{self, characteristic_trace};
use cvlearn::phase_space::GridSpec;
use cvlearn::protocols::{self, Branch, LearnPlan, Learner, LearnOverrides, ObservableSettings, PhaseBox, PointSet, Provenance};
use cvlearn::sampling::{pair_density_fft, PairSampler, SamplerBackend, SeedStream};
use cvlearn::stats::{histogram2d, linear_fit, tv_distance, wilson_upper};
use cvlearn::{Complex64, PhasePoint, ReflectionSymmetry, StateModel};
use rand::Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn report(n: u32, ok: bool, detail: String) {
    let line = format!("criterion {n}: {} | {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn within(t: Instant, budget: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e < budget, format!("runtime {:.1}s (budget {}s)", e.as_secs_f64(), budget.as_secs()))
}

#[test]
fn criterion_1_oracle_equivalence() {
    let t = Instant::now();
    let rows = fock_oracle::oracle_suite(&[40, 56], 1e-6).unwrap();
    let worst = rows.iter().map(|r| r.max_abs_diff).fold(0.0, f64::max);
    let failed: Vec<String> = rows.iter().filter(|r| !r.passed).map(|r| format!("{}@{}", r.fixture, r.dim)).collect();

    // truncation convergence: traces at 40 and 56 levels agree on the probe grid
    let grid = fock_oracle::oracle_probe_grid();
    let mut drift: f64 = 0.0;
    for (_, s) in fock_oracle::oracle_fixtures().unwrap() {
        let a = s.to_fock(40, 1e-8).unwrap();
        let b = s.to_fock(56, 1e-8).unwrap();
        for p in &grid {
            drift = drift.max((characteristic_trace(&a, p).unwrap() - characteristic_trace(&b, p).unwrap()).norm());
        }
    }
    let (fast, rt) = within(t, Duration::from_secs(60));
    report(
        1,
        failed.is_empty() && drift <= 1e-6 && fast && grid.len() == 200,
        format!("{} comparisons, worst |analytic-trace| {worst:.2e}, dim 40 vs 56 drift {drift:.2e}, failures {failed:?}, {rt}", rows.len()),
    );
}

#[test]
fn criterion_2_product_estimator_envelope() {
    let t = Instant::now();
    let n = protocols::plan_product_samples(0.1, 0.05, 1).unwrap();
    let probes: Vec<PhasePoint> = (0..10).map(|i| PhasePoint::single(Complex64::from_polar(0.15 + 0.13 * i as f64, 0.7 * i as f64))).collect();
    let set = PointSet::new(probes.clone()).unwrap();
    let trials = 2000u64;
    let mut worst_rate: f64 = 0.0;
    let mut worst_upper: f64 = 0.0;
    let mut details = Vec::new();
    for (name, state) in [("vacuum", StateModel::vacuum(1).unwrap()), ("fock-1", StateModel::fock(1).unwrap())] {
        let backend = SamplerBackend::auto(&state);
        let sampler = PairSampler::new(&state, &ReflectionSymmetry::identity(1), &backend).unwrap();
        let truth: Vec<Complex64> = probes
            .iter()
            .map(|a| state.characteristic(a).unwrap() * state.characteristic(&a.conj()).unwrap())
            .collect();
        let mut fails = vec![0u64; probes.len()];
        let stream = SeedStream::new(2, "criterion-2").child(name);
        for trial in 0..trials {
            let est = protocols::fourier_means(&sampler, &set, n, &stream.child(trial)).unwrap();
            for (i, (e, t)) in est.iter().zip(&truth).enumerate() {
                if (e - t).norm() > 0.1 {
                    fails[i] += 1;
                }
            }
        }
        for f in &fails {
            worst_rate = worst_rate.max(*f as f64 / trials as f64);
            worst_upper = worst_upper.max(wilson_upper(*f, trials, 1.96));
        }
        details.push(format!("{name} failures per probe {fails:?}"));
    }
    let (fast, rt) = within(t, Duration::from_secs(600));
    report(
        2,
        n == 3506 && worst_rate <= 0.05 && worst_upper <= 0.07 && fast,
        format!("N={n}, worst failure rate {worst_rate:.4}, Wilson upper {worst_upper:.4}; {}; {rt}", details.join("; ")),
    );
}

#[test]
fn criterion_3_backend_cross_check() {
    let t = Instant::now();
    let state = StateModel::fock(1).unwrap();
    let id = ReflectionSymmetry::identity(1);
    let n = 1_000_000usize;
    let draw = |backend: &SamplerBackend, label: &str| {
        let s = PairSampler::new(&state, &id, backend).unwrap();
        let mut rng = SeedStream::new(3, label).rng(0);
        let mut xs = vec![0.0; n];
        let mut ps = vec![0.0; n];
        for (x, p) in xs.chunks_mut(1).zip(ps.chunks_mut(1)) {
            s.sample_into(&mut rng, x, p);
        }
        histogram2d(&xs, &ps, -4.0, 4.0, 12)
    };
    let a = draw(&SamplerBackend::fft(), "fft");
    let b = draw(&SamplerBackend::fock(), "fock");
    let tv = tv_distance(&a, n as u64, &b, n as u64);
    let (fast, rt) = within(t, Duration::from_secs(300));
    report(3, tv <= 0.01 && fast, format!("TV(fft, fock-exact) = {tv:.5} on 12x12 cells over [-4,4]^2 at 1e6 pairs, {rt}"));
}

#[test]
fn criterion_4_end_to_end_cat() {
    let t = Instant::now();
    let state = StateModel::cat(c(2.0, 0.0), 1).unwrap();
    let points: Vec<PhasePoint> = (0..100).map(|m| PhasePoint::single(c(-3.0 + 6.0 * m as f64 / 99.0, 0.0))).collect();
    let truth: Vec<Complex64> = points.iter().map(|a| state.characteristic(a).unwrap()).collect();
    let backend = SamplerBackend::FftCharacteristic { half_width: 10.0, points: 1024 };
    let learner = Learner::new(&state, None, &backend).unwrap();
    let runs = 200u64;
    let mut good = 0;
    let mut worst: f64 = 0.0;
    let mut seen = BTreeSet::new();
    for run in 0..runs {
        let out = learner.learn(&points, 0.2, 0.1, &SeedStream::new(run, "criterion-4"), LearnOverrides::default()).unwrap();
        let err = out.records.iter().zip(&truth).map(|(r, t)| (r.value - t).norm()).fold(0.0, f64::max);
        worst = worst.max(err);
        if err <= 0.2 {
            good += 1;
        }
        for r in &out.records {
            seen.insert(r.branch.unwrap().tag());
        }
    }
    let rate = good as f64 / runs as f64;
    let all = [Branch::Zero, Branch::RealSign, Branch::ImagSign].iter().all(|b| seen.contains(b.tag()));
    let (fast, rt) = within(t, Duration::from_secs(900));
    report(
        4,
        rate >= 0.9 && all && fast,
        format!(
            "accuracy {good}/{runs} runs with max error <= 0.2 (worst {worst:.3}); branches seen {seen:?}{}; {rt}",
            if all { "" } else { " (imag-sign never selected: C is real on the real axis)" }
        ),
    );
}

#[test]
fn criterion_5_log_m_scaling() {
    let t = Instant::now();
    let ms = [10usize, 100, 1000, 10_000];
    let copies: Vec<f64> = ms.iter().map(|&m| LearnPlan::new(0.2, 0.1, m).unwrap().quantum_copies() as f64).collect();
    let x: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let fit = linear_fit(&x, &copies).unwrap();

    // empirical: M = 1000 points on a squeezed Gaussian
    let state = StateModel::squeezed_vacuum(1.3, 0.3).unwrap();
    let points: Vec<PhasePoint> = (0..40)
        .flat_map(|i| (0..25).map(move |j| PhasePoint::single(c(-1.5 + 3.0 * i as f64 / 39.0, -1.0 + 2.0 * j as f64 / 24.0))))
        .collect();
    let truth: Vec<Complex64> = points.iter().map(|a| state.characteristic(a).unwrap()).collect();
    let learner = Learner::new(&state, None, &SamplerBackend::GaussianAnalytic).unwrap();
    let runs = 10;
    let mut good = 0;
    let mut ledger_copies = 0;
    for run in 0..runs {
        let out = learner.learn(&points, 0.2, 0.1, &SeedStream::new(run, "criterion-5"), LearnOverrides::default()).unwrap();
        ledger_copies = out.ledger.quantum_total();
        if out.records.iter().zip(&truth).all(|(r, t)| (r.value - t).norm() <= 0.2) {
            good += 1;
        }
    }
    let rate = good as f64 / runs as f64;
    let (fast, rt) = within(t, Duration::from_secs(1200));
    report(
        5,
        fit.r_squared >= 0.99 && rate >= 0.9 && ledger_copies as f64 == copies[2] && fast,
        format!(
            "copies {copies:?} fit a={:.0} b={:.0} R2={:.6}; empirical success at M=1000: {good}/{runs}; {rt}",
            fit.intercept, fit.slope, fit.r_squared
        ),
    );
}

#[test]
fn criterion_6_lower_bound_family() {
    let t = Instant::now();
    let fam = baselines::build_lowerbound_family(8, None, 1.0).unwrap();
    let diag = fam.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let off = fam.off_diagonal_max();
    let (fast, rt) = within(t, Duration::from_secs(60));
    report(
        6,
        lo >= 0.49 && hi <= 0.50 && off <= 0.01 && fast,
        format!("M=8 |alpha|=1 r={:.2}: diagonal in [{lo:.5}, {hi:.5}], off-diagonal max {off:.5}; {rt}", fam.r),
    );
}

#[test]
fn criterion_7_restricted_vs_enhanced() {
    let t = Instant::now();
    let budgets: Vec<u64> = (3..=15).map(|k| 1u64 << k).collect();
    let epsilons = vec![0.9, 0.8, 0.7, 0.6];
    let mut rows = Vec::new();
    for m in [8usize, 16, 32, 64] {
        let fam = baselines::build_lowerbound_family(m, None, 1.0).unwrap();
        let s = SeedStream::new(7, "criterion-7").child(m);
        let backend = SamplerBackend::GaussianAnalytic;
        rows.extend(
            baselines::point_function_experiment(&fam, Strategy::Restricted, &Schedule::Copies(budgets.clone()), 200, &backend, &s.child("restricted"))
                .unwrap(),
        );
        rows.extend(
            baselines::point_function_experiment(
                &fam,
                Strategy::QuantumEnhanced,
                &Schedule::Epsilons { epsilons: epsilons.clone(), delta: 1.0 / 3.0 },
                200,
                &backend,
                &s.child("enhanced"),
            )
            .unwrap(),
        );
    }
    let rep = baselines::scaling_report(rows);
    let slope = rep.restricted_loglog.map_or(f64::NAN, |f| f.slope);
    let r2 = rep.enhanced_log.map_or(f64::NAN, |f| f.r_squared);
    let complete = rep.thresholds.iter().all(|(_, _, c)| c.is_some());
    let (fast, rt) = within(t, Duration::from_secs(1800));
    let thresholds: Vec<String> =
        rep.thresholds.iter().map(|(s, m, c)| format!("{}@{m}={}", s.tag(), c.map_or("none".into(), |v| format!("{v:.0}")))).collect();
    report(
        7,
        complete && slope >= 0.9 && r2 >= 0.98 && fast,
        format!("restricted log-log slope {slope:.3}, enhanced a+b lnM R2 {r2:.6}; copies to 2/3: {}; {rt}", thresholds.join(" ")),
    );
}

#[test]
fn criterion_8_observable_estimation() {
    let t = Instant::now();
    let cal = protocols::calibrate_c_norm().unwrap();
    let cal_ok = (cal.c_norm * cal.integral - cal.trace).abs() <= 1e-3 && (cal.c_norm - 1.0 / PI).abs() <= 1e-3;

    let vacuum = StateModel::vacuum(1).unwrap();
    let fock1 = StateModel::fock(1).unwrap();
    let cat = StateModel::cat(c(2.0, 0.0), 1).unwrap();
    let vac_box = PhaseBox::square(1, 2.4);
    let cat_box = PhaseBox { re: vec![[-3.0, 3.0]], im: vec![[-6.0, 6.0]] };
    let cases = [
        ("vacuum|vacuum", &vacuum, &vacuum, &vac_box, 1.0, 0.1),
        ("vacuum|fock-1", &vacuum, &fock1, &vac_box, 0.0, 0.1),
        ("cat|cat", &cat, &cat, &cat_box, 1.0, 0.15),
    ];
    let mut ok = cal_ok;
    let mut parts = vec![format!("c_norm {:.6} reproduces trace {:.6} (integral {:.6})", cal.c_norm, cal.trace, cal.integral)];
    for (i, (name, rho, target, region, want, tol)) in cases.into_iter().enumerate() {
        let sigma = target.clone();
        let obs = move |a: &PhasePoint| sigma.characteristic(a).unwrap();
        let mut settings = ObservableSettings::new(0.1, 0.1, SamplerBackend::auto(rho));
        settings.learn_epsilon = Some(0.2);
        settings.max_points = Some(4096);
        let out = protocols::estimate_observable(rho, None, &obs, region, &settings, &SeedStream::new(8, "criterion-8").child(i)).unwrap();
        // the tail bound is checked inside estimate_observable; repeat it here for the report
        let tail = protocols::tail_integral(rho, &obs, region, settings.c_norm).unwrap().norm();
        let truth = cvlearn::cli::fock_overlap(rho, target).unwrap();
        let v = out.record.value.re;
        let pass = (v - want).abs() <= tol && (truth - want).abs() < 1e-9 && tail < settings.epsilon / 2.0;
        ok &= pass;
        parts.push(format!("{name}: {v:.4} (target {want} +/- {tol}, tail {tail:.1e}, M {} of {})", out.m_used, out.m_requested));
    }
    let (fast, rt) = within(t, Duration::from_secs(900));
    report(8, ok && fast, format!("{}; {rt}", parts.join("; ")));
}

fn shipped_states() -> Vec<StateModel> {
    vec![
        StateModel::vacuum(1).unwrap(),
        StateModel::squeezed_vacuum(1.4, 0.3).unwrap(),
        StateModel::fock(3).unwrap(),
        StateModel::cat(c(2.0, 0.0), 1).unwrap(),
        StateModel::cat(c(0.8, 0.6), -1).unwrap(),
        StateModel::binomial(&cvlearn::states::binomial_code_coefficients(1, 2, 0)).unwrap(),
        StateModel::mixture(vec![
            (0.5, StateModel::squeezed_vacuum(1.3, 0.2).unwrap()),
            (0.5, StateModel::squeezed_vacuum(1.3, -0.2).unwrap()),
        ])
        .unwrap(),
    ]
}

#[test]
fn criterion_9_property_suites() {
    let mut failures: Vec<String> = Vec::new();
    let mut checks = 0usize;
    let mut rng = SeedStream::new(9, "criterion-9").rng(0);

    for (k, s) in shipped_states().iter().enumerate() {
        checks += 1;
        if (s.characteristic(&PhasePoint::zero(1)).unwrap() - c(1.0, 0.0)).norm() > 1e-12 {
            failures.push(format!("C(0) != 1 for state {k}"));
        }
        for _ in 0..200 {
            let a = PhasePoint::single(Complex64::from_polar(4.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>()));
            let v = s.characteristic(&a).unwrap();
            let w = s.characteristic(&a.neg()).unwrap();
            checks += 2;
            if v.norm() > 1.0 + 1e-9 {
                failures.push(format!("|C| > 1 for state {k}"));
            }
            if (w - v.conj()).norm() > 1e-10 {
                failures.push(format!("C(-a) != conj C(a) for state {k}"));
            }
        }
        // densities: quadrature marginals and the pair density integrate to one
        let grid = GridSpec::line(12.0, 2048).unwrap();
        for theta in [0.0, 0.9, 2.2] {
            checks += 1;
            let mass = s.quadrature_pdf(&[theta], &grid).unwrap().mass();
            if (mass - 1.0).abs() > 1e-6 {
                failures.push(format!("quadrature mass {mass} for state {k}"));
            }
        }
        checks += 1;
        let pair = pair_density_fft(s, &ReflectionSymmetry::identity(1), 10.0, 512).unwrap();
        let mass = pair.integral();
        if (mass - c(1.0, 0.0)).norm() > 1e-6 {
            failures.push(format!("pair density mass {mass} for state {k}"));
        }
    }

    // branch logic is total: exactly one branch, and the resolved value is ±√Ĉ² or 0
    for i in 0..81 {
        for j in 0..81 {
            for eps in [0.05, 0.2, 0.5, 0.9] {
                checks += 1;
                let z = c(-1.2 + 0.03 * i as f64, -1.2 + 0.03 * j as f64);
                let b = protocols::select_branch(z, eps);
                let root = protocols::principal_root(z);
                let ok = match b {
                    Branch::Zero => z.norm() <= 4.0 * eps * eps / 9.0 && protocols::resolve_point(z, b, 1) == c(0.0, 0.0),
                    Branch::RealSign => root.re.abs() >= SQRT_2 * eps / 3.0,
                    Branch::ImagSign => root.re.abs() < SQRT_2 * eps / 3.0 && z.norm() > 4.0 * eps * eps / 9.0,
                };
                let resolved = [1i8, -1].iter().all(|&s| {
                    let v = protocols::resolve_point(z, b, s);
                    b == Branch::Zero || (v * v - z).norm() < 1e-12
                });
                if !ok || !resolved {
                    failures.push(format!("branch logic at {z} eps {eps}"));
                }
            }
        }
    }

    // determinism: byte-identical results CSV for the same seed at different worker counts
    let state = StateModel::cat(c(1.2, 0.0), 1).unwrap();
    let points: Vec<PhasePoint> = (0..12).map(|m| PhasePoint::single(c(-1.0 + 0.2 * m as f64, 0.3))).collect();
    let csv_with = |threads: usize| -> Vec<u8> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let out = protocols::learn_points(&state, None, &points, 0.3, 0.2, &SamplerBackend::fft(), &SeedStream::new(99, "determinism")).unwrap();
            let prov = Provenance { state_hash: state.hash(), backend: "fft-characteristic".into(), seed: 99 };
            let mut buf = Vec::new();
            protocols::write_results_csv(&mut buf, &out.records, None, Some(&out.ledger), &prov).unwrap();
            buf
        })
    };
    let one = csv_with(1);
    checks += 2;
    if one != csv_with(1) {
        failures.push("repeat run not byte-identical".into());
    }
    if one != csv_with(3) {
        failures.push("worker count changed the output".into());
    }

    report(9, failures.is_empty(), format!("{checks} property checks, {} failures {:?}", failures.len(), failures.iter().take(5).collect::<Vec<_>>()));
}
