//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with the measured quantity and its tolerance.
//!
//! The tests serialize on a mutex so the per-criterion wall-clock budgets
//! are meaningful; each criterion parallelizes internally over the global
//! worker pool.

use frechet_forest::balls;
use frechet_forest::forest::{self, ForestFlavor, Hyperparams};
use frechet_forest::harness::{self, validate, CoverageType, ExperimentConfig};
use frechet_forest::metric::distance;
use frechet_forest::sampling::{special, RngFactory, Scenario, ScenarioSpec};
use std::sync::Mutex;
use std::time::Instant;

static SERIAL: Mutex<()> = Mutex::new(());

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: u32, pass: bool, detail: &str, elapsed: f64, budget_s: f64) {
    println!(
        "criterion {criterion}: {} — {detail} ({elapsed:.1}s of {budget_s:.0}s budget)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {detail}");
    assert!(
        elapsed <= budget_s,
        "criterion {criterion} exceeded its runtime budget: {elapsed:.1}s > {budget_s:.0}s"
    );
}

#[test]
fn criterion_01_geometry_suite() {
    let _guard = lock();
    let started = Instant::now();
    let checks = validate::geometry_suite(10_000, 20_260_810).unwrap();
    let mut all_pass = true;
    let mut worst_line = String::new();
    for check in &checks {
        if !check.pass {
            all_pass = false;
            worst_line = format!(
                "{} {} measured {:.3e} > {:.0e}",
                check.space, check.check, check.worst, check.tolerance
            );
        }
    }
    let detail = if all_pass {
        format!("{} checks passed over 10^4 triples per space", checks.len())
    } else {
        worst_line
    };
    report(1, all_pass, &detail, started.elapsed().as_secs_f64(), 120.0);
}

#[test]
fn criterion_02_wishart_mean_loss_curves() {
    let _guard = lock();
    let started = Instant::now();
    let sigma = [1.0, 0.3, 0.3, 0.7];
    let curves =
        validate::wishart_mean_validation(15.0, &sigma, 2, 25_000, 600, 20_260_810).unwrap();
    let pass = curves.ai_within_one_step() && curves.lc_within_one_step();
    let detail = format!(
        "AI argmin at t={:.4} (target 0), LC argmin at t={:.4} (target 1), grid step {:.4}",
        curves.t_grid[curves.ai_argmin_index],
        curves.t_grid[curves.lc_argmin_index],
        curves.t_grid[1] - curves.t_grid[0]
    );
    report(2, pass, &detail, started.elapsed().as_secs_f64(), 300.0);
}

#[test]
fn criterion_03_hvmf_constant_and_mean() {
    let _guard = lock();
    let started = Instant::now();
    let mut worst_rel: f64 = 0.0;
    for d in [2usize, 3] {
        for kappa in [1.0, 10.0, 50.0] {
            let closed = special::hvmf_norm_const_inv(d, kappa).unwrap();
            let quad = special::hvmf_norm_const_inv_quadrature(d, kappa).unwrap();
            worst_rel = worst_rel.max(((closed - quad) / closed).abs());
        }
    }
    let const_pass = worst_rel <= 1e-8;

    // Fréchet mean of 1e5 draws at kappa = 50 within 0.02 of the location.
    let desc = frechet_forest::metric::SpaceDescriptor::Hyperboloid { ambient: 3 };
    let mu = frechet_forest::metric::MetricPoint::new(
        desc,
        vec![1.5f64.cosh(), 1.5f64.sinh() * 0.6, 1.5f64.sinh() * 0.8],
    )
    .unwrap();
    let factory = RngFactory::new(7);
    let mut rng = factory.stream(0);
    let draws: Vec<_> = (0..100_000)
        .map(|_| frechet_forest::sampling::sample_hvmf(&mu, 50.0, &mut rng).unwrap())
        .collect();
    let sample =
        frechet_forest::frechet::WeightedSample::equal_weights(draws.iter().collect()).unwrap();
    let mean = frechet_forest::frechet::frechet_mean(&sample).unwrap();
    let mean_err = distance(&mean.minimizer, &mu).unwrap();
    let pass = const_pass && mean_err < 0.02;
    let detail = format!(
        "normalizing-constant relative error {worst_rel:.2e} (tol 1e-8); sample mean within {mean_err:.4} of the location (tol 0.02)"
    );
    report(3, pass, &detail, started.elapsed().as_secs_f64(), 120.0);
}

const EUCLID_TYPE_I_CONFIG: &str = r#"
seed = 42
[scenario]
kind = "euclidean_linear"
sigma = 0.8660254037844386
[experiment]
coverage_types = ["I"]
methods = ["oob"]
alphas = [0.10]
sample_sizes = [200]
trees = 200
tune = true
replicates_m = 500
bootstrap_k = 200
"#;

#[test]
fn criterion_04_euclidean_type_i_coverage() {
    let _guard = lock();
    let started = Instant::now();
    let config = ExperimentConfig::from_toml(EUCLID_TYPE_I_CONFIG, false).unwrap();
    let cells = harness::estimate_coverage(&config, CoverageType::I, 200, 0).unwrap();
    let coverage = cells[0].coverage;
    let pass = (0.84..=0.93).contains(&coverage);
    let detail = format!(
        "Type I coverage {:.3} (band [0.84, 0.93] around the published 0.875), bootstrap sd {:.4}",
        coverage,
        cells[0].sd.unwrap_or(f64::NAN)
    );
    report(4, pass, &detail, started.elapsed().as_secs_f64(), 1800.0);
}

#[test]
fn criterion_05_oob_vs_sc_efficiency() {
    let _guard = lock();
    let started = Instant::now();
    let toml = r#"
seed = 4242
[scenario]
kind = "euclidean_linear"
sigma = 0.8660254037844386
[experiment]
coverage_types = ["I"]
methods = ["oob", "sc"]
alphas = [0.10]
sample_sizes = [50]
trees = 200
tune = true
replicates_m = 100
bootstrap_k = 50
"#;
    let config = ExperimentConfig::from_toml(toml, false).unwrap();
    // Half-sample relation on the MSE: the split-conformal forest at n sees
    // the predictive accuracy of a full forest at n/2.
    let oob_cells = harness::compare_mse(&config, 100, 100, 501).unwrap();
    let sc_cells = harness::compare_mse(&config, 200, 100, 502).unwrap();
    let oob_at_100 = oob_cells
        .iter()
        .find(|c| c.method == balls::BallMethod::Oob)
        .unwrap()
        .mse_mean;
    let sc_at_200 = sc_cells
        .iter()
        .find(|c| c.method == balls::BallMethod::SplitConformal)
        .unwrap()
        .mse_mean;
    let ratio = sc_at_200 / oob_at_100;
    let mse_pass = (0.85..=1.15).contains(&ratio);

    // Radius direction at n = 50: split-conformal balls are wider.
    let scenario = Scenario::new(ScenarioSpec::EuclideanLinear {
        sigma: 0.8660254037844386,
    })
    .unwrap();
    let factory = RngFactory::new(777);
    let mut oob_radii = Vec::new();
    let mut sc_radii = Vec::new();
    for r in 0..100 {
        let ds = scenario.generate(50, &mut factory.stream(100 + r)).unwrap();
        let hyper = Hyperparams {
            trees: 200,
            mtry: 3,
            min_split: 5,
        };
        let model = forest::fit_forest(&ds, ForestFlavor::Rfwlcfr, hyper, 900 + r).unwrap();
        let errors = balls::compute_oob_errors(&model).unwrap();
        oob_radii.push(balls::empirical_quantile(&errors, 0.10).unwrap());
        let mut split_rng = factory.stream(5000 + r);
        let fit =
            balls::split_conformal_fit(&ds, ForestFlavor::Rfwlcfr, hyper, 1900 + r, &mut split_rng)
                .unwrap();
        sc_radii.push(fit.radius(0.10).unwrap());
    }
    let med = |v: &[f64]| harness::stats::median(v);
    let radius_pass = med(&sc_radii) > med(&oob_radii);
    let pass = mse_pass && radius_pass;
    let detail = format!(
        "SC MSE at n=200 / OOB MSE at n=100 = {ratio:.3} (band [0.85, 1.15]); median radii at n=50: SC {:.3} vs OOB {:.3}",
        med(&sc_radii),
        med(&oob_radii)
    );
    report(5, pass, &detail, started.elapsed().as_secs_f64(), 1200.0);
}

const SPHERE_TYPE_III_CONFIG: &str = r#"
seed = 43
[scenario]
kind = "sphere_great_circle"
kappa = 50.0
[experiment]
coverage_types = ["III"]
methods = ["oob"]
alphas = [0.05]
sample_sizes = [200]
trees = 200
tune = true
replicates_m = 500
bootstrap_k = 200
"#;

#[test]
fn criterion_06_sphere_type_iii_coverage() {
    let _guard = lock();
    let started = Instant::now();
    let config = ExperimentConfig::from_toml(SPHERE_TYPE_III_CONFIG, false).unwrap();
    let cells = harness::estimate_coverage(&config, CoverageType::III, 200, 0).unwrap();
    let coverage = cells[0].coverage;
    let pass = (0.91..=0.98).contains(&coverage);
    let detail = format!(
        "Type III coverage {:.3} at the 0.25-quantile predictor (band [0.91, 0.98] around the published 0.950)",
        coverage
    );
    report(6, pass, &detail, started.elapsed().as_secs_f64(), 2400.0);
}

#[test]
fn criterion_07_split_conformal_finite_sample() {
    let _guard = lock();
    let started = Instant::now();
    use rayon::prelude::*;
    let scenario = Scenario::new(ScenarioSpec::EuclideanLinear {
        sigma: 0.8660254037844386,
    })
    .unwrap();
    let factory = RngFactory::new(20_260_810);
    let replicates = 2000usize;
    let hits: usize = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let base = 10 * r as u64;
            let ds = scenario.generate(50, &mut factory.stream(base)).unwrap();
            let hyper = Hyperparams {
                trees: 100,
                mtry: 3,
                min_split: 5,
            };
            let mut split_rng = factory.stream(base + 1);
            let fit = balls::split_conformal_fit(
                &ds,
                ForestFlavor::Rfwlcfr,
                hyper,
                base + 2,
                &mut split_rng,
            )
            .unwrap();
            let mut test_rng = factory.stream(base + 3);
            let x = scenario.sample_predictor(&mut test_rng);
            let y = scenario.sample_response(&x, &mut test_rng).unwrap();
            let ball = fit.ball(&x, 0.10).unwrap();
            usize::from(ball.contains(&y).unwrap())
        })
        .sum();
    let coverage = hits as f64 / replicates as f64;
    let mc_se = (0.9f64 * 0.1 / replicates as f64).sqrt();
    let threshold = 0.90 - 3.0 * mc_se;
    let pass = coverage >= threshold;
    let detail = format!(
        "marginal SC coverage {coverage:.4} >= {threshold:.4} (0.90 - 3 MC SE over {replicates} replicates)"
    );
    report(7, pass, &detail, started.elapsed().as_secs_f64(), 900.0);
}

#[test]
fn criterion_08_forest_structural_properties() {
    let _guard = lock();
    let started = Instant::now();
    use rand::Rng;
    let factory = RngFactory::new(88);
    let mut failures: Vec<String> = Vec::new();

    for fixture in 0..50u64 {
        let mut meta_rng = factory.stream(fixture);
        let n = meta_rng.random_range(30..=80);
        let sigma = meta_rng.random_range(0.3..1.5);
        let flavor = match fixture % 3 {
            0 => ForestFlavor::Frf,
            1 => ForestFlavor::Rfwlcfr,
            _ => ForestFlavor::Mrf,
        };
        let trees = meta_rng.random_range(10..=30);
        let min_split = meta_rng.random_range(1..=6);
        let scenario = Scenario::new(ScenarioSpec::EuclideanLinear { sigma }).unwrap();
        let ds = scenario
            .generate(n, &mut factory.stream(1000 + fixture))
            .unwrap();
        let mtry = meta_rng.random_range(1..=3);
        let hyper = Hyperparams {
            trees,
            mtry,
            min_split,
        };
        let model = forest::fit_forest(&ds, flavor, hyper, 3000 + fixture).unwrap();

        // Partition property and recomputed gain positivity.
        match model.verify_structure() {
            Ok(min_gain) => {
                if min_gain <= 0.0 {
                    failures.push(format!("fixture {fixture}: accepted split with gain {min_gain}"));
                }
            }
            Err(e) => failures.push(format!("fixture {fixture}: {e}")),
        }
        // Weight normalization at a random query.
        let x = &ds.predictors[fixture as usize % n];
        let weights = model.forest_weights(x, None).unwrap();
        let sum: f64 = weights.0.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || weights.0.iter().any(|w| !(0.0..=1.0).contains(w)) {
            failures.push(format!("fixture {fixture}: weights sum to {sum}"));
        }
        // Euclidean reduction: mean-aggregated trees equal the weighted
        // local-constant estimate on Euclidean responses.
        if fixture % 5 == 0 {
            let frf = forest::fit_forest(&ds, ForestFlavor::Frf, hyper, 5000 + fixture).unwrap();
            let rfw = forest::fit_forest(&ds, ForestFlavor::Rfwlcfr, hyper, 5000 + fixture).unwrap();
            let a = frf.predict(x).unwrap();
            let b = rfw.predict(x).unwrap();
            if distance(&a, &b).unwrap() > 1e-10 {
                failures.push(format!("fixture {fixture}: FRF and RFWLCFR disagree"));
            }
        }
        // Out-of-bag isolation: regrowing the trees that contain i must not
        // change i's out-of-bag prediction.
        if fixture % 7 == 0 {
            if let Some(i) = (0..n).find(|&i| {
                let k = model.oob_trees(i).len();
                k >= 1 && k < trees
            }) {
                let oob: std::collections::HashSet<usize> =
                    model.oob_trees(i).into_iter().collect();
                let in_bag: Vec<usize> =
                    (0..trees).filter(|b| !oob.contains(b)).collect();
                let regrown = model.with_regrown_trees(&in_bag, 999_000 + fixture).unwrap();
                let before = model.oob_predict(i).unwrap();
                let after = regrown.oob_predict(i).unwrap();
                if before.data != after.data {
                    failures.push(format!("fixture {fixture}: OOB prediction leaked in-bag trees"));
                }
            }
        }
    }

    // Out-of-bag tree fraction at B = 1000 on n = 500 observations.
    let scenario = Scenario::new(ScenarioSpec::EuclideanLinear { sigma: 1.0 }).unwrap();
    let ds = scenario.generate(500, &mut factory.stream(70_000)).unwrap();
    let hyper = Hyperparams {
        trees: 1000,
        mtry: 3,
        min_split: 25,
    };
    let model = forest::fit_forest(&ds, ForestFlavor::Rfwlcfr, hyper, 70_001).unwrap();
    let mean_fraction: f64 =
        (0..500).map(|i| model.oob_fraction(i)).sum::<f64>() / 500.0;
    let e_inv = (-1.0f64).exp();
    if (mean_fraction - e_inv).abs() > 0.03 {
        failures.push(format!(
            "OOB fraction {mean_fraction:.4} deviates from 1/e by more than 0.03"
        ));
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "50 fixtures: partition/weights/gains/reduction/isolation ok; OOB tree fraction {:.4} vs 1/e = {:.4}",
            mean_fraction, e_inv
        )
    } else {
        failures.join("; ")
    };
    report(8, pass, &detail, started.elapsed().as_secs_f64(), 300.0);
}

#[test]
fn criterion_09_determinism_across_thread_counts() {
    let _guard = lock();
    let started = Instant::now();
    let toml = r#"
seed = 9090
[scenario]
kind = "euclidean_linear"
sigma = 0.8660254037844386
[experiment]
coverage_types = ["I", "II"]
methods = ["oob", "sc"]
alphas = [0.10, 0.05]
sample_sizes = [40]
trees = 50
tune = false
mtry = 2
min_split = 5
replicates_m = 30
datasets_n = 10
bootstrap_k = 25
"#;
    let dir1 = tempfile::tempdir().unwrap();
    let dir4 = tempfile::tempdir().unwrap();
    let mut c1 = ExperimentConfig::from_toml(toml, false).unwrap();
    c1.threads = 1;
    harness::run_experiment(&c1, toml.as_bytes(), dir1.path()).unwrap();
    let mut c4 = ExperimentConfig::from_toml(toml, false).unwrap();
    c4.threads = 4;
    harness::run_experiment(&c4, toml.as_bytes(), dir4.path()).unwrap();

    let mut compared = 0usize;
    let mut pass = true;
    let mut detail = String::new();
    for entry in std::fs::read_dir(dir1.path()).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_string_lossy().to_string();
        if name == "timings.csv" {
            // Wall-clock timings are documented as excluded from the
            // determinism guarantee.
            continue;
        }
        let a = std::fs::read(dir1.path().join(&name)).unwrap();
        let b = std::fs::read(dir4.path().join(&name)).unwrap();
        compared += 1;
        if a != b {
            pass = false;
            detail = format!("{name} differs between 1 and 4 threads");
        }
    }
    if pass {
        detail = format!("{compared} result CSVs byte-identical across 1 and 4 threads");
    }
    pass &= compared >= 3;
    report(9, pass, &detail, started.elapsed().as_secs_f64(), 300.0);
}

#[test]
fn criterion_10_paper_scale_flag() {
    let _guard = lock();
    let started = Instant::now();
    let toml = r#"
seed = 1
[scenario]
kind = "euclidean_linear"
sigma = 1.0
[experiment]
coverage_types = ["I"]
alphas = [0.10]
sample_sizes = [50]
tune = false
mtry = 1
min_split = 5
replicates_m = 5
"#;
    let desk = ExperimentConfig::from_toml(toml, false).unwrap();
    let paper = ExperimentConfig::from_toml(toml, true).unwrap();
    let scale_ok = desk.scale.replicates_m == 5
        && paper.scale.replicates_m == 1000
        && paper.scale.datasets_n == 1000
        && paper.scale.bootstrap_k == 500;
    // The CLI accepts the flag: with a nonexistent config path the failure
    // must be the missing file (exit 4), not argument parsing (exit 2).
    let code = frechet_forest::cli::run_from([
        "frechet-forest",
        "coverage",
        "--config",
        "/nonexistent/config.toml",
        "--paper-scale",
    ]);
    let pass = scale_ok && code == 4;
    let detail = format!(
        "desk scale M={} vs paper scale M={}, N={}, K={}; CLI accepts --paper-scale (exit {code} on missing file)",
        desk.scale.replicates_m,
        paper.scale.replicates_m,
        paper.scale.datasets_n,
        paper.scale.bootstrap_k
    );
    report(10, pass, &detail, started.elapsed().as_secs_f64(), 60.0);
}
