//! Monte Carlo coverage estimation for the four coverage types.
//!
//! Types I and III train one forest per Monte Carlo replicate and test on
//! fresh draws (marginal, and conditional on the predictor value); Types II
//! and IV fix each replicate's data set and estimate the conditional
//! coverage with `M` fresh test draws. All randomness is preassigned to
//! streams keyed by `(cell, replicate)`, so results are byte-identical
//! regardless of the parallelism degree.

use super::config::{CoverageType, ExperimentConfig};
use super::stats;
use crate::balls::{compute_oob_errors, split_conformal_fit, BallMethod};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, tune_hyperparameters, ForestModel, Hyperparams, TuningGrid};
use crate::metric::{distance, MetricPoint};
use crate::sampling::{RngFactory, Scenario};
use rayon::prelude::*;

/// One summary row: a `(coverage type, n, alpha, method)` cell.
#[derive(Debug, Clone)]
pub struct CoverageCell {
    pub scenario: String,
    pub coverage_type: CoverageType,
    pub n: usize,
    pub alpha: f64,
    pub method: BallMethod,
    pub coverage: f64,
    pub sd: Option<f64>,
    pub radius_mean: f64,
    pub radius_sd: f64,
    /// `(coverage, radius)` per replicate, for the conditional types.
    pub per_replicate: Option<Vec<(f64, f64)>>,
    pub seconds: f64,
}

/// Stream identifiers within one experiment cell. Each replicate owns a
/// disjoint block; the bootstrap draws come after the parallel phase.
#[derive(Clone, Copy)]
pub(crate) struct CellStreams {
    base: u64,
}

impl CellStreams {
    pub fn new(cell_index: u64) -> Self {
        CellStreams {
            base: (cell_index + 1) * 1_000_000_000,
        }
    }

    pub fn test_stream(&self) -> u64 {
        self.base
    }

    pub fn bootstrap_stream(&self) -> u64 {
        self.base + 1
    }

    pub fn replicate_data(&self, r: usize) -> u64 {
        self.base + 16 + 4 * r as u64
    }

    pub fn replicate_split(&self, r: usize) -> u64 {
        self.base + 17 + 4 * r as u64
    }

    pub fn replicate_tests(&self, r: usize) -> u64 {
        self.base + 18 + 4 * r as u64
    }
}

/// Mixes a seed with context indices into a forest seed.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E3779B97F4A7C15);
    x = x.wrapping_add(b.wrapping_mul(0xC2B2AE3D27D4EB4F));
    x = x.wrapping_add(c.wrapping_mul(0x165667B19E3779F9));
    x ^= x >> 29;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 32;
    x
}

pub(crate) fn resolve_hyper(
    config: &ExperimentConfig,
    dataset: &crate::dataset::Dataset,
    tune_seed: u64,
) -> Result<Hyperparams> {
    if config.tune {
        let grid = TuningGrid::standard(dataset.p(), config.trees);
        tune_hyperparameters(dataset, config.flavor, &grid, tune_seed)
    } else {
        Ok(Hyperparams {
            trees: config.trees,
            mtry: config.mtry.expect("validated"),
            min_split: config.min_split.expect("validated"),
        })
    }
}

struct MarginalReplicate {
    /// Per method: distances from every test response to this replicate's
    /// center at the matching test predictor.
    distances: Vec<Vec<f64>>,
    /// Per method and alpha: the ball radius.
    radii: Vec<Vec<f64>>,
}

/// Types I and III: probability over both the training sample and the test
/// draw (Type III fixes the predictor value of the test draw).
pub fn estimate_marginal(
    config: &ExperimentConfig,
    ctype: CoverageType,
    n: usize,
    cell_index: u64,
) -> Result<Vec<CoverageCell>> {
    assert!(matches!(ctype, CoverageType::I | CoverageType::III));
    let started = std::time::Instant::now();
    let scenario = Scenario::new(config.scenario.clone())?;
    let factory = RngFactory::new(config.seed);
    let streams = CellStreams::new(cell_index);
    let m = config.scale.replicates_m;

    // Test material, drawn sequentially from the cell's test stream.
    let x0 = scenario.conditional_predictor()?;
    let mut test_rng = factory.stream(streams.test_stream());
    let mut test_x: Vec<Vec<MetricPoint>> = Vec::with_capacity(m);
    let mut test_y: Vec<MetricPoint> = Vec::with_capacity(m);
    for _ in 0..m {
        let x = if ctype.conditions_on_predictor() {
            x0.clone()
        } else {
            scenario.sample_predictor(&mut test_rng)
        };
        let y = scenario.sample_response(&x, &mut test_rng)?;
        test_x.push(x);
        test_y.push(y);
    }

    let replicates: Vec<MarginalReplicate> = (0..m)
        .into_par_iter()
        .map(|r| {
            let mut data_rng = factory.stream(streams.replicate_data(r));
            let ds = scenario.generate(n, &mut data_rng)?;
            let hyper = resolve_hyper(config, &ds, mix_seed(config.seed, cell_index, r as u64, 1))?;
            let mut distances = Vec::with_capacity(config.methods.len());
            let mut radii = Vec::with_capacity(config.methods.len());
            for (mi, method) in config.methods.iter().enumerate() {
                match method {
                    BallMethod::Oob => {
                        let model = fit_forest(
                            &ds,
                            config.flavor,
                            hyper,
                            mix_seed(config.seed, cell_index, r as u64, 2),
                        )?;
                        let errors = compute_oob_errors(&model)?;
                        radii.push(
                            config
                                .alphas
                                .iter()
                                .map(|&a| crate::balls::empirical_quantile(&errors, a))
                                .collect::<Result<Vec<_>>>()?,
                        );
                        distances.push(center_distances(
                            &model, &test_x, &test_y, ctype,
                        )?);
                    }
                    BallMethod::SplitConformal => {
                        let mut split_rng = factory.stream(streams.replicate_split(r));
                        let fit = split_conformal_fit(
                            &ds,
                            config.flavor,
                            hyper,
                            mix_seed(config.seed, cell_index, r as u64, 3),
                            &mut split_rng,
                        )?;
                        radii.push(
                            config
                                .alphas
                                .iter()
                                .map(|&a| fit.radius(a))
                                .collect::<Result<Vec<_>>>()?,
                        );
                        distances.push(center_distances(
                            &fit.model, &test_x, &test_y, ctype,
                        )?);
                    }
                    BallMethod::Population => {
                        return Err(Error::InvalidParameter(
                            "population balls are not an estimated method".into(),
                        ))
                    }
                }
                let _ = mi;
            }
            Ok(MarginalReplicate { distances, radii })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let seconds = started.elapsed().as_secs_f64();
    for (mi, method) in config.methods.iter().enumerate() {
        for (ai, &alpha) in config.alphas.iter().enumerate() {
            // The diagonal pairs each replicate with its own fresh draw.
            let mut hits = 0.0;
            for r in 0..m {
                if replicates[r].distances[mi][r] < replicates[r].radii[mi][ai] {
                    hits += 1.0;
                }
            }
            let coverage = hits / m as f64;
            let mut boot_rng = factory.stream(streams.bootstrap_stream());
            let sd = stats::bootstrap_sd(
                |i, t| f64::from(replicates[i].distances[mi][t] < replicates[i].radii[mi][ai]),
                m,
                config.scale.bootstrap_k,
                &mut boot_rng,
            );
            let finite_radii: Vec<f64> = replicates
                .iter()
                .map(|rep| rep.radii[mi][ai])
                .filter(|r| r.is_finite())
                .collect();
            cells.push(CoverageCell {
                scenario: scenario.spec().to_string(),
                coverage_type: ctype,
                n,
                alpha,
                method: *method,
                coverage,
                sd: Some(sd),
                radius_mean: stats::mean(&finite_radii),
                radius_sd: stats::sample_sd(&finite_radii),
                per_replicate: None,
                seconds,
            });
        }
    }
    Ok(cells)
}

fn center_distances(
    model: &ForestModel,
    test_x: &[Vec<MetricPoint>],
    test_y: &[MetricPoint],
    ctype: CoverageType,
) -> Result<Vec<f64>> {
    if ctype.conditions_on_predictor() {
        // One shared predictor value: a single center serves every draw.
        let center = model.predict(&test_x[0])?;
        test_y.iter().map(|y| distance(y, &center)).collect()
    } else {
        test_x
            .iter()
            .zip(test_y)
            .map(|(x, y)| {
                let center = model.predict(x)?;
                distance(y, &center)
            })
            .collect()
    }
}

struct ConditionalReplicate {
    /// Per method and alpha: coverage estimate for this data set.
    coverage: Vec<Vec<f64>>,
    /// Per method and alpha: ball radius.
    radii: Vec<Vec<f64>>,
}

/// Types II and IV: coverage conditional on each replicate's data set (and,
/// for Type IV, on the predictor value), estimated with `M` fresh draws per
/// replicate.
pub fn estimate_conditional(
    config: &ExperimentConfig,
    ctype: CoverageType,
    n: usize,
    cell_index: u64,
) -> Result<Vec<CoverageCell>> {
    assert!(matches!(ctype, CoverageType::II | CoverageType::IV));
    let started = std::time::Instant::now();
    let scenario = Scenario::new(config.scenario.clone())?;
    let factory = RngFactory::new(config.seed);
    let streams = CellStreams::new(cell_index);
    let n_datasets = config.scale.datasets_n;
    let m = config.scale.replicates_m;
    let x0 = scenario.conditional_predictor()?;

    let replicates: Vec<ConditionalReplicate> = (0..n_datasets)
        .into_par_iter()
        .map(|r| {
            let mut data_rng = factory.stream(streams.replicate_data(r));
            let ds = scenario.generate(n, &mut data_rng)?;
            let hyper = resolve_hyper(config, &ds, mix_seed(config.seed, cell_index, r as u64, 1))?;
            let mut test_rng = factory.stream(streams.replicate_tests(r));
            let mut test_x: Vec<Vec<MetricPoint>> = Vec::with_capacity(m);
            let mut test_y: Vec<MetricPoint> = Vec::with_capacity(m);
            for _ in 0..m {
                let x = if ctype.conditions_on_predictor() {
                    x0.clone()
                } else {
                    scenario.sample_predictor(&mut test_rng)
                };
                let y = scenario.sample_response(&x, &mut test_rng)?;
                test_x.push(x);
                test_y.push(y);
            }
            let mut coverage = Vec::with_capacity(config.methods.len());
            let mut radii = Vec::with_capacity(config.methods.len());
            for method in &config.methods {
                let (dists, rads) = match method {
                    BallMethod::Oob => {
                        let model = fit_forest(
                            &ds,
                            config.flavor,
                            hyper,
                            mix_seed(config.seed, cell_index, r as u64, 2),
                        )?;
                        let errors = compute_oob_errors(&model)?;
                        let rads = config
                            .alphas
                            .iter()
                            .map(|&a| crate::balls::empirical_quantile(&errors, a))
                            .collect::<Result<Vec<_>>>()?;
                        (center_distances(&model, &test_x, &test_y, ctype)?, rads)
                    }
                    BallMethod::SplitConformal => {
                        let mut split_rng = factory.stream(streams.replicate_split(r));
                        let fit = split_conformal_fit(
                            &ds,
                            config.flavor,
                            hyper,
                            mix_seed(config.seed, cell_index, r as u64, 3),
                            &mut split_rng,
                        )?;
                        let rads = config
                            .alphas
                            .iter()
                            .map(|&a| fit.radius(a))
                            .collect::<Result<Vec<_>>>()?;
                        (center_distances(&fit.model, &test_x, &test_y, ctype)?, rads)
                    }
                    BallMethod::Population => {
                        return Err(Error::InvalidParameter(
                            "population balls are not an estimated method".into(),
                        ))
                    }
                };
                let cov: Vec<f64> = rads
                    .iter()
                    .map(|&rad| {
                        dists.iter().filter(|&&d| d < rad).count() as f64 / m as f64
                    })
                    .collect();
                coverage.push(cov);
                radii.push(rads);
            }
            Ok(ConditionalReplicate { coverage, radii })
        })
        .collect::<Result<_>>()?;

    let seconds = started.elapsed().as_secs_f64();
    let mut cells = Vec::new();
    for (mi, method) in config.methods.iter().enumerate() {
        for (ai, &alpha) in config.alphas.iter().enumerate() {
            let per_replicate: Vec<(f64, f64)> = replicates
                .iter()
                .map(|rep| (rep.coverage[mi][ai], rep.radii[mi][ai]))
                .collect();
            let coverages: Vec<f64> = per_replicate.iter().map(|(c, _)| *c).collect();
            let finite_radii: Vec<f64> = per_replicate
                .iter()
                .map(|(_, r)| *r)
                .filter(|r| r.is_finite())
                .collect();
            cells.push(CoverageCell {
                scenario: scenario.spec().to_string(),
                coverage_type: ctype,
                n,
                alpha,
                method: *method,
                coverage: stats::mean(&coverages),
                sd: Some(stats::sample_sd(&coverages)),
                radius_mean: stats::mean(&finite_radii),
                radius_sd: stats::sample_sd(&finite_radii),
                per_replicate: Some(per_replicate),
                seconds,
            });
        }
    }
    Ok(cells)
}

/// Dispatches on the coverage type.
pub fn estimate_coverage(
    config: &ExperimentConfig,
    ctype: CoverageType,
    n: usize,
    cell_index: u64,
) -> Result<Vec<CoverageCell>> {
    match ctype {
        CoverageType::I | CoverageType::III => estimate_marginal(config, ctype, n, cell_index),
        CoverageType::II | CoverageType::IV => estimate_conditional(config, ctype, n, cell_index),
    }
}
