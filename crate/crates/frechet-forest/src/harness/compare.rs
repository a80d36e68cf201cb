//! Out-of-bag versus split-conformal comparisons: predictive mean squared
//! error, and the relative radius/volume penalty of halving the sample.

use super::config::ExperimentConfig;
use super::coverage::{mix_seed, resolve_hyper, CellStreams};
use super::stats;
use crate::balls::{compute_oob_errors, empirical_quantile, split_conformal_fit, BallMethod};
use crate::error::Result;
use crate::metric::distance;
use crate::sampling::{RngFactory, Scenario, ScenarioSpec};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct MseCell {
    pub scenario: String,
    pub n: usize,
    pub method: BallMethod,
    pub mse_mean: f64,
    pub mse_sd: f64,
    pub seconds: f64,
}

/// Per replicate: a full-sample forest (the one out-of-bag balls use) and a
/// half-sample forest (the one split-conformal balls use), both scored on
/// fresh test draws.
pub fn compare_mse(
    config: &ExperimentConfig,
    n: usize,
    replicates: usize,
    cell_index: u64,
) -> Result<Vec<MseCell>> {
    let started = std::time::Instant::now();
    let scenario = Scenario::new(config.scenario.clone())?;
    let factory = RngFactory::new(config.seed);
    let streams = CellStreams::new(cell_index);

    let results: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut data_rng = factory.stream(streams.replicate_data(r));
            let ds = scenario.generate(n, &mut data_rng)?;
            let hyper = resolve_hyper(config, &ds, mix_seed(config.seed, cell_index, r as u64, 1))?;
            let full = crate::forest::fit_forest(
                &ds,
                config.flavor,
                hyper,
                mix_seed(config.seed, cell_index, r as u64, 2),
            )?;
            let mut split_rng = factory.stream(streams.replicate_split(r));
            let sc = split_conformal_fit(
                &ds,
                config.flavor,
                hyper,
                mix_seed(config.seed, cell_index, r as u64, 3),
                &mut split_rng,
            )?;
            let mut test_rng = factory.stream(streams.replicate_tests(r));
            let mut full_total = 0.0;
            let mut half_total = 0.0;
            for _ in 0..config.mse_test_draws {
                let x = scenario.sample_predictor(&mut test_rng);
                let y = scenario.sample_response(&x, &mut test_rng)?;
                let df = distance(&y, &full.predict(&x)?)?;
                let dh = distance(&y, &sc.model.predict(&x)?)?;
                full_total += df * df;
                half_total += dh * dh;
            }
            let m = config.mse_test_draws as f64;
            Ok((full_total / m, half_total / m))
        })
        .collect::<Result<_>>()?;

    let seconds = started.elapsed().as_secs_f64();
    let full: Vec<f64> = results.iter().map(|(f, _)| *f).collect();
    let half: Vec<f64> = results.iter().map(|(_, h)| *h).collect();
    Ok(vec![
        MseCell {
            scenario: scenario.spec().to_string(),
            n,
            method: BallMethod::Oob,
            mse_mean: stats::mean(&full),
            mse_sd: stats::sample_sd(&full),
            seconds,
        },
        MseCell {
            scenario: scenario.spec().to_string(),
            n,
            method: BallMethod::SplitConformal,
            mse_mean: stats::mean(&half),
            mse_sd: stats::sample_sd(&half),
            seconds,
        },
    ])
}

#[derive(Debug, Clone)]
pub struct RadiusVolumeCell {
    pub q: usize,
    pub n: usize,
    pub alpha: f64,
    pub radius_rel_err_median: f64,
    pub radius_rel_err_q1: f64,
    pub radius_rel_err_q3: f64,
    pub volume_rel_err_median: f64,
    pub per_replicate_radius_err: Vec<f64>,
    pub seconds: f64,
}

/// Relative radius error of the split-conformal ball with respect to the
/// out-of-bag ball, and the volume analog `(1+rho)^q - 1`, per response
/// dimension.
pub fn radius_volume_study(
    config: &ExperimentConfig,
    qs: &[usize],
    n: usize,
    alpha: f64,
    replicates: usize,
) -> Result<Vec<RadiusVolumeCell>> {
    let factory = RngFactory::new(config.seed);
    let mut out = Vec::new();
    for (qi, &q) in qs.iter().enumerate() {
        let started = std::time::Instant::now();
        let scenario = Scenario::new(ScenarioSpec::EuclideanMultivariate { q })?;
        let cell_index = 77_000 + qi as u64;
        let streams = CellStreams::new(cell_index);
        let rel_errors: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut data_rng = factory.stream(streams.replicate_data(r));
                let ds = scenario.generate(n, &mut data_rng)?;
                let hyper =
                    resolve_hyper(config, &ds, mix_seed(config.seed, cell_index, r as u64, 1))?;
                let full = crate::forest::fit_forest(
                    &ds,
                    config.flavor,
                    hyper,
                    mix_seed(config.seed, cell_index, r as u64, 2),
                )?;
                let errors = compute_oob_errors(&full)?;
                let r_oob = empirical_quantile(&errors, alpha)?;
                let mut split_rng = factory.stream(streams.replicate_split(r));
                let sc = split_conformal_fit(
                    &ds,
                    config.flavor,
                    hyper,
                    mix_seed(config.seed, cell_index, r as u64, 3),
                    &mut split_rng,
                )?;
                let r_sc = sc.radius(alpha)?;
                Ok((r_sc - r_oob) / r_oob)
            })
            .collect::<Result<_>>()?;
        let mut sorted = rel_errors.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quart = |p: f64| sorted[(p * (sorted.len() - 1) as f64).round() as usize];
        let volume_errors: Vec<f64> = rel_errors
            .iter()
            .map(|rho| (1.0 + rho).powi(q as i32) - 1.0)
            .collect();
        out.push(RadiusVolumeCell {
            q,
            n,
            alpha,
            radius_rel_err_median: stats::median(&rel_errors),
            radius_rel_err_q1: quart(0.25),
            radius_rel_err_q3: quart(0.75),
            volume_rel_err_median: stats::median(&volume_errors),
            per_replicate_radius_err: rel_errors,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}
