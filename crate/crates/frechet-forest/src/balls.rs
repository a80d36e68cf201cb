//! Prediction balls: out-of-bag balls, split-conformal baseline balls,
//! population balls for the synthetic scenarios, and membership tests.
//!
//! An out-of-bag ball is centered at the forest prediction with radius equal
//! to the `(1-alpha)` empirical quantile of the out-of-bag radial errors;
//! membership is a strict distance comparison. Split-conformal balls fit on
//! a random half-sample and rank residuals on the other half with the
//! conformal `ceil((1-alpha)(n2+1))` correction, keeping their finite-sample
//! guarantee.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestFlavor, ForestModel, Hyperparams};
use crate::metric::{
    distance, exp_map, tangent_basis, tangent_norm, InducedBallRegion, MetricPoint,
    SpaceDescriptor,
};
use crate::sampling::Scenario;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallMethod {
    Oob,
    SplitConformal,
    Population,
}

impl std::fmt::Display for BallMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            BallMethod::Oob => "oob",
            BallMethod::SplitConformal => "sc",
            BallMethod::Population => "population",
        };
        write!(f, "{tag}")
    }
}

/// A ball `{y : d(center, y) < radius}`; the inequality is strict, so a
/// zero-radius ball is empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionBall {
    pub center: MetricPoint,
    pub radius: f64,
    pub method: BallMethod,
    pub alpha: f64,
}

impl PredictionBall {
    pub fn contains(&self, y: &MetricPoint) -> Result<bool> {
        Ok(distance(&self.center, y)? < self.radius)
    }
}

/// Out-of-bag radial errors, one per observation that has at least one
/// out-of-bag tree; the others are recorded as dropped.
#[derive(Debug, Clone)]
pub struct OobErrorSet {
    /// `(observation index, error)` for retained observations.
    pub errors: Vec<(usize, f64)>,
    pub dropped: Vec<usize>,
}

impl OobErrorSet {
    pub fn values(&self) -> Vec<f64> {
        self.errors.iter().map(|(_, e)| *e).collect()
    }
}

/// Out-of-bag radial errors `d(Y_i, Yhat_(i))` of a fitted model.
pub fn compute_oob_errors(model: &ForestModel) -> Result<OobErrorSet> {
    let mut errors = Vec::with_capacity(model.n());
    let mut dropped = Vec::new();
    for i in 0..model.n() {
        match model.oob_predict(i) {
            Ok(pred) => {
                let d = distance(&model.dataset.responses[i], &pred)?;
                errors.push((i, d));
            }
            Err(Error::NoOobTrees(_)) => dropped.push(i),
            Err(e) => return Err(e),
        }
    }
    if errors.is_empty() {
        return Err(Error::AllObservationsDropped);
    }
    Ok(OobErrorSet { errors, dropped })
}

/// The `ceil((1-alpha) k)`-th order statistic of the retained errors.
pub fn empirical_quantile(errors: &OobErrorSet, alpha: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    let mut values = errors.values();
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    let rank = ((1.0 - alpha) * k as f64).ceil().max(1.0) as usize;
    Ok(values[rank.min(k) - 1])
}

/// Out-of-bag prediction ball at `x`.
pub fn oob_ball(model: &ForestModel, x: &[MetricPoint], alpha: f64) -> Result<PredictionBall> {
    let errors = compute_oob_errors(model)?;
    oob_ball_with_errors(model, &errors, x, alpha)
}

/// As [`oob_ball`] with precomputed errors, for reuse across queries and
/// significance levels.
pub fn oob_ball_with_errors(
    model: &ForestModel,
    errors: &OobErrorSet,
    x: &[MetricPoint],
    alpha: f64,
) -> Result<PredictionBall> {
    let center = model.predict(x)?;
    let radius = empirical_quantile(errors, alpha)?;
    Ok(PredictionBall {
        center,
        radius,
        method: BallMethod::Oob,
        alpha,
    })
}

/// Split-conformal state: a forest fitted on one half of the sample and the
/// residual distances ranked on the other half.
#[derive(Debug)]
pub struct SplitConformalFit {
    pub model: ForestModel,
    /// Sorted residual distances on the calibration half.
    pub residuals: Vec<f64>,
}

impl SplitConformalFit {
    /// Conformal radius: the `ceil((1-alpha)(n2+1))`-th order statistic of
    /// the `n2` calibration residuals, or infinity when the rank exceeds
    /// `n2` (the ball is then the whole space).
    pub fn radius(&self, alpha: f64) -> Result<f64> {
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
        }
        let n2 = self.residuals.len();
        let rank = ((1.0 - alpha) * (n2 as f64 + 1.0)).ceil() as usize;
        if rank > n2 {
            return Ok(f64::INFINITY);
        }
        Ok(self.residuals[rank.max(1) - 1])
    }

    pub fn ball(&self, x: &[MetricPoint], alpha: f64) -> Result<PredictionBall> {
        let center = self.model.predict(x)?;
        Ok(PredictionBall {
            center,
            radius: self.radius(alpha)?,
            method: BallMethod::SplitConformal,
            alpha,
        })
    }
}

/// Fits the split-conformal baseline: an exact half/half split drawn from
/// `rng`, a forest on the first half, residual distances on the second.
pub fn split_conformal_fit(
    dataset: &Dataset,
    flavor: ForestFlavor,
    hyper: Hyperparams,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<SplitConformalFit> {
    let n = dataset.n();
    if n < 4 {
        return Err(Error::InvalidParameter(
            "split-conformal needs at least 4 observations".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..n - 1 {
        let j = rng.random_range(k..n);
        order.swap(k, j);
    }
    let half = n / 2;
    let train_idx = &order[..half];
    let calib_idx = &order[half..];
    let train = dataset.subset(train_idx);
    let model = fit_forest(&train, flavor, hyper, seed)?;
    let mut residuals = Vec::with_capacity(calib_idx.len());
    for &i in calib_idx {
        let pred = model.predict(&dataset.predictors[i])?;
        residuals.push(distance(&dataset.responses[i], &pred)?);
    }
    residuals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SplitConformalFit { model, residuals })
}

/// One-call split-conformal ball.
pub fn split_conformal_ball(
    dataset: &Dataset,
    x: &[MetricPoint],
    alpha: f64,
    flavor: ForestFlavor,
    hyper: Hyperparams,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<PredictionBall> {
    let fit = split_conformal_fit(dataset, flavor, hyper, seed, rng)?;
    fit.ball(x, alpha)
}

/// Radius of the population ball for Gaussian errors with identity
/// covariance scaled by `sigma`: the `(1-alpha)` quantile of `sigma * chi_q`.
pub fn gaussian_identity_radius(q: usize, sigma: f64, alpha: f64) -> Result<f64> {
    let chi2 = ChiSquared::new(q as f64)
        .map_err(|e| Error::InvalidParameter(format!("chi-squared: {e}")))?;
    Ok(sigma * chi2.inverse_cdf(1.0 - alpha).sqrt())
}

/// Population ball at `x`: centered at the true regression value with the
/// `(1-alpha)` quantile of the radial error law. Closed form for the scalar
/// Gaussian scenario, Monte Carlo otherwise.
pub fn population_ball(
    scenario: &Scenario,
    x: &[MetricPoint],
    alpha: f64,
    mc_draws: usize,
    rng: &mut impl Rng,
) -> Result<PredictionBall> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    let center = scenario.regression(x)?;
    let radius = match scenario.spec() {
        crate::sampling::ScenarioSpec::EuclideanLinear { sigma } => {
            gaussian_identity_radius(1, *sigma, alpha)?
        }
        _ => {
            let mut draws = Vec::with_capacity(mc_draws);
            for _ in 0..mc_draws {
                draws.push(scenario.sample_error_radius(rng)?);
            }
            draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let rank = ((1.0 - alpha) * mc_draws as f64).ceil().max(1.0) as usize;
            draws[rank.min(mc_draws) - 1]
        }
    };
    Ok(PredictionBall {
        center,
        radius,
        method: BallMethod::Population,
        alpha,
    })
}

/// Volume (or area) of a ball where a formula or estimate is available:
/// Euclidean volume, spherical-cap area on the 2-sphere, and a Monte Carlo
/// area (with its standard error) of the pulled-back region for
/// spheroid-valued balls.
pub fn ball_volume(
    ball: &PredictionBall,
    mc_draws: usize,
    rng: &mut impl Rng,
) -> Result<(f64, Option<f64>)> {
    let r = ball.radius;
    match &ball.center.descriptor {
        SpaceDescriptor::Euclidean { dim } => {
            let q = *dim as f64;
            let unit = std::f64::consts::PI.powf(q / 2.0)
                / statrs::function::gamma::gamma(q / 2.0 + 1.0);
            Ok((unit * r.powf(q), None))
        }
        SpaceDescriptor::Sphere { ambient: 3 } => {
            let clipped = r.min(std::f64::consts::PI);
            Ok((2.0 * std::f64::consts::PI * (1.0 - clipped.cos()), None))
        }
        SpaceDescriptor::Spheroid { a, c } => {
            let region = InducedBallRegion::new(&ball.center.data, *a, *c, r, 1024)?;
            let (area, se) = region.area_mc(mc_draws, rng);
            Ok((area, Some(se)))
        }
        other => Err(Error::Unsupported(format!(
            "ball volume is not defined for `{other}`"
        ))),
    }
}

/// Points at distance exactly `radius` from the ball center, for external
/// plotting. Directions are drawn from `rng`; the quantile grid uses sorted
/// tangent draws so the boundary points remain valid quantile functions.
pub fn boundary_sample(
    ball: &PredictionBall,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<MetricPoint>> {
    let center = &ball.center;
    let r = ball.radius;
    match &center.descriptor {
        SpaceDescriptor::Spheroid { a, c } => {
            let pts = crate::metric::spheroid_boundary_points(&center.data, *a, *c, r, count)?;
            Ok(pts
                .into_iter()
                .map(|data| MetricPoint::new_unchecked(center.descriptor.clone(), data))
                .collect())
        }
        SpaceDescriptor::QuantileGrid { points } => {
            use rand_distr::{Distribution, StandardNormal};
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let mut dir: Vec<f64> =
                    (0..*points).map(|_| StandardNormal.sample(rng)).collect();
                dir.sort_by(|x, y| x.partial_cmp(y).unwrap());
                // A sorted tangent keeps the boundary point nondecreasing.
                let norm = tangent_norm(center, &dir)?;
                let tangent: Vec<f64> = dir.iter().map(|v| r * v / norm).collect();
                out.push(exp_map(center, &tangent)?);
            }
            Ok(out)
        }
        _ => {
            let basis = tangent_basis(center)?;
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let dim = basis[0].len();
                let mut tangent = vec![0.0; dim];
                loop {
                    use rand_distr::{Distribution, StandardNormal};
                    for t in tangent.iter_mut() {
                        *t = 0.0;
                    }
                    for b in &basis {
                        let coef: f64 = StandardNormal.sample(rng);
                        for (t, v) in tangent.iter_mut().zip(b) {
                            *t += coef * v;
                        }
                    }
                    let norm = tangent_norm(center, &tangent)?;
                    if norm > 1e-12 {
                        for t in tangent.iter_mut() {
                            *t *= r / norm;
                        }
                        break;
                    }
                }
                out.push(exp_map(center, &tangent)?);
            }
            Ok(out)
        }
    }
}

/// Experimental in-sample ball for a training point: the center is the
/// out-of-bag prediction of observation `i`, and the radius quantile is
/// computed from errors of the other observations predicted with the trees
/// in which both observations are out-of-bag. Observations sharing no such
/// tree are dropped.
pub fn oob_ball_in_sample(model: &ForestModel, i: usize, alpha: f64) -> Result<PredictionBall> {
    if i >= model.n() {
        return Err(Error::InvalidParameter(format!(
            "observation {i} out of range"
        )));
    }
    let center = model.oob_predict(i)?;
    let oob_i: std::collections::HashSet<usize> = model.oob_trees(i).into_iter().collect();
    let mut errors = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..model.n() {
        if j == i {
            continue;
        }
        let common: Vec<usize> = model
            .oob_trees(j)
            .into_iter()
            .filter(|b| oob_i.contains(b))
            .collect();
        if common.is_empty() {
            dropped.push(j);
            continue;
        }
        let pred = match model.flavor {
            ForestFlavor::Mrf => {
                let weights = model.forest_weights(&model.dataset.predictors[j], Some(&common))?;
                let candidates: Vec<usize> = (0..model.n()).filter(|&k| k != j).collect();
                let distances = model.response_distances().ok_or_else(|| {
                    Error::InvalidParameter("medoid forest needs distances".into())
                })?;
                let (idx, _) =
                    crate::frechet::medoid_from_distances(&weights.0, &candidates, distances)?;
                model.dataset.responses[idx].clone()
            }
            _ => model.predict_with_tree_subset(&model.dataset.predictors[j], &common)?,
        };
        errors.push((j, distance(&model.dataset.responses[j], &pred)?));
    }
    if errors.is_empty() {
        return Err(Error::AllObservationsDropped);
    }
    let set = OobErrorSet { errors, dropped };
    Ok(PredictionBall {
        center,
        radius: empirical_quantile(&set, alpha)?,
        method: BallMethod::Oob,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{RngFactory, Scenario, ScenarioSpec};

    fn linear_scenario() -> Scenario {
        Scenario::new(ScenarioSpec::EuclideanLinear { sigma: 0.8660254 }).unwrap()
    }

    fn set(values: &[f64]) -> OobErrorSet {
        OobErrorSet {
            errors: values.iter().cloned().enumerate().collect(),
            dropped: vec![],
        }
    }

    #[test]
    fn quantile_order_statistic_convention() {
        let errors = set(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        assert_eq!(empirical_quantile(&errors, 0.10).unwrap(), 9.0);
        // alpha near 1 selects the smallest error.
        assert_eq!(empirical_quantile(&errors, 0.999).unwrap(), 1.0);
    }

    #[test]
    fn quantile_of_constant_errors_is_the_constant() {
        let errors = set(&[0.7; 13]);
        for alpha in [0.01, 0.5, 0.9] {
            assert_eq!(empirical_quantile(&errors, alpha).unwrap(), 0.7);
        }
    }

    #[test]
    fn quantile_concentrates_for_uniform_errors() {
        use rand::Rng;
        let mut rng = RngFactory::new(3).stream(0);
        let values: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let q = empirical_quantile(&set(&values), 0.05).unwrap();
        assert!((q - 0.95).abs() < 0.01, "quantile {q}");
    }

    #[test]
    fn quantile_is_monotone_in_alpha() {
        use rand::Rng;
        let mut rng = RngFactory::new(5).stream(0);
        let values: Vec<f64> = (0..57).map(|_| rng.random::<f64>()).collect();
        let errors = set(&values);
        let mut last = f64::INFINITY;
        for alpha in [0.01, 0.05, 0.10, 0.25, 0.5] {
            let q = empirical_quantile(&errors, alpha).unwrap();
            assert!(q <= last);
            last = q;
        }
    }

    #[test]
    fn membership_is_strict() {
        let ball = PredictionBall {
            center: MetricPoint::scalar(0.0),
            radius: 1.0,
            method: BallMethod::Oob,
            alpha: 0.1,
        };
        assert!(ball.contains(&MetricPoint::scalar(0.999)).unwrap());
        assert!(!ball.contains(&MetricPoint::scalar(1.0)).unwrap());
        let empty = PredictionBall {
            radius: 0.0,
            ..ball.clone()
        };
        assert!(!empty.contains(&MetricPoint::scalar(0.0)).unwrap());
    }

    #[test]
    fn constant_responses_give_zero_errors_and_empty_balls() {
        let x: Vec<Vec<MetricPoint>> = (0..30).map(|i| vec![MetricPoint::scalar(i as f64)]).collect();
        let y: Vec<MetricPoint> = (0..30).map(|_| MetricPoint::scalar(2.0)).collect();
        let ds = crate::dataset::Dataset::new(
            SpaceDescriptor::Product(vec![SpaceDescriptor::Euclidean { dim: 1 }]),
            SpaceDescriptor::Euclidean { dim: 1 },
            x,
            y,
        )
        .unwrap();
        let model = fit_forest(
            &ds,
            ForestFlavor::Rfwlcfr,
            Hyperparams {
                trees: 50,
                mtry: 1,
                min_split: 2,
            },
            7,
        )
        .unwrap();
        let errors = compute_oob_errors(&model).unwrap();
        assert!(errors.values().iter().all(|e| *e == 0.0));
        let ball = oob_ball(&model, &ds.predictors[0], 0.10).unwrap();
        assert_eq!(ball.radius, 0.0);
        assert!(!ball.contains(&ds.responses[0]).unwrap());
    }

    #[test]
    fn large_forests_drop_no_observations() {
        let sc = linear_scenario();
        let ds = sc.generate(100, &mut RngFactory::new(11).stream(0)).unwrap();
        let model = fit_forest(
            &ds,
            ForestFlavor::Rfwlcfr,
            Hyperparams {
                trees: 200,
                mtry: 2,
                min_split: 5,
            },
            13,
        )
        .unwrap();
        let errors = compute_oob_errors(&model).unwrap();
        assert!(errors.dropped.is_empty());
        assert_eq!(errors.errors.len(), 100);
    }

    #[test]
    fn oob_error_distribution_tracks_held_out_errors() {
        // Kolmogorov-Smirnov distance between the OOB errors and an
        // independent test-set error sample.
        let sc = linear_scenario();
        let ds = sc.generate(500, &mut RngFactory::new(17).stream(0)).unwrap();
        let model = fit_forest(
            &ds,
            ForestFlavor::Rfwlcfr,
            Hyperparams {
                trees: 200,
                mtry: 2,
                min_split: 5,
            },
            19,
        )
        .unwrap();
        let oob: Vec<f64> = compute_oob_errors(&model).unwrap().values();
        let mut rng = RngFactory::new(18).stream(1);
        let mut test_errors = Vec::with_capacity(800);
        for _ in 0..800 {
            let x = sc.sample_predictor(&mut rng);
            let y = sc.sample_response(&x, &mut rng).unwrap();
            let pred = model.predict(&x).unwrap();
            test_errors.push(distance(&y, &pred).unwrap());
        }
        // Direct KS statistic.
        let mut a = oob.clone();
        let mut b = test_errors.clone();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            let t = a[i].min(b[j]);
            while i < a.len() && a[i] <= t {
                i += 1;
            }
            while j < b.len() && b[j] <= t {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        assert!(d < 0.1, "KS distance {d}");
    }

    #[test]
    fn conformal_rank_convention_and_infinite_radius() {
        let fit = SplitConformalFit {
            model: {
                let sc = linear_scenario();
                let ds = sc.generate(10, &mut RngFactory::new(1).stream(0)).unwrap();
                fit_forest(
                    &ds,
                    ForestFlavor::Rfwlcfr,
                    Hyperparams {
                        trees: 5,
                        mtry: 1,
                        min_split: 1,
                    },
                    1,
                )
                .unwrap()
            },
            residuals: (1..=9).map(|v| v as f64).collect(),
        };
        // n2 = 9, alpha = 0.10: rank ceil(0.9 * 10) = 9 -> the 9th residual.
        assert_eq!(fit.radius(0.10).unwrap(), 9.0);
        // rank exceeding n2 means the whole space.
        assert!(fit.radius(0.01).unwrap().is_infinite());
    }

    #[test]
    fn conformal_radius_zero_on_constant_data() {
        let x: Vec<Vec<MetricPoint>> = (0..40).map(|i| vec![MetricPoint::scalar(i as f64)]).collect();
        let y: Vec<MetricPoint> = (0..40).map(|_| MetricPoint::scalar(1.5)).collect();
        let ds = crate::dataset::Dataset::new(
            SpaceDescriptor::Product(vec![SpaceDescriptor::Euclidean { dim: 1 }]),
            SpaceDescriptor::Euclidean { dim: 1 },
            x,
            y,
        )
        .unwrap();
        let mut rng = RngFactory::new(2).stream(0);
        let fit = split_conformal_fit(
            &ds,
            ForestFlavor::Rfwlcfr,
            Hyperparams {
                trees: 20,
                mtry: 1,
                min_split: 2,
            },
            3,
            &mut rng,
        )
        .unwrap();
        assert_eq!(fit.radius(0.10).unwrap(), 0.0);
    }

    #[test]
    fn population_radii_match_closed_forms() {
        let mut rng = RngFactory::new(5).stream(0);
        let sc = Scenario::new(ScenarioSpec::EuclideanLinear { sigma: 1.0 }).unwrap();
        let x = sc.conditional_predictor().unwrap();
        let ball = population_ball(&sc, &x, 0.10, 0, &mut rng).unwrap();
        // |N(0,1)| quantile at 0.90.
        assert!((ball.radius - 1.6449).abs() < 1e-3, "radius {}", ball.radius);
        // chi_2 quantile: sqrt(-2 ln alpha); the library quantile is an
        // iterative inversion, hence the loose tolerance.
        let chi2 = gaussian_identity_radius(2, 1.0, 0.05).unwrap();
        assert!(
            (chi2 - (-2.0f64 * 0.05f64.ln()).sqrt()).abs() < 1e-6,
            "chi2 radius {chi2}"
        );
    }

    #[test]
    fn population_radius_shrinks_with_concentration() {
        let mut rng = RngFactory::new(7).stream(0);
        let mut radii = Vec::new();
        for kappa in [50.0, 200.0] {
            let sc = Scenario::new(ScenarioSpec::SphereGreatCircle { kappa }).unwrap();
            let x = sc.conditional_predictor().unwrap();
            let ball = population_ball(&sc, &x, 0.10, 20_000, &mut rng).unwrap();
            radii.push(ball.radius);
        }
        assert!(radii[1] < radii[0]);
    }

    #[test]
    fn volumes_of_reference_balls() {
        let mut rng = RngFactory::new(9).stream(0);
        let euclid = PredictionBall {
            center: MetricPoint::scalar(0.0),
            radius: 2.0,
            method: BallMethod::Oob,
            alpha: 0.1,
        };
        assert!((ball_volume(&euclid, 0, &mut rng).unwrap().0 - 4.0).abs() < 1e-12);
        let sphere_ball = |r: f64| PredictionBall {
            center: MetricPoint::new_unchecked(
                SpaceDescriptor::Sphere { ambient: 3 },
                vec![0.0, 0.0, 1.0],
            ),
            radius: r,
            method: BallMethod::Oob,
            alpha: 0.1,
        };
        let full = ball_volume(&sphere_ball(std::f64::consts::PI), 0, &mut rng).unwrap().0;
        assert!((full - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        let hemi = ball_volume(&sphere_ball(std::f64::consts::FRAC_PI_2), 0, &mut rng)
            .unwrap()
            .0;
        assert!((hemi - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn boundary_samples_sit_at_the_radius() {
        let mut rng = RngFactory::new(11).stream(0);
        for desc in [
            SpaceDescriptor::Euclidean { dim: 3 },
            SpaceDescriptor::Sphere { ambient: 3 },
            SpaceDescriptor::Hyperboloid { ambient: 3 },
            SpaceDescriptor::Spd {
                size: 2,
                metric: crate::metric::SpdMetric::AffineInvariant,
            },
            SpaceDescriptor::QuantileGrid { points: 12 },
        ] {
            let center = crate::sampling::random_point(&desc, &mut rng).unwrap();
            let ball = PredictionBall {
                center,
                radius: 0.4,
                method: BallMethod::Oob,
                alpha: 0.1,
            };
            for point in boundary_sample(&ball, 12, &mut rng).unwrap() {
                let d = distance(&ball.center, &point).unwrap();
                assert!((d - 0.4).abs() < 1e-8, "{desc}: boundary at {d}");
            }
        }
    }

    #[test]
    fn radius_monotonicity_on_fitted_balls() {
        let sc = linear_scenario();
        let ds = sc.generate(80, &mut RngFactory::new(21).stream(0)).unwrap();
        let model = fit_forest(
            &ds,
            ForestFlavor::Rfwlcfr,
            Hyperparams {
                trees: 100,
                mtry: 2,
                min_split: 5,
            },
            23,
        )
        .unwrap();
        let errors = compute_oob_errors(&model).unwrap();
        let x = &ds.predictors[0];
        let r01 = oob_ball_with_errors(&model, &errors, x, 0.01).unwrap().radius;
        let r05 = oob_ball_with_errors(&model, &errors, x, 0.05).unwrap().radius;
        let r10 = oob_ball_with_errors(&model, &errors, x, 0.10).unwrap().radius;
        assert!(r01 >= r05 && r05 >= r10);
        // Ball center belongs whenever the radius is positive.
        let ball = oob_ball_with_errors(&model, &errors, x, 0.10).unwrap();
        assert!(ball.radius > 0.0);
        assert!(ball.contains(&ball.center).unwrap());
    }

    #[test]
    fn in_sample_ball_reports_center_and_radius() {
        let sc = linear_scenario();
        let ds = sc.generate(60, &mut RngFactory::new(31).stream(0)).unwrap();
        let model = fit_forest(
            &ds,
            ForestFlavor::Rfwlcfr,
            Hyperparams {
                trees: 150,
                mtry: 2,
                min_split: 5,
            },
            33,
        )
        .unwrap();
        let ball = oob_ball_in_sample(&model, 4, 0.10).unwrap();
        let expected_center = model.oob_predict(4).unwrap();
        assert_eq!(ball.center.data, expected_center.data);
        assert!(ball.radius > 0.0);
    }
}
