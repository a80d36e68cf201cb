//! Synthetic regression scenarios with known conditional Fréchet means.
//!
//! Each scenario couples a predictor law, a regression function `m`, and a
//! response law whose conditional Fréchet mean is `m(x)` (for the SPD
//! scenario this holds under the affine-invariant distance). The radial
//! error `d(Y, m(X))` is independent of the predictor by construction, which
//! is what the coverage theory requires of the data-generating process.

use super::special::integrate;
use super::{sample_hvmf, sample_vmf_raw, sample_wishart_raw};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::{distance, MetricPoint, SpaceDescriptor, SpdMetric};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;
use statrs::function::gamma::digamma;
use std::fmt;

const SQRT5_2: f64 = 4.47213595499957939282; // 2 * sqrt(5)

/// Names one of the supported data-generating processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    /// `Y = X1 - X2 + X3 + eps`, `X_i = 2 sqrt(5) (W_i - 1/2)`,
    /// `W_i ~ Beta(2,2)`, `eps ~ N(0, sigma^2)`.
    EuclideanLinear { sigma: f64 },
    /// `Y = X B + eps` in `R^q` with `beta_jk = sqrt(j) sin(k pi / (q+1))`
    /// and AR(1) error covariance with correlation 0.75.
    EuclideanMultivariate { q: usize },
    /// Great-circle regression on the unit sphere with vMF errors.
    SphereGreatCircle { kappa: f64 },
    /// Meridian regression on the unit hyperboloid with HvMF errors.
    HyperboloidMeridian { kappa: f64 },
    /// Wishart responses around an interpolation of three covariance shapes.
    SpdWishartInterp { dof: f64, metric: SpdMetric },
    /// Location-scale family of quantile functions on an equispaced grid.
    QuantileGridModel { points: usize },
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioSpec::EuclideanLinear { sigma } => write!(f, "euclidean_linear(sigma={sigma})"),
            ScenarioSpec::EuclideanMultivariate { q } => write!(f, "euclidean_multivariate(q={q})"),
            ScenarioSpec::SphereGreatCircle { kappa } => write!(f, "sphere_great_circle(kappa={kappa})"),
            ScenarioSpec::HyperboloidMeridian { kappa } => {
                write!(f, "hyperboloid_meridian(kappa={kappa})")
            }
            ScenarioSpec::SpdWishartInterp { dof, metric } => {
                write!(f, "spd_wishart_interp(d={dof},metric={metric})")
            }
            ScenarioSpec::QuantileGridModel { points } => write!(f, "quantile_grid(m={points})"),
        }
    }
}

/// A ready-to-sample scenario: predictor law, regression function, response
/// law, and the fixed predictor used for conditional coverage studies.
#[derive(Debug, Clone)]
pub struct Scenario {
    spec: ScenarioSpec,
    predictor_space: SpaceDescriptor,
    response_space: SpaceDescriptor,
    error_chol: Option<nalgebra::DMatrix<f64>>,
    wishart_c: f64,
}

/// Direction of the great circle / meridian used by the sphere and
/// hyperboloid scenarios.
const MU: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

const SIGMA_1: [f64; 4] = [1.0, -0.6, -0.6, 0.5];
const SIGMA_2: [f64; 4] = [1.0, 0.0, 0.0, 1.0];
const SIGMA_3: [f64; 4] = [0.5, 0.4, 0.4, 1.0];

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        let scalar = SpaceDescriptor::Euclidean { dim: 1 };
        let (predictor_space, response_space) = match &spec {
            ScenarioSpec::EuclideanLinear { sigma } => {
                if *sigma < 0.0 {
                    return Err(Error::InvalidParameter("sigma must be >= 0".into()));
                }
                (
                    SpaceDescriptor::Product(vec![scalar.clone(), scalar.clone(), scalar.clone()]),
                    SpaceDescriptor::Euclidean { dim: 1 },
                )
            }
            ScenarioSpec::EuclideanMultivariate { q } => {
                if *q < 1 {
                    return Err(Error::InvalidParameter("q must be >= 1".into()));
                }
                (
                    SpaceDescriptor::Product(vec![scalar.clone(), scalar.clone(), scalar.clone()]),
                    SpaceDescriptor::Euclidean { dim: *q },
                )
            }
            ScenarioSpec::SphereGreatCircle { kappa } => {
                if *kappa < 0.0 {
                    return Err(Error::InvalidParameter("kappa must be >= 0".into()));
                }
                (
                    SpaceDescriptor::Product(vec![scalar.clone()]),
                    SpaceDescriptor::Sphere { ambient: 3 },
                )
            }
            ScenarioSpec::HyperboloidMeridian { kappa } => {
                if *kappa <= 0.0 {
                    return Err(Error::InvalidParameter("kappa must be > 0".into()));
                }
                (
                    SpaceDescriptor::Product(vec![scalar.clone()]),
                    SpaceDescriptor::Hyperboloid { ambient: 3 },
                )
            }
            ScenarioSpec::SpdWishartInterp { dof, metric } => {
                if *dof < 2.0 {
                    return Err(Error::InvalidParameter(
                        "Wishart degrees of freedom must be >= 2".into(),
                    ));
                }
                (
                    SpaceDescriptor::Product(vec![scalar.clone()]),
                    SpaceDescriptor::Spd {
                        size: 2,
                        metric: *metric,
                    },
                )
            }
            ScenarioSpec::QuantileGridModel { points } => {
                if *points < 2 {
                    return Err(Error::InvalidParameter("grid needs >= 2 points".into()));
                }
                (
                    SpaceDescriptor::Product(vec![scalar.clone()]),
                    SpaceDescriptor::QuantileGrid { points: *points },
                )
            }
        };
        let error_chol = match &spec {
            ScenarioSpec::EuclideanMultivariate { q } => {
                let sigma = nalgebra::DMatrix::from_fn(*q, *q, |i, j| {
                    0.75f64.powi((i as i32 - j as i32).abs())
                });
                Some(
                    nalgebra::Cholesky::new(sigma)
                        .ok_or(Error::NotPositiveDefinite)?
                        .l(),
                )
            }
            _ => None,
        };
        let wishart_c = match &spec {
            ScenarioSpec::SpdWishartInterp { dof, .. } => {
                2.0 * ((digamma(dof / 2.0) + digamma((dof - 1.0) / 2.0)) / 2.0).exp()
            }
            _ => 1.0,
        };
        Ok(Scenario {
            spec,
            predictor_space,
            response_space,
            error_chol,
            wishart_c,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn predictor_space(&self) -> &SpaceDescriptor {
        &self.predictor_space
    }

    pub fn response_space(&self) -> &SpaceDescriptor {
        &self.response_space
    }

    /// Fréchet mean of a Wishart under the affine-invariant distance divided
    /// by its scale matrix (`c_{d,q}` with `q = 2`).
    pub fn wishart_mean_constant(&self) -> f64 {
        self.wishart_c
    }

    pub fn sample_predictor(&self, rng: &mut impl Rng) -> Vec<MetricPoint> {
        let beta = Beta::new(2.0, 2.0).expect("valid beta");
        let transform = |w: f64| SQRT5_2 * (w - 0.5);
        match &self.spec {
            ScenarioSpec::EuclideanLinear { .. } | ScenarioSpec::EuclideanMultivariate { .. } => {
                (0..3)
                    .map(|_| MetricPoint::scalar(transform(beta.sample(rng))))
                    .collect()
            }
            ScenarioSpec::SphereGreatCircle { .. } => {
                let x = sample_vmf_raw(&[1.0, 0.0], 1.0, rng).expect("circle vMF");
                vec![MetricPoint::scalar(x[1].atan2(x[0]))]
            }
            ScenarioSpec::HyperboloidMeridian { .. } => {
                let theta: f64 = 0.5 * rng.sample::<f64, _>(StandardNormal);
                vec![MetricPoint::scalar(theta)]
            }
            ScenarioSpec::SpdWishartInterp { .. } => {
                vec![MetricPoint::scalar(transform(beta.sample(rng)))]
            }
            ScenarioSpec::QuantileGridModel { .. } => {
                vec![MetricPoint::scalar(rng.random_range(-1.0..1.0))]
            }
        }
    }

    /// The regression function `m(x)`: the conditional Fréchet mean of the
    /// response (under the scenario's own distance, affine-invariant in the
    /// SPD case).
    pub fn regression(&self, x: &[MetricPoint]) -> Result<MetricPoint> {
        match &self.spec {
            ScenarioSpec::EuclideanLinear { .. } => {
                let v = x[0].data[0] - x[1].data[0] + x[2].data[0];
                Ok(MetricPoint::scalar(v))
            }
            ScenarioSpec::EuclideanMultivariate { q } => {
                let mut out = vec![0.0; *q];
                for (j, xj) in x.iter().enumerate().take(3) {
                    let sj = ((j + 1) as f64).sqrt();
                    for (k, o) in out.iter_mut().enumerate() {
                        *o += xj.data[0]
                            * sj
                            * ((k + 1) as f64 * std::f64::consts::PI / (*q as f64 + 1.0)).sin();
                    }
                }
                Ok(MetricPoint::euclidean(out))
            }
            ScenarioSpec::SphereGreatCircle { .. } => {
                let theta = x[0].data[0];
                Ok(MetricPoint::new_unchecked(
                    self.response_space.clone(),
                    vec![theta.cos(), theta.sin() * MU[0], theta.sin() * MU[1]],
                ))
            }
            ScenarioSpec::HyperboloidMeridian { .. } => {
                let theta = x[0].data[0];
                Ok(MetricPoint::new_unchecked(
                    self.response_space.clone(),
                    vec![theta.cosh(), theta.sinh() * MU[0], theta.sinh() * MU[1]],
                ))
            }
            ScenarioSpec::SpdWishartInterp { .. } => Ok(MetricPoint::new_unchecked(
                self.response_space.clone(),
                interpolated_scale(x[0].data[0]).to_vec(),
            )),
            ScenarioSpec::QuantileGridModel { points } => {
                let xv = x[0].data[0];
                Ok(MetricPoint::new_unchecked(
                    self.response_space.clone(),
                    quantile_curve(*points, 0.0 + xv, 1.0 + xv * xv),
                ))
            }
        }
    }

    pub fn sample_response(&self, x: &[MetricPoint], rng: &mut impl Rng) -> Result<MetricPoint> {
        match &self.spec {
            ScenarioSpec::EuclideanLinear { sigma } => {
                let mean = self.regression(x)?;
                let eps: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                Ok(MetricPoint::scalar(mean.data[0] + eps))
            }
            ScenarioSpec::EuclideanMultivariate { q } => {
                let mean = self.regression(x)?;
                let z = nalgebra::DVector::from_fn(*q, |_, _| {
                    rng.sample::<f64, _>(StandardNormal)
                });
                let eps = self.error_chol.as_ref().expect("chol prepared") * z;
                Ok(MetricPoint::euclidean(
                    mean.data.iter().zip(eps.iter()).map(|(m, e)| m + e).collect(),
                ))
            }
            ScenarioSpec::SphereGreatCircle { kappa } => {
                let mean = self.regression(x)?;
                Ok(MetricPoint::new_unchecked(
                    self.response_space.clone(),
                    sample_vmf_raw(&mean.data, *kappa, rng)?,
                ))
            }
            ScenarioSpec::HyperboloidMeridian { kappa } => {
                let mean = self.regression(x)?;
                sample_hvmf(&mean, *kappa, rng)
            }
            ScenarioSpec::SpdWishartInterp { dof, .. } => {
                let mean = self.regression(x)?;
                let scale: Vec<f64> = mean.data.iter().map(|v| v / self.wishart_c).collect();
                Ok(MetricPoint::new_unchecked(
                    self.response_space.clone(),
                    sample_wishart_raw(*dof, &scale, 2, rng)?,
                ))
            }
            ScenarioSpec::QuantileGridModel { points } => {
                let xv = x[0].data[0];
                let gamma: f64 = rng.sample::<f64, _>(StandardNormal) * 0.1;
                let sigma_rand: f64 = Gamma::new(100.0, 0.01).expect("gamma").sample(rng);
                Ok(MetricPoint::new_unchecked(
                    self.response_space.clone(),
                    quantile_curve(*points, gamma + xv, sigma_rand + xv * xv),
                ))
            }
        }
    }

    /// Generates an iid sample of size `n`.
    pub fn generate(&self, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
        if n < 1 {
            return Err(Error::InvalidParameter("sample size must be >= 1".into()));
        }
        let mut predictors = Vec::with_capacity(n);
        let mut responses = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.sample_predictor(rng);
            let y = self.sample_response(&x, rng)?;
            predictors.push(x);
            responses.push(y);
        }
        Dataset::new(
            self.predictor_space.clone(),
            self.response_space.clone(),
            predictors,
            responses,
        )
    }

    /// The fixed predictor used for conditional (Type III/IV) studies: each
    /// scalar coordinate at the 0.25-quantile of its law.
    pub fn conditional_predictor(&self) -> Result<Vec<MetricPoint>> {
        match &self.spec {
            ScenarioSpec::EuclideanLinear { .. } | ScenarioSpec::EuclideanMultivariate { .. } => {
                let q25 = beta22_quantile(0.25);
                let x = SQRT5_2 * (q25 - 0.5);
                Ok(vec![
                    MetricPoint::scalar(x),
                    MetricPoint::scalar(x),
                    MetricPoint::scalar(x),
                ])
            }
            ScenarioSpec::SphereGreatCircle { .. } => {
                Ok(vec![MetricPoint::scalar(von_mises_quantile(1.0, 0.25))])
            }
            ScenarioSpec::HyperboloidMeridian { .. } => {
                let phi_inv = statrs::distribution::Normal::new(0.0, 1.0)
                    .expect("standard normal")
                    .inverse_cdf(0.25);
                Ok(vec![MetricPoint::scalar(0.25 * phi_inv)])
            }
            ScenarioSpec::SpdWishartInterp { .. } => {
                let q25 = beta22_quantile(0.25);
                Ok(vec![MetricPoint::scalar(SQRT5_2 * (q25 - 0.5))])
            }
            ScenarioSpec::QuantileGridModel { .. } => Ok(vec![MetricPoint::scalar(-0.5)]),
        }
    }

    /// One draw of the radial error `R = d(Y, m(X))`, taken at the
    /// conditional predictor (the error law does not depend on it).
    pub fn sample_error_radius(&self, rng: &mut impl Rng) -> Result<f64> {
        let x = self.conditional_predictor()?;
        let m = self.regression(&x)?;
        let y = self.sample_response(&x, rng)?;
        distance(&y, &m)
    }
}

/// `M_0(x)`: trigonometric interpolation between three covariance shapes,
/// with the branch chosen by the parity of `floor(x + 1/2)`.
fn interpolated_scale(x: f64) -> [f64; 4] {
    let k = (x + 0.5).floor() as i64;
    let even = k.rem_euclid(2) == 0;
    let (c2, s2) = {
        let c = (std::f64::consts::PI * x).cos();
        let s = (std::f64::consts::PI * x).sin();
        (c * c, s * s)
    };
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = if even {
            c2 * SIGMA_1[i] + s2 * SIGMA_2[i]
        } else {
            s2 * SIGMA_2[i] + c2 * SIGMA_3[i]
        };
    }
    out
}

/// Quantile curve `gamma + sigma * Phi^{-1}(u_i)` on the equispaced grid.
fn quantile_curve(points: usize, gamma: f64, sigma: f64) -> Vec<f64> {
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("standard normal");
    (0..points)
        .map(|i| {
            let u = (i as f64 + 0.5) / points as f64;
            gamma + sigma * normal.inverse_cdf(u)
        })
        .collect()
}

fn beta22_quantile(p: f64) -> f64 {
    statrs::distribution::Beta::new(2.0, 2.0)
        .expect("valid beta")
        .inverse_cdf(p)
}

/// Quantile of the von Mises distribution with location 0 on `(-pi, pi]`,
/// by quadrature of the density and bisection.
fn von_mises_quantile(kappa: f64, p: f64) -> f64 {
    let dens = move |t: f64| (kappa * t.cos()).exp();
    let total = integrate(&dens, -std::f64::consts::PI, std::f64::consts::PI, 1e-12);
    let cdf = |theta: f64| integrate(&dens, -std::f64::consts::PI, theta, 1e-12) / total;
    let (mut lo, mut hi) = (-std::f64::consts::PI, std::f64::consts::PI);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngFactory;

    #[test]
    fn linear_regression_through_origin() {
        let sc = Scenario::new(ScenarioSpec::EuclideanLinear { sigma: 1.0 }).unwrap();
        let x = vec![
            MetricPoint::scalar(0.0),
            MetricPoint::scalar(0.0),
            MetricPoint::scalar(0.0),
        ];
        assert_eq!(sc.regression(&x).unwrap().data[0], 0.0);
    }

    #[test]
    fn great_circle_at_zero_is_first_axis() {
        let sc = Scenario::new(ScenarioSpec::SphereGreatCircle { kappa: 50.0 }).unwrap();
        let m = sc.regression(&[MetricPoint::scalar(0.0)]).unwrap();
        assert!((m.data[0] - 1.0).abs() < 1e-15);
        assert!(m.data[1].abs() < 1e-15 && m.data[2].abs() < 1e-15);
    }

    #[test]
    fn spd_scale_at_zero_is_first_shape() {
        let sc = Scenario::new(ScenarioSpec::SpdWishartInterp {
            dof: 15.0,
            metric: SpdMetric::AffineInvariant,
        })
        .unwrap();
        let m = sc.regression(&[MetricPoint::scalar(0.0)]).unwrap();
        assert_eq!(m.data, SIGMA_1.to_vec());
    }

    #[test]
    fn reproducible_generation() {
        let sc = Scenario::new(ScenarioSpec::EuclideanLinear { sigma: 0.5 }).unwrap();
        let factory = RngFactory::new(99);
        let d1 = sc.generate(20, &mut factory.stream(1)).unwrap();
        let d2 = sc.generate(20, &mut factory.stream(1)).unwrap();
        assert_eq!(d1.responses, d2.responses);
        for (a, b) in d1.predictors.iter().zip(&d2.predictors) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn beta_predictor_moments() {
        // Var(2 sqrt(5) (W - 1/2)) = 20 Var(Beta(2,2)) = 1.
        let sc = Scenario::new(ScenarioSpec::EuclideanLinear { sigma: 0.5 }).unwrap();
        let mut rng = RngFactory::new(3).stream(0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = sc.sample_predictor(&mut rng)[0].data[0];
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let se = (1.0 / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se + 1e-3);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn radial_error_independent_of_predictor_strata() {
        // Two-sample Kolmogorov-Smirnov on R = d(Y, m(X)) across disjoint
        // predictor strata.
        for spec in [
            ScenarioSpec::SphereGreatCircle { kappa: 50.0 },
            ScenarioSpec::HyperboloidMeridian { kappa: 50.0 },
            ScenarioSpec::SpdWishartInterp {
                dof: 15.0,
                metric: SpdMetric::AffineInvariant,
            },
        ] {
            let sc = Scenario::new(spec.clone()).unwrap();
            let mut rng = RngFactory::new(11).stream(2);
            let mut low = Vec::new();
            let mut high = Vec::new();
            while low.len() < 400 || high.len() < 400 {
                let x = sc.sample_predictor(&mut rng);
                let m = sc.regression(&x).unwrap();
                let y = sc.sample_response(&x, &mut rng).unwrap();
                let r = distance(&y, &m).unwrap();
                if x[0].data[0] < 0.0 {
                    if low.len() < 400 {
                        low.push(r);
                    }
                } else if high.len() < 400 {
                    high.push(r);
                }
            }
            let p = crate::harness::stats::ks_two_sample_pvalue(&low, &high);
            assert!(p > 0.01, "stratified error distributions differ for {spec}: p={p}");
        }
    }

    #[test]
    fn von_mises_quantile_is_symmetric_and_ordered() {
        let q25 = von_mises_quantile(1.0, 0.25);
        let q75 = von_mises_quantile(1.0, 0.75);
        assert!(q25 < 0.0 && q75 > 0.0);
        assert!((q25 + q75).abs() < 1e-9);
    }
}
