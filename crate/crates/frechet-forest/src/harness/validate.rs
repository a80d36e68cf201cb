//! Validation harnesses: the normalized Fréchet loss curves that locate the
//! closed-form Wishart means, and the metric-axiom suite over every
//! supported space.

use super::stats;
use crate::error::{Error, Result};
use crate::frechet::PairwiseDistances;
use crate::metric::{
    distance, induced_sphere_distance, log_cholesky_embed, MetricPoint, SpaceDescriptor,
    SpdMetric,
};
use crate::sampling::{random_point, sample_wishart_raw, RngFactory};
use rayon::prelude::*;
use statrs::function::gamma::{digamma, gamma};

/// Normalized loss curves along the interpolation path through the
/// extrinsic, affine-invariant, and log-Cholesky means.
#[derive(Debug, Clone)]
pub struct LossCurves {
    pub t_grid: Vec<f64>,
    pub loss_ai: Vec<f64>,
    pub loss_lc: Vec<f64>,
    /// Grid positions of t = 0 and t = 1 (where the AI and LC closed forms
    /// sit on the path).
    pub ai_target_index: usize,
    pub lc_target_index: usize,
    pub ai_argmin_index: usize,
    pub lc_argmin_index: usize,
}

impl LossCurves {
    pub fn ai_within_one_step(&self) -> bool {
        self.ai_argmin_index.abs_diff(self.ai_target_index) <= 1
    }

    pub fn lc_within_one_step(&self) -> bool {
        self.lc_argmin_index.abs_diff(self.lc_target_index) <= 1
    }
}

/// Fréchet mean constant of a Wishart under the affine-invariant distance:
/// `c_{d,q} = 2 exp{ (1/q) sum_i psi((d-i+1)/2) }`.
pub fn wishart_ai_constant(dof: f64, q: usize) -> f64 {
    let sum: f64 = (1..=q).map(|i| digamma((dof - i as f64 + 1.0) / 2.0)).sum();
    2.0 * (sum / q as f64).exp()
}

/// Log-Cholesky Fréchet mean of a Wishart: `T T^T` with
/// `T_ii = L_ii sqrt(2) exp(psi((d-i+1)/2)/2)` and
/// `T_ij = L_ij sqrt(2) Gamma((d-j+2)/2) / Gamma((d-j+1)/2)`.
pub fn wishart_lc_mean(dof: f64, sigma: &[f64], q: usize) -> Result<Vec<f64>> {
    let sig = nalgebra::DMatrix::from_row_slice(q, q, sigma);
    let l = nalgebra::Cholesky::new(sig)
        .ok_or(Error::NotPositiveDefinite)?
        .l();
    let mut t = nalgebra::DMatrix::zeros(q, q);
    let sqrt2 = std::f64::consts::SQRT_2;
    for i in 0..q {
        let di = dof - i as f64;
        t[(i, i)] = l[(i, i)] * sqrt2 * (0.5 * digamma(di / 2.0)).exp();
        for j in 0..i {
            let dj = dof - j as f64;
            t[(i, j)] = l[(i, j)] * sqrt2 * gamma((dj + 1.0) / 2.0) / gamma(dj / 2.0);
        }
    }
    let s = &t * t.transpose();
    let mut out = Vec::with_capacity(q * q);
    for i in 0..q {
        for j in 0..q {
            out.push(s[(i, j)]);
        }
    }
    Ok(out)
}

/// Estimates the normalized Fréchet loss along the 3-segment interpolation
/// path between the extrinsic, affine-invariant, and log-Cholesky means of
/// `Wishart_q(dof, sigma)`, from `draws` Monte Carlo samples shared across
/// the grid.
pub fn wishart_mean_validation(
    dof: f64,
    sigma: &[f64],
    q: usize,
    draws: usize,
    grid_size: usize,
    seed: u64,
) -> Result<LossCurves> {
    if grid_size < 10 {
        return Err(Error::InvalidParameter("grid too small".into()));
    }
    let factory = RngFactory::new(seed);
    let mut rng = factory.stream(0);
    let samples: Vec<Vec<f64>> = (0..draws)
        .map(|_| sample_wishart_raw(dof, sigma, q, &mut rng))
        .collect::<Result<_>>()?;

    let m_ext: Vec<f64> = sigma.iter().map(|v| v * dof).collect();
    let c = wishart_ai_constant(dof, q);
    let m_ai: Vec<f64> = sigma.iter().map(|v| v * c).collect();
    let m_lc = wishart_lc_mean(dof, sigma, q)?;

    let path = |t: f64| -> Vec<f64> {
        let blend = |a: &[f64], b: &[f64], wa: f64, wb: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
        };
        if t <= 0.0 {
            blend(&m_ai, &m_ext, 1.0 + t, -t)
        } else if t <= 1.0 {
            blend(&m_ai, &m_lc, 1.0 - t, t)
        } else {
            blend(&m_lc, &m_ext, 2.0 - t, t - 1.0)
        }
    };

    let mean_sq = |center: &[f64], metric: SpdMetric| -> f64 {
        let desc = SpaceDescriptor::Spd { size: q, metric };
        let c_point = MetricPoint::new_unchecked(desc.clone(), center.to_vec());
        let mut total = 0.0;
        for s in &samples {
            let p = MetricPoint::new_unchecked(desc.clone(), s.clone());
            match distance(&c_point, &p) {
                Ok(d) => total += d * d,
                Err(_) => return f64::INFINITY,
            }
        }
        total / samples.len() as f64
    };

    let base_ai = mean_sq(&m_ai, SpdMetric::AffineInvariant);
    let base_lc = mean_sq(&m_lc, SpdMetric::LogCholesky);

    let t_grid: Vec<f64> = (0..grid_size)
        .map(|k| -1.0 + 3.0 * k as f64 / (grid_size as f64 - 1.0))
        .collect();
    let losses: Vec<(f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let m = path(t);
            let ai = (mean_sq(&m, SpdMetric::AffineInvariant) - base_ai) / base_ai;
            let lc = (mean_sq(&m, SpdMetric::LogCholesky) - base_lc) / base_lc;
            (ai, lc)
        })
        .collect();
    let loss_ai: Vec<f64> = losses.iter().map(|(a, _)| *a).collect();
    let loss_lc: Vec<f64> = losses.iter().map(|(_, l)| *l).collect();

    let argmin = |v: &[f64]| {
        v.iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let nearest = |target: f64| {
        t_grid
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - target)
                    .abs()
                    .partial_cmp(&(b.1 - target).abs())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    Ok(LossCurves {
        ai_target_index: nearest(0.0),
        lc_target_index: nearest(1.0),
        ai_argmin_index: argmin(&loss_ai),
        lc_argmin_index: argmin(&loss_lc),
        t_grid,
        loss_ai,
        loss_lc,
    })
}

/// One metric-axiom check outcome.
#[derive(Debug, Clone)]
pub struct GeometryCheck {
    pub space: String,
    pub check: String,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GeometryCheck {
    fn new(space: &str, check: &str, worst: f64, tolerance: f64) -> Self {
        GeometryCheck {
            space: space.into(),
            check: check.into(),
            worst,
            tolerance,
            pass: worst <= tolerance,
        }
    }
}

/// The spaces exercised by the release-gate geometry suite.
pub fn standard_geometry_spaces() -> Vec<SpaceDescriptor> {
    vec![
        SpaceDescriptor::Euclidean { dim: 1 },
        SpaceDescriptor::Euclidean { dim: 5 },
        SpaceDescriptor::Sphere { ambient: 3 },
        SpaceDescriptor::Hyperboloid { ambient: 3 },
        SpaceDescriptor::Spd {
            size: 2,
            metric: SpdMetric::AffineInvariant,
        },
        SpaceDescriptor::Spd {
            size: 2,
            metric: SpdMetric::LogCholesky,
        },
        SpaceDescriptor::Spd {
            size: 2,
            metric: SpdMetric::LogEuclidean,
        },
        SpaceDescriptor::QuantileGrid { points: 100 },
    ]
}

/// Symmetry, identity, and triangle-inequality checks over random triples,
/// for each standard space and for the spheroid-induced sphere distances
/// with `a` in `{0.5, 1}`; plus the log-Cholesky isometry check and the
/// spheroid/sphere agreement check.
pub fn geometry_suite(triples: usize, seed: u64) -> Result<Vec<GeometryCheck>> {
    let factory = RngFactory::new(seed);
    let mut checks = Vec::new();
    for (si, desc) in standard_geometry_spaces().into_iter().enumerate() {
        let label = desc.to_string();
        let worst = (0..triples)
            .into_par_iter()
            .map(|k| {
                let mut rng = factory.stream((si as u64) << 32 | k as u64);
                let a = random_point(&desc, &mut rng)?;
                let b = random_point(&desc, &mut rng)?;
                let c = random_point(&desc, &mut rng)?;
                let dab = distance(&a, &b)?;
                let dba = distance(&b, &a)?;
                let dac = distance(&a, &c)?;
                let dcb = distance(&c, &b)?;
                let daa = distance(&a, &a)?;
                Ok::<(f64, f64, f64), crate::error::Error>((
                    (dab - dba).abs(),
                    daa,
                    dab - dac - dcb,
                ))
            })
            .try_reduce(
                || (0.0f64, 0.0f64, f64::MIN),
                |x, y| Ok((x.0.max(y.0), x.1.max(y.1), x.2.max(y.2))),
            )?;
        checks.push(GeometryCheck::new(&label, "symmetry", worst.0, 1e-12));
        checks.push(GeometryCheck::new(&label, "identity", worst.1, 1e-9));
        checks.push(GeometryCheck::new(&label, "triangle", worst.2.max(0.0), 1e-9));
    }
    // Spheroid-induced distances on the sphere.
    for (pi, a_axis) in [0.5f64, 1.0].into_iter().enumerate() {
        let label = format!("sphere:3 via spheroid:{a_axis}:1");
        let sphere = SpaceDescriptor::Sphere { ambient: 3 };
        let worst = (0..triples)
            .into_par_iter()
            .map(|k| {
                let mut rng = factory.stream(0xAB00_0000_0000u64 + ((pi as u64) << 32) + k as u64);
                let a = random_point(&sphere, &mut rng)?;
                let b = random_point(&sphere, &mut rng)?;
                let c = random_point(&sphere, &mut rng)?;
                let dab = induced_sphere_distance(&a.data, &b.data, a_axis, 1.0)?;
                let dba = induced_sphere_distance(&b.data, &a.data, a_axis, 1.0)?;
                let dac = induced_sphere_distance(&a.data, &c.data, a_axis, 1.0)?;
                let dcb = induced_sphere_distance(&c.data, &b.data, a_axis, 1.0)?;
                let daa = induced_sphere_distance(&a.data, &a.data, a_axis, 1.0)?;
                Ok::<(f64, f64, f64), crate::error::Error>(((dab - dba).abs(), daa, dab - dac - dcb))
            })
            .try_reduce(
                || (0.0f64, 0.0f64, f64::MIN),
                |x, y| Ok((x.0.max(y.0), x.1.max(y.1), x.2.max(y.2))),
            )?;
        checks.push(GeometryCheck::new(&label, "symmetry", worst.0, 1e-12));
        checks.push(GeometryCheck::new(&label, "identity", worst.1, 1e-9));
        checks.push(GeometryCheck::new(&label, "triangle", worst.2.max(0.0), 1e-9));
    }
    checks.push(lc_isometry_check(triples.min(2000), seed)?);
    checks.push(spheroid_sphere_agreement(1000, seed)?);
    Ok(checks)
}

/// `d_LC` must equal the Euclidean distance of the log-Cholesky embeddings.
pub fn lc_isometry_check(pairs: usize, seed: u64) -> Result<GeometryCheck> {
    let factory = RngFactory::new(seed);
    let desc = SpaceDescriptor::Spd {
        size: 2,
        metric: SpdMetric::LogCholesky,
    };
    let worst = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = factory.stream(0xCC00_0000_0000u64 + k as u64);
            let s1 = random_point(&desc, &mut rng)?;
            let s2 = random_point(&desc, &mut rng)?;
            let direct = distance(&s1, &s2)?;
            let e1 = log_cholesky_embed(&s1.data, 2)?;
            let e2 = log_cholesky_embed(&s2.data, 2)?;
            let via: f64 = e1
                .iter()
                .zip(&e2)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            Ok::<f64, crate::error::Error>((direct - via).abs())
        })
        .try_reduce(|| 0.0f64, |x, y| Ok(x.max(y)))?;
    Ok(GeometryCheck::new(
        "spd:2:lc",
        "embedding isometry",
        worst,
        1e-12,
    ))
}

/// The unit spheroid's geodesic distance must agree with the sphere's.
pub fn spheroid_sphere_agreement(pairs: usize, seed: u64) -> Result<GeometryCheck> {
    let factory = RngFactory::new(seed);
    let sphere = SpaceDescriptor::Sphere { ambient: 3 };
    let worst = (0..pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = factory.stream(0xDD00_0000_0000u64 + k as u64);
            let x = random_point(&sphere, &mut rng)?;
            let y = random_point(&sphere, &mut rng)?;
            let arc = distance(&x, &y)?;
            let induced = induced_sphere_distance(&x.data, &y.data, 1.0, 1.0)?;
            Ok::<f64, crate::error::Error>((induced - arc).abs())
        })
        .try_reduce(|| 0.0f64, |x, y| Ok(x.max(y)))?;
    Ok(GeometryCheck::new(
        "spheroid:1:1",
        "sphere agreement",
        worst,
        1e-6,
    ))
}

/// Kolmogorov-Smirnov check used by the sampling validations: p-value of the
/// radial law of hyperboloid draws against its analytic CDF.
pub fn hvmf_radial_gof(kappa: f64, draws: usize, seed: u64) -> Result<f64> {
    use crate::metric::minkowski_dot;
    let desc = SpaceDescriptor::Hyperboloid { ambient: 3 };
    let mu = MetricPoint::new(desc, vec![1.0, 0.0, 0.0])?;
    let factory = RngFactory::new(seed);
    let mut rng = factory.stream(0);
    let mut radials = Vec::with_capacity(draws);
    for _ in 0..draws {
        let y = crate::sampling::sample_hvmf(&mu, kappa, &mut rng)?;
        let c = (-minkowski_dot(&y.data, &mu.data)).max(1.0);
        radials.push(c.acosh());
    }
    // For the 2-hyperboloid the radial CDF is 1 - exp(-kappa (cosh u - 1)).
    Ok(stats::ks_one_sample_pvalue(&radials, |u| {
        1.0 - (-kappa * (u.cosh() - 1.0)).exp()
    }))
}

/// Helper for tests and the CLI: response distance matrix for datasets.
pub fn response_distance_matrix(points: &[MetricPoint]) -> Result<PairwiseDistances> {
    PairwiseDistances::compute(points)
}
