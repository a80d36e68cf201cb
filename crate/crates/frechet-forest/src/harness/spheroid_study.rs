//! Anisotropic-distance study: fit medoid forests on responses mapped to
//! spheroids of varying equatorial axis, and compare prediction error, ball
//! area, and conditional coverage against the plain sphere.

use super::stats;
use crate::balls::{compute_oob_errors, empirical_quantile};
use crate::error::Result;
use crate::forest::{fit_forest, ForestFlavor, Hyperparams};
use crate::metric::{
    distance, exp_map, spheroid_map, spheroid_unmap, InducedBallRegion, MetricPoint,
    SpaceDescriptor,
};
use crate::sampling::RngFactory;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct SpheroidStudyConfig {
    /// Equatorial semi-axes to compare; 1.0 (the sphere) is the baseline and
    /// is added when missing.
    pub a_values: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub alpha: f64,
    pub trees: usize,
    pub min_split: usize,
    /// Monte Carlo draws per ball-area estimate.
    pub area_draws: usize,
    /// Longitudinal and latitudinal noise scales of the synthetic data; the
    /// defaults make the noise longitude-dominant.
    pub sigma_lon: f64,
    pub sigma_lat: f64,
    pub seed: u64,
}

impl Default for SpheroidStudyConfig {
    fn default() -> Self {
        SpheroidStudyConfig {
            a_values: vec![0.5, 0.75, 1.0, 1.25],
            n_train: 140,
            n_test: 60,
            alpha: 0.10,
            trees: 150,
            min_split: 5,
            area_draws: 200_000,
            sigma_lon: 0.30,
            sigma_lat: 0.10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpheroidStudyRow {
    pub a: f64,
    pub mse: f64,
    pub mean_area: f64,
    pub coverage: f64,
    /// Relative changes against the sphere baseline, in percent.
    pub delta_mse_pct: f64,
    pub delta_area_pct: f64,
    /// One-sided paired t-test p-values (Benjamini-Hochberg adjusted);
    /// `None` on the baseline row.
    pub p_mse: Option<f64>,
    pub p_area: Option<f64>,
    pub seconds: f64,
}

struct PerAxisOutcome {
    a: f64,
    sq_errors: Vec<f64>,
    areas: Vec<f64>,
    coverage: f64,
    seconds: f64,
}

/// Synthetic sunspot-like data: predictors on a latitude band of the sphere,
/// responses displaced longitudinally with longitude-dominant tangent noise.
fn generate_band_pair(
    cfg: &SpheroidStudyConfig,
    rng: &mut impl Rng,
) -> Result<(MetricPoint, MetricPoint, MetricPoint)> {
    let sphere = SpaceDescriptor::Sphere { ambient: 3 };
    // Colatitude limited away from the poles.
    let colat: f64 = rng.random_range(0.52..2.62);
    let lon: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
    let x = MetricPoint::new_unchecked(
        sphere.clone(),
        vec![colat.sin() * lon.cos(), colat.sin() * lon.sin(), colat.cos()],
    );
    // Longitudinal drift: rotate about the polar axis.
    let drift = 0.35f64;
    let (s, c) = drift.sin_cos();
    let m = MetricPoint::new_unchecked(
        sphere.clone(),
        vec![
            c * x.data[0] - s * x.data[1],
            s * x.data[0] + c * x.data[1],
            x.data[2],
        ],
    );
    // Tangent frame: longitude direction (along parallels) and latitude
    // direction (along meridians).
    let mut e_lon = [-m.data[1], m.data[0], 0.0];
    let norm = (e_lon[0] * e_lon[0] + e_lon[1] * e_lon[1]).sqrt();
    for v in &mut e_lon {
        *v /= norm;
    }
    let e_lat = [
        m.data[1] * e_lon[2] - m.data[2] * e_lon[1],
        m.data[2] * e_lon[0] - m.data[0] * e_lon[2],
        m.data[0] * e_lon[1] - m.data[1] * e_lon[0],
    ];
    let g1: f64 = StandardNormal.sample(rng);
    let g2: f64 = StandardNormal.sample(rng);
    let tangent: Vec<f64> = (0..3)
        .map(|k| cfg.sigma_lon * g1 * e_lon[k] + cfg.sigma_lat * g2 * e_lat[k])
        .collect();
    let y = exp_map(&m, &tangent)?;
    Ok((x, m, y))
}

/// Runs the study over the axis grid and assembles the comparison table.
pub fn spheroid_anisotropy_study(cfg: &SpheroidStudyConfig) -> Result<Vec<SpheroidStudyRow>> {
    let factory = RngFactory::new(cfg.seed);
    let mut a_values = cfg.a_values.clone();
    if !a_values.iter().any(|a| (*a - 1.0).abs() < 1e-12) {
        a_values.push(1.0);
    }
    a_values.sort_by(|x, y| x.partial_cmp(y).unwrap());

    // One shared synthetic data set: training and test pairs on the sphere.
    let mut rng = factory.stream(0);
    let mut train_x = Vec::with_capacity(cfg.n_train);
    let mut train_y_sphere = Vec::with_capacity(cfg.n_train);
    for _ in 0..cfg.n_train {
        let (x, _, y) = generate_band_pair(cfg, &mut rng)?;
        train_x.push(vec![x]);
        train_y_sphere.push(y);
    }
    let mut test_x = Vec::with_capacity(cfg.n_test);
    let mut test_y_sphere = Vec::with_capacity(cfg.n_test);
    for _ in 0..cfg.n_test {
        let (x, _, y) = generate_band_pair(cfg, &mut rng)?;
        test_x.push(vec![x]);
        test_y_sphere.push(y);
    }

    let outcomes: Vec<PerAxisOutcome> = a_values
        .iter()
        .map(|&a| run_axis(cfg, a, &train_x, &train_y_sphere, &test_x, &test_y_sphere))
        .collect::<Result<_>>()?;

    let baseline = outcomes
        .iter()
        .position(|o| (o.a - 1.0).abs() < 1e-12)
        .expect("baseline present");
    let base_mse = stats::mean(&outcomes[baseline].sq_errors);
    let base_area = stats::mean(&outcomes[baseline].areas);

    let p_mse_raw: Vec<Option<f64>> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            (i != baseline).then(|| {
                stats::paired_t_pvalue_less(&outcomes[baseline].sq_errors, &o.sq_errors)
            })
        })
        .collect();
    let p_area_raw: Vec<Option<f64>> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            (i != baseline)
                .then(|| stats::paired_t_pvalue_less(&o.areas, &outcomes[baseline].areas))
        })
        .collect();
    let p_mse = stats::benjamini_hochberg(&p_mse_raw);
    let p_area = stats::benjamini_hochberg(&p_area_raw);

    Ok(outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let mse = stats::mean(&o.sq_errors);
            let area = stats::mean(&o.areas);
            SpheroidStudyRow {
                a: o.a,
                mse,
                mean_area: area,
                coverage: o.coverage,
                delta_mse_pct: 100.0 * (mse - base_mse) / base_mse,
                delta_area_pct: 100.0 * (area - base_area) / base_area,
                p_mse: p_mse[i],
                p_area: p_area[i],
                seconds: o.seconds,
            }
        })
        .collect())
}

fn run_axis(
    cfg: &SpheroidStudyConfig,
    a: f64,
    train_x: &[Vec<MetricPoint>],
    train_y_sphere: &[MetricPoint],
    test_x: &[Vec<MetricPoint>],
    test_y_sphere: &[MetricPoint],
) -> Result<PerAxisOutcome> {
    let started = std::time::Instant::now();
    let spheroid = SpaceDescriptor::Spheroid { a, c: 1.0 };
    let responses: Vec<MetricPoint> = train_y_sphere
        .iter()
        .map(|y| {
            Ok(MetricPoint::new_unchecked(
                spheroid.clone(),
                spheroid_map(&y.data, a, 1.0)?,
            ))
        })
        .collect::<Result<_>>()?;
    let dataset = crate::dataset::Dataset::new(
        SpaceDescriptor::Product(vec![SpaceDescriptor::Sphere { ambient: 3 }]),
        spheroid.clone(),
        train_x.to_vec(),
        responses,
    )?;
    let hyper = Hyperparams {
        trees: cfg.trees,
        mtry: 1,
        min_split: cfg.min_split,
    };
    // Medoid forests: only pairwise response distances are needed, which is
    // what keeps the iterative spheroid geodesics affordable.
    let model = fit_forest(&dataset, ForestFlavor::Mrf, hyper, cfg.seed ^ a.to_bits())?;
    let errors = compute_oob_errors(&model)?;
    let radius = empirical_quantile(&errors, cfg.alpha)?;

    let per_test: Vec<(f64, f64, bool)> = (0..test_x.len())
        .into_par_iter()
        .map(|i| {
            let center = model.predict(&test_x[i])?;
            let center_sphere = MetricPoint::new_unchecked(
                SpaceDescriptor::Sphere { ambient: 3 },
                spheroid_unmap(&center.data, a, 1.0)?,
            );
            // Errors are compared on the sphere so that axes are comparable.
            let err = distance(&center_sphere, &test_y_sphere[i])?;
            let y_mapped = MetricPoint::new_unchecked(
                spheroid.clone(),
                spheroid_map(&test_y_sphere[i].data, a, 1.0)?,
            );
            let covered = distance(&center, &y_mapped)? < radius;
            let region = InducedBallRegion::new(&center.data, a, 1.0, radius, 512)?;
            let factory = RngFactory::new(cfg.seed);
            let mut area_rng = factory.stream(0xA15A_0000u64 + i as u64);
            let (area, _) = region.area_mc(cfg.area_draws, &mut area_rng);
            Ok((err * err, area, covered))
        })
        .collect::<Result<_>>()?;

    let sq_errors: Vec<f64> = per_test.iter().map(|(e, _, _)| *e).collect();
    let areas: Vec<f64> = per_test.iter().map(|(_, ar, _)| *ar).collect();
    let coverage =
        per_test.iter().filter(|(_, _, c)| *c).count() as f64 / per_test.len() as f64;
    Ok(PerAxisOutcome {
        a,
        sq_errors,
        areas,
        coverage,
        seconds: started.elapsed().as_secs_f64(),
    })
}
