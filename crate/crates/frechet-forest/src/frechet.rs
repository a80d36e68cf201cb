//! Fréchet means, variances, and medoids: the estimation layer shared by
//! trees and forests.
//!
//! Means dispatch on the space: Euclidean and quantile-grid samples use the
//! weighted arithmetic mean, log-Cholesky and log-Euclidean SPD samples use
//! their isometric/closed-form embeddings, and the sphere, hyperboloid, and
//! affine-invariant SPD cases run intrinsic gradient descent. Medoids search
//! the sample points only, optionally through a precomputed pairwise-distance
//! matrix.

use crate::error::{Error, Result};
use crate::metric::{
    distance, exp_map, log_cholesky_embed, log_cholesky_unembed, log_map, spd_exp, spd_log,
    tangent_norm, MetricPoint, SpaceDescriptor, SpdMetric,
};
use serde::{Deserialize, Serialize};

/// Convergence threshold on the intrinsic gradient norm.
const GRADIENT_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 200;

/// Points with raw (not necessarily normalized) weights. Normalization
/// happens inside the solvers, matching the weighted functional whose
/// weights need not sum to one.
pub struct WeightedSample<'a> {
    points: Vec<&'a MetricPoint>,
    weights: Vec<f64>,
}

impl<'a> WeightedSample<'a> {
    pub fn new(points: Vec<&'a MetricPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "points and weights must have equal length".into(),
            ));
        }
        let descriptor = &points[0].descriptor;
        if points.iter().any(|p| &p.descriptor != descriptor) {
            return Err(Error::InvalidParameter(
                "all sample points must share one descriptor".into(),
            ));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(Error::DegenerateWeights);
        }
        Ok(WeightedSample { points, weights })
    }

    pub fn equal_weights(points: Vec<&'a MetricPoint>) -> Result<Self> {
        let w = vec![1.0; points.len()];
        WeightedSample::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[&'a MetricPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn descriptor(&self) -> &SpaceDescriptor {
        &self.points[0].descriptor
    }

    fn normalized_weights(&self) -> Result<Vec<f64>> {
        let total: f64 = self.weights.iter().sum();
        if !(total > 0.0) || self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::DegenerateWeights);
        }
        Ok(self.weights.iter().map(|w| w / total).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    ClosedForm,
    GradientDescent,
    Medoid,
}

/// Outcome of a Fréchet mean/medoid computation. `objective` is the weighted
/// functional (with weights normalized to sum to one) at the minimizer.
#[derive(Debug, Clone)]
pub struct FrechetSolveReport {
    pub minimizer: MetricPoint,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: SolveMethod,
}

/// Weighted Fréchet functional with normalized weights.
pub fn weighted_objective(sample: &WeightedSample, at: &MetricPoint) -> Result<f64> {
    let weights = sample.normalized_weights()?;
    objective_at(sample, &weights, at)
}

/// Weighted Fréchet mean of the sample.
pub fn frechet_mean(sample: &WeightedSample) -> Result<FrechetSolveReport> {
    let weights = sample.normalized_weights()?;
    match sample.descriptor() {
        SpaceDescriptor::Euclidean { .. } | SpaceDescriptor::QuantileGrid { .. } => {
            let mean = weighted_coordinate_mean(&sample.points, &weights);
            let minimizer = MetricPoint::new_unchecked(sample.descriptor().clone(), mean);
            finish_closed_form(sample, minimizer)
        }
        SpaceDescriptor::Spd { size, metric } => match metric {
            SpdMetric::LogCholesky => {
                let embedded: Vec<Vec<f64>> = sample
                    .points
                    .iter()
                    .map(|p| log_cholesky_embed(&p.data, *size))
                    .collect::<Result<_>>()?;
                let mean = weighted_vec_mean(&embedded, &weights);
                let minimizer = MetricPoint::new_unchecked(
                    sample.descriptor().clone(),
                    log_cholesky_unembed(&mean, *size),
                );
                finish_closed_form(sample, minimizer)
            }
            SpdMetric::LogEuclidean => {
                let logs: Vec<Vec<f64>> = sample
                    .points
                    .iter()
                    .map(|p| spd_log(&p.data, *size))
                    .collect::<Result<_>>()?;
                let mean = weighted_vec_mean(&logs, &weights);
                let minimizer = MetricPoint::new_unchecked(
                    sample.descriptor().clone(),
                    spd_exp(&mean, *size)?,
                );
                finish_closed_form(sample, minimizer)
            }
            SpdMetric::AffineInvariant => gradient_descent_mean(sample, &weights),
        },
        SpaceDescriptor::Sphere { .. } | SpaceDescriptor::Hyperboloid { .. } => {
            gradient_descent_mean(sample, &weights)
        }
        other => Err(Error::Unsupported(format!(
            "Fréchet mean is not implemented for `{other}`; use the medoid"
        ))),
    }
}

fn finish_closed_form(
    sample: &WeightedSample,
    minimizer: MetricPoint,
) -> Result<FrechetSolveReport> {
    let objective = weighted_objective(sample, &minimizer)?;
    Ok(FrechetSolveReport {
        minimizer,
        objective,
        iterations: 0,
        converged: true,
        method: SolveMethod::ClosedForm,
    })
}

fn weighted_coordinate_mean(points: &[&MetricPoint], weights: &[f64]) -> Vec<f64> {
    // A constant sample averages to itself exactly; this keeps degenerate
    // all-equal data producing exactly-zero residuals downstream.
    if points.iter().all(|p| p.data == points[0].data) {
        return points[0].data.clone();
    }
    let dim = points[0].data.len();
    let mut acc = vec![0.0; dim];
    for (p, w) in points.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(&p.data) {
            *a += w * v;
        }
    }
    acc
}

fn weighted_vec_mean(vectors: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    if vectors.iter().all(|v| *v == vectors[0]) {
        return vectors[0].clone();
    }
    let dim = vectors[0].len();
    let mut acc = vec![0.0; dim];
    for (v, w) in vectors.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * x;
        }
    }
    acc
}

/// Builds the extrinsic (ambient average, projected) starting point where
/// the space admits one.
fn extrinsic_start(sample: &WeightedSample, weights: &[f64]) -> Option<MetricPoint> {
    match sample.descriptor() {
        SpaceDescriptor::Sphere { .. } => {
            let avg = weighted_coordinate_mean(&sample.points, weights);
            let norm = avg.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > 1e-6).then(|| {
                MetricPoint::new_unchecked(
                    sample.descriptor().clone(),
                    avg.into_iter().map(|v| v / norm).collect(),
                )
            })
        }
        SpaceDescriptor::Hyperboloid { .. } => {
            // The average of future-directed timelike vectors is timelike;
            // normalizing in the Minkowski form projects to the sheet.
            let avg = weighted_coordinate_mean(&sample.points, weights);
            let q = -crate::metric::minkowski_dot(&avg, &avg);
            (q > 1e-12).then(|| {
                let s = q.sqrt();
                MetricPoint::new_unchecked(
                    sample.descriptor().clone(),
                    avg.into_iter().map(|v| v / s).collect(),
                )
            })
        }
        SpaceDescriptor::Spd { size, .. } => {
            // Log-Euclidean mean as a warm start for the affine-invariant
            // iteration.
            let logs: Vec<Vec<f64>> = sample
                .points
                .iter()
                .map(|p| spd_log(&p.data, *size))
                .collect::<Result<_>>()
                .ok()?;
            let mean = weighted_vec_mean(&logs, weights);
            spd_exp(&mean, *size)
                .ok()
                .map(|buf| MetricPoint::new_unchecked(sample.descriptor().clone(), buf))
        }
        _ => None,
    }
}

/// Karcher iteration `x <- exp_x(mean of logs)` with unit step. The start is
/// the best of the projected extrinsic mean and a capped scan of sample
/// points (a full scan of every point would cost O(k^2) distances per call,
/// which dominates forest training). Reports non-convergence instead of
/// failing.
fn gradient_descent_mean(
    sample: &WeightedSample,
    weights: &[f64],
) -> Result<FrechetSolveReport> {
    const INIT_SCAN_CAP: usize = 6;
    let mut candidates: Vec<MetricPoint> = Vec::with_capacity(INIT_SCAN_CAP + 1);
    let k = sample.len();
    let stride = (k / INIT_SCAN_CAP).max(1);
    for i in (0..k).step_by(stride).take(INIT_SCAN_CAP) {
        candidates.push(sample.points[i].clone());
    }
    if let Some(start) = extrinsic_start(sample, weights) {
        candidates.push(start);
    }
    let mut best_obj = f64::MAX;
    let mut current = candidates[0].clone();
    for cand in &candidates {
        let obj = objective_at(sample, weights, cand)?;
        if obj < best_obj {
            best_obj = obj;
            current = cand.clone();
        }
    }
    let mut best_point = current.clone();
    let mut iterations = 0;
    let mut converged = false;
    let dim = current.data.len();
    for iter in 0..MAX_ITERATIONS {
        iterations = iter + 1;
        let mut grad = vec![0.0; dim];
        let mut antipodal = false;
        for (p, w) in sample.points.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            match log_map(&current, p) {
                Ok(v) => {
                    for (g, t) in grad.iter_mut().zip(&v) {
                        *g += w * t;
                    }
                }
                Err(Error::AntipodalPair) => {
                    antipodal = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if antipodal {
            // Nudge off the antipode along a fixed tangent direction.
            let basis = crate::metric::tangent_basis(&current)?;
            let nudge: Vec<f64> = basis[0].iter().map(|v| 1e-3 * v).collect();
            current = exp_map(&current, &nudge)?;
            continue;
        }
        let grad_norm = tangent_norm(&current, &grad)?;
        if grad_norm < GRADIENT_TOL {
            converged = true;
            break;
        }
        let next = exp_map(&current, &grad)?;
        let new_obj = objective_at(sample, weights, &next)?;
        if new_obj < best_obj {
            best_obj = new_obj;
            best_point = next.clone();
        }
        current = next;
    }
    let final_point = if converged { current } else { best_point };
    let objective = objective_at(sample, weights, &final_point)?;
    Ok(FrechetSolveReport {
        minimizer: final_point,
        objective,
        iterations,
        converged,
        method: SolveMethod::GradientDescent,
    })
}

fn objective_at(sample: &WeightedSample, weights: &[f64], at: &MetricPoint) -> Result<f64> {
    let mut total = 0.0;
    for (p, w) in sample.points.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let d = distance(p, at)?;
        total += w * d * d;
    }
    Ok(total)
}

/// Empirical Fréchet variance at the supplied mean: the weighted functional
/// with internally normalized weights.
pub fn frechet_variance(sample: &WeightedSample, mean: &MetricPoint) -> Result<f64> {
    weighted_objective(sample, mean)
}

/// Allocation-free unweighted Karcher variance on the sphere or hyperboloid,
/// for the tree-growing hot path. Same iteration and stopping rule as
/// [`frechet_mean`]; cross-checked against it in the tests.
pub(crate) fn intrinsic_variance_fast(
    points: &[&[f64]],
    hyperbolic: bool,
) -> f64 {
    let k = points.len();
    let dim = points[0].len();
    debug_assert!(dim <= 16);
    let mut mean = [0.0f64; 16];
    let mut grad = [0.0f64; 16];
    let inv_k = 1.0 / k as f64;
    // Extrinsic start, projected to the surface.
    for p in points {
        for (m, v) in mean.iter_mut().zip(*p) {
            *m += v;
        }
    }
    if hyperbolic {
        let spatial: f64 = mean[1..dim].iter().map(|v| v * v).sum();
        let q = mean[0] * mean[0] - spatial;
        if q > 1e-12 {
            let s = q.sqrt();
            for m in &mut mean[..dim] {
                *m /= s;
            }
        } else {
            mean[..dim].copy_from_slice(points[0]);
        }
    } else {
        let norm: f64 = mean[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for m in &mut mean[..dim] {
                *m /= norm;
            }
        } else {
            mean[..dim].copy_from_slice(points[0]);
        }
    }
    for _ in 0..MAX_ITERATIONS {
        grad[..dim].fill(0.0);
        let mut degenerate = false;
        for p in points {
            // Inline log map.
            if hyperbolic {
                let mut c = mean[0] * p[0];
                for j in 1..dim {
                    c -= mean[j] * p[j];
                }
                let c = c.max(1.0);
                let theta = c.acosh();
                let spatial: f64 = (0..dim)
                    .map(|j| {
                        let r = p[j] - c * mean[j];
                        if j == 0 {
                            -r * r
                        } else {
                            r * r
                        }
                    })
                    .sum();
                let norm = spatial.max(0.0).sqrt();
                if norm > 1e-14 {
                    let scale = theta / norm * inv_k;
                    for j in 0..dim {
                        grad[j] += scale * (p[j] - c * mean[j]);
                    }
                }
            } else {
                let mut c = 0.0;
                for j in 0..dim {
                    c += mean[j] * p[j];
                }
                let c = c.clamp(-1.0, 1.0);
                let theta = c.acos();
                let mut norm_sq = 0.0;
                for j in 0..dim {
                    let r = p[j] - c * mean[j];
                    norm_sq += r * r;
                }
                let norm = norm_sq.sqrt();
                if norm > 1e-14 {
                    let scale = theta / norm * inv_k;
                    for j in 0..dim {
                        grad[j] += scale * (p[j] - c * mean[j]);
                    }
                } else if theta > std::f64::consts::FRAC_PI_2 {
                    degenerate = true;
                }
            }
        }
        if degenerate {
            break;
        }
        let grad_norm_sq: f64 = if hyperbolic {
            let spatial: f64 = grad[1..dim].iter().map(|v| v * v).sum();
            (spatial - grad[0] * grad[0]).max(0.0)
        } else {
            grad[..dim].iter().map(|v| v * v).sum()
        };
        if grad_norm_sq < GRADIENT_TOL * GRADIENT_TOL {
            break;
        }
        // Inline exp map with renormalization.
        let theta = grad_norm_sq.sqrt();
        if hyperbolic {
            let (s, c) = (theta.sinh(), theta.cosh());
            for j in 0..dim {
                mean[j] = c * mean[j] + s * grad[j] / theta;
            }
            let spatial: f64 = mean[1..dim].iter().map(|v| v * v).sum();
            mean[0] = (1.0 + spatial).sqrt();
        } else {
            let (s, c) = (theta.sin(), theta.cos());
            for j in 0..dim {
                mean[j] = c * mean[j] + s * grad[j] / theta;
            }
            let norm: f64 = mean[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
            for m in &mut mean[..dim] {
                *m /= norm;
            }
        }
    }
    let mut total = 0.0;
    for p in points {
        let d = if hyperbolic {
            let mut c = mean[0] * p[0];
            for j in 1..dim {
                c -= mean[j] * p[j];
            }
            c.max(1.0).acosh()
        } else {
            let mut c = 0.0;
            for j in 0..dim {
                c += mean[j] * p[j];
            }
            c.clamp(-1.0, 1.0).acos()
        };
        total += d * d;
    }
    total * inv_k
}

/// Weighted Fréchet medoid: the minimizer of the weighted functional over
/// the sample points themselves, optionally restricted to `candidates`
/// (indices into the sample). Ties break to the lowest candidate index.
pub fn frechet_medoid(
    sample: &WeightedSample,
    candidates: Option<&[usize]>,
) -> Result<FrechetSolveReport> {
    let weights = sample.normalized_weights()?;
    let all: Vec<usize>;
    let cands: &[usize] = match candidates {
        Some(c) => c,
        None => {
            all = (0..sample.len()).collect();
            &all
        }
    };
    if cands.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut best: Option<(usize, f64)> = None;
    for &ci in cands {
        let obj = objective_at(sample, &weights, sample.points[ci])?;
        if best.map(|(_, b)| obj < b).unwrap_or(true) {
            best = Some((ci, obj));
        }
    }
    let (idx, objective) = best.expect("nonempty candidates");
    Ok(FrechetSolveReport {
        minimizer: sample.points[idx].clone(),
        objective,
        iterations: 0,
        converged: true,
        method: SolveMethod::Medoid,
    })
}

/// Symmetric matrix of pairwise distances, the precomputation that makes
/// medoid forests cheap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseDistances {
    n: usize,
    // Upper triangle including the diagonal, row-major.
    data: Vec<f64>,
}

impl PairwiseDistances {
    pub fn compute(points: &[MetricPoint]) -> Result<Self> {
        Self::compute_with(points, distance)
    }

    /// Computes with a custom distance (for example the spheroid-induced
    /// distance on sphere points).
    pub fn compute_with(
        points: &[MetricPoint],
        dist: impl Fn(&MetricPoint, &MetricPoint) -> Result<f64> + Sync,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = Vec::with_capacity(n - i);
                for j in i..n {
                    row.push(dist(&points[i], &points[j])?);
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for row in rows {
            data.extend(row);
        }
        Ok(PairwiseDistances { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        // Row `lo` of the packed upper triangle starts after the first `lo`
        // rows of lengths n, n-1, ...
        let row_start = lo * (2 * self.n - lo + 1) / 2;
        self.data[row_start + (hi - lo)]
    }
}

/// Weighted medoid over precomputed distances: returns the best candidate
/// index and the normalized objective there. `weights` spans all points the
/// matrix covers; ties break to the lowest candidate index.
pub fn medoid_from_distances(
    weights: &[f64],
    candidates: &[usize],
    distances: &PairwiseDistances,
) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(Error::EmptySample);
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let mut best: Option<(usize, f64)> = None;
    for &ci in candidates {
        let mut obj = 0.0;
        for (j, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let d = distances.get(j, ci);
            obj += w * d * d;
        }
        obj /= total;
        if best.map(|(_, b)| obj < b).unwrap_or(true) {
            best = Some((ci, obj));
        }
    }
    Ok(best.expect("nonempty candidates"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_point, sample_vmf, RngFactory};
    use rand::Rng;

    fn sphere(data: [f64; 3]) -> MetricPoint {
        MetricPoint::new(SpaceDescriptor::Sphere { ambient: 3 }, data.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_two_point_mean() {
        let a = MetricPoint::scalar(0.0);
        let b = MetricPoint::scalar(2.0);
        let sample = WeightedSample::equal_weights(vec![&a, &b]).unwrap();
        let report = frechet_mean(&sample).unwrap();
        assert_eq!(report.minimizer.data[0], 1.0);
        assert!(report.converged);
    }

    #[test]
    fn singleton_sample_returns_the_point() {
        let mut rng = RngFactory::new(5).stream(0);
        for desc in [
            SpaceDescriptor::Euclidean { dim: 3 },
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
            SpaceDescriptor::QuantileGrid { points: 10 },
        ] {
            let p = random_point(&desc, &mut rng).unwrap();
            let sample = WeightedSample::equal_weights(vec![&p]).unwrap();
            let report = frechet_mean(&sample).unwrap();
            assert!(distance(&report.minimizer, &p).unwrap() < 1e-7);
            assert!(report.objective < 1e-12);
        }
    }

    #[test]
    fn empty_and_degenerate_inputs_error() {
        assert!(matches!(
            WeightedSample::equal_weights(vec![]),
            Err(Error::EmptySample)
        ));
        let a = MetricPoint::scalar(0.0);
        let b = MetricPoint::scalar(1.0);
        assert!(matches!(
            WeightedSample::new(vec![&a, &b], vec![0.0, 0.0]),
            Err(Error::DegenerateWeights)
        ));
        let sample = WeightedSample::new(vec![&a, &b], vec![1.0, -1.0]).unwrap();
        assert!(matches!(frechet_mean(&sample), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn weight_scaling_does_not_change_the_mean() {
        let pts: Vec<MetricPoint> = vec![
            MetricPoint::scalar(1.0),
            MetricPoint::scalar(4.0),
            MetricPoint::scalar(5.0),
        ];
        let refs: Vec<&MetricPoint> = pts.iter().collect();
        let s1 = WeightedSample::new(refs.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        let s2 = WeightedSample::new(refs, vec![10.0, 20.0, 30.0]).unwrap();
        let m1 = frechet_mean(&s1).unwrap().minimizer;
        let m2 = frechet_mean(&s2).unwrap().minimizer;
        assert!((m1.data[0] - m2.data[0]).abs() < 1e-14);
    }

    #[test]
    fn vmf_sample_mean_recovers_location() {
        let mu = sphere([0.0, 0.0, 1.0]);
        let mut rng = RngFactory::new(42).stream(1);
        let draws: Vec<MetricPoint> = (0..2000)
            .map(|_| sample_vmf(&mu, 50.0, &mut rng).unwrap())
            .collect();
        let sample = WeightedSample::equal_weights(draws.iter().collect()).unwrap();
        let report = frechet_mean(&sample).unwrap();
        assert!(report.converged);
        assert!(distance(&report.minimizer, &mu).unwrap() < 0.05);
    }

    #[test]
    fn variance_basics() {
        let a = MetricPoint::scalar(-1.0);
        let b = MetricPoint::scalar(1.0);
        let sample = WeightedSample::equal_weights(vec![&a, &b]).unwrap();
        let mean = MetricPoint::scalar(0.0);
        assert!((frechet_variance(&sample, &mean).unwrap() - 1.0).abs() < 1e-14);

        let same = MetricPoint::scalar(3.0);
        let sample = WeightedSample::equal_weights(vec![&same, &same, &same]).unwrap();
        assert_eq!(frechet_variance(&sample, &same).unwrap(), 0.0);
    }

    #[test]
    fn vmf_variance_matches_independent_monte_carlo() {
        // Direct Monte Carlo estimate of E[d(Y, mu)^2] from a separate
        // stream is the oracle for the solver-facing variance.
        let mu = sphere([1.0, 0.0, 0.0]);
        let factory = RngFactory::new(7);
        let n = 5000;
        let draws: Vec<MetricPoint> = {
            let mut rng = factory.stream(0);
            (0..n).map(|_| sample_vmf(&mu, 200.0, &mut rng).unwrap()).collect()
        };
        let sample = WeightedSample::equal_weights(draws.iter().collect()).unwrap();
        let mean = frechet_mean(&sample).unwrap();
        let var = frechet_variance(&sample, &mean.minimizer).unwrap();

        let mut rng = factory.stream(1);
        let m = 20_000;
        let mut sq = Vec::with_capacity(m);
        for _ in 0..m {
            let y = sample_vmf(&mu, 200.0, &mut rng).unwrap();
            let d = distance(&y, &mu).unwrap();
            sq.push(d * d);
        }
        let oracle_mean: f64 = sq.iter().sum::<f64>() / m as f64;
        let oracle_var: f64 =
            sq.iter().map(|v| (v - oracle_mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        // Combined Monte Carlo error of both estimates.
        let se = (oracle_var / m as f64).sqrt() + (oracle_var / n as f64).sqrt();
        assert!(
            (var - oracle_mean).abs() < 3.0 * se,
            "variance {var} vs oracle {oracle_mean} (se {se})"
        );
    }

    #[test]
    fn fast_intrinsic_variance_matches_general_solver() {
        let mut rng = RngFactory::new(91).stream(0);
        for desc in [
            SpaceDescriptor::Sphere { ambient: 3 },
            SpaceDescriptor::Hyperboloid { ambient: 3 },
        ] {
            for k in [2usize, 5, 40] {
                let pts: Vec<MetricPoint> =
                    (0..k).map(|_| random_point(&desc, &mut rng).unwrap()).collect();
                let sample = WeightedSample::equal_weights(pts.iter().collect()).unwrap();
                let mean = frechet_mean(&sample).unwrap();
                let general = frechet_variance(&sample, &mean.minimizer).unwrap();
                let slices: Vec<&[f64]> = pts.iter().map(|p| p.data.as_slice()).collect();
                let fast = intrinsic_variance_fast(
                    &slices,
                    matches!(desc, SpaceDescriptor::Hyperboloid { .. }),
                );
                assert!(
                    (general - fast).abs() <= 1e-9 * (1.0 + general),
                    "{desc} k={k}: {general} vs {fast}"
                );
            }
        }
    }

    #[test]
    fn medoid_prefers_sample_point_over_mean() {
        let pts = [
            MetricPoint::scalar(0.0),
            MetricPoint::scalar(1.0),
            MetricPoint::scalar(10.0),
        ];
        let sample = WeightedSample::equal_weights(pts.iter().collect()).unwrap();
        let medoid = frechet_medoid(&sample, None).unwrap();
        assert_eq!(medoid.minimizer.data[0], 1.0);
        assert_eq!(medoid.method, SolveMethod::Medoid);
    }

    #[test]
    fn medoid_single_candidate() {
        let pts = [MetricPoint::scalar(4.0), MetricPoint::scalar(6.0)];
        let sample = WeightedSample::equal_weights(pts.iter().collect()).unwrap();
        let medoid = frechet_medoid(&sample, Some(&[1])).unwrap();
        assert_eq!(medoid.minimizer.data[0], 6.0);
        assert!(frechet_medoid(&sample, Some(&[])).is_err());
    }

    #[test]
    fn medoid_matches_brute_force_and_distance_matrix() {
        let mut rng = RngFactory::new(9).stream(0);
        let pts: Vec<MetricPoint> = (0..50)
            .map(|_| MetricPoint::scalar(rng.random_range(-3.0..3.0)))
            .collect();
        let sample = WeightedSample::equal_weights(pts.iter().collect()).unwrap();
        let medoid = frechet_medoid(&sample, None).unwrap();

        // Brute force over all candidates.
        let mut best = (usize::MAX, f64::MAX);
        for c in 0..pts.len() {
            let obj: f64 = pts
                .iter()
                .map(|p| (p.data[0] - pts[c].data[0]).powi(2))
                .sum::<f64>()
                / pts.len() as f64;
            if obj < best.1 {
                best = (c, obj);
            }
        }
        assert_eq!(medoid.minimizer.data[0], pts[best.0].data[0]);

        let matrix = PairwiseDistances::compute(&pts).unwrap();
        let weights = vec![1.0; pts.len()];
        let cands: Vec<usize> = (0..pts.len()).collect();
        let (idx, obj) = medoid_from_distances(&weights, &cands, &matrix).unwrap();
        assert_eq!(idx, best.0);
        assert!((obj - best.1).abs() < 1e-12);
    }

    #[test]
    fn medoid_objective_dominates_mean_objective() {
        let mut rng = RngFactory::new(13).stream(0);
        for desc in [
            SpaceDescriptor::Euclidean { dim: 2 },
            SpaceDescriptor::Sphere { ambient: 3 },
            SpaceDescriptor::Spd {
                size: 2,
                metric: SpdMetric::LogEuclidean,
            },
        ] {
            let pts: Vec<MetricPoint> = (0..20)
                .map(|_| random_point(&desc, &mut rng).unwrap())
                .collect();
            let sample = WeightedSample::equal_weights(pts.iter().collect()).unwrap();
            let mean = frechet_mean(&sample).unwrap();
            let medoid = frechet_medoid(&sample, None).unwrap();
            assert!(medoid.objective >= mean.objective - 1e-12);
        }
    }

    #[test]
    fn gradient_descent_minimizer_beats_random_perturbations() {
        let mut rng = RngFactory::new(17).stream(0);
        for desc in [
            SpaceDescriptor::Sphere { ambient: 3 },
            SpaceDescriptor::Hyperboloid { ambient: 3 },
            SpaceDescriptor::Spd {
                size: 2,
                metric: SpdMetric::AffineInvariant,
            },
        ] {
            let pts: Vec<MetricPoint> = (0..15)
                .map(|_| random_point(&desc, &mut rng).unwrap())
                .collect();
            let sample = WeightedSample::equal_weights(pts.iter().collect()).unwrap();
            let report = frechet_mean(&sample).unwrap();
            let basis = crate::metric::tangent_basis(&report.minimizer).unwrap();
            for _ in 0..100 {
                let mut tangent = vec![0.0; basis[0].len()];
                for b in &basis {
                    let coef: f64 = rng.random_range(-0.05..0.05);
                    for (t, v) in tangent.iter_mut().zip(b) {
                        *t += coef * v;
                    }
                }
                let perturbed = exp_map(&report.minimizer, &tangent).unwrap();
                let obj = weighted_objective(&sample, &perturbed).unwrap();
                assert!(
                    obj >= report.objective - 1e-10,
                    "perturbation beat the solver on {desc}: {obj} < {}",
                    report.objective
                );
            }
        }
    }

    #[test]
    fn closed_form_means_are_first_order_optimal() {
        // Finite-difference gradient of the embedded objective at the
        // returned mean must vanish.
        let mut rng = RngFactory::new(21).stream(0);
        for metric in [SpdMetric::LogCholesky, SpdMetric::LogEuclidean] {
            let desc = SpaceDescriptor::Spd { size: 2, metric };
            let pts: Vec<MetricPoint> = (0..12)
                .map(|_| random_point(&desc, &mut rng).unwrap())
                .collect();
            let sample = WeightedSample::equal_weights(pts.iter().collect()).unwrap();
            let report = frechet_mean(&sample).unwrap();
            let basis = crate::metric::tangent_basis(&report.minimizer).unwrap();
            let h = 1e-5;
            let mut grad_norm_sq = 0.0;
            for b in &basis {
                let step: Vec<f64> = b.iter().map(|v| h * v).collect();
                let plus = exp_map(&report.minimizer, &step).unwrap();
                let neg: Vec<f64> = b.iter().map(|v| -h * v).collect();
                let minus = exp_map(&report.minimizer, &neg).unwrap();
                let g = (weighted_objective(&sample, &plus).unwrap()
                    - weighted_objective(&sample, &minus).unwrap())
                    / (2.0 * h);
                grad_norm_sq += g * g;
            }
            assert!(
                grad_norm_sq.sqrt() < 1e-6,
                "gradient norm {} at {metric:?} mean",
                grad_norm_sq.sqrt()
            );
        }
    }
}
