//! Split search: 2-means split candidates and the CART gain in terms of
//! empirical Fréchet variances.
//!
//! Scalar Euclidean features and Euclidean responses run on direct
//! arithmetic; everything else goes through the generic metric machinery.

use crate::error::{Error, Result};
use crate::frechet::{
    frechet_mean, frechet_medoid, frechet_variance, medoid_from_distances, PairwiseDistances,
    WeightedSample,
};
use crate::metric::{distance, MetricPoint, SpaceDescriptor};
use rand::Rng;

use super::{ForestFlavor, SplitRule};

/// Upper bound on the points examined by the farthest-pair seeding.
const SEED_SUBSET_CAP: usize = 32;
const MAX_LLOYD_ITERATIONS: usize = 10;

/// Node-level response statistics, flavor-aware: mean-based variance for the
/// mean flavors, medoid-based for the medoid forest (over the cached
/// pairwise distances).
pub(super) struct ResponseImpurity<'a> {
    pub flavor: ForestFlavor,
    pub responses: &'a [MetricPoint],
    pub distances: Option<&'a PairwiseDistances>,
}

impl ResponseImpurity<'_> {
    /// Empirical Fréchet variance of the responses at `members` (training
    /// indices, multiplicity counted).
    pub fn variance(&self, members: &[usize]) -> Result<f64> {
        match self.flavor {
            ForestFlavor::Frf | ForestFlavor::Rfwlcfr => {
                match self.responses[members[0]].descriptor {
                    SpaceDescriptor::Euclidean { dim } => {
                        return Ok(euclidean_variance(self.responses, members, dim))
                    }
                    SpaceDescriptor::Sphere { ambient } | SpaceDescriptor::Hyperboloid { ambient }
                        if ambient <= 16 =>
                    {
                        let pts: Vec<&[f64]> = members
                            .iter()
                            .map(|&i| self.responses[i].data.as_slice())
                            .collect();
                        let hyperbolic = matches!(
                            self.responses[members[0]].descriptor,
                            SpaceDescriptor::Hyperboloid { .. }
                        );
                        return Ok(crate::frechet::intrinsic_variance_fast(&pts, hyperbolic));
                    }
                    _ => {}
                }
                let pts: Vec<&MetricPoint> =
                    members.iter().map(|&i| &self.responses[i]).collect();
                let sample = WeightedSample::equal_weights(pts)?;
                let mean = frechet_mean(&sample)?;
                frechet_variance(&sample, &mean.minimizer)
            }
            ForestFlavor::Mrf => {
                let distances = self.distances.ok_or_else(|| {
                    Error::InvalidParameter("medoid forest needs distances".into())
                })?;
                let mut weights = vec![0.0; self.responses.len()];
                for &i in members {
                    weights[i] += 1.0;
                }
                // Candidates are the node's own members, so trees built on a
                // bootstrap resample never consult out-of-bag responses.
                let mut candidates: Vec<usize> = members.to_vec();
                candidates.sort_unstable();
                candidates.dedup();
                let (_, objective) = medoid_from_distances(&weights, &candidates, distances)?;
                Ok(objective)
            }
        }
    }
}

fn euclidean_variance(responses: &[MetricPoint], members: &[usize], dim: usize) -> f64 {
    let k = members.len() as f64;
    let mut mean = vec![0.0; dim];
    for &i in members {
        for (m, v) in mean.iter_mut().zip(&responses[i].data) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= k;
    }
    let mut total = 0.0;
    for &i in members {
        for (m, v) in mean.iter().zip(&responses[i].data) {
            let d = v - m;
            total += d * d;
        }
    }
    total / k
}

fn scalar_value(p: &MetricPoint) -> Option<f64> {
    match p.descriptor {
        SpaceDescriptor::Euclidean { dim: 1 } => Some(p.data[0]),
        _ => None,
    }
}

/// 2-means on one predictor feature of a node sample. Returns `None` when
/// every value is identical (no admissible split).
///
/// Seeding is the farthest pair within a capped random subset; cluster
/// centers are Fréchet means, or medoids under the medoid forest.
pub(super) fn two_means_split(
    values: &[&MetricPoint],
    flavor: ForestFlavor,
    rng: &mut impl Rng,
) -> Result<Option<(MetricPoint, MetricPoint)>> {
    let n = values.len();
    if n < 2 {
        return Ok(None);
    }
    if values.iter().all(|v| v.data == values[0].data) {
        return Ok(None);
    }
    if values.iter().all(|v| scalar_value(v).is_some()) {
        let scalars: Vec<f64> = values.iter().map(|v| v.data[0]).collect();
        return Ok(scalar_two_means(&scalars, flavor, rng)
            .map(|(l, r)| (MetricPoint::scalar(l), MetricPoint::scalar(r))));
    }
    let subset = seed_subset(n, rng);
    let mut seed = (subset[0], subset[0]);
    let mut best = -1.0;
    for (si, &i) in subset.iter().enumerate() {
        for &j in subset.iter().skip(si + 1) {
            let d = distance(values[i], values[j])?;
            if d > best {
                best = d;
                seed = (i, j);
            }
        }
    }
    if best <= 0.0 {
        // The capped subset can be constant even when the node is not.
        let other = values
            .iter()
            .position(|v| v.data != values[0].data)
            .expect("checked distinct");
        seed = (0, other);
    }
    let mut left = values[seed.0].clone();
    let mut right = values[seed.1].clone();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut left_members: Vec<usize> = Vec::new();
        let mut right_members: Vec<usize> = Vec::new();
        for (i, v) in values.iter().enumerate() {
            let dl = distance(v, &left)?;
            let dr = distance(v, &right)?;
            if dl <= dr {
                left_members.push(i);
            } else {
                right_members.push(i);
            }
        }
        if left_members.is_empty() || right_members.is_empty() {
            break;
        }
        let new_left = cluster_center(values, &left_members, flavor)?;
        let new_right = cluster_center(values, &right_members, flavor)?;
        let moved = distance(&new_left, &left)? + distance(&new_right, &right)?;
        left = new_left;
        right = new_right;
        if moved < 1e-12 {
            break;
        }
    }
    if left.data == right.data {
        return Ok(None);
    }
    Ok(Some((left, right)))
}

fn seed_subset(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    if n <= SEED_SUBSET_CAP {
        (0..n).collect()
    } else {
        let mut pool: Vec<usize> = (0..n).collect();
        for k in 0..SEED_SUBSET_CAP {
            let j = rng.random_range(k..pool.len());
            pool.swap(k, j);
        }
        pool.truncate(SEED_SUBSET_CAP);
        pool
    }
}

/// Scalar fast path of the 2-means split; identical seeding and update rules
/// on plain numbers.
fn scalar_two_means(
    values: &[f64],
    flavor: ForestFlavor,
    rng: &mut impl Rng,
) -> Option<(f64, f64)> {
    let n = values.len();
    let subset = seed_subset(n, rng);
    let mut seed = (subset[0], subset[0]);
    let mut best = -1.0;
    for (si, &i) in subset.iter().enumerate() {
        for &j in subset.iter().skip(si + 1) {
            let d = (values[i] - values[j]).abs();
            if d > best {
                best = d;
                seed = (i, j);
            }
        }
    }
    if best <= 0.0 {
        let other = values.iter().position(|v| *v != values[0])?;
        seed = (0, other);
    }
    let mut left = values[seed.0];
    let mut right = values[seed.1];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        let mut members: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, v) in values.iter().enumerate() {
            let g = usize::from((v - left).abs() > (v - right).abs());
            sums[g] += v;
            counts[g] += 1;
            if flavor == ForestFlavor::Mrf {
                members[g].push(i);
            }
        }
        if counts[0] == 0 || counts[1] == 0 {
            break;
        }
        let (new_left, new_right) = match flavor {
            ForestFlavor::Frf | ForestFlavor::Rfwlcfr => {
                (sums[0] / counts[0] as f64, sums[1] / counts[1] as f64)
            }
            ForestFlavor::Mrf => (
                scalar_medoid(values, &members[0], sums[0] / counts[0] as f64),
                scalar_medoid(values, &members[1], sums[1] / counts[1] as f64),
            ),
        };
        let moved = (new_left - left).abs() + (new_right - right).abs();
        left = new_left;
        right = new_right;
        if moved < 1e-12 {
            break;
        }
    }
    if left == right {
        return None;
    }
    Some((left, right))
}

/// In one dimension the medoid of a cluster is its member closest to the
/// mean; ties break to the lowest index.
fn scalar_medoid(values: &[f64], members: &[usize], mean: f64) -> f64 {
    let mut best = members[0];
    let mut best_d = f64::MAX;
    for &i in members {
        let d = (values[i] - mean).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    values[best]
}

fn cluster_center(
    values: &[&MetricPoint],
    members: &[usize],
    flavor: ForestFlavor,
) -> Result<MetricPoint> {
    let pts: Vec<&MetricPoint> = members.iter().map(|&i| values[i]).collect();
    let sample = WeightedSample::equal_weights(pts)?;
    let report = match flavor {
        ForestFlavor::Frf | ForestFlavor::Rfwlcfr => frechet_mean(&sample)?,
        ForestFlavor::Mrf => frechet_medoid(&sample, None)?,
    };
    Ok(report.minimizer)
}

/// Voronoi assignment of node members under a split rule: equal distances go
/// left. `feature_of` maps a member to its predictor component.
pub(super) fn partition_members<'a>(
    members: &[usize],
    rule: &SplitRule,
    feature_of: impl Fn(usize) -> &'a MetricPoint,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut left = Vec::new();
    let mut right = Vec::new();
    if let (Some(lc), Some(rc)) = (
        scalar_value(&rule.left_center),
        scalar_value(&rule.right_center),
    ) {
        for &m in members {
            let x = feature_of(m).data[0];
            if (x - lc).abs() <= (x - rc).abs() {
                left.push(m);
            } else {
                right.push(m);
            }
        }
        return Ok((left, right));
    }
    for &m in members {
        let x = feature_of(m);
        let dl = distance(x, &rule.left_center)?;
        let dr = distance(x, &rule.right_center)?;
        if dl <= dr {
            left.push(m);
        } else {
            right.push(m);
        }
    }
    Ok((left, right))
}

/// A scored split: the CART gain plus the children and their variances (the
/// child variances seed the recursion, sparing a recomputation).
pub(super) struct ScoredSplit {
    pub gain: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub left_variance: f64,
    pub right_variance: f64,
}

/// CART criterion: decrease in empirical Fréchet variance from the parent to
/// the weighted children. `None` when a child is empty.
pub(super) fn cart_gain<'a>(
    members: &[usize],
    parent_variance: f64,
    rule: &SplitRule,
    feature_of: impl Fn(usize) -> &'a MetricPoint,
    impurity: &ResponseImpurity,
) -> Result<Option<ScoredSplit>> {
    let (left, right) = partition_members(members, rule, feature_of)?;
    if left.is_empty() || right.is_empty() {
        return Ok(None);
    }
    let total = members.len() as f64;
    let left_variance = impurity.variance(&left)?;
    let right_variance = impurity.variance(&right)?;
    let gain = parent_variance
        - (left.len() as f64 / total) * left_variance
        - (right.len() as f64 / total) * right_variance;
    Ok(Some(ScoredSplit {
        gain,
        left,
        right,
        left_variance,
        right_variance,
    }))
}
