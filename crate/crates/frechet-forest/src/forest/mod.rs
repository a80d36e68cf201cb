//! Fréchet decision trees and the three forest flavors: mean-aggregated
//! trees (FRF), forest-weighted local constant regression (RFWLCFR), and the
//! medoid forest (MRF). Bootstrap masks are retained so each observation's
//! out-of-bag trees are known, which is what the prediction-ball layer
//! consumes.

mod split;
mod tune;

pub use tune::{tune_hyperparameters, TuningGrid};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::frechet::{
    frechet_mean, medoid_from_distances, FrechetSolveReport, PairwiseDistances, WeightedSample,
};
use crate::metric::{MetricPoint, SpaceDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use split::{cart_gain, two_means_split, ResponseImpurity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestFlavor {
    /// Trees predict leaf Fréchet means; the forest takes the Fréchet mean
    /// of the tree predictions.
    Frf,
    /// Leaf-occupancy weights feed a weighted Fréchet mean over the
    /// training responses.
    Rfwlcfr,
    /// As RFWLCFR, with Fréchet medoids replacing means in splitting and
    /// aggregation.
    Mrf,
}

impl ForestFlavor {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "frf" => Ok(ForestFlavor::Frf),
            "rfwlcfr" => Ok(ForestFlavor::Rfwlcfr),
            "mrf" => Ok(ForestFlavor::Mrf),
            other => Err(Error::Parse(format!("unknown forest flavor `{other}`"))),
        }
    }
}

impl std::fmt::Display for ForestFlavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            ForestFlavor::Frf => "frf",
            ForestFlavor::Rfwlcfr => "rfwlcfr",
            ForestFlavor::Mrf => "mrf",
        };
        write!(f, "{tag}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Number of trees `B`.
    pub trees: usize,
    /// Features drawn per split.
    pub mtry: usize,
    /// Minimal number of samples allowed in a leaf.
    pub min_split: usize,
}

impl Hyperparams {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.trees < 1 {
            return Err(Error::InvalidParameter("need at least one tree".into()));
        }
        if self.mtry < 1 || self.mtry > p {
            return Err(Error::InvalidParameter(format!("mtry must lie in 1..={p}")));
        }
        if self.min_split < 1 {
            return Err(Error::InvalidParameter("min split size must be >= 1".into()));
        }
        Ok(())
    }
}

/// A Voronoi split: a feature index and the two centers whose nearness
/// decides child membership (ties go left).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub left_center: MetricPoint,
    pub right_center: MetricPoint,
}

#[derive(Debug, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        rule: SplitRule,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Training indices, with bootstrap multiplicity.
        members: Vec<usize>,
        #[serde(skip)]
        mean: OnceLock<MetricPoint>,
    },
}

impl Clone for TreeNode {
    fn clone(&self) -> Self {
        match self {
            TreeNode::Internal { rule, left, right } => TreeNode::Internal {
                rule: rule.clone(),
                left: left.clone(),
                right: right.clone(),
            },
            TreeNode::Leaf { members, mean } => TreeNode::Leaf {
                members: members.clone(),
                mean: mean.clone(),
            },
        }
    }
}

impl TreeNode {
    /// The leaf a query point falls into.
    pub fn leaf<'a>(&'a self, x: &[MetricPoint]) -> Result<&'a TreeNode> {
        match self {
            TreeNode::Leaf { .. } => Ok(self),
            TreeNode::Internal { rule, left, right } => {
                let xj = &x[rule.feature];
                let dl = crate::metric::distance(xj, &rule.left_center)?;
                let dr = crate::metric::distance(xj, &rule.right_center)?;
                if dl <= dr {
                    left.leaf(x)
                } else {
                    right.leaf(x)
                }
            }
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        match self {
            TreeNode::Leaf { .. } => vec![self],
            TreeNode::Internal { left, right, .. } => {
                let mut out = left.leaves();
                out.extend(right.leaves());
                out
            }
        }
    }
}

/// Per-training-index weights generated by dropping a query point through
/// the forest; they sum to one whenever at least one tree contributes.
#[derive(Debug, Clone)]
pub struct ForestWeights(pub Vec<f64>);

/// A fitted forest. Owns the training data so that predictions, weights,
/// and out-of-bag bookkeeping need no external state.
#[derive(Debug, Clone)]
pub struct ForestModel {
    pub flavor: ForestFlavor,
    pub hyper: Hyperparams,
    pub seed: u64,
    pub dataset: Dataset,
    pub trees: Vec<TreeNode>,
    /// Per-tree multiset of drawn training indices (each of length `n`).
    pub masks: Vec<Vec<usize>>,
    /// Derived: `in_bag[b][i]` is the multiplicity of observation `i` in the
    /// resample of tree `b`.
    in_bag: Vec<Vec<u32>>,
    /// Cached response distances for the medoid flavor.
    response_distances: Option<PairwiseDistances>,
}

/// Grows `hyper.trees` trees on independent bootstrap resamples.
///
/// Each tree owns an RNG stream derived from `(seed, tree index)`, so the
/// model is reproducible and independent of scheduling.
pub fn fit_forest(
    dataset: &Dataset,
    flavor: ForestFlavor,
    hyper: Hyperparams,
    seed: u64,
) -> Result<ForestModel> {
    let n = dataset.n();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "forest fitting needs at least two observations".into(),
        ));
    }
    hyper.validate(dataset.p())?;
    let response_distances = match flavor {
        ForestFlavor::Mrf => Some(PairwiseDistances::compute(&dataset.responses)?),
        _ => None,
    };
    let grown: Vec<(Vec<usize>, TreeNode)> = (0..hyper.trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = tree_rng(seed, b);
            let mask: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let tree = grow_tree(
                dataset,
                &mask,
                flavor,
                hyper,
                response_distances.as_ref(),
                &mut rng,
            )?;
            Ok((mask, tree))
        })
        .collect::<Result<_>>()?;
    let mut masks = Vec::with_capacity(hyper.trees);
    let mut trees = Vec::with_capacity(hyper.trees);
    for (mask, tree) in grown {
        masks.push(mask);
        trees.push(tree);
    }
    let in_bag = in_bag_counts(&masks, n);
    Ok(ForestModel {
        flavor,
        hyper,
        seed,
        dataset: dataset.clone(),
        trees,
        masks,
        in_bag,
        response_distances,
    })
}

fn tree_rng(seed: u64, tree_index: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64 + 1);
    rng
}

fn in_bag_counts(masks: &[Vec<usize>], n: usize) -> Vec<Vec<u32>> {
    masks
        .iter()
        .map(|mask| {
            let mut counts = vec![0u32; n];
            for &i in mask {
                counts[i] += 1;
            }
            counts
        })
        .collect()
}

/// Grows one tree on the bootstrap sample given by `mask`.
pub fn grow_tree(
    dataset: &Dataset,
    mask: &[usize],
    flavor: ForestFlavor,
    hyper: Hyperparams,
    response_distances: Option<&PairwiseDistances>,
    rng: &mut impl Rng,
) -> Result<TreeNode> {
    let impurity = ResponseImpurity {
        flavor,
        responses: &dataset.responses,
        distances: response_distances,
    };
    let members: Vec<usize> = mask.to_vec();
    let variance = if members.len() < 2 * hyper.min_split || members.len() < 2 {
        0.0
    } else {
        impurity.variance(&members)?
    };
    grow_node(dataset, members, variance, flavor, hyper, &impurity, rng)
}

fn grow_node(
    dataset: &Dataset,
    members: Vec<usize>,
    parent_variance: f64,
    flavor: ForestFlavor,
    hyper: Hyperparams,
    impurity: &ResponseImpurity,
    rng: &mut impl Rng,
) -> Result<TreeNode> {
    let p = dataset.p();
    if members.len() < 2 * hyper.min_split || members.len() < 2 {
        return Ok(make_leaf(members));
    }
    // Feature subset drawn without replacement, in draw order.
    let mut pool: Vec<usize> = (0..p).collect();
    let mtry = hyper.mtry.min(p);
    for k in 0..mtry {
        let j = rng.random_range(k..pool.len());
        pool.swap(k, j);
    }
    let candidates: Vec<usize> = pool[..mtry].to_vec();

    let mut best: Option<(SplitRule, split::ScoredSplit)> = None;
    for &feature in &candidates {
        let values: Vec<&MetricPoint> = members
            .iter()
            .map(|&i| &dataset.predictors[i][feature])
            .collect();
        let Some((left_center, right_center)) = two_means_split(&values, flavor, rng)? else {
            continue;
        };
        let rule = SplitRule {
            feature,
            left_center,
            right_center,
        };
        let Some(scored) = cart_gain(
            &members,
            parent_variance,
            &rule,
            |i| &dataset.predictors[i][feature],
            impurity,
        )?
        else {
            continue;
        };
        if scored.left.len() < hyper.min_split || scored.right.len() < hyper.min_split {
            continue;
        }
        if best
            .as_ref()
            .map(|(_, b)| scored.gain > b.gain)
            .unwrap_or(true)
        {
            best = Some((rule, scored));
        }
    }
    match best {
        Some((rule, scored)) if scored.gain > 0.0 => {
            let left = grow_node(
                dataset,
                scored.left,
                scored.left_variance,
                flavor,
                hyper,
                impurity,
                rng,
            )?;
            let right = grow_node(
                dataset,
                scored.right,
                scored.right_variance,
                flavor,
                hyper,
                impurity,
                rng,
            )?;
            Ok(TreeNode::Internal {
                rule,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => Ok(make_leaf(members)),
    }
}

fn make_leaf(members: Vec<usize>) -> TreeNode {
    TreeNode::Leaf {
        members,
        mean: OnceLock::new(),
    }
}

impl ForestModel {
    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn predictor_space(&self) -> &SpaceDescriptor {
        &self.dataset.predictor_space
    }

    pub fn response_space(&self) -> &SpaceDescriptor {
        &self.dataset.response_space
    }

    pub fn response_distances(&self) -> Option<&PairwiseDistances> {
        self.response_distances.as_ref()
    }

    /// Rebuilds the derived caches after deserialization.
    pub(crate) fn restore(
        flavor: ForestFlavor,
        hyper: Hyperparams,
        seed: u64,
        dataset: Dataset,
        trees: Vec<TreeNode>,
        masks: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = dataset.n();
        let in_bag = in_bag_counts(&masks, n);
        let response_distances = match flavor {
            ForestFlavor::Mrf => Some(PairwiseDistances::compute(&dataset.responses)?),
            _ => None,
        };
        Ok(ForestModel {
            flavor,
            hyper,
            seed,
            dataset,
            trees,
            masks,
            in_bag,
            response_distances,
        })
    }

    fn check_query(&self, x: &[MetricPoint]) -> Result<()> {
        let comps = self.dataset.predictor_space.components();
        if x.len() != comps.len() {
            return Err(Error::DescriptorMismatch {
                expected: self.dataset.predictor_space.to_string(),
                got: format!("{} components", x.len()),
            });
        }
        for (xj, cj) in x.iter().zip(comps) {
            if &xj.descriptor != cj {
                return Err(Error::DescriptorMismatch {
                    expected: cj.to_string(),
                    got: xj.descriptor.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Leaf-occupancy weights: per tree, each in-leaf training occurrence
    /// contributes `1/|leaf|` (bootstrap multiplicity counts), and trees are
    /// averaged. `tree_subset` restricts to selected trees, which is how
    /// out-of-bag predictions zero out in-bag trees.
    pub fn forest_weights(
        &self,
        x: &[MetricPoint],
        tree_subset: Option<&[usize]>,
    ) -> Result<ForestWeights> {
        self.check_query(x)?;
        let all: Vec<usize>;
        let trees: &[usize] = match tree_subset {
            Some(t) => t,
            None => {
                all = (0..self.trees.len()).collect();
                &all
            }
        };
        if trees.is_empty() {
            return Err(Error::InvalidParameter("empty tree subset".into()));
        }
        let n = self.n();
        let mut weights = vec![0.0; n];
        for &b in trees {
            let leaf = self.trees[b].leaf(x)?;
            let TreeNode::Leaf { members, .. } = leaf else {
                unreachable!("leaf() returns leaves");
            };
            let size = members.len() as f64;
            for &i in members {
                weights[i] += 1.0 / size;
            }
        }
        let count = trees.len() as f64;
        for w in &mut weights {
            *w /= count;
        }
        Ok(ForestWeights(weights))
    }

    /// Fréchet mean of the leaf responses, computed lazily and cached.
    fn leaf_mean(&self, leaf: &TreeNode) -> Result<MetricPoint> {
        let TreeNode::Leaf { members, mean } = leaf else {
            return Err(Error::InvalidParameter("not a leaf".into()));
        };
        if let Some(m) = mean.get() {
            return Ok(m.clone());
        }
        let pts: Vec<&MetricPoint> = members.iter().map(|&i| &self.dataset.responses[i]).collect();
        let sample = WeightedSample::equal_weights(pts)?;
        let report = frechet_mean(&sample)?;
        let _ = mean.set(report.minimizer.clone());
        Ok(report.minimizer)
    }

    fn tree_prediction(&self, b: usize, x: &[MetricPoint]) -> Result<MetricPoint> {
        let leaf = self.trees[b].leaf(x)?;
        self.leaf_mean(leaf)
    }

    /// Forest prediction at `x`, dispatching on the flavor.
    pub fn predict(&self, x: &[MetricPoint]) -> Result<MetricPoint> {
        self.check_query(x)?;
        let all: Vec<usize> = (0..self.trees.len()).collect();
        self.predict_with_trees(x, &all)
    }

    fn predict_with_trees(&self, x: &[MetricPoint], trees: &[usize]) -> Result<MetricPoint> {
        if trees.is_empty() {
            return Err(Error::InvalidParameter("empty tree subset".into()));
        }
        match self.flavor {
            ForestFlavor::Frf => {
                let predictions: Vec<MetricPoint> = trees
                    .iter()
                    .map(|&b| self.tree_prediction(b, x))
                    .collect::<Result<_>>()?;
                let sample = WeightedSample::equal_weights(predictions.iter().collect())?;
                Ok(frechet_mean(&sample)?.minimizer)
            }
            ForestFlavor::Rfwlcfr => {
                let weights = self.forest_weights(x, Some(trees))?;
                self.weighted_mean_response(&weights.0)
            }
            ForestFlavor::Mrf => {
                let weights = self.forest_weights(x, Some(trees))?;
                let candidates: Vec<usize> = (0..self.n()).collect();
                self.weighted_medoid_response(&weights.0, &candidates)
            }
        }
    }

    fn weighted_mean_response(&self, weights: &[f64]) -> Result<MetricPoint> {
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for (i, &wi) in weights.iter().enumerate() {
            if wi > 0.0 {
                pts.push(&self.dataset.responses[i]);
                w.push(wi);
            }
        }
        let sample = WeightedSample::new(pts, w)?;
        Ok(frechet_mean(&sample)?.minimizer)
    }

    fn weighted_medoid_response(
        &self,
        weights: &[f64],
        candidates: &[usize],
    ) -> Result<MetricPoint> {
        let distances = self
            .response_distances
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("medoid forest needs distances".into()))?;
        let (idx, _) = medoid_from_distances(weights, candidates, distances)?;
        Ok(self.dataset.responses[idx].clone())
    }

    /// Trees for which observation `i` is out-of-bag.
    pub fn oob_trees(&self, i: usize) -> Vec<usize> {
        (0..self.trees.len())
            .filter(|&b| self.in_bag[b][i] == 0)
            .collect()
    }

    /// Fraction of trees for which `i` is out-of-bag.
    pub fn oob_fraction(&self, i: usize) -> f64 {
        self.oob_trees(i).len() as f64 / self.trees.len() as f64
    }

    /// Out-of-bag prediction of training observation `i`: only trees whose
    /// resample excludes `i` participate, and the medoid flavor also drops
    /// `Y_i` from the candidate set.
    pub fn oob_predict(&self, i: usize) -> Result<MetricPoint> {
        let trees = self.oob_trees(i);
        if trees.is_empty() {
            return Err(Error::NoOobTrees(i));
        }
        let x = &self.dataset.predictors[i];
        match self.flavor {
            ForestFlavor::Frf | ForestFlavor::Rfwlcfr => self.predict_with_trees(x, &trees),
            ForestFlavor::Mrf => {
                let weights = self.forest_weights(x, Some(&trees))?;
                let candidates: Vec<usize> = (0..self.n()).filter(|&j| j != i).collect();
                self.weighted_medoid_response(&weights.0, &candidates)
            }
        }
    }

    /// Mean squared out-of-bag error over the observations that have
    /// out-of-bag trees.
    pub fn oob_mse(&self) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..self.n() {
            match self.oob_predict(i) {
                Ok(pred) => {
                    let d = crate::metric::distance(&self.dataset.responses[i], &pred)?;
                    total += d * d;
                    count += 1;
                }
                Err(Error::NoOobTrees(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        if count == 0 {
            return Err(Error::AllObservationsDropped);
        }
        Ok(total / count as f64)
    }

    /// Prediction restricted to a tree subset (the FRF out-of-bag recipe
    /// uses this path). Exposed for structural tests.
    pub fn predict_with_tree_subset(
        &self,
        x: &[MetricPoint],
        trees: &[usize],
    ) -> Result<MetricPoint> {
        self.check_query(x)?;
        self.predict_with_trees(x, trees)
    }

    /// Walks every tree and verifies the structural invariants: each
    /// bootstrap draw lands in exactly one leaf (multiset equality with the
    /// mask), and every accepted split has a strictly positive variance
    /// decrease when recomputed from the definitions. Returns the smallest
    /// recomputed gain across all internal nodes.
    pub fn verify_structure(&self) -> Result<f64> {
        let impurity = ResponseImpurity {
            flavor: self.flavor,
            responses: &self.dataset.responses,
            distances: self.response_distances.as_ref(),
        };
        let mut min_gain = f64::MAX;
        for (tree, mask) in self.trees.iter().zip(&self.masks) {
            let mut leaf_members: Vec<usize> = Vec::new();
            for leaf in tree.leaves() {
                let TreeNode::Leaf { members, .. } = leaf else {
                    continue;
                };
                leaf_members.extend_from_slice(members);
            }
            let mut sorted_mask = mask.clone();
            sorted_mask.sort_unstable();
            leaf_members.sort_unstable();
            if leaf_members != sorted_mask {
                return Err(Error::InvalidParameter(
                    "partition property violated: leaves do not tile the bootstrap sample".into(),
                ));
            }
            min_gain = min_gain.min(self.verify_node(tree, mask.clone(), &impurity)?);
        }
        Ok(min_gain)
    }

    fn verify_node(
        &self,
        node: &TreeNode,
        members: Vec<usize>,
        impurity: &ResponseImpurity,
    ) -> Result<f64> {
        match node {
            TreeNode::Leaf { .. } => Ok(f64::MAX),
            TreeNode::Internal { rule, left, right } => {
                let parent = impurity.variance(&members)?;
                let (lm, rm) = split::partition_members(&members, rule, |i| {
                    &self.dataset.predictors[i][rule.feature]
                })?;
                let total = members.len() as f64;
                let gain = parent
                    - (lm.len() as f64 / total) * impurity.variance(&lm)?
                    - (rm.len() as f64 / total) * impurity.variance(&rm)?;
                let l = self.verify_node(left, lm, impurity)?;
                let r = self.verify_node(right, rm, impurity)?;
                Ok(gain.min(l).min(r))
            }
        }
    }

    /// Regrows the selected trees from a different seed while keeping every
    /// bootstrap mask fixed. Out-of-bag predictions of an observation must
    /// be invariant to regrowing the trees that contain it.
    pub fn with_regrown_trees(&self, trees_to_regrow: &[usize], new_seed: u64) -> Result<Self> {
        let mut clone = self.clone();
        for &b in trees_to_regrow {
            let mut rng = tree_rng(new_seed, b);
            // Burn the bootstrap draws so node randomness differs from the
            // original stream position.
            for _ in 0..self.n() {
                let _: usize = rng.random_range(0..self.n());
            }
            clone.trees[b] = grow_tree(
                &self.dataset,
                &self.masks[b],
                self.flavor,
                self.hyper,
                self.response_distances.as_ref(),
                &mut rng,
            )?;
        }
        Ok(clone)
    }

    /// Leaf Fréchet mean report for diagnostics.
    pub fn tree_leaf_report(&self, b: usize, x: &[MetricPoint]) -> Result<FrechetSolveReport> {
        let leaf = self.trees[b].leaf(x)?;
        let TreeNode::Leaf { members, .. } = leaf else {
            unreachable!()
        };
        let pts: Vec<&MetricPoint> = members.iter().map(|&i| &self.dataset.responses[i]).collect();
        let sample = WeightedSample::equal_weights(pts)?;
        frechet_mean(&sample)
    }
}

pub mod persist;
