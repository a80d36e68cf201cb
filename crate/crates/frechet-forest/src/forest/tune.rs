//! Grid-search cross-validation of the minimal split size and `mtry`.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metric::distance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{fit_forest, ForestFlavor, Hyperparams};

/// Candidate values tried by grid search.
#[derive(Debug, Clone)]
pub struct TuningGrid {
    pub min_split: Vec<usize>,
    pub mtry: Vec<usize>,
    pub trees: usize,
    pub folds: usize,
}

impl TuningGrid {
    /// The grid used throughout the experiments: minimal split size from
    /// {1, 5, 10} and `mtry` over all feature counts.
    pub fn standard(p: usize, trees: usize) -> Self {
        TuningGrid {
            min_split: vec![1, 5, 10],
            mtry: (1..=p).collect(),
            trees,
            folds: 5,
        }
    }
}

/// Selects hyperparameters by k-fold cross-validation with the mean squared
/// distance as the error. Ties prefer the smaller minimal split size, then
/// the smaller `mtry`.
pub fn tune_hyperparameters(
    dataset: &Dataset,
    flavor: ForestFlavor,
    grid: &TuningGrid,
    seed: u64,
) -> Result<Hyperparams> {
    let n = dataset.n();
    if grid.folds < 2 || n < grid.folds {
        return Err(Error::InvalidParameter(
            "cross-validation needs folds >= 2 and n >= folds".into(),
        ));
    }
    if grid.min_split.is_empty() || grid.mtry.is_empty() {
        return Err(Error::InvalidParameter("empty tuning grid".into()));
    }
    // Deterministic shuffled fold assignment.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX); // fold stream, distinct from tree streams
    for k in 0..n.saturating_sub(1) {
        let j = rng.random_range(k..n);
        order.swap(k, j);
    }
    let folds: Vec<Vec<usize>> = (0..grid.folds)
        .map(|f| order.iter().copied().skip(f).step_by(grid.folds).collect())
        .collect();

    let mut best: Option<(f64, Hyperparams)> = None;
    for (ms_idx, &min_split) in grid.min_split.iter().enumerate() {
        for (mt_idx, &mtry) in grid.mtry.iter().enumerate() {
            let hyper = Hyperparams {
                trees: grid.trees,
                mtry,
                min_split,
            };
            let mut total = 0.0;
            let mut count = 0usize;
            for (f, fold) in folds.iter().enumerate() {
                let train: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|(g, _)| *g != f)
                    .flat_map(|(_, idx)| idx.iter().copied())
                    .collect();
                if train.is_empty() {
                    return Err(Error::InvalidParameter("empty training fold".into()));
                }
                let train_data = dataset.subset(&train);
                let combo_seed = seed
                    .wrapping_add(1 + f as u64)
                    .wrapping_add(1000 * (1 + ms_idx as u64))
                    .wrapping_add(1_000_000 * (1 + mt_idx as u64));
                let model = fit_forest(&train_data, flavor, hyper, combo_seed)?;
                for &i in fold {
                    let pred = model.predict(&dataset.predictors[i])?;
                    let d = distance(&dataset.responses[i], &pred)?;
                    total += d * d;
                    count += 1;
                }
            }
            let cv = total / count as f64;
            if best.as_ref().map(|(b, _)| cv < *b).unwrap_or(true) {
                best = Some((cv, hyper));
            }
        }
    }
    Ok(best.expect("nonempty grid").1)
}
