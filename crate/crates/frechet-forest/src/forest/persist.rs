//! Versioned model persistence.
//!
//! The file is JSON with an explicit `format_version`, carrying the
//! hyperparameters, bootstrap masks, split rules (feature index plus both
//! center coordinate buffers), leaf index lists, and the training data the
//! prediction recipes need. Numbers round-trip exactly, so a reloaded model
//! reproduces bit-identical predictions.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::{ForestFlavor, ForestModel, Hyperparams, TreeNode};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    flavor: ForestFlavor,
    hyper: Hyperparams,
    seed: u64,
    dataset: Dataset,
    masks: Vec<Vec<usize>>,
    trees: Vec<TreeNode>,
}

pub fn save_model(model: &ForestModel, out: impl Write) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        flavor: model.flavor,
        hyper: model.hyper,
        seed: model.seed,
        dataset: model.dataset.clone(),
        masks: model.masks.clone(),
        trees: model.trees.clone(),
    };
    serde_json::to_writer(out, &file).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_model(input: impl Read) -> Result<ForestModel> {
    let file: ModelFile =
        serde_json::from_reader(input).map_err(|e| Error::Parse(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported model format version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    file.dataset.validate()?;
    ForestModel::restore(
        file.flavor,
        file.hyper,
        file.seed,
        file.dataset,
        file.trees,
        file.masks,
    )
}
