//! Experiment configuration: the TOML schema behind the `coverage`
//! subcommand and the harness entry points.
//!
//! ```toml
//! seed = 42
//! threads = 0              # 0 = all cores
//! paper_scale = false
//!
//! [scenario]
//! kind = "euclidean_linear"   # euclidean_linear | euclidean_multivariate |
//!                             # sphere_great_circle | hyperboloid_meridian |
//!                             # spd_wishart_interp | quantile_grid_model
//! sigma = 0.866025403784      # scenario-specific parameters: sigma | q |
//!                             # kappa | dof + metric | points
//!
//! [experiment]
//! coverage_types = ["I"]      # subset of I, II, III, IV
//! methods = ["oob", "sc"]
//! alphas = [0.10, 0.05]
//! sample_sizes = [50, 200]
//! flavor = "rfwlcfr"          # frf | rfwlcfr | mrf
//! trees = 200
//! tune = true                 # otherwise set mtry and min_split
//! # mtry = 1
//! # min_split = 5
//! # replicates_m = 500        # override the scale defaults
//! # datasets_n = 200
//! # bootstrap_k = 200
//! # mse_test_draws = 1000
//! ```

use crate::balls::BallMethod;
use crate::error::{Error, Result};
use crate::forest::ForestFlavor;
use crate::sampling::ScenarioSpec;
use serde::Deserialize;

/// Monte Carlo scale knobs: `M` replicates/test draws, `N` data sets for the
/// conditional types, `K` bootstrap resamples.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentScale {
    pub replicates_m: usize,
    pub datasets_n: usize,
    pub bootstrap_k: usize,
}

impl ExperimentScale {
    /// Desk-scale defaults; a full experiment at paper scale multiplies the
    /// forest fits beyond what iterating on a workstation allows.
    pub fn desk() -> Self {
        ExperimentScale {
            replicates_m: 500,
            datasets_n: 200,
            bootstrap_k: 200,
        }
    }

    /// The scale used for the published tables.
    pub fn paper() -> Self {
        ExperimentScale {
            replicates_m: 1000,
            datasets_n: 1000,
            bootstrap_k: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageType {
    I,
    II,
    III,
    IV,
}

impl CoverageType {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(CoverageType::I),
            "II" | "2" => Ok(CoverageType::II),
            "III" | "3" => Ok(CoverageType::III),
            "IV" | "4" => Ok(CoverageType::IV),
            other => Err(Error::Config {
                key: "experiment.coverage_types".into(),
                message: format!("unknown coverage type `{other}`"),
            }),
        }
    }

    /// Fixes the predictor value (Types III and IV condition on `X = x0`).
    pub fn conditions_on_predictor(&self) -> bool {
        matches!(self, CoverageType::III | CoverageType::IV)
    }

    /// Fixes the data set (Types II and IV condition on one sample per
    /// replicate).
    pub fn conditions_on_sample(&self) -> bool {
        matches!(self, CoverageType::II | CoverageType::IV)
    }
}

impl std::fmt::Display for CoverageType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            CoverageType::I => "I",
            CoverageType::II => "II",
            CoverageType::III => "III",
            CoverageType::IV => "IV",
        };
        write!(f, "{tag}")
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    /// Optional MSE-comparison request (`[mse]` section).
    pub mse: Option<MseSection>,
    /// Optional radius/volume study request (`[radius_volume]` section).
    pub radius_volume: Option<RadiusVolumeSection>,
    pub coverage_types: Vec<CoverageType>,
    pub methods: Vec<BallMethod>,
    pub alphas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub flavor: ForestFlavor,
    pub trees: usize,
    pub tune: bool,
    pub mtry: Option<usize>,
    pub min_split: Option<usize>,
    pub scale: ExperimentScale,
    pub mse_test_draws: usize,
    pub seed: u64,
    pub threads: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    threads: Option<usize>,
    paper_scale: Option<bool>,
    scenario: ScenarioSpec,
    experiment: ExperimentSection,
    mse: Option<MseSection>,
    radius_volume: Option<RadiusVolumeSection>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct MseSection {
    pub replicates: usize,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct RadiusVolumeSection {
    pub qs: Vec<usize>,
    pub n: usize,
    pub alpha: f64,
    pub replicates: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    coverage_types: Vec<String>,
    methods: Option<Vec<String>>,
    alphas: Vec<f64>,
    sample_sizes: Vec<usize>,
    flavor: Option<String>,
    trees: Option<usize>,
    tune: Option<bool>,
    mtry: Option<usize>,
    min_split: Option<usize>,
    replicates_m: Option<usize>,
    datasets_n: Option<usize>,
    bootstrap_k: Option<usize>,
    mse_test_draws: Option<usize>,
}

impl ExperimentConfig {
    /// Parses and validates a TOML configuration. `paper_scale` forces the
    /// published `M`/`N`/`K` regardless of the file.
    pub fn from_toml(text: &str, paper_scale_override: bool) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config {
            key: "<config>".into(),
            message: e.to_string(),
        })?;
        let paper = paper_scale_override || file.paper_scale.unwrap_or(false);
        let mut scale = if paper {
            ExperimentScale::paper()
        } else {
            ExperimentScale::desk()
        };
        if !paper {
            if let Some(m) = file.experiment.replicates_m {
                scale.replicates_m = m;
            }
            if let Some(n) = file.experiment.datasets_n {
                scale.datasets_n = n;
            }
            if let Some(k) = file.experiment.bootstrap_k {
                scale.bootstrap_k = k;
            }
        }
        let coverage_types = file
            .experiment
            .coverage_types
            .iter()
            .map(|t| CoverageType::parse(t))
            .collect::<Result<Vec<_>>>()?;
        let methods = match &file.experiment.methods {
            None => vec![BallMethod::Oob],
            Some(list) => list
                .iter()
                .map(|m| match m.to_ascii_lowercase().as_str() {
                    "oob" => Ok(BallMethod::Oob),
                    "sc" | "split_conformal" | "split-conformal" => Ok(BallMethod::SplitConformal),
                    other => Err(Error::Config {
                        key: "experiment.methods".into(),
                        message: format!("unknown method `{other}`"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let flavor = match &file.experiment.flavor {
            None => ForestFlavor::Rfwlcfr,
            Some(text) => ForestFlavor::parse(text).map_err(|e| Error::Config {
                key: "experiment.flavor".into(),
                message: e.to_string(),
            })?,
        };
        let config = ExperimentConfig {
            scenario: file.scenario,
            mse: file.mse,
            radius_volume: file.radius_volume,
            coverage_types,
            methods,
            alphas: file.experiment.alphas,
            sample_sizes: file.experiment.sample_sizes,
            flavor,
            trees: file.experiment.trees.unwrap_or(200),
            tune: file.experiment.tune.unwrap_or(true),
            mtry: file.experiment.mtry,
            min_split: file.experiment.min_split,
            scale,
            mse_test_draws: file.experiment.mse_test_draws.unwrap_or(1000),
            seed: file.seed.unwrap_or(0),
            threads: file.threads.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Error::Config {
            key: key.into(),
            message,
        };
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(0.0 < *a && *a < 1.0)) {
            return Err(bad(
                "experiment.alphas",
                "alphas must be a nonempty list within (0, 1)".into(),
            ));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|n| *n < 4) {
            return Err(bad(
                "experiment.sample_sizes",
                "sample sizes must be >= 4".into(),
            ));
        }
        if self.coverage_types.is_empty() {
            return Err(bad(
                "experiment.coverage_types",
                "need at least one coverage type".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(bad("experiment.methods", "need at least one method".into()));
        }
        if self.trees < 1 {
            return Err(bad("experiment.trees", "need at least one tree".into()));
        }
        if self.scale.replicates_m < 1 || self.scale.datasets_n < 1 || self.scale.bootstrap_k < 1 {
            return Err(bad(
                "experiment.replicates_m",
                "scale parameters must be >= 1".into(),
            ));
        }
        if !self.tune && (self.mtry.is_none() || self.min_split.is_none()) {
            return Err(bad(
                "experiment.tune",
                "tune = false requires explicit mtry and min_split".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
[scenario]
kind = "euclidean_linear"
sigma = 0.8660254
[experiment]
coverage_types = ["I"]
methods = ["oob", "sc"]
alphas = [0.10]
sample_sizes = [50]
trees = 100
tune = false
mtry = 2
min_split = 5
replicates_m = 20
bootstrap_k = 10
"#;

    #[test]
    fn parses_a_minimal_config() {
        let config = ExperimentConfig::from_toml(SAMPLE, false).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.scale.replicates_m, 20);
        assert_eq!(config.methods.len(), 2);
    }

    #[test]
    fn paper_scale_overrides_m() {
        let config = ExperimentConfig::from_toml(SAMPLE, true).unwrap();
        assert_eq!(config.scale.replicates_m, 1000);
        assert_eq!(config.scale.bootstrap_k, 500);
    }

    #[test]
    fn rejects_bad_alpha_with_key_path() {
        let bad = SAMPLE.replace("alphas = [0.10]", "alphas = [1.5]");
        let err = ExperimentConfig::from_toml(&bad, false).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "experiment.alphas"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{SAMPLE}\nunknown_key = 1\n");
        assert!(ExperimentConfig::from_toml(&bad, false).is_err());
    }
}
