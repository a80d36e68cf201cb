//! The Monte Carlo experiment engine: coverage studies of the four types,
//! bootstrap standard deviations, out-of-bag versus split-conformal
//! comparisons, closed-form-mean validation, and the spheroid anisotropy
//! study.

mod compare;
mod config;
mod coverage;
mod report;
mod spheroid_study;
pub mod stats;
pub mod validate;

pub use compare::{compare_mse, radius_volume_study, MseCell, RadiusVolumeCell};
pub use config::{CoverageType, ExperimentConfig, ExperimentScale, MseSection, RadiusVolumeSection};
pub use coverage::{estimate_coverage, CoverageCell};
pub use report::{RunMetadata, SUMMARY_HEADER};
pub use spheroid_study::{spheroid_anisotropy_study, SpheroidStudyConfig, SpheroidStudyRow};

use crate::error::Result;
use std::fs;
use std::path::Path;

/// Runs every requested coverage cell of a configuration and writes the
/// summary, per-replicate, and timing CSVs into `out_dir`.
///
/// The thread pool honors `config.threads` (0 = all cores); results are
/// byte-identical for any thread count because every replicate owns
/// preassigned RNG streams and reductions run in index order.
pub fn run_experiment(
    config: &ExperimentConfig,
    config_bytes: &[u8],
    out_dir: &Path,
) -> Result<Vec<CoverageCell>> {
    let meta = RunMetadata::new(config.seed, config_bytes);
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| crate::error::Error::InvalidParameter(format!("thread pool: {e}")))?;

    let mut all_cells = Vec::new();
    let mut timings = Vec::new();
    pool.install(|| -> Result<()> {
        let mut cell_index = 0u64;
        for &ctype in &config.coverage_types {
            let mut cells_of_type = Vec::new();
            for &n in &config.sample_sizes {
                let cells = estimate_coverage(config, ctype, n, cell_index)?;
                cell_index += 1;
                for cell in &cells {
                    timings.push((
                        format!("type_{}_n{}_a{}_{}", ctype, n, cell.alpha, cell.method),
                        cell.seconds,
                    ));
                }
                cells_of_type.extend(cells);
            }
            let path = out_dir.join(format!("type_{}_summary.csv", ctype.to_string().to_lowercase()));
            let mut file = fs::File::create(&path)?;
            report::write_summary(&mut file, &meta, &cells_of_type)?;
            if cells_of_type.iter().any(|c| c.per_replicate.is_some()) {
                let path =
                    out_dir.join(format!("type_{}_replicates.csv", ctype.to_string().to_lowercase()));
                let mut file = fs::File::create(&path)?;
                report::write_replicates(&mut file, &meta, &cells_of_type)?;
            }
            all_cells.extend(cells_of_type);
        }
        Ok(())
    })?;
    let mut timing_file = fs::File::create(out_dir.join("timings.csv"))?;
    report::write_timings(&mut timing_file, &meta, &timings)?;
    Ok(all_cells)
}

/// MSE comparison entry point used by the CLI: writes `mse_summary.csv`.
pub fn run_mse_comparison(
    config: &ExperimentConfig,
    config_bytes: &[u8],
    replicates: usize,
    out_dir: &Path,
) -> Result<Vec<MseCell>> {
    let meta = RunMetadata::new(config.seed, config_bytes);
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| crate::error::Error::InvalidParameter(format!("thread pool: {e}")))?;
    let mut cells = Vec::new();
    pool.install(|| -> Result<()> {
        for (ni, &n) in config.sample_sizes.iter().enumerate() {
            cells.extend(compare_mse(config, n, replicates, 88_000 + ni as u64)?);
        }
        Ok(())
    })?;
    let mut file = fs::File::create(out_dir.join("mse_summary.csv"))?;
    report::write_mse(&mut file, &meta, &cells)?;
    Ok(cells)
}

/// Radius/volume study entry point: writes `radius_volume.csv`.
pub fn run_radius_volume(
    config: &ExperimentConfig,
    config_bytes: &[u8],
    qs: &[usize],
    n: usize,
    alpha: f64,
    replicates: usize,
    out_dir: &Path,
) -> Result<Vec<RadiusVolumeCell>> {
    let meta = RunMetadata::new(config.seed, config_bytes);
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| crate::error::Error::InvalidParameter(format!("thread pool: {e}")))?;
    let cells = pool.install(|| radius_volume_study(config, qs, n, alpha, replicates))?;
    let mut file = fs::File::create(out_dir.join("radius_volume.csv"))?;
    report::write_radius_volume(&mut file, &meta, &cells)?;
    Ok(cells)
}

/// Spheroid study entry point: writes `spheroid_study.csv`.
pub fn run_spheroid_study(
    study: &SpheroidStudyConfig,
    config_bytes: &[u8],
    out_dir: &Path,
) -> Result<Vec<SpheroidStudyRow>> {
    let meta = RunMetadata::new(study.seed, config_bytes);
    fs::create_dir_all(out_dir)?;
    let rows = spheroid_anisotropy_study(study)?;
    let mut file = fs::File::create(out_dir.join("spheroid_study.csv"))?;
    report::write_spheroid_study(&mut file, &meta, &rows)?;
    Ok(rows)
}
