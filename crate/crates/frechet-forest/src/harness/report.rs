//! CSV writers for the experiment outputs.
//!
//! Every CSV starts with a metadata comment line carrying the tool version,
//! the seed, and a hash of the configuration, followed by the header. All
//! numeric formatting uses shortest round-trip representations, so a fixed
//! seed reproduces byte-identical files regardless of the parallelism
//! degree. Wall-clock timings are deliberately kept out of these files and
//! written to a `timings.csv` sidecar instead, which is excluded from the
//! determinism guarantee.

use super::compare::{MseCell, RadiusVolumeCell};
use super::coverage::CoverageCell;
use super::spheroid_study::SpheroidStudyRow;
use crate::dataset::format_value;
use crate::error::Result;
use std::io::Write;

pub const SUMMARY_HEADER: &str =
    "scenario,coverage_type,n,alpha,method,coverage,sd,radius_mean,radius_sd,mse_mean,mse_sd";

#[derive(Debug, Clone)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl RunMetadata {
    pub fn new(seed: u64, config_bytes: &[u8]) -> Self {
        use sha2::Digest;
        let digest = sha2::Sha256::digest(config_bytes);
        let hash: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: hash,
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# frechet-forest v{} seed={} config={}",
            self.version, self.seed, self.config_hash
        )
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

pub fn write_summary(
    out: &mut impl Write,
    meta: &RunMetadata,
    cells: &[CoverageCell],
) -> Result<()> {
    writeln!(out, "{}", meta.comment_line())?;
    writeln!(out, "{SUMMARY_HEADER}")?;
    for cell in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},,",
            cell.scenario,
            cell.coverage_type,
            cell.n,
            format_value(cell.alpha),
            cell.method,
            format_value(cell.coverage),
            fmt_opt(cell.sd),
            format_value(cell.radius_mean),
            format_value(cell.radius_sd),
        )?;
    }
    Ok(())
}

pub fn write_replicates(
    out: &mut impl Write,
    meta: &RunMetadata,
    cells: &[CoverageCell],
) -> Result<()> {
    writeln!(out, "{}", meta.comment_line())?;
    writeln!(
        out,
        "scenario,coverage_type,n,alpha,method,replicate,coverage,radius"
    )?;
    for cell in cells {
        let Some(per_replicate) = &cell.per_replicate else {
            continue;
        };
        for (r, (coverage, radius)) in per_replicate.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                cell.scenario,
                cell.coverage_type,
                cell.n,
                format_value(cell.alpha),
                cell.method,
                r,
                format_value(*coverage),
                format_value(*radius),
            )?;
        }
    }
    Ok(())
}

pub fn write_mse(out: &mut impl Write, meta: &RunMetadata, cells: &[MseCell]) -> Result<()> {
    writeln!(out, "{}", meta.comment_line())?;
    writeln!(out, "{SUMMARY_HEADER}")?;
    for cell in cells {
        writeln!(
            out,
            "{},,{},,{},,,,,{},{}",
            cell.scenario,
            cell.n,
            cell.method,
            format_value(cell.mse_mean),
            format_value(cell.mse_sd),
        )?;
    }
    Ok(())
}

pub fn write_radius_volume(
    out: &mut impl Write,
    meta: &RunMetadata,
    cells: &[RadiusVolumeCell],
) -> Result<()> {
    writeln!(out, "{}", meta.comment_line())?;
    writeln!(
        out,
        "q,n,alpha,radius_rel_err_median,radius_rel_err_q1,radius_rel_err_q3,volume_rel_err_median"
    )?;
    for cell in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            cell.q,
            cell.n,
            format_value(cell.alpha),
            format_value(cell.radius_rel_err_median),
            format_value(cell.radius_rel_err_q1),
            format_value(cell.radius_rel_err_q3),
            format_value(cell.volume_rel_err_median),
        )?;
    }
    Ok(())
}

pub fn write_spheroid_study(
    out: &mut impl Write,
    meta: &RunMetadata,
    rows: &[SpheroidStudyRow],
) -> Result<()> {
    writeln!(out, "{}", meta.comment_line())?;
    writeln!(
        out,
        "a,mse,mean_area,coverage,delta_mse_pct,delta_area_pct,p_mse,p_area"
    )?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_value(row.a),
            format_value(row.mse),
            format_value(row.mean_area),
            format_value(row.coverage),
            format_value(row.delta_mse_pct),
            format_value(row.delta_area_pct),
            fmt_opt(row.p_mse),
            fmt_opt(row.p_area),
        )?;
    }
    Ok(())
}

/// Timing sidecar; excluded from the determinism guarantee by construction.
pub fn write_timings(
    out: &mut impl Write,
    meta: &RunMetadata,
    rows: &[(String, f64)],
) -> Result<()> {
    writeln!(out, "{}", meta.comment_line())?;
    writeln!(out, "cell,seconds")?;
    for (cell, seconds) in rows {
        writeln!(out, "{cell},{seconds:.3}")?;
    }
    Ok(())
}
