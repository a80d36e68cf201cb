//! Metric spaces, point validation, distances, and geometry helpers.
//!
//! Supported spaces: Euclidean vectors, the unit sphere, the unit hyperboloid
//! (Minkowski model), SPD matrices under the affine-invariant, log-Cholesky,
//! and log-Euclidean distances, discretized quantile functions under the
//! 2-Wasserstein distance, and spheroids of revolution with their intrinsic
//! geodesic distance. Predictor spaces are products of these.

mod spd;
mod spheroid;
mod tangent;

pub use spd::{log_cholesky_embed, log_cholesky_unembed, spd_exp, spd_log, SpdMetric};
pub use spheroid::{
    induced_sphere_distance, spheroid_geodesic_distance, spheroid_map, spheroid_unmap,
    InducedBallRegion,
};

/// Points at geodesic distance `radius` from `center` on the spheroid, one
/// per equispaced initial direction.
pub fn spheroid_boundary_points(
    center: &[f64],
    a: f64,
    c: f64,
    radius: f64,
    count: usize,
) -> crate::error::Result<Vec<Vec<f64>>> {
    spheroid::spheroid_ball_boundary(center, a, c, radius, count)
}
pub use tangent::{exp_map, log_map, tangent_basis, tangent_norm};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Tolerance for the unit-norm constraints on the sphere and hyperboloid.
pub const POINT_TOL: f64 = 1e-9;
/// Tolerance for SPD symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Identifies a metric space and the interpretation of a point's flat buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceDescriptor {
    /// `R^dim` with the Euclidean distance.
    Euclidean { dim: usize },
    /// Unit sphere embedded in `R^ambient` with the arc-length distance.
    Sphere { ambient: usize },
    /// Unit hyperboloid in `R^ambient` with the Minkowski arccosh distance.
    Hyperboloid { ambient: usize },
    /// Symmetric positive definite `size x size` matrices, stored row-major.
    Spd { size: usize, metric: SpdMetric },
    /// Quantile function evaluated on the equispaced grid `u_i = (i - 1/2)/points`.
    QuantileGrid { points: usize },
    /// Spheroid of revolution `(x/a)^2 + (y/a)^2 + (z/c)^2 = 1` in `R^3`.
    Spheroid { a: f64, c: f64 },
    /// Product of component spaces; used for predictor spaces.
    Product(Vec<SpaceDescriptor>),
}

impl SpaceDescriptor {
    /// Length of the flat coordinate buffer for a point of this space.
    pub fn flat_len(&self) -> usize {
        match self {
            SpaceDescriptor::Euclidean { dim } => *dim,
            SpaceDescriptor::Sphere { ambient } | SpaceDescriptor::Hyperboloid { ambient } => {
                *ambient
            }
            SpaceDescriptor::Spd { size, .. } => size * size,
            SpaceDescriptor::QuantileGrid { points } => *points,
            SpaceDescriptor::Spheroid { .. } => 3,
            SpaceDescriptor::Product(parts) => parts.iter().map(|p| p.flat_len()).sum(),
        }
    }

    /// Component descriptors: the parts of a product, or the space itself.
    pub fn components(&self) -> &[SpaceDescriptor] {
        match self {
            SpaceDescriptor::Product(parts) => parts,
            _ => std::slice::from_ref(self),
        }
    }

    /// Validates structural invariants of the descriptor itself.
    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceDescriptor::Euclidean { dim } if *dim >= 1 => Ok(()),
            SpaceDescriptor::Sphere { ambient } | SpaceDescriptor::Hyperboloid { ambient }
                if *ambient >= 2 =>
            {
                Ok(())
            }
            SpaceDescriptor::Spd { size, .. } if *size >= 1 => Ok(()),
            SpaceDescriptor::QuantileGrid { points } if *points >= 1 => Ok(()),
            SpaceDescriptor::Spheroid { a, c } => {
                if *a > 0.0 && *c > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "spheroid semi-axes must be positive".into(),
                    ))
                }
            }
            SpaceDescriptor::Product(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidParameter(
                        "product space needs at least one component".into(),
                    ));
                }
                for part in parts {
                    if matches!(part, SpaceDescriptor::Product(_)) {
                        return Err(Error::InvalidParameter(
                            "product spaces cannot be nested".into(),
                        ));
                    }
                    part.validate()?;
                }
                Ok(())
            }
            _ => Err(Error::InvalidParameter(format!(
                "degenerate dimension in descriptor `{self}`"
            ))),
        }
    }

    /// Parses the canonical textual form, e.g. `sphere:3`, `spd:2:ai`,
    /// `spheroid:0.5:1`, `product[euclidean:1,euclidean:1]`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(inner) = text
            .strip_prefix("product[")
            .and_then(|rest| rest.strip_suffix(']'))
        {
            let parts = split_top_level(inner)
                .into_iter()
                .map(|p| SpaceDescriptor::parse(&p))
                .collect::<Result<Vec<_>>>()?;
            let desc = SpaceDescriptor::Product(parts);
            desc.validate()?;
            return Ok(desc);
        }
        let fields: Vec<&str> = text.split(':').collect();
        let bad = || Error::Parse(format!("unrecognized space descriptor `{text}`"));
        let desc = match fields.as_slice() {
            ["euclidean", d] => SpaceDescriptor::Euclidean {
                dim: d.parse().map_err(|_| bad())?,
            },
            ["sphere", d] => SpaceDescriptor::Sphere {
                ambient: d.parse().map_err(|_| bad())?,
            },
            ["hyperboloid", d] => SpaceDescriptor::Hyperboloid {
                ambient: d.parse().map_err(|_| bad())?,
            },
            ["spd", d, m] => SpaceDescriptor::Spd {
                size: d.parse().map_err(|_| bad())?,
                metric: SpdMetric::parse(m)?,
            },
            ["quantile", m] => SpaceDescriptor::QuantileGrid {
                points: m.parse().map_err(|_| bad())?,
            },
            ["spheroid", a, c] => SpaceDescriptor::Spheroid {
                a: a.parse().map_err(|_| bad())?,
                c: c.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        desc.validate()?;
        Ok(desc)
    }
}

fn split_top_level(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '[' => {
                depth += 1;
                current.push(ch);
            }
            ']' => {
                depth = depth.saturating_sub(1);
                current.push(ch);
            }
            ',' if depth == 0 => {
                parts.push(std::mem::take(&mut current));
            }
            _ => current.push(ch),
        }
    }
    if !current.is_empty() {
        parts.push(current);
    }
    parts
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceDescriptor::Euclidean { dim } => write!(f, "euclidean:{dim}"),
            SpaceDescriptor::Sphere { ambient } => write!(f, "sphere:{ambient}"),
            SpaceDescriptor::Hyperboloid { ambient } => write!(f, "hyperboloid:{ambient}"),
            SpaceDescriptor::Spd { size, metric } => write!(f, "spd:{size}:{metric}"),
            SpaceDescriptor::QuantileGrid { points } => write!(f, "quantile:{points}"),
            SpaceDescriptor::Spheroid { a, c } => write!(f, "spheroid:{a}:{c}"),
            SpaceDescriptor::Product(parts) => {
                write!(f, "product[")?;
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{part}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// A point in one of the supported metric spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub descriptor: SpaceDescriptor,
    pub data: Vec<f64>,
}

impl MetricPoint {
    pub fn new(descriptor: SpaceDescriptor, data: Vec<f64>) -> Result<Self> {
        let point = MetricPoint { descriptor, data };
        point.validate()?;
        Ok(point)
    }

    /// Builds a point without validating invariants. Intended for interior
    /// use where the construction guarantees validity.
    pub fn new_unchecked(descriptor: SpaceDescriptor, data: Vec<f64>) -> Self {
        MetricPoint { descriptor, data }
    }

    pub fn euclidean(data: Vec<f64>) -> Self {
        let dim = data.len();
        MetricPoint {
            descriptor: SpaceDescriptor::Euclidean { dim },
            data,
        }
    }

    pub fn scalar(value: f64) -> Self {
        MetricPoint::euclidean(vec![value])
    }

    /// Checks the space invariants of the coordinate buffer.
    pub fn validate(&self) -> Result<()> {
        self.descriptor.validate()?;
        if self.data.len() != self.descriptor.flat_len() {
            return Err(Error::InvalidPoint(format!(
                "expected {} coordinates for `{}`, got {}",
                self.descriptor.flat_len(),
                self.descriptor,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        match &self.descriptor {
            SpaceDescriptor::Euclidean { .. } => Ok(()),
            SpaceDescriptor::Sphere { .. } => {
                let norm = norm2(&self.data);
                if (norm - 1.0).abs() <= POINT_TOL {
                    Ok(())
                } else {
                    Err(Error::InvalidPoint(format!(
                        "sphere point has norm {norm}, expected 1"
                    )))
                }
            }
            SpaceDescriptor::Hyperboloid { .. } => {
                let q = minkowski_dot(&self.data, &self.data);
                if (q + 1.0).abs() <= POINT_TOL && self.data[0] > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidPoint(format!(
                        "hyperboloid point has Minkowski square {q}, expected -1 with positive first coordinate"
                    )))
                }
            }
            SpaceDescriptor::Spd { size, .. } => spd::validate_spd(&self.data, *size),
            SpaceDescriptor::QuantileGrid { .. } => {
                if self.data.windows(2).all(|w| w[0] <= w[1]) {
                    Ok(())
                } else {
                    Err(Error::InvalidPoint(
                        "quantile grid values must be nondecreasing".into(),
                    ))
                }
            }
            SpaceDescriptor::Spheroid { a, c } => {
                let [x, y, z] = [self.data[0], self.data[1], self.data[2]];
                let g = (x / a).powi(2) + (y / a).powi(2) + (z / c).powi(2);
                if (g - 1.0).abs() <= 1e-8 {
                    Ok(())
                } else {
                    Err(Error::InvalidPoint(format!(
                        "point is off the spheroid surface by {:e}",
                        (g - 1.0).abs()
                    )))
                }
            }
            SpaceDescriptor::Product(_) => Err(Error::Unsupported(
                "points of product spaces are stored componentwise".into(),
            )),
        }
    }
}

/// Distance between two points of the same space.
///
/// Arguments of `arccos`/`arccosh` are clamped to their valid domains to
/// absorb rounding at the scale of machine precision.
pub fn distance(a: &MetricPoint, b: &MetricPoint) -> Result<f64> {
    if a.descriptor != b.descriptor {
        return Err(Error::DescriptorMismatch {
            expected: a.descriptor.to_string(),
            got: b.descriptor.to_string(),
        });
    }
    if a.data == b.data {
        // Exact zero for coincident points; the arccos/arccosh forms would
        // otherwise amplify last-bit noise to ~1e-8.
        return Ok(0.0);
    }
    match &a.descriptor {
        SpaceDescriptor::Euclidean { .. } => Ok(euclidean_distance(&a.data, &b.data)),
        SpaceDescriptor::Sphere { .. } => {
            let c = dot(&a.data, &b.data).clamp(-1.0, 1.0);
            Ok(c.acos())
        }
        SpaceDescriptor::Hyperboloid { .. } => {
            let c = (-minkowski_dot(&a.data, &b.data)).max(1.0);
            Ok(c.acosh())
        }
        SpaceDescriptor::Spd { size, metric } => spd::spd_distance(&a.data, &b.data, *size, *metric),
        SpaceDescriptor::QuantileGrid { points } => {
            let sum: f64 = a
                .data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            Ok((sum / *points as f64).sqrt())
        }
        SpaceDescriptor::Spheroid { a: sa, c: sc } => {
            spheroid::spheroid_geodesic_distance(&a.data, &b.data, *sa, *sc)
        }
        SpaceDescriptor::Product(_) => Err(Error::Unsupported(
            "distance on product spaces is taken componentwise".into(),
        )),
    }
}

pub(crate) fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minkowski pseudo-inner product `-x_1 y_1 + sum_{i>1} x_i y_i`.
pub fn minkowski_dot(a: &[f64], b: &[f64]) -> f64 {
    -a[0] * b[0] + dot(&a[1..], &b[1..])
}

#[cfg(test)]
mod tests;
