//! Exponential and logarithmic maps used by intrinsic mean solvers and by
//! ball boundary sampling.
//!
//! Tangent vectors are flat buffers. For the sphere and hyperboloid they are
//! ambient vectors satisfying the tangency condition at the base point. For
//! SPD matrices under the affine-invariant and log-Euclidean metrics they are
//! symmetric matrices (full row-major buffers); under log-Cholesky they are
//! displacements in the isometric embedding of length `q(q+1)/2`.

use super::spd::{self, SpdMetric};
use super::{dot, minkowski_dot, norm2, MetricPoint, SpaceDescriptor};
use crate::error::{Error, Result};

const TANGENCY_TOL: f64 = 1e-9;

/// Maps `target` to the tangent space at `base`. The intrinsic norm of the
/// result equals `distance(base, target)`.
pub fn log_map(base: &MetricPoint, target: &MetricPoint) -> Result<Vec<f64>> {
    if base.descriptor != target.descriptor {
        return Err(Error::DescriptorMismatch {
            expected: base.descriptor.to_string(),
            got: target.descriptor.to_string(),
        });
    }
    match &base.descriptor {
        SpaceDescriptor::Euclidean { .. } | SpaceDescriptor::QuantileGrid { .. } => {
            Ok(base.data.iter().zip(&target.data).map(|(b, t)| t - b).collect())
        }
        SpaceDescriptor::Sphere { ambient } => {
            let c = dot(&base.data, &target.data).clamp(-1.0, 1.0);
            let theta = c.acos();
            let residual: Vec<f64> = target
                .data
                .iter()
                .zip(&base.data)
                .map(|(t, b)| t - c * b)
                .collect();
            let n = norm2(&residual);
            if n < 1e-14 {
                if theta > std::f64::consts::PI / 2.0 {
                    // Opposite pole: every great circle through the pair is a
                    // geodesic, so the direction is undefined.
                    return Err(Error::AntipodalPair);
                }
                return Ok(vec![0.0; *ambient]);
            }
            Ok(residual.iter().map(|r| theta * r / n).collect())
        }
        SpaceDescriptor::Hyperboloid { ambient } => {
            let c = (-minkowski_dot(&base.data, &target.data)).max(1.0);
            let theta = c.acosh();
            let residual: Vec<f64> = target
                .data
                .iter()
                .zip(&base.data)
                .map(|(t, b)| t - c * b)
                .collect();
            let n = minkowski_dot(&residual, &residual).max(0.0).sqrt();
            if n < 1e-14 {
                return Ok(vec![0.0; *ambient]);
            }
            Ok(residual.iter().map(|r| theta * r / n).collect())
        }
        SpaceDescriptor::Spd { size, metric } => match metric {
            SpdMetric::AffineInvariant => spd::ai_log(&base.data, &target.data, *size),
            SpdMetric::LogEuclidean => {
                let lb = spd::spd_log(&base.data, *size)?;
                let lt = spd::spd_log(&target.data, *size)?;
                Ok(lt.iter().zip(&lb).map(|(t, b)| t - b).collect())
            }
            SpdMetric::LogCholesky => {
                let eb = spd::log_cholesky_embed(&base.data, *size)?;
                let et = spd::log_cholesky_embed(&target.data, *size)?;
                Ok(et.iter().zip(&eb).map(|(t, b)| t - b).collect())
            }
        },
        other => Err(Error::Unsupported(format!(
            "log map is not defined for `{other}`"
        ))),
    }
}

/// Follows the geodesic from `base` with initial velocity `tangent` for unit
/// time. Inverse of [`log_map`] away from cut loci.
pub fn exp_map(base: &MetricPoint, tangent: &[f64]) -> Result<MetricPoint> {
    match &base.descriptor {
        SpaceDescriptor::Euclidean { .. } => Ok(MetricPoint::new_unchecked(
            base.descriptor.clone(),
            base.data.iter().zip(tangent).map(|(b, t)| b + t).collect(),
        )),
        SpaceDescriptor::QuantileGrid { .. } => {
            let data: Vec<f64> = base.data.iter().zip(tangent).map(|(b, t)| b + t).collect();
            MetricPoint::new(base.descriptor.clone(), data)
        }
        SpaceDescriptor::Sphere { .. } => {
            let t_dot = dot(&base.data, tangent);
            if t_dot.abs() > TANGENCY_TOL * (1.0 + norm2(tangent)) {
                return Err(Error::InvalidParameter(format!(
                    "tangent is not orthogonal to the base point ({t_dot:e})"
                )));
            }
            let theta = norm2(tangent);
            if theta < 1e-300 {
                return Ok(base.clone());
            }
            let (s, c) = (theta.sin(), theta.cos());
            let data = base
                .data
                .iter()
                .zip(tangent)
                .map(|(b, t)| c * b + s * t / theta)
                .collect();
            Ok(renormalize_sphere(base.descriptor.clone(), data))
        }
        SpaceDescriptor::Hyperboloid { .. } => {
            let t_dot = minkowski_dot(&base.data, tangent);
            if t_dot.abs() > TANGENCY_TOL * (1.0 + norm2(tangent)) {
                return Err(Error::InvalidParameter(format!(
                    "tangent is not Minkowski-orthogonal to the base point ({t_dot:e})"
                )));
            }
            let sq = minkowski_dot(tangent, tangent).max(0.0);
            let theta = sq.sqrt();
            if theta < 1e-300 {
                return Ok(base.clone());
            }
            let (s, c) = (theta.sinh(), theta.cosh());
            let data: Vec<f64> = base
                .data
                .iter()
                .zip(tangent)
                .map(|(b, t)| c * b + s * t / theta)
                .collect();
            Ok(renormalize_hyperboloid(base.descriptor.clone(), data))
        }
        SpaceDescriptor::Spd { size, metric } => match metric {
            SpdMetric::AffineInvariant => Ok(MetricPoint::new_unchecked(
                base.descriptor.clone(),
                spd::ai_exp(&base.data, tangent, *size)?,
            )),
            SpdMetric::LogEuclidean => {
                let lb = spd::spd_log(&base.data, *size)?;
                let sum: Vec<f64> = lb.iter().zip(tangent).map(|(b, t)| b + t).collect();
                Ok(MetricPoint::new_unchecked(
                    base.descriptor.clone(),
                    spd::spd_exp(&sum, *size)?,
                ))
            }
            SpdMetric::LogCholesky => {
                let eb = spd::log_cholesky_embed(&base.data, *size)?;
                let sum: Vec<f64> = eb.iter().zip(tangent).map(|(b, t)| b + t).collect();
                Ok(MetricPoint::new_unchecked(
                    base.descriptor.clone(),
                    spd::log_cholesky_unembed(&sum, *size),
                ))
            }
        },
        other => Err(Error::Unsupported(format!(
            "exp map is not defined for `{other}`"
        ))),
    }
}

/// Intrinsic norm of a tangent vector at `base`; equals the length of the
/// geodesic `t -> exp(base, t v)` over `t` in `[0, 1]`.
pub fn tangent_norm(base: &MetricPoint, tangent: &[f64]) -> Result<f64> {
    match &base.descriptor {
        SpaceDescriptor::Euclidean { .. } | SpaceDescriptor::Sphere { .. } => Ok(norm2(tangent)),
        SpaceDescriptor::QuantileGrid { points } => {
            Ok((dot(tangent, tangent) / *points as f64).sqrt())
        }
        SpaceDescriptor::Hyperboloid { .. } => {
            Ok(minkowski_dot(tangent, tangent).max(0.0).sqrt())
        }
        SpaceDescriptor::Spd { size, metric } => match metric {
            SpdMetric::AffineInvariant => spd::ai_tangent_norm(&base.data, tangent, *size),
            SpdMetric::LogEuclidean | SpdMetric::LogCholesky => Ok(norm2(tangent)),
        },
        other => Err(Error::Unsupported(format!(
            "tangent norm is not defined for `{other}`"
        ))),
    }
}

/// An orthonormal basis of the tangent space at `base`, in the inner product
/// matching [`tangent_norm`]. Used to draw directions for boundary sampling
/// and random perturbations.
pub fn tangent_basis(base: &MetricPoint) -> Result<Vec<Vec<f64>>> {
    match &base.descriptor {
        SpaceDescriptor::Euclidean { dim } => Ok(standard_basis(*dim)),
        SpaceDescriptor::QuantileGrid { points } => {
            let scale = (*points as f64).sqrt();
            Ok(standard_basis(*points)
                .into_iter()
                .map(|mut e| {
                    for v in &mut e {
                        *v *= scale;
                    }
                    e
                })
                .collect())
        }
        SpaceDescriptor::Sphere { ambient } => {
            // Gram-Schmidt of the standard basis against the base point.
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for e in standard_basis(*ambient) {
                let mut v = e;
                let c = dot(&v, &base.data);
                for (vi, bi) in v.iter_mut().zip(&base.data) {
                    *vi -= c * bi;
                }
                for prev in &basis {
                    let c = dot(&v, prev);
                    for (vi, pi) in v.iter_mut().zip(prev) {
                        *vi -= c * pi;
                    }
                }
                let n = norm2(&v);
                if n > 1e-8 {
                    for vi in &mut v {
                        *vi /= n;
                    }
                    basis.push(v);
                }
                if basis.len() == ambient - 1 {
                    break;
                }
            }
            Ok(basis)
        }
        SpaceDescriptor::Hyperboloid { ambient } => {
            // Minkowski Gram-Schmidt; tangent vectors at a hyperboloid point
            // are spacelike, so the induced inner product is positive.
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for e in standard_basis(*ambient) {
                let mut v = e;
                let c = minkowski_dot(&v, &base.data);
                // Projection removes the component along the (timelike) base:
                // v <- v + <v, base> base, since <base, base> = -1.
                for (vi, bi) in v.iter_mut().zip(&base.data) {
                    *vi += c * bi;
                }
                for prev in &basis {
                    let c = minkowski_dot(&v, prev);
                    for (vi, pi) in v.iter_mut().zip(prev) {
                        *vi -= c * pi;
                    }
                }
                let n = minkowski_dot(&v, &v).max(0.0).sqrt();
                if n > 1e-8 {
                    for vi in &mut v {
                        *vi /= n;
                    }
                    basis.push(v);
                }
                if basis.len() == ambient - 1 {
                    break;
                }
            }
            Ok(basis)
        }
        SpaceDescriptor::Spd { size, metric } => {
            let q = *size;
            let mut basis = Vec::new();
            match metric {
                SpdMetric::LogCholesky => Ok(standard_basis(q * (q + 1) / 2)),
                _ => {
                    // Orthonormal symmetric matrices in the Frobenius inner
                    // product; for AI they are pushed to the base point by
                    // congruence with S^{1/2}.
                    let s_half = if *metric == SpdMetric::AffineInvariant {
                        Some(spd::matrix_sqrt(&spd::to_matrix(&base.data, q))?)
                    } else {
                        None
                    };
                    let sqrt_half = std::f64::consts::FRAC_1_SQRT_2;
                    for i in 0..q {
                        for j in i..q {
                            let mut w = vec![0.0; q * q];
                            if i == j {
                                w[i * q + i] = 1.0;
                            } else {
                                w[i * q + j] = sqrt_half;
                                w[j * q + i] = sqrt_half;
                            }
                            if let Some(sh) = &s_half {
                                let wm = spd::to_matrix(&w, q);
                                w = spd::to_buffer(&(sh * wm * sh));
                            }
                            basis.push(w);
                        }
                    }
                    Ok(basis)
                }
            }
        }
        other => Err(Error::Unsupported(format!(
            "tangent basis is not defined for `{other}`"
        ))),
    }
}

fn standard_basis(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Projects drifted coordinates back onto the unit sphere.
fn renormalize_sphere(descriptor: SpaceDescriptor, mut data: Vec<f64>) -> MetricPoint {
    let n = norm2(&data);
    if n > 0.0 {
        for v in &mut data {
            *v /= n;
        }
    }
    MetricPoint::new_unchecked(descriptor, data)
}

/// Projects drifted coordinates back onto the hyperboloid sheet.
fn renormalize_hyperboloid(descriptor: SpaceDescriptor, mut data: Vec<f64>) -> MetricPoint {
    let spatial: f64 = data[1..].iter().map(|v| v * v).sum();
    data[0] = (1.0 + spatial).sqrt();
    MetricPoint::new_unchecked(descriptor, data)
}
