//! Random generators: seeded streams, von Mises-Fisher and hyperboloid von
//! Mises-Fisher samplers, Wishart matrices, generic random points, and the
//! synthetic regression scenarios.

mod scenario;
pub mod special;

pub use scenario::{Scenario, ScenarioSpec};

use crate::error::{Error, Result};
use crate::metric::{MetricPoint, SpaceDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, ChiSquared, Distribution, StandardNormal};

/// Factory of independent, reproducible random streams.
///
/// The same `(seed, stream)` pair always reproduces the same draws, and
/// distinct streams of one seed are statistically independent, so parallel
/// consumers can each own a stream without coordinating.
#[derive(Debug, Clone, Copy)]
pub struct RngFactory {
    seed: u64,
}

impl RngFactory {
    pub fn new(seed: u64) -> Self {
        RngFactory { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, id: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

/// Uniform unit vector in `R^dim`.
pub(crate) fn uniform_direction(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Draws from the von Mises-Fisher distribution on the unit sphere in
/// `R^p` with mean direction `mu` and concentration `kappa >= 0`.
///
/// Uses the tangent-normal decomposition with Ulrich's rejection sampler for
/// the cosine component; `kappa = 0` gives the uniform distribution.
pub fn sample_vmf_raw(mu: &[f64], kappa: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let p = mu.len();
    if p < 2 {
        return Err(Error::InvalidParameter("vMF needs ambient dimension >= 2".into()));
    }
    if kappa < 0.0 {
        return Err(Error::InvalidParameter("vMF concentration must be >= 0".into()));
    }
    if kappa == 0.0 {
        return Ok(uniform_direction(p, rng));
    }
    let pm1 = (p - 1) as f64;
    let b = (-2.0 * kappa + (4.0 * kappa * kappa + pm1 * pm1).sqrt()) / pm1;
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + pm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(pm1 / 2.0, pm1 / 2.0)
        .map_err(|e| Error::InvalidParameter(format!("beta envelope: {e}")))?;
    let w = loop {
        let z: f64 = beta.sample(rng);
        let u: f64 = rng.random::<f64>();
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        if kappa * w + pm1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    // Uniform direction orthogonal to mu.
    let v = loop {
        let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let along: f64 = v.iter().zip(mu).map(|(a, m)| a * m).sum();
        for (vi, m) in v.iter_mut().zip(mu) {
            *vi -= along * m;
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            for vi in &mut v {
                *vi /= n;
            }
            break v;
        }
    };
    let sin_part = (1.0 - w * w).max(0.0).sqrt();
    let mut y: Vec<f64> = mu
        .iter()
        .zip(&v)
        .map(|(m, vi)| w * m + sin_part * vi)
        .collect();
    let n = y.iter().map(|x| x * x).sum::<f64>().sqrt();
    for yi in &mut y {
        *yi /= n;
    }
    Ok(y)
}

/// [`sample_vmf_raw`] wrapped in validated metric points.
pub fn sample_vmf(mu: &MetricPoint, kappa: f64, rng: &mut impl Rng) -> Result<MetricPoint> {
    match &mu.descriptor {
        SpaceDescriptor::Sphere { .. } => Ok(MetricPoint::new_unchecked(
            mu.descriptor.clone(),
            sample_vmf_raw(&mu.data, kappa, rng)?,
        )),
        other => Err(Error::InvalidParameter(format!(
            "vMF location must be a sphere point, got `{other}`"
        ))),
    }
}

/// Radial draw for the hyperboloid von Mises-Fisher at the pole: density
/// proportional to `sinh^{d-1}(u) exp(-kappa cosh u)` on `(0, inf)`.
///
/// In the substitution `t = cosh(u) - 1` the density becomes
/// `t^nu (t+2)^nu exp(-kappa t)` with `nu = (d-2)/2`; for `d = 2` that is an
/// exact exponential, otherwise a gamma envelope is rejected against.
fn sample_hvmf_radial(d: usize, kappa: f64, rng: &mut impl Rng) -> f64 {
    let nu = (d as f64 - 2.0) / 2.0;
    let t = if d == 2 {
        let u: f64 = rng.random::<f64>();
        -(1.0 - u).ln() / kappa
    } else if nu < 0.0 {
        // Gamma(nu+1, kappa) envelope; acceptance ratio ((t+2)/2)^nu <= 1.
        let g = rand_distr::Gamma::new(nu + 1.0, 1.0 / kappa).expect("gamma envelope");
        loop {
            let t: f64 = g.sample(rng);
            let accept = ((t + 2.0) / 2.0).powf(nu);
            if rng.random::<f64>() <= accept {
                break t;
            }
        }
    } else {
        // Gamma(nu+1, kappa/2) envelope with the analytic ratio bound.
        let lambda = kappa / 2.0;
        let g = rand_distr::Gamma::new(nu + 1.0, 1.0 / lambda).expect("gamma envelope");
        let t_star = (nu / (kappa - lambda) - 2.0).max(0.0);
        let log_m = nu * (t_star + 2.0).ln() - (kappa - lambda) * t_star;
        loop {
            let t: f64 = g.sample(rng);
            let log_ratio = nu * (t + 2.0).ln() - (kappa - lambda) * t - log_m;
            if rng.random::<f64>().ln() <= log_ratio {
                break t;
            }
        }
    };
    (1.0 + t + (t * (t + 2.0)).max(0.0).sqrt()).ln()
}

/// Draws from the hyperboloid von Mises-Fisher distribution with location
/// `mu` on the unit hyperboloid and concentration `kappa > 0`.
///
/// Sampling happens at the pole `(1, 0, ..., 0)` in hyperbolic-spherical
/// coordinates (radial coordinate times a uniform spherical direction) and
/// the draw is moved to `mu` by the hyperbolic transformation fixing the
/// Minkowski product.
pub fn sample_hvmf(mu: &MetricPoint, kappa: f64, rng: &mut impl Rng) -> Result<MetricPoint> {
    let ambient = match &mu.descriptor {
        SpaceDescriptor::Hyperboloid { ambient } => *ambient,
        other => {
            return Err(Error::InvalidParameter(format!(
                "HvMF location must be a hyperboloid point, got `{other}`"
            )))
        }
    };
    if kappa <= 0.0 {
        // The uniform limit is improper on the non-compact hyperboloid.
        return Err(Error::InvalidParameter(
            "HvMF concentration must be positive".into(),
        ));
    }
    let d = ambient - 1;
    let u = sample_hvmf_radial(d, kappa, rng);
    let dir = uniform_direction(d, rng);
    let mut x = Vec::with_capacity(ambient);
    x.push(u.cosh());
    let su = u.sinh();
    x.extend(dir.iter().map(|v| su * v));
    // Hyperbolic translation taking the pole to mu.
    let spatial = &mu.data[1..];
    let sn: f64 = spatial.iter().map(|v| v * v).sum::<f64>().sqrt();
    let out = if sn < 1e-15 {
        x
    } else {
        let ms: Vec<f64> = spatial.iter().map(|v| v / sn).collect();
        let cosh_r = mu.data[0];
        let sinh_r = sn;
        let x_r = x[0];
        let xs = &x[1..];
        let proj: f64 = ms.iter().zip(xs).map(|(m, v)| m * v).sum();
        let mut out = Vec::with_capacity(ambient);
        out.push(cosh_r * x_r + sinh_r * proj);
        for i in 0..d {
            out.push(sinh_r * ms[i] * x_r + xs[i] + (cosh_r - 1.0) * ms[i] * proj);
        }
        out
    };
    // Project back to the sheet to absorb rounding.
    let spatial_sq: f64 = out[1..].iter().map(|v| v * v).sum();
    let mut out = out;
    out[0] = (1.0 + spatial_sq).sqrt();
    Ok(MetricPoint::new_unchecked(mu.descriptor.clone(), out))
}

/// Wishart draw via the Bartlett decomposition: a lower-triangular factor
/// with chi distributed diagonal and standard normal subdiagonal, conjugated
/// by the Cholesky factor of the scale matrix.
pub fn sample_wishart(
    dof: f64,
    scale: &MetricPoint,
    rng: &mut impl Rng,
) -> Result<MetricPoint> {
    let (size, _) = match &scale.descriptor {
        SpaceDescriptor::Spd { size, metric } => (*size, *metric),
        other => {
            return Err(Error::InvalidParameter(format!(
                "Wishart scale must be an SPD matrix, got `{other}`"
            )))
        }
    };
    let buf = sample_wishart_raw(dof, &scale.data, size, rng)?;
    Ok(MetricPoint::new_unchecked(scale.descriptor.clone(), buf))
}

pub(crate) fn sample_wishart_raw(
    dof: f64,
    scale: &[f64],
    size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if dof < size as f64 {
        return Err(Error::InvalidParameter(format!(
            "Wishart degrees of freedom {dof} below matrix size {size}"
        )));
    }
    let sigma = nalgebra::DMatrix::from_row_slice(size, size, scale);
    let l = nalgebra::Cholesky::new(sigma)
        .ok_or(Error::NotPositiveDefinite)?
        .l();
    let mut w = nalgebra::DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        let chi = ChiSquared::new(dof - i as f64)
            .map_err(|e| Error::InvalidParameter(format!("chi-squared: {e}")))?;
        w[(i, i)] = chi.sample(rng).max(0.0).sqrt();
        for j in 0..i {
            w[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let a = &l * w;
    let s = &a * a.transpose();
    let mut out = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            out.push(s[(i, j)]);
        }
    }
    Ok(out)
}

/// A well-conditioned random valid point of the given space; used by the
/// geometry validation suites and tests.
pub fn random_point(descriptor: &SpaceDescriptor, rng: &mut impl Rng) -> Result<MetricPoint> {
    let point = match descriptor {
        SpaceDescriptor::Euclidean { dim } => MetricPoint::new_unchecked(
            descriptor.clone(),
            (0..*dim).map(|_| StandardNormal.sample(rng)).collect(),
        ),
        SpaceDescriptor::Sphere { ambient } => {
            MetricPoint::new_unchecked(descriptor.clone(), uniform_direction(*ambient, rng))
        }
        SpaceDescriptor::Hyperboloid { ambient } => {
            let spatial: Vec<f64> = (0..ambient - 1)
                .map(|_| 0.7 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let sq: f64 = spatial.iter().map(|v| v * v).sum();
            let mut data = vec![(1.0 + sq).sqrt()];
            data.extend(spatial);
            MetricPoint::new_unchecked(descriptor.clone(), data)
        }
        SpaceDescriptor::Spd { size, .. } => {
            // exp of a random symmetric matrix keeps the spectrum in a
            // moderate range, so triangle-inequality slacks stay numeric.
            let q = *size;
            let mut sym = nalgebra::DMatrix::<f64>::zeros(q, q);
            for i in 0..q {
                for j in 0..=i {
                    let v: f64 = rng.sample::<f64, _>(StandardNormal) * 0.6;
                    sym[(i, j)] = v;
                    sym[(j, i)] = v;
                }
            }
            let eig = nalgebra::SymmetricEigen::new(sym);
            let vals = eig.eigenvalues.map(|l| l.clamp(-1.5, 1.5).exp());
            let m = &eig.eigenvectors
                * nalgebra::DMatrix::from_diagonal(&vals)
                * eig.eigenvectors.transpose();
            let mut buf = Vec::with_capacity(q * q);
            for i in 0..q {
                for j in 0..q {
                    // Exact symmetry for the validator.
                    buf.push(0.5 * (m[(i, j)] + m[(j, i)]));
                }
            }
            MetricPoint::new_unchecked(descriptor.clone(), buf)
        }
        SpaceDescriptor::QuantileGrid { points } => {
            let mut vals: Vec<f64> = (0..*points).map(|_| StandardNormal.sample(rng)).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            MetricPoint::new_unchecked(descriptor.clone(), vals)
        }
        SpaceDescriptor::Spheroid { a, c } => {
            let dir = uniform_direction(3, rng);
            MetricPoint::new_unchecked(
                descriptor.clone(),
                crate::metric::spheroid_map(&dir, *a, *c)?,
            )
        }
        SpaceDescriptor::Product(_) => {
            return Err(Error::Unsupported(
                "draw product-space points componentwise".into(),
            ))
        }
    };
    point.validate()?;
    Ok(point)
}

#[cfg(test)]
mod tests;
