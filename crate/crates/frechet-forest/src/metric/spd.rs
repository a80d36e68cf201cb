//! Distances and matrix functions on symmetric positive definite matrices.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

use super::SYMMETRY_TOL;

/// Eigenvalues below `RELATIVE_EIGEN_FLOOR * lambda_max` are treated as an
/// invalid input rather than clamped.
const RELATIVE_EIGEN_FLOOR: f64 = 1e-12;

/// The three supported distances on SPD matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpdMetric {
    /// Affine-invariant distance, `sqrt(sum log^2 lambda_i(S1^-1 S2))`.
    AffineInvariant,
    /// Log-Cholesky distance of the Cholesky factors.
    LogCholesky,
    /// Log-Euclidean distance, `||log S1 - log S2||_F`.
    LogEuclidean,
}

impl SpdMetric {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "ai" => Ok(SpdMetric::AffineInvariant),
            "lc" => Ok(SpdMetric::LogCholesky),
            "le" => Ok(SpdMetric::LogEuclidean),
            other => Err(Error::Parse(format!("unknown SPD metric `{other}`"))),
        }
    }
}

impl fmt::Display for SpdMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            SpdMetric::AffineInvariant => "ai",
            SpdMetric::LogCholesky => "lc",
            SpdMetric::LogEuclidean => "le",
        };
        write!(f, "{tag}")
    }
}

pub(crate) fn to_matrix(data: &[f64], size: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(size, size, data)
}

pub(crate) fn to_buffer(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub(crate) fn validate_spd(data: &[f64], size: usize) -> Result<()> {
    let m = to_matrix(data, size);
    let mut max_abs: f64 = 0.0;
    for i in 0..size {
        for j in 0..size {
            max_abs = max_abs.max(m[(i, j)].abs());
        }
    }
    let tol = SYMMETRY_TOL * max_abs.max(1.0);
    for i in 0..size {
        for j in (i + 1)..size {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::InvalidPoint(format!(
                    "matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let eig = sym_eigenvalues(&m)?;
    let max_eig = eig.iter().cloned().fold(f64::MIN, f64::max);
    if eig.iter().any(|&l| l <= RELATIVE_EIGEN_FLOOR * max_eig.max(0.0)) || max_eig <= 0.0 {
        return Err(Error::InvalidPoint(
            "matrix is not positive definite".into(),
        ));
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn sym_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = symmetrize(m)
        .symmetric_eigen_try(1024)
        .ok_or(Error::NotPositiveDefinite)?;
    Ok((eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors))
}

fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(sym_eigen(m)?.0)
}

/// Applies `f` to the eigenvalues of a symmetric matrix. Eigenvalues below
/// the relative floor are rejected when `require_positive` is set.
fn matrix_function(
    m: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
    require_positive: bool,
) -> Result<DMatrix<f64>> {
    let (mut values, vectors) = sym_eigen(m)?;
    if require_positive {
        let max_eig = values.iter().cloned().fold(f64::MIN, f64::max);
        if max_eig <= 0.0
            || values
                .iter()
                .any(|&l| l <= RELATIVE_EIGEN_FLOOR * max_eig)
        {
            return Err(Error::NotPositiveDefinite);
        }
    }
    for v in &mut values {
        *v = f(*v);
    }
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values));
    Ok(&vectors * diag * vectors.transpose())
}

pub(crate) fn matrix_log(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    matrix_function(m, f64::ln, true)
}

pub(crate) fn matrix_exp_sym(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    matrix_function(m, f64::exp, false)
}

pub(crate) fn matrix_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    matrix_function(m, f64::sqrt, true)
}

pub(crate) fn matrix_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    matrix_function(m, |l| 1.0 / l.sqrt(), true)
}

/// Lower Cholesky factor with positive diagonal.
pub(crate) fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(symmetrize(m)).ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.l())
}

/// Log-Cholesky embedding: log of the diagonal of the Cholesky factor,
/// followed by the strictly lower triangular entries in row-major order.
/// An isometry onto `R^{q(q+1)/2}` with the Euclidean distance.
pub fn log_cholesky_embed(data: &[f64], size: usize) -> Result<Vec<f64>> {
    let l = cholesky_lower(&to_matrix(data, size))?;
    let mut out = Vec::with_capacity(size * (size + 1) / 2);
    for i in 0..size {
        out.push(l[(i, i)].ln());
    }
    for i in 0..size {
        for j in 0..i {
            out.push(l[(i, j)]);
        }
    }
    Ok(out)
}

/// Inverse of [`log_cholesky_embed`]: rebuilds `R R^T` from the embedding.
pub fn log_cholesky_unembed(embedding: &[f64], size: usize) -> Vec<f64> {
    let mut l = DMatrix::zeros(size, size);
    for i in 0..size {
        l[(i, i)] = embedding[i].exp();
    }
    let mut k = size;
    for i in 0..size {
        for j in 0..i {
            l[(i, j)] = embedding[k];
            k += 1;
        }
    }
    let s = &l * l.transpose();
    to_buffer(&s)
}

/// Closed-form 2x2 paths: the distances below are evaluated tens of millions
/// of times by the Monte Carlo validations, and the generic route allocates.
fn spd2_distance(a: &[f64], b: &[f64], metric: SpdMetric) -> Result<f64> {
    let det = |m: &[f64]| m[0] * m[3] - m[1] * m[2];
    let chol2 = |m: &[f64]| -> Result<(f64, f64, f64)> {
        if m[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let l11 = m[0].sqrt();
        let l21 = m[2] / l11;
        let rest = m[3] - l21 * l21;
        if rest <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok((l11, l21, rest.sqrt()))
    };
    match metric {
        SpdMetric::AffineInvariant => {
            // Eigenvalues of S1^-1 S2 from its trace and determinant.
            let det_a = det(a);
            let det_b = det(b);
            if det_a <= 0.0 || det_b <= 0.0 || a[0] <= 0.0 || b[0] <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            // S1^-1 = adj(S1)/det(S1); trace(S1^-1 S2) expanded directly.
            let trace = (a[3] * b[0] - a[1] * b[2] - a[2] * b[1] + a[0] * b[3]) / det_a;
            let prod = det_b / det_a;
            let disc = (trace * trace - 4.0 * prod).max(0.0).sqrt();
            let l1 = 0.5 * (trace + disc);
            let l2 = 0.5 * (trace - disc);
            if l1 <= 0.0 || l2 <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            Ok((l1.ln().powi(2) + l2.ln().powi(2)).sqrt())
        }
        SpdMetric::LogCholesky => {
            let (a11, a21, a22) = chol2(a)?;
            let (b11, b21, b22) = chol2(b)?;
            let d = (a21 - b21).powi(2)
                + (a11.ln() - b11.ln()).powi(2)
                + (a22.ln() - b22.ln()).powi(2);
            Ok(d.sqrt())
        }
        SpdMetric::LogEuclidean => {
            // log of a symmetric 2x2 via its closed-form eigensystem.
            let log2 = |m: &[f64]| -> Result<[f64; 3]> {
                let half_tr = 0.5 * (m[0] + m[3]);
                let disc = (0.25 * (m[0] - m[3]).powi(2) + m[1] * m[1]).max(0.0).sqrt();
                let (l1, l2) = (half_tr + disc, half_tr - disc);
                if l1 <= 0.0 || l2 <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
                if disc < 1e-300 {
                    return Ok([l1.ln(), 0.0, l2.ln()]);
                }
                // Eigenvector angle: (cos t, sin t) for lambda_1.
                let (c, s) = {
                    let vx = m[1];
                    let vy = l1 - m[0];
                    let norm = (vx * vx + vy * vy).sqrt();
                    if norm < 1e-300 {
                        (1.0, 0.0)
                    } else {
                        (vx / norm, vy / norm)
                    }
                };
                let (g1, g2) = (l1.ln(), l2.ln());
                Ok([
                    g1 * c * c + g2 * s * s,
                    (g1 - g2) * c * s,
                    g1 * s * s + g2 * c * c,
                ])
            };
            let la = log2(a)?;
            let lb = log2(b)?;
            let d = (la[0] - lb[0]).powi(2)
                + 2.0 * (la[1] - lb[1]).powi(2)
                + (la[2] - lb[2]).powi(2);
            Ok(d.sqrt())
        }
    }
}

pub(crate) fn spd_distance(a: &[f64], b: &[f64], size: usize, metric: SpdMetric) -> Result<f64> {
    if size == 2 {
        return spd2_distance(a, b, metric);
    }
    match metric {
        SpdMetric::AffineInvariant => {
            // Eigenvalues of S1^-1 S2 via the similar symmetric matrix
            // L^-1 S2 L^-T, with L the Cholesky factor of S1.
            let l = cholesky_lower(&to_matrix(a, size))?;
            let s2 = to_matrix(b, size);
            let li = l
                .clone()
                .try_inverse()
                .ok_or(Error::NotPositiveDefinite)?;
            let w = &li * s2 * li.transpose();
            let eig = sym_eigenvalues(&w)?;
            let mut sum = 0.0;
            for lambda in eig {
                if lambda <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
                let t = lambda.ln();
                sum += t * t;
            }
            Ok(sum.sqrt())
        }
        SpdMetric::LogCholesky => {
            let ea = log_cholesky_embed(a, size)?;
            let eb = log_cholesky_embed(b, size)?;
            Ok(super::euclidean_distance(&ea, &eb))
        }
        SpdMetric::LogEuclidean => {
            let la = matrix_log(&to_matrix(a, size))?;
            let lb = matrix_log(&to_matrix(b, size))?;
            Ok((la - lb).norm())
        }
    }
}

/// AI log map: `log_S(T) = S^{1/2} log(S^{-1/2} T S^{-1/2}) S^{1/2}`.
pub(crate) fn ai_log(base: &[f64], target: &[f64], size: usize) -> Result<Vec<f64>> {
    let s = to_matrix(base, size);
    let t = to_matrix(target, size);
    let s_half = matrix_sqrt(&s)?;
    let s_inv_half = matrix_inv_sqrt(&s)?;
    let inner = matrix_log(&(&s_inv_half * t * &s_inv_half))?;
    Ok(to_buffer(&(&s_half * inner * &s_half)))
}

/// AI exp map: `exp_S(V) = S^{1/2} exp(S^{-1/2} V S^{-1/2}) S^{1/2}`.
pub(crate) fn ai_exp(base: &[f64], tangent: &[f64], size: usize) -> Result<Vec<f64>> {
    let s = to_matrix(base, size);
    let v = to_matrix(tangent, size);
    let s_half = matrix_sqrt(&s)?;
    let s_inv_half = matrix_inv_sqrt(&s)?;
    let inner = matrix_exp_sym(&(&s_inv_half * v * &s_inv_half))?;
    Ok(to_buffer(&(&s_half * inner * &s_half)))
}

/// Riemannian norm of an AI tangent vector at `base`:
/// `||S^{-1/2} V S^{-1/2}||_F`, which equals the geodesic length of
/// `t -> exp_S(tV)` at `t = 1`.
pub(crate) fn ai_tangent_norm(base: &[f64], tangent: &[f64], size: usize) -> Result<f64> {
    let s_inv_half = matrix_inv_sqrt(&to_matrix(base, size))?;
    let v = to_matrix(tangent, size);
    Ok((&s_inv_half * v * &s_inv_half).norm())
}

/// Matrix log as a flat buffer (for the log-Euclidean closed forms).
pub fn spd_log(data: &[f64], size: usize) -> Result<Vec<f64>> {
    Ok(to_buffer(&matrix_log(&to_matrix(data, size))?))
}

/// Matrix exp of a symmetric flat buffer.
pub fn spd_exp(data: &[f64], size: usize) -> Result<Vec<f64>> {
    Ok(to_buffer(&matrix_exp_sym(&to_matrix(data, size))?))
}

trait SymmetricEigenExt {
    fn symmetric_eigen_try(self, max_iter: usize) -> Option<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>>;
}

impl SymmetricEigenExt for DMatrix<f64> {
    fn symmetric_eigen_try(
        self,
        max_iter: usize,
    ) -> Option<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>> {
        nalgebra::SymmetricEigen::try_new(self, f64::EPSILON, max_iter)
    }
}
