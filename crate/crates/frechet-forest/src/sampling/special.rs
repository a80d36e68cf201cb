//! Modified Bessel functions of the second kind and the quadrature helpers
//! used to cross-check normalizing constants.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma;

/// `K_nu(x)` for half-integer or integer `nu >= 0` and `x > 0`.
///
/// Half-integer orders use the closed finite series. Integer orders are
/// evaluated from the integral representation
/// `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt`
/// by adaptive quadrature of the exponentially-scaled integrand; cross-checked
/// against the ascending series in the unit tests.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::InvalidParameter("bessel_k needs x > 0".into()));
    }
    if nu < 0.0 {
        return bessel_k(-nu, x);
    }
    let twice = 2.0 * nu;
    if (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::Unsupported(
            "bessel_k supports integer and half-integer orders".into(),
        ));
    }
    let twice = twice.round() as i64;
    if twice % 2 == 1 {
        // K_{m+1/2}(x) = sqrt(pi/(2x)) e^{-x} sum_k (m+k)!/(k!(m-k)!) (2x)^{-k}
        let m = (twice - 1) / 2;
        let mut sum = 0.0;
        for k in 0..=m {
            let c = factorial(m + k) / (factorial(k) * factorial(m - k));
            sum += c / (2.0 * x).powi(k as i32);
        }
        Ok((std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * sum)
    } else {
        Ok(bessel_k_integer(twice / 2, x))
    }
}

fn factorial(n: i64) -> f64 {
    gamma(n as f64 + 1.0)
}

fn bessel_k_integer(n: i64, x: f64) -> f64 {
    // Scaled integrand exp(-x (cosh t - 1)) cosh(n t); the upper limit is
    // where the exponent term alone reaches e^-700.
    let nf = n as f64;
    let f = move |t: f64| (-x * (t.cosh() - 1.0) + nf * t).exp() * 0.5
        + (-x * (t.cosh() - 1.0) - nf * t).exp() * 0.5;
    let mut hi: f64 = 1.0;
    while x * (hi.cosh() - 1.0) - nf * hi < 700.0 && hi < 710.0 {
        hi += 0.5;
    }
    // Rough magnitude first, so the adaptive tolerance is relative.
    let mut rough = 0.0;
    let coarse = 64;
    for k in 0..coarse {
        rough += f((k as f64 + 0.5) * hi / coarse as f64) * hi / coarse as f64;
    }
    let scaled = integrate(&f, 0.0, hi, 1e-13 * rough.max(1e-300));
    scaled * (-x).exp()
}

/// Ascending series for integer-order `K_n` (valid for moderate `x`); kept
/// as an independent cross-check of the quadrature route.
#[cfg(test)]
pub(crate) fn bessel_k_integer_series(n: usize, x: f64) -> f64 {
    use statrs::function::gamma::digamma;
    let half_x = x / 2.0;
    let quarter_sq = half_x * half_x;
    // Finite part: (1/2)(x/2)^{-n} sum_{k=0}^{n-1} ((n-k-1)!/k!)(-x^2/4)^k
    let mut finite = 0.0;
    for k in 0..n {
        finite += factorial((n - k - 1) as i64) / factorial(k as i64) * (-quarter_sq).powi(k as i32);
    }
    finite *= 0.5 * half_x.powi(-(n as i32));
    // Log part: (-1)^{n+1} ln(x/2) I_n(x)
    let mut i_n = 0.0;
    let mut term = half_x.powi(n as i32) / factorial(n as i64);
    for k in 0..200 {
        if k > 0 {
            term *= quarter_sq / (k as f64 * (n as f64 + k as f64));
        }
        i_n += term;
        if term.abs() < 1e-18 * i_n.abs() {
            break;
        }
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let log_part = -sign * half_x.ln() * i_n;
    // Psi series: (-1)^n (1/2)(x/2)^n sum_k [psi(k+1)+psi(n+k+1)] (x^2/4)^k/(k!(n+k)!)
    let mut psi_sum = 0.0;
    let mut pow = 1.0;
    for k in 0..200 {
        let term = (digamma(k as f64 + 1.0) + digamma((n + k) as f64 + 1.0)) * pow
            / (factorial(k as i64) * factorial((n + k) as i64));
        psi_sum += term;
        pow *= quarter_sq;
        if term.abs() < 1e-18 * psi_sum.abs().max(1e-300) && k > 3 {
            break;
        }
    }
    let psi_part = sign * 0.5 * half_x.powi(n as i32) * psi_sum;
    finite + log_part + psi_part
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if hi <= lo {
        return 0.0;
    }
    let m = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo), f(m), f(hi));
    let whole = simpson(lo, hi, fa, fm, fb);
    recurse(f, lo, hi, fa, fm, fb, whole, tol, 40)
}

/// Reciprocal HvMF normalizing constant `1/c_d(kappa)` via the Bessel-K
/// closed form.
pub fn hvmf_norm_const_inv(d: usize, kappa: f64) -> Result<f64> {
    if d < 1 || kappa <= 0.0 {
        return Err(Error::InvalidParameter(
            "hvmf constant needs d >= 1, kappa > 0".into(),
        ));
    }
    let nu = (d as f64 - 1.0) / 2.0;
    let k = bessel_k(nu, kappa)?;
    Ok((2.0 * std::f64::consts::PI).powf(nu) * 2.0 * k / kappa.powf(nu))
}

/// Reciprocal HvMF normalizing constant via direct quadrature of the radial
/// integral times the surface area of `S^{d-1}`.
pub fn hvmf_norm_const_inv_quadrature(d: usize, kappa: f64) -> Result<f64> {
    if d < 1 || kappa <= 0.0 {
        return Err(Error::InvalidParameter(
            "hvmf constant needs d >= 1, kappa > 0".into(),
        ));
    }
    let df = d as f64;
    let surface = 2.0 * std::f64::consts::PI.powf(df / 2.0) / gamma(df / 2.0);
    // Integrand sinh^{d-1}(u) exp(-kappa cosh u); the upper limit is grown
    // until the integrand is negligible relative to its peak.
    let f = move |u: f64| u.sinh().powi(d as i32 - 1) * (-kappa * (u.cosh() - 1.0)).exp();
    let mut hi = 1.0;
    while f(hi) > 1e-22 && hi < 500.0 {
        hi *= 1.5;
    }
    let scaled = integrate(&f, 0.0, hi, 1e-14);
    Ok(surface * scaled * (-kappa).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_order_matches_closed_form() {
        // K_{1/2}(x) = sqrt(pi/(2x)) exp(-x)
        for &x in &[0.5, 1.0, 10.0, 50.0] {
            let expected = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x as f64).exp();
            assert!((bessel_k(0.5, x).unwrap() - expected).abs() <= 1e-14 * expected);
        }
    }

    #[test]
    fn integer_order_satisfies_wronskian_recurrence() {
        // K_2(x) - K_0(x) = 2 K_1(x)/x must hold identically.
        for &x in &[0.3, 1.0, 2.5, 10.0, 40.0] {
            let k0 = bessel_k(0.0, x).unwrap();
            let k1 = bessel_k(1.0, x).unwrap();
            let k2 = bessel_k(2.0, x).unwrap();
            assert!((k2 - k0 - 2.0 * k1 / x).abs() <= 1e-12 * k2);
        }
    }

    #[test]
    fn integer_order_against_ascending_series() {
        for n in [0usize, 1, 2] {
            for &x in &[0.3, 1.0, 2.0, 4.0] {
                let quad = bessel_k(n as f64, x).unwrap();
                let series = bessel_k_integer_series(n, x);
                assert!(
                    ((quad - series) / series).abs() <= 1e-10,
                    "n={n} x={x}: {quad} vs {series}"
                );
            }
        }
    }

    #[test]
    fn known_values_at_one() {
        // Abramowitz & Stegun tabulated values.
        assert!((bessel_k(0.0, 1.0).unwrap() - 0.421024438240708).abs() < 1e-12);
        assert!((bessel_k(1.0, 1.0).unwrap() - 0.601907230197235).abs() < 1e-12);
    }

    #[test]
    fn hvmf_constant_routes_agree() {
        for &d in &[2usize, 3, 4] {
            for &kappa in &[1.0, 10.0, 50.0] {
                let closed = hvmf_norm_const_inv(d, kappa).unwrap();
                let quad = hvmf_norm_const_inv_quadrature(d, kappa).unwrap();
                assert!(
                    ((closed - quad) / closed).abs() <= 1e-8,
                    "d={d} kappa={kappa}: {closed} vs {quad}"
                );
            }
        }
    }
}
