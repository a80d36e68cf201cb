use super::*;
use crate::sampling::random_point;
use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn sphere3(data: [f64; 3]) -> MetricPoint {
    MetricPoint::new(SpaceDescriptor::Sphere { ambient: 3 }, data.to_vec()).unwrap()
}

fn spd2(metric: SpdMetric, data: [f64; 4]) -> MetricPoint {
    MetricPoint::new(
        SpaceDescriptor::Spd { size: 2, metric },
        data.to_vec(),
    )
    .unwrap()
}

#[test]
fn sphere_orthogonal_quarter_circle() {
    let a = sphere3([1.0, 0.0, 0.0]);
    let b = sphere3([0.0, 1.0, 0.0]);
    assert_abs_diff_eq!(
        distance(&a, &b).unwrap(),
        std::f64::consts::FRAC_PI_2,
        epsilon = 1e-14
    );
}

#[test]
fn hyperboloid_meridian_arclength() {
    let desc = SpaceDescriptor::Hyperboloid { ambient: 3 };
    let a = MetricPoint::new(desc.clone(), vec![1.0, 0.0, 0.0]).unwrap();
    let b = MetricPoint::new(desc, vec![1f64.cosh(), 1f64.sinh(), 0.0]).unwrap();
    assert_abs_diff_eq!(distance(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn spd_ai_identity_to_scaled_identity() {
    let e = std::f64::consts::E;
    let a = spd2(SpdMetric::AffineInvariant, [1.0, 0.0, 0.0, 1.0]);
    let b = spd2(SpdMetric::AffineInvariant, [e, 0.0, 0.0, e]);
    assert_abs_diff_eq!(distance(&a, &b).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
}

#[test]
fn spd_le_log_eigenvalues() {
    let a = spd2(SpdMetric::LogEuclidean, [1.0, 0.0, 0.0, 1.0]);
    let b = spd2(SpdMetric::LogEuclidean, [2f64.exp(), 0.0, 0.0, (-2f64).exp()]);
    assert_abs_diff_eq!(distance(&a, &b).unwrap(), 8f64.sqrt(), epsilon = 1e-10);
}

#[test]
fn distance_rejects_descriptor_mismatch() {
    let a = MetricPoint::euclidean(vec![0.0, 0.0]);
    let b = MetricPoint::euclidean(vec![0.0, 0.0, 0.0]);
    assert!(matches!(
        distance(&a, &b),
        Err(crate::Error::DescriptorMismatch { .. })
    ));
}

#[test]
fn sphere_validation_rejects_non_unit() {
    let r = MetricPoint::new(SpaceDescriptor::Sphere { ambient: 3 }, vec![1.0, 1.0, 0.0]);
    assert!(matches!(r, Err(crate::Error::InvalidPoint(_))));
}

#[test]
fn spd_validation_rejects_indefinite() {
    let r = MetricPoint::new(
        SpaceDescriptor::Spd {
            size: 2,
            metric: SpdMetric::AffineInvariant,
        },
        vec![1.0, 2.0, 2.0, 1.0],
    );
    assert!(r.is_err());
}

#[test]
fn nested_products_are_rejected() {
    let desc = SpaceDescriptor::Product(vec![SpaceDescriptor::Product(vec![
        SpaceDescriptor::Euclidean { dim: 1 },
    ])]);
    assert!(desc.validate().is_err());
}

#[test]
fn descriptor_text_round_trip() {
    let cases = [
        "euclidean:5",
        "sphere:3",
        "hyperboloid:3",
        "spd:2:ai",
        "spd:4:lc",
        "spd:3:le",
        "quantile:100",
        "spheroid:0.5:1",
        "product[euclidean:1,euclidean:1,sphere:3]",
    ];
    for text in cases {
        let desc = SpaceDescriptor::parse(text).unwrap();
        assert_eq!(desc.to_string(), text);
    }
    assert!(SpaceDescriptor::parse("torus:2").is_err());
}

#[test]
fn antipodal_sphere_distance_is_pi_but_log_errors() {
    let a = sphere3([1.0, 0.0, 0.0]);
    let b = sphere3([-1.0, 0.0, 0.0]);
    assert_abs_diff_eq!(distance(&a, &b).unwrap(), std::f64::consts::PI, epsilon = 1e-12);
    assert!(matches!(log_map(&a, &b), Err(crate::Error::AntipodalPair)));
}

#[test]
fn log_map_at_base_is_zero() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for desc in test_spaces() {
        if matches!(desc, SpaceDescriptor::Spheroid { .. }) {
            continue;
        }
        let x = random_point(&desc, &mut rng).unwrap();
        let v = log_map(&x, &x).unwrap();
        assert!(v.iter().all(|t| t.abs() < 1e-9), "nonzero log at base for {desc}");
    }
}

#[test]
fn sphere_exp_quarter_circle() {
    let base = sphere3([1.0, 0.0, 0.0]);
    let out = exp_map(&base, &[0.0, std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
    assert_abs_diff_eq!(out.data[0], 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(out.data[1], 1.0, epsilon = 1e-12);
}

#[test]
fn hyperboloid_exp_meridian() {
    let desc = SpaceDescriptor::Hyperboloid { ambient: 3 };
    let base = MetricPoint::new(desc, vec![1.0, 0.0, 0.0]).unwrap();
    let out = exp_map(&base, &[0.0, 1.0, 0.0]).unwrap();
    assert_abs_diff_eq!(out.data[0], 1f64.cosh(), epsilon = 1e-12);
    assert_abs_diff_eq!(out.data[1], 1f64.sinh(), epsilon = 1e-12);
}

fn test_spaces() -> Vec<SpaceDescriptor> {
    vec![
        SpaceDescriptor::Euclidean { dim: 1 },
        SpaceDescriptor::Euclidean { dim: 5 },
        SpaceDescriptor::Sphere { ambient: 3 },
        SpaceDescriptor::Hyperboloid { ambient: 3 },
        SpaceDescriptor::Spd {
            size: 2,
            metric: SpdMetric::AffineInvariant,
        },
        SpaceDescriptor::Spd {
            size: 2,
            metric: SpdMetric::LogCholesky,
        },
        SpaceDescriptor::Spd {
            size: 2,
            metric: SpdMetric::LogEuclidean,
        },
        SpaceDescriptor::QuantileGrid { points: 20 },
    ]
}

#[test]
fn exp_log_round_trip_and_length() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for desc in test_spaces() {
        for _ in 0..40 {
            let x = random_point(&desc, &mut rng).unwrap();
            let y = random_point(&desc, &mut rng).unwrap();
            let v = match log_map(&x, &y) {
                Ok(v) => v,
                Err(crate::Error::AntipodalPair) => continue,
                Err(e) => panic!("log map failed for {desc}: {e}"),
            };
            let len = tangent_norm(&x, &v).unwrap();
            let d = distance(&x, &y).unwrap();
            assert_abs_diff_eq!(len, d, epsilon = 1e-8 * (1.0 + d));
            let back = exp_map(&x, &v).unwrap();
            // Coordinate-space comparison; the metric itself amplifies
            // last-bit coordinate noise by ~sqrt(eps) near zero.
            let scale = y.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = back
                .data
                .iter()
                .zip(&y.data)
                .map(|(u, w)| (u - w).abs())
                .fold(0.0f64, f64::max);
            assert!(
                err < 1e-8 * scale,
                "round trip failed for {desc}: {err:e}"
            );
        }
    }
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    for desc in test_spaces() {
        for _ in 0..100 {
            let a = random_point(&desc, &mut rng).unwrap();
            let b = random_point(&desc, &mut rng).unwrap();
            let c = random_point(&desc, &mut rng).unwrap();
            let dab = distance(&a, &b).unwrap();
            let dba = distance(&b, &a).unwrap();
            let dac = distance(&a, &c).unwrap();
            let dbc = distance(&b, &c).unwrap();
            assert!(dab >= 0.0);
            assert!((dab - dba).abs() <= 1e-12 * (1.0 + dab), "symmetry in {desc}");
            assert!(distance(&a, &a).unwrap() <= 1e-9, "identity in {desc}");
            assert!(dab <= dac + dbc + 1e-9, "triangle in {desc}");
        }
    }
}

#[test]
fn lc_isometry_against_direct_formula() {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let desc = SpaceDescriptor::Spd {
        size: 3,
        metric: SpdMetric::LogCholesky,
    };
    for _ in 0..50 {
        let s1 = random_point(&desc, &mut rng).unwrap();
        let s2 = random_point(&desc, &mut rng).unwrap();
        // Direct formula: strictly-lower Frobenius part plus log-diagonal part
        // of the Cholesky factors.
        let l1 = cholesky_of(&s1.data, 3);
        let l2 = cholesky_of(&s2.data, 3);
        let mut sum = 0.0;
        for i in 0..3 {
            for j in 0..i {
                sum += (l1[(i, j)] - l2[(i, j)]).powi(2);
            }
            sum += (l1[(i, i)].ln() - l2[(i, i)].ln()).powi(2);
        }
        let direct = sum.sqrt();
        let viaembed = distance(&s1, &s2).unwrap();
        assert!((direct - viaembed).abs() <= 1e-12 * (1.0 + direct));
    }
}

fn cholesky_of(data: &[f64], size: usize) -> nalgebra::DMatrix<f64> {
    let m = nalgebra::DMatrix::from_row_slice(size, size, data);
    nalgebra::Cholesky::new(m).unwrap().l()
}

#[test]
fn spd_2x2_fast_paths_match_generic_route() {
    // The 2x2 closed forms and the eigendecomposition route are independent
    // computations of the same distances.
    let mut rng = ChaCha12Rng::seed_from_u64(123);
    for metric in [SpdMetric::AffineInvariant, SpdMetric::LogCholesky, SpdMetric::LogEuclidean] {
        let desc2 = SpaceDescriptor::Spd { size: 2, metric };
        for _ in 0..50 {
            let a = random_point(&desc2, &mut rng).unwrap();
            let b = random_point(&desc2, &mut rng).unwrap();
            let fast = distance(&a, &b).unwrap();
            // Embed into a block-diagonal 3x3 with a unit third axis; all
            // three distances are additive over blocks, and the 3x3 route
            // takes the generic path.
            let embed = |m: &MetricPoint| {
                let d = &m.data;
                MetricPoint::new_unchecked(
                    SpaceDescriptor::Spd { size: 3, metric },
                    vec![d[0], d[1], 0.0, d[2], d[3], 0.0, 0.0, 0.0, 1.0],
                )
            };
            let generic = distance(&embed(&a), &embed(&b)).unwrap();
            assert!(
                (fast - generic).abs() <= 1e-9 * (1.0 + generic),
                "{metric}: {fast} vs {generic}"
            );
        }
    }
}

#[test]
fn ai_affine_invariance() {
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let desc = SpaceDescriptor::Spd {
        size: 2,
        metric: SpdMetric::AffineInvariant,
    };
    for _ in 0..30 {
        let s1 = random_point(&desc, &mut rng).unwrap();
        let s2 = random_point(&desc, &mut rng).unwrap();
        let d0 = distance(&s1, &s2).unwrap();
        // Random invertible A, kept well-conditioned.
        let a = loop {
            let m = nalgebra::DMatrix::<f64>::from_fn(2, 2, |_, _| {
                use rand::Rng;
                rng.random_range(-1.0..1.0)
            });
            if m.determinant().abs() > 0.2 {
                break m;
            }
        };
        let transform = |s: &MetricPoint| {
            let m = nalgebra::DMatrix::from_row_slice(2, 2, &s.data);
            let t = a.transpose() * m * &a;
            let mut buf = vec![0.0; 4];
            for i in 0..2 {
                for j in 0..2 {
                    buf[i * 2 + j] = t[(i, j)];
                }
            }
            MetricPoint::new_unchecked(desc.clone(), buf)
        };
        let d1 = distance(&transform(&s1), &transform(&s2)).unwrap();
        assert!((d0 - d1).abs() <= 1e-8 * (1.0 + d0));
    }
}

mod spheroid_tests {
    use super::*;

    #[test]
    fn map_is_identity_on_unit_spheroid() {
        let out = spheroid_map(&[0.0, 0.0, 1.0], 1.0, 1.0).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn map_scales_equatorial_axis() {
        let out = spheroid_map(&[1.0, 0.0, 0.0], 0.5, 1.0).unwrap();
        assert_eq!(out, vec![0.5, 0.0, 0.0]);
    }

    #[test]
    fn unmap_inverts_map() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let desc = SpaceDescriptor::Sphere { ambient: 3 };
        for _ in 0..50 {
            let x = random_point(&desc, &mut rng).unwrap();
            let p = spheroid_map(&x.data, 0.7, 1.3).unwrap();
            let back = spheroid_unmap(&p, 0.7, 1.3).unwrap();
            for (u, v) in back.iter().zip(&x.data) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_axes() {
        assert!(spheroid_map(&[0.0, 0.0, 1.0], 0.0, 1.0).is_err());
        assert!(spheroid_map(&[0.0, 0.0, 1.0], 1.0, -2.0).is_err());
    }

    #[test]
    fn unit_spheroid_reduces_to_sphere_distance() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let desc = SpaceDescriptor::Sphere { ambient: 3 };
        for _ in 0..60 {
            let x = random_point(&desc, &mut rng).unwrap();
            let y = random_point(&desc, &mut rng).unwrap();
            let arc = distance(&x, &y).unwrap();
            if arc > std::f64::consts::PI - 0.05 {
                continue;
            }
            let d = induced_sphere_distance(&x.data, &y.data, 1.0, 1.0).unwrap();
            assert!(
                (d - arc).abs() <= 1e-6 * (1.0 + arc),
                "sphere reduction failed: {d} vs {arc}"
            );
        }
    }

    #[test]
    fn scaled_sphere_doubles_distance() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let desc = SpaceDescriptor::Sphere { ambient: 3 };
        for _ in 0..20 {
            let x = random_point(&desc, &mut rng).unwrap();
            let y = random_point(&desc, &mut rng).unwrap();
            let arc = distance(&x, &y).unwrap();
            if arc > std::f64::consts::PI - 0.05 {
                continue;
            }
            let p = spheroid_map(&x.data, 2.0, 2.0).unwrap();
            let q = spheroid_map(&y.data, 2.0, 2.0).unwrap();
            let d = spheroid_geodesic_distance(&p, &q, 2.0, 2.0).unwrap();
            assert!((d - 2.0 * arc).abs() <= 2e-6 * (1.0 + 2.0 * arc));
        }
    }

    #[test]
    fn prolate_pole_to_pole_matches_meridian_quadrature() {
        // Independent oracle: Simpson quadrature of the meridian ellipse
        // arclength with semi-axes (0.5, 1).
        let (a, c) = (0.5, 1.0);
        let f = |t: f64| {
            let (s, co) = t.sin_cos();
            (a * a * co * co + c * c * s * s).sqrt()
        };
        let n = 20_000;
        let h = std::f64::consts::PI / n as f64;
        let mut oracle = f(0.0) + f(std::f64::consts::PI);
        for k in 1..n {
            oracle += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        oracle *= h / 3.0;
        assert!((oracle - 2.42211).abs() < 1e-4);

        let north = [0.0, 0.0, 1.0];
        let south = [0.0, 0.0, -1.0];
        let d = spheroid_geodesic_distance(&north, &south, a, c).unwrap();
        assert!((d - oracle).abs() <= 1e-6 * oracle);
    }

    #[test]
    fn shooting_agrees_with_curve_shortening() {
        // Two independent solvers for the same boundary-value problem.
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let desc = SpaceDescriptor::Sphere { ambient: 3 };
        for &(a, c) in &[(0.5, 1.0), (1.3, 0.8)] {
            for _ in 0..6 {
                let x = random_point(&desc, &mut rng).unwrap();
                let y = random_point(&desc, &mut rng).unwrap();
                let p = spheroid_map(&x.data, a, c).unwrap();
                let q = spheroid_map(&y.data, a, c).unwrap();
                let p3 = [p[0], p[1], p[2]];
                let q3 = [q[0], q[1], q[2]];
                let shot = match super::super::spheroid::shoot_for_test(&p3, &q3, a, c) {
                    Some(d) => d,
                    None => continue,
                };
                let smoothed = super::super::spheroid::shorten_for_test(&p3, &q3, a, c).unwrap();
                assert!(
                    (shot - smoothed).abs() < 5e-5 * (1.0 + shot),
                    "solvers disagree: {shot} vs {smoothed} (a={a}, c={c})"
                );
            }
        }
    }

    #[test]
    fn induced_distance_metric_axioms() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let desc = SpaceDescriptor::Sphere { ambient: 3 };
        for _ in 0..15 {
            let x = random_point(&desc, &mut rng).unwrap();
            let y = random_point(&desc, &mut rng).unwrap();
            let z = random_point(&desc, &mut rng).unwrap();
            let dxy = induced_sphere_distance(&x.data, &y.data, 0.5, 1.0).unwrap();
            let dyx = induced_sphere_distance(&y.data, &x.data, 0.5, 1.0).unwrap();
            let dxz = induced_sphere_distance(&x.data, &z.data, 0.5, 1.0).unwrap();
            let dzy = induced_sphere_distance(&z.data, &y.data, 0.5, 1.0).unwrap();
            assert!(induced_sphere_distance(&x.data, &x.data, 0.5, 1.0).unwrap() < 1e-9);
            assert!((dxy - dyx).abs() < 2e-6 * (1.0 + dxy));
            assert!(dxy <= dxz + dzy + 1e-5);
        }
    }

    #[test]
    fn induced_ball_region_recovers_spherical_cap() {
        let center = [0.0, 0.0, 1.0];
        let region = InducedBallRegion::new(&center, 1.0, 1.0, 0.8, 256).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let (area, se) = region.area_mc(200_000, &mut rng);
        let cap = 2.0 * std::f64::consts::PI * (1.0 - 0.8f64.cos());
        assert!(
            (area - cap).abs() < 4.0 * se + 1e-3,
            "cap area {cap} vs MC {area} (se {se})"
        );
    }
}
