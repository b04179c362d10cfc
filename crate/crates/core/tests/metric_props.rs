use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sddm_nav::metric::{
    dist_sq_to_disk, dist_sq_to_segment, ellipsoid_segment_max_param, make_directional_matrix, quad_norm_sq,
    DirectionalWeights, Ellipsoid,
};

fn weights() -> impl Strategy<Value = (f64, f64)> {
    (0.05f64..5.0, 0.01f64..10.0).prop_map(|(c1, gap)| (c1, c1 + gap))
}

fn vec2(range: f64) -> impl Strategy<Value = DVector<f64>> {
    (-range..range, -range..range).prop_map(|(a, b)| DVector::from_vec(vec![a, b]))
}

fn metric() -> impl Strategy<Value = DMatrix<f64>> {
    (weights(), vec2(5.0))
        .prop_map(|((c1, c2), v)| make_directional_matrix(&v, DirectionalWeights::new(c1, c2).unwrap()).into_matrix())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn directional_matrix_is_spd_with_known_spectrum((c1, c2) in weights(), v in vec2(100.0)) {
        let q = make_directional_matrix(&v, DirectionalWeights::new(c1, c2).unwrap()).into_matrix();
        prop_assert!((&q - q.transpose()).amax() <= 1e-12 * c2);
        let eig = q.clone().symmetric_eigen().eigenvalues;
        for &l in eig.iter() {
            prop_assert!(l >= c1 - 1e-9 && l <= c2 + 1e-9);
        }
        if v.norm() > 1e-12 {
            prop_assert!((&q * &v - &v * c1).norm() <= 1e-9 * v.norm() * c2);
        }
    }

    #[test]
    fn metric_norm_is_sandwiched(q in metric(), x in vec2(10.0)) {
        let eig = q.clone().symmetric_eigen().eigenvalues;
        let n = quad_norm_sq(&q, &x);
        let e = x.norm_squared();
        prop_assert!(n >= eig.min() * e - 1e-9 && n <= eig.max() * e + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn disk_distance_matches_boundary_search(q in metric(), g in vec2(8.0), c in vec2(8.0), r in 0.1f64..3.0) {
        let d = dist_sq_to_disk(&q, &g, &c, r).unwrap();
        if (&g - &c).norm() <= r {
            prop_assert_eq!(d, 0.0);
        } else {
            let n = 20_000;
            let brute = (0..n)
                .map(|i| {
                    let th = std::f64::consts::TAU * i as f64 / n as f64;
                    let p = &c + DVector::from_vec(vec![r * th.cos(), r * th.sin()]);
                    quad_norm_sq(&q, &(p - &g))
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(d <= brute + 1e-9, "closed form {} above sampled {}", d, brute);
            prop_assert!(d >= brute - 1e-6 * (1.0 + brute), "closed form {} below sampled {}", d, brute);
        }
    }

    #[test]
    fn segment_distance_matches_sampling(q in metric(), g in vec2(8.0), a in vec2(8.0), b in vec2(8.0)) {
        let d = dist_sq_to_segment(&q, &g, &a, &b);
        let n = 20_000;
        let brute = (0..=n)
            .map(|i| quad_norm_sq(&q, &(&a + (&b - &a) * (i as f64 / n as f64) - &g)))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(d <= brute + 1e-9);
        prop_assert!(d >= brute - 1e-6 * (1.0 + brute));
    }

    #[test]
    fn segment_param_is_the_last_point_inside(q in metric(), g in vec2(3.0), a in vec2(5.0), b in vec2(5.0), level in 0.0f64..10.0) {
        let e = Ellipsoid::new(g, q, level).unwrap();
        let at = |t: f64| &a + (&b - &a) * t;
        match ellipsoid_segment_max_param(&e, &a, &b) {
            Some(t) => {
                prop_assert!((0.0..=1.0).contains(&t));
                let slack = 1e-9 * (1.0 + level);
                prop_assert!(quad_norm_sq(&e.shape, &(at(t) - &e.center)) <= level + slack);
                for i in 1..=100 {
                    let s = t + (1.0 - t) * i as f64 / 100.0;
                    if s > t + 1e-9 {
                        prop_assert!(quad_norm_sq(&e.shape, &(at(s) - &e.center)) >= level - slack);
                    }
                }
            }
            None => {
                for i in 0..=200 {
                    prop_assert!(!e.contains(&at(i as f64 / 200.0)));
                }
            }
        }
    }
}
