use nalgebra::{DVector, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sddm_nav::governor::ObstacleDistance;
use sddm_nav::metric::{make_directional_matrix, DirectionalWeights};
use sddm_nav::world::{simulate_lidar, Bounds, Cell, Disk, ObstacleSet, OccupancyGrid, Segment};

fn world(seed: u64) -> ObstacleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disks = (0..rng.random_range(2..6))
        .map(|_| Disk {
            center: [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)],
            radius: rng.random_range(0.3..1.5),
        })
        .collect();
    let segments = (0..rng.random_range(1..4))
        .map(|_| Segment {
            a: [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)],
            b: [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)],
        })
        .collect();
    ObstacleSet::new(
        disks,
        segments,
        Bounds {
            min: [-10.0, -10.0],
            max: [10.0, 10.0],
        },
    )
    .unwrap()
}

fn free_point(w: &ObstacleSet, rng: &mut ChaCha8Rng) -> Vector2<f64> {
    loop {
        let p = Vector2::new(rng.random_range(-9.5..9.5), rng.random_range(-9.5..9.5));
        if w.clearance(&p) > 0.05 {
            return p;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ray_cast_stops_on_a_boundary(seed in 0u64..1000, angle in 0.0f64..std::f64::consts::TAU) {
        let w = world(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let o = free_point(&w, &mut rng);
        let r = w.ray_cast(&o, angle, 30.0);
        let dir = Vector2::new(angle.cos(), angle.sin());
        prop_assert!(r < 30.0, "bounds always stop the ray");
        prop_assert!(w.clearance(&(o + dir * r)).abs() <= 1e-6);
        for i in 0..200 {
            let s = r * i as f64 / 200.0;
            prop_assert!(w.is_free(&(o + dir * s)), "blocked at {} before hit at {}", s, r);
        }
    }
}

#[test]
fn lidar_clearance_never_undercuts_geometry() {
    let weights = DirectionalWeights::new(1.0, 4.0).unwrap();
    let mut coarse_gap = 0.0;
    let mut fine_gap = 0.0;
    for seed in 0..100u64 {
        let w = world(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let g = free_point(&w, &mut rng);
        let heading = DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let q = make_directional_matrix(&heading, weights).into_matrix();
        let gd = DVector::from_vec(vec![g.x, g.y]);
        let geo = w.dist_sq(&q, &gd).unwrap();
        for (beams, gap) in [(90, &mut coarse_gap), (1440, &mut fine_gap)] {
            let scan = simulate_lidar(&w, g, beams, 40.0).unwrap();
            let lid = scan.dist_sq(&q, &gd).unwrap();
            assert!(
                lid >= geo - 1e-9 * (1.0 + geo),
                "seed {seed}: lidar {lid} below geometry {geo}"
            );
            *gap += (lid - geo) / geo;
        }
    }
    assert!(
        fine_gap < coarse_gap,
        "finer scans should close the gap: {fine_gap} vs {coarse_gap}"
    );
    assert!(
        fine_gap / 100.0 < 1e-2,
        "mean relative gap at 1440 beams {}",
        fine_gap / 100.0
    );
}

#[test]
fn inflation_is_monotone_and_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let b = Bounds {
            min: [0.0, 0.0],
            max: [5.0, 5.0],
        };
        let mut g = OccupancyGrid::new(&b, 0.1, rng.random_range(0.0..0.5)).unwrap();
        for iy in 0..g.height() {
            for ix in 0..g.width() {
                let c = match rng.random_range(0..10) {
                    0 => Cell::Occupied,
                    1..=2 => Cell::Unknown,
                    _ => Cell::Free,
                };
                g.set((ix, iy), c);
            }
        }
        let inflated = g.inflate();
        for (a, b) in g.cells().iter().zip(inflated.cells()) {
            assert!(*a != Cell::Occupied || *b == Cell::Occupied);
            assert!(*a != Cell::Unknown || matches!(b, Cell::Unknown | Cell::Occupied));
        }
        assert_eq!(inflated.inflate(), inflated);
        assert_eq!(g.inflate(), inflated);
    }
    let b = Bounds {
        min: [0.0, 0.0],
        max: [2.0, 2.0],
    };
    let mut free = OccupancyGrid::new(&b, 0.1, 0.3).unwrap();
    for iy in 0..free.height() {
        for ix in 0..free.width() {
            free.set((ix, iy), Cell::Free);
        }
    }
    assert_eq!(free.inflate().count(Cell::Free), free.count(Cell::Free));
}

#[test]
fn mapping_a_known_world_agrees_with_rasterization() {
    let w = world(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut grid = OccupancyGrid::new(&w.bounds, 0.1, 0.0).unwrap();
    for _ in 0..30 {
        let p = free_point(&w, &mut rng);
        grid.integrate_scan_in_place(&simulate_lidar(&w, p, 360, 10.0).unwrap());
    }
    let truth = OccupancyGrid::from_obstacles(&w, 0.1, 0.0).unwrap();
    for iy in 0..grid.height() {
        for ix in 0..grid.width() {
            if grid.get((ix, iy)) == Cell::Occupied {
                assert_eq!(
                    truth.get((ix, iy)),
                    Cell::Occupied,
                    "mapped obstacle at free cell {:?}",
                    (ix, iy)
                );
            }
        }
    }
}
