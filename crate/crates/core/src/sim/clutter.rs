use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::planner::{astar_plan, PlanRequest};
use crate::world::{Bounds, Disk, ObstacleSet, OccupancyGrid};

const SIZE: f64 = 20.0;
const START: [f64; 2] = [1.5, 1.5];
const GOAL: [f64; 2] = [18.5, 18.5];

/// Random disk field on a 20 m × 20 m workspace with a plannable route from
/// the lower-left to the upper-right corner. Same seed, same world.
pub fn random_clutter_world(seed: u64) -> Result<ScenarioConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = Bounds {
        min: [0.0, 0.0],
        max: [SIZE, SIZE],
    };
    for _ in 0..100 {
        let count = rng.random_range(12..=20);
        let mut disks: Vec<Disk> = Vec::with_capacity(count);
        let mut tries = 0;
        while disks.len() < count && tries < 1000 {
            tries += 1;
            let r = rng.random_range(0.4..1.0);
            let c = [rng.random_range(2.0..SIZE - 2.0), rng.random_range(2.0..SIZE - 2.0)];
            let far = |p: [f64; 2], gap: f64| ((c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2)).sqrt() > r + gap;
            if far(START, 1.5) && far(GOAL, 1.5) && disks.iter().all(|d| far(d.center, d.radius + 1.0)) {
                disks.push(Disk { center: c, radius: r });
            }
        }
        let world = ObstacleSet::new(disks, vec![], bounds)?;
        let mut cfg = ScenarioConfig {
            name: format!("clutter-{seed}"),
            bounds,
            disks: world.disks.clone(),
            segments: vec![],
            start: START,
            goal: GOAL,
            path: None,
            sensor: Default::default(),
            grid: Default::default(),
            controller: Default::default(),
            sim: Default::default(),
        };
        cfg.sim.seed = seed;
        let grid = OccupancyGrid::from_obstacles(&world, cfg.grid.resolution, cfg.grid.inflation)?.inflate();
        let req = PlanRequest {
            start: Vector2::from(START),
            goal: Vector2::from(GOAL),
            grid: &grid,
            unknown_is_free: false,
        };
        if astar_plan(&req).is_ok() {
            cfg.validate()?;
            return Ok(cfg);
        }
    }
    Err(Error::Config(format!("no plannable clutter world for seed {seed}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = random_clutter_world(3).unwrap();
        assert_eq!(a, random_clutter_world(3).unwrap());
        assert_ne!(a.disks, random_clutter_world(4).unwrap().disks);
        assert!((12..=20).contains(&a.disks.len()));
    }
}
