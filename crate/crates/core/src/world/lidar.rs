use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ObstacleSet;
use crate::error::{Error, Result};
use crate::governor::ObstacleDistance;
use crate::metric::dist_sq_to_point_cloud;

/// One planar scan with uniformly spaced beams.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub origin: Vector2<f64>,
    pub angles: Vec<f64>,
    /// `range_max` marks a beam without a return.
    pub ranges: Vec<f64>,
    pub range_max: f64,
    endpoints: Vec<DVector<f64>>,
}

impl LidarScan {
    pub fn new(origin: Vector2<f64>, angles: Vec<f64>, ranges: Vec<f64>, range_max: f64) -> Result<Self> {
        if angles.len() != ranges.len() {
            return Err(Error::Config(format!(
                "{} angles but {} ranges",
                angles.len(),
                ranges.len()
            )));
        }
        if let Some(r) = ranges.iter().find(|&&r| !(r > 0.0 && r <= range_max)) {
            return Err(Error::Config(format!("range {r} outside (0, {range_max}]")));
        }
        let endpoints = angles
            .iter()
            .zip(&ranges)
            .filter(|(_, &r)| r < range_max)
            .map(|(&a, &r)| DVector::from_vec(vec![origin.x + r * a.cos(), origin.y + r * a.sin()]))
            .collect();
        Ok(Self {
            origin,
            angles,
            ranges,
            range_max,
            endpoints,
        })
    }

    /// World-frame hit points (beams with `range < range_max`).
    pub fn endpoints(&self) -> &[DVector<f64>] {
        &self.endpoints
    }

    pub fn beam_count(&self) -> usize {
        self.angles.len()
    }

    /// Adds zero-mean Gaussian range noise, clamped to `(0, range_max]`.
    /// Beams without a return stay at `range_max`.
    pub fn with_range_noise<R: Rng + ?Sized>(self, sigma: f64, rng: &mut R) -> Result<Self> {
        if sigma <= 0.0 {
            return Ok(self);
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
        let range_max = self.range_max;
        let ranges = self
            .ranges
            .iter()
            .map(|&r| {
                if r >= range_max {
                    r
                } else {
                    (r + normal.sample(rng)).clamp(1e-6, range_max * (1.0 - 1e-12))
                }
            })
            .collect();
        Self::new(self.origin, self.angles, ranges, range_max)
    }
}

/// Clearance from the hit points of a single scan; `+∞` without returns.
impl ObstacleDistance for LidarScan {
    fn dist_sq(&self, q: &DMatrix<f64>, g: &DVector<f64>) -> Result<f64> {
        Ok(dist_sq_to_point_cloud(q, g, &self.endpoints))
    }
}

/// Deterministic scan with beams at `2π i / beam_count`.
pub fn simulate_lidar(obs: &ObstacleSet, origin: Vector2<f64>, beam_count: usize, range_max: f64) -> Result<LidarScan> {
    if !obs.is_free(&origin) {
        return Err(Error::SensorPose(origin.x, origin.y));
    }
    if beam_count == 0 || !(range_max > 0.0) {
        return Err(Error::Config(format!(
            "lidar needs beams > 0 and range_max > 0, got {beam_count} and {range_max}"
        )));
    }
    let step = std::f64::consts::TAU / beam_count as f64;
    let angles: Vec<f64> = (0..beam_count).map(|i| i as f64 * step).collect();
    let ranges = angles.iter().map(|&a| obs.ray_cast(&origin, a, range_max)).collect();
    LidarScan::new(origin, angles, ranges, range_max)
}

/// Where the obstacle distance for the safe zone comes from.
#[derive(Debug, Clone, Copy)]
pub enum ClearanceSource<'a> {
    Geometric(&'a ObstacleSet),
    Lidar(&'a LidarScan),
}

impl ObstacleDistance for ClearanceSource<'_> {
    fn dist_sq(&self, q: &DMatrix<f64>, g: &DVector<f64>) -> Result<f64> {
        match self {
            ClearanceSource::Geometric(o) => o.dist_sq(q, g),
            ClearanceSource::Lidar(s) => s.dist_sq(q, g),
        }
    }
}

/// `d²_Q(g, O)` from either source.
pub fn directional_clearance(source: ClearanceSource<'_>, q: &DMatrix<f64>, g: &DVector<f64>) -> Result<f64> {
    source.dist_sq(q, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Bounds, Disk, Segment};
    use nalgebra::dmatrix;

    fn room() -> ObstacleSet {
        ObstacleSet::new(
            vec![],
            vec![],
            Bounds {
                min: [-100.0, -100.0],
                max: [100.0, 100.0],
            },
        )
        .unwrap()
    }

    #[test]
    fn empty_world_has_no_returns() {
        let scan = simulate_lidar(&room(), Vector2::zeros(), 360, 10.0).unwrap();
        assert_eq!(scan.ranges.len(), 360);
        assert!(scan.ranges.iter().all(|&r| r == 10.0));
        assert!(scan.endpoints().is_empty());
        assert!((scan.angles[1] - std::f64::consts::TAU / 360.0).abs() < 1e-15);
        let q = DMatrix::identity(2, 2);
        let d = directional_clearance(ClearanceSource::Lidar(&scan), &q, &DVector::zeros(2)).unwrap();
        assert_eq!(d, f64::INFINITY);
    }

    #[test]
    fn circular_room_is_isotropic() {
        // radius-4 ring of short walls
        let n = 720;
        let segs: Vec<Segment> = (0..n)
            .map(|i| {
                let a0 = std::f64::consts::TAU * i as f64 / n as f64;
                let a1 = std::f64::consts::TAU * (i + 1) as f64 / n as f64;
                Segment {
                    a: [4.0 * a0.cos(), 4.0 * a0.sin()],
                    b: [4.0 * a1.cos(), 4.0 * a1.sin()],
                }
            })
            .collect();
        let w = ObstacleSet::new(
            vec![],
            segs,
            Bounds {
                min: [-10.0, -10.0],
                max: [10.0, 10.0],
            },
        )
        .unwrap();
        let scan = simulate_lidar(&w, Vector2::zeros(), 360, 10.0).unwrap();
        // chord sagitta of a 0.5° facet on a radius-4 circle is below 4e-5
        assert!(scan.ranges.iter().all(|&r| (r - 4.0).abs() < 5e-5));
    }

    #[test]
    fn occupied_origin_is_rejected() {
        let w = ObstacleSet::new(
            vec![Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            }],
            vec![],
            Bounds {
                min: [-5.0, -5.0],
                max: [5.0, 5.0],
            },
        )
        .unwrap();
        assert!(matches!(
            simulate_lidar(&w, Vector2::zeros(), 8, 5.0),
            Err(Error::SensorPose(..))
        ));
    }

    #[test]
    fn single_point_cloud_clearance() {
        let scan = LidarScan::new(Vector2::zeros(), vec![0.0], vec![3.0], 10.0).unwrap();
        let q = dmatrix![1.0, 0.0; 0.0, 4.0];
        let d = directional_clearance(ClearanceSource::Lidar(&scan), &q, &DVector::zeros(2)).unwrap();
        assert!((d - 9.0).abs() < 1e-12);
    }

    #[test]
    fn noise_keeps_ranges_valid() {
        use rand::SeedableRng;
        let w = ObstacleSet::new(
            vec![Disk {
                center: [3.0, 0.0],
                radius: 1.0,
            }],
            vec![],
            Bounds {
                min: [-5.0, -5.0],
                max: [5.0, 5.0],
            },
        )
        .unwrap();
        let scan = simulate_lidar(&w, Vector2::zeros(), 90, 10.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noisy = scan.clone().with_range_noise(0.05, &mut rng).unwrap();
        assert_eq!(noisy.ranges.len(), scan.ranges.len());
        assert_ne!(noisy.ranges, scan.ranges);
    }
}
