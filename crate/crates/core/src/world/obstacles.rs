use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::governor::ObstacleDistance;
use crate::metric::{dist_sq_to_disk, dist_sq_to_segment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Axis-aligned workspace rectangle. Its edges act as walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x > self.min[0] && p.x < self.max[0] && p.y > self.min[1] && p.y < self.max[1]
    }

    pub fn edges(&self) -> [Segment; 4] {
        let [x0, y0] = self.min;
        let [x1, y1] = self.max;
        [
            Segment {
                a: [x0, y0],
                b: [x1, y0],
            },
            Segment {
                a: [x1, y0],
                b: [x1, y1],
            },
            Segment {
                a: [x1, y1],
                b: [x0, y1],
            },
            Segment {
                a: [x0, y1],
                b: [x0, y0],
            },
        ]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// Static obstacles: disks, wall segments and the workspace boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet {
    #[serde(default)]
    pub disks: Vec<Disk>,
    #[serde(default)]
    pub segments: Vec<Segment>,
    pub bounds: Bounds,
}

fn v2(p: [f64; 2]) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

fn dv(p: [f64; 2]) -> DVector<f64> {
    DVector::from_column_slice(&p)
}

fn point_segment_distance(p: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let d = b - a;
    let dd = d.norm_squared();
    let t = if dd > 0.0 {
        ((p - a).dot(&d) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + d * t - p).norm()
}

impl ObstacleSet {
    pub fn new(disks: Vec<Disk>, segments: Vec<Segment>, bounds: Bounds) -> Result<Self> {
        let set = Self {
            disks,
            segments,
            bounds,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bounds.max[0] > self.bounds.min[0] && self.bounds.max[1] > self.bounds.min[1]) {
            return Err(Error::Config(format!("empty workspace bounds {:?}", self.bounds)));
        }
        if let Some(d) = self.disks.iter().find(|d| !(d.radius > 0.0)) {
            return Err(Error::Config(format!(
                "disk at {:?} has non-positive radius {}",
                d.center, d.radius
            )));
        }
        Ok(())
    }

    /// Wall segments including the workspace boundary.
    pub fn all_segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.segments.iter().copied().chain(self.bounds.edges())
    }

    /// Strictly outside every obstacle and strictly inside the workspace.
    pub fn is_free(&self, p: &Vector2<f64>) -> bool {
        self.bounds.contains(p)
            && self.disks.iter().all(|d| (p - v2(d.center)).norm() > d.radius)
            && self
                .segments
                .iter()
                .all(|s| point_segment_distance(p, &v2(s.a), &v2(s.b)) > 0.0)
    }

    /// Euclidean distance to the nearest obstacle; negative inside a disk or outside the bounds.
    pub fn clearance(&self, p: &Vector2<f64>) -> f64 {
        let disks = self.disks.iter().map(|d| (p - v2(d.center)).norm() - d.radius);
        let walls = self
            .segments
            .iter()
            .map(|s| point_segment_distance(p, &v2(s.a), &v2(s.b)));
        let b = &self.bounds;
        let inside = (p.x - b.min[0])
            .min(b.max[0] - p.x)
            .min(p.y - b.min[1])
            .min(b.max[1] - p.y);
        disks.chain(walls).fold(inside, f64::min)
    }

    /// Distance along the ray from `origin` at `angle` to the first obstacle, capped at `range_max`.
    pub fn ray_cast(&self, origin: &Vector2<f64>, angle: f64, range_max: f64) -> f64 {
        let dir = Vector2::new(angle.cos(), angle.sin());
        let mut best = range_max;
        for d in &self.disks {
            let oc = origin - v2(d.center);
            let b = oc.dot(&dir);
            let c = oc.norm_squared() - d.radius * d.radius;
            let disc = b * b - c;
            if disc < 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            let t = if -b - sq >= 0.0 { -b - sq } else { -b + sq };
            if t >= 0.0 && t < best {
                best = t;
            }
        }
        for s in self.all_segments() {
            let a = v2(s.a);
            let e = v2(s.b) - a;
            let denom = dir.x * e.y - dir.y * e.x;
            if denom.abs() < 1e-15 {
                continue;
            }
            let w = a - origin;
            let t = (w.x * e.y - w.y * e.x) / denom;
            let u = (w.x * dir.y - w.y * dir.x) / denom;
            if t >= 0.0 && (0.0..=1.0).contains(&u) && t < best {
                best = t;
            }
        }
        best
    }
}

/// Geometric clearance: minimum over disks, walls and workspace edges.
impl ObstacleDistance for ObstacleSet {
    fn dist_sq(&self, q: &DMatrix<f64>, g: &DVector<f64>) -> Result<f64> {
        let mut best = f64::INFINITY;
        for d in &self.disks {
            best = best.min(dist_sq_to_disk(q, g, &dv(d.center), d.radius)?);
        }
        for s in self.all_segments() {
            best = best.min(dist_sq_to_segment(q, g, &dv(s.a), &dv(s.b)));
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn open(disks: Vec<Disk>, segments: Vec<Segment>) -> ObstacleSet {
        ObstacleSet::new(
            disks,
            segments,
            Bounds {
                min: [-50.0, -50.0],
                max: [50.0, 50.0],
            },
        )
        .unwrap()
    }

    #[test]
    fn free_space_membership() {
        let w = open(
            vec![Disk {
                center: [5.0, 0.0],
                radius: 1.0,
            }],
            vec![],
        );
        assert!(!w.is_free(&Vector2::new(5.0, 0.0)));
        assert!(w.is_free(&Vector2::new(0.0, 0.0)));
        assert!(!w.is_free(&Vector2::new(60.0, 0.0)));
        let w = open(
            vec![],
            vec![Segment {
                a: [0.0, -1.0],
                b: [0.0, 1.0],
            }],
        );
        assert!(!w.is_free(&Vector2::new(0.0, 0.5)));
    }

    #[test]
    fn ray_examples() {
        let w = open(
            vec![Disk {
                center: [5.0, 0.0],
                radius: 1.0,
            }],
            vec![],
        );
        assert!((w.ray_cast(&Vector2::zeros(), 0.0, 10.0) - 4.0).abs() < 1e-12);
        assert_eq!(w.ray_cast(&Vector2::zeros(), std::f64::consts::PI, 10.0), 10.0);
        let w = open(
            vec![],
            vec![Segment {
                a: [3.0, -1.0],
                b: [3.0, 1.0],
            }],
        );
        assert!((w.ray_cast(&Vector2::zeros(), 0.0, 10.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_clearance_delegates() {
        let w = open(
            vec![Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            }],
            vec![],
        );
        let q = dmatrix![1.0, 0.0; 0.0, 4.0];
        let g = DVector::from_vec(vec![0.0, 3.0]);
        let d = w.dist_sq(&q, &g).unwrap();
        let direct = dist_sq_to_disk(&q, &g, &DVector::from_vec(vec![0.0, 0.0]), 1.0).unwrap();
        assert_eq!(d, direct);
        assert!((w.clearance(&Vector2::new(0.0, 3.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        let b = Bounds {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        };
        assert!(ObstacleSet::new(
            vec![Disk {
                center: [0.5, 0.5],
                radius: 0.0
            }],
            vec![],
            b
        )
        .is_err());
        let empty = Bounds {
            min: [0.0, 0.0],
            max: [0.0, 1.0],
        };
        assert!(ObstacleSet::new(vec![], vec![], empty).is_err());
    }
}
