use nalgebra::DVector;

use crate::error::{Error, Result};

/// Piecewise-linear navigation path `r(α)`, `α ∈ [0, 1]`, parameterized by
/// normalized arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPolyline {
    waypoints: Vec<DVector<f64>>,
    // α at each waypoint
    alphas: Vec<f64>,
    length: f64,
}

impl PathPolyline {
    /// Repeated consecutive waypoints are merged. A path whose waypoints all
    /// coincide is accepted as a single-point path.
    pub fn new(waypoints: Vec<DVector<f64>>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Config(format!(
                "a path needs at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        let dim = waypoints[0].len();
        if waypoints
            .iter()
            .any(|w| w.len() != dim || !w.iter().all(|v| v.is_finite()))
        {
            return Err(Error::Config(
                "path waypoints must be finite and of equal dimension".into(),
            ));
        }
        let mut pts: Vec<DVector<f64>> = Vec::with_capacity(waypoints.len());
        for w in waypoints {
            if pts.last().is_none_or(|p| (p - &w).norm() > 1e-12) {
                pts.push(w);
            }
        }
        if pts.len() == 1 {
            let p = pts[0].clone();
            pts.push(p);
        }
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            cum.push(cum.last().unwrap() + (&w[1] - &w[0]).norm());
        }
        let length = *cum.last().unwrap();
        let n = cum.len();
        let alphas = if length > 0.0 {
            cum.iter().map(|c| c / length).collect()
        } else {
            (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
        };
        Ok(Self {
            waypoints: pts,
            alphas,
            length,
        })
    }

    pub fn waypoints(&self) -> &[DVector<f64>] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        self.waypoints.last().unwrap()
    }

    /// `r(α)`; `α` is clamped to `[0, 1]`.
    pub fn point(&self, alpha: f64) -> DVector<f64> {
        let alpha = alpha.clamp(0.0, 1.0);
        let i = match self.alphas.binary_search_by(|a| a.total_cmp(&alpha)) {
            Ok(i) => return self.waypoints[i].clone(),
            Err(i) => i.clamp(1, self.alphas.len() - 1),
        };
        let (a0, a1) = (self.alphas[i - 1], self.alphas[i]);
        let t = if a1 > a0 { (alpha - a0) / (a1 - a0) } else { 0.0 };
        &self.waypoints[i - 1] + (&self.waypoints[i] - &self.waypoints[i - 1]) * t
    }

    /// Segments as `(start, end, α_start, α_end)`.
    pub fn segments(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>, f64, f64)> {
        self.waypoints
            .windows(2)
            .zip(self.alphas.windows(2))
            .map(|(w, a)| (&w[0], &w[1], a[0], a[1]))
    }

    /// Euclidean distance from `p` to the polyline.
    pub fn distance_to(&self, p: &DVector<f64>) -> f64 {
        self.segments()
            .map(|(a, b, _, _)| {
                let d = b - a;
                let dd = d.norm_squared();
                let t = if dd > 0.0 {
                    ((p - a).dot(&d) / dd).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (a + d * t - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn arc_length_parameterization() {
        let p = PathPolyline::new(vec![dvector![0.0, 0.0], dvector![3.0, 0.0], dvector![3.0, 1.0]]).unwrap();
        assert_eq!(p.length(), 4.0);
        assert!((p.point(0.5) - dvector![2.0, 0.0]).norm() < 1e-12);
        assert!((p.point(0.75) - dvector![3.0, 0.0]).norm() < 1e-12);
        assert!((p.point(1.0) - dvector![3.0, 1.0]).norm() < 1e-12);
        assert!((p.point(-1.0) - dvector![0.0, 0.0]).norm() < 1e-12);
        assert!((p.distance_to(&dvector![1.0, 2.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn needs_two_waypoints() {
        assert!(PathPolyline::new(vec![dvector![0.0, 0.0]]).is_err());
        let p = PathPolyline::new(vec![dvector![1.0, 1.0], dvector![1.0, 1.0]]).unwrap();
        assert_eq!(p.length(), 0.0);
        assert_eq!(p.point(0.3), dvector![1.0, 1.0]);
    }
}
