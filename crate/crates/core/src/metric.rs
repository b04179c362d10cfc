//! Directional matrices and the quadratic distances they induce.
//!
//! A directional matrix `Q[v]` has eigenvalue `c1` along `v` and `c2` on the
//! orthogonal complement, so its unit ellipsoid is elongated along `v`.
//! Everything here works in any dimension; the simulator only uses `n = 2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Directions shorter than this are treated as the zero vector.
pub const ZERO_DIRECTION_TOL: f64 = 1e-12;

/// Slack used for ellipsoid membership tests.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Along-motion and lateral weights of a directional matrix.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DirectionalWeights {
    c1: f64,
    c2: f64,
}

impl DirectionalWeights {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1.is_finite() && c2.is_finite()) || c1 <= 0.0 || c1 >= c2 {
            return Err(Error::Config(format!(
                "directional weights require 0 < c1 < c2, got c1 = {c1}, c2 = {c2}"
            )));
        }
        Ok(Self { c1, c2 })
    }

    /// Along-motion weight.
    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Lateral weight.
    pub fn c2(&self) -> f64 {
        self.c2
    }
}

/// The symmetric positive definite matrix `Q[v]` together with the data that built it.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalMatrix {
    q: DMatrix<f64>,
    weights: DirectionalWeights,
    direction: DVector<f64>,
}

impl DirectionalMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.q
    }

    pub fn weights(&self) -> DirectionalWeights {
        self.weights
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.direction
    }

    /// True when the direction fell into the zero branch and `Q = c1 I`.
    pub fn is_isotropic(&self) -> bool {
        self.direction.norm() <= ZERO_DIRECTION_TOL
    }
}

/// Builds `Q[v] = c2 I + (c1 - c2) v vᵀ / ‖v‖²`, or `c1 I` when `v` is (numerically) zero.
pub fn make_directional_matrix(v: &DVector<f64>, w: DirectionalWeights) -> DirectionalMatrix {
    let n = v.len();
    let norm = v.norm();
    let q = if norm > ZERO_DIRECTION_TOL {
        let u = v / norm;
        let mut q = DMatrix::identity(n, n) * w.c2;
        q.ger(w.c1 - w.c2, &u, &u, 1.0);
        // exact symmetry
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (q[(i, j)] + q[(j, i)]);
                q[(i, j)] = s;
                q[(j, i)] = s;
            }
        }
        q
    } else {
        DMatrix::identity(n, n) * w.c1
    };
    DirectionalMatrix {
        q,
        weights: w,
        direction: v.clone(),
    }
}

/// `xᵀ Q x`.
pub fn quad_norm_sq(q: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += q[(i, j)] * x[i];
        }
        acc += col * x[j];
    }
    acc
}

/// Minimum of `(p - g)ᵀ Q (p - g)` over a point cloud; `+∞` for an empty cloud.
pub fn dist_sq_to_point_cloud(q: &DMatrix<f64>, g: &DVector<f64>, pts: &[DVector<f64>]) -> f64 {
    pts.iter()
        .map(|p| quad_norm_sq(q, &(p - g)))
        .fold(f64::INFINITY, f64::min)
}

/// Squared `Q`-distance from `g` to the closed ball `‖a - center‖ ≤ radius`.
///
/// Outside the ball the minimizer lies on the sphere and satisfies
/// `Q (y - w) + μ y = 0` with `y = a - center`, `w = g - center`. In the
/// eigenbasis of `Q` this is a scalar secular equation in `μ ≥ 0`, solved by
/// Newton steps safeguarded with bisection.
pub fn dist_sq_to_disk(q: &DMatrix<f64>, g: &DVector<f64>, center: &DVector<f64>, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("disk radius must be positive, got {radius}")));
    }
    let w = g - center;
    let wn = w.norm();
    if wn <= radius {
        return Ok(0.0);
    }

    let eig = q.clone().symmetric_eigen();
    let lam = &eig.eigenvalues;
    let wh = eig.eigenvectors.transpose() * &w;
    let lmin = lam.min();
    let lmax = lam.max();
    if !(lmin > 0.0) {
        return Err(Error::Numerical(format!(
            "disk distance needs a positive definite metric, smallest eigenvalue {lmin:e}"
        )));
    }

    let r2 = radius * radius;
    // phi(mu) = ‖y(mu)‖² - r², strictly decreasing in mu.
    let phi = |mu: f64| -> (f64, f64) {
        let mut f = -r2;
        let mut df = 0.0;
        for i in 0..lam.len() {
            let d = lam[i] + mu;
            let yi = lam[i] * wh[i] / d;
            f += yi * yi;
            df += -2.0 * yi * yi / d;
        }
        (f, df)
    };

    let mut lo = 0.0;
    let mut hi = lmax * wn / radius;
    let (f_hi, _) = phi(hi);
    if !(phi(lo).0 > 0.0 && f_hi <= 0.0) {
        return Err(Error::Numerical(format!(
            "disk distance root not bracketed: mu in [0, {hi:e}], phi = ({:e}, {f_hi:e}), \
             eigenvalues [{lmin:e}, {lmax:e}], |g - c| = {wn:e}, r = {radius:e}",
            phi(lo).0
        )));
    }

    let mut mu = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = phi(mu);
        if f > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if f.abs() <= 1e-15 * r2 || (hi - lo) <= 1e-15 * hi.max(1.0) {
            break;
        }
        let newton = mu - f / df;
        mu = if df < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }

    let mut value = 0.0;
    for i in 0..lam.len() {
        let di = mu * wh[i] / (lam[i] + mu);
        value += lam[i] * di * di;
    }
    Ok(value)
}

/// Squared `Q`-distance from `g` to the segment `[a, b]`.
pub fn dist_sq_to_segment(q: &DMatrix<f64>, g: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let d = b - a;
    let e = a - g;
    let qd = q * &d;
    let dd = d.dot(&qd);
    let t = if dd > 0.0 {
        (-e.dot(&qd) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    quad_norm_sq(q, &(e + d * t))
}

/// The set `{p : (p - center)ᵀ Q (p - center) ≤ level}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub level: f64,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>, level: f64) -> Result<Self> {
        if !(level >= 0.0) {
            return Err(Error::Config(format!(
                "ellipsoid level must be nonnegative, got {level}"
            )));
        }
        if shape.nrows() != center.len() || shape.ncols() != center.len() {
            return Err(Error::Dimension(format!(
                "shape {}x{} does not match center of length {}",
                shape.nrows(),
                shape.ncols(),
                center.len()
            )));
        }
        Ok(Self { center, shape, level })
    }

    pub fn contains(&self, p: &DVector<f64>) -> bool {
        quad_norm_sq(&self.shape, &(p - &self.center)) <= self.level + MEMBERSHIP_SLACK
    }
}

/// Largest `t ∈ [0, 1]` with `a + t (b - a)` inside `e`, if any.
pub fn ellipsoid_segment_max_param(e: &Ellipsoid, a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let d = b - a;
    let off = a - &e.center;
    let qd = &e.shape * &d;
    let quad = d.dot(&qd);
    let lin = off.dot(&qd);
    let c0 = quad_norm_sq(&e.shape, &off) - e.level;

    if quad <= f64::EPSILON * (1.0 + c0.abs()) {
        // degenerate segment
        return (c0 <= MEMBERSHIP_SLACK).then_some(1.0);
    }
    let t_min = -lin / quad;
    let f_min = c0 - lin * lin / quad;
    if f_min > MEMBERSHIP_SLACK {
        return None;
    }
    let half = ((-f_min).max(0.0) / quad).sqrt();
    let (lo, hi) = (t_min - half, t_min + half);
    if lo > 1.0 {
        return None;
    }
    if hi < 0.0 {
        // only the start point can still be inside within slack
        return (c0 <= MEMBERSHIP_SLACK).then_some(0.0);
    }
    Some(hi.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn w14() -> DirectionalWeights {
        DirectionalWeights::new(1.0, 4.0).unwrap()
    }

    #[test]
    fn diagonal_direction_matrix() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q = make_directional_matrix(&dvector![h, h], w14());
        let expect = dmatrix![2.5, -1.5; -1.5, 2.5];
        assert!((q.matrix() - expect).amax() <= 1e-12);
    }

    #[test]
    fn zero_direction_is_isotropic() {
        let q = make_directional_matrix(&dvector![0.0, 0.0], w14());
        assert_eq!(q.matrix(), &DMatrix::<f64>::identity(2, 2));
        assert!(q.is_isotropic());
    }

    #[test]
    fn axis_direction_and_eigenpairs() {
        let q = make_directional_matrix(&dvector![3.0, 0.0], w14());
        assert!((q.matrix() - dmatrix![1.0, 0.0; 0.0, 4.0]).amax() <= 1e-12);
        let v = dvector![3.0, 0.0];
        assert!((q.matrix() * &v - &v).norm() <= 1e-12);
        let perp = dvector![0.0, 1.0];
        assert!((q.matrix() * &perp - &perp * 4.0).norm() <= 1e-12);
    }

    #[test]
    fn weights_are_validated() {
        assert!(DirectionalWeights::new(4.0, 1.0).is_err());
        assert!(DirectionalWeights::new(1.0, 1.0).is_err());
        assert!(DirectionalWeights::new(0.0, 1.0).is_err());
        assert!(DirectionalWeights::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn quad_norm_examples() {
        assert_eq!(quad_norm_sq(&dmatrix![1.0, 0.0; 0.0, 4.0], &dvector![1.0, 1.0]), 5.0);
        assert_eq!(quad_norm_sq(&DMatrix::identity(2, 2), &dvector![3.0, 4.0]), 25.0);
        assert_eq!(quad_norm_sq(&dmatrix![2.0, 1.0; 1.0, 3.0], &dvector![0.0, 0.0]), 0.0);
    }

    #[test]
    fn point_cloud_examples() {
        let q = dmatrix![1.0, 0.0; 0.0, 4.0];
        let g = dvector![0.0, 0.0];
        assert_eq!(
            dist_sq_to_point_cloud(&q, &g, &[dvector![3.0, 0.0], dvector![0.0, 3.0]]),
            9.0
        );
        assert_eq!(
            dist_sq_to_point_cloud(&DMatrix::identity(2, 2), &dvector![1.0, 1.0], &[dvector![1.0, 1.0]]),
            0.0
        );
        assert_eq!(dist_sq_to_point_cloud(&q, &g, &[]), f64::INFINITY);
    }

    #[test]
    fn disk_examples() {
        let i2 = DMatrix::identity(2, 2);
        let d = dist_sq_to_disk(&i2, &dvector![5.0, 0.0], &dvector![0.0, 0.0], 2.0).unwrap();
        assert!((d - 9.0).abs() < 1e-12);
        let q = dmatrix![1.0, 0.0; 0.0, 4.0];
        let d = dist_sq_to_disk(&q, &dvector![0.3, 0.2], &dvector![0.0, 0.0], 1.0).unwrap();
        assert_eq!(d, 0.0);
        let d = dist_sq_to_disk(&q, &dvector![0.0, 3.0], &dvector![0.0, 0.0], 1.0).unwrap();
        assert!((d - 16.0).abs() < 1e-10, "{d}");
        assert!(dist_sq_to_disk(&q, &dvector![0.0, 3.0], &dvector![0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn segment_examples() {
        let i2 = DMatrix::identity(2, 2);
        let q = dmatrix![1.0, 0.0; 0.0, 4.0];
        let a = dvector![-1.0, 0.0];
        let b = dvector![1.0, 0.0];
        assert!((dist_sq_to_segment(&i2, &dvector![0.0, 1.0], &a, &b) - 1.0).abs() < 1e-12);
        assert!((dist_sq_to_segment(&q, &dvector![0.0, 1.0], &a, &b) - 4.0).abs() < 1e-12);
        let d = dist_sq_to_segment(&i2, &dvector![5.0, 0.0], &dvector![0.0, 0.0], &dvector![1.0, 0.0]);
        assert!((d - 16.0).abs() < 1e-12);
        // degenerate segment falls back to a point distance
        let p = dvector![1.0, 1.0];
        assert!((dist_sq_to_segment(&i2, &dvector![0.0, 1.0], &p, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_param_examples() {
        let e = Ellipsoid::new(dvector![0.0, 0.0], dmatrix![1.0, 0.0; 0.0, 4.0], 4.0).unwrap();
        let t = ellipsoid_segment_max_param(&e, &dvector![0.0, 0.0], &dvector![10.0, 0.0]).unwrap();
        assert!((t - 0.2).abs() < 1e-12);

        let e0 = Ellipsoid::new(dvector![1.0, 2.0], dmatrix![1.0, 0.0; 0.0, 4.0], 0.0).unwrap();
        let t = ellipsoid_segment_max_param(&e0, &dvector![1.0, 2.0], &dvector![7.0, -3.0]).unwrap();
        assert_eq!(t, 0.0);

        let e1 = Ellipsoid::new(dvector![0.0, 0.0], DMatrix::identity(2, 2), 1.0).unwrap();
        assert!(ellipsoid_segment_max_param(&e1, &dvector![5.0, 5.0], &dvector![6.0, 6.0]).is_none());
    }

    #[test]
    fn segment_param_whole_segment_inside() {
        let e = Ellipsoid::new(dvector![0.0, 0.0], DMatrix::identity(2, 2), 100.0).unwrap();
        let t = ellipsoid_segment_max_param(&e, &dvector![0.0, 0.0], &dvector![1.0, 1.0]).unwrap();
        assert_eq!(t, 1.0);
    }

    #[test]
    fn ellipsoid_rejects_negative_level() {
        assert!(Ellipsoid::new(dvector![0.0, 0.0], DMatrix::identity(2, 2), -1.0).is_err());
    }
}
