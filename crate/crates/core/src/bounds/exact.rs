use nalgebra::{DMatrix, DVector};

use super::lyapunov::lambda_max;
use super::{BoundMethod, ClosedLoopSystem, PeakBound};
use crate::error::{Error, Result};

/// Sampling and termination settings for [`exact_output_peak`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonConfig {
    /// Upper limit on the sampling step (s); tightened for fast dynamics.
    pub sample_dt: f64,
    /// Give up (bound-uncertain) if the peak is not certified by this time (s).
    pub max_horizon: f64,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self {
            sample_dt: 0.02,
            max_horizon: 200.0,
        }
    }
}

struct PeakProblem<'a> {
    c: &'a DMatrix<f64>,
    ca: DMatrix<f64>,
    ca2: DMatrix<f64>,
    a_bar: &'a DMatrix<f64>,
}

impl PeakProblem<'_> {
    fn value(&self, s: &DVector<f64>) -> f64 {
        (self.c * s).norm_squared()
    }

    // d/dt ‖z‖² and its derivative
    fn slope(&self, s: &DVector<f64>) -> (f64, f64) {
        let z = self.c * s;
        let zd = &self.ca * s;
        let zdd = &self.ca2 * s;
        (2.0 * z.dot(&zd), 2.0 * (zd.norm_squared() + z.dot(&zdd)))
    }

    /// Locates the root of the slope in `[0, h]` starting from `s`, where the
    /// slope is positive at 0 and nonpositive at `h`.
    fn refine(&self, s: &DVector<f64>, h: f64) -> (f64, DVector<f64>) {
        let at = |tau: f64| (self.a_bar * tau).exp() * s;
        let (mut lo, mut hi) = (0.0, h);
        let mut tau = 0.5 * h;
        let mut st = at(tau);
        for _ in 0..60 {
            let (f, df) = self.slope(&st);
            if f > 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            if hi - lo <= 1e-13 * h.max(1.0) || f == 0.0 {
                break;
            }
            let newton = tau - f / df;
            tau = if df < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            st = at(tau);
        }
        (tau, st)
    }
}

/// Exact output peak `η = max_{t ≥ 0} ‖C e^{Āt} s0‖²`.
///
/// The trajectory is sampled on a uniform grid; every down-crossing of
/// `d/dt ‖z‖²` is refined to a critical point and compared with the boundary
/// value at `t = 0`. The search ends once the Lyapunov envelope
/// `‖z(τ)‖² ≤ λmax(C P⁻¹ Cᵀ) · s(t)ᵀ P s(t)` for `τ ≥ t` drops below the best
/// value found, which certifies that no later peak exists.
pub fn exact_output_peak(sys: &ClosedLoopSystem, s0: &DVector<f64>, cfg: HorizonConfig) -> Result<PeakBound> {
    if s0.len() != sys.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, system has {} states",
            s0.len(),
            sys.state_dim()
        )));
    }
    if !s0.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite initial state".into()));
    }
    if s0.iter().all(|&v| v == 0.0) {
        return Ok(PeakBound {
            value: 0.0,
            method: BoundMethod::ExactCriticalPoints,
            argmax_time: Some(0.0),
            decay_rate: None,
        });
    }

    let a_bar = sys.a_bar();
    let c = sys.c_out();
    let ca = c * a_bar;
    let ca2 = &ca * a_bar;
    let prob = PeakProblem { c, ca, ca2, a_bar };

    let p = sys.envelope();
    let p_inv = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("envelope matrix is not positive definite".into()))?
        .inverse();
    let gain = lambda_max(&(c * p_inv * c.transpose())) * (1.0 + 1e-9);

    let h = cfg.sample_dt.min(0.2 / a_bar.norm().max(1e-12));
    let step = (a_bar * h).exp();

    let mut best = prob.value(s0);
    let mut best_t = 0.0;
    let mut t = 0.0;
    let mut s = s0.clone();
    let (mut slope, _) = prob.slope(&s);

    loop {
        let envelope = gain * s.dot(&(p * &s));
        if envelope <= best {
            break;
        }
        if t > cfg.max_horizon {
            return Err(Error::BoundUncertain {
                horizon: cfg.max_horizon,
            });
        }
        let next = &step * &s;
        let (next_slope, _) = prob.slope(&next);
        if slope > 0.0 && next_slope <= 0.0 {
            let (tau, st) = prob.refine(&s, h);
            let v = prob.value(&st);
            if v > best {
                best = v;
                best_t = t + tau;
            }
        }
        let v = prob.value(&next);
        if v > best {
            best = v;
            best_t = t + h;
        }
        s = next;
        slope = next_slope;
        t += h;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("state propagation produced non-finite values".into()));
        }
    }

    Ok(PeakBound {
        value: best,
        method: BoundMethod::ExactCriticalPoints,
        argmax_time: Some(best_t),
        decay_rate: None,
    })
}
