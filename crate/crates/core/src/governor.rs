//! Robot–governor controller.
//!
//! The robot runs a PD loop toward the governor position `g`. The governor
//! chases the local projected goal `ḡ`, the farthest point of the path that
//! lies in the local safe zone around `g`. Two zone constructions are
//! available: the directional one built from output-peak bounds, and the
//! Euclidean energy ball used as a baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::{
    exact_output_peak, relaxed_output_peak, BoundMethod, ClosedLoopSystem, HorizonConfig, PeakBound, RelaxedConfig,
};
use crate::error::{Error, Result};
use crate::metric::{
    ellipsoid_segment_max_param, make_directional_matrix, DirectionalMatrix, DirectionalWeights, Ellipsoid,
};
use crate::path::PathPolyline;

/// Squared `Q`-distance from a point to the obstacle set.
pub trait ObstacleDistance {
    fn dist_sq(&self, q: &DMatrix<f64>, g: &DVector<f64>) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    /// Directional safe zone from output-peak bounds.
    Sddm,
    /// Euclidean ball from the kinetic plus potential energy.
    Euclidean,
}

impl std::fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControllerMode::Sddm => "sddm",
            ControllerMode::Euclidean => "euclidean",
        })
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sddm" => Ok(ControllerMode::Sddm),
            "euclidean" => Ok(ControllerMode::Euclidean),
            other => Err(Error::Config(format!("unknown controller mode '{other}'"))),
        }
    }
}

/// Which trajectory bound feeds the directional safe zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundChoice {
    #[default]
    Exact,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerGains {
    pub k: f64,
    pub zeta: f64,
    pub k_g: f64,
    pub weights: DirectionalWeights,
}

impl ControllerGains {
    pub fn new(k: f64, zeta: f64, k_g: f64, weights: DirectionalWeights) -> Result<Self> {
        for (name, v) in [("k", k), ("zeta", zeta), ("k_g", k_g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "gain {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { k, zeta, k_g, weights })
    }
}

impl Default for ControllerGains {
    /// `k = k_g = 1`, `ζ = 2√2` (critically damped), `c1 = 1`, `c2 = 4`.
    fn default() -> Self {
        Self {
            k: 1.0,
            zeta: 2.0 * std::f64::consts::SQRT_2,
            k_g: 1.0,
            weights: DirectionalWeights::new(1.0, 4.0).expect("valid default weights"),
        }
    }
}

/// Augmented robot–governor state.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotGovernorState {
    pub x: DVector<f64>,
    pub v: DVector<f64>,
    pub g: DVector<f64>,
    pub t: f64,
}

impl RobotGovernorState {
    /// Robot at rest on top of the governor.
    pub fn at_rest(p: DVector<f64>) -> Self {
        Self {
            v: DVector::zeros(p.len()),
            g: p.clone(),
            x: p,
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self
                .x
                .iter()
                .chain(self.v.iter())
                .chain(self.g.iter())
                .all(|v| v.is_finite())
    }

    /// Tracking-error state `(x − g, v)` of the PD loop.
    pub fn error_state(&self) -> DVector<f64> {
        let n = self.x.len();
        let mut s = DVector::zeros(2 * n);
        for i in 0..n {
            s[i] = self.x[i] - self.g[i];
            s[n + i] = self.v[i];
        }
        s
    }
}

/// Time derivative of [`RobotGovernorState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dx: DVector<f64>,
    pub dv: DVector<f64>,
    pub dg: DVector<f64>,
}

/// `A`, `B`, `K` of an `n`-axis double integrator under `u = −2k x − ζ ẋ`.
pub fn double_integrator(k: f64, zeta: f64, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let mut b = DMatrix::zeros(2 * n, n);
    let mut kk = DMatrix::zeros(n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        b[(n + i, i)] = 1.0;
        kk[(i, i)] = 2.0 * k;
        kk[(i, n + i)] = zeta;
    }
    (a, b, kk)
}

/// Robot acceleration `−2k (x − g) − ζ v`.
pub fn tracking_control(state: &RobotGovernorState, gains: &ControllerGains) -> DVector<f64> {
    (&state.x - &state.g) * (-2.0 * gains.k) - &state.v * gains.zeta
}

/// `Q[g − x]`.
pub fn current_metric(state: &RobotGovernorState, weights: DirectionalWeights) -> DirectionalMatrix {
    make_directional_matrix(&(&state.g - &state.x), weights)
}

/// Governor velocity `−k_g (g − ḡ)`.
pub fn governor_control(state: &RobotGovernorState, gbar: &DVector<f64>, gains: &ControllerGains) -> DVector<f64> {
    (&state.g - gbar) * -gains.k_g
}

/// `E = k ‖x − g‖² + ½ ‖v‖²`.
pub fn baseline_energy(state: &RobotGovernorState, gains: &ControllerGains) -> f64 {
    gains.k * (&state.x - &state.g).norm_squared() + 0.5 * state.v.norm_squared()
}

/// Ellipsoidal region around `g` inside which the projected goal may sit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSafeZone {
    pub zone: Ellipsoid,
    /// Leeway `d²(g, O) − bound`; may be negative or `−∞`.
    pub delta_e: f64,
    pub dist_sq_obs: f64,
    pub bound: PeakBound,
}

impl LocalSafeZone {
    fn assemble(g: &DVector<f64>, shape: DMatrix<f64>, dist_sq_obs: f64, bound: PeakBound) -> Self {
        let delta_e = dist_sq_obs - bound.value;
        let level = if delta_e > 0.0 && delta_e.is_finite() {
            delta_e
        } else {
            0.0
        };
        LocalSafeZone {
            zone: Ellipsoid {
                center: g.clone(),
                shape,
                level,
            },
            delta_e,
            dist_sq_obs,
            bound,
        }
    }
}

/// Euclidean energy-ball safe zone of the baseline controller.
///
/// `E` never increases for a static governor and `k ‖x − g‖² ≤ E`, so the
/// robot stays in the ball `‖q − g‖² ≤ E/k`. The zone has squared radius
/// `d²(g, O) − E/k`.
pub fn baseline_safe_zone(
    state: &RobotGovernorState,
    world: &dyn ObstacleDistance,
    gains: &ControllerGains,
) -> Result<LocalSafeZone> {
    let n = state.g.len();
    let eye = DMatrix::identity(n, n);
    let dist_sq = world.dist_sq(&eye, &state.g)?;
    let bound = PeakBound {
        value: baseline_energy(state, gains) / gains.k,
        method: BoundMethod::LyapunovEnergy,
        argmax_time: None,
        decay_rate: None,
    };
    Ok(LocalSafeZone::assemble(&state.g, eye, dist_sq, bound))
}

/// Farthest path parameter inside the zone and the corresponding projected goal.
///
/// With no leeway the governor holds: `ḡ = g`. If no part of the path meets
/// the zone the previous parameter is kept and the governor also holds.
pub fn project_goal(path: &PathPolyline, zone: &LocalSafeZone, alpha_prev: f64) -> (f64, DVector<f64>) {
    let best = path
        .segments()
        .filter_map(|(a, b, a0, a1)| ellipsoid_segment_max_param(&zone.zone, a, b).map(|t| a0 + t * (a1 - a0)))
        .fold(None, |acc: Option<f64>, al| Some(acc.map_or(al, |m| m.max(al))));
    let g = &zone.zone.center;
    match best {
        Some(alpha) if zone.delta_e > 0.0 => (alpha, path.point(alpha)),
        Some(alpha) => (alpha, g.clone()),
        None => (alpha_prev, g.clone()),
    }
}

/// Safe-zone computation for both controller modes.
#[derive(Debug, Clone)]
pub struct SafeZoneController {
    gains: ControllerGains,
    system: ClosedLoopSystem,
    pub horizon: HorizonConfig,
    pub relaxed: RelaxedConfig,
}

impl SafeZoneController {
    /// Builds the PD closed loop for an `n`-dimensional double integrator.
    pub fn new(gains: ControllerGains, n: usize) -> Result<Self> {
        let (a, b, k) = double_integrator(gains.k, gains.zeta, n);
        let system = crate::bounds::build_closed_loop(&a, &b, &k, &DMatrix::identity(n, n))?;
        Ok(Self {
            gains,
            system,
            horizon: HorizonConfig::default(),
            relaxed: RelaxedConfig::default(),
        })
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn system(&self) -> &ClosedLoopSystem {
        &self.system
    }

    /// Output-peak bound of `‖x(τ) − g‖²_Q` for a frozen governor and metric.
    pub fn trajectory_bound(
        &self,
        state: &RobotGovernorState,
        q: &DMatrix<f64>,
        method: BoundChoice,
    ) -> Result<PeakBound> {
        let sys = self.system.with_metric(q)?;
        let s0 = state.error_state();
        match method {
            BoundChoice::Exact => exact_output_peak(&sys, &s0, self.horizon),
            BoundChoice::Relaxed => relaxed_output_peak(&sys, &s0, self.relaxed).map(|(b, _)| b),
        }
    }

    /// Directional safe zone `{q : ‖q − g‖²_Q ≤ max(0, d²_Q(g, O) − bound)}` with `Q = Q[g − x]`.
    pub fn compute_safe_zone(
        &self,
        state: &RobotGovernorState,
        world: &dyn ObstacleDistance,
        method: BoundChoice,
    ) -> Result<LocalSafeZone> {
        let q = current_metric(state, self.gains.weights).into_matrix();
        let dist_sq = world.dist_sq(&q, &state.g)?;
        let bound = self.trajectory_bound(state, &q, method)?;
        Ok(LocalSafeZone::assemble(&state.g, q, dist_sq, bound))
    }

    /// Safe zone for `mode`. An uncertified bound yields a zero-leeway zone
    /// with `ΔE = −∞`, which stops the governor.
    pub fn safe_zone(
        &self,
        state: &RobotGovernorState,
        world: &dyn ObstacleDistance,
        mode: ControllerMode,
        method: BoundChoice,
    ) -> Result<LocalSafeZone> {
        match mode {
            ControllerMode::Euclidean => baseline_safe_zone(state, world, &self.gains),
            ControllerMode::Sddm => match self.compute_safe_zone(state, world, method) {
                Err(Error::BoundUncertain { horizon }) => {
                    log::warn!("trajectory bound not certified within {horizon} s; holding governor");
                    let q = current_metric(state, self.gains.weights).into_matrix();
                    let dist_sq = world.dist_sq(&q, &state.g)?;
                    let bound = PeakBound {
                        value: f64::INFINITY,
                        method: match method {
                            BoundChoice::Exact => BoundMethod::ExactCriticalPoints,
                            BoundChoice::Relaxed => BoundMethod::InvariantEllipsoid,
                        },
                        argmax_time: None,
                        decay_rate: None,
                    };
                    Ok(LocalSafeZone::assemble(&state.g, q, dist_sq, bound))
                }
                other => other,
            },
        }
    }

    /// Closed-loop vector field with `ḡ` recomputed from the current state.
    pub fn rgs_derivative(
        &self,
        state: &RobotGovernorState,
        world: &dyn ObstacleDistance,
        path: &PathPolyline,
        mode: ControllerMode,
        method: BoundChoice,
    ) -> Result<StateDerivative> {
        let zone = self.safe_zone(state, world, mode, method)?;
        let (_, gbar) = project_goal(path, &zone, 0.0);
        Ok(derivative_with_goal(state, &gbar, &self.gains))
    }
}

/// Vector field with the projected goal held fixed.
pub fn derivative_with_goal(
    state: &RobotGovernorState,
    gbar: &DVector<f64>,
    gains: &ControllerGains,
) -> StateDerivative {
    StateDerivative {
        dx: state.v.clone(),
        dv: tracking_control(state, gains),
        dg: governor_control(state, gbar, gains),
    }
}
