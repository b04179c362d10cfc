use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::governor::{derivative_with_goal, ControllerGains, RobotGovernorState, StateDerivative};

fn offset(s: &RobotGovernorState, d: &StateDerivative, h: f64) -> RobotGovernorState {
    RobotGovernorState {
        x: &s.x + &d.dx * h,
        v: &s.v + &d.dv * h,
        g: &s.g + &d.dg * h,
        t: s.t + h,
    }
}

/// One classical RK4 step of the robot–governor system with `ḡ` held fixed.
pub fn rk4_step(
    state: &RobotGovernorState,
    gbar: &DVector<f64>,
    gains: &ControllerGains,
    dt: f64,
) -> Result<RobotGovernorState> {
    let k1 = derivative_with_goal(state, gbar, gains);
    let k2 = derivative_with_goal(&offset(state, &k1, dt / 2.0), gbar, gains);
    let k3 = derivative_with_goal(&offset(state, &k2, dt / 2.0), gbar, gains);
    let k4 = derivative_with_goal(&offset(state, &k3, dt), gbar, gains);
    let w = dt / 6.0;
    let next = RobotGovernorState {
        x: &state.x + (&k1.dx + &k2.dx * 2.0 + &k3.dx * 2.0 + &k4.dx) * w,
        v: &state.v + (&k1.dv + &k2.dv * 2.0 + &k3.dv * 2.0 + &k4.dv) * w,
        g: &state.g + (&k1.dg + &k2.dg * 2.0 + &k3.dg * 2.0 + &k4.dg) * w,
        t: state.t + dt,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NumericalBlowup { t: next.t })
    }
}
