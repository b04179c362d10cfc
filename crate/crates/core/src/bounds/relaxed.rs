use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::lyapunov::{lambda_max, solve_lyapunov};
use super::{BoundMethod, ClosedLoopSystem, PeakBound};
use crate::error::{Error, Result};

/// Search settings for [`relaxed_output_peak`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedConfig {
    /// Log-spaced decay rates evaluated before the golden-section refinement.
    pub grid_points: usize,
    pub golden_iters: usize,
}

impl Default for RelaxedConfig {
    fn default() -> Self {
        Self {
            grid_points: 24,
            golden_iters: 40,
        }
    }
}

/// A feasible point `(U, δ)` of the invariant-ellipsoid program.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantEllipsoidCert {
    #[serde(serialize_with = "ser_matrix")]
    pub u: DMatrix<f64>,
    pub delta: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    serde::Serialize::serialize(&rows, s)
}

/// Checks the three feasibility conditions of `(U, δ)` for the system and initial state:
/// `ĀᵀU + UĀ ⪯ 0`, `s0ᵀ U s0 ≤ 1`, `λmax(C U⁻¹ Cᵀ) ≤ δ`, plus `U ≻ 0`.
///
/// Also accepts externally computed pairs, e.g. from an SDP solver.
pub fn verify_certificate(
    sys: &ClosedLoopSystem,
    s0: &DVector<f64>,
    u: DMatrix<f64>,
    delta: f64,
) -> Result<InvariantEllipsoidCert> {
    let ns = sys.state_dim();
    if u.nrows() != ns || u.ncols() != ns || s0.len() != ns {
        return Err(Error::Dimension(format!(
            "certificate U is {}x{}, expected {ns}x{ns}",
            u.nrows(),
            u.ncols()
        )));
    }
    let a = sys.a_bar();
    let decay = lambda_max(&(a.transpose() * &u + &u * a));
    if decay > 1e-8 {
        return Err(Error::Numerical(format!(
            "certificate: ĀᵀU + UĀ has eigenvalue {decay:e} > 0"
        )));
    }
    let level = s0.dot(&(&u * s0));
    if level > 1.0 + 1e-9 {
        return Err(Error::Numerical(format!("certificate: s0ᵀUs0 = {level} > 1")));
    }
    let chol = u
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("certificate: U is not positive definite".into()))?;
    let c = sys.c_out();
    let peak = lambda_max(&(c * chol.inverse() * c.transpose()));
    if peak > delta + 1e-8 {
        return Err(Error::Numerical(format!(
            "certificate: λmax(CU⁻¹Cᵀ) = {peak} exceeds δ = {delta}"
        )));
    }
    Ok(InvariantEllipsoidCert { u, delta })
}

struct Candidate {
    beta: f64,
    delta: f64,
    u: DMatrix<f64>,
}

fn candidate(sys: &ClosedLoopSystem, s0: &DVector<f64>, beta: f64, eps: f64) -> Option<Candidate> {
    let ns = sys.state_dim();
    let shifted = sys.a_bar() + DMatrix::<f64>::identity(ns, ns) * beta;
    let u = solve_lyapunov(&shifted, &(DMatrix::<f64>::identity(ns, ns) * -eps)).ok()?;
    let scale = s0.dot(&(&u * s0));
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    let u = u / scale;
    let u_inv = u.clone().cholesky()?.inverse();
    let c = sys.c_out();
    let delta = lambda_max(&(c * u_inv * c.transpose()));
    delta.is_finite().then_some(Candidate { beta, delta, u })
}

/// Invariant-ellipsoid upper bound `δ ≥ η` with its certificate.
///
/// Searches the feasible family `(Ā + βI)ᵀU + U(Ā + βI) = −εI`, `U` rescaled so
/// that `s0ᵀUs0 = 1`, over decay rates `β ∈ (0, −max Re λ(Ā))`. Each member
/// satisfies every constraint of the program, so whichever `β` is returned the
/// bound is sound; the search only makes it tighter.
pub fn relaxed_output_peak(
    sys: &ClosedLoopSystem,
    s0: &DVector<f64>,
    cfg: RelaxedConfig,
) -> Result<(PeakBound, InvariantEllipsoidCert)> {
    let ns = sys.state_dim();
    if s0.len() != ns {
        return Err(Error::Dimension(format!(
            "initial state has length {}, system has {ns} states",
            s0.len()
        )));
    }
    if s0.iter().all(|&v| v == 0.0) {
        // any scaled-up Lyapunov ellipsoid works; pick one with a negligible output peak
        let p = sys.envelope();
        let c = sys.c_out();
        let p_inv = p.clone().cholesky().map(|ch| ch.inverse());
        let gain = p_inv.map(|pi| lambda_max(&(c * pi * c.transpose()))).unwrap_or(1.0);
        let u = p * (gain.max(1e-300) * 1e10);
        let cert = verify_certificate(sys, s0, u, 0.0)?;
        let bound = PeakBound {
            value: 0.0,
            method: BoundMethod::InvariantEllipsoid,
            argmax_time: None,
            decay_rate: None,
        };
        return Ok((bound, cert));
    }

    let sigma = -sys.spectral_abscissa();
    let eps = 1e-6 * sys.a_bar().norm().max(1e-12);
    let mut log_lo = (sigma * 1e-4).ln();
    let mut log_hi = (sigma * (1.0 - 1e-3)).ln();

    // coarse scan; shrink the upper end while the shifted operator is singular
    let mut grid: Vec<Candidate> = Vec::new();
    for _attempt in 0..8 {
        grid.clear();
        let n = cfg.grid_points.max(3);
        for i in 0..n {
            let lb = log_lo + (log_hi - log_lo) * i as f64 / (n - 1) as f64;
            if let Some(c) = candidate(sys, s0, lb.exp(), eps) {
                grid.push(c);
            }
        }
        if !grid.is_empty() {
            break;
        }
        log_hi = log_lo + 0.5 * (log_hi - log_lo);
    }
    if grid.is_empty() {
        return Err(Error::Numerical("relaxed bound: no feasible decay rate found".into()));
    }

    let best_idx = (0..grid.len())
        .min_by(|&a, &b| grid[a].delta.total_cmp(&grid[b].delta))
        .unwrap();
    let mut best = grid.swap_remove(best_idx);
    let width = (log_hi - log_lo) / (cfg.grid_points.max(3) - 1) as f64;
    log_lo = (best.beta.ln() - width).max(log_lo);
    log_hi = (best.beta.ln() + width).min(log_hi);

    // golden-section on ln β around the coarse minimum
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (log_lo, log_hi);
    let eval = |lb: f64| candidate(sys, s0, lb.exp(), eps);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    let score = |c: &Option<Candidate>| c.as_ref().map_or(f64::INFINITY, |c| c.delta);
    for _ in 0..cfg.golden_iters {
        if score(&f1) <= score(&f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = eval(x2);
        }
    }
    for c in [f1, f2].into_iter().flatten() {
        if c.delta < best.delta {
            best = c;
        }
    }

    let cert = verify_certificate(sys, s0, best.u, best.delta)?;
    let bound = PeakBound {
        value: best.delta,
        method: BoundMethod::InvariantEllipsoid,
        argmax_time: None,
        decay_rate: Some(best.beta),
    };
    Ok((bound, cert))
}
