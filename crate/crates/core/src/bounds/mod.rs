//! Output-peak bounds for stabilized LTI systems measured in a directional metric.
//!
//! For `ṡ = Ā s`, `z = C s` with `C = Q^{1/2} P`, the peak
//! `η = max_{t ≥ 0} ‖z(t)‖²` bounds how far the position can travel in the
//! `Q`-norm. [`exact_output_peak`] finds it by a certified critical-point search;
//! [`relaxed_output_peak`] returns a cheaper invariant-ellipsoid upper bound `δ ≥ η`.

mod exact;
mod lyapunov;
mod relaxed;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub use exact::{exact_output_peak, HorizonConfig};
pub use lyapunov::{solve_lyapunov, symmetric_sqrt};
pub use relaxed::{relaxed_output_peak, verify_certificate, InvariantEllipsoidCert, RelaxedConfig};

/// Which algorithm produced a [`PeakBound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    ExactCriticalPoints,
    InvariantEllipsoid,
    /// Energy level `E/k` of the Euclidean baseline.
    LyapunovEnergy,
}

/// An upper bound on `‖z(t)‖²` for all future time, in squared metric units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakBound {
    pub value: f64,
    pub method: BoundMethod,
    /// Time of the peak after `t0` (exact method only).
    pub argmax_time: Option<f64>,
    /// Decay rate `β` of the invariant ellipsoid (relaxed method only).
    pub decay_rate: Option<f64>,
}

/// Stabilized closed loop `ṡ = Ā s`, `z = C s`.
#[derive(Debug, Clone)]
pub struct ClosedLoopSystem {
    a_bar: DMatrix<f64>,
    c_out: DMatrix<f64>,
    proj: DMatrix<f64>,
    abscissa: f64,
    // P with ĀᵀP + PĀ = -I; sᵀPs never increases along trajectories
    envelope: DMatrix<f64>,
}

/// Largest real part over the spectrum of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Position selector `P = [I, 0]`.
pub fn position_projection(pos_dim: usize, state_dim: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(pos_dim, state_dim);
    for i in 0..pos_dim {
        p[(i, i)] = 1.0;
    }
    p
}

/// Forms `Ā = A − B K` and `C = Q^{1/2} P`; refuses non-Hurwitz `Ā`.
pub fn build_closed_loop(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k_gain: &DMatrix<f64>,
    q_dir: &DMatrix<f64>,
) -> Result<ClosedLoopSystem> {
    let ns = a.nrows();
    if a.ncols() != ns || b.nrows() != ns || k_gain.ncols() != ns || k_gain.nrows() != b.ncols() {
        return Err(Error::Dimension(format!(
            "A {}x{}, B {}x{}, K {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            k_gain.nrows(),
            k_gain.ncols()
        )));
    }
    ClosedLoopSystem::from_matrix(a - b * k_gain, q_dir)
}

impl ClosedLoopSystem {
    /// Builds the system directly from `Ā`; positions are the leading `q_dir.nrows()` states.
    pub fn from_matrix(a_bar: DMatrix<f64>, q_dir: &DMatrix<f64>) -> Result<Self> {
        let ns = a_bar.nrows();
        let n = q_dir.nrows();
        if a_bar.ncols() != ns || q_dir.ncols() != n || n > ns || n == 0 {
            return Err(Error::Dimension(format!(
                "Ā is {}x{}, Q is {}x{}",
                a_bar.nrows(),
                a_bar.ncols(),
                q_dir.nrows(),
                q_dir.ncols()
            )));
        }
        if !a_bar.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("Ā has non-finite entries".into()));
        }
        let abscissa = spectral_abscissa(&a_bar);
        if !(abscissa < 0.0) {
            return Err(Error::NotHurwitz { abscissa });
        }
        let envelope = solve_lyapunov(&a_bar, &-DMatrix::<f64>::identity(ns, ns))?;
        let proj = position_projection(n, ns);
        let c_out = symmetric_sqrt(q_dir)? * &proj;
        Ok(Self {
            a_bar,
            c_out,
            proj,
            abscissa,
            envelope,
        })
    }

    /// Same dynamics, new output metric.
    pub fn with_metric(&self, q_dir: &DMatrix<f64>) -> Result<Self> {
        if q_dir.nrows() != self.pos_dim() || q_dir.ncols() != self.pos_dim() {
            return Err(Error::Dimension(format!(
                "metric is {}x{}, position dimension is {}",
                q_dir.nrows(),
                q_dir.ncols(),
                self.pos_dim()
            )));
        }
        let mut out = self.clone();
        out.c_out = symmetric_sqrt(q_dir)? * &self.proj;
        Ok(out)
    }

    pub fn a_bar(&self) -> &DMatrix<f64> {
        &self.a_bar
    }

    pub fn c_out(&self) -> &DMatrix<f64> {
        &self.c_out
    }

    pub fn proj(&self) -> &DMatrix<f64> {
        &self.proj
    }

    pub fn state_dim(&self) -> usize {
        self.a_bar.nrows()
    }

    pub fn pos_dim(&self) -> usize {
        self.proj.nrows()
    }

    /// Largest real part of the spectrum of `Ā` (negative).
    pub fn spectral_abscissa(&self) -> f64 {
        self.abscissa
    }

    pub(crate) fn envelope(&self) -> &DMatrix<f64> {
        &self.envelope
    }

    /// `‖C s‖²`.
    pub fn output_sq(&self, s: &DVector<f64>) -> f64 {
        (&self.c_out * s).norm_squared()
    }

    /// State at time `t` from `s0` (matrix exponential).
    pub fn propagate(&self, s0: &DVector<f64>, t: f64) -> DVector<f64> {
        (&self.a_bar * t).exp() * s0
    }
}
