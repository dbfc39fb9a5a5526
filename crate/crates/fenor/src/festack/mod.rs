//! Metal–ferroelectric–IGZO (MFS) gate-stack model.
//!
//! The stack is described by a tanh saturated-loop polarization kernel with
//! Miller-style minor loops, an electron-only channel charge closure, and a
//! hard pinch clamp `Q_FE >= q_min` standing in for the missing hole
//! compensation in the IGZO channel. Threshold voltages come out of the
//! loadline construction: the gate voltages where the traced Q_FE–V_G loop
//! crosses `Q_FE = sigma_th`.
//!
//! Sign conventions used throughout:
//!
//! - `sigma` is the electron sheet-charge **magnitude** (C/m², >= 0 under the
//!   default clamp). Charge balance across the FE/IGZO interface makes the
//!   ferroelectric face charge `Q_FE = sigma`, so the loadline sits at
//!   `Q_FE = +sigma_th` on the plotted axis.
//! - `E_FE > 0` points from gate to channel; positive gate bias drives the
//!   stack toward positive polarization.

mod kernel;
mod trace;

pub use kernel::{advance_state, saturation_branch};
pub use trace::{extract_vt, solve_gate_step, trace_qv_loop, vt_vs_tfe, TracePreset, VtSweep};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::U_T;

#[derive(Debug, Error)]
pub enum FeStackError {
    #[error("invalid stack parameter: {0}")]
    InvalidParam(String),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("gate-step solver did not converge (last residual {residual:.3e} V)")]
    NonConvergence { residual: f64 },
    #[error("loadline Q_FE = sigma_th not crossed on the {branch} branch; increase sweep amplitude")]
    LoadlineNotCrossed { branch: &'static str },
    #[error("trace failed at waveform index {index}: {source}")]
    TraceFailed {
        index: usize,
        #[source]
        source: Box<FeStackError>,
    },
}

/// Traversal sense of the polarization kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchDir {
    /// Increasing field (ascending branch).
    Up,
    /// Decreasing field (descending branch).
    Down,
}

/// MFS stack constants. Construct through [`FerroStackParams::new`], which
/// validates the set and derives `sigma_0` from the calibration identity
/// `V_IGZO(sigma_th) = v_fb + psi_s_th`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FerroStackParams {
    /// Ferroelectric thickness (m).
    pub t_fe: f64,
    /// Absolute ferroelectric permittivity (F/m).
    pub eps_fe: f64,
    /// Saturation polarization (C/m²).
    pub p_s: f64,
    /// Remanent polarization (C/m²).
    pub p_r: f64,
    /// Coercive field (V/m).
    pub e_c: f64,
    /// Flatband voltage (V).
    pub v_fb: f64,
    /// Channel surface potential at threshold (V).
    pub psi_s_th: f64,
    /// Channel sheet-charge magnitude at threshold (C/m²).
    pub sigma_th: f64,
    /// Lower clamp on Q_FE (C/m²). 0 encodes the electron-only pinch;
    /// `f64::NEG_INFINITY` disables the clamp.
    pub q_min: f64,
    /// Subthreshold ideality of the channel charge closure.
    pub channel_n: f64,
    /// Channel charge prefactor (C/m²), derived from the threshold identity.
    pub sigma_0: f64,
    /// Accumulation capacitance per area (F/m²).
    pub c_acc: f64,
}

impl FerroStackParams {
    /// Validate and derive `sigma_0` so that the channel voltage closure hits
    /// `v_fb + psi_s_th` exactly at `sigma = sigma_th`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t_fe: f64,
        eps_fe: f64,
        p_s: f64,
        p_r: f64,
        e_c: f64,
        v_fb: f64,
        psi_s_th: f64,
        sigma_th: f64,
        q_min: f64,
        channel_n: f64,
        c_acc: f64,
    ) -> Result<Self, FeStackError> {
        let fail = |msg: String| Err(FeStackError::InvalidParam(msg));
        if !(t_fe > 0.0 && t_fe.is_finite()) {
            return fail(format!("t_fe must be > 0, got {t_fe:e}"));
        }
        if !(eps_fe > 0.0 && eps_fe.is_finite()) {
            return fail(format!("eps_fe must be > 0, got {eps_fe:e}"));
        }
        if !(p_s > 0.0 && p_r > 0.0 && p_r < p_s) {
            return fail(format!("need 0 < p_r < p_s, got p_r = {p_r:e}, p_s = {p_s:e}"));
        }
        if !(e_c > 0.0 && e_c.is_finite()) {
            return fail(format!("e_c must be > 0, got {e_c:e}"));
        }
        if !(sigma_th > 0.0 && sigma_th.is_finite()) {
            return fail(format!("sigma_th must be > 0, got {sigma_th:e}"));
        }
        // q_min <= 0 is fine; only clamps below -p_s are unreachable by the
        // kernel and rejected. NEG_INFINITY is the documented "no clamp".
        if q_min > 0.0 || (q_min.is_finite() && q_min < -p_s) {
            return fail(format!("q_min must lie in [-p_s, 0] or be -inf, got {q_min:e}"));
        }
        if q_min.is_nan() {
            return fail("q_min must not be NaN".into());
        }
        if !(channel_n >= 1.0 && channel_n.is_finite()) {
            return fail(format!("channel_n must be >= 1, got {channel_n}"));
        }
        if !(c_acc > 0.0 && c_acc.is_finite()) {
            return fail(format!("c_acc must be > 0, got {c_acc:e}"));
        }
        if !(v_fb.is_finite() && psi_s_th > 0.0) {
            return fail(format!("need finite v_fb and psi_s_th > 0, got {v_fb}, {psi_s_th}"));
        }
        // sigma_0 from: channel_n*U_T*ln(1 + sigma_th/sigma_0) + sigma_th/c_acc = psi_s_th
        let ln_arg = (psi_s_th - sigma_th / c_acc) / (channel_n * U_T);
        if ln_arg <= 0.0 {
            return fail(format!(
                "threshold identity unsolvable: psi_s_th = {psi_s_th} V must exceed \
                 sigma_th/c_acc = {:.4} V",
                sigma_th / c_acc
            ));
        }
        let sigma_0 = sigma_th / ln_arg.exp_m1();
        Ok(Self {
            t_fe,
            eps_fe,
            p_s,
            p_r,
            e_c,
            v_fb,
            psi_s_th,
            sigma_th,
            q_min,
            channel_n,
            sigma_0,
            c_acc,
        })
    }

    /// Same stack with a different ferroelectric thickness.
    pub fn with_t_fe(&self, t_fe: f64) -> Result<Self, FeStackError> {
        if !(t_fe > 0.0 && t_fe.is_finite()) {
            return Err(FeStackError::InvalidParam(format!(
                "t_fe must be > 0, got {t_fe:e}"
            )));
        }
        Ok(Self { t_fe, ..*self })
    }

    /// Shape parameter of the tanh branches, constructed so the descending
    /// branch passes through (0, p_r).
    #[inline]
    pub fn delta(&self) -> f64 {
        let r = self.p_r / self.p_s;
        self.e_c / ((1.0 + r) / (1.0 - r)).ln()
    }

    /// Channel-side voltage (flatband + surface potential) as a function of
    /// the electron sheet-charge magnitude. Below sigma = 0 the closure is
    /// extended linearly with the sigma = 0 slope, a smooth stand-in for the
    /// depleted-film regime used only when `q_min < 0`.
    pub fn v_igzo(&self, sigma: f64) -> f64 {
        if sigma >= 0.0 {
            self.v_fb
                + self.channel_n * U_T * (sigma / self.sigma_0).ln_1p()
                + sigma / self.c_acc
        } else {
            let slope0 = self.channel_n * U_T / self.sigma_0 + 1.0 / self.c_acc;
            self.v_fb + sigma * slope0
        }
    }

}

/// A reversal record of the traversal history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub e: f64,
    pub p: f64,
}

/// Polarization history of one stack instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HysteresisState {
    /// Current polarization (C/m²).
    pub p: f64,
    /// Current ferroelectric field (V/m).
    pub e: f64,
    /// Sense of the last traversal.
    pub direction: BranchDir,
    /// Nested reversal records, innermost last. Kinds alternate between
    /// maxima and minima; re-crossing one pops the closed pair.
    pub turning_points: Vec<TurningPoint>,
}

impl HysteresisState {
    /// Depolarized virgin state at zero field.
    pub fn virgin() -> Self {
        Self {
            p: 0.0,
            e: 0.0,
            direction: BranchDir::Up,
            turning_points: Vec::new(),
        }
    }

    /// State after full positive saturation followed by return to zero field:
    /// on the descending branch at the remanent point.
    pub fn saturated_up(params: &FerroStackParams) -> Self {
        Self {
            p: saturation_branch(0.0, BranchDir::Down, params),
            e: 0.0,
            direction: BranchDir::Down,
            turning_points: Vec::new(),
        }
    }

    /// Ferroelectric face charge eps_fe * E + P.
    #[inline]
    pub fn q_fe(&self, params: &FerroStackParams) -> f64 {
        params.eps_fe * self.e + self.p
    }
}

/// Self-consistent stack solution at one gate voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Gate voltage (V).
    pub v_g: f64,
    /// Ferroelectric face charge density (C/m²).
    pub q_fe: f64,
    /// Ferroelectric field (V/m).
    pub e_fe: f64,
    /// Polarization (C/m²).
    pub p_fe: f64,
    /// Electron sheet-charge magnitude (C/m²); equals `q_fe`.
    pub sigma: f64,
    /// Combined flatband + surface-potential drop (V).
    pub v_igzo: f64,
}

/// Extracted threshold pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VtPair {
    /// Programmed-state threshold: loadline crossing on the branch traced
    /// after positive saturation (V).
    pub vt_minus: f64,
    /// Erased-state threshold: crossing after the most-negative excursion (V).
    pub vt_plus: f64,
    /// Memory window vt_plus - vt_minus (V).
    pub mw: f64,
}

impl VtPair {
    pub fn new(vt_minus: f64, vt_plus: f64) -> Self {
        Self {
            vt_minus,
            vt_plus,
            mw: vt_plus - vt_minus,
        }
    }
}
