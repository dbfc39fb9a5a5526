//! Self-consistent gate stepping and loadline threshold extraction.
//!
//! For a candidate ferroelectric field `E`, the unclamped trial charge
//! `Q(E) = eps_fe*E + P(E | history)` is strictly increasing in `E` (the
//! kernel susceptibility is non-negative), and the channel closure `V_IGZO`
//! is strictly increasing in charge, so the KVL residual
//!
//! ```text
//! r(E) = V_IGZO(Q(E)) + t_fe*E - V_G
//! ```
//!
//! is monotone and the gate step reduces to a safeguarded 1-D root find.
//! Below the pinch boundary (where `Q` would drop under `q_min`) no channel
//! charge is available; the state freezes at the boundary field and the
//! remaining gate voltage drops across the depleted channel.

use super::kernel::advance_raw;
use super::{FeStackError, FerroStackParams, HysteresisState, OperatingPoint, VtPair};

/// Absolute KVL residual target (V).
const KVL_TOL: f64 = 1e-9;
/// Loadline crossing bisection window (V).
const VT_BISECT_TOL: f64 = 1e-3;
const MAX_NEWTON: usize = 80;

/// Starting preset of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePreset {
    /// Depolarized stack at zero field.
    Virgin,
    /// Fully positively saturated, returned to zero field.
    SaturatedUp,
}

impl TracePreset {
    pub fn state(self, prm: &FerroStackParams) -> HysteresisState {
        match self {
            TracePreset::Virgin => HysteresisState::virgin(),
            TracePreset::SaturatedUp => HysteresisState::saturated_up(prm),
        }
    }
}

/// Triangular sweep description for [`extract_vt`].
#[derive(Debug, Clone, Copy)]
pub struct VtSweep {
    /// Peak gate voltage (V); the sweep runs 0 → +A → −A → +A.
    pub amplitude: f64,
    /// Gate-voltage resolution of the traced loop (V).
    pub step: f64,
}

impl Default for VtSweep {
    fn default() -> Self {
        Self {
            amplitude: 4.5,
            step: 5e-3,
        }
    }
}

impl VtSweep {
    /// The triangular waveform 0 → +A → −A → +A.
    pub fn waveform(&self) -> Vec<f64> {
        let n = (self.amplitude / self.step).ceil().max(1.0) as usize;
        let mut w = Vec::with_capacity(5 * n + 1);
        for k in 0..=n {
            w.push(self.amplitude * k as f64 / n as f64);
        }
        for k in 1..=2 * n {
            w.push(self.amplitude * (1.0 - k as f64 / n as f64));
        }
        for k in 1..=2 * n {
            w.push(-self.amplitude * (1.0 - k as f64 / n as f64));
        }
        w
    }
}

/// Unclamped trial charge at field `e`, leaving `s` untouched.
fn trial_q(s: &HysteresisState, e: f64, prm: &FerroStackParams) -> f64 {
    let st = advance_raw(s, e, prm, false).expect("finite trial field");
    prm.eps_fe * st.e + st.p
}

/// Advance the stack to the field that satisfies KVL at `v_g` and report the
/// operating point.
pub fn solve_gate_step(
    s: &HysteresisState,
    v_g: f64,
    prm: &FerroStackParams,
) -> Result<(HysteresisState, OperatingPoint), FeStackError> {
    if !v_g.is_finite() {
        return Err(FeStackError::NonFinite("v_g"));
    }
    // Monotone unclamped residual; the linear extension of V_IGZO below
    // sigma = 0 keeps it defined while the bracket probes under the clamp.
    let residual = |e: f64| {
        let q = trial_q(s, e, prm);
        prm.v_igzo(q) + prm.t_fe * e - v_g
    };

    // Bracket around the current field.
    let mut lo = s.e;
    let mut hi = s.e;
    let mut span = 0.1 * prm.e_c;
    for _ in 0..200 {
        if residual(lo) <= 0.0 {
            break;
        }
        lo -= span;
        span *= 1.7;
    }
    span = 0.1 * prm.e_c;
    for _ in 0..200 {
        if residual(hi) >= 0.0 {
            break;
        }
        hi += span;
        span *= 1.7;
    }
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if r_lo > 0.0 || r_hi < 0.0 {
        return Err(FeStackError::NonConvergence {
            residual: r_lo.abs().min(r_hi.abs()),
        });
    }

    // Safeguarded Newton with finite-difference slope, bisection fallback.
    let mut e = 0.5 * (lo + hi);
    let mut r = residual(e);
    let mut root = None;
    let mut last_r = r;
    for _ in 0..MAX_NEWTON {
        if r.abs() < KVL_TOL {
            root = Some(e);
            break;
        }
        if r > 0.0 {
            hi = e;
        } else {
            lo = e;
        }
        let h = (hi - lo).max(prm.e_c * 1e-9) * 1e-3;
        let slope = (residual(e + h) - r) / h;
        let mut e_next = if slope > 0.0 { e - r / slope } else { f64::NAN };
        if !(e_next > lo && e_next < hi) {
            e_next = 0.5 * (lo + hi);
        }
        e = e_next;
        last_r = r;
        r = residual(e);
    }
    let e_root = root.ok_or(FeStackError::NonConvergence {
        residual: last_r.abs(),
    })?;

    let q_root = trial_q(s, e_root, prm);
    if q_root >= prm.q_min {
        let st = advance_raw(s, e_root, prm, true)?;
        let q = prm.eps_fe * st.e + st.p;
        let op = OperatingPoint {
            v_g,
            q_fe: q,
            e_fe: st.e,
            p_fe: st.p,
            sigma: q,
            v_igzo: prm.v_igzo(q),
        };
        return Ok((st, op));
    }

    // Pinched regime: the KVL root sits below the charge boundary. The state
    // freezes at the boundary field and the leftover voltage drops across the
    // depleted channel. Bracket: Q(e_root) < q_min <= Q(s.e).
    let (mut b_lo, mut b_hi) = (e_root, s.e.max(e_root));
    for _ in 0..80 {
        let mid = 0.5 * (b_lo + b_hi);
        if trial_q(s, mid, prm) >= prm.q_min {
            b_hi = mid;
        } else {
            b_lo = mid;
        }
        if b_hi - b_lo < prm.e_c * 1e-9 {
            break;
        }
    }
    let mut st = advance_raw(s, b_hi, prm, true)?;
    // Project onto the clamp line; the bisection window leaves a residual of
    // order e_c*1e-9 in the field, and q_fe == q_min must hold identically in
    // the pinched regime.
    st.p = prm.q_min - prm.eps_fe * st.e;
    let e_fe = st.e;
    let op = OperatingPoint {
        v_g,
        q_fe: prm.q_min,
        e_fe,
        p_fe: st.p,
        sigma: prm.q_min,
        v_igzo: v_g - prm.t_fe * e_fe,
    };
    Ok((st, op))
}

/// Apply a gate waveform sequentially from a preset, yielding the traced
/// operating points (the Q–V loop plus its P–E and Q–E projections).
pub fn trace_qv_loop(
    prm: &FerroStackParams,
    preset: TracePreset,
    vg_waveform: &[f64],
) -> Result<Vec<OperatingPoint>, FeStackError> {
    let (points, _) = trace_with_states(prm, preset, vg_waveform)?;
    Ok(points)
}

fn trace_with_states(
    prm: &FerroStackParams,
    preset: TracePreset,
    vg_waveform: &[f64],
) -> Result<(Vec<OperatingPoint>, Vec<HysteresisState>), FeStackError> {
    if vg_waveform.len() < 2 {
        return Err(FeStackError::InvalidParam(
            "waveform needs at least 2 points".into(),
        ));
    }
    let mut state = preset.state(prm);
    let mut points = Vec::with_capacity(vg_waveform.len());
    let mut states = Vec::with_capacity(vg_waveform.len());
    for (index, &v) in vg_waveform.iter().enumerate() {
        let (next, op) = solve_gate_step(&state, v, prm).map_err(|e| {
            FeStackError::TraceFailed {
                index,
                source: Box::new(e),
            }
        })?;
        state = next;
        points.push(op);
        states.push(state.clone());
    }
    Ok((points, states))
}

fn first_extreme(w: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut idx = 0;
    for (i, &v) in w.iter().enumerate() {
        if better(v, w[idx]) {
            idx = i;
        }
    }
    idx
}

/// Locate the loadline crossing between two trace samples by bisecting the
/// gate voltage, re-solving from the stored pre-crossing state.
fn bisect_crossing(
    prm: &FerroStackParams,
    state_before: &HysteresisState,
    v_before: f64,
    v_after: f64,
) -> Result<f64, FeStackError> {
    let q_at = |v: f64| -> Result<f64, FeStackError> {
        let (_, op) = solve_gate_step(state_before, v, prm)?;
        Ok(op.q_fe)
    };
    let (mut lo, mut hi) = (v_before, v_after);
    let below_at_lo = q_at(lo)? < prm.sigma_th;
    while (hi - lo).abs() > VT_BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if (q_at(mid)? < prm.sigma_th) == below_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Extract the threshold pair from a traced triangular loop: `vt_minus` where
/// the descending branch (after positive saturation) crosses the loadline
/// `Q_FE = sigma_th`, and `vt_plus` where the ascending branch after the
/// most-negative excursion crosses it again.
pub fn extract_vt(prm: &FerroStackParams, sweep: &VtSweep) -> Result<VtPair, FeStackError> {
    let waveform = sweep.waveform();
    let (points, states) = trace_with_states(prm, TracePreset::Virgin, &waveform)?;

    // First occurrence of the extremes (the peak value reappears at the end
    // of the triangular sweep).
    let i_top = first_extreme(&waveform, |a, b| a > b);
    let i_bot = first_extreme(&waveform, |a, b| a < b);

    // Descending leg: Q falls through sigma_th.
    let mut vt_minus = None;
    for k in i_top..i_bot {
        if points[k].q_fe >= prm.sigma_th && points[k + 1].q_fe < prm.sigma_th {
            vt_minus = Some(bisect_crossing(prm, &states[k], waveform[k], waveform[k + 1])?);
            break;
        }
    }
    let vt_minus = vt_minus.ok_or(FeStackError::LoadlineNotCrossed {
        branch: "descending (programmed)",
    })?;

    // Ascending leg after the deepest excursion: Q rises through sigma_th.
    let mut vt_plus = None;
    for k in i_bot..points.len() - 1 {
        if points[k].q_fe < prm.sigma_th && points[k + 1].q_fe >= prm.sigma_th {
            vt_plus = Some(bisect_crossing(prm, &states[k], waveform[k], waveform[k + 1])?);
            break;
        }
    }
    let vt_plus = vt_plus.ok_or(FeStackError::LoadlineNotCrossed {
        branch: "ascending (erased)",
    })?;

    Ok(VtPair::new(vt_minus, vt_plus))
}

/// [`extract_vt`] across a list of ferroelectric thicknesses, all other
/// parameters held.
pub fn vt_vs_tfe(
    prm: &FerroStackParams,
    sweep: &VtSweep,
    tfe_list: &[f64],
) -> Result<Vec<(f64, VtPair)>, FeStackError> {
    tfe_list
        .iter()
        .map(|&t| {
            let p = prm.with_t_fe(t)?;
            Ok((t, extract_vt(&p, sweep)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults;

    #[test]
    fn flatband_virgin_point() {
        let p = defaults::ferro_params();
        let s = HysteresisState::virgin();
        let (_, op) = solve_gate_step(&s, p.v_fb, &p).unwrap();
        assert!(op.e_fe.abs() < 1e-6 * p.e_c);
        assert!(op.sigma.abs() < 1e-9);
    }

    #[test]
    fn calibration_identity_at_threshold_charge() {
        // Drive the stack to the gate voltage whose sigma equals sigma_th;
        // the channel-side drop must equal v_fb + psi_s_th within 1 mV.
        let p = defaults::ferro_params();
        let s = HysteresisState::saturated_up(&p);
        // Find v_g giving sigma = sigma_th by bisection on the operating point.
        let sigma_at = |v: f64| solve_gate_step(&s, v, &p).unwrap().1.sigma;
        let (mut lo, mut hi) = (-3.0, 3.0);
        assert!(sigma_at(lo) < p.sigma_th && sigma_at(hi) > p.sigma_th);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if sigma_at(mid) < p.sigma_th {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (_, op) = solve_gate_step(&s, 0.5 * (lo + hi), &p).unwrap();
        assert!((op.v_igzo - (p.v_fb + p.psi_s_th)).abs() < 1e-3);
    }

    #[test]
    fn kvl_and_charge_balance_hold() {
        let p = defaults::ferro_params();
        let mut s = HysteresisState::virgin();
        for v in [0.5, 1.7, 2.9, 0.4, -1.3, -2.6, 1.1] {
            let (next, op) = solve_gate_step(&s, v, &p).unwrap();
            assert!((op.q_fe - (p.eps_fe * op.e_fe + op.p_fe)).abs() < 1e-12);
            assert!((v - (op.v_igzo + p.t_fe * op.e_fe)).abs() < 1e-9);
            s = next;
        }
    }

    #[test]
    fn matches_grid_scan_oracle() {
        // Dense E-grid scan minimizing |KVL residual| as the independent
        // check of the root find.
        let p = defaults::ferro_params();
        let s = HysteresisState::saturated_up(&p);
        for v_g in [-0.8, 0.3, 1.9] {
            let (_, op) = solve_gate_step(&s, v_g, &p).unwrap();
            let mut best = (f64::INFINITY, 0.0);
            let n = 40_000;
            for k in 0..=n {
                let e = -3.0 * p.e_c + 6.0 * p.e_c * k as f64 / n as f64;
                let st = advance_raw(&s, e, &p, false).unwrap();
                let q = p.eps_fe * st.e + st.p;
                if q < p.q_min {
                    continue;
                }
                let r = (p.v_igzo(q) + p.t_fe * e - v_g).abs();
                if r < best.0 {
                    best = (r, e);
                }
            }
            assert!(
                (p.t_fe * (op.e_fe - best.1)).abs() < 1e-3,
                "v_g = {v_g}: solver E = {:.4e}, grid E = {:.4e}",
                op.e_fe,
                best.1
            );
        }
    }

    #[test]
    fn constant_waveform_is_stationary() {
        let p = defaults::ferro_params();
        let pts = trace_qv_loop(&p, TracePreset::Virgin, &[0.8, 0.8, 0.8, 0.8]).unwrap();
        // Identical gate voltages re-solve within the KVL tolerance band.
        for w in pts.windows(2) {
            assert!((w[0].q_fe - w[1].q_fe).abs() < 1e-10);
            assert!((w[0].e_fe - w[1].e_fe).abs() < 1.0);
        }
    }

    #[test]
    fn default_loop_is_pinched_at_zero() {
        let p = defaults::ferro_params();
        let sweep = VtSweep::default();
        let pts = trace_qv_loop(&p, TracePreset::Virgin, &sweep.waveform()).unwrap();
        let q_min_traced = pts.iter().map(|o| o.q_fe).fold(f64::INFINITY, f64::min);
        assert!(q_min_traced >= p.q_min - 1e-15);
        assert!(q_min_traced <= 1e-4 * p.p_s, "clamp must actually engage");
    }

    #[test]
    fn trace_step_refinement_converges() {
        let p = defaults::ferro_params();
        let coarse = VtSweep { amplitude: 4.5, step: 10e-3 };
        let fine = VtSweep { amplitude: 4.5, step: 5e-3 };
        let a = trace_qv_loop(&p, TracePreset::Virgin, &coarse.waveform()).unwrap();
        let b = trace_qv_loop(&p, TracePreset::Virgin, &fine.waveform()).unwrap();
        // Compare at shared gate voltages on the first ascent.
        for k in 0..a.len() / 5 {
            let qa = a[k].q_fe;
            let qb = b[2 * k].q_fe;
            assert!(
                (qa - qb).abs() < 0.005 * p.p_s,
                "at index {k}: {qa:.4e} vs {qb:.4e}"
            );
        }
    }

    #[test]
    fn q_fe_trace_continuity() {
        let p = defaults::ferro_params();
        let sweep = VtSweep::default();
        let pts = trace_qv_loop(&p, TracePreset::Virgin, &sweep.waveform()).unwrap();
        let bound = sweep.step * (p.eps_fe / p.t_fe + p.c_acc);
        for w in pts.windows(2) {
            assert!(
                (w[1].q_fe - w[0].q_fe).abs() < bound,
                "dq = {:.3e}, bound = {:.3e}",
                (w[1].q_fe - w[0].q_fe).abs(),
                bound
            );
        }
    }

    #[test]
    fn extracted_pair_is_ordered_and_calibrated() {
        let p = defaults::ferro_params();
        let vt = extract_vt(&p, &VtSweep::default()).unwrap();
        assert!(vt.vt_plus > vt.vt_minus);
        assert!((vt.mw - (vt.vt_plus - vt.vt_minus)).abs() < 1e-12);
        assert!(
            (vt.vt_minus + 0.4).abs() < 0.05,
            "calibrated programmed threshold, got {:.4}",
            vt.vt_minus
        );
    }

    #[test]
    fn thickness_scaling_shift() {
        let p = defaults::ferro_params();
        let sweep = VtSweep::default();
        let out = vt_vs_tfe(&p, &sweep, &[10e-9, 6e-9]).unwrap();
        let d_minus = out[1].1.vt_minus - out[0].1.vt_minus;
        let d_plus = out[1].1.vt_plus - out[0].1.vt_plus;
        assert!(
            (d_minus - 0.48).abs() < 0.15,
            "programmed-state shift {d_minus:.3}"
        );
        assert!(d_plus.abs() < d_minus.abs(), "single-sided shift");
    }

    #[test]
    fn duplicate_thickness_is_pure() {
        let p = defaults::ferro_params();
        let sweep = VtSweep { amplitude: 4.5, step: 20e-3 };
        let out = vt_vs_tfe(&p, &sweep, &[10e-9, 10e-9]).unwrap();
        assert_eq!(out[0].1, out[1].1);
    }

    #[test]
    fn insufficient_amplitude_reports_missing_crossing() {
        let p = defaults::ferro_params();
        let sweep = VtSweep { amplitude: 0.05, step: 5e-3 };
        assert!(matches!(
            extract_vt(&p, &sweep),
            Err(FeStackError::LoadlineNotCrossed { .. })
        ));
    }

    #[test]
    fn vt_minus_monotone_in_sigma_th() {
        // The crossing slides along a monotone branch: smaller sigma_th may
        // only move vt_minus down, larger sigma_th moves vt_plus up.
        let base = defaults::ferro_params();
        let sweep = VtSweep::default();
        let mut prev_minus = f64::NEG_INFINITY;
        let mut prev_plus = f64::NEG_INFINITY;
        for scale in [0.5, 1.0, 2.0] {
            let p = FerroStackParams {
                sigma_th: base.sigma_th * scale,
                ..base
            };
            let vt = extract_vt(&p, &sweep).unwrap();
            assert!(vt.vt_minus >= prev_minus - 2e-3);
            assert!(vt.vt_plus >= prev_plus - 2e-3);
            prev_minus = vt.vt_minus;
            prev_plus = vt.vt_plus;
        }
    }

    #[test]
    fn erased_crossing_field_is_smaller_in_magnitude() {
        let p = defaults::ferro_params();
        let sweep = VtSweep::default();
        let vt = extract_vt(&p, &sweep).unwrap();
        // Recover the crossing fields from the threshold relation.
        let e_plus = (vt.vt_plus - (p.v_fb + p.psi_s_th)) / p.t_fe;
        let e_minus = (vt.vt_minus - (p.v_fb + p.psi_s_th)) / p.t_fe;
        assert!(e_plus.abs() < e_minus.abs());
    }

    #[test]
    fn tiny_sigma_th_approaches_clamp_liftoff() {
        // With sigma_th -> 0+ the descending crossing approaches the gate
        // voltage where the trace first reaches the clamp; oracle from a
        // dense trace.
        let base = defaults::ferro_params();
        let sweep = VtSweep::default();
        let p = FerroStackParams {
            sigma_th: base.sigma_th * 1e-4,
            // keep the channel closure identical
            sigma_0: base.sigma_0,
            ..base
        };
        let vt = extract_vt(&p, &sweep).unwrap();

        let dense = VtSweep { amplitude: 4.5, step: 1e-3 };
        let pts = trace_qv_loop(&base, TracePreset::Virgin, &dense.waveform()).unwrap();
        let wf = dense.waveform();
        let i_top = first_extreme(&wf, |a, b| a > b);
        let onset = (i_top..pts.len())
            .find(|&k| pts[k].q_fe <= base.q_min + 1e-12)
            .map(|k| wf[k])
            .expect("trace reaches the clamp");
        assert!(
            (vt.vt_minus - onset).abs() < 0.02,
            "vt_minus = {:.4}, clamp onset = {onset:.4}",
            vt.vt_minus
        );
    }

    #[test]
    fn refinement_of_tolerances_is_stable() {
        // Halving the trace step moves the extracted thresholds < 2 mV.
        let p = defaults::ferro_params();
        let a = extract_vt(&p, &VtSweep { amplitude: 4.5, step: 10e-3 }).unwrap();
        let b = extract_vt(&p, &VtSweep { amplitude: 4.5, step: 5e-3 }).unwrap();
        assert!((a.vt_minus - b.vt_minus).abs() < 2e-3);
        assert!((a.vt_plus - b.vt_plus).abs() < 2e-3);
    }

}
