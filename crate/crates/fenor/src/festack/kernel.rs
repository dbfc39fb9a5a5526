//! Polarization traversal kernel: saturated tanh branches, Miller-style
//! minor-loop scaling, turning-point bookkeeping and the pinch clamp.

use super::{BranchDir, FeStackError, FerroStackParams, HysteresisState, TurningPoint};

/// Integration substep as a fraction of the coercive field.
const SUBSTEP_DIV: f64 = 400.0;

/// Saturated-loop polarization branch:
/// `P_s * tanh((E -/+ E_c) / (2*delta))`, `-` on the ascending branch and `+`
/// on the descending one. `delta` is fixed so the descending branch passes
/// through (0, P_r).
pub fn saturation_branch(e: f64, dir: BranchDir, p: &FerroStackParams) -> f64 {
    let shift = match dir {
        BranchDir::Up => -p.e_c,
        BranchDir::Down => p.e_c,
    };
    p.p_s * ((e + shift) / (2.0 * p.delta())).tanh()
}

/// dP_sat/dE of the branch.
fn branch_slope(e: f64, dir: BranchDir, p: &FerroStackParams) -> f64 {
    let shift = match dir {
        BranchDir::Up => -p.e_c,
        BranchDir::Down => p.e_c,
    };
    let two_delta = 2.0 * p.delta();
    let c = ((e + shift) / two_delta).cosh();
    p.p_s / (two_delta * c * c)
}

/// Minor-loop susceptibility scale. Interior trajectories move with
/// `dP/dE = gamma * dP_sat/dE`; `gamma = 1` on the branch itself and 0 at the
/// saturation rail, which keeps |P| <= P_s without extra clamping:
///
/// - ascending: normalizer `P_s - P_sat` (headroom to +P_s),
/// - descending: normalizer `P_s + P_sat` (headroom to -P_s),
///
/// matching the branch sign rule (`-` up, `+` down).
fn gamma(p_val: f64, e: f64, dir: BranchDir, prm: &FerroStackParams) -> f64 {
    let p_sat = saturation_branch(e, dir, prm);
    let denom = match dir {
        BranchDir::Up => prm.p_s - p_sat,
        BranchDir::Down => prm.p_s + p_sat,
    };
    if denom <= prm.p_s * 1e-12 {
        return 0.0;
    }
    let r = (p_val - p_sat) / denom;
    (1.0 - r * r).clamp(0.0, 1.0)
}

/// One explicit-midpoint substep of the minor-loop ODE.
#[inline]
fn step_p(p_val: f64, e: f64, h: f64, dir: BranchDir, prm: &FerroStackParams) -> f64 {
    let k1 = gamma(p_val, e, dir, prm) * branch_slope(e, dir, prm);
    let p_mid = p_val + 0.5 * h * k1;
    let e_mid = e + 0.5 * h;
    let k2 = gamma(p_mid, e_mid, dir, prm) * branch_slope(e_mid, dir, prm);
    (p_val + h * k2).clamp(-prm.p_s, prm.p_s)
}

/// Innermost enclosing turning point that a move in `dir` can close: the
/// entry *below* the top of the stack (the top is always the most recent
/// reversal, of the opposite kind).
fn closure_target(state: &HysteresisState, dir: BranchDir) -> Option<f64> {
    let n = state.turning_points.len();
    if n < 2 {
        return None;
    }
    let tp = state.turning_points[n - 2];
    match dir {
        BranchDir::Up if tp.e > state.e => Some(tp.e),
        BranchDir::Down if tp.e < state.e => Some(tp.e),
        _ => None,
    }
}

/// Core traversal. With `clamp` set, a descending move stops at the field
/// where `eps_fe*E + P` would drop below `q_min` and the state freezes there
/// (no channel charge is available to discharge the stack any further).
pub(super) fn advance_raw(
    s: &HysteresisState,
    e_target: f64,
    prm: &FerroStackParams,
    clamp: bool,
) -> Result<HysteresisState, FeStackError> {
    if !e_target.is_finite() {
        return Err(FeStackError::NonFinite("e_target"));
    }
    let mut st = s.clone();
    let h_max = prm.e_c / SUBSTEP_DIV;

    while (st.e - e_target).abs() > 0.0 {
        let dir = if e_target > st.e { BranchDir::Up } else { BranchDir::Down };
        if dir != st.direction {
            st.turning_points.push(TurningPoint { e: st.e, p: st.p });
            st.direction = dir;
        }

        // Stop the segment at the innermost enclosing reversal, if any.
        let target_tp = closure_target(&st, dir);
        let seg_end = match target_tp {
            Some(tp_e) => match dir {
                BranchDir::Up => e_target.min(tp_e),
                BranchDir::Down => e_target.max(tp_e),
            },
            None => e_target,
        };

        let span = seg_end - st.e;
        let n_sub = ((span.abs() / h_max).ceil() as usize).max(1);
        let h = span / n_sub as f64;
        for _ in 0..n_sub {
            let p_next = step_p(st.p, st.e, h, dir, prm);
            if clamp && dir == BranchDir::Down {
                let q_next = prm.eps_fe * (st.e + h) + p_next;
                if q_next < prm.q_min {
                    let (e_stop, p_stop) = clamp_boundary(st.p, st.e, h, dir, prm);
                    st.e = e_stop;
                    st.p = p_stop;
                    return Ok(st);
                }
            }
            st.e += h;
            st.p = p_next;
        }
        st.e = seg_end; // kill accumulated rounding

        // Wipe-out: reaching the enclosing reversal closes the subloop.
        if target_tp == Some(seg_end) {
            st.turning_points.pop();
            st.turning_points.pop();
        }
    }

    Ok(st)
}

/// Bisect inside one substep for the field where the face charge hits q_min.
fn clamp_boundary(
    p0: f64,
    e0: f64,
    h: f64,
    dir: BranchDir,
    prm: &FerroStackParams,
) -> (f64, f64) {
    let q_of = |frac: f64| {
        let p = step_p(p0, e0, h * frac, dir, prm);
        (prm.eps_fe * (e0 + h * frac) + p - prm.q_min, p)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64); // q(lo) >= 0 > q(hi)
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if q_of(mid).0 >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Land exactly on the clamp line in P so q_fe == q_min holds identically.
    let e = e0 + h * lo;
    (e, prm.q_min - prm.eps_fe * e)
}

/// Advance the polarization history to a new field target, honoring minor
/// loops, wipe-out and the pinch clamp.
pub fn advance_state(
    s: &HysteresisState,
    e_target: f64,
    prm: &FerroStackParams,
) -> Result<HysteresisState, FeStackError> {
    advance_raw(s, e_target, prm, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults;

    fn no_clamp() -> FerroStackParams {
        FerroStackParams {
            q_min: f64::NEG_INFINITY,
            ..defaults::ferro_params()
        }
    }

    #[test]
    fn branch_limits_and_symmetry() {
        let p = defaults::ferro_params();
        // Saturation by construction.
        assert!((saturation_branch(60.0 * p.e_c, BranchDir::Up, &p) - p.p_s).abs() < 1e-9 * p.p_s);
        // Ascending branch crosses zero at +E_c.
        assert!(saturation_branch(p.e_c, BranchDir::Up, &p).abs() < 1e-12);
        // Descending branch at zero field returns the remanent polarization.
        assert!(
            (saturation_branch(0.0, BranchDir::Down, &p) - p.p_r).abs() < 1e-6 * p.p_s,
            "delta is constructed so P_down(0) = P_r"
        );
        // Odd symmetry between branches.
        for i in -10..=10 {
            let e = i as f64 * 0.3 * p.e_c;
            let up = saturation_branch(e, BranchDir::Up, &p);
            let down = saturation_branch(-e, BranchDir::Down, &p);
            assert!((up + down).abs() < 1e-12);
        }
        // Strictly increasing in E.
        let mut prev = f64::NEG_INFINITY;
        for i in -40..=40 {
            let v = saturation_branch(i as f64 * 0.2 * p.e_c, BranchDir::Up, &p);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn major_loop_closure() {
        let p = no_clamp();
        let e_max = 8.0 * p.e_c;
        let s0 = HysteresisState::virgin();
        let s1 = advance_state(&s0, e_max, &p).unwrap();
        let p_first_visit = s1.p;
        let s2 = advance_state(&s1, -e_max, &p).unwrap();
        let s3 = advance_state(&s2, e_max, &p).unwrap();
        assert!(
            (s3.p - p_first_visit).abs() < 1e-4 * p.p_s,
            "closure error {:.3e}",
            (s3.p - p_first_visit).abs()
        );
    }

    #[test]
    fn deep_negative_sweep_lands_on_clamp() {
        let p = defaults::ferro_params(); // q_min = 0
        let s = HysteresisState::saturated_up(&p);
        let s = advance_state(&s, -10.0 * p.e_c, &p).unwrap();
        let q = s.q_fe(&p);
        assert_eq!(q, p.q_min, "clamp must be exact, got q = {q:.3e}");
        assert!(s.e > -10.0 * p.e_c, "excursion must stop early");
    }

    #[test]
    fn polarization_stays_bounded() {
        let p = no_clamp();
        let mut s = HysteresisState::virgin();
        let targets = [3.0, -1.0, 2.5, -6.0, 6.0, -0.5, 9.0, -9.0, 4.0];
        for t in targets {
            s = advance_state(&s, t * p.e_c, &p).unwrap();
            assert!(s.p.abs() <= p.p_s);
        }
    }

    #[test]
    fn turning_points_nest_and_wipe_out() {
        let p = no_clamp();
        let mut s = HysteresisState::virgin();
        s = advance_state(&s, 4.0 * p.e_c, &p).unwrap();
        s = advance_state(&s, -2.0 * p.e_c, &p).unwrap();
        s = advance_state(&s, 1.0 * p.e_c, &p).unwrap();
        assert_eq!(s.turning_points.len(), 2);
        let outer = s.turning_points[0];
        let inner = s.turning_points[1];
        assert!(inner.e > -4.0 * p.e_c && inner.e < outer.e);
        // Re-crossing the outer maximum wipes the pair.
        s = advance_state(&s, 5.0 * p.e_c, &p).unwrap();
        assert!(s.turning_points.is_empty());
    }

    #[test]
    fn small_excursion_tracks_fine_step_oracle() {
        // Fine-step Euler traversal as the independent oracle for a small
        // triangular excursion around zero on the descending branch.
        let p = no_clamp();
        let s0 = HysteresisState::saturated_up(&p);
        let de = 0.02 * p.e_c;

        let coarse = {
            let s = advance_state(&s0, -de, &p).unwrap();
            advance_state(&s, 0.0, &p).unwrap()
        };

        let oracle = {
            let n = 20_000;
            let mut p_val = s0.p;
            let mut e = 0.0;
            let h = -de / n as f64;
            for _ in 0..n {
                let g = gamma(p_val, e, BranchDir::Down, &p);
                p_val += g * branch_slope(e, BranchDir::Down, &p) * h;
                e += h;
            }
            let h = de / n as f64;
            for _ in 0..n {
                let g = gamma(p_val, e, BranchDir::Up, &p);
                p_val += g * branch_slope(e, BranchDir::Up, &p) * h;
                e += h;
            }
            p_val
        };

        assert!((coarse.p - oracle).abs() < 1e-5 * p.p_s);
        // Small-signal excursion: |dP| below the full susceptibility bound.
        assert!((coarse.p - s0.p).abs() < de * branch_slope(0.0, BranchDir::Down, &p));
        // The excursion dissipates: the loop does not retrace exactly.
        assert!((coarse.p - s0.p).abs() > 0.0);
    }

    #[test]
    fn rejects_non_finite_target() {
        let p = defaults::ferro_params();
        let s = HysteresisState::virgin();
        assert!(matches!(
            advance_state(&s, f64::NAN, &p),
            Err(FeStackError::NonFinite(_))
        ));
    }
}
