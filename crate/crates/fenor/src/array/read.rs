//! Worst-case read-pair simulation, energy ledger, and the inhibition /
//! stacking / shunt searches.

use crate::netsolve::{transient, Circuit};

use super::{
    build_mono3d_read, build_planar_read, lump_unselected, ArrayConfig, ArrayError, ArrayVariant,
    DataPattern, Mono3dConfig, ReadResult, ReadScheme,
};

/// Inhibition-search bisection window (V).
const VINH_TOL: f64 = 10e-3;
/// Lump the sneak population above this row count (exact while the bitline
/// is a single node).
const LUMP_THRESHOLD: usize = 8;

fn build_read_circuit(
    cfg: &ArrayConfig,
    scheme: &ReadScheme,
    pattern: &DataPattern,
    selected: usize,
) -> Result<Circuit, ArrayError> {
    match cfg.variant {
        ArrayVariant::Planar2d | ArrayVariant::VCh2d => {
            let c = build_planar_read(cfg, scheme, pattern, selected)?;
            if cfg.r_bl_per_cell == 0.0 && cfg.rows > LUMP_THRESHOLD {
                lump_unselected(&c)
            } else {
                Ok(c)
            }
        }
        ArrayVariant::Mono3d => build_mono3d_read(cfg, scheme, pattern, selected),
    }
}

/// Simulate the worst-case read pair and assemble margin, delay and energy.
///
/// Energy ledger, reported per accessed bit with `cols` bits per activation:
/// bitline precharge replacement and evaluation dissipation are per-column
/// costs; the selected-wordline swing and the inhibition-rail swing are
/// shared across the row.
pub fn simulate_read(
    cfg: &ArrayConfig,
    scheme: &ReadScheme,
    selected: usize,
) -> Result<ReadResult, ArrayError> {
    cfg.validate()?;
    scheme.validate()?;

    let dt = scheme.dt();
    let ers = build_read_circuit(cfg, scheme, &DataPattern::WorstCaseErsRead, selected)?;
    let pgm = build_read_circuit(cfg, scheme, &DataPattern::WorstCasePgmRead, selected)?;
    let tr_ers = transient(&ers, scheme.t_evaluate, dt)?;
    let tr_pgm = transient(&pgm, scheme.t_evaluate, dt)?;

    let v_ers = tr_ers.trace("bl").expect("bitline node").to_vec();
    let v_pgm = tr_pgm.trace("bl").expect("bitline node").to_vec();
    let times = tr_ers.times.clone();

    let sensing_margin = v_ers.last().unwrap() - v_pgm.last().unwrap();
    let feasible = sensing_margin >= scheme.sm_target;

    let mut read_delay = None;
    for k in 1..times.len() {
        let sep = v_ers[k] - v_pgm[k];
        if sep >= scheme.sm_target {
            let sep_prev = v_ers[k - 1] - v_pgm[k - 1];
            let frac = if sep > sep_prev {
                (scheme.sm_target - sep_prev) / (sep - sep_prev)
            } else {
                1.0
            };
            read_delay = Some(times[k - 1] + frac.clamp(0.0, 1.0) * dt);
            break;
        }
    }

    // Energy ledger (erased-read case carries the sneak population).
    let c_bl = cfg.c_bl_total();
    let c_wl = cfg.c_wl_line();
    let v_bl_end = *v_ers.last().unwrap();
    let e_precharge = c_bl * scheme.v_pre * (scheme.v_pre - v_bl_end);
    let e_wl_select = c_wl * scheme.v_sel * scheme.v_sel;
    let e_inh_rail = cfg.inhibited_lines() as f64 * c_wl * scheme.v_inh * scheme.v_inh;
    let e_eval_dissipation = tr_ers.dissipated.max(0.0);
    let read_energy =
        e_precharge + e_eval_dissipation + (e_wl_select + e_inh_rail) / cfg.cols as f64;

    Ok(ReadResult {
        times,
        v_bl_ers: v_ers,
        v_bl_pgm: v_pgm,
        sensing_margin,
        read_delay,
        read_energy,
        feasible,
    })
}

/// Smallest-magnitude inhibition voltage (≤ 0) meeting the margin target, by
/// bisection on [v_floor, 0] to 10 mV. Returns exactly 0 when unbiased
/// inhibition suffices.
pub fn required_vinh(
    cfg: &ArrayConfig,
    scheme_template: &ReadScheme,
    v_floor: f64,
) -> Result<f64, ArrayError> {
    if !(v_floor < 0.0) {
        return Err(ArrayError::InvalidConfig("v_floor must be < 0".into()));
    }
    let selected = 0;
    let margin_at = |v: f64| -> Result<f64, ArrayError> {
        Ok(simulate_read(cfg, &scheme_template.with_v_inh(v), selected)?.sensing_margin)
    };

    if margin_at(0.0)? >= scheme_template.sm_target {
        return Ok(0.0);
    }
    let m_floor = margin_at(v_floor)?;
    if m_floor < scheme_template.sm_target {
        return Err(ArrayError::InfeasibleAtFloor {
            v_floor,
            achieved_margin: m_floor,
        });
    }
    // lo is feasible (more negative), hi infeasible.
    let (mut lo, mut hi) = (v_floor, 0.0);
    while hi - lo > VINH_TOL {
        let mid = 0.5 * (lo + hi);
        if margin_at(mid)? >= scheme_template.sm_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Largest stack count in `candidates` (sorted ascending) that still reads
/// feasibly under a per-candidate optimized inhibition voltage. Returns 0
/// when even the smallest candidate fails; stops at the first infeasible
/// candidate (margin is monotone in stack height).
pub fn max_nstack(
    cfg: &ArrayConfig,
    scheme: &ReadScheme,
    candidates: &[usize],
) -> Result<usize, ArrayError> {
    let Some(m3) = &cfg.mono3d else {
        return Err(ArrayError::WrongVariant("Mono3d"));
    };
    let mut best = 0;
    for &n in candidates {
        let cfg_n = ArrayConfig {
            mono3d: Some(Mono3dConfig { n_stack: n, ..*m3 }),
            ..*cfg
        };
        match required_vinh(&cfg_n, scheme, cfg.v_floor) {
            Ok(_) => best = n,
            Err(ArrayError::InfeasibleAtFloor { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Result of the shunt-resistance fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RshuntFit {
    /// Largest resistance still limiting the stack to the target.
    Finite(f64),
    /// The target holds even with ideal isolation; no finite resistance
    /// bounds the band from above.
    UnboundedAbove,
}

/// Find the largest shunt resistance for which `max_nstack` equals
/// `target_nstack`, by bisection on the logarithm of the resistance.
pub fn fit_rshunt(
    cfg: &ArrayConfig,
    scheme: &ReadScheme,
    candidates: &[usize],
    target_nstack: usize,
) -> Result<RshuntFit, ArrayError> {
    let Some(m3) = &cfg.mono3d else {
        return Err(ArrayError::WrongVariant("Mono3d"));
    };
    let n_at = |r: f64| -> Result<usize, ArrayError> {
        let cfg_r = ArrayConfig {
            mono3d: Some(Mono3dConfig { r_shunt: r, ..*m3 }),
            ..*cfg
        };
        max_nstack(&cfg_r, scheme, candidates)
    };

    let n_inf = n_at(f64::INFINITY)?;
    if n_inf < target_nstack {
        return Err(ArrayError::TargetUnreachable {
            target: target_nstack,
            max_feasible: n_inf,
        });
    }
    if n_inf == target_nstack {
        return Ok(RshuntFit::UnboundedAbove);
    }

    let (mut lo, mut hi) = (1e3, 1e12);
    let n_lo = n_at(lo)?;
    if n_lo > target_nstack {
        return Err(ArrayError::BracketExhausted(format!(
            "n_stack is already {n_lo} at {lo:.1e} ohm"
        )));
    }
    let n_hi = n_at(hi)?;
    if n_hi <= target_nstack {
        return Err(ArrayError::BracketExhausted(format!(
            "n_stack still {n_hi} at {hi:.1e} ohm, expected > {target_nstack}"
        )));
    }
    while hi / lo > 1.05 {
        let mid = (lo * hi).sqrt();
        if n_at(mid)? <= target_nstack {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let n_final = n_at(lo)?;
    if n_final != target_nstack {
        return Err(ArrayError::EmptyBand {
            target: target_nstack,
            at: n_final,
        });
    }
    Ok(RshuntFit::Finite(lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults;

    #[test]
    fn single_row_reads_fast() {
        let cfg = ArrayConfig { rows: 1, ..defaults::planar_array() };
        let scheme = defaults::read_scheme();
        let r = simulate_read(&cfg, &scheme, 0).unwrap();
        assert!(r.feasible);
        let d = r.read_delay.unwrap();
        assert!(d > 0.0 && d < scheme.t_evaluate);
        assert!(r.read_energy > 0.0);
    }

    #[test]
    fn lumped_matches_explicit_on_small_arrays() {
        // Full-enumeration oracle: explicit netlists vs the lumped rebuild.
        let scheme = defaults::read_scheme().with_v_inh(-0.2);
        for rows in [8usize, 16] {
            let cfg = ArrayConfig { rows, ..defaults::planar_array() };
            for pattern in [DataPattern::WorstCaseErsRead, DataPattern::WorstCasePgmRead] {
                let expl = build_planar_read(&cfg, &scheme, &pattern, 0).unwrap();
                let lump = lump_unselected(&expl).unwrap();
                let a = transient(&expl, scheme.t_evaluate, scheme.dt()).unwrap();
                let b = transient(&lump, scheme.t_evaluate, scheme.dt()).unwrap();
                let ta = a.trace("bl").unwrap();
                let tb = b.trace("bl").unwrap();
                let max_dev = ta
                    .iter()
                    .zip(tb)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max);
                assert!(
                    max_dev < 0.01 * scheme.v_pre,
                    "rows = {rows}: max deviation {max_dev:.4e}"
                );
            }
        }
    }

    #[test]
    fn lump_identity_on_single_cell_groups() {
        let cfg = ArrayConfig { rows: 2, ..defaults::planar_array() };
        let scheme = defaults::read_scheme().with_v_inh(-0.3);
        let expl = build_planar_read(&cfg, &scheme, &DataPattern::WorstCaseErsRead, 0).unwrap();
        let lump = lump_unselected(&expl).unwrap();
        assert_eq!(lump.element_count_fets(), expl.element_count_fets());
        let a = transient(&expl, scheme.t_evaluate, scheme.dt()).unwrap();
        let b = transient(&lump, scheme.t_evaluate, scheme.dt()).unwrap();
        let dev: f64 = a
            .trace("bl")
            .unwrap()
            .iter()
            .zip(b.trace("bl").unwrap())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-9);
    }

    #[test]
    fn margin_monotone_in_rows() {
        let scheme = defaults::read_scheme_vt_neg();
        let mut prev = f64::INFINITY;
        for rows in [16usize, 64, 256, 1024] {
            let cfg = ArrayConfig {
                rows,
                vt_pgm: -0.4,
                ..defaults::planar_array()
            };
            let sm = simulate_read(&cfg, &scheme.with_v_inh(-0.4), 0)
                .unwrap()
                .sensing_margin;
            assert!(sm <= prev + 1e-9, "rows = {rows}: {sm} vs prev {prev}");
            prev = sm;
        }
    }

    #[test]
    fn dt_refinement_on_default_read_netlist() {
        // Halving the time step moves the final bitline voltages < 0.05%.
        let cfg = defaults::planar_array();
        let scheme = defaults::read_scheme();
        let c = build_read_circuit(&cfg, &scheme, &DataPattern::WorstCaseErsRead, 0).unwrap();
        let a = transient(&c, scheme.t_evaluate, scheme.dt()).unwrap();
        let b = transient(&c, scheme.t_evaluate, scheme.dt() / 2.0).unwrap();
        let va = *a.trace("bl").unwrap().last().unwrap();
        let vb = *b.trace("bl").unwrap().last().unwrap();
        assert!(
            (va - vb).abs() / vb.abs() < 5e-4,
            "va = {va:.6}, vb = {vb:.6}"
        );
    }

    #[test]
    fn required_vinh_zero_for_single_row() {
        let cfg = ArrayConfig { rows: 1, ..defaults::planar_array() };
        let scheme = defaults::read_scheme();
        assert_eq!(required_vinh(&cfg, &scheme, cfg.v_floor).unwrap(), 0.0);
    }

    #[test]
    fn vinh_magnitude_monotone_in_rows() {
        let scheme = defaults::read_scheme_vt_neg();
        let mut prev = 0.0f64;
        for rows in [16usize, 64, 256, 1024] {
            let cfg = ArrayConfig {
                rows,
                vt_pgm: -0.4,
                ..defaults::planar_array()
            };
            let v = required_vinh(&cfg, &scheme, cfg.v_floor).unwrap();
            assert!(
                v.abs() >= prev.abs() - 1e-9,
                "rows = {rows}: {v} vs prev {prev}"
            );
            prev = v;
        }
    }
}
