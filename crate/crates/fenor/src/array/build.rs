//! Read-netlist construction for planar arrays and stacked strings, plus the
//! sneak-population lumping transform.

use crate::netsolve::{Circuit, NodeId, Waveform};

use super::{
    ArrayConfig, ArrayError, ArrayVariant, CellState, DataPattern, ReadScheme, ShuntTopology,
};

/// Selected-wordline rise time as a fraction of the evaluation window.
const WL_RAMP_FRAC: f64 = 0.02;

pub(crate) fn vt_of(cfg: &ArrayConfig, state: CellState) -> f64 {
    match state {
        CellState::Pgm => cfg.vt_pgm,
        CellState::Ers => cfg.vt_ers,
    }
}

fn wl_wave(scheme: &ReadScheme, selected: bool) -> Waveform {
    if selected {
        Waveform::step(0.0, 0.0, scheme.v_sel, WL_RAMP_FRAC * scheme.t_evaluate)
    } else {
        Waveform::constant(scheme.v_inh)
    }
}

/// One shared bitline with `rows` cells in parallel: the selected cell gated
/// at `v_sel`, every other row at `v_inh`, source line grounded. A positive
/// `r_bl_per_cell` expands the bitline into a distributed RC ladder with the
/// sense node at segment 0.
pub fn build_planar_read(
    cfg: &ArrayConfig,
    scheme: &ReadScheme,
    pattern: &DataPattern,
    selected_row: usize,
) -> Result<Circuit, ArrayError> {
    cfg.validate()?;
    scheme.validate()?;
    if cfg.variant == ArrayVariant::Mono3d {
        return Err(ArrayError::WrongVariant("planar/vertical-channel"));
    }
    if selected_row >= cfg.rows {
        return Err(ArrayError::IndexOutOfRange {
            what: "selected row",
            index: selected_row,
            limit: cfg.rows,
        });
    }
    pattern.check_len(cfg.rows)?;

    let mut c = Circuit::new();
    let gnd = c.ground();

    // Bitline: lumped node or distributed ladder.
    let distributed = cfg.r_bl_per_cell > 0.0;
    let bl_nodes: Vec<NodeId> = if distributed {
        (0..cfg.rows).map(|r| c.node(&format!("bl{r}"))).collect()
    } else {
        vec![c.node("bl")]
    };
    if distributed {
        for (r, &node) in bl_nodes.iter().enumerate() {
            c.add_capacitor(
                &format!("cbl{r}"),
                node,
                gnd,
                cfg.c_bl_per_cell,
                Some(scheme.v_pre),
            )?;
            if r + 1 < cfg.rows {
                c.add_resistor(&format!("rbl{r}"), node, bl_nodes[r + 1], cfg.r_bl_per_cell)?;
            }
        }
    } else {
        c.add_capacitor("cbl", bl_nodes[0], gnd, cfg.c_bl_total(), Some(scheme.v_pre))?;
    }

    for r in 0..cfg.rows {
        let wl = c.node(&format!("wl{r}"));
        c.add_vsource(&format!("vwl{r}"), wl, gnd, wl_wave(scheme, r == selected_row))?;
        c.add_capacitor(&format!("cwl{r}"), wl, gnd, cfg.c_wl_line(), None)?;
        let drain = if distributed { bl_nodes[r] } else { bl_nodes[0] };
        let model = cfg.device.with_vt(vt_of(cfg, pattern.state_of(r, selected_row)));
        c.add_fet(&format!("cell{r}"), model, wl, drain, gnd)?;
    }
    Ok(c)
}

/// Merge identical parallel sneak cells into one width-scaled device per
/// (gate bias, drain, source, model) group. Electrically exact while the
/// bitline is a single node; a distributed bitline is refused.
///
/// Cells qualify when their gate is pinned by a constant-waveform grounded
/// source (the inhibition rails built by [`build_planar_read`]); the ramped
/// selected wordline never merges.
pub fn lump_unselected(c: &Circuit) -> Result<Circuit, ArrayError> {
    use crate::netsolve::Element;

    // A resistor on a FET terminal means a distributed line; the merge would
    // not be electrically equivalent there.
    let mut fet_terminals: Vec<NodeId> = Vec::new();
    for el in &c.elements {
        if let Element::Fet { d, s, .. } = el {
            fet_terminals.push(*d);
            fet_terminals.push(*s);
        }
    }
    for el in &c.elements {
        if let Element::Resistor { a, b, .. } = el {
            if fet_terminals.contains(a) || fet_terminals.contains(b) {
                return Err(ArrayError::LumpingUnsupported(
                    "distributed line resistance present; keep the explicit netlist".into(),
                ));
            }
        }
    }

    // Constant grounded rails, by node index.
    let mut const_gate: Vec<Option<f64>> = vec![None; c.node_count()];
    for el in &c.elements {
        if let Element::VSource { pos, neg, wave, .. } = el {
            if *neg == NodeId::GROUND {
                const_gate[pos.0] = wave.as_constant();
            }
        }
    }

    // Group lumpable cells; key = (gate bias bits, d, s, model sans width).
    #[derive(PartialEq, Clone)]
    struct Key {
        bias: u64,
        d: usize,
        s: usize,
        model: [u64; 6],
    }
    struct Group {
        key: Key,
        w_total: f64,
        gate_cap: f64,
        representative: usize,
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut group_of: Vec<Option<usize>> = vec![None; c.element_count()];

    let gate_cap_of = |g: NodeId| -> f64 {
        c.elements
            .iter()
            .map(|el| match el {
                Element::Capacitor { a, b, farads, .. }
                    if (*a == g && *b == NodeId::GROUND) || (*b == g && *a == NodeId::GROUND) =>
                {
                    *farads
                }
                _ => 0.0,
            })
            .sum()
    };

    for (ei, el) in c.elements.iter().enumerate() {
        if let Element::Fet { model, g, d, s, .. } = el {
            let Some(bias) = const_gate[g.0] else { continue };
            let key = Key {
                bias: bias.to_bits(),
                d: d.0,
                s: s.0,
                model: [
                    model.l.to_bits(),
                    model.k_gain.to_bits(),
                    model.ss.to_bits(),
                    model.lambda.to_bits(),
                    model.i_th_spec.to_bits(),
                    model.vt.to_bits(),
                ],
            };
            let gi = match groups.iter().position(|gr| gr.key == key) {
                Some(gi) => {
                    groups[gi].w_total += model.w;
                    gi
                }
                None => {
                    groups.push(Group {
                        key,
                        w_total: model.w,
                        gate_cap: 0.0,
                        representative: ei,
                    });
                    groups.len() - 1
                }
            };
            groups[gi].gate_cap += gate_cap_of(*g);
            group_of[ei] = Some(gi);
        }
    }

    // Rebuild: copy every element not absorbed into a group, then emit one
    // width-scaled device per group on a merged rail.
    let mut absorbed_gate: Vec<bool> = vec![false; c.node_count()];
    for (ei, el) in c.elements.iter().enumerate() {
        if group_of[ei].is_some() {
            if let Element::Fet { g, .. } = el {
                absorbed_gate[g.0] = true;
            }
        }
    }

    let mut out = Circuit::new();
    for (ei, el) in c.elements.iter().enumerate() {
        if group_of[ei].is_some() {
            continue;
        }
        match el {
            Element::Resistor { name, a, b, ohms } => {
                let (a, b) = (out.node(c.node_name(*a)), out.node(c.node_name(*b)));
                out.add_resistor(name, a, b, *ohms)?;
            }
            Element::Capacitor { name, a, b, farads, ic } => {
                if absorbed_gate[a.0] || absorbed_gate[b.0] {
                    continue; // rail capacitance moves onto the merged rail
                }
                let (a, b) = (out.node(c.node_name(*a)), out.node(c.node_name(*b)));
                out.add_capacitor(name, a, b, *farads, *ic)?;
            }
            Element::VSource { name, pos, neg, wave } => {
                if absorbed_gate[pos.0] || absorbed_gate[neg.0] {
                    continue;
                }
                let (p, n) = (out.node(c.node_name(*pos)), out.node(c.node_name(*neg)));
                out.add_vsource(name, p, n, wave.clone())?;
            }
            Element::Fet { name, model, g, d, s } => {
                let (g, d, s) = (
                    out.node(c.node_name(*g)),
                    out.node(c.node_name(*d)),
                    out.node(c.node_name(*s)),
                );
                out.add_fet(name, *model, g, d, s)?;
            }
        }
    }

    for (gi, gr) in groups.iter().enumerate() {
        let gate = out.node(&format!("inhg{gi}"));
        let gnd = out.ground();
        out.add_vsource(
            &format!("vinhg{gi}"),
            gate,
            gnd,
            Waveform::constant(f64::from_bits(gr.key.bias)),
        )?;
        if gr.gate_cap > 0.0 {
            out.add_capacitor(&format!("cinhg{gi}"), gate, gnd, gr.gate_cap, None)?;
        }
        let d = out.node(c.node_name(NodeId(gr.key.d)));
        let s = out.node(c.node_name(NodeId(gr.key.s)));
        let Element::Fet { model, .. } = &c.elements[gr.representative] else {
            unreachable!()
        };
        let merged = model.scale_geometry(gr.w_total, model.l)?;
        out.add_fet(&format!("lump{gi}"), merged, gate, d, s)?;
    }

    Ok(out)
}

/// One selected string plus the full bitline loading: BL and SL selector
/// devices gated by the shared control line, each plane as two half-channel
/// devices around a mid node, and the ungated-channel shunt network.
pub fn build_mono3d_read(
    cfg: &ArrayConfig,
    scheme: &ReadScheme,
    pattern: &DataPattern,
    selected_plane: usize,
) -> Result<Circuit, ArrayError> {
    cfg.validate()?;
    scheme.validate()?;
    let Some(m3) = &cfg.mono3d else {
        return Err(ArrayError::WrongVariant("Mono3d"));
    };
    if cfg.variant != ArrayVariant::Mono3d {
        return Err(ArrayError::WrongVariant("Mono3d"));
    }
    if selected_plane >= m3.n_stack {
        return Err(ArrayError::IndexOutOfRange {
            what: "selected plane",
            index: selected_plane,
            limit: m3.n_stack,
        });
    }
    pattern.check_len(m3.n_stack)?;

    let mut c = Circuit::new();
    let gnd = c.ground();
    let bl = c.node("bl");
    let blin = c.node("blin");
    let slin = c.node("slin");
    let cl = c.node("cl");

    c.add_capacitor("cbl", bl, gnd, cfg.c_bl_total(), Some(scheme.v_pre))?;
    c.add_capacitor("cblin", blin, gnd, m3.c_inner, None)?;
    c.add_capacitor("cslin", slin, gnd, m3.c_inner, None)?;

    // Control line held at the precharge level: the selected string is on
    // throughout; unselected strings stay off and are not modeled.
    c.add_vsource("vcl", cl, gnd, Waveform::constant(scheme.v_pre))?;
    c.add_fet("selbl", m3.selector, cl, bl, blin)?;
    c.add_fet("selsl", m3.selector, cl, slin, gnd)?;

    let half = cfg
        .device
        .scale_geometry(cfg.device.w, cfg.device.l / 2.0)?;
    let mut mids = Vec::with_capacity(m3.n_stack);
    for i in 0..m3.n_stack {
        let wl = c.node(&format!("wl{i}"));
        c.add_vsource(&format!("vwl{i}"), wl, gnd, wl_wave(scheme, i == selected_plane))?;
        c.add_capacitor(&format!("cwl{i}"), wl, gnd, cfg.c_wl_line(), None)?;
        let mid = c.node(&format!("mid{i}"));
        c.add_capacitor(&format!("cmid{i}"), mid, gnd, m3.c_mid, None)?;
        let vt = vt_of(cfg, pattern.state_of(i, selected_plane));
        c.add_fet(&format!("cell{i}a"), half.with_vt(vt), wl, blin, mid)?;
        c.add_fet(&format!("cell{i}b"), half.with_vt(vt), wl, mid, slin)?;
        mids.push(mid);
    }

    if m3.r_shunt.is_finite() {
        match m3.topology {
            ShuntTopology::MidNodeLadder => {
                for i in 0..m3.n_stack.saturating_sub(1) {
                    c.add_resistor(&format!("rsh{i}"), mids[i], mids[i + 1], m3.r_shunt)?;
                }
            }
            ShuntTopology::DirectBlSl => {
                for i in 0..m3.n_stack.saturating_sub(1) {
                    c.add_resistor(&format!("rsh{i}"), blin, slin, m3.r_shunt)?;
                }
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults;

    #[test]
    fn planar_construction_counts() {
        let cfg = defaults::planar_array();
        let scheme = defaults::read_scheme();
        let small = ArrayConfig { rows: 4, ..cfg };
        let c = build_planar_read(&small, &scheme, &DataPattern::WorstCaseErsRead, 1).unwrap();
        // 1 BL node + 4 WL nodes + ground; 1 BL cap + per row (source, cap,
        // fet).
        assert_eq!(c.node_count(), 1 + 1 + 4);
        assert_eq!(c.element_count(), 1 + 3 * 4);

        let single = ArrayConfig { rows: 1, ..cfg };
        let c1 = build_planar_read(&single, &scheme, &DataPattern::WorstCaseErsRead, 0).unwrap();
        assert_eq!(c1.element_count(), 1 + 3);
    }

    #[test]
    fn planar_rejects_bad_row() {
        let cfg = defaults::planar_array();
        let scheme = defaults::read_scheme();
        assert!(matches!(
            build_planar_read(&cfg, &scheme, &DataPattern::WorstCaseErsRead, cfg.rows),
            Err(ArrayError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn lump_produces_two_groups_for_two_states() {
        let cfg = ArrayConfig { rows: 9, ..defaults::planar_array() };
        let scheme = defaults::read_scheme();
        let mut states = vec![CellState::Pgm; 9];
        states[0] = CellState::Ers; // selected
        states[5] = CellState::Ers;
        states[6] = CellState::Ers;
        let c = build_planar_read(&cfg, &scheme, &DataPattern::Explicit(states), 0).unwrap();
        let lumped = lump_unselected(&c).unwrap();
        // 1 selected cell + 2 lumped groups (pgm x6, ers x2).
        let fets = lumped.element_count_fets();
        assert_eq!(fets, 3);
    }

    #[test]
    fn lump_refuses_distributed_bitline() {
        let cfg = ArrayConfig { rows: 4, r_bl_per_cell: 10.0, ..defaults::planar_array() };
        let scheme = defaults::read_scheme();
        let c = build_planar_read(&cfg, &scheme, &DataPattern::WorstCaseErsRead, 0).unwrap();
        assert!(matches!(
            lump_unselected(&c),
            Err(ArrayError::LumpingUnsupported(_))
        ));
    }

    #[test]
    fn mono3d_construction_counts() {
        let cfg = defaults::mono3d_array(defaults::ShuntCase::Calibrated);
        let scheme = defaults::mono3d_scheme(defaults::StackScenario::FINITE_VT_POS);
        let m3 = cfg.mono3d.unwrap();

        // n_stack = 4, MidNodeLadder: 3 shunt resistors.
        let c = build_mono3d_read(&cfg, &scheme, &DataPattern::WorstCaseErsRead, 0).unwrap();
        assert_eq!(c.element_count_resistors(), 3);

        // Infinite shunt: no shunt resistors at all.
        let inf = ArrayConfig {
            mono3d: Some(super::super::Mono3dConfig { r_shunt: f64::INFINITY, ..m3 }),
            ..cfg
        };
        let c = build_mono3d_read(&inf, &scheme, &DataPattern::WorstCaseErsRead, 0).unwrap();
        assert_eq!(c.element_count_resistors(), 0);

        // Single plane, infinite shunt: one cell (two halves) plus the two
        // selectors.
        let one = ArrayConfig {
            mono3d: Some(super::super::Mono3dConfig {
                n_stack: 1,
                r_shunt: f64::INFINITY,
                ..m3
            }),
            ..cfg
        };
        let c = build_mono3d_read(&one, &scheme, &DataPattern::WorstCaseErsRead, 0).unwrap();
        assert_eq!(c.element_count_fets(), 2 + 2);
        assert_eq!(c.element_count_resistors(), 0);
    }
}
