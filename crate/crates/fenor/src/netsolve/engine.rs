//! Residual assembly, damped Newton, DC homotopy and backward-Euler
//! transient.

use nalgebra::{DMatrix, DVector};

use super::{Circuit, Element, NetError, NodeId, Waveform, GMIN, KCL_TOL};

/// Newton voltage-update clamp (V) and iteration cap.
const V_STEP_MAX: f64 = 0.5;
const I_STEP_MAX: f64 = 1e3;
const MAX_ITER: usize = 120;

/// How the voltage of each circuit node is represented in the solve.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Ground,
    /// Pinned by a grounded ideal source (index into `pinned_srcs`).
    Pinned(usize),
    /// Free unknown (index into the solution vector).
    Free(usize),
}

struct System<'c> {
    c: &'c Circuit,
    slots: Vec<Slot>,
    /// (element index, node, sign): value of pinned node = sign * wave(t).
    pinned_srcs: Vec<(usize, NodeId, f64)>,
    /// Element indices of sources handled with branch-current unknowns.
    branch_srcs: Vec<usize>,
    n_free: usize,
    /// Per-KCL-row absolute tolerance (A).
    row_tol: Vec<f64>,
}

impl<'c> System<'c> {
    fn prepare(c: &'c Circuit) -> Result<Self, NetError> {
        c.check_connectivity()?;
        let n = c.node_count();
        let mut slots: Vec<Option<Slot>> = vec![None; n];
        slots[0] = Some(Slot::Ground);

        let mut pinned_srcs = Vec::new();
        let mut branch_srcs = Vec::new();
        for (ei, el) in c.elements.iter().enumerate() {
            if let Element::VSource { pos, neg, name, .. } = el {
                let (node, sign) = if *neg == NodeId::GROUND {
                    (*pos, 1.0)
                } else if *pos == NodeId::GROUND {
                    (*neg, -1.0)
                } else {
                    branch_srcs.push(ei);
                    continue;
                };
                if slots[node.0].is_some() {
                    return Err(NetError::ConflictingSources(name.clone()));
                }
                pinned_srcs.push((ei, node, sign));
                slots[node.0] = Some(Slot::Pinned(pinned_srcs.len() - 1));
            }
        }

        let mut n_free = 0;
        for s in slots.iter_mut() {
            if s.is_none() {
                *s = Some(Slot::Free(n_free));
                n_free += 1;
            }
        }
        let slots: Vec<Slot> = slots.into_iter().map(Option::unwrap).collect();

        let mut degree = vec![0usize; n];
        for el in &c.elements {
            for nd in el.nodes() {
                degree[nd.0] += 1;
            }
        }
        let mut row_tol = vec![0.0; n_free];
        for (i, s) in slots.iter().enumerate() {
            if let Slot::Free(k) = s {
                row_tol[*k] = KCL_TOL * degree[i].max(1) as f64;
            }
        }

        Ok(Self {
            c,
            slots,
            pinned_srcs,
            branch_srcs,
            n_free,
            row_tol,
        })
    }

    fn n_unknowns(&self) -> usize {
        self.n_free + self.branch_srcs.len()
    }

    fn v_of(&self, x: &DVector<f64>, node: NodeId, t: f64, lambda: f64) -> f64 {
        match self.slots[node.0] {
            Slot::Ground => 0.0,
            Slot::Pinned(pi) => {
                let (ei, _, sign) = self.pinned_srcs[pi];
                let Element::VSource { wave, .. } = &self.c.elements[ei] else {
                    unreachable!()
                };
                sign * lambda * wave.eval(t)
            }
            Slot::Free(k) => x[k],
        }
    }

    fn row(&self, node: NodeId) -> Option<usize> {
        match self.slots[node.0] {
            Slot::Free(k) => Some(k),
            _ => None,
        }
    }

    /// Full node-voltage vector in node-id order.
    fn full_voltages(&self, x: &DVector<f64>, t: f64, lambda: f64) -> Vec<f64> {
        (0..self.c.node_count())
            .map(|i| self.v_of(x, NodeId(i), t, lambda))
            .collect()
    }

    /// Assemble residual and Jacobian. `prev` carries the previous-step node
    /// voltages and dt for backward-Euler capacitor companions; None means DC
    /// (capacitors open).
    fn assemble(
        &self,
        x: &DVector<f64>,
        t: f64,
        lambda: f64,
        prev: Option<(&[f64], f64)>,
        f: &mut DVector<f64>,
        jac: &mut DMatrix<f64>,
    ) {
        f.fill(0.0);
        jac.fill(0.0);
        let nb = self.n_free;

        // KCL stamp helper: current `i` leaves `from` and enters `into`.
        macro_rules! stamp_pair {
            ($from:expr, $into:expr, $i:expr, $dis:expr, $dls:expr) => {
                // $dis/$dls: d(i)/d(v_from), d(i)/d(v_into)
                if let Some(r) = self.row($from) {
                    f[r] += $i;
                    if let Some(cf) = self.row($from) {
                        jac[(r, cf)] += $dis;
                    }
                    if let Some(ci) = self.row($into) {
                        jac[(r, ci)] += $dls;
                    }
                }
                if let Some(r) = self.row($into) {
                    f[r] -= $i;
                    if let Some(cf) = self.row($from) {
                        jac[(r, cf)] -= $dis;
                    }
                    if let Some(ci) = self.row($into) {
                        jac[(r, ci)] -= $dls;
                    }
                }
            };
        }

        for (ei, el) in self.c.elements.iter().enumerate() {
            match el {
                Element::Resistor { a, b, ohms, .. } => {
                    let g = 1.0 / ohms;
                    let i = (self.v_of(x, *a, t, lambda) - self.v_of(x, *b, t, lambda)) * g;
                    stamp_pair!(*a, *b, i, g, -g);
                }
                Element::Capacitor { a, b, farads, .. } => {
                    if let Some((vp, dt)) = prev {
                        let g = farads / dt;
                        let dv_now =
                            self.v_of(x, *a, t, lambda) - self.v_of(x, *b, t, lambda);
                        let dv_prev = vp[a.0] - vp[b.0];
                        let i = g * (dv_now - dv_prev);
                        stamp_pair!(*a, *b, i, g, -g);
                    }
                }
                Element::VSource { pos, neg, wave, .. } => {
                    if let Some(bi) = self.branch_srcs.iter().position(|&e| e == ei) {
                        let br = nb + bi;
                        let i_br = x[br];
                        // KCL: the source delivers i_br out of `pos`.
                        if let Some(r) = self.row(*pos) {
                            f[r] -= i_br;
                            jac[(r, br)] -= 1.0;
                        }
                        if let Some(r) = self.row(*neg) {
                            f[r] += i_br;
                            jac[(r, br)] += 1.0;
                        }
                        // Branch equation: v(pos) - v(neg) = value.
                        f[br] = self.v_of(x, *pos, t, lambda)
                            - self.v_of(x, *neg, t, lambda)
                            - lambda * wave.eval(t);
                        if let Some(cp) = self.row(*pos) {
                            jac[(br, cp)] += 1.0;
                        }
                        if let Some(cn) = self.row(*neg) {
                            jac[(br, cn)] -= 1.0;
                        }
                    }
                }
                Element::Fet { model, g, d, s, .. } => {
                    let vg = self.v_of(x, *g, t, lambda);
                    let vd = self.v_of(x, *d, t, lambda);
                    let vs = self.v_of(x, *s, t, lambda);
                    // Source/drain exchange symmetry for reversed bias.
                    let (i, di_dvg, di_dvd, di_dvs) = if vd >= vs {
                        let (i, fg, fd) = model.ids_and_derivs(vg - vs, vd - vs);
                        (i, fg, fd, -fg - fd)
                    } else {
                        let (i, fg, fd) = model.ids_and_derivs(vg - vd, vs - vd);
                        (-i, -fg, fg + fd, -fd)
                    };
                    // i flows d -> s.
                    if let Some(r) = self.row(*d) {
                        f[r] += i;
                        if let Some(c) = self.row(*g) {
                            jac[(r, c)] += di_dvg;
                        }
                        if let Some(c) = self.row(*d) {
                            jac[(r, c)] += di_dvd;
                        }
                        if let Some(c) = self.row(*s) {
                            jac[(r, c)] += di_dvs;
                        }
                    }
                    if let Some(r) = self.row(*s) {
                        f[r] -= i;
                        if let Some(c) = self.row(*g) {
                            jac[(r, c)] -= di_dvg;
                        }
                        if let Some(c) = self.row(*d) {
                            jac[(r, c)] -= di_dvd;
                        }
                        if let Some(c) = self.row(*s) {
                            jac[(r, c)] -= di_dvs;
                        }
                    }
                    // Terminal leak keeps cut-off netlists non-singular.
                    for nd in [*d, *s] {
                        if let Some(r) = self.row(nd) {
                            f[r] += GMIN * self.v_of(x, nd, t, lambda);
                            jac[(r, r)] += GMIN;
                        }
                    }
                }
            }
        }
    }

    fn converged(&self, f: &DVector<f64>) -> bool {
        let nb = self.n_free;
        for k in 0..nb {
            if f[k].abs() > self.row_tol[k] {
                return false;
            }
        }
        for b in 0..self.branch_srcs.len() {
            if f[nb + b].abs() > 1e-12 {
                return false;
            }
        }
        true
    }

    /// Damped Newton from `x`; returns the solution or the final residual.
    fn newton(
        &self,
        mut x: DVector<f64>,
        t: f64,
        lambda: f64,
        prev: Option<(&[f64], f64)>,
    ) -> Result<DVector<f64>, f64> {
        let n = self.n_unknowns();
        let mut f = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, n);
        for _ in 0..MAX_ITER {
            self.assemble(&x, t, lambda, prev, &mut f, &mut jac);
            if self.converged(&f) {
                return Ok(x);
            }
            let lu = jac.clone().lu();
            let Some(mut dx) = lu.solve(&(-&f)) else {
                return Err(f64::INFINITY);
            };
            for k in 0..self.n_free {
                dx[k] = dx[k].clamp(-V_STEP_MAX, V_STEP_MAX);
            }
            for b in self.n_free..n {
                dx[b] = dx[b].clamp(-I_STEP_MAX, I_STEP_MAX);
            }
            x += dx;
        }
        self.assemble(&x, t, lambda, prev, &mut f, &mut jac);
        Err(f.amax())
    }

    /// Current delivered by each source at the solved point (positive out of
    /// the + terminal). Pinned sources recover their current from the KCL
    /// balance of the node they drive.
    fn source_currents(
        &self,
        x: &DVector<f64>,
        t: f64,
        lambda: f64,
        prev: Option<(&[f64], f64)>,
    ) -> Vec<(String, f64)> {
        // One pass over the elements, accumulating into the pinned node each
        // element touches.
        let mut pinned_of_node: Vec<Option<usize>> = vec![None; self.c.node_count()];
        for (pi, (_, node, _)) in self.pinned_srcs.iter().enumerate() {
            pinned_of_node[node.0] = Some(pi);
        }
        let mut out_current = vec![0.0; self.pinned_srcs.len()];
        for (ej, el) in self.c.elements.iter().enumerate() {
            if let Element::VSource { pos, neg, .. } = el {
                // A branch source contributes its solved current; the pinning
                // sources themselves are what we are recovering.
                if let Some(bi) = self.branch_srcs.iter().position(|&e| e == ej) {
                    let i_br = x[self.n_free + bi];
                    if let Some(pi) = pinned_of_node[pos.0] {
                        out_current[pi] -= i_br;
                    }
                    if let Some(pi) = pinned_of_node[neg.0] {
                        out_current[pi] += i_br;
                    }
                }
                continue;
            }
            for node in el.nodes() {
                if let Some(pi) = pinned_of_node[node.0] {
                    out_current[pi] += self.current_leaving(el, node, x, t, lambda, prev);
                }
            }
        }
        let mut out = Vec::new();
        for (pi, (ei, _, sign)) in self.pinned_srcs.iter().enumerate() {
            let name = self.c.elements[*ei].name().to_string();
            out.push((name, sign * out_current[pi]));
        }
        for (bi, ei) in self.branch_srcs.iter().enumerate() {
            let name = self.c.elements[*ei].name().to_string();
            out.push((name, x[self.n_free + bi]));
        }
        out
    }

    /// Current leaving `node` through element `el` (0 if not incident).
    fn current_leaving(
        &self,
        el: &Element,
        node: NodeId,
        x: &DVector<f64>,
        t: f64,
        lambda: f64,
        prev: Option<(&[f64], f64)>,
    ) -> f64 {
        let v = |n: NodeId| self.v_of(x, n, t, lambda);
        match el {
            Element::Resistor { a, b, ohms, .. } => {
                if node == *a {
                    (v(*a) - v(*b)) / ohms
                } else if node == *b {
                    (v(*b) - v(*a)) / ohms
                } else {
                    0.0
                }
            }
            Element::Capacitor { a, b, farads, .. } => {
                let Some((vp, dt)) = prev else { return 0.0 };
                let i = farads / dt * ((v(*a) - v(*b)) - (vp[a.0] - vp[b.0]));
                if node == *a {
                    i
                } else if node == *b {
                    -i
                } else {
                    0.0
                }
            }
            Element::VSource { .. } => 0.0,
            Element::Fet { model, g, d, s, .. } => {
                let (vg, vd, vs) = (v(*g), v(*d), v(*s));
                let i_ds = if vd >= vs {
                    model.ids(vg - vs, vd - vs)
                } else {
                    -model.ids(vg - vd, vs - vd)
                };
                let mut i = 0.0;
                if node == *d {
                    i += i_ds + GMIN * vd;
                }
                if node == *s {
                    i += -i_ds + GMIN * vs;
                }
                i
            }
        }
    }
}

/// DC solution: node voltages plus per-source delivered currents.
#[derive(Debug, Clone)]
pub struct DcSolution {
    node_names: Vec<String>,
    pub voltages: Vec<f64>,
    pub source_currents: Vec<(String, f64)>,
}

impl DcSolution {
    pub fn voltage(&self, id: NodeId) -> f64 {
        self.voltages[id.0]
    }

    pub fn voltage_named(&self, name: &str) -> Option<f64> {
        self.node_names.iter().position(|n| n == name).map(|i| self.voltages[i])
    }
}

/// DC operating point with source evaluation at time `t`. Newton from zero;
/// source-stepping homotopy on failure.
pub fn dc_operating_point(c: &Circuit, t: f64) -> Result<DcSolution, NetError> {
    let sys = System::prepare(c)?;
    let x = solve_dc_system(&sys, t)?;
    Ok(DcSolution {
        node_names: (0..c.node_count())
            .map(|i| c.node_name(NodeId(i)).to_string())
            .collect(),
        voltages: sys.full_voltages(&x, t, 1.0),
        source_currents: sys.source_currents(&x, t, 1.0, None),
    })
}

fn solve_dc_system(sys: &System, t: f64) -> Result<DVector<f64>, NetError> {
    let x0 = DVector::zeros(sys.n_unknowns());
    match sys.newton(x0.clone(), t, 1.0, None) {
        Ok(x) => Ok(x),
        Err(_) => {
            // Source stepping from the trivial zero-source solution.
            let mut x = x0;
            let mut lambda: f64 = 0.0;
            let mut step: f64 = 0.25;
            while lambda < 1.0 {
                let next = (lambda + step).min(1.0);
                match sys.newton(x.clone(), t, next, None) {
                    Ok(xn) => {
                        x = xn;
                        lambda = next;
                        step = (step * 2.0).min(0.25);
                    }
                    Err(residual) => {
                        step *= 0.5;
                        if step < 1.0 / 1024.0 {
                            return Err(NetError::NonConvergence {
                                residual,
                                step: None,
                            });
                        }
                    }
                }
            }
            Ok(x)
        }
    }
}

/// Transient result on a fixed time grid.
#[derive(Debug, Clone)]
pub struct TransientResult {
    pub times: Vec<f64>,
    node_names: Vec<String>,
    /// traces[node][k], node in circuit id order.
    traces: Vec<Vec<f64>>,
    /// Energy delivered by each source over the run (J).
    pub source_energy: Vec<(String, f64)>,
    /// Charge delivered by each source over the run (C).
    pub source_charge: Vec<(String, f64)>,
    /// Total energy dissipated in resistive elements (J).
    pub dissipated: f64,
}

impl TransientResult {
    pub fn trace(&self, name: &str) -> Option<&[f64]> {
        self.node_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.traces[i].as_slice())
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn energy_of(&self, source: &str) -> Option<f64> {
        self.source_energy
            .iter()
            .find(|(n, _)| n == source)
            .map(|(_, e)| *e)
    }
}

/// Backward-Euler transient over [0, t_stop] with fixed step `dt`.
///
/// Initial conditions: capacitors with an `ic` are held at that voltage by a
/// temporary source while the t = 0 operating point is solved; everything
/// else settles consistently.
pub fn transient(c: &Circuit, t_stop: f64, dt: f64) -> Result<TransientResult, NetError> {
    if !(dt > 0.0) || !dt.is_finite() || t_stop < dt {
        return Err(NetError::BadTimeStep);
    }

    // Initialization circuit: pinned caps become ideal sources.
    let mut init = c.clone();
    for el in init.elements.iter_mut() {
        if let Element::Capacitor { name, a, b, ic: Some(v0), .. } = el {
            *el = Element::VSource {
                name: format!("__ic_{name}"),
                pos: *a,
                neg: *b,
                wave: Waveform::constant(*v0),
            };
        }
    }
    let init_sol = dc_operating_point(&init, 0.0)?;
    let mut v_prev: Vec<f64> = init_sol.voltages;

    let sys = System::prepare(c)?;
    let n_steps = (t_stop / dt).round().max(1.0) as usize;

    let n_nodes = c.node_count();
    let mut traces: Vec<Vec<f64>> = vec![Vec::with_capacity(n_steps + 1); n_nodes];
    let mut times = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    for (i, tr) in traces.iter_mut().enumerate() {
        tr.push(v_prev[i]);
    }

    let mut energy: Vec<f64> = vec![0.0; sys.pinned_srcs.len() + sys.branch_srcs.len()];
    let mut charge: Vec<f64> = vec![0.0; energy.len()];
    let cap_energy = |v: &[f64]| -> f64 {
        c.elements
            .iter()
            .map(|el| match el {
                Element::Capacitor { a, b, farads, .. } => {
                    let dv = v[a.0] - v[b.0];
                    0.5 * farads * dv * dv
                }
                _ => 0.0,
            })
            .sum()
    };
    let e_cap_start = cap_energy(&v_prev);

    // Warm-started Newton per step.
    let mut x = DVector::zeros(sys.n_unknowns());
    for i in 0..n_nodes {
        if let Slot::Free(k) = sys.slots[i] {
            x[k] = v_prev[i];
        }
    }

    let mut src_names: Vec<String> = Vec::new();
    for (ei, _, _) in &sys.pinned_srcs {
        src_names.push(c.elements[*ei].name().to_string());
    }
    for ei in &sys.branch_srcs {
        src_names.push(c.elements[*ei].name().to_string());
    }

    for k in 1..=n_steps {
        let t = k as f64 * dt;
        x = sys
            .newton(x, t, 1.0, Some((&v_prev, dt)))
            .map_err(|residual| NetError::NonConvergence {
                residual,
                step: Some(k),
            })?;
        let v_now = sys.full_voltages(&x, t, 1.0);
        let currents = sys.source_currents(&x, t, 1.0, Some((&v_prev, dt)));
        for (si, (_, i_src)) in currents.iter().enumerate() {
            let v_src = source_terminal_voltage(&sys, si, &v_now);
            energy[si] += v_src * i_src * dt;
            charge[si] += i_src * dt;
        }
        times.push(t);
        for (i, tr) in traces.iter_mut().enumerate() {
            tr.push(v_now[i]);
        }
        v_prev = v_now;
    }

    let e_cap_end = cap_energy(&v_prev);
    let total_delivered: f64 = energy.iter().sum();
    let dissipated = total_delivered - (e_cap_end - e_cap_start);

    Ok(TransientResult {
        times,
        node_names: (0..n_nodes)
            .map(|i| c.node_name(NodeId(i)).to_string())
            .collect(),
        traces,
        source_energy: src_names.iter().cloned().zip(energy).collect(),
        source_charge: src_names.iter().cloned().zip(charge).collect(),
        dissipated,
    })
}

fn source_terminal_voltage(sys: &System, src_index: usize, v_full: &[f64]) -> f64 {
    if src_index < sys.pinned_srcs.len() {
        let (ei, _, _) = sys.pinned_srcs[src_index];
        let Element::VSource { pos, neg, .. } = &sys.c.elements[ei] else {
            unreachable!()
        };
        v_full[pos.0] - v_full[neg.0]
    } else {
        let ei = sys.branch_srcs[src_index - sys.pinned_srcs.len()];
        let Element::VSource { pos, neg, .. } = &sys.c.elements[ei] else {
            unreachable!()
        };
        v_full[pos.0] - v_full[neg.0]
    }
}
