//! Minimal nonlinear network engine.
//!
//! Circuits are node/element lists; the DC operating point comes from damped
//! Newton iteration (with source-stepping homotopy as the fallback) and
//! transients from backward Euler with per-step Newton. Ideal sources tied to
//! ground pin their node directly, so the unknown vector holds only genuinely
//! free node voltages plus branch currents of floating sources.
//!
//! Everything is deterministic: node numbering and element iteration follow
//! insertion order, and identical inputs produce bit-identical traces.

mod engine;

pub use engine::{dc_operating_point, transient, DcSolution, TransientResult};

use std::collections::HashMap;

use thiserror::Error;

use crate::device::FeFETModel;

/// KCL residual target per unit node degree (A).
pub(crate) const KCL_TOL: f64 = 1e-12;
/// Leak conductance from FET terminals to ground; keeps fully cut-off
/// netlists non-singular.
pub(crate) const GMIN: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid element `{name}`: {reason}")]
    InvalidElement { name: String, reason: String },
    #[error("node `{0}` is not connected to ground")]
    FloatingNode(String),
    #[error("singular system near node `{0}`")]
    Singular(String),
    #[error("node `{0}` is pinned by more than one grounded source")]
    ConflictingSources(String),
    #[error("newton iteration did not converge (residual {residual:.3e} A{at})", at = step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonConvergence { residual: f64, step: Option<usize> },
    #[error("waveform must have non-decreasing breakpoint times")]
    BadWaveform,
    #[error("transient needs dt > 0 and t_stop >= dt")]
    BadTimeStep,
}

/// Node handle; index 0 is ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub const GROUND: NodeId = NodeId(0);
}

/// Piecewise-linear source waveform. Evaluation clamps outside the
/// breakpoint range.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    points: Vec<(f64, f64)>,
}

impl Waveform {
    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    pub fn pwl(points: Vec<(f64, f64)>) -> Result<Self, NetError> {
        if points.is_empty() || points.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(NetError::BadWaveform);
        }
        Ok(Self { points })
    }

    /// Linear ramp from `v0` to `v1` over [t0, t0 + rise].
    pub fn step(t0: f64, v0: f64, v1: f64, rise: f64) -> Self {
        Self {
            points: vec![(t0, v0), (t0 + rise, v1)],
        }
    }

    /// The single value of a constant waveform, if it is one.
    pub fn as_constant(&self) -> Option<f64> {
        match self.points.as_slice() {
            [(_, v)] => Some(*v),
            pts if pts.iter().all(|(_, v)| *v == pts[0].1) => Some(pts[0].1),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        if t >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let k = pts.partition_point(|&(tp, _)| tp <= t) - 1;
        let (t0, v0) = pts[k];
        let (t1, v1) = pts[k + 1];
        if t1 == t0 {
            v1
        } else {
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Element {
    Resistor {
        name: String,
        a: NodeId,
        b: NodeId,
        ohms: f64,
    },
    Capacitor {
        name: String,
        a: NodeId,
        b: NodeId,
        farads: f64,
        /// Initial voltage v(a) - v(b); None lets the init solve decide.
        ic: Option<f64>,
    },
    VSource {
        name: String,
        pos: NodeId,
        neg: NodeId,
        wave: Waveform,
    },
    Fet {
        name: String,
        model: FeFETModel,
        g: NodeId,
        d: NodeId,
        s: NodeId,
    },
}

impl Element {
    pub(crate) fn name(&self) -> &str {
        match self {
            Element::Resistor { name, .. }
            | Element::Capacitor { name, .. }
            | Element::VSource { name, .. }
            | Element::Fet { name, .. } => name,
        }
    }

    pub(crate) fn nodes(&self) -> Vec<NodeId> {
        match self {
            Element::Resistor { a, b, .. } | Element::Capacitor { a, b, .. } => vec![*a, *b],
            Element::VSource { pos, neg, .. } => vec![*pos, *neg],
            Element::Fet { g, d, s, .. } => vec![*g, *d, *s],
        }
    }
}

/// Node-element network with one ground node.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    node_names: Vec<String>,
    by_name: HashMap<String, usize>,
    pub(crate) elements: Vec<Element>,
}

impl Circuit {
    pub fn new() -> Self {
        let mut c = Self {
            node_names: Vec::new(),
            by_name: HashMap::new(),
            elements: Vec::new(),
        };
        c.node_names.push("0".to_string());
        c.by_name.insert("0".to_string(), 0);
        c
    }

    /// Get or create a named node. "0" is ground.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(&i) = self.by_name.get(name) {
            return NodeId(i);
        }
        let i = self.node_names.len();
        self.node_names.push(name.to_string());
        self.by_name.insert(name.to_string(), i);
        NodeId(i)
    }

    pub fn ground(&self) -> NodeId {
        NodeId::GROUND
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element_count_fets(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, Element::Fet { .. })).count()
    }

    pub fn element_count_resistors(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, Element::Resistor { .. })).count()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id.0]
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).map(|&i| NodeId(i))
    }

    pub fn add_resistor(
        &mut self,
        name: &str,
        a: NodeId,
        b: NodeId,
        ohms: f64,
    ) -> Result<(), NetError> {
        if !(ohms > 0.0) || !ohms.is_finite() {
            return Err(NetError::InvalidElement {
                name: name.into(),
                reason: format!("resistance must be finite and > 0, got {ohms:e}"),
            });
        }
        self.elements.push(Element::Resistor {
            name: name.into(),
            a,
            b,
            ohms,
        });
        Ok(())
    }

    pub fn add_capacitor(
        &mut self,
        name: &str,
        a: NodeId,
        b: NodeId,
        farads: f64,
        ic: Option<f64>,
    ) -> Result<(), NetError> {
        if !(farads > 0.0) || !farads.is_finite() {
            return Err(NetError::InvalidElement {
                name: name.into(),
                reason: format!("capacitance must be finite and > 0, got {farads:e}"),
            });
        }
        self.elements.push(Element::Capacitor {
            name: name.into(),
            a,
            b,
            farads,
            ic,
        });
        Ok(())
    }

    pub fn add_vsource(
        &mut self,
        name: &str,
        pos: NodeId,
        neg: NodeId,
        wave: Waveform,
    ) -> Result<(), NetError> {
        if pos == neg {
            return Err(NetError::InvalidElement {
                name: name.into(),
                reason: "source terminals coincide".into(),
            });
        }
        self.elements.push(Element::VSource {
            name: name.into(),
            pos,
            neg,
            wave,
        });
        Ok(())
    }

    pub fn add_fet(
        &mut self,
        name: &str,
        model: FeFETModel,
        g: NodeId,
        d: NodeId,
        s: NodeId,
    ) -> Result<(), NetError> {
        model.validate().map_err(|e| NetError::InvalidElement {
            name: name.into(),
            reason: e.to_string(),
        })?;
        self.elements.push(Element::Fet {
            name: name.into(),
            model,
            g,
            d,
            s,
        });
        Ok(())
    }

    /// Every node must reach ground through element incidences.
    pub(crate) fn check_connectivity(&self) -> Result<(), NetError> {
        let n = self.node_names.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in &self.elements {
            let nodes = el.nodes();
            for w in nodes.windows(2) {
                adj[w[0].0].push(w[1].0);
                adj[w[1].0].push(w[0].0);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(i) => Err(NetError::FloatingNode(self.node_names[i].clone())),
            None => Ok(()),
        }
    }
}
