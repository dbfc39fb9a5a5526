//! NOR-array read analysis: netlist builders, bitline-discharge simulation,
//! sensing margin / delay / energy extraction, inhibition-voltage and
//! 3D-stacking searches, and write-disturb bias maps.
//!
//! A read is always evaluated as the worst-case pair: the selected cell
//! erased with every unselected cell programmed (maximum sneak dragging down
//! the "high" bitline), against the selected cell programmed with every
//! unselected cell erased. The sensing margin is the bitline separation of
//! the two transients at the end of the evaluation window.

mod build;
mod read;
mod writebias;

pub use build::{build_mono3d_read, build_planar_read, lump_unselected};
pub use read::{fit_rshunt, max_nstack, required_vinh, simulate_read, RshuntFit};
pub use writebias::{write_bias_map, BiasClassCounts, WriteBiasMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceError, FeFETModel};
use crate::netsolve::NetError;

#[derive(Debug, Error)]
pub enum ArrayError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("operation requires the {0} variant")]
    WrongVariant(&'static str),
    #[error("cannot lump: {0}")]
    LumpingUnsupported(String),
    #[error("invalid array config: {0}")]
    InvalidConfig(String),
    #[error("sensing margin {achieved_margin:.4} V below target even at the inhibition floor {v_floor} V")]
    InfeasibleAtFloor { v_floor: f64, achieved_margin: f64 },
    #[error("target n_stack {target} unreachable: even without shunting the limit is {max_feasible}")]
    TargetUnreachable { target: usize, max_feasible: usize },
    #[error("shunt-fit bracket exhausted: {0}")]
    BracketExhausted(String),
    #[error("no resistance band yields n_stack = {target} (search landed at {at})")]
    EmptyBand { target: usize, at: usize },
}

/// Array organization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayVariant {
    /// Planar single-stack bitcells.
    Planar2d,
    /// Vertical-channel bitcells; electrically the planar netlist with the
    /// gate length set by the wordline metal thickness.
    VCh2d,
    /// Monolithically stacked strings with per-string selectors.
    Mono3d,
}

/// Shunt-network approximation for the contiguous channel between wordline
/// planes of a string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShuntTopology {
    /// Resistors between vertically adjacent channel mid nodes.
    MidNodeLadder,
    /// Resistors directly bridging the string-local BL and SL nodes, one per
    /// ungated gap.
    DirectBlSl,
}

/// Extra geometry and parasitics of the stacked-string variant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Mono3dConfig {
    /// Wordline planes per string.
    pub n_stack: usize,
    /// Ungated-channel shunt resistance (Ω); `f64::INFINITY` models ideal
    /// isolation between planes.
    pub r_shunt: f64,
    pub topology: ShuntTopology,
    /// String access device on BL and SL, sharing one control-line gate.
    pub selector: FeFETModel,
    /// Total cells loading one bitline; the string count per BL follows as
    /// `bl_cells / n_stack` (fixed-capacity premise).
    pub bl_cells: usize,
    /// Parasitic capacitance at each channel mid node (F).
    pub c_mid: f64,
    /// Parasitic capacitance at the string-local BL/SL nodes (F).
    pub c_inner: f64,
    /// Wordline plane pitch (m): metal thickness plus spacer.
    pub vertical_wl_pitch: f64,
}

/// Array geometry, parasitics and cell states for read analysis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// Wordlines sharing the bitline (planar/VCh); strings per bitline are
    /// derived for Mono3d.
    pub rows: usize,
    /// Bits read per wordline activation.
    pub cols: usize,
    pub variant: ArrayVariant,
    /// Bitline capacitance contributed by each attached cell (F).
    pub c_bl_per_cell: f64,
    /// Wordline capacitance per cell on the line (F).
    pub c_wl_per_cell: f64,
    /// Distributed bitline resistance per cell (Ω); 0 = ideal line.
    pub r_bl_per_cell: f64,
    /// Distributed wordline resistance per cell (Ω); 0 = ideal line.
    pub r_wl_per_cell: f64,
    /// Cell transistor template; its `vt` is overridden per state.
    pub device: FeFETModel,
    /// Programmed-state threshold (V).
    pub vt_pgm: f64,
    /// Erased-state threshold (V).
    pub vt_ers: f64,
    /// Most negative inhibition voltage the bias generator offers (V).
    pub v_floor: f64,
    pub mono3d: Option<Mono3dConfig>,
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<(), ArrayError> {
        let rows_eff = match self.variant {
            ArrayVariant::Mono3d => self.strings_per_bl(),
            _ => self.rows,
        };
        if rows_eff * self.cols == 0 {
            return Err(ArrayError::InvalidConfig("rows*cols must be > 0".into()));
        }
        if !(self.c_bl_per_cell > 0.0 && self.c_wl_per_cell > 0.0) {
            return Err(ArrayError::InvalidConfig(
                "per-cell capacitances must be > 0".into(),
            ));
        }
        if self.r_bl_per_cell < 0.0 || self.r_wl_per_cell < 0.0 {
            return Err(ArrayError::InvalidConfig("line resistances must be >= 0".into()));
        }
        if !(self.v_floor < 0.0) {
            return Err(ArrayError::InvalidConfig("v_floor must be < 0".into()));
        }
        self.device.validate()?;
        if let Some(m) = &self.mono3d {
            if m.n_stack < 1 {
                return Err(ArrayError::InvalidConfig("n_stack must be >= 1".into()));
            }
            if !(m.r_shunt > 0.0) {
                return Err(ArrayError::InvalidConfig(
                    "r_shunt must be > 0 (may be infinite)".into(),
                ));
            }
            m.selector.validate()?;
        } else if self.variant == ArrayVariant::Mono3d {
            return Err(ArrayError::InvalidConfig(
                "Mono3d variant needs the mono3d section".into(),
            ));
        }
        Ok(())
    }

    /// Strings hanging on one bitline (Mono3d).
    pub fn strings_per_bl(&self) -> usize {
        match &self.mono3d {
            Some(m) => (m.bl_cells / m.n_stack).max(1),
            None => 0,
        }
    }

    /// Total bitline capacitance seen by the sense node (F).
    pub fn c_bl_total(&self) -> f64 {
        match &self.mono3d {
            Some(m) => m.bl_cells.max(m.n_stack) as f64 * self.c_bl_per_cell,
            None => self.rows as f64 * self.c_bl_per_cell,
        }
    }

    /// Capacitance of one wordline rail (F).
    pub fn c_wl_line(&self) -> f64 {
        match &self.mono3d {
            Some(_) => self.c_wl_per_cell * (self.cols * self.strings_per_bl()) as f64,
            None => self.c_wl_per_cell * self.cols as f64,
        }
    }

    /// Unselected lines charged to the inhibition voltage during a read.
    pub fn inhibited_lines(&self) -> usize {
        match &self.mono3d {
            Some(m) => m.n_stack.saturating_sub(1),
            None => self.rows.saturating_sub(1),
        }
    }
}

/// Read biasing and timing.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReadScheme {
    /// Bitline precharge level (V); the selected wordline is driven to the
    /// same level.
    pub v_pre: f64,
    /// Selected-wordline level (V), normally equal to `v_pre`.
    pub v_sel: f64,
    /// Unselected-wordline inhibition level (V), 0 or negative.
    pub v_inh: f64,
    /// Precharge phase length (s); bookkeeping only, the evaluation starts
    /// from a precharged bitline.
    pub t_precharge: f64,
    /// Evaluation window (s).
    pub t_evaluate: f64,
    /// Required bitline separation (V).
    pub sm_target: f64,
}

impl ReadScheme {
    pub fn validate(&self) -> Result<(), ArrayError> {
        if !(self.v_pre > 0.0) {
            return Err(ArrayError::InvalidConfig("v_pre must be > 0".into()));
        }
        if !(self.t_precharge > 0.0 && self.t_evaluate > 0.0) {
            return Err(ArrayError::InvalidConfig("timings must be > 0".into()));
        }
        if !(self.sm_target > 0.0) {
            return Err(ArrayError::InvalidConfig("sm_target must be > 0".into()));
        }
        Ok(())
    }

    pub fn with_v_inh(&self, v_inh: f64) -> Self {
        Self { v_inh, ..*self }
    }

    /// Fixed-step transient resolution.
    pub fn dt(&self) -> f64 {
        self.t_evaluate / 2000.0
    }
}

/// Stored polarization state of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Pgm,
    Ers,
}

/// Cell-state pattern along the selected bitline (planar) or string (Mono3d).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataPattern {
    /// Selected cell erased, all unselected programmed: maximum sneak on the
    /// bitline that must stay high.
    WorstCaseErsRead,
    /// Selected cell programmed, all unselected erased.
    WorstCasePgmRead,
    /// Explicit per-cell states, one entry per row (or plane).
    Explicit(Vec<CellState>),
}

impl DataPattern {
    pub(crate) fn state_of(&self, index: usize, selected: usize) -> CellState {
        match self {
            DataPattern::WorstCaseErsRead => {
                if index == selected {
                    CellState::Ers
                } else {
                    CellState::Pgm
                }
            }
            DataPattern::WorstCasePgmRead => {
                if index == selected {
                    CellState::Pgm
                } else {
                    CellState::Ers
                }
            }
            DataPattern::Explicit(states) => states[index],
        }
    }

    pub(crate) fn check_len(&self, cells: usize) -> Result<(), ArrayError> {
        if let DataPattern::Explicit(states) = self {
            if states.len() != cells {
                return Err(ArrayError::InvalidConfig(format!(
                    "explicit pattern covers {} cells, array has {cells}",
                    states.len()
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one worst-case read-pair simulation.
#[derive(Debug, Clone, Serialize)]
pub struct ReadResult {
    /// Shared time grid (s).
    pub times: Vec<f64>,
    /// Bitline trace, erased-read case (V).
    pub v_bl_ers: Vec<f64>,
    /// Bitline trace, programmed-read case (V).
    pub v_bl_pgm: Vec<f64>,
    /// Bitline separation at the end of the evaluation window (V).
    pub sensing_margin: f64,
    /// Earliest time the separation reaches the target (s), if it does.
    pub read_delay: Option<f64>,
    /// Energy per accessed bit (J).
    pub read_energy: f64,
    /// Margin target met at evaluation time.
    pub feasible: bool,
}
