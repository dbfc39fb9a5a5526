//! Cross-point write bias map: the selected cell sees the full write
//! voltage, cells sharing only its row or only its column see half, and the
//! rest sit unstressed.

use serde::Serialize;

use super::ArrayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BiasClassCounts {
    /// Fully selected cells (always 1).
    pub full: usize,
    /// Half-selected cells on the selected row or column.
    pub half: usize,
    /// Cells with no stress.
    pub unstressed: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WriteBiasMap {
    pub rows: usize,
    pub cols: usize,
    pub v_w: f64,
    pub selected: (usize, usize),
}

impl WriteBiasMap {
    /// Gate/channel stress magnitude seen by cell (r, c).
    pub fn stress_at(&self, r: usize, c: usize) -> f64 {
        let (sr, sc) = self.selected;
        match (r == sr, c == sc) {
            (true, true) => self.v_w,
            (true, false) | (false, true) => 0.5 * self.v_w,
            (false, false) => 0.0,
        }
    }

    pub fn class_counts(&self) -> BiasClassCounts {
        BiasClassCounts {
            full: 1,
            half: (self.cols - 1) + (self.rows - 1),
            unstressed: (self.rows - 1) * (self.cols - 1),
        }
    }
}

pub fn write_bias_map(
    rows: usize,
    cols: usize,
    v_w: f64,
    selected: (usize, usize),
) -> Result<WriteBiasMap, ArrayError> {
    if !(v_w > 0.0) {
        return Err(ArrayError::InvalidConfig("v_w must be > 0".into()));
    }
    if rows == 0 || cols == 0 {
        return Err(ArrayError::InvalidConfig("rows and cols must be > 0".into()));
    }
    if selected.0 >= rows {
        return Err(ArrayError::IndexOutOfRange {
            what: "selected row",
            index: selected.0,
            limit: rows,
        });
    }
    if selected.1 >= cols {
        return Err(ArrayError::IndexOutOfRange {
            what: "selected col",
            index: selected.1,
            limit: cols,
        });
    }
    Ok(WriteBiasMap {
        rows,
        cols,
        v_w,
        selected,
    })
}
