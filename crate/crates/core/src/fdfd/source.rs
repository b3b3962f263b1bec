//! Unidirectional mode injection.
//!
//! A single sheet of `E_y` current between columns `s` and `s + 1` forces a
//! jump in `H_z` and radiates both ways. Two adjacent sheets driven with a
//! relative phase of `−e^{−iβ}` cancel one direction exactly for the
//! discrete mode with propagation constant `β`.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::C64;
use crate::physics::SourceSpec;

use super::ModeProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Toward increasing x.
    Forward,
    /// Toward decreasing x.
    Backward,
}

/// A vertical source line: current sheets sit on the `E_y` edges to the right
/// of columns `column` and `column + 1`, covering rows
/// `row_offset .. row_offset + profile.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Port {
    pub column: usize,
    pub row_offset: usize,
}

impl Port {
    pub fn new(column: usize) -> Self {
        Self {
            column,
            row_offset: 0,
        }
    }
}

/// Current distribution launching `mode` from `port` in `direction`.
pub fn mode_source(
    grid: &GridSpec,
    mode: &ModeProfile,
    port: Port,
    direction: Direction,
) -> Result<SourceSpec> {
    let s = port.column;
    if s + 2 >= grid.nx || (s..=s + 2).any(|i| grid.column_in_pml(i)) {
        return Err(Error::PortInPml(s));
    }
    if port.row_offset + mode.profile.len() > grid.ny {
        return Err(Error::DimensionMismatch(format!(
            "mode of {} rows at offset {} exceeds grid height {}",
            mode.profile.len(),
            port.row_offset,
            grid.ny
        )));
    }
    let phase = C64::from_polar(1.0, mode.beta);
    let (near, far) = match direction {
        Direction::Forward => (s, s + 1),
        Direction::Backward => (s + 1, s),
    };
    let coeff = -phase.conj();
    let mut src = SourceSpec::zero(grid);
    for (k, h) in mode.profile.iter().enumerate() {
        let j = port.row_offset + k;
        src.j[grid.ey_edge(near, j)] += h;
        src.j[grid.ey_edge(far, j)] += h * coeff;
    }
    Ok(src)
}
