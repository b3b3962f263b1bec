//! Device figures of merit measured on a validation simulation.
//!
//! Modal amplitudes are taken on two adjacent columns and split into
//! forward and backward travelling parts using the mode's discrete `β`, so
//! reflected light never counts as transmitted power.

use crate::error::{Error, Result};
use crate::fdfd::ModeProfile;
use crate::grid::GridSpec;
use crate::linalg::C64;
use crate::physics::FieldState;

/// A vertical measurement plane: columns `column` and `column + 1`, rows
/// starting at `row_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plane {
    pub column: usize,
    pub row_offset: usize,
}

impl Plane {
    pub fn new(column: usize) -> Self {
        Self {
            column,
            row_offset: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub efficiency: f64,
    pub input_power: f64,
    pub output_mode_power: f64,
    pub measurement_plane: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub relative_error: f64,
    pub plane: usize,
}

/// Forward and backward amplitudes of one mode at a plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalAmplitudes {
    /// Amplitude of `h e^{iβ(i − column)}` at `column`.
    pub forward: C64,
    pub backward: C64,
    /// Power carried by a unit-amplitude forward wave.
    pub unit_power: f64,
}

impl ModalAmplitudes {
    pub fn forward_power(&self) -> f64 {
        self.forward.norm_sqr() * self.unit_power
    }

    pub fn backward_power(&self) -> f64 {
        self.backward.norm_sqr() * self.unit_power
    }
}

fn column_slice(grid: &GridSpec, x: &FieldState, column: usize, offset: usize, len: usize) -> Vec<C64> {
    (0..len).map(|k| x.x[grid.idx(column, offset + k)]).collect()
}

/// Projection of one column of `x` onto `mode`, `Σ p h x / Σ p h²`.
pub fn modal_coefficient(
    grid: &GridSpec,
    x: &FieldState,
    mode: &ModeProfile,
    column: usize,
    row_offset: usize,
) -> Result<C64> {
    check(grid, x, mode, Plane { column, row_offset }, 0)?;
    let slice = column_slice(grid, x, column, row_offset, mode.profile.len());
    let num: C64 = mode
        .profile
        .iter()
        .zip(&slice)
        .zip(&mode.slice_eps)
        .map(|((h, v), e)| h * v / *e)
        .sum();
    let den: C64 = mode
        .profile
        .iter()
        .zip(&mode.slice_eps)
        .map(|(h, e)| h * h / *e)
        .sum();
    Ok(num / den)
}

fn check(grid: &GridSpec, x: &FieldState, mode: &ModeProfile, plane: Plane, extra: usize) -> Result<()> {
    if x.x.len() != grid.n_cells() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} cells, grid has {}",
            x.x.len(),
            grid.n_cells()
        )));
    }
    if plane.column + extra >= grid.nx {
        return Err(Error::PlaneInPml(plane.column));
    }
    if (plane.column..=plane.column + extra).any(|i| grid.column_in_pml(i)) {
        return Err(Error::PlaneInPml(plane.column));
    }
    if plane.row_offset + mode.profile.len() > grid.ny {
        return Err(Error::DimensionMismatch(format!(
            "mode of {} rows at offset {} exceeds grid height {}",
            mode.profile.len(),
            plane.row_offset,
            grid.ny
        )));
    }
    Ok(())
}

/// Forward/backward decomposition of `mode` across columns `plane.column`
/// and `plane.column + 1`.
pub fn modal_amplitudes(
    grid: &GridSpec,
    x: &FieldState,
    mode: &ModeProfile,
    plane: Plane,
) -> Result<ModalAmplitudes> {
    check(grid, x, mode, plane, 1)?;
    let c0 = modal_coefficient(grid, x, mode, plane.column, plane.row_offset)?;
    let c1 = modal_coefficient(grid, x, mode, plane.column + 1, plane.row_offset)?;
    let e = C64::from_polar(1.0, mode.beta);
    let denom = C64::new(0.0, 2.0 * mode.beta.sin());
    Ok(ModalAmplitudes {
        forward: (c1 - c0 * e.conj()) / denom,
        backward: (c0 * e - c1) / denom,
        unit_power: mode.power(),
    })
}

/// Forward power in `mode` at `plane` divided by `input_power`.
pub fn coupling_efficiency(
    grid: &GridSpec,
    x: &FieldState,
    mode: &ModeProfile,
    plane: Plane,
    input_power: f64,
) -> Result<EfficiencyReport> {
    let amps = modal_amplitudes(grid, x, mode, plane)?;
    let out = amps.forward_power();
    Ok(EfficiencyReport {
        efficiency: if input_power > 0.0 { out / input_power } else { 0.0 },
        input_power,
        output_mode_power: out,
        measurement_plane: plane.column,
    })
}

/// Efficiency of a two-port device: forward power of `output` at `output_plane`
/// over forward power of `input` at `input_plane`, both from the same field.
pub fn transmission_efficiency(
    grid: &GridSpec,
    x: &FieldState,
    input: &ModeProfile,
    input_plane: Plane,
    output: &ModeProfile,
    output_plane: Plane,
) -> Result<EfficiencyReport> {
    let p_in = modal_amplitudes(grid, x, input, input_plane)?.forward_power();
    coupling_efficiency(grid, x, output, output_plane, p_in)
}

/// `min_θ ‖e^{iθ} x − t‖ / ‖t‖` over one column of the field.
pub fn relative_error(grid: &GridSpec, x: &FieldState, target: &[C64], plane: Plane) -> Result<ErrorReport> {
    if plane.column >= grid.nx || plane.row_offset + target.len() > grid.ny {
        return Err(Error::DimensionMismatch(format!(
            "target of {} rows at column {} does not fit the grid",
            target.len(),
            plane.column
        )));
    }
    let slice = column_slice(grid, x, plane.column, plane.row_offset, target.len());
    Ok(ErrorReport {
        relative_error: aligned_error(&slice, target)?,
        plane: plane.column,
    })
}

/// Phase-aligned relative error between two vectors.
pub fn aligned_error(x: &[C64], target: &[C64]) -> Result<f64> {
    let tt: f64 = target.iter().map(|v| v.norm_sqr()).sum();
    if tt == 0.0 {
        return Err(Error::ZeroTarget);
    }
    let xx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let cross: C64 = target.iter().zip(x).map(|(t, v)| t.conj() * v).sum();
    Ok(((xx + tt - 2.0 * cross.norm()).max(0.0) / tt).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, PmlParams};

    fn grid() -> GridSpec {
        GridSpec::new(40, 30, 20.0, Boundary::Absorbing(PmlParams::default()), Boundary::Wall).unwrap()
    }

    fn launch(g: &GridSpec, m: &ModeProfile, amp_f: C64, amp_b: C64) -> FieldState {
        let mut x = FieldState::zeros(g.n_cells());
        for i in 0..g.nx {
            let ph = C64::from_polar(1.0, m.beta * i as f64);
            for j in 0..g.ny {
                x.x[g.idx(i, j)] = m.profile[j] * (amp_f * ph + amp_b * ph.conj());
            }
        }
        x
    }

    #[test]
    fn separates_forward_and_backward_waves() {
        let g = grid();
        let eps: Vec<f64> = (0..30).map(|j| if (11..19).contains(&j) { 12.25 } else { 1.0 }).collect();
        let m = crate::fdfd::solve_waveguide_mode(&eps, g.omega(), 0).unwrap();
        let x = launch(&g, &m, C64::new(0.6, 0.2), C64::new(-0.1, 0.3));
        let a = modal_amplitudes(&g, &x, &m, Plane::new(20)).unwrap();
        let ph = C64::from_polar(1.0, 20.0 * m.beta);
        assert!((a.forward - C64::new(0.6, 0.2) * ph).norm() < 1e-12);
        assert!((a.backward - C64::new(-0.1, 0.3) * ph.conj()).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_mode_carries_no_power() {
        let g = grid();
        let eps: Vec<f64> = (0..30).map(|j| if (7..23).contains(&j) { 12.25 } else { 1.0 }).collect();
        let modes = crate::fdfd::slice_modes(&eps, g.omega(), false).unwrap();
        let x = launch(&g, &modes[1], C64::new(1.0, 0.0), C64::default());
        let r = coupling_efficiency(&g, &x, &modes[0], Plane::new(15), 1.0).unwrap();
        assert!(r.efficiency < 1e-20);
        let own = transmission_efficiency(&g, &x, &modes[1], Plane::new(12), &modes[1], Plane::new(25)).unwrap();
        assert!((own.efficiency - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plane_in_pml_is_rejected() {
        let g = grid();
        let m = crate::fdfd::solve_waveguide_mode(&[1.0; 30], g.omega(), 0).unwrap();
        let x = FieldState::zeros(g.n_cells());
        assert!(matches!(modal_amplitudes(&g, &x, &m, Plane::new(3)), Err(Error::PlaneInPml(3))));
        assert!(matches!(modal_amplitudes(&g, &x, &m, Plane::new(29)), Err(Error::PlaneInPml(29))));
    }

    #[test]
    fn relative_error_examples() {
        let t = vec![C64::new(1.0, 0.5), C64::new(-0.3, 0.2), C64::new(0.0, 1.0)];
        assert_eq!(aligned_error(&t, &t).unwrap(), 0.0);
        let doubled: Vec<C64> = t.iter().map(|v| v * 2.0).collect();
        assert!((aligned_error(&doubled, &t).unwrap() - 1.0).abs() < 1e-14);
        let rotated: Vec<C64> = t.iter().map(|v| v * C64::from_polar(1.0, 1.1)).collect();
        assert!(aligned_error(&rotated, &t).unwrap() < 1e-7);
        assert!(matches!(aligned_error(&t, &[C64::default(); 3]), Err(Error::ZeroTarget)));
    }
}
