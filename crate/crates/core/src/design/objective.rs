//! Boundary-value design objectives.
//!
//! An objective pins `H_z` on a set of cells of the design box to the values
//! a perfect device would produce. Inside the box the field is free; outside
//! it is not modelled at all. Rows of the wave equation are kept only where
//! the whole five-point stencil lies inside the box, so the pinned ring acts
//! as the boundary condition of the box-local problem.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::fdfd::ModeProfile;
use crate::grid::GridSpec;
use crate::linalg::C64;
use crate::physics::SourceSpec;

/// Axis-aligned rectangle of cells `x0 .. x0 + width`, `y0 .. y0 + height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBox {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl DesignBox {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn whole(grid: &GridSpec) -> Self {
        Self::new(0, 0, grid.nx, grid.ny)
    }

    pub fn x1(&self) -> usize {
        self.x0 + self.width
    }

    pub fn y1(&self) -> usize {
        self.y0 + self.height
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.x0 && i < self.x1() && j >= self.y0 && j < self.y1()
    }

    pub fn fits(&self, grid: &GridSpec) -> bool {
        self.width > 0 && self.height > 0 && self.x1() <= grid.nx && self.y1() <= grid.ny
    }

    /// True when the box spans a periodic y-axis, so it has no top or bottom.
    pub fn wraps_y(&self, grid: &GridSpec) -> bool {
        grid.is_periodic_y() && self.y0 == 0 && self.height == grid.ny
    }

    /// Distance of a cell from the box boundary (0 = outermost ring), or
    /// `None` outside the box.
    pub fn layer(&self, grid: &GridSpec, i: usize, j: usize) -> Option<usize> {
        if !self.contains(i, j) {
            return None;
        }
        let mut d = (i - self.x0).min(self.x1() - 1 - i);
        if !self.wraps_y(grid) {
            d = d.min(j - self.y0).min(self.y1() - 1 - j);
        }
        Some(d)
    }

    /// Cells of the box in linear-index order.
    pub fn cells(&self, grid: &GridSpec) -> Vec<usize> {
        (self.x0..self.x1())
            .flat_map(|i| (self.y0..self.y1()).map(move |j| grid.idx(i, j)))
            .collect()
    }
}

/// Pinned boundary values plus the source driving the box-local problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignObjective {
    pub grid: GridSpec,
    pub design_box: DesignBox,
    pub pinned_indices: Vec<usize>,
    pub pinned_values: Vec<C64>,
    pub source: SourceSpec,
}

impl DesignObjective {
    pub fn new(
        grid: GridSpec,
        design_box: DesignBox,
        pinned_indices: Vec<usize>,
        pinned_values: Vec<C64>,
        source: SourceSpec,
    ) -> Result<Self> {
        let obj = Self {
            grid,
            design_box,
            pinned_indices,
            pinned_values,
            source,
        };
        obj.validate()?;
        Ok(obj)
    }

    /// Whole grid free, nothing pinned: the field step is a simulation.
    pub fn simulation(grid: GridSpec, source: SourceSpec) -> Result<Self> {
        let b = DesignBox::whole(&grid);
        Self::new(grid, b, Vec::new(), Vec::new(), source)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !self.design_box.fits(&self.grid) {
            return Err(Error::InvalidObjective(format!(
                "design box {:?} does not fit a {}x{} grid",
                self.design_box, self.grid.nx, self.grid.ny
            )));
        }
        if self.pinned_indices.len() != self.pinned_values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} pinned indices but {} pinned values",
                self.pinned_indices.len(),
                self.pinned_values.len()
            )));
        }
        if self.source.j.len() != self.grid.n_edges() {
            return Err(Error::DimensionMismatch(format!(
                "source has {} edges, grid has {}",
                self.source.j.len(),
                self.grid.n_edges()
            )));
        }
        let mut seen = HashSet::with_capacity(self.pinned_indices.len());
        for (&k, v) in self.pinned_indices.iter().zip(&self.pinned_values) {
            if k >= self.grid.n_cells() {
                return Err(Error::InvalidObjective(format!("pinned index {k} out of range")));
            }
            let (i, j) = self.grid.coords(k);
            if !self.design_box.contains(i, j) {
                return Err(Error::InvalidObjective(format!(
                    "pinned cell ({i}, {j}) lies outside the design box"
                )));
            }
            if !seen.insert(k) {
                return Err(Error::InvalidObjective(format!("cell {k} pinned twice")));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidObjective(format!("pinned value at cell {k} is not finite")));
            }
        }
        Ok(())
    }

    /// The pinned values scattered into a full-grid field (zero elsewhere).
    pub fn pinned_field(&self) -> Vec<C64> {
        let mut x = vec![C64::default(); self.grid.n_cells()];
        for (&k, &v) in self.pinned_indices.iter().zip(&self.pinned_values) {
            x[k] = v;
        }
        x
    }
}

/// Which vertical side of the design box a port sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// A mode entering (left side) or leaving (right side) the box. The mode
/// profile covers grid rows `row_offset .. row_offset + len`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortMode {
    pub side: Side,
    pub mode: ModeProfile,
    pub row_offset: usize,
    /// Global phase of the pinned wave, radians.
    pub phase: f64,
}

impl PortMode {
    pub fn new(side: Side, mode: ModeProfile) -> Self {
        Self {
            side,
            mode,
            row_offset: 0,
            phase: 0.0,
        }
    }
}

/// Mode profile restricted to the box rows, with matching permittivities.
fn layer_profile(grid: &GridSpec, b: &DesignBox, port: &PortMode) -> Result<(Vec<C64>, Vec<f64>)> {
    let n = port.mode.profile.len();
    if port.row_offset + n > grid.ny {
        return Err(Error::DimensionMismatch(format!(
            "mode of {n} rows at offset {} exceeds grid height {}",
            port.row_offset, grid.ny
        )));
    }
    let mut h = Vec::with_capacity(b.height);
    let mut eps = Vec::with_capacity(b.height);
    for j in b.y0..b.y1() {
        let k = j.checked_sub(port.row_offset).filter(|k| *k < n);
        h.push(k.map_or(C64::default(), |k| port.mode.profile[k]));
        eps.push(k.map_or(1.0, |k| port.mode.slice_eps[k]));
    }
    Ok((h, eps))
}

fn layer_power(h: &[C64], eps: &[f64], beta: f64) -> f64 {
    beta.sin() * h.iter().zip(eps).map(|(v, e)| v.norm_sqr() / e).sum::<f64>()
}

/// Forward waves pinned on the two outer columns of each port side; every
/// other ring cell is pinned to zero.
///
/// The input layer is normalized to unit norm. Output amplitudes are chosen
/// so that each output carries the input's power divided evenly.
pub fn build_coupler_objective(
    grid: &GridSpec,
    design_box: DesignBox,
    input: &PortMode,
    outputs: &[PortMode],
) -> Result<DesignObjective> {
    let b = design_box;
    if !b.fits(grid) || b.width < 4 || (!b.wraps_y(grid) && b.height < 4) {
        return Err(Error::InvalidObjective(format!("design box {b:?} is too small or outside the grid")));
    }
    if input.side != Side::Left || outputs.iter().any(|o| o.side != Side::Right) || outputs.is_empty() {
        return Err(Error::InvalidObjective(
            "the input port must be on the left side and outputs on the right".into(),
        ));
    }
    let (h_in, eps_in) = layer_profile(grid, &b, input)?;
    let norm = h_in.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidObjective("input mode vanishes on the design box".into()));
    }
    let p_in = layer_power(&h_in, &eps_in, input.mode.beta) / (norm * norm);

    let mut field = vec![C64::default(); grid.n_cells()];
    let amp_in = C64::from_polar(1.0 / norm, input.phase);
    for k in 0..2 {
        let ph = C64::from_polar(1.0, input.mode.beta * k as f64);
        for (jj, h) in h_in.iter().enumerate() {
            field[grid.idx(b.x0 + k, b.y0 + jj)] += amp_in * ph * h;
        }
    }
    let share = p_in / outputs.len() as f64;
    for out in outputs {
        let (h, eps) = layer_profile(grid, &b, out)?;
        let p_unit = layer_power(&h, &eps, out.mode.beta);
        if p_unit <= 0.0 {
            return Err(Error::InvalidObjective("output mode vanishes on the design box".into()));
        }
        let amp = C64::from_polar((share / p_unit).sqrt(), out.phase);
        let inner = b.x1() - 2;
        for k in 0..2 {
            let ph = C64::from_polar(1.0, out.mode.beta * k as f64);
            for (jj, hv) in h.iter().enumerate() {
                field[grid.idx(inner + k, b.y0 + jj)] += amp * ph * hv;
            }
        }
    }
    ring_objective(grid, b, &field, SourceSpec::zero(grid))
}

/// Pin every cell of the two outer ring layers to `field`.
pub fn ring_objective(grid: &GridSpec, b: DesignBox, field: &[C64], source: SourceSpec) -> Result<DesignObjective> {
    if field.len() != grid.n_cells() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} cells, grid has {}",
            field.len(),
            grid.n_cells()
        )));
    }
    let mut idx = Vec::new();
    let mut val = Vec::new();
    for k in b.cells(grid) {
        let (i, j) = grid.coords(k);
        if b.layer(grid, i, j).is_some_and(|d| d < 2) {
            idx.push(k);
            val.push(field[k]);
        }
    }
    DesignObjective::new(*grid, b, idx, val, source)
}

/// Uniform plane-wave layers across a full-height box.
fn plane_layers(grid: &GridSpec, b: &DesignBox, first_column: usize, amp: C64, beta: f64, field: &mut [C64]) {
    for k in 0..2 {
        let v = amp * C64::from_polar(1.0, beta * k as f64);
        for j in b.y0..b.y1() {
            field[grid.idx(first_column + k, j)] = v;
        }
    }
}

fn require_full_height(grid: &GridSpec, b: &DesignBox, what: &str) -> Result<()> {
    if !grid.is_periodic_y() {
        return Err(Error::RequiresPeriodic(what.into()));
    }
    if !b.wraps_y(grid) || !b.fits(grid) || b.width < 5 {
        return Err(Error::InvalidObjective(format!(
            "{what}: the design box must span the full periodic height and be at least 5 cells wide"
        )));
    }
    Ok(())
}

/// Normally incident plane wave on the left planes and the same wave,
/// transmitted without loss, on the right planes. `eps_left`/`eps_right`
/// are the background media on either side of the box.
pub fn build_cloak_objective(
    grid: &GridSpec,
    design_box: DesignBox,
    eps_left: f64,
    eps_right: f64,
    output_phase: f64,
) -> Result<DesignObjective> {
    let b = design_box;
    require_full_height(grid, &b, "cloak objective")?;
    let left = crate::fdfd::plane_wave_profile(grid, eps_left)?;
    let right = crate::fdfd::plane_wave_profile(grid, eps_right)?;
    let amp_in = 1.0 / (b.height as f64).sqrt();
    // equal power: |a|² sinβ / ε on both sides
    let ratio = (left.beta.sin() / eps_left) / (right.beta.sin() / eps_right);
    let amp_out = C64::from_polar(amp_in * ratio.sqrt(), output_phase);
    let mut field = vec![C64::default(); grid.n_cells()];
    plane_layers(grid, &b, b.x0, C64::new(amp_in, 0.0), left.beta, &mut field);
    plane_layers(grid, &b, b.x1() - 2, amp_out, right.beta, &mut field);
    ring_objective(grid, b, &field, SourceSpec::zero(grid))
}

/// Design cells for a cloak: the box interior minus the object and a
/// `margin`-cell border around it.
pub fn cloak_vary_mask(grid: &GridSpec, design_box: DesignBox, object_mask: &[bool], margin: usize) -> Result<Vec<bool>> {
    if object_mask.len() != grid.n_cells() {
        return Err(Error::DimensionMismatch(format!(
            "object mask has {} cells, grid has {}",
            object_mask.len(),
            grid.n_cells()
        )));
    }
    let m = margin as isize;
    let near_object = |i: usize, j: usize| {
        for di in -m..=m {
            for dj in -m..=m {
                let ii = i as isize + di;
                let mut jj = j as isize + dj;
                if grid.is_periodic_y() {
                    jj = jj.rem_euclid(grid.ny as isize);
                }
                if ii >= 0
                    && jj >= 0
                    && (ii as usize) < grid.nx
                    && (jj as usize) < grid.ny
                    && object_mask[grid.idx(ii as usize, jj as usize)]
                {
                    return true;
                }
            }
        }
        false
    };
    let mut mask = vec![false; grid.n_cells()];
    for k in design_box.cells(grid) {
        let (i, j) = grid.coords(k);
        if design_box.layer(grid, i, j).is_some_and(|d| d >= 2) && !near_object(i, j) {
            mask[k] = true;
        }
    }
    Ok(mask)
}

/// Incident plane wave of complex amplitude `incident` on the left planes and
/// supplied target columns on the right planes (`output_layers[0]` on column
/// `x1 − 2`, `output_layers[1]` on `x1 − 1`, each of box height).
pub fn build_mimic_objective(
    grid: &GridSpec,
    design_box: DesignBox,
    eps_left: f64,
    incident: C64,
    output_layers: [&[C64]; 2],
) -> Result<DesignObjective> {
    let b = design_box;
    require_full_height(grid, &b, "mimic objective")?;
    for layer in output_layers {
        if layer.len() != b.height {
            return Err(Error::DimensionMismatch(format!(
                "target layer has {} rows, design box has {}",
                layer.len(),
                b.height
            )));
        }
    }
    let left = crate::fdfd::plane_wave_profile(grid, eps_left)?;
    let mut field = vec![C64::default(); grid.n_cells()];
    plane_layers(grid, &b, b.x0, incident, left.beta, &mut field);
    for (k, layer) in output_layers.iter().enumerate() {
        for (jj, v) in layer.iter().enumerate() {
            field[grid.idx(b.x1() - 2 + k, b.y0 + jj)] = *v;
        }
    }
    ring_objective(grid, b, &field, SourceSpec::zero(grid))
}

/// Permittivity of the design box ring copied from the exterior: each ring
/// cell takes the value of the first cell outside the box on its nearest side.
pub fn extend_exterior(grid: &GridSpec, design_box: DesignBox, eps: &mut [f64]) {
    let b = design_box;
    let wraps = b.wraps_y(grid);
    for k in b.cells(grid) {
        let (i, j) = grid.coords(k);
        let Some(d) = b.layer(grid, i, j) else { continue };
        if d >= 2 {
            continue;
        }
        let dl = i - b.x0;
        let dr = b.x1() - 1 - i;
        let (src_i, src_j) = if dl == d && b.x0 > 0 {
            (b.x0 - 1, j)
        } else if dr == d && b.x1() < grid.nx {
            (b.x1(), j)
        } else if !wraps && j - b.y0 == d && b.y0 > 0 {
            (i, b.y0 - 1)
        } else if !wraps && b.y1() < grid.ny {
            (i, b.y1())
        } else {
            continue;
        };
        eps[k] = eps[grid.idx(src_i, src_j)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdfd::solve_waveguide_mode;
    use crate::grid::{Boundary, PmlParams};

    fn pml_grid() -> GridSpec {
        let pml = Boundary::Absorbing(PmlParams::default());
        GridSpec::new(50, 50, 21.0, pml, pml).unwrap()
    }

    #[test]
    fn ring_layers() {
        let g = pml_grid();
        let b = DesignBox::new(12, 10, 8, 20);
        assert_eq!(b.layer(&g, 12, 15), Some(0));
        assert_eq!(b.layer(&g, 13, 15), Some(1));
        assert_eq!(b.layer(&g, 15, 11), Some(1));
        assert_eq!(b.layer(&g, 15, 15), Some(3));
        assert_eq!(b.layer(&g, 11, 15), None);
    }

    #[test]
    fn coupler_pins_port_waves_and_zeros() {
        let g = pml_grid();
        let b = DesignBox::new(15, 12, 16, 26);
        let slice: Vec<f64> = (0..50).map(|j| if (22..28).contains(&j) { 12.25 } else { 1.0 }).collect();
        let m = solve_waveguide_mode(&slice, g.omega(), 0).unwrap();
        let port = PortMode::new(Side::Left, m.clone());
        let out = PortMode::new(Side::Right, m.clone());
        let obj = build_coupler_objective(&g, b, &port, &[out]).unwrap();
        let x = obj.pinned_field();
        let l0: Vec<C64> = (b.y0..b.y1()).map(|j| x[g.idx(b.x0, j)]).collect();
        let l1: Vec<C64> = (b.y0..b.y1()).map(|j| x[g.idx(b.x0 + 1, j)]).collect();
        let n0: f64 = l0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!((n0 - 1.0).abs() < 1e-12);
        let ph = C64::from_polar(1.0, m.beta);
        for (a, c) in l0.iter().zip(&l1) {
            assert!((a * ph - c).norm() < 1e-14);
        }
        // same guide in and out: identical amplitude on the output layers
        for j in b.y0..b.y1() {
            assert!((x[g.idx(b.x1() - 2, j)].norm() - x[g.idx(b.x0, j)].norm()).abs() < 1e-12);
        }
        for (&k, v) in obj.pinned_indices.iter().zip(&obj.pinned_values) {
            let (i, _) = g.coords(k);
            if !(i < b.x0 + 2 || i >= b.x1() - 2) {
                assert_eq!(*v, C64::default());
            }
        }
        let ring = b.cells(&g).len() - (b.width - 4) * (b.height - 4);
        assert_eq!(obj.pinned_indices.len(), ring);
    }

    #[test]
    fn cloak_needs_periodic_grid() {
        let g = pml_grid();
        let err = build_cloak_objective(&g, DesignBox::new(15, 0, 10, 50), 1.0, 1.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::RequiresPeriodic(_)));
    }

    #[test]
    fn cloak_vary_mask_skips_object_margin_and_ring() {
        let g = GridSpec::new(40, 24, 21.0, Boundary::Absorbing(PmlParams::default()), Boundary::Periodic).unwrap();
        let b = DesignBox::new(12, 0, 16, 24);
        let mut object = vec![false; g.n_cells()];
        object[g.idx(20, 10)] = true;
        let mask = cloak_vary_mask(&g, b, &object, 1).unwrap();
        assert!(!mask[g.idx(20, 10)] && !mask[g.idx(21, 11)] && !mask[g.idx(19, 9)]);
        assert!(mask[g.idx(22, 10)]);
        assert!(!mask[g.idx(13, 5)] && mask[g.idx(14, 5)]);
        assert!(mask[g.idx(14, 0)]);
    }

    #[test]
    fn duplicate_pins_rejected() {
        let g = pml_grid();
        let b = DesignBox::whole(&g);
        let err = DesignObjective::new(g, b, vec![3, 3], vec![C64::default(); 2], SourceSpec::zero(&g)).unwrap_err();
        assert!(matches!(err, Error::InvalidObjective(_)));
    }
}
