//! Staggered 2D Yee grid for the TE polarization (`H_z` at cell centers,
//! `E_x`/`E_y` on cell edges), its discrete curls with stretched-coordinate
//! PML, and the cell-to-edge averaging map for the inverse permittivity.
//!
//! Units are normalized: grid spacing 1, `μ₀ = ε₀ = c = 1`, so the angular
//! frequency is `ω = 2π / λ` with `λ` measured in grid cells.
//!
//! Cell `(i, j)` (x index `i`, y index `j`) has linear index `i * ny + j`.
//! Each cell owns two edges: the `E_x` edge on its `+y` side (index
//! `i * ny + j`) and the `E_y` edge on its `+x` side (index `N + i * ny + j`).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{SparseLinearOperator, C64};

/// Stretched-coordinate PML profile `s(u) = 1 + i σ_max ((d-u)/d)^m / ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlParams {
    pub thickness: usize,
    pub max_sigma: f64,
    pub polynomial_order: u32,
}

/// Normal-incidence reflection the default conductivity is sized for.
pub const PML_TARGET_REFLECTION: f64 = 1e-5;

impl PmlParams {
    /// PML of the given thickness with `σ_max` chosen so that the continuum
    /// normal-incidence reflection equals [`PML_TARGET_REFLECTION`].
    pub fn with_thickness(thickness: usize) -> Self {
        let order = 3;
        Self {
            thickness,
            max_sigma: default_sigma(thickness, order),
            polynomial_order: order,
        }
    }
}

impl Default for PmlParams {
    fn default() -> Self {
        Self::with_thickness(10)
    }
}

fn default_sigma(thickness: usize, order: u32) -> f64 {
    (order as f64 + 1.0) * (1.0 / PML_TARGET_REFLECTION).ln() / (2.0 * thickness as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// PML backed by a perfect electric wall.
    Absorbing(PmlParams),
    /// Wrap-around stencil, zero Bloch phase.
    Periodic,
    /// Perfect electric wall without PML (Neumann for `H_z`).
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub wavelength: f64,
    pub boundary_x: Boundary,
    pub boundary_y: Boundary,
}

impl GridSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        wavelength: f64,
        boundary_x: Boundary,
        boundary_y: Boundary,
    ) -> Result<Self> {
        let g = Self {
            nx,
            ny,
            wavelength,
            boundary_x,
            boundary_y,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::InvalidGrid(format!(
                "grid {}x{} is smaller than the 4x4 minimum",
                self.nx, self.ny
            )));
        }
        if !(self.wavelength > 2.0) || !self.wavelength.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "wavelength {} grid cells is at or below the grid Nyquist limit of 2",
                self.wavelength
            )));
        }
        let min_dim = self.nx.min(self.ny);
        for (axis, b) in [("x", self.boundary_x), ("y", self.boundary_y)] {
            if let Boundary::Absorbing(p) = b {
                if p.thickness < 4 {
                    return Err(Error::InvalidGrid(format!(
                        "PML along {axis} is {} cells thick, minimum is 4",
                        p.thickness
                    )));
                }
                if 2 * p.thickness >= min_dim {
                    return Err(Error::InvalidGrid(format!(
                        "PML along {axis} ({} cells) must be thinner than half the smallest grid dimension ({min_dim})",
                        p.thickness
                    )));
                }
                if !(p.max_sigma > 0.0) {
                    return Err(Error::InvalidGrid(format!(
                        "PML along {axis} has non-positive max_sigma {}",
                        p.max_sigma
                    )));
                }
            }
        }
        Ok(())
    }

    /// `2π / λ`.
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_edges(&self) -> usize {
        2 * self.n_cells()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.ny, idx % self.ny)
    }

    #[inline]
    pub fn ex_edge(&self, i: usize, j: usize) -> usize {
        self.idx(i, j)
    }

    #[inline]
    pub fn ey_edge(&self, i: usize, j: usize) -> usize {
        self.n_cells() + self.idx(i, j)
    }

    pub fn pml_thickness_x(&self) -> usize {
        match self.boundary_x {
            Boundary::Absorbing(p) => p.thickness,
            _ => 0,
        }
    }

    pub fn pml_thickness_y(&self) -> usize {
        match self.boundary_y {
            Boundary::Absorbing(p) => p.thickness,
            _ => 0,
        }
    }

    /// True if column `i` lies inside the x-PML.
    pub fn column_in_pml(&self, i: usize) -> bool {
        let d = self.pml_thickness_x();
        i < d || i + d >= self.nx
    }

    pub fn row_in_pml(&self, j: usize) -> bool {
        let d = self.pml_thickness_y();
        j < d || j + d >= self.ny
    }

    pub fn cell_in_pml(&self, i: usize, j: usize) -> bool {
        self.column_in_pml(i) || self.row_in_pml(j)
    }

    pub fn is_periodic_y(&self) -> bool {
        matches!(self.boundary_y, Boundary::Periodic)
    }

    pub fn is_periodic_x(&self) -> bool {
        matches!(self.boundary_x, Boundary::Periodic)
    }
}

/// Stretch factor at coordinate `u` (cell centers at `k + 0.5`) on an axis
/// of `len` cells.
fn stretch(b: Boundary, len: usize, u: f64, omega: f64) -> C64 {
    let Boundary::Absorbing(p) = b else {
        return C64::new(1.0, 0.0);
    };
    let d = p.thickness as f64;
    let depth = if u < d {
        (d - u) / d
    } else if u > len as f64 - d {
        (u - (len as f64 - d)) / d
    } else {
        0.0
    };
    if depth <= 0.0 {
        return C64::new(1.0, 0.0);
    }
    C64::new(1.0, p.max_sigma * depth.powi(p.polynomial_order as i32) / omega)
}

/// Discrete curls: `ch` maps `H_z` (cells) to `(E_x, E_y)` (edges), `ce` maps
/// edges back to cells.
#[derive(Debug, Clone)]
pub struct CurlPair {
    pub ch: SparseLinearOperator,
    pub ce: SparseLinearOperator,
}

pub fn build_curls(grid: &GridSpec) -> Result<CurlPair> {
    grid.validate()?;
    let (nx, ny) = (grid.nx, grid.ny);
    let n = grid.n_cells();
    let w = grid.omega();
    let one = Complex64::new(1.0, 0.0);

    // Unstretched difference operator D (edges x cells): Ch = S_e⁻¹ D, Ce = S_c⁻¹ Dᵀ.
    let mut d_trip = Vec::with_capacity(4 * n);
    let mut ch_trip = Vec::with_capacity(4 * n);
    for i in 0..nx {
        for j in 0..ny {
            let c = grid.idx(i, j);
            let up = if j + 1 < ny {
                Some(grid.idx(i, j + 1))
            } else if grid.is_periodic_y() {
                Some(grid.idx(i, 0))
            } else {
                None
            };
            if let Some(u) = up {
                let e = grid.ex_edge(i, j);
                let s = stretch(grid.boundary_y, ny, (j + 1) as f64, w);
                d_trip.push((e, u, one));
                d_trip.push((e, c, -one));
                ch_trip.push((e, u, one / s));
                ch_trip.push((e, c, -one / s));
            }
            let right = if i + 1 < nx {
                Some(grid.idx(i + 1, j))
            } else if grid.is_periodic_x() {
                Some(grid.idx(0, j))
            } else {
                None
            };
            if let Some(r) = right {
                let e = grid.ey_edge(i, j);
                let s = stretch(grid.boundary_x, nx, (i + 1) as f64, w);
                d_trip.push((e, r, -one));
                d_trip.push((e, c, one));
                ch_trip.push((e, r, -one / s));
                ch_trip.push((e, c, one / s));
            }
        }
    }
    let ch = SparseLinearOperator::from_triplets(2 * n, n, ch_trip)?;
    let ce_trip = d_trip.into_iter().map(|(e, c, v)| {
        let (i, j) = grid.coords(c);
        let s = if e < n {
            stretch(grid.boundary_y, ny, j as f64 + 0.5, w)
        } else {
            stretch(grid.boundary_x, nx, i as f64 + 0.5, w)
        };
        (c, e, v / s)
    });
    let ce = SparseLinearOperator::from_triplets(n, 2 * n, ce_trip)?;
    Ok(CurlPair { ch, ce })
}

/// Averaging map from cell-centered `p` to edges.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    op: SparseLinearOperator,
    /// The one or two cells each edge averages.
    neighbors: Vec<(usize, Option<usize>)>,
}

impl EdgeMap {
    pub fn operator(&self) -> &SparseLinearOperator {
        &self.op
    }

    pub fn neighbors(&self, edge: usize) -> (usize, Option<usize>) {
        self.neighbors[edge]
    }

    /// Edge values of a real cell vector.
    pub fn average(&self, p: &[f64]) -> Vec<f64> {
        self.neighbors
            .iter()
            .map(|&(a, b)| match b {
                Some(b) => 0.5 * (p[a] + p[b]),
                None => p[a],
            })
            .collect()
    }
}

pub fn build_edge_map(grid: &GridSpec) -> Result<EdgeMap> {
    grid.validate()?;
    let (nx, ny) = (grid.nx, grid.ny);
    let n = grid.n_cells();
    let mut neighbors = vec![(0usize, None); 2 * n];
    for i in 0..nx {
        for j in 0..ny {
            let c = grid.idx(i, j);
            let up = if j + 1 < ny {
                Some(grid.idx(i, j + 1))
            } else if grid.is_periodic_y() {
                Some(grid.idx(i, 0))
            } else {
                None
            };
            let right = if i + 1 < nx {
                Some(grid.idx(i + 1, j))
            } else if grid.is_periodic_x() {
                Some(grid.idx(0, j))
            } else {
                None
            };
            neighbors[grid.ex_edge(i, j)] = (c, up);
            neighbors[grid.ey_edge(i, j)] = (c, right);
        }
    }
    let trip = neighbors.iter().enumerate().flat_map(|(e, &(a, b))| {
        let mut v = Vec::with_capacity(2);
        match b {
            Some(b) => {
                v.push((e, a, C64::new(0.5, 0.0)));
                v.push((e, b, C64::new(0.5, 0.0)));
            }
            None => v.push((e, a, C64::new(1.0, 0.0))),
        }
        v
    });
    let op = SparseLinearOperator::from_triplets(2 * n, n, trip)?;
    Ok(EdgeMap { op, neighbors })
}

/// Curls and edge map of one grid, built once and shared read-only.
#[derive(Debug, Clone)]
pub struct GridOperators {
    pub grid: GridSpec,
    pub curls: CurlPair,
    pub edge_map: EdgeMap,
}

impl GridOperators {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        Ok(Self {
            grid: *grid,
            curls: build_curls(grid)?,
            edge_map: build_edge_map(grid)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic(nx: usize, ny: usize) -> GridSpec {
        GridSpec::new(nx, ny, 20.0, Boundary::Periodic, Boundary::Periodic).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(3, 8, 20.0, Boundary::Wall, Boundary::Wall).is_err());
        assert!(GridSpec::new(8, 8, 2.0, Boundary::Wall, Boundary::Wall).is_err());
        let thick = Boundary::Absorbing(PmlParams::with_thickness(10));
        assert!(GridSpec::new(20, 40, 20.0, thick, Boundary::Periodic).is_err());
        let thin = Boundary::Absorbing(PmlParams::with_thickness(3));
        assert!(GridSpec::new(40, 40, 20.0, thin, Boundary::Periodic).is_err());
    }

    #[test]
    fn omega_is_two_pi_over_lambda() {
        let g = periodic(8, 8);
        assert_eq!(g.omega(), 2.0 * PI / 20.0);
    }

    #[test]
    fn adjoint_identity_on_periodic_grid() {
        let g = periodic(8, 8);
        let c = build_curls(&g).unwrap();
        let cht = c.ch.transpose();
        let diff = c.ce.add_scaled(&cht, C64::new(-1.0, 0.0)).unwrap();
        assert_eq!(diff.max_abs(), 0.0);
        assert_eq!(c.ch.rows(), 2 * 64);
        assert_eq!(c.ce.cols(), 2 * 64);
    }

    #[test]
    fn curl_annihilates_constants() {
        for g in [
            periodic(8, 6),
            GridSpec::new(
                30,
                30,
                20.0,
                Boundary::Absorbing(PmlParams::default()),
                Boundary::Wall,
            )
            .unwrap(),
        ] {
            let c = build_curls(&g).unwrap();
            let x = vec![C64::new(1.0, 0.0); g.n_cells()];
            let e = c.ch.apply(&x).unwrap();
            assert!(e.iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn pml_only_touches_pml_entries() {
        let pml = GridSpec::new(
            30,
            30,
            20.0,
            Boundary::Absorbing(PmlParams::default()),
            Boundary::Absorbing(PmlParams::default()),
        )
        .unwrap();
        let bare = GridSpec {
            boundary_x: Boundary::Wall,
            boundary_y: Boundary::Wall,
            ..pml
        };
        let a = build_curls(&pml).unwrap();
        let b = build_curls(&bare).unwrap();
        let m = build_edge_map(&pml).unwrap();
        let interior = |c: usize| {
            let (i, j) = pml.coords(c);
            !pml.cell_in_pml(i, j)
        };
        for (r, c, v) in a.ch.triplets() {
            let (p, q) = m.neighbors(r);
            if interior(p) && q.is_none_or(interior) {
                assert_eq!(v, b.ch.get(r, c));
            }
        }
        for (r, c, v) in a.ce.triplets() {
            let (i, j) = pml.coords(r);
            if !pml.cell_in_pml(i, j) {
                assert_eq!(v, b.ce.get(r, c));
            }
        }
    }

    #[test]
    fn edge_map_rows_sum_to_one() {
        for g in [
            periodic(4, 4),
            GridSpec::new(6, 5, 20.0, Boundary::Wall, Boundary::Periodic).unwrap(),
        ] {
            let m = build_edge_map(&g).unwrap();
            for r in 0..m.operator().rows() {
                let s: C64 = m.operator().row(r).map(|(_, v)| v).sum();
                assert_eq!(s, C64::new(1.0, 0.0));
                assert!(m.operator().row(r).all(|(_, v)| v.re >= 0.0));
            }
        }
    }

    #[test]
    fn edge_map_interior_and_checkerboard() {
        let g = GridSpec::new(4, 4, 20.0, Boundary::Wall, Boundary::Wall).unwrap();
        let m = build_edge_map(&g).unwrap();
        let interior = g.ex_edge(1, 1);
        let row: Vec<_> = m.operator().row(interior).collect();
        assert_eq!(row.len(), 2);
        assert!(row.iter().all(|&(_, v)| v == C64::new(0.5, 0.0)));

        let p: Vec<f64> = (0..16)
            .map(|k| {
                let (i, j) = g.coords(k);
                if (i + j) % 2 == 0 { 0.25 } else { 1.0 }
            })
            .collect();
        let e = m.average(&p);
        for (k, &(_, b)) in m.neighbors.iter().enumerate() {
            if b.is_some() {
                assert_eq!(e[k], 0.625);
            }
        }
        let uniform = m.average(&[0.4; 16]);
        assert!(uniform.iter().all(|&v| v == 0.4));
    }
}
