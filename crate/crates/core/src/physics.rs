//! The bilinear wave equation `∇×ε⁻¹∇×H − ω²H = ∇×ε⁻¹J` on the Yee grid,
//! written either as `A(p) x = b(p)` (linear in the field) or as
//! `B(x) p = d(x)` (linear in the structure).
//!
//! With `g = Ch x − J`:
//!
//! ```text
//! A(p) x − b(p) = Ce diag(M p) g − ω² x = B(x) p − d(x)
//! B(x) = Ce diag(g) M,   d(x) = ω² x
//! ```

use crate::error::{Error, Result};
use crate::grid::{GridOperators, GridSpec};
use crate::linalg::{self, SparseLinearOperator, C64};

/// Inverse permittivity per cell with box bounds on the design cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub p: Vec<f64>,
    pub p_lo: f64,
    pub p_hi: f64,
    /// `true` marks a design variable; `false` cells are frozen.
    pub vary_mask: Vec<bool>,
}

/// `ε⁻¹` of silicon, the default lower bound on `p`.
pub const P_SILICON: f64 = 1.0 / 12.25;
/// `ε⁻¹` of air, the default upper bound on `p`.
pub const P_AIR: f64 = 1.0;

impl Structure {
    pub fn new(p: Vec<f64>, p_lo: f64, p_hi: f64, vary_mask: Vec<bool>) -> Result<Self> {
        let s = Self {
            p,
            p_lo,
            p_hi,
            vary_mask,
        };
        s.validate()?;
        Ok(s)
    }

    /// Every cell frozen at `p`.
    pub fn frozen(p: Vec<f64>) -> Result<Self> {
        let n = p.len();
        Self::new(p, P_SILICON, P_AIR, vec![false; n])
    }

    /// Every cell frozen, given as relative permittivities.
    pub fn from_eps(eps: &[f64]) -> Result<Self> {
        Self::frozen(eps.iter().map(|e| 1.0 / e).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.vary_mask.len() != self.p.len() {
            return Err(Error::DimensionMismatch(format!(
                "vary mask has {} cells, structure has {}",
                self.vary_mask.len(),
                self.p.len()
            )));
        }
        if !(self.p_lo <= self.p_hi) || !self.p_lo.is_finite() || !self.p_hi.is_finite() {
            return Err(Error::InvalidStructure(format!(
                "bounds [{}, {}] are not an interval",
                self.p_lo, self.p_hi
            )));
        }
        for (k, (&v, &vary)) in self.p.iter().zip(&self.vary_mask).enumerate() {
            if !v.is_finite() || v == 0.0 {
                return Err(Error::InvalidStructure(format!("cell {k} has p = {v}")));
            }
            if vary && (v < self.p_lo || v > self.p_hi) {
                return Err(Error::InvalidStructure(format!(
                    "design cell {k} has p = {v} outside [{}, {}]",
                    self.p_lo, self.p_hi
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn eps(&self) -> Vec<f64> {
        self.p.iter().map(|v| 1.0 / v).collect()
    }

    pub fn vary_indices(&self) -> Vec<usize> {
        (0..self.p.len()).filter(|&k| self.vary_mask[k]).collect()
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.p.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "structure has {} cells, grid has {}",
                self.p.len(),
                grid.n_cells()
            )));
        }
        Ok(())
    }
}

/// Complex `H_z` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub x: Vec<C64>,
}

impl FieldState {
    pub fn new(x: Vec<C64>) -> Self {
        Self { x }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x: vec![C64::default(); n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Electric current density on the grid edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub j: Vec<C64>,
}

impl SourceSpec {
    pub fn zero(grid: &GridSpec) -> Self {
        Self {
            j: vec![C64::default(); grid.n_edges()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.j.iter().all(|v| *v == C64::default())
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            j: self.j.iter().map(|v| v * c).collect(),
        }
    }
}

fn check_field(grid: &GridSpec, x: &FieldState) -> Result<()> {
    if x.x.len() != grid.n_cells() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} cells, grid has {}",
            x.x.len(),
            grid.n_cells()
        )));
    }
    Ok(())
}

fn check_source(grid: &GridSpec, src: &SourceSpec) -> Result<()> {
    if src.j.len() != grid.n_edges() {
        return Err(Error::DimensionMismatch(format!(
            "source has {} edges, grid has {}",
            src.j.len(),
            grid.n_edges()
        )));
    }
    Ok(())
}

fn edge_p(ops: &GridOperators, s: &Structure) -> Vec<C64> {
    ops.edge_map
        .average(&s.p)
        .into_iter()
        .map(|v| C64::new(v, 0.0))
        .collect()
}

/// `A(p) = Ce diag(M p) Ch − ω² I`.
pub fn assemble_a(ops: &GridOperators, s: &Structure) -> Result<SparseLinearOperator> {
    s.check_grid(&ops.grid)?;
    let w2 = ops.grid.omega().powi(2);
    let pe = edge_p(ops, s);
    let curl_curl = ops.curls.ce.scaled(None, Some(&pe))?.matmul(&ops.curls.ch)?;
    curl_curl.add_scaled(
        &SparseLinearOperator::identity(ops.grid.n_cells()),
        C64::new(-w2, 0.0),
    )
}

/// `b(p) = Ce diag(M p) J`.
pub fn assemble_b(ops: &GridOperators, s: &Structure, src: &SourceSpec) -> Result<Vec<C64>> {
    s.check_grid(&ops.grid)?;
    check_source(&ops.grid, src)?;
    let pe = edge_p(ops, s);
    let weighted: Vec<C64> = pe.iter().zip(&src.j).map(|(a, b)| a * b).collect();
    ops.curls.ce.apply(&weighted)
}

/// `B(x) = Ce diag(Ch x − J) M` over all cells (no vary-mask restriction).
pub fn assemble_b_full(
    ops: &GridOperators,
    x: &FieldState,
    src: &SourceSpec,
) -> Result<SparseLinearOperator> {
    check_field(&ops.grid, x)?;
    check_source(&ops.grid, src)?;
    let g = linalg::sub(&ops.curls.ch.apply(&x.x)?, &src.j);
    ops.curls
        .ce
        .scaled(None, Some(&g))?
        .matmul(ops.edge_map.operator())
}

/// `B(x)` restricted to the structure's design cells, together with the
/// right-hand side `d(x) − B_frozen p_frozen` that absorbs the frozen cells.
pub fn assemble_b_design(
    ops: &GridOperators,
    x: &FieldState,
    src: &SourceSpec,
    s: &Structure,
) -> Result<(SparseLinearOperator, Vec<C64>)> {
    s.check_grid(&ops.grid)?;
    let full = assemble_b_full(ops, x, src)?;
    let frozen_p: Vec<C64> = s
        .p
        .iter()
        .zip(&s.vary_mask)
        .map(|(&v, &vary)| C64::new(if vary { 0.0 } else { v }, 0.0))
        .collect();
    let frozen_term = full.apply(&frozen_p)?;
    let d = assemble_d(&ops.grid, x)?;
    let rhs = linalg::sub(&d, &frozen_term);
    Ok((full.select_cols(&s.vary_indices()), rhs))
}

/// `d(x) = ω² x`.
pub fn assemble_d(grid: &GridSpec, x: &FieldState) -> Result<Vec<C64>> {
    check_field(grid, x)?;
    let w2 = grid.omega().powi(2);
    Ok(x.x.iter().map(|v| v * w2).collect())
}

/// `A(p) x − b(p)`, evaluated without forming `A`.
pub fn residual_vector(
    ops: &GridOperators,
    s: &Structure,
    x: &FieldState,
    src: &SourceSpec,
) -> Result<Vec<C64>> {
    s.check_grid(&ops.grid)?;
    check_field(&ops.grid, x)?;
    check_source(&ops.grid, src)?;
    let w2 = ops.grid.omega().powi(2);
    let pe = ops.edge_map.average(&s.p);
    let ch_x = ops.curls.ch.apply(&x.x)?;
    let e: Vec<C64> = ch_x
        .iter()
        .zip(&src.j)
        .zip(&pe)
        .map(|((h, j), p)| (h - j) * *p)
        .collect();
    let mut r = ops.curls.ce.apply(&e)?;
    for (ri, xi) in r.iter_mut().zip(&x.x) {
        *ri -= xi * w2;
    }
    Ok(r)
}

/// Physics residual `‖A(p) x − b(p)‖₂`.
pub fn physics_residual(
    ops: &GridOperators,
    s: &Structure,
    x: &FieldState,
    src: &SourceSpec,
) -> Result<f64> {
    Ok(linalg::norm(&residual_vector(ops, s, x, src)?))
}

/// Electric field on the edges, `E = (∇×H − J) / (i ε ω)`.
pub fn e_field(
    ops: &GridOperators,
    s: &Structure,
    x: &FieldState,
    src: &SourceSpec,
) -> Result<Vec<C64>> {
    s.check_grid(&ops.grid)?;
    check_field(&ops.grid, x)?;
    check_source(&ops.grid, src)?;
    let pe = ops.edge_map.average(&s.p);
    let denom = C64::new(0.0, ops.grid.omega());
    let ch_x = ops.curls.ch.apply(&x.x)?;
    Ok(ch_x
        .iter()
        .zip(&src.j)
        .zip(&pe)
        .map(|((h, j), p)| (h - j) * *p / denom)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn ops(nx: usize, ny: usize) -> GridOperators {
        let g = GridSpec::new(nx, ny, 16.0, Boundary::Periodic, Boundary::Periodic).unwrap();
        GridOperators::new(&g).unwrap()
    }

    #[test]
    fn constant_field_in_vacuum() {
        let o = ops(8, 8);
        let s = Structure::frozen(vec![1.0; 64]).unwrap();
        let a = assemble_a(&o, &s).unwrap();
        let x = vec![C64::new(1.0, 0.0); 64];
        let w2 = o.grid.omega().powi(2);
        for v in a.apply(&x).unwrap() {
            assert!((v + w2).norm() < 1e-14);
        }
        let b = assemble_b_full(&o, &FieldState::new(x), &SourceSpec::zero(&o.grid)).unwrap();
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn zero_source_zero_b_and_linear_in_p() {
        let o = ops(6, 5);
        let s = Structure::frozen((0..30).map(|k| 0.2 + 0.01 * k as f64).collect()).unwrap();
        let zero = assemble_b(&o, &s, &SourceSpec::zero(&o.grid)).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));

        let mut src = SourceSpec::zero(&o.grid);
        src.j[o.grid.ey_edge(2, 2)] = C64::new(1.0, -0.5);
        let b1 = assemble_b(&o, &s, &src).unwrap();
        let s2 = Structure::frozen(s.p.iter().map(|v| 2.0 * v).collect()).unwrap();
        let b2 = assemble_b(&o, &s2, &src).unwrap();
        for (u, v) in b1.iter().zip(&b2) {
            assert!((2.0 * u - v).norm() < 1e-15);
        }
        let support: Vec<usize> = (0..30).filter(|&k| b1[k].norm() > 0.0).collect();
        assert_eq!(support, vec![o.grid.idx(2, 2), o.grid.idx(3, 2)]);
    }

    #[test]
    fn d_scales_with_omega_squared() {
        let g1 = GridSpec::new(4, 4, 16.0, Boundary::Wall, Boundary::Wall).unwrap();
        let g2 = GridSpec { wavelength: 8.0, ..g1 };
        let mut e = vec![C64::default(); 16];
        e[5] = C64::new(1.0, 0.0);
        let x = FieldState::new(e);
        let d1 = assemble_d(&g1, &x).unwrap();
        let d2 = assemble_d(&g2, &x).unwrap();
        assert_eq!(d1[5], C64::new(g1.omega().powi(2), 0.0));
        assert!((d2[5] - 4.0 * d1[5]).norm() < 1e-15);
        assert!(d1.iter().enumerate().all(|(k, v)| k == 5 || v.norm() == 0.0));
    }

    #[test]
    fn frozen_cell_changes_local_rows_only() {
        let o = ops(8, 8);
        let s1 = Structure::frozen(vec![0.5; 64]).unwrap();
        let mut p = vec![0.5; 64];
        let c = o.grid.idx(4, 4);
        p[c] = 0.1;
        let s2 = Structure::frozen(p).unwrap();
        let diff = assemble_a(&o, &s1)
            .unwrap()
            .add_scaled(&assemble_a(&o, &s2).unwrap(), C64::new(-1.0, 0.0))
            .unwrap();
        for (r, col, v) in diff.triplets() {
            if v.norm() > 0.0 {
                let (ri, rj) = o.grid.coords(r);
                let (ci, cj) = o.grid.coords(col);
                assert!(ri.abs_diff(4) + rj.abs_diff(4) <= 1);
                assert!(ci.abs_diff(4) + cj.abs_diff(4) <= 2);
            }
        }
    }

    #[test]
    fn structure_validation() {
        assert!(Structure::new(vec![0.5, 2.0], 0.1, 1.0, vec![true, true]).is_err());
        assert!(Structure::new(vec![0.5, -0.5], 0.1, 1.0, vec![true, false]).is_ok());
        assert!(Structure::new(vec![0.5, 0.0], 0.1, 1.0, vec![true, false]).is_err());
    }
}
