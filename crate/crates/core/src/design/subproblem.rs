//! The two convex halves of the design problem.
//!
//! Both work on the box-local system: the rows of `A(p) x − b(p)` whose
//! stencil lies inside the design box, with pinned cells eliminated from the
//! field unknowns and frozen cells moved to the right-hand side of the
//! structure problem.

use crate::error::{Error, Result};
use crate::grid::GridOperators;
use crate::linalg::{self, BandedCholesky, BandedLu, SparseLinearOperator, C64};
use crate::physics::{assemble_a, assemble_b, assemble_b_full, FieldState, Structure};

use super::boxlsq::{minimize, BoxLsqSettings, StackedSystem};
use super::objective::DesignObjective;

/// Row and column bookkeeping of one objective's box-local system.
#[derive(Debug, Clone)]
pub struct BoxSystem {
    /// Cells whose wave-equation row is kept.
    pub rows: Vec<usize>,
    /// Free field cells (box minus pinned).
    pub unknowns: Vec<usize>,
    /// Position of each cell in `unknowns`.
    local: Vec<Option<usize>>,
}

impl BoxSystem {
    pub fn new(objective: &DesignObjective) -> Self {
        let g = &objective.grid;
        let b = &objective.design_box;
        let mut pinned = vec![false; g.n_cells()];
        for &k in &objective.pinned_indices {
            pinned[k] = true;
        }
        let in_box = |i: isize, j: isize| -> bool {
            let ii = if g.is_periodic_x() { i.rem_euclid(g.nx as isize) } else { i };
            let jj = if g.is_periodic_y() { j.rem_euclid(g.ny as isize) } else { j };
            if ii < 0 || jj < 0 || ii >= g.nx as isize || jj >= g.ny as isize {
                // no cell there: a wall, not part of the stencil
                return true;
            }
            b.contains(ii as usize, jj as usize)
        };
        let mut rows = Vec::new();
        let mut unknowns = Vec::new();
        let mut local = vec![None; g.n_cells()];
        for k in b.cells(g) {
            let (i, j) = g.coords(k);
            let (i, j) = (i as isize, j as isize);
            if in_box(i - 1, j) && in_box(i + 1, j) && in_box(i, j - 1) && in_box(i, j + 1) {
                rows.push(k);
            }
            if !pinned[k] {
                local[k] = Some(unknowns.len());
                unknowns.push(k);
            }
        }
        Self { rows, unknowns, local }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStepReport {
    /// Box-local physics residual after the step.
    pub residual: f64,
    /// `‖A_RUᴴ (A_RU x_U − r)‖` of the reduced least-squares problem.
    pub gradient_norm: f64,
    /// Norm of the reduced right-hand side `r`.
    pub rhs_norm: f64,
}

/// Box-local residual `(A(p) x − b(p))` restricted to the kept rows.
pub fn box_residual(ops: &GridOperators, s: &Structure, obj: &DesignObjective, sys: &BoxSystem, x: &FieldState) -> Result<Vec<C64>> {
    let r = crate::physics::residual_vector(ops, s, x, &obj.source)?;
    Ok(sys.rows.iter().map(|&k| r[k]).collect())
}

/// Minimize the box-local physics residual over the free field cells with
/// the pinned cells held at their values. Cells outside the box are zero.
pub fn field_subproblem(ops: &GridOperators, s: &Structure, obj: &DesignObjective) -> Result<(FieldState, FieldStepReport)> {
    field_subproblem_with(ops, s, obj, &BoxSystem::new(obj))
}

pub fn field_subproblem_with(
    ops: &GridOperators,
    s: &Structure,
    obj: &DesignObjective,
    sys: &BoxSystem,
) -> Result<(FieldState, FieldStepReport)> {
    let n = ops.grid.n_cells();
    let mut x = obj.pinned_field();
    if sys.unknowns.is_empty() {
        let x = FieldState::new(x);
        let r = linalg::norm(&box_residual(ops, s, obj, sys, &x)?);
        return Ok((
            x,
            FieldStepReport {
                residual: r,
                gradient_norm: 0.0,
                rhs_norm: r,
            },
        ));
    }
    let a = assemble_a(ops, s)?;
    let b = assemble_b(ops, s, &obj.source)?;
    let ax0 = a.apply(&x)?;
    let rhs: Vec<C64> = sys.rows.iter().map(|&k| b[k] - ax0[k]).collect();

    let mut trip = Vec::with_capacity(sys.rows.len() * 5);
    for (r, &k) in sys.rows.iter().enumerate() {
        for (c, v) in a.row(k) {
            if let Some(u) = sys.local[c] {
                trip.push((r, u, v));
            }
        }
    }
    let a_ru = SparseLinearOperator::from_triplets(sys.rows.len(), sys.unknowns.len(), trip)?;
    let xu = if sys.rows.len() == sys.unknowns.len() {
        solve_square(&a_ru, &rhs)?
    } else if sys.rows.len() > sys.unknowns.len() {
        solve_normal(&a_ru, &rhs)?
    } else {
        return Err(Error::SingularReducedSystem(format!(
            "{} residual rows cannot determine {} free cells",
            sys.rows.len(),
            sys.unknowns.len()
        )));
    };
    let res = linalg::sub(&a_ru.apply(&xu)?, &rhs);
    let grad = a_ru.apply_adjoint(&res)?;
    for (&k, v) in sys.unknowns.iter().zip(&xu) {
        x[k] = *v;
    }
    debug_assert_eq!(x.len(), n);
    Ok((
        FieldState::new(x),
        FieldStepReport {
            residual: linalg::norm(&res),
            gradient_norm: linalg::norm(&grad),
            rhs_norm: linalg::norm(&rhs),
        },
    ))
}

fn solve_square(a: &SparseLinearOperator, rhs: &[C64]) -> Result<Vec<C64>> {
    let lu = BandedLu::factor(a).map_err(|e| match e {
        Error::SingularSystem(m) => Error::SingularReducedSystem(m),
        other => other,
    })?;
    let mut x = lu.solve(rhs)?;
    for _ in 0..2 {
        let r = linalg::sub(rhs, &a.apply(&x)?);
        let dx = lu.solve(&r)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    Ok(x)
}

/// Least squares through the normal equations, assembled straight into a
/// banded Cholesky factor, with two steps of iterative refinement.
fn solve_normal(a: &SparseLinearOperator, rhs: &[C64]) -> Result<Vec<C64>> {
    let n = a.cols();
    let mut bw = 0;
    for r in 0..a.rows() {
        let cols: Vec<usize> = a.row(r).map(|(c, _)| c).collect();
        if let (Some(lo), Some(hi)) = (cols.iter().min(), cols.iter().max()) {
            bw = bw.max(hi - lo);
        }
    }
    let mut chol = BandedCholesky::new(n, bw);
    for r in 0..a.rows() {
        let entries: Vec<(usize, C64)> = a.row(r).collect();
        for &(c1, v1) in &entries {
            for &(c2, v2) in &entries {
                if c1 >= c2 {
                    chol.add_lower(c1, c2, v1.conj() * v2);
                }
            }
        }
    }
    let chol = chol.factor().map_err(|e| match e {
        Error::SingularSystem(m) => Error::SingularReducedSystem(m),
        other => other,
    })?;
    let mut x = chol.solve(&a.apply_adjoint(rhs)?)?;
    for _ in 0..2 {
        let r = linalg::sub(rhs, &a.apply(&x)?);
        let dx = chol.solve(&a.apply_adjoint(&r)?)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureStepReport {
    /// Box-local residual norm before and after the step (all objectives).
    pub residual_before: f64,
    pub residual_after: f64,
    pub projected_gradient: f64,
    /// Norm of the stacked `d(x)` over the kept rows.
    pub rhs_norm: f64,
    pub iterations: usize,
    /// False if the iteration cap was hit before the stationarity tolerance.
    pub converged: bool,
}

/// One objective's field together with what is needed to form `B(x)`.
pub struct FieldTerm<'a> {
    pub ops: &'a GridOperators,
    pub objective: &'a DesignObjective,
    pub system: &'a BoxSystem,
    pub field: &'a FieldState,
}

/// Minimize `Σ_k ‖B(x_k) p − d(x_k)‖²` over the design cells within bounds,
/// starting from the current structure. Frozen cells are never touched.
pub fn structure_subproblem(terms: &[FieldTerm<'_>], s: &Structure, settings: &BoxLsqSettings) -> Result<(Structure, StructureStepReport)> {
    let vary = s.vary_indices();
    let mut blocks = Vec::with_capacity(terms.len());
    for t in terms {
        s.check_grid(&t.ops.grid)?;
        let full = assemble_b_full(t.ops, t.field, &t.objective.source)?.select_rows(&t.system.rows);
        let frozen_p: Vec<C64> = s
            .p
            .iter()
            .zip(&s.vary_mask)
            .map(|(&v, &m)| C64::new(if m { 0.0 } else { v }, 0.0))
            .collect();
        let frozen_term = full.apply(&frozen_p)?;
        let w2 = t.ops.grid.omega().powi(2);
        let rhs: Vec<C64> = t
            .system
            .rows
            .iter()
            .zip(&frozen_term)
            .map(|(&k, f)| t.field.x[k] * w2 - f)
            .collect();
        blocks.push((full.select_cols(&vary), rhs));
    }
    let d_norm = terms
        .iter()
        .map(|t| {
            let w2 = t.ops.grid.omega().powi(2);
            t.system.rows.iter().map(|&k| (t.field.x[k] * w2).norm_sqr()).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt();
    let system = StackedSystem::new(vary.len(), blocks)?;
    let p0: Vec<f64> = vary.iter().map(|&k| s.p[k]).collect();
    let res = minimize(&system, &p0, s.p_lo, s.p_hi, settings.tolerance * d_norm, settings.max_iterations)?;
    let mut out = s.clone();
    for (&k, &v) in vary.iter().zip(&res.p) {
        out.p[k] = v;
    }
    if !res.converged {
        log::warn!(
            "structure step stopped after {} iterations with projected gradient {:.3e}",
            res.iterations,
            res.projected_gradient
        );
    }
    Ok((
        out,
        StructureStepReport {
            residual_before: res.initial_objective.sqrt(),
            residual_after: res.objective.sqrt(),
            projected_gradient: res.projected_gradient,
            rhs_norm: d_norm,
            iterations: res.iterations,
            converged: res.converged,
        },
    ))
}

/// Global phase `φ` that, applied to the pinned cells flagged in `group`,
/// minimizes the field-step residual for structure `s`.
///
/// The reduced field solution is linear in the pinned data, so the residual
/// is `r_a + e^{iφ} r_b` and the optimum is `φ = π − arg⟨r_a, r_b⟩`.
pub fn best_group_phase(ops: &GridOperators, s: &Structure, obj: &DesignObjective, group: &[bool]) -> Result<f64> {
    if group.len() != obj.grid.n_cells() {
        return Err(Error::DimensionMismatch(format!(
            "group mask has {} cells, grid has {}",
            group.len(),
            obj.grid.n_cells()
        )));
    }
    let split = |keep: bool| -> DesignObjective {
        let mut o = obj.clone();
        for (k, v) in o.pinned_indices.iter().zip(o.pinned_values.iter_mut()) {
            if group[*k] != keep {
                *v = C64::default();
            }
        }
        o
    };
    let (rest, grp) = (split(false), split(true));
    let sys = BoxSystem::new(obj);
    let (xa, _) = field_subproblem_with(ops, s, &rest, &sys)?;
    let mut no_source = grp.clone();
    no_source.source = crate::physics::SourceSpec::zero(&obj.grid);
    let (xb, _) = field_subproblem_with(ops, s, &no_source, &sys)?;
    let ra = box_residual(ops, s, &rest, &sys, &xa)?;
    let rb = box_residual(ops, s, &no_source, &sys, &xb)?;
    let cross = linalg::dot(&ra, &rb);
    Ok(if cross.norm() == 0.0 { 0.0 } else { std::f64::consts::PI - cross.arg() })
}

impl DesignObjective {
    /// Multiply the pinned values of the cells flagged in `group` by `e^{iφ}`.
    pub fn rotate_group(&mut self, group: &[bool], phase: f64) {
        let rot = C64::from_polar(1.0, phase);
        for (k, v) in self.pinned_indices.iter().zip(self.pinned_values.iter_mut()) {
            if group[*k] {
                *v *= rot;
            }
        }
    }
}
