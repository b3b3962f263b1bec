//! Forward frequency-domain simulation: solve `A(p) x = b(p)` for the field.

mod mode;
mod source;

pub use mode::{plane_wave_profile, slice_modes, solve_waveguide_mode, ModeProfile};
pub use source::{mode_source, Direction, Port};

use crate::error::{Error, Result};
use crate::grid::GridOperators;
use crate::linalg::{self, BandedLu, SparseLinearOperator, C64};
use crate::physics::{assemble_a, assemble_b, FieldState, SourceSpec, Structure};

/// Relative residual a direct solve must reach.
pub const DIRECT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Banded LU with partial pivoting.
    Direct,
    /// Jacobi-preconditioned BiCGSTAB, for grids too large to factor.
    Iterative { max_iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub relative_residual: f64,
    pub method: SolveMethod,
    /// Refinement steps (direct) or Krylov iterations (iterative).
    pub iterations: usize,
}

/// A factored `A(p)` that can be reused for several sources.
pub struct FieldSolver<'a> {
    ops: &'a GridOperators,
    structure: Structure,
    a: SparseLinearOperator,
    lu: BandedLu,
}

impl<'a> FieldSolver<'a> {
    pub fn new(ops: &'a GridOperators, s: &Structure) -> Result<Self> {
        let a = assemble_a(ops, s)?;
        let lu = BandedLu::factor(&a)?;
        Ok(Self {
            ops,
            structure: s.clone(),
            a,
            lu,
        })
    }

    pub fn solve(&self, src: &SourceSpec) -> Result<(FieldState, SolveReport)> {
        let b = assemble_b(self.ops, &self.structure, src)?;
        let bn = linalg::norm(&b);
        if bn == 0.0 {
            return Ok((
                FieldState::zeros(b.len()),
                SolveReport {
                    relative_residual: 0.0,
                    method: SolveMethod::Direct,
                    iterations: 0,
                },
            ));
        }
        let mut x = self.lu.solve(&b)?;
        let mut r = linalg::sub(&b, &self.a.apply(&x)?);
        let mut rel = linalg::norm(&r) / bn;
        let mut steps = 0;
        while rel > DIRECT_TOLERANCE * 1e-2 && steps < 3 {
            let dx = self.lu.solve(&r)?;
            let candidate: Vec<C64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let r_new = linalg::sub(&b, &self.a.apply(&candidate)?);
            let rel_new = linalg::norm(&r_new) / bn;
            steps += 1;
            if rel_new >= rel {
                break;
            }
            x = candidate;
            r = r_new;
            rel = rel_new;
        }
        if !(rel <= DIRECT_TOLERANCE) {
            return Err(Error::SingularSystem(format!(
                "direct solve reached only {rel:.3e} relative residual"
            )));
        }
        Ok((
            FieldState::new(x),
            SolveReport {
                relative_residual: rel,
                method: SolveMethod::Direct,
                iterations: steps,
            },
        ))
    }
}

/// Frequency-domain simulation with a direct solve.
pub fn simulate(
    ops: &GridOperators,
    s: &Structure,
    src: &SourceSpec,
) -> Result<(FieldState, SolveReport)> {
    let b = assemble_b(ops, s, src)?;
    if b.iter().all(|v| *v == C64::default()) {
        return Ok((
            FieldState::zeros(ops.grid.n_cells()),
            SolveReport {
                relative_residual: 0.0,
                method: SolveMethod::Direct,
                iterations: 0,
            },
        ));
    }
    FieldSolver::new(ops, s)?.solve(src)
}

/// Simulation with an explicit solve method.
pub fn simulate_with(
    ops: &GridOperators,
    s: &Structure,
    src: &SourceSpec,
    method: SolveMethod,
    tolerance: f64,
) -> Result<(FieldState, SolveReport)> {
    match method {
        SolveMethod::Direct => simulate(ops, s, src),
        SolveMethod::Iterative { max_iterations } => {
            let a = assemble_a(ops, s)?;
            let b = assemble_b(ops, s, src)?;
            let (x, iterations, rel) = bicgstab(&a, &b, tolerance, max_iterations)?;
            Ok((
                FieldState::new(x),
                SolveReport {
                    relative_residual: rel,
                    method,
                    iterations,
                },
            ))
        }
    }
}

fn bicgstab(
    a: &SparseLinearOperator,
    b: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<C64>, usize, f64)> {
    let n = b.len();
    let bn = linalg::norm(b);
    if bn == 0.0 {
        return Ok((vec![C64::default(); n], 0, 0.0));
    }
    let inv_diag: Vec<C64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d.norm() > 0.0 {
                1.0 / d
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect();
    let precond = |v: &[C64]| -> Vec<C64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };
    let axpy = |y: &mut [C64], alpha: C64, x: &[C64]| {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    };

    let mut x = vec![C64::default(); n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho = C64::new(1.0, 0.0);
    let mut alpha = C64::new(1.0, 0.0);
    let mut omega = C64::new(1.0, 0.0);
    let mut v = vec![C64::default(); n];
    let mut p = vec![C64::default(); n];
    for it in 1..=max_iter {
        let rho_new = linalg::dot(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        let y = precond(&p);
        v = a.apply(&y)?;
        alpha = rho / linalg::dot(&r_hat, &v);
        let mut s = r.clone();
        axpy(&mut s, -alpha, &v);
        axpy(&mut x, alpha, &y);
        if linalg::norm(&s) / bn <= tol {
            return Ok((x, it, linalg::norm(&s) / bn));
        }
        let z = precond(&s);
        let t = a.apply(&z)?;
        let tt = linalg::dot(&t, &t);
        omega = if tt.norm() > 0.0 {
            linalg::dot(&t, &s) / tt
        } else {
            C64::default()
        };
        axpy(&mut x, omega, &z);
        r = s;
        axpy(&mut r, -omega, &t);
        let rel = linalg::norm(&r) / bn;
        if rel <= tol {
            return Ok((x, it, rel));
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    let rel = linalg::norm(&linalg::sub(b, &a.apply(&x)?)) / bn;
    Err(Error::NonConvergence(format!(
        "BiCGSTAB stopped at relative residual {rel:.3e} after {max_iter} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, GridSpec, PmlParams};
    use crate::metrics::{modal_amplitudes, Plane};

    fn guide(nx: usize, ny: usize, lambda: f64, width: usize) -> (GridOperators, Structure, Vec<f64>) {
        let pml = Boundary::Absorbing(PmlParams::default());
        let g = GridSpec::new(nx, ny, lambda, pml, pml).unwrap();
        let lo = (ny - width) / 2;
        let slice: Vec<f64> = (0..ny).map(|j| if j >= lo && j < lo + width { 12.25 } else { 1.0 }).collect();
        let eps: Vec<f64> = (0..nx).flat_map(|_| slice.clone()).collect();
        (GridOperators::new(&g).unwrap(), Structure::from_eps(&eps).unwrap(), slice)
    }

    #[test]
    fn two_line_source_is_unidirectional() {
        let (ops, s, slice) = guide(70, 50, 21.0, 6);
        let m = solve_waveguide_mode(&slice, ops.grid.omega(), 0).unwrap();
        for dir in [Direction::Forward, Direction::Backward] {
            let src = mode_source(&ops.grid, &m, Port::new(30), dir).unwrap();
            let (x, rep) = simulate(&ops, &s, &src).unwrap();
            assert!(rep.relative_residual <= DIRECT_TOLERANCE);
            let right = modal_amplitudes(&ops.grid, &x, &m, Plane::new(50)).unwrap();
            let left = modal_amplitudes(&ops.grid, &x, &m, Plane::new(15)).unwrap();
            let (fwd, back) = match dir {
                Direction::Forward => (right.forward_power(), left.backward_power()),
                Direction::Backward => (left.backward_power(), right.forward_power()),
            };
            assert!(back <= 0.02 * fwd);
        }
    }
}
