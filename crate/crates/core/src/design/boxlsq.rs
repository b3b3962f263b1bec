//! Bound-constrained real least squares `min ‖B p − d‖²`, `lo ≤ p ≤ hi`,
//! with complex `B` and `d` and real `p`.
//!
//! Projected Newton-CG: each outer step takes a projected steepest-descent
//! (Cauchy) step with the exact quadratic step length, then a truncated CG
//! step on the variables strictly inside their bounds, followed by a
//! projected backtracking line search. Every accepted step strictly lowers
//! the objective, so the result is never worse than the start.

use crate::error::Result;
use crate::linalg::{SparseLinearOperator, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxLsqSettings {
    /// Stop once the projected gradient norm falls to this multiple of `‖d‖`.
    pub tolerance: f64,
    /// Cap on projection steps plus CG iterations.
    pub max_iterations: usize,
}

impl Default for BoxLsqSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxLsqResult {
    pub p: Vec<f64>,
    /// `‖B p − d‖²` at the returned point.
    pub objective: f64,
    pub initial_objective: f64,
    pub projected_gradient: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Stacked least-squares system `Σ_k ‖B_k p − d_k‖²`.
pub struct StackedSystem {
    blocks: Vec<(SparseLinearOperator, Vec<C64>)>,
    adjoints: Vec<SparseLinearOperator>,
    n: usize,
}

fn conj_transpose(b: &SparseLinearOperator) -> Result<SparseLinearOperator> {
    SparseLinearOperator::from_triplets(b.cols(), b.rows(), b.triplets().map(|(r, c, v)| (c, r, v.conj())))
}

impl StackedSystem {
    pub fn new(n: usize, blocks: Vec<(SparseLinearOperator, Vec<C64>)>) -> Result<Self> {
        for (b, d) in &blocks {
            if b.cols() != n || b.rows() != d.len() {
                return Err(crate::Error::DimensionMismatch(format!(
                    "block {}x{} with rhs {} for {n} unknowns",
                    b.rows(),
                    b.cols(),
                    d.len()
                )));
            }
        }
        let adjoints = blocks.iter().map(|(b, _)| conj_transpose(b)).collect::<Result<_>>()?;
        Ok(Self { blocks, adjoints, n })
    }

    pub fn unknowns(&self) -> usize {
        self.n
    }

    pub fn rhs_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(_, d)| d.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    fn apply(&self, p: &[f64]) -> Vec<Vec<C64>> {
        let pc: Vec<C64> = p.iter().map(|v| C64::new(*v, 0.0)).collect();
        self.blocks.iter().map(|(b, _)| b.apply(&pc).expect("sized at construction")).collect()
    }

    /// Residual blocks `B_k p − d_k` and the objective.
    fn residual(&self, p: &[f64]) -> (Vec<Vec<C64>>, f64) {
        let mut r = self.apply(p);
        let mut f = 0.0;
        for (rk, (_, d)) in r.iter_mut().zip(&self.blocks) {
            for (a, b) in rk.iter_mut().zip(d) {
                *a -= b;
                f += a.norm_sqr();
            }
        }
        (r, f)
    }

    pub fn objective(&self, p: &[f64]) -> f64 {
        self.residual(p).1
    }

    /// `2 Re Σ B_kᴴ r_k`.
    fn gradient(&self, r: &[Vec<C64>]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (adj, rk) in self.adjoints.iter().zip(r) {
            let v = adj.apply(rk).expect("sized at construction");
            for (gi, vi) in g.iter_mut().zip(&v) {
                *gi += 2.0 * vi.re;
            }
        }
        g
    }

    /// `2 Re Σ B_kᴴ B_k v`.
    fn hessian_apply(&self, v: &[f64]) -> Vec<f64> {
        self.gradient(&self.apply(v))
    }

    /// `‖B v‖²`.
    fn curvature(&self, v: &[f64]) -> f64 {
        self.apply(v).iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    fn hessian_diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.n];
        for (b, _) in &self.blocks {
            for (_, c, v) in b.triplets() {
                diag[c] += 2.0 * v.norm_sqr();
            }
        }
        diag
    }
}

fn projected_gradient(p: &[f64], g: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    p.iter()
        .zip(g)
        .map(|(&pi, &gi)| {
            if pi <= lo {
                gi.min(0.0)
            } else if pi >= hi {
                gi.max(0.0)
            } else {
                gi
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected Armijo search along `p + α s`, starting at `alpha`. Returns the
/// accepted point and its objective, or `None` if no decrease was found.
fn projected_search(
    sys: &StackedSystem,
    p: &[f64],
    f: f64,
    g: &[f64],
    s: &[f64],
    mut alpha: f64,
    lo: f64,
    hi: f64,
) -> Option<(Vec<f64>, f64)> {
    for _ in 0..40 {
        let trial: Vec<f64> = p.iter().zip(s).map(|(pi, si)| (pi + alpha * si).clamp(lo, hi)).collect();
        let step: Vec<f64> = trial.iter().zip(p).map(|(a, b)| a - b).collect();
        let decrease = dot(g, &step);
        if decrease < 0.0 {
            let ft = sys.objective(&trial);
            if ft <= f + 1e-4 * decrease && ft < f {
                return Some((trial, ft));
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Minimize `Σ‖B_k p − d_k‖²` over `lo ≤ p ≤ hi`, warm-started at `p0`.
pub fn solve_box_lsq(sys: &StackedSystem, p0: &[f64], lo: f64, hi: f64, settings: &BoxLsqSettings) -> Result<BoxLsqResult> {
    minimize(sys, p0, lo, hi, settings.tolerance * sys.rhs_norm(), settings.max_iterations)
}

/// As [`solve_box_lsq`] with an absolute projected-gradient tolerance.
pub(crate) fn minimize(sys: &StackedSystem, p0: &[f64], lo: f64, hi: f64, tol: f64, max_iterations: usize) -> Result<BoxLsqResult> {
    if p0.len() != sys.n {
        return Err(crate::Error::DimensionMismatch(format!(
            "start point of length {} for {} unknowns",
            p0.len(),
            sys.n
        )));
    }
    let diag = sys.hessian_diagonal();
    let mut p: Vec<f64> = p0.iter().map(|v| v.clamp(lo, hi)).collect();
    let (mut r, mut f) = sys.residual(&p);
    let initial_objective = f;
    let mut g = sys.gradient(&r);
    let mut pg_norm = norm(&projected_gradient(&p, &g, lo, hi));
    let g_scale = pg_norm.max(f64::MIN_POSITIVE);
    let mut iterations = 0;

    while pg_norm > tol && iterations < max_iterations {
        iterations += 1;
        let mut progressed = false;

        // projected steepest descent with the exact step for the quadratic
        let pg = projected_gradient(&p, &g, lo, hi);
        let curv = sys.curvature(&pg);
        let alpha = if curv > 0.0 { dot(&pg, &pg) / (2.0 * curv) } else { (hi - lo) / norm(&pg) };
        let dir: Vec<f64> = pg.iter().map(|v| -v).collect();
        if let Some((pn, _)) = projected_search(sys, &p, f, &g, &dir, alpha, lo, hi) {
            p = pn;
            progressed = true;
        }
        (r, f) = sys.residual(&p);
        g = sys.gradient(&r);

        // truncated Newton on the free variables
        let free: Vec<bool> = p.iter().map(|&v| v > lo && v < hi).collect();
        let g_free: Vec<f64> = g.iter().zip(&free).map(|(gi, &fr)| if fr { *gi } else { 0.0 }).collect();
        let gf_norm = norm(&g_free);
        if gf_norm > 0.0 {
            let budget = max_iterations.saturating_sub(iterations).max(1);
            let cg_tol = (0.1 * gf_norm).min((0.1 * tol).max(gf_norm * (gf_norm / g_scale).sqrt()));
            let (step, used) = cg_free(sys, &g_free, &free, &diag, cg_tol, budget.min(500));
            iterations += used;
            if let Some((pn, _)) = projected_search(sys, &p, f, &g, &step, 1.0, lo, hi) {
                p = pn;
                progressed = true;
                (r, f) = sys.residual(&p);
                g = sys.gradient(&r);
            }
        }
        pg_norm = norm(&projected_gradient(&p, &g, lo, hi));
        if !progressed {
            break;
        }
    }
    Ok(BoxLsqResult {
        p,
        objective: f,
        initial_objective,
        projected_gradient: pg_norm,
        iterations,
        converged: pg_norm <= tol,
    })
}

/// Jacobi-preconditioned CG for `H_FF s = −g_F`, zero outside the free set.
fn cg_free(sys: &StackedSystem, g: &[f64], free: &[bool], diag: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let n = g.len();
    let mask = |v: &mut Vec<f64>| {
        for (x, &fr) in v.iter_mut().zip(free) {
            if !fr {
                *x = 0.0;
            }
        }
    };
    let precond = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(diag)
            .zip(free)
            .map(|((x, d), &fr)| if fr && *d > 0.0 { x / d } else { 0.0 })
            .collect()
    };
    let mut s = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut z = precond(&r);
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    let mut used = 0;
    while used < max_iter && norm(&r) > tol {
        used += 1;
        let mut hd = sys.hessian_apply(&dir);
        mask(&mut hd);
        let curv = dot(&dir, &hd);
        if !(curv > 0.0) {
            break;
        }
        let a = rz / curv;
        for k in 0..n {
            s[k] += a * dir[k];
            r[k] -= a * hd[k];
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            dir[k] = z[k] + beta * dir[k];
        }
    }
    if used == 0 {
        // fall back to the preconditioned gradient
        return (z, 0);
    }
    (s, used)
}
