use super::{SparseLinearOperator, C64};
use crate::error::{Error, Result};

/// LU factorization with partial pivoting of a square banded matrix.
///
/// Storage follows the LAPACK `gbtrf` layout: each row keeps `kl` extra
/// columns to the right of its upper band for the fill created by row swaps.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<C64>,
    multipliers: Vec<C64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseLinearOperator) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch(format!(
                "LU of a non-square {}x{} operator",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![C64::default(); n * width],
            multipliers: vec![C64::default(); n * kl],
            pivots: vec![0; n],
        };
        for (r, c, v) in a.triplets() {
            let k = lu.offset(r, c);
            lu.band[k] += v;
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        lu.eliminate(scale)?;
        Ok(lu)
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    fn eliminate(&mut self, scale: f64) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku + kl).min(n - 1);

            let mut piv = k;
            let mut best = self.band[self.offset(k, k)].norm();
            for r in k + 1..=last_row {
                let m = self.band[self.offset(r, k)].norm();
                if m > best {
                    best = m;
                    piv = r;
                }
            }
            if best <= scale * 1e-300 || !best.is_finite() {
                return Err(Error::SingularSystem(format!("zero pivot at row {k}")));
            }
            self.pivots[k] = piv;
            if piv != k {
                for c in k..=last_col {
                    let a = self.offset(k, c);
                    let b = self.offset(piv, c);
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.offset(k, k)];
            for r in k + 1..=last_row {
                let idx = self.offset(r, k);
                let m = self.band[idx] / pivot;
                self.band[idx] = C64::default();
                self.multipliers[k * kl + (r - k - 1)] = m;
                if m == C64::default() {
                    continue;
                }
                for c in k + 1..=last_col {
                    let src = self.band[self.offset(k, c)];
                    let dst = self.offset(r, c);
                    self.band[dst] -= m * src;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for a system of size {}",
                rhs.len(),
                self.n
            )));
        }
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for r in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                x[r] -= self.multipliers[k * kl + (r - k - 1)] * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + ku + kl).min(n - 1) {
                s -= self.band[self.offset(i, c)] * x[c];
            }
            x[i] = s / self.band[self.offset(i, i)];
        }
        Ok(x)
    }
}

/// Cholesky factorization `A = L Lᴴ` of a Hermitian positive-definite banded
/// matrix, assembled entry by entry into its lower band.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<C64>,
    factored: bool,
}

impl BandedCholesky {
    /// Empty `n x n` matrix with lower bandwidth `bw`.
    pub fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![C64::default(); n * (bw + 1)],
            factored: false,
        }
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        r * (self.bw + 1) + (c + self.bw - r)
    }

    /// Accumulate `v` into the lower-triangle entry `(r, c)`, `r >= c`.
    pub fn add_lower(&mut self, r: usize, c: usize, v: C64) {
        debug_assert!(r >= c && r - c <= self.bw && !self.factored);
        let k = self.offset(r, c);
        self.band[k] += v;
    }

    pub fn factor(mut self) -> Result<Self> {
        let (n, bw) = (self.n, self.bw);
        let max_diag = (0..n)
            .map(|i| self.band[self.offset(i, i)].re.abs())
            .fold(0.0, f64::max);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = self.band[self.offset(i, j)];
                let kmin = lo.max(j.saturating_sub(bw));
                for k in kmin..j {
                    s -= self.band[self.offset(i, k)] * self.band[self.offset(j, k)].conj();
                }
                if j == i {
                    if !(s.re > max_diag * 1e-15) || !s.re.is_finite() {
                        return Err(Error::SingularSystem(format!(
                            "normal matrix not positive definite at row {i}"
                        )));
                    }
                    let k = self.offset(i, i);
                    self.band[k] = C64::new(s.re.sqrt(), 0.0);
                } else {
                    let d = self.band[self.offset(j, j)].re;
                    let k = self.offset(i, j);
                    self.band[k] = s / d;
                }
            }
        }
        self.factored = true;
        Ok(self)
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        assert!(self.factored, "solve called before factor");
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for a system of size {}",
                rhs.len(),
                self.n
            )));
        }
        let (n, bw) = (self.n, self.bw);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.band[self.offset(i, k)] * y[k];
            }
            y[i] = s / self.band[self.offset(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for r in i + 1..=(i + bw).min(n - 1) {
                s -= self.band[self.offset(r, i)].conj() * y[r];
            }
            y[i] = s / self.band[self.offset(i, i)].re;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, periodic_corner: bool) -> SparseLinearOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(2.5, 0.3 * i as f64)));
            if i + 1 < n {
                t.push((i, i + 1, C64::new(-1.0, 0.2)));
                t.push((i + 1, i, C64::new(-0.7, 0.0)));
            }
        }
        if periodic_corner {
            t.push((0, n - 1, C64::new(0.5, 0.5)));
        }
        SparseLinearOperator::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn lu_solves_banded_system() {
        for &corner in &[false, true] {
            let a = tridiag(9, corner);
            let x_true: Vec<C64> = (0..9).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
            let b = a.apply(&x_true).unwrap();
            let x = BandedLu::factor(&a).unwrap().solve(&b).unwrap();
            for (u, v) in x.iter().zip(&x_true) {
                assert!((u - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lu_needs_pivoting() {
        // Zero leading diagonal forces a row swap.
        let a = SparseLinearOperator::from_triplets(
            3,
            3,
            [
                (0, 1, C64::new(1.0, 0.0)),
                (1, 0, C64::new(2.0, 0.0)),
                (1, 1, C64::new(1.0, 0.0)),
                (1, 2, C64::new(1.0, 0.0)),
                (2, 1, C64::new(3.0, 0.0)),
                (2, 2, C64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        let x_true = vec![C64::new(1.0, 0.0), C64::new(-2.0, 1.0), C64::new(0.5, 0.0)];
        let b = a.apply(&x_true).unwrap();
        let x = BandedLu::factor(&a).unwrap().solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-13);
        }
    }

    #[test]
    fn lu_reports_singular() {
        let a = SparseLinearOperator::from_triplets(2, 2, [(0, 0, C64::new(1.0, 0.0))]).unwrap();
        assert!(matches!(BandedLu::factor(&a), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn cholesky_matches_normal_equations() {
        let a = tridiag(7, false);
        let n = 7;
        let mut ch = BandedCholesky::new(n, 2);
        for r in 0..n {
            let row: Vec<_> = a.row(r).collect();
            for &(ci, vi) in &row {
                for &(cj, vj) in &row {
                    if ci >= cj {
                        ch.add_lower(ci, cj, vi.conj() * vj);
                    }
                }
            }
        }
        let ch = ch.factor().unwrap();
        let x_true: Vec<C64> = (0..n).map(|i| C64::new(1.0 + i as f64, -0.5)).collect();
        let b = a.apply_adjoint(&a.apply(&x_true).unwrap()).unwrap();
        let x = ch.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-11);
        }
    }
}
