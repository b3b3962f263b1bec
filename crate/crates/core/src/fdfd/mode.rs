//! Guided modes of a 1D transverse slice.
//!
//! For a structure uniform along x, `H_z = h(y) e^{iβx}` solves the 2D
//! operator exactly when
//!
//! ```text
//! (ω² I − T) h = κ P h,    κ = 4 sin²(β/2)
//! ```
//!
//! where `T` is the transverse curl-curl with edge-averaged `p` (the same
//! stencil the 2D operator uses along y) and `P = diag(p)`. Modes are
//! orthogonal in the `P`-weighted inner product.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    /// Unit-L2-norm `H_z` profile across the slice.
    pub profile: Vec<C64>,
    /// Propagation constant, radians per grid cell.
    pub beta: f64,
    pub mode_index: usize,
    pub slice_eps: Vec<f64>,
}

impl ModeProfile {
    /// `P`-weighted overlap `Σ p_j h_j v_j` with a field slice.
    pub fn overlap(&self, slice: &[C64]) -> C64 {
        self.profile
            .iter()
            .zip(slice)
            .zip(&self.slice_eps)
            .map(|((h, v), e)| h.conj() * v / *e)
            .sum()
    }

    /// `Σ p_j |h_j|²`.
    pub fn weight(&self) -> f64 {
        self.profile
            .iter()
            .zip(&self.slice_eps)
            .map(|(h, e)| h.norm_sqr() / e)
            .sum()
    }

    /// Power carried along +x by unit modal amplitude, `sin β Σ p_j |h_j|²`.
    pub fn power(&self) -> f64 {
        self.beta.sin() * self.weight()
    }

    /// `κ = 4 sin²(β/2)`.
    pub fn kappa(&self) -> f64 {
        4.0 * (self.beta / 2.0).sin().powi(2)
    }
}

fn transverse_operator(p: &[f64], periodic: bool) -> DMatrix<f64> {
    let n = p.len();
    let mut t = DMatrix::<f64>::zeros(n, n);
    let mut couple = |a: usize, b: usize| {
        let pe = 0.5 * (p[a] + p[b]);
        t[(a, a)] += pe;
        t[(b, b)] += pe;
        t[(a, b)] -= pe;
        t[(b, a)] -= pe;
    };
    for j in 0..n - 1 {
        couple(j, j + 1);
    }
    if periodic && n > 2 {
        couple(n - 1, 0);
    }
    t
}

/// All guided modes of a slice, ordered by decreasing `β`.
///
/// With `periodic` the slice wraps around (free-space plane-wave geometry);
/// otherwise its ends are electric walls.
pub fn slice_modes(slice_eps: &[f64], omega: f64, periodic: bool) -> Result<Vec<ModeProfile>> {
    let n = slice_eps.len();
    if n < 2 {
        return Err(Error::DimensionMismatch(format!("slice of {n} cells")));
    }
    if slice_eps.iter().any(|e| !e.is_finite() || *e == 0.0) {
        return Err(Error::InvalidStructure("slice permittivity must be finite and nonzero".into()));
    }
    let p: Vec<f64> = slice_eps.iter().map(|e| 1.0 / e).collect();
    let w2 = omega * omega;
    let t = transverse_operator(&p, periodic);
    let eps_floor = slice_eps
        .iter()
        .copied()
        .filter(|e| *e > 0.0)
        .fold(f64::INFINITY, f64::min);
    let guided_min = w2 * eps_floor * (1.0 - 1e-9);

    let mut pairs: Vec<(f64, Vec<f64>)> = if p.iter().all(|v| *v > 0.0) {
        let sq: Vec<f64> = p.iter().map(|v| v.sqrt()).collect();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let base = if a == b { w2 } else { 0.0 } - t[(a, b)];
                k[(a, b)] = base / (sq[a] * sq[b]);
            }
        }
        let eig = k.symmetric_eigen();
        (0..n)
            .map(|m| {
                let y = eig.eigenvectors.column(m);
                let h: Vec<f64> = (0..n).map(|a| y[a] / sq[a]).collect();
                (eig.eigenvalues[m], h)
            })
            .collect()
    } else {
        indefinite_pairs(&t, &p, w2)?
    };

    pairs.retain(|(kappa, _)| *kappa >= guided_min && *kappa < 4.0);
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(mode_index, (kappa, h))| {
            let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            let peak = h
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            let sign = if peak < 0.0 { -1.0 } else { 1.0 };
            ModeProfile {
                profile: h.iter().map(|v| C64::new(sign * v / norm, 0.0)).collect(),
                beta: 2.0 * (kappa.sqrt() / 2.0).asin(),
                mode_index,
                slice_eps: slice_eps.to_vec(),
            }
        })
        .collect())
}

/// Slices containing negative-permittivity cells: eigenvalues of
/// `P⁻¹(ω² I − T)` from the real Schur form, vectors by inverse iteration.
fn indefinite_pairs(t: &DMatrix<f64>, p: &[f64], w2: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = p.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let base = if a == b { w2 } else { 0.0 } - t[(a, b)];
            k[(a, b)] = base / p[a];
        }
    }
    let scale = k.norm().max(1.0);
    let mut out = Vec::new();
    for ev in k.complex_eigenvalues().iter() {
        if ev.im.abs() > 1e-10 * scale || ev.re <= 0.0 {
            continue;
        }
        let shift = ev.re * (1.0 + 1e-12) + 1e-14 * scale;
        let shifted = &k - DMatrix::<f64>::identity(n, n) * shift;
        let lu = shifted.lu();
        let mut v = DVector::<f64>::from_element(n, 1.0);
        for _ in 0..4 {
            let Some(next) = lu.solve(&v) else { break };
            let nn = next.norm();
            if nn == 0.0 || !nn.is_finite() {
                break;
            }
            v = next / nn;
        }
        out.push((ev.re, v.iter().copied().collect()));
    }
    Ok(out)
}

/// Guided mode `mode_index` (0 = fundamental) of a slice bounded by walls.
pub fn solve_waveguide_mode(slice_eps: &[f64], omega: f64, mode_index: usize) -> Result<ModeProfile> {
    let modes = slice_modes(slice_eps, omega, false)?;
    let available = modes.len();
    modes
        .into_iter()
        .nth(mode_index)
        .ok_or(Error::NoSuchMode {
            requested: mode_index,
            available,
        })
}

/// Normally incident plane wave across a periodic grid, in a uniform medium
/// of permittivity `eps`.
pub fn plane_wave_profile(grid: &GridSpec, eps: f64) -> Result<ModeProfile> {
    if !grid.is_periodic_y() {
        return Err(Error::RequiresPeriodic("plane-wave profile".into()));
    }
    let half = grid.omega() * eps.sqrt() / 2.0;
    if !(eps > 0.0) || half >= 1.0 {
        return Err(Error::InvalidGrid(format!(
            "no propagating plane wave for eps = {eps} at wavelength {}",
            grid.wavelength
        )));
    }
    let amp = 1.0 / (grid.ny as f64).sqrt();
    Ok(ModeProfile {
        profile: vec![C64::new(amp, 0.0); grid.ny],
        beta: 2.0 * half.asin(),
        mode_index: 0,
        slice_eps: vec![eps; grid.ny],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use std::f64::consts::PI;

    fn slab(n: usize, lo: usize, width: usize, core: f64, clad: f64) -> Vec<f64> {
        (0..n)
            .map(|j| if j >= lo && j < lo + width { core } else { clad })
            .collect()
    }

    fn mode_equation_residual(m: &ModeProfile, omega: f64) -> f64 {
        let p: Vec<f64> = m.slice_eps.iter().map(|e| 1.0 / e).collect();
        let t = transverse_operator(&p, false);
        let n = p.len();
        let kappa = m.kappa();
        (0..n)
            .map(|a| {
                let th: C64 = (0..n).map(|b| m.profile[b] * t[(a, b)]).sum();
                (m.profile[a] * omega * omega - th - m.profile[a] * (kappa * p[a])).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn fundamental_is_even_and_satisfies_mode_equation() {
        let omega = 2.0 * PI / 25.0;
        let eps = slab(40, 16, 8, 12.25, 1.0);
        let m = solve_waveguide_mode(&eps, omega, 0).unwrap();
        for j in 0..40 {
            assert!((m.profile[j] - m.profile[39 - j]).norm() < 1e-9);
        }
        assert!(mode_equation_residual(&m, omega) < 1e-8);
        let norm: f64 = m.profile.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        let k = m.kappa();
        assert!(k > omega * omega && k < omega * omega * 12.25);
    }

    #[test]
    fn second_mode_is_odd_and_orthogonal() {
        let omega = 2.0 * PI / 25.0;
        let eps = slab(60, 22, 16, 12.25, 1.0);
        let modes = slice_modes(&eps, omega, false).unwrap();
        assert!(modes.len() >= 2);
        let m1 = &modes[1];
        for j in 0..60 {
            assert!((m1.profile[j] + m1.profile[59 - j]).norm() < 1e-9);
        }
        let sign_changes = m1
            .profile
            .windows(2)
            .filter(|w| w[0].re.abs() > 1e-6 && w[1].re.abs() > 1e-6 && w[0].re * w[1].re < 0.0)
            .count();
        assert_eq!(sign_changes, 1);
        assert!(modes[0].overlap(&m1.profile).norm() < 1e-8);
        for w in modes.windows(2) {
            assert!(w[0].beta > w[1].beta);
        }
    }

    #[test]
    fn missing_mode_is_reported() {
        let omega = 2.0 * PI / 25.0;
        let eps = slab(40, 18, 3, 2.25, 1.0);
        let err = solve_waveguide_mode(&eps, omega, 9).unwrap_err();
        assert!(matches!(err, Error::NoSuchMode { requested: 9, .. }));
    }

    #[test]
    fn vacuum_slice_matches_plane_wave_dispersion() {
        let omega = 2.0 * PI / 25.0;
        let m = solve_waveguide_mode(&[1.0; 30], omega, 0).unwrap();
        assert!((2.0 * (m.beta / 2.0).sin() - omega).abs() < 1e-10);
    }

    #[test]
    fn plane_wave_normalization() {
        let g = GridSpec::new(
            40,
            60,
            25.0,
            Boundary::Absorbing(crate::grid::PmlParams::default()),
            Boundary::Periodic,
        )
        .unwrap();
        let m = plane_wave_profile(&g, 1.0).unwrap();
        assert!(m.profile.iter().all(|v| (v.re - 1.0 / 60f64.sqrt()).abs() < 1e-15));
        assert!((2.0 * (m.beta / 2.0).sin() - g.omega()).abs() < 1e-14);
        let walls = GridSpec { boundary_y: Boundary::Wall, ..g };
        assert!(matches!(plane_wave_profile(&walls, 1.0), Err(Error::RequiresPeriodic(_))));
    }

    #[test]
    fn indefinite_path_agrees_on_dielectric_slab() {
        let omega = 2.0 * PI / 25.0;
        let eps = slab(40, 14, 12, 12.25, 1.0);
        let p: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
        let t = transverse_operator(&p, false);
        let mut general: Vec<f64> = indefinite_pairs(&t, &p, omega * omega)
            .unwrap()
            .into_iter()
            .map(|(k, _)| k)
            .filter(|k| *k >= omega * omega)
            .collect();
        general.sort_by(|a, b| b.total_cmp(a));
        let modes = slice_modes(&eps, omega, false).unwrap();
        assert_eq!(general.len(), modes.len());
        for (k, m) in general.iter().zip(&modes) {
            assert!((k - m.kappa()).abs() < 1e-10);
        }
    }
}
