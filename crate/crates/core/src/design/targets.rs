//! Analytic target rows for free-space mimics: focusing beams and
//! sub-wavelength masks, plus the discrete angular-spectrum propagator that
//! carries a row through homogeneous, y-periodic space.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Exact column-to-column propagation of a y-periodic row through a
/// homogeneous medium on the grid's 5-point stencil.
pub struct AngularSpectrum {
    /// Per-column factor for each transverse harmonic: unit modulus when it
    /// propagates, real and below one when it decays.
    factors: Vec<C64>,
    propagating: Vec<bool>,
    /// Longitudinal wavenumber per harmonic; zero for evanescent ones.
    kx: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AngularSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AngularSpectrum").field("ny", &self.factors.len()).finish()
    }
}

/// Transverse wavenumber of harmonic `m` on a periodic row of `ny` cells.
pub fn harmonic_ky(m: usize, ny: usize) -> f64 {
    let m = if 2 * m > ny { m as f64 - ny as f64 } else { m as f64 };
    2.0 * PI * m / ny as f64
}

impl AngularSpectrum {
    pub fn new(ny: usize, omega: f64, eps: f64) -> Result<Self> {
        if ny == 0 || !(omega > 0.0) || !(eps > 0.0) {
            return Err(Error::Config(format!(
                "angular spectrum needs ny > 0, omega > 0 and eps > 0 (got {ny}, {omega}, {eps})"
            )));
        }
        let mut factors = Vec::with_capacity(ny);
        let mut kx = Vec::with_capacity(ny);
        let mut propagating = Vec::with_capacity(ny);
        for m in 0..ny {
            let s = (harmonic_ky(m, ny) / 2.0).sin();
            // z + 1/z = 2 + 4 sin²(ky/2) - ω² ε
            let c = 1.0 + 2.0 * s * s - 0.5 * omega * omega * eps;
            propagating.push(c.abs() <= 1.0);
            if c.abs() <= 1.0 {
                let k = c.acos();
                kx.push(k);
                factors.push(C64::from_polar(1.0, k));
            } else {
                kx.push(0.0);
                let z = c - c.signum() * (c * c - 1.0).sqrt();
                factors.push(C64::new(z, 0.0));
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            factors,
            propagating,
            kx,
            forward: planner.plan_fft_forward(ny),
            inverse: planner.plan_fft_inverse(ny),
        })
    }

    pub fn ny(&self) -> usize {
        self.factors.len()
    }

    pub fn is_propagating(&self, m: usize) -> bool {
        self.propagating[m]
    }

    /// Spectrum of `row`, normalized so that `inverse(spectrum(r)) == r`.
    pub fn spectrum(&self, row: &[C64]) -> Result<Vec<C64>> {
        self.check(row)?;
        let mut buf = row.to_vec();
        self.forward.process(&mut buf);
        let n = self.ny() as f64;
        buf.iter_mut().for_each(|v| *v /= n);
        Ok(buf)
    }

    pub fn inverse(&self, spectrum: &[C64]) -> Result<Vec<C64>> {
        self.check(spectrum)?;
        let mut buf = spectrum.to_vec();
        self.inverse.process(&mut buf);
        Ok(buf)
    }

    /// Move an outgoing (+x) row by `columns` cells; negative values go back
    /// towards the source, growing the evanescent part.
    pub fn propagate(&self, row: &[C64], columns: i32) -> Result<Vec<C64>> {
        let mut a = self.spectrum(row)?;
        for (v, z) in a.iter_mut().zip(&self.factors) {
            *v *= z.powi(columns);
        }
        self.inverse(&a)
    }

    /// Propagating part of `row` moved by `columns` cells. Unlike
    /// `propagate`, safe for long backward moves.
    pub fn propagate_far_field(&self, row: &[C64], columns: i32) -> Result<Vec<C64>> {
        let mut a = self.spectrum(row)?;
        for (m, v) in a.iter_mut().enumerate() {
            *v = if self.propagating[m] {
                *v * self.factors[m].powi(columns)
            } else {
                C64::default()
            };
        }
        self.inverse(&a)
    }

    /// `row` with its evanescent harmonics removed.
    pub fn propagating_part(&self, row: &[C64]) -> Result<Vec<C64>> {
        self.propagate_far_field(row, 0)
    }

    /// Power carried in +x by an outgoing row, in the units where a uniform
    /// row of amplitude `a` carries `ny sin(β) |a|²`.
    pub fn power(&self, row: &[C64]) -> Result<f64> {
        let a = self.spectrum(row)?;
        let n = self.ny() as f64;
        Ok(a.iter().zip(&self.kx).map(|(v, k)| n * k.sin() * v.norm_sqr()).sum())
    }

    fn check(&self, row: &[C64]) -> Result<()> {
        if row.len() != self.ny() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} entries, propagator expects {}",
                row.len(),
                self.ny()
            )));
        }
        Ok(())
    }
}

/// Gaussian row centred at `center` whose intensity has full width at half
/// maximum `fwhm` (cells).
pub fn gaussian_row(ny: usize, center: f64, fwhm: f64) -> Vec<C64> {
    // amplitude exp(-y²/(4σ²)) gives intensity exp(-y²/(2σ²))
    let sigma = fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
    (0..ny)
        .map(|j| {
            let y = j as f64 - center;
            C64::new((-y * y / (4.0 * sigma * sigma)).exp(), 0.0)
        })
        .collect()
}

/// Sub-cell position and log-intensity curvature of a local maximum at `j`,
/// from a parabola through the log-intensity at `j-1, j, j+1` (periodic).
fn refine_peak(intensity: &[f64], j: usize) -> Option<(f64, f64)> {
    let n = intensity.len();
    let l = intensity[(j + n - 1) % n].ln();
    let c = intensity[j].ln();
    let r = intensity[(j + 1) % n].ln();
    let curv = l - 2.0 * c + r;
    if !(curv < 0.0) || !curv.is_finite() {
        return None;
    }
    Some((j as f64 + 0.5 * (l - r) / curv, curv))
}

/// Intensity FWHM of the strongest peak in `row`, in cells, from a Gaussian
/// fit through its three highest samples. Exact for Gaussian rows.
pub fn measure_fwhm(row: &[C64]) -> Option<f64> {
    let intensity: Vec<f64> = row.iter().map(|v| v.norm_sqr()).collect();
    let j = (0..intensity.len()).max_by(|&a, &b| intensity[a].total_cmp(&intensity[b]))?;
    let (_, curv) = refine_peak(&intensity, j)?;
    // ln I = const - y²/(2σ²), so the second difference is -1/σ²
    let sigma = (-1.0 / curv).sqrt();
    Some(2.0 * (2.0 * 2f64.ln()).sqrt() * sigma)
}

/// Sub-cell positions of the intensity maxima of `row` that reach at least
/// `rel_height` of the largest one, in increasing order.
pub fn find_peaks(row: &[C64], rel_height: f64) -> Vec<f64> {
    let intensity: Vec<f64> = row.iter().map(|v| v.norm_sqr()).collect();
    let n = intensity.len();
    let top = intensity.iter().cloned().fold(0.0, f64::max);
    if n < 3 || top == 0.0 {
        return Vec::new();
    }
    (0..n)
        .filter(|&j| {
            let v = intensity[j];
            v >= rel_height * top && v > intensity[(j + n - 1) % n] && v >= intensity[(j + 1) % n]
        })
        .filter_map(|j| refine_peak(&intensity, j).map(|(y, _)| y))
        .collect()
}

/// A focusing beam: the row it must have on the measurement plane and the
/// spot it forms `focal_distance` columns further on.
#[derive(Debug, Clone, PartialEq)]
pub struct LensTarget {
    pub focal_row: Vec<C64>,
    pub plane_row: Vec<C64>,
    pub focal_distance: usize,
}

/// Lens target in vacuum: a Gaussian focus of intensity FWHM `fwhm` centred
/// on the row, traced back `focal_distance` columns with its evanescent part
/// dropped.
pub fn lens_target(ny: usize, omega: f64, fwhm: f64, focal_distance: usize) -> Result<LensTarget> {
    if !(fwhm > 0.0) {
        return Err(Error::Config(format!("focus width must be positive, got {fwhm}")));
    }
    let prop = AngularSpectrum::new(ny, omega, 1.0)?;
    let focal_row = gaussian_row(ny, (ny as f64 - 1.0) / 2.0, fwhm);
    let plane_row = prop.propagate_far_field(&focal_row, -(focal_distance as i32))?;
    Ok(LensTarget {
        focal_row,
        plane_row,
        focal_distance,
    })
}

/// Mask target: three Gaussian spots of intensity FWHM `spot_fwhm` spaced
/// `separation` cells apart about the row centre.
pub fn mask_target(ny: usize, separation: f64, spot_fwhm: f64) -> Vec<C64> {
    let c = (ny as f64 - 1.0) / 2.0;
    let mut row = vec![C64::default(); ny];
    for centre in [c - separation, c, c + separation] {
        for (v, g) in row.iter_mut().zip(gaussian_row(ny, centre, spot_fwhm)) {
            *v += g;
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn propagator_matches_stencil() {
        // an outgoing row propagated one and two columns satisfies the vacuum
        // 5-point equation at the middle column
        let (ny, omega) = (32, 2.0 * PI / 21.0);
        let p = AngularSpectrum::new(ny, omega, 1.0).unwrap();
        let row: Vec<C64> = (0..ny).map(|j| C64::new((j as f64 * 0.7).sin(), (j as f64 * 0.3).cos())).collect();
        let r1 = p.propagate(&row, 1).unwrap();
        let r2 = p.propagate(&row, 2).unwrap();
        for j in 0..ny {
            let (u, d) = ((j + 1) % ny, (j + ny - 1) % ny);
            let lap = row[j] + r2[j] + r1[u] + r1[d] - r1[j] * 4.0;
            assert!((lap + r1[j] * omega * omega).norm() < 1e-12);
        }
        let back = p.propagate(&r2, -2).unwrap();
        for (a, b) in back.iter().zip(&row) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn plane_wave_power_matches_unit_convention() {
        let (ny, omega) = (20, 2.0 * PI / 25.0);
        let p = AngularSpectrum::new(ny, omega, 1.0).unwrap();
        let beta = 2.0 * (omega / 2.0).asin();
        let row = vec![C64::new(0.0, 2.0); ny];
        assert_relative_eq!(p.power(&row).unwrap(), ny as f64 * beta.sin() * 4.0, max_relative = 1e-12);
    }

    #[test]
    fn lens_focus_widths_are_exact() {
        let lambda = 21.0;
        for fwhm in [1.5 * lambda, 0.5 * lambda] {
            let t = lens_target(100, 2.0 * PI / lambda, fwhm, 30).unwrap();
            assert_relative_eq!(measure_fwhm(&t.focal_row).unwrap(), fwhm, max_relative = 1e-9);
        }
    }

    #[test]
    fn traced_lens_refocuses() {
        // a wide focus survives losing its evanescent part; a half-wavelength
        // one is diffraction-limited and comes back somewhat wider
        let lambda = 21.0;
        let p = AngularSpectrum::new(200, 2.0 * PI / lambda, 1.0).unwrap();
        for (fwhm, slack) in [(1.5 * lambda, 0.01), (0.5 * lambda, 0.3)] {
            let t = lens_target(200, 2.0 * PI / lambda, fwhm, 30).unwrap();
            let w = measure_fwhm(&p.propagate(&t.plane_row, 30).unwrap()).unwrap();
            assert!(w >= fwhm * (1.0 - 1e-3) && w <= fwhm * (1.0 + slack), "{w}");
        }
    }

    #[test]
    fn mask_peaks_are_spaced() {
        let lambda = 21.0;
        let row = mask_target(60, 0.28 * lambda, 0.1 * lambda);
        let peaks = find_peaks(&row, 0.5);
        assert_eq!(peaks.len(), 3);
        for w in peaks.windows(2) {
            assert_relative_eq!(w[1] - w[0], 0.28 * lambda, max_relative = 1e-3);
        }
    }
}
