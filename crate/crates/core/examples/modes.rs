//! Guided modes of a silicon slab: propagation constants and parity.

use std::f64::consts::PI;

use wavefirst::fdfd::slice_modes;

fn main() -> wavefirst::Result<()> {
    let (height, core) = (60, 9);
    let lo = (height - core) / 2;
    let slice: Vec<f64> = (0..height).map(|j| if (lo..lo + core).contains(&j) { 12.25 } else { 1.0 }).collect();
    let omega = 2.0 * PI / 25.0;
    println!("mode  beta      n_eff   sign changes");
    for m in slice_modes(&slice, omega, false)? {
        let re: Vec<f64> = m.profile.iter().map(|v| v.re).filter(|v| v.abs() > 1e-3).collect();
        let changes = re.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        // invert the grid dispersion to get an effective index
        let n_eff = 2.0 * (m.beta / 2.0).sin() / omega;
        println!("{:<4}  {:.6}  {:.4}  {}", m.mode_index, m.beta, n_eff, changes);
    }
    Ok(())
}
