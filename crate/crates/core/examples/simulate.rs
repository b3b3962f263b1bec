//! Forward simulation: launch the fundamental mode down a straight silicon
//! guide and measure what arrives and what reflects.

use wavefirst::fdfd::{mode_source, simulate, solve_waveguide_mode, Direction, Port};
use wavefirst::grid::{Boundary, GridOperators, GridSpec, PmlParams};
use wavefirst::metrics::{coupling_efficiency, modal_amplitudes, Plane};
use wavefirst::physics::Structure;

fn main() -> wavefirst::Result<()> {
    let (nx, ny, width) = (80, 50, 6);
    let pml = Boundary::Absorbing(PmlParams::default());
    let grid = GridSpec::new(nx, ny, 21.0, pml, pml)?;
    let lo = (ny - width) / 2;
    let slice: Vec<f64> = (0..ny).map(|j| if (lo..lo + width).contains(&j) { 12.25 } else { 1.0 }).collect();
    let eps: Vec<f64> = (0..nx).flat_map(|_| slice.iter().copied()).collect();

    let ops = GridOperators::new(&grid)?;
    let mode = solve_waveguide_mode(&slice, grid.omega(), 0)?;
    let src = mode_source(&grid, &mode, Port::new(14), Direction::Forward)?;
    let (x, report) = simulate(&ops, &Structure::from_eps(&eps)?, &src)?;
    println!("solve: relative residual {:.2e}", report.relative_residual);

    let input = modal_amplitudes(&grid, &x, &mode, Plane::new(20))?;
    let out = coupling_efficiency(&grid, &x, &mode, Plane::new(60), input.forward_power())?;
    let back = modal_amplitudes(&grid, &x, &mode, Plane::new(60))?.backward_power();
    println!("transmitted {:.6}", out.efficiency);
    println!("reflected from the far PML {:.2e}", back / input.forward_power());
    Ok(())
}
