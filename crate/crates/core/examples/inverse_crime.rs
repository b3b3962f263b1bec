//! The structure step alone: simulate a known structure, hand its field to
//! the structure sub-problem, and recover the permittivity from a bad guess.

use wavefirst::design::{structure_subproblem, BoxLsqSettings, BoxSystem, DesignBox, DesignObjective, FieldTerm};
use wavefirst::fdfd::{mode_source, plane_wave_profile, simulate, Direction, Port};
use wavefirst::grid::{Boundary, GridOperators, GridSpec, PmlParams};
use wavefirst::physics::Structure;

fn main() -> wavefirst::Result<()> {
    let grid = GridSpec::new(40, 24, 21.0, Boundary::Absorbing(PmlParams::default()), Boundary::Periodic)?;
    let ops = GridOperators::new(&grid)?;
    let (p_lo, p_hi) = (1.0 / 12.25, 1.0);
    let b = DesignBox::new(14, 0, 12, 24);
    let vary: Vec<bool> = (0..grid.n_cells()).map(|k| b.contains(grid.coords(k).0, grid.coords(k).1)).collect();

    // a smooth interior-feasible structure
    let truth: Vec<f64> = (0..grid.n_cells())
        .map(|k| {
            let (i, j) = grid.coords(k);
            if vary[k] {
                0.4 + 0.3 * ((i as f64 * 0.5).sin() * (j as f64 * 0.26).cos())
            } else {
                1.0
            }
        })
        .collect();
    let s_true = Structure::new(truth.clone(), p_lo, p_hi, vary.clone())?;
    let src = mode_source(&grid, &plane_wave_profile(&grid, 1.0)?, Port::new(12), Direction::Forward)?;
    let (x, _) = simulate(&ops, &s_true, &src)?;

    let guess: Vec<f64> = truth.iter().zip(&vary).map(|(&p, &v)| if v { 1.0 / 9.0 } else { p }).collect();
    let start = Structure::new(guess, p_lo, p_hi, vary.clone())?;
    let obj = DesignObjective::new(grid, DesignBox::whole(&grid), vec![], vec![], src)?;
    let sys = BoxSystem::new(&obj);
    let term = FieldTerm {
        ops: &ops,
        objective: &obj,
        system: &sys,
        field: &x,
    };
    // the default tolerance stops near 1e-6 relative; ask for more
    let settings = BoxLsqSettings {
        tolerance: 1e-12,
        ..BoxLsqSettings::default()
    };
    let (found, report) = structure_subproblem(&[term], &start, &settings)?;
    let err = found.p.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!(
        "residual {:.3e} -> {:.3e} in {} inner iterations",
        report.residual_before, report.residual_after, report.iterations
    );
    println!("largest error in recovered 1/eps: {err:.2e}");
    Ok(())
}
