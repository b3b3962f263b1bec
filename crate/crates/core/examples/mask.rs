//! Near-field mask: three spots 0.28 wavelengths apart, two cells past the
//! device. The spacing is finer than silicon can carry as a travelling wave,
//! so this one is hard.

use wavefirst::design::alternating_directions;
use wavefirst::design::targets::find_peaks;
use wavefirst::devices::{Evaluation, TargetSpec};

fn main() -> wavefirst::Result<()> {
    let spec = TargetSpec::mask();
    let device = spec.build()?;
    let g = device.grid;
    let Evaluation::FieldMatch { plane, target, .. } = &device.evaluations[0] else {
        unreachable!("target devices compare fields")
    };
    let out = alternating_directions(&device.problem(400)?)?;
    let eval = &device.evaluate(&out.structure)?[0];
    let row: Vec<_> = (0..g.ny).map(|j| eval.field.x[g.idx(plane.column, j)]).collect();

    let fmt = |p: Vec<f64>| p.iter().map(|y| format!("{:.2}", y / spec.wavelength)).collect::<Vec<_>>().join(", ");
    println!("target peaks at  [{}] wavelengths", fmt(find_peaks(target, 0.3)));
    println!("achieved peaks at [{}] wavelengths", fmt(find_peaks(&row, 0.3)));
    println!("relative error {:.3}", eval.error.as_ref().map_or(f64::NAN, |e| e.relative_error));
    Ok(())
}
