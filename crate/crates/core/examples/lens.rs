//! Flat lens: turn a plane wave into a half-wavelength focus.

use wavefirst::design::alternating_directions;
use wavefirst::design::targets::{measure_fwhm, AngularSpectrum};
use wavefirst::devices::{Evaluation, TargetShape, TargetSpec};

fn main() -> wavefirst::Result<()> {
    let spec = TargetSpec::default();
    let device = spec.build()?;
    let g = device.grid;
    let out = alternating_directions(&device.problem(400)?)?;
    let eval = &device.evaluate(&out.structure)?[0];
    let Evaluation::FieldMatch { plane, .. } = &device.evaluations[0] else {
        unreachable!("target devices compare fields")
    };
    println!("relative error on the plane: {:.3}", eval.error.as_ref().map_or(f64::NAN, |e| e.relative_error));

    // carry the simulated row on to the focus and measure the spot
    let TargetShape::Lens { focal_distance, .. } = spec.target else { unreachable!() };
    let row: Vec<_> = (0..g.ny).map(|j| eval.field.x[g.idx(plane.column, j)]).collect();
    let prop = AngularSpectrum::new(g.ny, g.omega(), 1.0)?;
    let focus = prop.propagate_far_field(&row, (focal_distance * spec.wavelength).round() as i32)?;
    if let Some(w) = measure_fwhm(&focus) {
        println!("focal spot FWHM {:.3} wavelengths", w / spec.wavelength);
    }
    Ok(())
}
