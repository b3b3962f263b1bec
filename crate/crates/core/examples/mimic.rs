//! Reproduce, with ordinary dielectric, the field a plasmonic cylinder
//! leaves behind it.

use wavefirst::design::alternating_directions;
use wavefirst::devices::{MimicInput, MimicSpec};

fn main() -> wavefirst::Result<()> {
    for input in [MimicInput::Total, MimicInput::Incident] {
        let device = MimicSpec {
            input,
            ..MimicSpec::default()
        }
        .build()?;
        let out = alternating_directions(&device.problem(400)?)?;
        let eval = &device.evaluate(&out.structure)?[0];
        let err = eval.error.as_ref().map_or(f64::NAN, |e| e.relative_error);
        println!("input layers pinned to the {input:?} field: relative error {:.2}%", 100.0 * err);
    }
    Ok(())
}
