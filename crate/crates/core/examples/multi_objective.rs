//! One structure, two objectives: route 18- and 26-cell wavelengths from a
//! shared input guide into different output guides.

use wavefirst::design::alternating_directions;
use wavefirst::devices::CustomSpec;

fn main() -> wavefirst::Result<()> {
    let spec = CustomSpec::wavelength_splitter();
    let device = spec.build()?;
    let out = alternating_directions(&device.problem(400)?)?;
    for (o, e) in spec.objectives.iter().zip(device.evaluate(&out.structure)?) {
        println!(
            "wavelength {:>4}: {:.3} into its own output",
            o.wavelength,
            e.total_efficiency().unwrap_or(0.0)
        );
    }
    Ok(())
}
