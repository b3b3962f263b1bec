//! Convert the fundamental mode of a silicon guide into its first odd mode.
//! A mirror-symmetric start cannot couple the two, so design starts from zero.

use wavefirst::design::alternating_directions;
use wavefirst::devices::CouplerSpec;

fn main() -> wavefirst::Result<()> {
    let device = CouplerSpec::mode_converter().build()?;
    let start = device.evaluate(&device.initial)?[0].total_efficiency().unwrap_or(0.0);
    println!("odd-mode efficiency of the uniform start: {start:.2e}");

    let out = alternating_directions(&device.problem(400)?)?;
    let end = device.evaluate(&out.structure)?[0].total_efficiency().unwrap_or(0.0);
    println!("designed converter: {end:.4}");
    Ok(())
}
