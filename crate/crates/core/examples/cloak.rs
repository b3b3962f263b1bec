//! Hide a plasmonic cylinder (eps = -2) from a plane wave.

use wavefirst::design::alternating_directions;
use wavefirst::devices::CloakSpec;

fn main() -> wavefirst::Result<()> {
    let device = CloakSpec::default().build()?;
    let bare = device.evaluate(&device.baseline()?)?[0].total_efficiency().unwrap_or(0.0);
    println!("uncloaked cylinder: {:.1}% of the light diverted", 100.0 * (1.0 - bare));

    let out = alternating_directions(&device.problem(400)?)?;
    let cloaked = device.evaluate(&out.structure)?[0].total_efficiency().unwrap_or(0.0);
    println!("cloaked: {:.2}% transmitted in the plane wave", 100.0 * cloaked);
    println!("structure steps that hit their cap: {}", out.trace.structure_warnings);
    Ok(())
}
