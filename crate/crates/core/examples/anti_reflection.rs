//! Anti-reflection coating between air and silicon for a normally incident
//! plane wave.

use wavefirst::design::alternating_directions;
use wavefirst::devices::CloakSpec;

fn main() -> wavefirst::Result<()> {
    let device = CloakSpec::anti_reflection().build()?;
    let bare = device.evaluate(&device.baseline()?)?[0].total_efficiency().unwrap_or(0.0);
    println!("bare interface transmits {bare:.4}");

    let out = alternating_directions(&device.problem(400)?)?;
    let coated = device.evaluate(&out.structure)?[0].total_efficiency().unwrap_or(0.0);
    println!("coated interface transmits {coated:.6}");

    // print the coating's permittivity along the box centre row
    let g = device.grid;
    let b = device.design_box;
    let eps = out.structure.eps();
    let row: Vec<String> = (b.x0..b.x1()).map(|i| format!("{:.2}", eps[g.idx(i, g.ny / 2)])).collect();
    println!("eps across the box: {}", row.join(" "));
    Ok(())
}
