//! Design a coupler from a narrow silicon guide into a wide low-index guide.
//!
//! `cargo run --release --example coupler [iterations]`

use wavefirst::design::alternating_directions;
use wavefirst::devices::CouplerSpec;

fn main() -> wavefirst::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let device = CouplerSpec::default().build()?;
    let b = device.design_box;
    println!("grid {}x{}, design box {}x{}", device.grid.nx, device.grid.ny, b.width, b.height);

    let start = device.evaluate(&device.initial)?[0].total_efficiency().unwrap_or(0.0);
    let out = alternating_directions(&device.problem(iterations)?)?;
    let end = device.evaluate(&out.structure)?[0].total_efficiency().unwrap_or(0.0);

    println!("efficiency: {start:.4} at the uniform start, {end:.4} designed");
    println!(
        "physics residual {:.3e} -> {:.3e} over {} iterations",
        out.trace.records[0].residual_after_field_step,
        out.trace.final_residual().unwrap_or(f64::NAN),
        out.trace.records.len()
    );
    Ok(())
}
