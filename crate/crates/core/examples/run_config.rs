//! Drive a run from a TOML config, as the CLI does, and list what it wrote.
//!
//! `cargo run --release --example run_config -- crates/core/examples/configs/coupler_small.toml /tmp/out`

use std::path::PathBuf;

use wavefirst::io::{read_metrics, run_design, RunConfig};

fn main() -> wavefirst::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| {
        concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/coupler_small.toml").to_string()
    }));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("wavefirst_run"));

    let cfg = RunConfig::read(&config)?;
    run_design(&cfg, &out, None)?;
    let mut files: Vec<_> = std::fs::read_dir(&out)?.filter_map(|e| e.ok()).map(|e| e.file_name()).collect();
    files.sort();
    println!("wrote {files:?} to {}", out.display());
    for (k, v) in read_metrics(&out.join("metrics.txt"))? {
        println!("  {k} = {v}");
    }
    Ok(())
}
