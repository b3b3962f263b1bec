//! The three command runs. Each writes its outputs into one directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::design::{alternating_directions, ConvergenceTrace, DesignOutcome};
use crate::devices::{Device, Evaluated, Evaluation};
use crate::error::{Error, Result};
use crate::fdfd::{slice_modes, ModeProfile};
use crate::physics::Structure;

use super::config::RunConfig;
use super::gridfile::GridFile;
use super::{heatmap, write_atomic};

/// Process exit status for an error: 2 for bad input, 3 for a failed solve.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

#[derive(Debug)]
pub struct DesignRun {
    pub device: Device,
    pub outcome: DesignOutcome,
    pub evaluations: Vec<Evaluated>,
}

#[derive(Debug)]
pub struct SimulateRun {
    pub device: Device,
    pub structure: Structure,
    pub evaluations: Vec<Evaluated>,
}

#[derive(Debug)]
pub struct ModesRun {
    pub omega: f64,
    pub modes: Vec<ModeProfile>,
}

impl ModesRun {
    pub fn table(&self) -> String {
        let mut s = String::from("mode_index  beta\n");
        for m in &self.modes {
            let _ = writeln!(s, "{:<10}  {:.12e}", m.mode_index, m.beta);
        }
        s
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// Run the design loop, using at most `threads` parallel field solves.
pub fn run_design(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Result<DesignRun> {
    let device = cfg.device()?;
    let problem = device.problem(cfg.iterations)?;
    create_dir(out)?;
    let outcome = in_pool(threads, || alternating_directions(&problem))??;
    let evaluations = device.evaluate(&outcome.structure)?;

    write_structure(&device, &outcome.structure, out, cfg.heatmaps)?;
    write_fields(&device, &evaluations, out, cfg.heatmaps)?;
    write_atomic(&out.join("trace.csv"), &trace_csv(&outcome.trace)?)?;
    write_atomic(
        &out.join("metrics.txt"),
        metrics_text(&device, &evaluations, Some(&outcome.trace)).as_bytes(),
    )?;
    Ok(DesignRun {
        device,
        outcome,
        evaluations,
    })
}

/// Simulate a stored structure (or the device's surroundings alone when
/// neither `structure` nor the config names one).
pub fn run_simulate(cfg: &RunConfig, config_dir: &Path, structure: Option<&Path>, out: &Path) -> Result<SimulateRun> {
    let device = cfg.device()?;
    let file: Option<PathBuf> = structure
        .map(Path::to_path_buf)
        .or_else(|| cfg.structure_file.as_ref().map(|p| config_dir.join(p)));
    let s = match file {
        Some(path) => {
            if !path.exists() {
                return Err(Error::Config(format!("structure file {} not found", path.display())));
            }
            let grid = GridFile::read(&path)?;
            let eps = grid.real_on(&device.grid)?;
            if let Some(k) = eps.iter().position(|e| !e.is_finite() || *e == 0.0) {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    msg: format!("permittivity at cell {k} is {}", eps[k]),
                });
            }
            Structure::from_eps(eps)?
        }
        None => device.baseline()?,
    };
    create_dir(out)?;
    let evaluations = device.evaluate(&s)?;
    write_fields(&device, &evaluations, out, cfg.heatmaps)?;
    write_atomic(&out.join("metrics.txt"), metrics_text(&device, &evaluations, None).as_bytes())?;
    Ok(SimulateRun {
        device,
        structure: s,
        evaluations,
    })
}

/// Guided modes of the `[modes]` slice, or of the device's input slice when
/// that section is absent.
pub fn run_modes(cfg: &RunConfig, out: &Path) -> Result<ModesRun> {
    let (slice, omega, periodic, only) = match &cfg.modes {
        Some(m) => {
            if !(m.wavelength_grid_points > 2.0) {
                return Err(Error::Config(format!(
                    "modes.wavelength_grid_points must exceed 2, got {}",
                    m.wavelength_grid_points
                )));
            }
            (m.slice.eps()?, 2.0 * std::f64::consts::PI / m.wavelength_grid_points, m.periodic, m.mode_index)
        }
        None => {
            let device = cfg.device()?;
            let input = match &device.evaluations[0] {
                Evaluation::Transmission { input, .. } | Evaluation::FieldMatch { input, .. } => input,
            };
            (input.slice_eps.clone(), device.objectives[0].grid.omega(), device.grid.is_periodic_y(), None)
        }
    };
    let all = slice_modes(&slice, omega, periodic)?;
    let modes = match only {
        Some(i) => {
            let available = all.len();
            vec![all.into_iter().nth(i).ok_or(Error::NoSuchMode { requested: i, available })?]
        }
        None => all,
    };
    create_dir(out)?;
    for m in &modes {
        let g = GridFile::complex(1, m.profile.len(), m.profile.clone())?;
        g.write(&out.join(format!("mode_{}.grid", m.mode_index)))?;
    }
    let run = ModesRun { omega, modes };
    write_atomic(&out.join("modes.txt"), run.table().as_bytes())?;
    Ok(run)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn write_structure(device: &Device, s: &Structure, out: &Path, heatmaps: bool) -> Result<()> {
    let g = &device.grid;
    let eps = s.eps();
    GridFile::real(g.nx, g.ny, eps.clone())?.write(&out.join("structure.grid"))?;
    if heatmaps {
        heatmap::write_permittivity(g, &eps, &out.join("structure.png"))?;
    }
    Ok(())
}

fn write_fields(device: &Device, evals: &[Evaluated], out: &Path, heatmaps: bool) -> Result<()> {
    for (k, e) in evals.iter().enumerate() {
        let g = &device.objectives[k].grid;
        GridFile::complex(g.nx, g.ny, e.field.x.clone())?.write(&out.join(format!("field_{k}.grid")))?;
        if heatmaps {
            heatmap::write_magnitude(g, &e.field.x, &out.join(format!("field_{k}_abs.png")))?;
            heatmap::write_real_part(g, &e.field.x, &out.join(format!("field_{k}_re.png")))?;
        }
    }
    Ok(())
}

/// `iteration,residual_after_field_step,residual_after_structure_step`,
/// one row per iteration. Wall time is left out so reruns match bytewise.
fn trace_csv(trace: &ConvergenceTrace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format {
        path: "trace.csv".into(),
        msg: e.to_string(),
    };
    w.write_record(["iteration", "residual_after_field_step", "residual_after_structure_step"])
        .map_err(csv_err)?;
    for r in &trace.records {
        w.write_record([
            r.iteration.to_string(),
            format!("{:e}", r.residual_after_field_step),
            format!("{:e}", r.residual_after_structure_step),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format {
        path: "trace.csv".into(),
        msg: e.to_string(),
    })
}

fn metrics_text(device: &Device, evals: &[Evaluated], trace: Option<&ConvergenceTrace>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "device = {}", device.name);
    if let Some(t) = trace {
        let _ = writeln!(s, "iterations = {}", t.records.len());
        if let Some(r) = t.final_residual() {
            let _ = writeln!(s, "final_residual = {r:e}");
        }
        let _ = writeln!(s, "structure_warnings = {}", t.structure_warnings);
        let _ = writeln!(s, "monotone = {}", t.is_monotone(1e-8));
    }
    for (k, e) in evals.iter().enumerate() {
        let p = format!("objective_{k}");
        if let Some(total) = e.total_efficiency() {
            let _ = writeln!(s, "{p}.efficiency = {total:e}");
            let _ = writeln!(s, "{p}.input_power = {:e}", e.efficiency[0].input_power);
            if e.efficiency.len() > 1 {
                for (n, r) in e.efficiency.iter().enumerate() {
                    let _ = writeln!(s, "{p}.output_{n}.efficiency = {:e}", r.efficiency);
                }
            }
        }
        if let Some(err) = &e.error {
            let _ = writeln!(s, "{p}.relative_error = {:e}", err.relative_error);
            let _ = writeln!(s, "{p}.error_plane = {}", err.plane);
        }
        let _ = writeln!(s, "{p}.solve_relative_residual = {:e}", e.solve.relative_residual);
    }
    s
}

/// `key = value` pairs of a metrics file.
pub fn read_metrics(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}
