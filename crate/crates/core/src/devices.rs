//! Ready-made device setups: grid, environment, design box, objectives and
//! the validation measurement for each device family.
//!
//! Layouts along x are: PML, source, input plane, design box, output plane,
//! PML. Waveguide devices use absorbing y-boundaries; free-space devices are
//! periodic in y and their design box spans the full height.

use serde::{Deserialize, Serialize};

use crate::design::targets::{lens_target, mask_target, AngularSpectrum};
use crate::design::{
    best_group_phase, build_cloak_objective, build_coupler_objective, build_mimic_objective, cloak_vary_mask, extend_exterior, ring_objective,
    DesignBox, DesignObjective, DesignProblem, PortMode, Side, INITIAL_P,
};
use crate::error::{Error, Result};
use crate::fdfd::{mode_source, plane_wave_profile, simulate, slice_modes, Direction, ModeProfile, Port, SolveReport};
use crate::grid::{Boundary, GridOperators, GridSpec, PmlParams};
use crate::linalg::C64;
use crate::metrics::{coupling_efficiency, modal_amplitudes, relative_error, EfficiencyReport, ErrorReport, Plane};
use crate::physics::{FieldState, SourceSpec, Structure};

/// Cells between the PML and the source line.
const SOURCE_GAP: usize = 2;
/// Cells from the source line to the input measurement plane.
const PLANE_GAP: usize = 4;
/// Cells from the input plane to the design box.
const BOX_GAP: usize = 4;
/// Cells from the design box to the output plane.
const OUTPUT_GAP: usize = 3;

/// How a finished structure is judged.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    /// Forward power in the `outputs` modes over forward power in `input`
    /// at `input_plane`, for a source launching `input` at `port`.
    Transmission {
        input: ModeProfile,
        port: Port,
        input_plane: Plane,
        outputs: Vec<(ModeProfile, Plane)>,
    },
    /// Phase-aligned relative error against `target` on one column, for a
    /// source launching `input` at `port`.
    FieldMatch {
        input: ModeProfile,
        port: Port,
        plane: Plane,
        target: Vec<C64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub field: FieldState,
    pub solve: SolveReport,
    /// One report per output mode.
    pub efficiency: Vec<EfficiencyReport>,
    pub error: Option<ErrorReport>,
}

impl Evaluated {
    /// Summed efficiency over all outputs, if this was a transmission.
    pub fn total_efficiency(&self) -> Option<f64> {
        (!self.efficiency.is_empty()).then(|| self.efficiency.iter().map(|r| r.efficiency).sum())
    }
}

/// A complete design setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub name: String,
    pub grid: GridSpec,
    pub design_box: DesignBox,
    /// Permittivity of the surroundings with nothing designed in the box.
    pub baseline_eps: Vec<f64>,
    /// Starting structure: exterior frozen, box interior at the initial `p`.
    pub initial: Structure,
    pub objectives: Vec<DesignObjective>,
    /// Validation measurement for each objective, on that objective's grid.
    pub evaluations: Vec<Evaluation>,
}

impl Device {
    pub fn problem(&self, iterations: usize) -> Result<DesignProblem> {
        Ok(DesignProblem::new(self.initial.clone(), self.objectives.clone())?.with_iterations(iterations))
    }

    pub fn baseline(&self) -> Result<Structure> {
        Structure::new(
            self.baseline_eps.iter().map(|e| 1.0 / e).collect(),
            self.initial.p_lo,
            self.initial.p_hi,
            vec![false; self.grid.n_cells()],
        )
    }

    fn objective_grid(&self, k: usize) -> Result<&GridSpec> {
        self.objectives.get(k).map(|o| &o.grid).ok_or_else(|| {
            Error::InvalidObjective(format!("device has {} objectives, asked for {k}", self.objectives.len()))
        })
    }

    /// Excitation used to validate objective `k`.
    pub fn source(&self, k: usize) -> Result<SourceSpec> {
        let grid = self.objective_grid(k)?;
        let (input, port) = match &self.evaluations[k] {
            Evaluation::Transmission { input, port, .. } | Evaluation::FieldMatch { input, port, .. } => (input, port),
        };
        mode_source(grid, input, *port, Direction::Forward)
    }

    /// Simulate `s` under objective `k`'s excitation and measure it.
    pub fn evaluate_objective(&self, s: &Structure, k: usize) -> Result<Evaluated> {
        let grid = self.objective_grid(k)?;
        let ops = GridOperators::new(grid)?;
        let src = self.source(k)?;
        let (field, solve) = simulate(&ops, s, &src)?;
        let (efficiency, error) = match &self.evaluations[k] {
            Evaluation::Transmission {
                input,
                input_plane,
                outputs,
                ..
            } => {
                let p_in = modal_amplitudes(grid, &field, input, *input_plane)?.forward_power();
                let reports = outputs
                    .iter()
                    .map(|(mode, plane)| coupling_efficiency(grid, &field, mode, *plane, p_in))
                    .collect::<Result<_>>()?;
                (reports, None)
            }
            Evaluation::FieldMatch { plane, target, .. } => (Vec::new(), Some(relative_error(grid, &field, target, *plane)?)),
        };
        Ok(Evaluated {
            field,
            solve,
            efficiency,
            error,
        })
    }

    /// Validation of every objective.
    pub fn evaluate(&self, s: &Structure) -> Result<Vec<Evaluated>> {
        (0..self.objectives.len()).map(|k| self.evaluate_objective(s, k)).collect()
    }
}

fn pml(thickness: usize) -> Boundary {
    Boundary::Absorbing(PmlParams::with_thickness(thickness))
}

/// x positions shared by every layout.
#[derive(Debug, Clone, Copy)]
struct Columns {
    source: usize,
    input_plane: usize,
    x0: usize,
    output_plane: usize,
    nx: usize,
}

fn columns(pml: usize, box_width: usize) -> Columns {
    let source = pml + SOURCE_GAP;
    let input_plane = source + PLANE_GAP;
    let x0 = input_plane + BOX_GAP;
    let output_plane = x0 + box_width + OUTPUT_GAP;
    Columns {
        source,
        input_plane,
        x0,
        output_plane,
        nx: output_plane + 2 + SOURCE_GAP + pml,
    }
}

fn column_eps(grid: &GridSpec, eps: &[f64], i: usize) -> Vec<f64> {
    (0..grid.ny).map(|j| eps[grid.idx(i, j)]).collect()
}

fn guided_mode(slice: &[f64], omega: f64, index: usize) -> Result<ModeProfile> {
    let modes = slice_modes(slice, omega, false)?;
    let available = modes.len();
    modes.into_iter().nth(index).ok_or(Error::NoSuchMode {
        requested: index,
        available,
    })
}

/// Design structure: `eps` outside the box, ring layers extended from the
/// exterior, `vary` cells at the initial value, other interior cells as in
/// `eps`.
fn design_structure(grid: &GridSpec, b: DesignBox, eps: &[f64], vary: &[bool], p_lo: f64, p_hi: f64) -> Result<Structure> {
    let mut e = eps.to_vec();
    extend_exterior(grid, b, &mut e);
    let p = e
        .iter()
        .zip(vary)
        .map(|(v, &m)| if m { INITIAL_P.clamp(p_lo, p_hi) } else { 1.0 / v })
        .collect();
    Structure::new(p, p_lo, p_hi, vary.to_vec())
}

/// Rotate the output layers by `phase`, or by the phase that minimizes the
/// first field-step residual on `initial` when none is given.
fn set_output_phase(
    grid: &GridSpec,
    b: DesignBox,
    initial: &Structure,
    mut objective: DesignObjective,
    phase: Option<f64>,
) -> Result<DesignObjective> {
    let mut group = vec![false; grid.n_cells()];
    for k in b.cells(grid) {
        group[k] = grid.coords(k).0 + 2 >= b.x1();
    }
    let phase = match phase {
        Some(p) => p,
        None => best_group_phase(&GridOperators::new(grid)?, initial, &objective, &group)?,
    };
    objective.rotate_group(&group, phase);
    Ok(objective)
}

/// Per-cell amplitude of the forward plane wave reaching the box's left edge.
fn incident_amplitude(grid: &GridSpec, x: &FieldState, plane_wave: &ModeProfile, b: DesignBox) -> Result<C64> {
    Ok(modal_amplitudes(grid, x, plane_wave, Plane::new(b.x0))?.forward * plane_wave.profile[0])
}

fn interior_mask(grid: &GridSpec, b: DesignBox) -> Vec<bool> {
    let mut m = vec![false; grid.n_cells()];
    for k in b.cells(grid) {
        let (i, j) = grid.coords(k);
        m[k] = b.layer(grid, i, j).is_some_and(|d| d >= 2);
    }
    m
}

/// Waveguide-to-waveguide coupler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplerSpec {
    #[serde(rename = "wavelength_grid_points")]
    pub wavelength: f64,
    /// Design box extent along x (propagation) and y.
    pub box_width: usize,
    pub box_height: usize,
    pub input_width: usize,
    pub input_eps: f64,
    pub output_width: usize,
    pub output_eps: f64,
    pub input_mode: usize,
    pub output_mode: usize,
    /// Cladding cells between the design box and the y-PML.
    pub y_clearance: usize,
    pub pml_thickness: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// Phase of the pinned output wave in radians; chosen automatically
    /// when absent.
    pub output_phase: Option<f64>,
}

impl Default for CouplerSpec {
    /// Narrow silicon guide into a wide low-index guide.
    fn default() -> Self {
        Self {
            wavelength: 21.0,
            box_width: 18,
            box_height: 38,
            input_width: 5,
            input_eps: 12.25,
            output_width: 24,
            output_eps: 2.25,
            input_mode: 0,
            output_mode: 0,
            y_clearance: 6,
            pml_thickness: 10,
            eps_lo: 1.0,
            eps_hi: 12.25,
            output_phase: None,
        }
    }
}

impl CouplerSpec {
    /// Fundamental to first odd mode of one two-mode silicon guide.
    pub fn mode_converter() -> Self {
        Self {
            input_width: 8,
            output_width: 8,
            output_eps: 12.25,
            output_mode: 1,
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<Device> {
        let c = columns(self.pml_thickness, self.box_width);
        let ny = self.box_height + 2 * (self.y_clearance + self.pml_thickness);
        let grid = GridSpec::new(c.nx, ny, self.wavelength, pml(self.pml_thickness), pml(self.pml_thickness))?;
        let b = DesignBox::new(c.x0, self.y_clearance + self.pml_thickness, self.box_width, self.box_height);
        if self.input_width > self.box_height || self.output_width > self.box_height {
            return Err(Error::InvalidObjective("waveguides must fit inside the design box height".into()));
        }
        let centered = |w: usize| {
            let lo = (ny - w) / 2;
            move |j: usize| j >= lo && j < lo + w
        };
        let (in_core, out_core) = (centered(self.input_width), centered(self.output_width));
        let mid = b.x0 + b.width / 2;
        let mut eps = vec![1.0; grid.n_cells()];
        for i in 0..grid.nx {
            for j in 0..ny {
                eps[grid.idx(i, j)] = if i < mid {
                    if in_core(j) { self.input_eps } else { 1.0 }
                } else if out_core(j) {
                    self.output_eps
                } else {
                    1.0
                };
            }
        }
        let omega = grid.omega();
        let input = guided_mode(&column_eps(&grid, &eps, b.x0 - 1), omega, self.input_mode)?;
        let output = guided_mode(&column_eps(&grid, &eps, b.x1()), omega, self.output_mode)?;
        let (p_lo, p_hi) = bounds(self.eps_lo, self.eps_hi)?;
        let initial = design_structure(&grid, b, &eps, &interior_mask(&grid, b), p_lo, p_hi)?;
        let out_port = PortMode::new(Side::Right, output.clone());
        let objective = build_coupler_objective(&grid, b, &PortMode::new(Side::Left, input.clone()), &[out_port])?;
        let objective = set_output_phase(&grid, b, &initial, objective, self.output_phase)?;
        Ok(Device {
            name: if self.output_mode == 1 && self.input_mode == 0 { "mode_converter" } else { "coupler" }.into(),
            grid,
            design_box: b,
            baseline_eps: eps,
            initial,
            objectives: vec![objective],
            evaluations: vec![Evaluation::Transmission {
                input,
                port: Port::new(c.source),
                input_plane: Plane::new(c.input_plane),
                outputs: vec![(output, Plane::new(c.output_plane))],
            }],
        })
    }
}

fn bounds(eps_lo: f64, eps_hi: f64) -> Result<(f64, f64)> {
    if !(eps_lo >= 1.0) {
        return Err(Error::Config(format!("eps_lo must be at least 1, got {eps_lo}")));
    }
    if !(eps_hi >= eps_lo) || !eps_hi.is_finite() {
        return Err(Error::Config(format!("eps_hi must be finite and at least eps_lo = {eps_lo}, got {eps_hi}")));
    }
    Ok((1.0 / eps_hi, 1.0 / eps_lo))
}

/// An object to hide or imitate in free space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "shape", rename_all = "lowercase")]
pub enum ObjectSpec {
    /// Nothing but the background.
    None,
    /// Filled disc centred in the design box.
    Cylinder { radius: f64, eps: f64 },
    /// Half-space interface at the box centre: `eps` from there to the right.
    Interface { eps: f64 },
}

/// Cloak (and anti-reflection coating) on a periodic free-space grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloakSpec {
    #[serde(rename = "wavelength_grid_points")]
    pub wavelength: f64,
    pub box_width: usize,
    /// Grid height; the design box spans all of it.
    pub height: usize,
    pub background_eps: f64,
    pub object: ObjectSpec,
    /// Frozen background cells kept around the object.
    pub object_margin: usize,
    pub pml_thickness: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// As for couplers: radians, automatic when absent.
    pub output_phase: Option<f64>,
}

impl Default for CloakSpec {
    /// Plasmonic cylinder cloak.
    fn default() -> Self {
        Self {
            wavelength: 21.0,
            box_width: 30,
            height: 50,
            background_eps: 1.0,
            object: ObjectSpec::Cylinder { radius: 6.0, eps: -2.0 },
            object_margin: 1,
            pml_thickness: 10,
            eps_lo: 1.0,
            eps_hi: 12.25,
            output_phase: None,
        }
    }
}

/// Background plus object, and the object's cells.
fn free_space_eps(grid: &GridSpec, b: DesignBox, background: f64, object: &ObjectSpec) -> (Vec<f64>, Vec<bool>) {
    let mut eps = vec![background; grid.n_cells()];
    let mut mask = vec![false; grid.n_cells()];
    let cx = b.x0 as f64 + b.width as f64 / 2.0;
    let cy = grid.ny as f64 / 2.0;
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let k = grid.idx(i, j);
            match *object {
                ObjectSpec::None => {}
                ObjectSpec::Cylinder { radius, eps: e } => {
                    let (dx, dy) = (i as f64 + 0.5 - cx, j as f64 + 0.5 - cy);
                    if dx * dx + dy * dy <= radius * radius {
                        eps[k] = e;
                        mask[k] = b.contains(i, j);
                    }
                }
                ObjectSpec::Interface { eps: e } => {
                    if i as f64 + 0.5 >= cx {
                        eps[k] = e;
                    }
                }
            }
        }
    }
    (eps, mask)
}

impl CloakSpec {
    /// Quarter-wave problem: bare air–silicon interface, no frozen object.
    pub fn anti_reflection() -> Self {
        Self {
            box_width: 20,
            height: 24,
            object: ObjectSpec::Interface { eps: 12.25 },
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<Device> {
        let c = columns(self.pml_thickness, self.box_width);
        let grid = GridSpec::new(c.nx, self.height, self.wavelength, pml(self.pml_thickness), Boundary::Periodic)?;
        let b = DesignBox::new(c.x0, 0, self.box_width, self.height);
        let (eps, object) = free_space_eps(&grid, b, self.background_eps, &self.object);
        let eps_left = eps[grid.idx(0, 0)];
        let eps_right = eps[grid.idx(grid.nx - 1, 0)];
        let vary = cloak_vary_mask(&grid, b, &object, self.object_margin)?;
        let (p_lo, p_hi) = bounds(self.eps_lo, self.eps_hi)?;
        let initial = design_structure(&grid, b, &eps, &vary, p_lo, p_hi)?;
        let objective = build_cloak_objective(&grid, b, eps_left, eps_right, 0.0)?;
        let objective = set_output_phase(&grid, b, &initial, objective, self.output_phase)?;
        Ok(Device {
            name: match self.object {
                ObjectSpec::Interface { .. } => "anti_reflection",
                _ => "cloak",
            }
            .into(),
            grid,
            design_box: b,
            baseline_eps: eps,
            initial,
            objectives: vec![objective],
            evaluations: vec![Evaluation::Transmission {
                input: plane_wave_profile(&grid, eps_left)?,
                port: Port::new(c.source),
                input_plane: Plane::new(c.input_plane),
                outputs: vec![(plane_wave_profile(&grid, eps_right)?, Plane::new(c.output_plane))],
            }],
        })
    }
}

/// Field pinned on the input side of a mimic's design box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MimicInput {
    /// The unscattered plane wave alone.
    Incident,
    /// The object's full field there, reflection included.
    Total,
}

/// Free-space mimic of an object's transmitted field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MimicSpec {
    #[serde(rename = "wavelength_grid_points")]
    pub wavelength: f64,
    pub box_width: usize,
    pub height: usize,
    /// Object whose field is imitated, centred in the design box.
    pub object: ObjectSpec,
    /// Cells right of the design box where the error is measured.
    pub plane_offset: usize,
    pub input: MimicInput,
    pub pml_thickness: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// Extra phase of the target layers; the error is phase-blind, so by
    /// default it is chosen automatically.
    pub output_phase: Option<f64>,
}

impl Default for MimicSpec {
    /// Plasmonic cylinder mimic.
    fn default() -> Self {
        Self {
            wavelength: 21.0,
            box_width: 30,
            height: 50,
            object: ObjectSpec::Cylinder { radius: 6.0, eps: -2.0 },
            plane_offset: 1,
            input: MimicInput::Total,
            pml_thickness: 10,
            eps_lo: 1.0,
            eps_hi: 12.25,
            output_phase: None,
        }
    }
}

impl MimicSpec {
    pub fn build(&self) -> Result<Device> {
        let c = columns(self.pml_thickness, self.box_width);
        let grid = GridSpec::new(c.nx, self.height, self.wavelength, pml(self.pml_thickness), Boundary::Periodic)?;
        let b = DesignBox::new(c.x0, 0, self.box_width, self.height);
        let (object_eps, _) = free_space_eps(&grid, b, 1.0, &self.object);
        let plane_wave = plane_wave_profile(&grid, 1.0)?;
        let port = Port::new(c.source);
        let ops = GridOperators::new(&grid)?;
        let src = mode_source(&grid, &plane_wave, port, Direction::Forward)?;
        let (x_obj, _) = simulate(&ops, &Structure::from_eps(&object_eps)?, &src)?;
        let incident = incident_amplitude(&grid, &x_obj, &plane_wave, b)?;
        let layer = |i: usize| -> Vec<C64> { (0..grid.ny).map(|j| x_obj.x[grid.idx(i, j)]).collect() };
        let objective = match self.input {
            MimicInput::Incident => {
                let (l0, l1) = (layer(b.x1() - 2), layer(b.x1() - 1));
                build_mimic_objective(&grid, b, 1.0, incident, [&l0, &l1])?
            }
            MimicInput::Total => {
                let mut ring = vec![C64::default(); grid.n_cells()];
                for i in [b.x0, b.x0 + 1, b.x1() - 2, b.x1() - 1] {
                    for j in 0..grid.ny {
                        ring[grid.idx(i, j)] = x_obj.x[grid.idx(i, j)];
                    }
                }
                ring_objective(&grid, b, &ring, SourceSpec::zero(&grid))?
            }
        };

        let vacuum = vec![1.0; grid.n_cells()];
        let (p_lo, p_hi) = bounds(self.eps_lo, self.eps_hi)?;
        let initial = design_structure(&grid, b, &vacuum, &interior_mask(&grid, b), p_lo, p_hi)?;
        let objective = set_output_phase(&grid, b, &initial, objective, self.output_phase)?;
        let plane = b.x1() + self.plane_offset;
        if grid.column_in_pml(plane) {
            return Err(Error::PlaneInPml(plane));
        }
        Ok(Device {
            name: "mimic".into(),
            grid,
            design_box: b,
            baseline_eps: object_eps,
            initial,
            objectives: vec![objective],
            evaluations: vec![Evaluation::FieldMatch {
                input: plane_wave,
                port,
                plane: Plane::new(plane),
                target: layer(plane),
            }],
        })
    }
}

/// Analytic output pattern for a free-space target device. Lengths are in
/// wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetShape {
    /// Gaussian focus of intensity width `fwhm`, `focal_distance` past the
    /// measurement plane.
    Lens {
        #[serde(rename = "fwhm_wavelengths")]
        fwhm: f64,
        #[serde(rename = "focal_distance_wavelengths")]
        focal_distance: f64,
    },
    /// Three spots of width `spot_fwhm` spaced `separation` apart, on the
    /// measurement plane itself.
    Mask {
        #[serde(rename = "separation_wavelengths")]
        separation: f64,
        #[serde(rename = "spot_fwhm_wavelengths")]
        spot_fwhm: f64,
    },
}

/// Free-space device that turns a normally incident plane wave into a
/// prescribed pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSpec {
    #[serde(rename = "wavelength_grid_points")]
    pub wavelength: f64,
    pub box_width: usize,
    pub height: usize,
    pub target: TargetShape,
    /// Cells right of the design box where the pattern is measured.
    pub plane_offset: usize,
    pub pml_thickness: usize,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub output_phase: Option<f64>,
}

impl Default for TargetSpec {
    /// Half-wavelength focusing lens.
    fn default() -> Self {
        Self {
            wavelength: 21.0,
            box_width: 30,
            height: 60,
            target: TargetShape::Lens {
                fwhm: 0.5,
                focal_distance: 1.0,
            },
            plane_offset: 1,
            pml_thickness: 10,
            eps_lo: 1.0,
            eps_hi: 12.25,
            output_phase: None,
        }
    }
}

impl TargetSpec {
    /// Sub-wavelength mask: three spots 0.28 wavelengths apart.
    pub fn mask() -> Self {
        Self {
            target: TargetShape::Mask {
                separation: 0.28,
                spot_fwhm: 0.15,
            },
            ..Self::default()
        }
    }

    /// Target row on the measurement plane, before power matching.
    pub fn pattern(&self, omega: f64) -> Result<Vec<C64>> {
        let lambda = self.wavelength;
        match self.target {
            TargetShape::Lens { fwhm, focal_distance } => {
                if !(focal_distance >= 0.0) {
                    return Err(Error::Config(format!("focal_distance must be nonnegative, got {focal_distance}")));
                }
                let d = (focal_distance * lambda).round() as usize;
                Ok(lens_target(self.height, omega, fwhm * lambda, d)?.plane_row)
            }
            TargetShape::Mask { separation, spot_fwhm } => {
                if !(separation > 0.0 && spot_fwhm > 0.0) {
                    return Err(Error::Config("mask separation and spot_fwhm must be positive".into()));
                }
                Ok(mask_target(self.height, separation * lambda, spot_fwhm * lambda))
            }
        }
    }

    pub fn build(&self) -> Result<Device> {
        let c = columns(self.pml_thickness, self.box_width);
        let grid = GridSpec::new(c.nx, self.height, self.wavelength, pml(self.pml_thickness), Boundary::Periodic)?;
        let b = DesignBox::new(c.x0, 0, self.box_width, self.height);
        let plane = b.x1() + self.plane_offset;
        if grid.column_in_pml(plane) {
            return Err(Error::PlaneInPml(plane));
        }
        let vacuum = vec![1.0; grid.n_cells()];
        let plane_wave = plane_wave_profile(&grid, 1.0)?;
        let port = Port::new(c.source);
        let ops = GridOperators::new(&grid)?;
        let src = mode_source(&grid, &plane_wave, port, Direction::Forward)?;
        let (x_vac, _) = simulate(&ops, &Structure::from_eps(&vacuum)?, &src)?;
        let incident = incident_amplitude(&grid, &x_vac, &plane_wave, b)?;

        let prop = AngularSpectrum::new(grid.ny, grid.omega(), 1.0)?;
        let row = self.pattern(grid.omega())?;
        let scale = match self.target {
            // carries the incident power forward
            TargetShape::Lens { .. } => {
                let incident_power = grid.ny as f64 * plane_wave.beta.sin() * incident.norm_sqr();
                let row_power = prop.power(&row)?;
                if !(row_power > 0.0) {
                    return Err(Error::InvalidObjective("target pattern carries no propagating power".into()));
                }
                (incident_power / row_power).sqrt()
            }
            // mostly evanescent, so match the incident row's norm instead
            TargetShape::Mask { .. } => {
                let norm = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                incident.norm() * (grid.ny as f64).sqrt() / norm
            }
        };
        let target: Vec<C64> = row.iter().map(|v| v * scale).collect();
        let back = |cells: usize| prop.propagate(&target, -(cells as i32));
        let (l0, l1) = (back(self.plane_offset + 2)?, back(self.plane_offset + 1)?);
        let objective = build_mimic_objective(&grid, b, 1.0, incident, [&l0, &l1])?;

        let (p_lo, p_hi) = bounds(self.eps_lo, self.eps_hi)?;
        let initial = design_structure(&grid, b, &vacuum, &interior_mask(&grid, b), p_lo, p_hi)?;
        let objective = set_output_phase(&grid, b, &initial, objective, self.output_phase)?;
        Ok(Device {
            name: "target".into(),
            grid,
            design_box: b,
            baseline_eps: vacuum,
            initial,
            objectives: vec![objective],
            evaluations: vec![Evaluation::FieldMatch {
                input: plane_wave,
                port,
                plane: Plane::new(plane),
                target,
            }],
        })
    }
}

/// Rectangle of fixed permittivity painted over the background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    pub eps: f64,
}

/// Guided mode at a port: mode `mode` of the column slice restricted to
/// rows `rows[0]..rows[1]` (the whole column when absent).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortSpec {
    pub mode: usize,
    pub rows: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomObjective {
    #[serde(rename = "wavelength_grid_points")]
    pub wavelength: f64,
    /// Port on the box's left side.
    pub input: PortSpec,
    /// Ports on the box's right side; the input power is split evenly.
    pub outputs: Vec<PortSpec>,
    #[serde(default)]
    pub output_phase: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YBoundary {
    #[default]
    Absorbing,
    Periodic,
}

fn default_pml() -> usize {
    10
}
fn default_eps_lo() -> f64 {
    1.0
}
fn default_eps_hi() -> f64 {
    12.25
}

/// Free-form waveguide device: blocks on a background, one design box, and
/// one objective per wavelength or mode pairing. Blocks inside the box
/// interior stay frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "default_pml")]
    pub pml_thickness: usize,
    #[serde(default)]
    pub y_boundary: YBoundary,
    #[serde(default = "default_eps_lo")]
    pub background_eps: f64,
    #[serde(default = "default_eps_lo")]
    pub eps_lo: f64,
    #[serde(default = "default_eps_hi")]
    pub eps_hi: f64,
    pub design_box: DesignBox,
    #[serde(default)]
    pub blocks: Vec<Block>,
    pub objectives: Vec<CustomObjective>,
}

impl CustomSpec {
    /// Two-wavelength splitter: one silicon guide in, two out; each
    /// wavelength is routed to its own output.
    pub fn wavelength_splitter() -> Self {
        let (pml, gap) = (10, 6);
        let (bw, bh) = (36, 40);
        let ny = bh + 2 * (pml + gap);
        let x0 = pml + SOURCE_GAP + PLANE_GAP + BOX_GAP;
        let nx = x0 + bw + OUTPUT_GAP + 2 + SOURCE_GAP + pml;
        let mid = ny / 2;
        let (w, sep) = (5, 20);
        let guide = |x0: usize, width: usize, y0: usize| Block {
            x0,
            y0,
            width,
            height: w,
            eps: 12.25,
        };
        let (lo, hi) = (mid - sep / 2 - w / 2, mid + sep / 2 - w / 2);
        let port = |y0: usize| PortSpec {
            mode: 0,
            rows: Some([y0 - 5, y0 + w + 5]),
        };
        let objective = |wavelength: f64, y0: usize| CustomObjective {
            wavelength,
            input: PortSpec::default(),
            outputs: vec![port(y0)],
            output_phase: None,
        };
        Self {
            nx,
            ny,
            pml_thickness: pml,
            y_boundary: YBoundary::Absorbing,
            background_eps: 1.0,
            eps_lo: 1.0,
            eps_hi: 12.25,
            design_box: DesignBox::new(x0, pml + gap, bw, bh),
            blocks: vec![
                guide(0, x0 + bw / 2, mid - w / 2),
                guide(x0 + bw / 2, nx - x0 - bw / 2, lo),
                guide(x0 + bw / 2, nx - x0 - bw / 2, hi),
            ],
            objectives: vec![objective(18.0, lo), objective(26.0, hi)],
        }
    }

    pub fn build(&self) -> Result<Device> {
        if self.objectives.is_empty() {
            return Err(Error::Config("custom device needs at least one [[custom.objectives]] entry".into()));
        }
        let pml_x = pml(self.pml_thickness);
        let y = match self.y_boundary {
            YBoundary::Absorbing => pml(self.pml_thickness),
            YBoundary::Periodic => Boundary::Periodic,
        };
        let (p_lo, p_hi) = bounds(self.eps_lo, self.eps_hi)?;
        let b = self.design_box;
        let source = self.pml_thickness + SOURCE_GAP;
        let input_plane = source + PLANE_GAP;
        let output_plane = b.x1() + OUTPUT_GAP;
        if b.x0 < input_plane + 2 {
            return Err(Error::Config(format!(
                "design_box.x0 = {} leaves no room for the source and input plane; need at least {}",
                b.x0,
                input_plane + 2
            )));
        }
        if output_plane + 2 + self.pml_thickness > self.nx {
            return Err(Error::Config(format!(
                "design box ends at column {} too close to the right PML; need nx >= {}",
                b.x1(),
                output_plane + 2 + self.pml_thickness
            )));
        }

        let grids = self
            .objectives
            .iter()
            .map(|o| GridSpec::new(self.nx, self.ny, o.wavelength, pml_x, y))
            .collect::<Result<Vec<_>>>()?;
        let grid = grids[0];
        if !b.fits(&grid) {
            return Err(Error::Config(format!("design_box {b:?} does not fit the {}x{} grid", self.nx, self.ny)));
        }
        let mut eps = vec![self.background_eps; grid.n_cells()];
        let mut vary = interior_mask(&grid, b);
        for blk in &self.blocks {
            if blk.x0 + blk.width > self.nx || blk.y0 + blk.height > self.ny {
                return Err(Error::Config(format!("block {blk:?} extends past the grid")));
            }
            for i in blk.x0..blk.x0 + blk.width {
                for j in blk.y0..blk.y0 + blk.height {
                    let k = grid.idx(i, j);
                    eps[k] = blk.eps;
                    vary[k] = false;
                }
            }
        }
        let initial = design_structure(&grid, b, &eps, &vary, p_lo, p_hi)?;
        let periodic = self.y_boundary == YBoundary::Periodic;

        let mut objectives = Vec::new();
        let mut evaluations = Vec::new();
        for (o, g) in self.objectives.iter().zip(&grids) {
            let port_mode = |spec: &PortSpec, column: usize, side: Side| -> Result<PortMode> {
                let full = column_eps(g, &eps, column);
                let [lo, hi] = spec.rows.unwrap_or([0, self.ny]);
                if lo >= hi || hi > self.ny {
                    return Err(Error::Config(format!("port rows [{lo}, {hi}] are not a range inside the grid")));
                }
                let modes = slice_modes(&full[lo..hi], g.omega(), periodic && lo == 0 && hi == self.ny)?;
                let available = modes.len();
                let mode = modes.into_iter().nth(spec.mode).ok_or(Error::NoSuchMode {
                    requested: spec.mode,
                    available,
                })?;
                Ok(PortMode {
                    side,
                    mode,
                    row_offset: lo,
                    phase: 0.0,
                })
            };
            let input = port_mode(&o.input, b.x0 - 1, Side::Left)?;
            let outputs = o
                .outputs
                .iter()
                .map(|spec| port_mode(spec, b.x1(), Side::Right))
                .collect::<Result<Vec<_>>>()?;
            let objective = build_coupler_objective(g, b, &input, &outputs)?;
            objectives.push(set_output_phase(g, b, &initial, objective, o.output_phase)?);
            evaluations.push(Evaluation::Transmission {
                port: Port {
                    column: source,
                    row_offset: input.row_offset,
                },
                input_plane: Plane {
                    column: input_plane,
                    row_offset: input.row_offset,
                },
                input: input.mode,
                outputs: outputs
                    .into_iter()
                    .map(|p| {
                        let plane = Plane {
                            column: output_plane,
                            row_offset: p.row_offset,
                        };
                        (p.mode, plane)
                    })
                    .collect(),
            });
        }
        Ok(Device {
            name: "custom".into(),
            grid,
            design_box: b,
            baseline_eps: eps,
            initial,
            objectives,
            evaluations,
        })
    }
}
