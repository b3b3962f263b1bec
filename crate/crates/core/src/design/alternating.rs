//! Alternating-directions driver: field steps for every objective, then one
//! structure step over all of them, repeated.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridOperators;
use crate::physics::{FieldState, Structure};

use super::boxlsq::BoxLsqSettings;
use super::objective::DesignObjective;
use super::subproblem::{field_subproblem_with, structure_subproblem, BoxSystem, FieldTerm};

/// Initial inverse permittivity of the design cells.
pub const INITIAL_P: f64 = 1.0 / 9.0;
pub const DEFAULT_ITERATIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSettings {
    pub max_iterations: usize,
    pub structure: BoxLsqSettings,
    /// Stop once the total residual drops below this multiple of `Σ ‖d_i‖`.
    pub early_stop: f64,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_ITERATIONS,
            structure: BoxLsqSettings::default(),
            early_stop: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub structure: Structure,
    pub objectives: Vec<DesignObjective>,
    pub settings: DesignSettings,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub residual_after_field_step: f64,
    pub residual_after_structure_step: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    /// Structure steps that hit their iteration cap.
    pub structure_warnings: usize,
}

impl ConvergenceTrace {
    /// Residuals in half-step order: field, structure, field, structure, ...
    pub fn half_steps(&self) -> Vec<f64> {
        self.records
            .iter()
            .flat_map(|r| [r.residual_after_field_step, r.residual_after_structure_step])
            .collect()
    }

    /// True if no half-step raised the residual by more than `slack`
    /// (relative).
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.half_steps().windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual_after_structure_step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub structure: Structure,
    /// Last field-step solution of each objective.
    pub fields: Vec<FieldState>,
    pub trace: ConvergenceTrace,
}

impl DesignProblem {
    pub fn new(structure: Structure, objectives: Vec<DesignObjective>) -> Result<Self> {
        let prob = Self {
            structure,
            objectives,
            settings: DesignSettings::default(),
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_iterations(mut self, n: usize) -> Self {
        self.settings.max_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.objectives.is_empty() {
            return Err(Error::InvalidObjective("a design needs at least one objective".into()));
        }
        self.structure.validate()?;
        for obj in &self.objectives {
            obj.validate()?;
            self.structure.check_grid(&obj.grid)?;
        }
        Ok(())
    }
}

fn iteration_error(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| Error::AtIteration {
        iteration,
        source: Box::new(e),
    }
}

/// Run the alternating field/structure iteration.
pub fn alternating_directions(prob: &DesignProblem) -> Result<DesignOutcome> {
    prob.validate()?;
    let ops: Vec<GridOperators> = prob
        .objectives
        .iter()
        .map(|o| GridOperators::new(&o.grid))
        .collect::<Result<_>>()?;
    let systems: Vec<BoxSystem> = prob.objectives.iter().map(BoxSystem::new).collect();
    let mut structure = prob.structure.clone();
    let mut fields: Vec<FieldState> = Vec::new();
    let mut trace = ConvergenceTrace::default();
    let start = Instant::now();

    for it in 1..=prob.settings.max_iterations {
        let wrap = iteration_error(it);
        let steps: Vec<_> = (0..prob.objectives.len())
            .into_par_iter()
            .map(|k| field_subproblem_with(&ops[k], &structure, &prob.objectives[k], &systems[k]))
            .collect::<Result<_>>()
            .map_err(&wrap)?;
        let field_residual = steps.iter().map(|(_, r)| r.residual.powi(2)).sum::<f64>().sqrt();
        fields = steps.into_iter().map(|(x, _)| x).collect();

        let terms: Vec<FieldTerm<'_>> = (0..fields.len())
            .map(|k| FieldTerm {
                ops: &ops[k],
                objective: &prob.objectives[k],
                system: &systems[k],
                field: &fields[k],
            })
            .collect();
        let (next, report) = structure_subproblem(&terms, &structure, &prob.settings.structure).map_err(&wrap)?;
        if !report.converged {
            trace.structure_warnings += 1;
        }
        structure = next;
        trace.records.push(TraceRecord {
            iteration: it,
            residual_after_field_step: field_residual,
            residual_after_structure_step: report.residual_after,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        log::debug!(
            "iteration {it}: field {field_residual:.6e}, structure {:.6e} ({} inner)",
            report.residual_after,
            report.iterations
        );
        if report.residual_after < prob.settings.early_stop * report.rhs_norm {
            break;
        }
    }
    Ok(DesignOutcome {
        structure,
        fields,
        trace,
    })
}
