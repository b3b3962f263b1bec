//! Objective-first design: pin the boundary fields of a perfect device, then
//! alternate between solving for the field and for the structure so that the
//! physics residual falls.

mod alternating;
mod boxlsq;
mod objective;
mod subproblem;
pub mod targets;

pub use alternating::{
    alternating_directions, ConvergenceTrace, DesignOutcome, DesignProblem, DesignSettings, TraceRecord,
    DEFAULT_ITERATIONS, INITIAL_P,
};
pub use boxlsq::{solve_box_lsq, BoxLsqResult, BoxLsqSettings, StackedSystem};
pub use objective::{
    build_cloak_objective, build_coupler_objective, build_mimic_objective, cloak_vary_mask, extend_exterior,
    ring_objective, DesignBox, DesignObjective, PortMode, Side,
};
pub use subproblem::{
    best_group_phase, box_residual, field_subproblem, field_subproblem_with, structure_subproblem, BoxSystem, FieldStepReport,
    FieldTerm, StructureStepReport,
};
