//! Method of lines: collocation assembly, the reduced ODE, its spectrum and
//! time integration.

mod assemble;
mod integrate;
mod spectrum;

pub use assemble::{
    assemble, assemble_with, evaluate_solution, initial_coefficients, interpolate_initial, kernel_matrix,
    DiscreteSystem, InitialFit,
};
pub use integrate::{
    dopri5, integrate, IntegrateOptions, MolRhs, OdeRhs, SolveStatus, SolveTrace, StateStorage, StepMode,
};
pub use spectrum::{
    ode_matrix, pseudo_inverse_ode_matrix, spectrum_report, OdeMatrix, OdeRoute, SpectrumOptions, SpectrumReport,
    SpectrumSidecar,
};
