//! Scenario configuration, export and the command-line interface.

pub mod cli;
mod export;
mod gradcheck;
mod scenario;

pub use cli::run_cli;
pub use export::{export_evolution, export_history, export_vtk, step_file_name, HISTORY_COLUMNS};
pub use gradcheck::{gradcheck, random_mesh, GradcheckReport};
pub use scenario::{
    load_scenario, preset, Geometry, LoadingConfig, LoadingKind, LoadsConfig, MaterialConfig, Scenario, SeedConfig,
    SolverSection, PRESETS,
};
