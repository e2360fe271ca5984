//! Decay fitting, marginal reconstruction, physical projection and bootstrap errors.

pub mod benchmark;
pub mod bootstrap;
pub mod fit;
pub mod projection;
pub mod reconstruct;

pub use benchmark::{cycle_benchmark_fidelity, table_total_error, total_error};
pub use bootstrap::{bootstrap, reconstruct_with_errors};
pub use fit::{fit_decay, shot_weight, DecayFit, FitPoint};
pub use projection::{project_physical, project_simplex, Projection};
pub use reconstruct::{
    fit_dataset, reconstruct_marginal, reconstruct_with_map, EigenvalueTable, MarginalEstimate, MarginalSet,
    OrbitEstimate, ReconstructionMap,
};
