//! Cycle error reconstruction: Pauli algebra, hard-cycle orbits, noisy cycle
//! simulation, decay fitting, marginal reconstruction and logical error rates.

pub mod channel;
pub mod cycle;
pub mod dense;
pub mod design;
pub mod error;
pub mod estimation;
pub mod grf;
pub mod logical;
pub mod noise;
pub mod pauli;
pub mod seed;
pub mod sim;
pub mod steane;
pub mod wht;

pub use channel::PauliChannel;
pub use cycle::{HardCycle, Orbit};
pub use dense::DenseProcess;
pub use design::{DesignPlan, Eigenstate, Level, MarginalTarget};
pub use error::{Error, Result};
pub use grf::{build_transversal_graph, FactorGraph, JointErrorModel};
pub use logical::{logical_rates, LogicalRates};
pub use noise::{NoiseModel, ProductChannel};
pub use pauli::{Letter, PauliOperator, QubitSubset};
pub use sim::{CircuitSpec, CycleNoise, DecayDataset};
pub use steane::{ErrorClass, SteaneCodePair};
