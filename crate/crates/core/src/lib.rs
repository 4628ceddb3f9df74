//! Ant colony and simulated annealing solvers for the Sequential Ordering
//! Problem: find a cheapest Hamiltonian path from a fixed start node to a
//! fixed final node of an asymmetric cost matrix, visiting every node
//! after all of its required predecessors.
//!
//! Costs are exact integers ([`Cost`]). Pheromone and temperature
//! arithmetic is generic over [`Scalar`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below fix the precision.
//!
//! ```
//! use sop_core::{run, Algorithm, Budget, Instance, LocalSearchKind, RunConfigF64};
//!
//! let instance = Instance::from_matrix(
//!     "tiny",
//!     4,
//!     vec![0, 2, 9, 14, -1, 0, 3, 7, -1, -1, 0, 1, -1, -1, -1, 0],
//! )
//! .unwrap();
//! let config = RunConfigF64::new(Algorithm::Eacs, LocalSearchKind::Sop3, Budget::iterations(20), 7);
//! let report = run(&config, &instance).unwrap();
//! assert_eq!(report.best_cost(), Some(6));
//! ```

pub mod annealing;
pub mod colony;
pub mod driver;
pub mod harness;
pub mod instance;
pub mod local_search;
mod scalar;
pub mod solution;

pub use annealing::{AnnealerState, AnnealingError};
pub use colony::{ColonyError, ColonyParams, ConstructionRule, PheromoneModel};
pub use driver::{
    brute_force_optimum, run, Algorithm, AnnealingParams, Budget, DriverError, LocalSearchKind, RunConfig, RunReport,
    TraceRow,
};
pub use instance::{Cost, Format, Instance, InstanceError, ValidationReport, Violation};
pub use local_search::{AcceptancePolicy, SearchOptions, StackInit};
pub use scalar::Scalar;
pub use solution::{Route, SolutionError};

pub type PheromoneModelF64 = PheromoneModel<f64>;
pub type PheromoneModelF32 = PheromoneModel<f32>;
pub type ColonyParamsF64 = ColonyParams<f64>;
pub type ColonyParamsF32 = ColonyParams<f32>;
pub type AnnealerStateF64 = AnnealerState<f64>;
pub type AnnealerStateF32 = AnnealerState<f32>;
pub type AcceptancePolicyF64 = AcceptancePolicy<f64>;
pub type AcceptancePolicyF32 = AcceptancePolicy<f32>;
pub type RunConfigF64 = RunConfig<f64>;
pub type RunConfigF32 = RunConfig<f32>;
