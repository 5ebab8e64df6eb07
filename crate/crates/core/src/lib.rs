//! Control-oriented single particle model (SPM) of a lithium-ion cell.
//!
//! The crate implements the grouped-parameter SPM as a four-state linear ODE
//! with a nonlinear voltage map, an ungrouped parabolic-approximation model
//! used to check the grouping, fixed-step simulation against current
//! profiles, variance-based (Sobol) sensitivity analysis of the nine grouped
//! parameters, and particle swarm estimation in full (9) or reduced (6)
//! parameter mode.
//!
//! ```
//! use spm_core::{simulate, CurrentProfile, GroupedModel, GroupedParameters, PhysicalConstants};
//!
//! let params = GroupedParameters::nominal();
//! let model = GroupedModel::new(params, PhysicalConstants::default()).unwrap();
//! let profile = CurrentProfile::constant_current(1.0, 2.9, 600.0, 1.0).unwrap();
//! let result = simulate(&model, &profile, 2.5, 1.0).unwrap();
//! assert_eq!(result.time.len(), 601);
//! ```

pub mod analysis;
pub mod error;
pub mod estimation;
pub mod integrate;
pub mod model;
pub mod profiles;
pub mod reference;
pub mod sensitivity;
pub mod sim;

pub use error::{Result, SpmError};
pub use model::{
    CellOutput, CellState, Concentrations, Electrode, GroupedModel, GroupedParameters,
    ParameterName, PhysicalConstants,
};
pub use profiles::CurrentProfile;
pub use reference::{group_parameters, FullParameters, PregroupedModel, PregroupedState};
pub use sim::{
    compare_models, multi_condition_rmse, rmse, simulate, BoundExit, CellModel, Deviation,
    SimulationResult, Termination,
};
