//! Relativistic Vlasov-Maxwell in one space and two momentum dimensions,
//! its Vlasov-Poisson limit, and the diagnostics that track the distance
//! between the two as the speed of light grows.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod initial_data;
pub mod interp;
pub mod kinematics;
pub mod maxwell;
pub mod vlasov;

pub use error::{Error, Result};
pub use grid::{Axis, PhaseSpaceGrid, NGHOST};
pub use initial_data::{
    build_initial_data, gauss_e1, validate_assumptions, BackgroundProfile, BackgroundShape, InitialData,
    Perturbation, ProfileKind, ProfileSpec, SpeciesProfile, ValidationReport,
};
pub use kinematics::{LightSpeed, SpeciesParams};
pub use maxwell::{FieldState, SourceMoments};
pub use vlasov::{CharacteristicTrace, DistributionField, SimState, Stepper};
