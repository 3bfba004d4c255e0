//! Hardware co-design of humanoid robots for collaborative payload lifting.
//!
//! The crate is organised bottom-up:
//!
//! * [`kinematics`] and [`dynamics`]: floating-base models parametrized by
//!   link length multipliers, densities and catalog motors.
//! * [`coupled`]: the stacked human–robot–load system and its contact
//!   coupling.
//! * [`posture`]: the static posture program solved for every human and
//!   load, and the SQP solver behind it ([`sqp`]).
//! * [`evo`]: the genetic search over hardware parameters.

pub mod coupled;
pub mod dynamics;
pub mod error;
pub mod evo;
pub mod fixtures;
pub mod friction;
pub mod kinematics;
pub mod math;
pub mod model;
pub mod motor;
pub mod params;
pub mod posture;
pub mod scenes;
pub mod shape;
pub mod sqp;
pub mod state;

pub use error::{Error, Result};
pub use kinematics::{ParametrizedModel, Pose};
pub use model::KinematicModel;
pub use motor::{MotorCatalog, MotorSpec};
pub use params::HardwareParams;
pub use state::{Configuration, SystemState};
