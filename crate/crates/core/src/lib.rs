//! Kinematics engine for a three-translation parallel mechanism driven by
//! three fixed prismatic actuators.
//!
//! * [`model`]: dimensions, chain points, loop-closure residuals.
//! * [`fk`] / [`ik`]: closed-form direct and inverse position solutions with
//!   full branch enumeration.
//! * [`oracle`]: brute-force assembly finder that only knows the residuals.
//! * [`analysis`]: Jacobians, decoupling, singularity margins and flags.
//! * [`topology`]: POC-set algebra, mobility, constraint and coupling degree.
//! * [`workspace`]: grid sweeps, singularity loci, CSV/JSON export.
//! * [`fold`]: paths that approach each singularity, with root separation
//!   and conditioning ladders.
//! * [`sampling`]: seeded regular-configuration sampler.
//! * [`validate`] and [`reference`](mod@reference): randomized equivalence harness and the
//!   audit of the published reference tables.
//! * [`numfmt`]: 9-significant-digit number formatting shared by the outputs.

pub mod analysis;
pub mod fk;
pub mod fold;
pub mod ik;
pub mod model;
pub mod numfmt;
pub mod oracle;
pub mod reference;
pub(crate) mod numeric;
pub mod sampling;
pub mod sign;
pub mod topology;
pub mod validate;
pub mod workspace;

pub use fk::{direct_kinematics, FkBranch, FkError, FkSolution};
pub use ik::{inverse_kinematics, IkBranch, IkError, IkSolution};
pub use model::{ActuatorInput, InternalConfig, MechanismParams, PlatformPose};
pub use sign::Sign;
