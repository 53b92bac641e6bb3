//! Safety index synthesis and adaptation for a parameter-varying planar arm.
//!
//! The crate covers the arm model, the first-order safety index and its safe
//! control law, sum-of-squares feasibility certificates checked through
//! principal minors, determinant gradient ascent for re-certifying the index
//! after the dynamics change, and the evaluation and simulation harnesses
//! built on top.

pub mod dga;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod safe_control;
pub mod safety_index;
pub mod simulation;
pub mod sos;
pub mod synthesis;

pub use dynamics::{ArmGeometry, ControlBounds, ControlVector, StateVector, SystemParams};
pub use error::{Error, Result};
pub use safety_index::SafetyIndexParams;
pub use sos::{CertificateMatrix, IndexSet, Multipliers, SignAssignment};
