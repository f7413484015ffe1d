//! Entanglement cost of localizing joint quantum measurements.
//!
//! A measurement is a unitary whose columns are its eigenvectors. The crate
//! checks whether a measurement can be reproduced by separated parties that
//! share a finite number of ebits and teleport their systems back and forth,
//! and provides lower and upper bounds on that number.

pub mod bank;
pub mod basis;
pub mod catalog;
pub mod clark;
pub mod conic;
pub mod error;
pub mod heuristic;
pub mod hierarchy;
pub mod equivalence;
pub mod linalg;
pub mod localizability;
pub mod optimize;
pub mod pauli;
pub mod perm;
pub mod protosim;
pub mod repsolver;
pub mod sdpbound;

pub use basis::MeasurementBasis;
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, Complex64};
pub use perm::{as_perm_with_phases, PermWithPhases};
