//! Sum-of-squares certificate machinery: polynomial expansion, coefficient
//! matrix assembly and principal-minor PSD testing.

pub mod certificate;
pub mod matrix;
pub mod minors;
pub mod poly;

pub use certificate::{
    assemble_q, param_vector, refute_polynomials, LiftedState, Multipliers, ParamVector,
    ParametricCertificate, RefuteSet, SignAssignment, N_MULTIPLIERS,
};
pub use matrix::{CertificateMatrix, IndexSet, DIM};
pub use minors::{principal_minor, psd_status, PsdStatus, DEFAULT_PSD_TOL};
