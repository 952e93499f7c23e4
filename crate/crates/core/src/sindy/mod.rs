//! Sparse identification of the ω–u dynamics: candidate libraries anchored on
//! the steady-state constraint `f_ss`, sequentially thresholded least squares,
//! and assembly of the result into an [`OmegaUModel`](crate::plant::OmegaUModel).

mod assemble;
mod library;
mod stlsq;

pub use assemble::{assemble_omega_u_model, MODEL_FEATURES};
pub use library::{build_library_a, build_library_b, CandidateLibrary, Feature, StateSample};
pub use stlsq::{stlsq, stlsq_from, SparseModel, DEFAULT_MAX_ITERS, DEFAULT_THRESHOLD};
