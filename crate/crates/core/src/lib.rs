//! Circular neighbor-balanced block designs under one- and two-sided
//! interference models.
//!
//! The crate builds information matrices for total effects (a treatment's
//! direct effect plus its own neighbor effects), checks universal
//! optimality, characterizes optimal block sequences for continuous designs
//! and derives efficiency factors. Exact rational arithmetic is used for
//! every information matrix and trace; floats only appear for eigenvalues,
//! criterion values and simulation.

pub mod designs;
pub mod error;
pub mod estimation;
pub mod information;
pub mod matrixkit;
pub mod optimality;
pub mod rational;
pub mod sequences;

pub use designs::{
    classify, incidence_matrices, parse_design, sequence_profile, BlockProfile, ClassificationReport, Design,
    IncidenceSet, SequenceProfile,
};
pub use error::{Error, Result};
pub use information::{
    c_values, closed_form_cnbd, info_joint, info_total_exact, info_total_upper, EffectModel, InfoKind, InfoMatrix,
};
pub use rational::Rational;
pub use sequences::{
    brute_force_best, f_tilde_value, f_value, optimal_composition, representative_sequence, upper_bound_trace,
    OptimalComposition,
};
