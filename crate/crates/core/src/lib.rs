//! Analysis and design toolkit for multi-class 1D/2D OCDMA systems and
//! adaptive OCDMA passive optical networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`combinatorics`]: exact binomials, the Johnson cardinality bound and
//!   the code-design constraint predicates.
//! * [`ber`]: exact (inclusion-exclusion) and closed-form approximate
//!   bit-error rates for multi-class systems limited by multi-access
//!   interference.
//! * [`design`]: rate-optimized and power-optimized code design, solved by
//!   exhaustive search and by a boundary-intersection heuristic.
//! * [`allocator`]: codebook tables for adaptive code reallocation, a
//!   Monte-Carlo gain estimator and a message-driven control-unit simulator.

pub mod allocator;
pub mod ber;
pub mod combinatorics;
pub mod design;
mod error;

pub use error::{Error, Result};

pub use allocator::{
    build_codebooks, parse_events, run_message_simulation, simulate_gain, AllocationMode,
    Assignment, CodebookTable, Event, EventKind, GainEstimate, GainReport, GainVariant, SimConfig,
};
pub use ber::{
    approx_ber, approx_ber_single, bracket_coefficients, exact_ber, power_ratio_matrix,
    single_class_ber, worst_case_model, BerValue, InterferenceModel, Precision, SystemSpec,
};
pub use combinatorics::{binomial, check_constraints, johnson_bound, CodeParams, ConstraintCheck};
pub use design::{
    complexity_gain, is_feasible, power_optimize_brute, rate_optimize_brute,
    rate_optimize_heuristic, DesignResult, DesignTarget, Method, SearchBounds,
};
