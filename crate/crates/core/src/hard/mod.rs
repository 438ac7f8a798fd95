//! Two-point and Gilbert-Varshamov families of hard MDPs and their
//! closed-form checks.

mod gv;
mod instances;
mod verify;

pub use gv::{
    default_code_size, default_min_distance, gilbert_varshamov, to_bits, GvCode,
    LEXICOGRAPHIC_MAX_H, MAX_REJECTIONS,
};
pub use instances::{
    build_finite_family, build_infinite_pair, write_sidecar, FiniteHardInstance,
    InfiniteHardInstance, FINITE_C1, FINITE_C2, FINITE_MIN_H,
};
pub use verify::{
    verify_finite, verify_infinite, CheckItem, VerifyReport, CONCENTRABILITY_TOL, OCCUPANCY_TOL,
    VALUE_TOL,
};
