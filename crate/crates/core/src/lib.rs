//! Desk-scale numerical laboratory for heat semigroups, square functions,
//! molecular decompositions and off-diagonal estimates of non-negative
//! self-adjoint operators with spectral gaps on finite doubling metric
//! measure spaces.

pub mod calculus;
pub mod error;
pub mod gge;
pub mod harness;
pub mod molecules;
pub mod operator;
pub mod squarefn;
pub mod space;

pub use error::{Error, Result};
