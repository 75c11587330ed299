//! Linear chance-constrained optimization over complex decision variables
//! with complex normal data, compiled to second-order cone programs.

pub mod beamform;
pub mod cnormal;
pub mod error;
pub mod files;
pub mod linalg;
pub mod normal;
pub mod reformulate;
pub mod socp;
pub mod validate;

pub use error::{Error, Result};
