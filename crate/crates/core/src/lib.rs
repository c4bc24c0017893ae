//! Moment-SoS relaxations of generalized moment problems and their use for
//! real symmetric tensor decomposition.

pub mod conic;
pub mod error;
pub mod experiments;
pub mod extract;
pub mod gmp;
pub mod moment;
pub mod poly;
pub mod rates;
pub mod tensor;

pub use error::{Error, Result};
