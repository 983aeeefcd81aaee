//! Matrix programs built from (extended) linear self-attention.

pub mod attention;
pub mod error;
pub mod gauss;
pub mod invsqr;
pub mod io;
pub mod linalg;
pub mod mask_move;
pub mod matrix;
pub mod netcomp;
pub mod pipeline;
pub mod ridge;
pub mod sample;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::{BlockSpec, Matrix};
