#![no_std]

extern crate alloc;

pub mod error;
pub mod fisher;
pub mod geometry;
pub mod helmholtz;
pub mod negativity;
pub mod quadrature;
pub mod sweep;
pub mod wigner;

pub use error::{CoreError, Result};
