//! Channel polarization over finite fields.
//!
//! Everything here is pure computation on owned data: finite-field linear
//! algebra, q-ary channels and their parameters, the kernel transform, the
//! channel process, code construction, an SC codec, moderate-deviation region
//! numerics and Slepian-Wolf duty computations. The crate is `no_std` and only
//! needs an allocator; file formats, threads and the CLI live in `polarlab`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod codec;
pub mod construct;
mod error;
pub mod exec;
pub mod gf;
pub mod kernel;
pub mod math;
pub mod mdp;
pub mod multiterminal;
pub mod process;
pub mod rng;
pub mod transform;

pub use error::{Error, Result};
