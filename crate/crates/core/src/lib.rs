//! Observability Gramians along geodesic rays for coupled wave systems.
//!
//! The crate works on the unit cosphere bundle of a flat torus or the round
//! 2-sphere. For each ray it assembles the transported linear ODE, integrates
//! its Gramian, and reduces over a sampled set of rays to an observability
//! constant. Normal forms for constant pairs, the cascade criterion and a
//! Fourier-based wave solver for cross-checks live alongside.
//!
//! Without the `std` feature the crate is `no_std` and only needs `alloc`.
//! The spectral solver depends on an FFT and is only built with `std`.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cascade;
pub mod error;
pub mod linalg;
pub mod ltv_control;
pub mod normal_forms;
pub mod observability;
pub mod phase_flow;
#[cfg(feature = "std")]
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};
pub use linalg::{CMat, RMat, C64};
